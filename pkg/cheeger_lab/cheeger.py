"""Weighted Cheeger constant h = min P_a(E) / vol_b(E) over cell sets.

P_a(E) counts the exterior faces too, so h is the Dirichlet constant.  The
exact minimiser comes from Dinkelbach iterations whose parametric step
``min_E P_a(E) - t vol_b(E)`` is an s-t minimum cut (networkx flow).
"""
import collections
import dataclasses
import logging
import typing

import networkx as nx
import numpy as np
import scipy.ndimage
import scipy.spatial
from networkx.algorithms import flow

from . import domain as domain_, errors, p_eigen, settings

logger = logging.getLogger(__name__)

SOURCE = 'source'
SINK = 'sink'
FLOW_FUNCTIONS = {
    'boykov_kolmogorov': flow.boykov_kolmogorov,
    'edmonds_karp': flow.edmonds_karp,
}
RESIDUAL_TOL = 1e-12
TIE_TOL = 1e-12
BRUTE_FORCE_CHUNK = 1 << 16
DISTANCE_CHUNK = 1024

CutStep = collections.namedtuple('CutStep', ['t', 'cut', 'size'])


@dataclasses.dataclass
class CheegerOptions:
    delta: float = settings.CUT_DELTA
    max_iters: int = settings.DINKELBACH_MAX_ITERS
    algorithm: str = settings.FLOW_ALGORITHM

    def __post_init__(self):
        if self.algorithm not in FLOW_FUNCTIONS:
            raise errors.ValidationError(
                'unknown flow algorithm {!r} (one of {})'.format(
                    self.algorithm, ', '.join(sorted(FLOW_FUNCTIONS))),
                key='cheeger.algorithm')
        if self.delta < 0:
            raise errors.ValidationError(
                'must not be negative', key='cheeger.delta')


@dataclasses.dataclass
class FlowNetwork:
    """Cut graph over compressed cell indices plus SOURCE and SINK.

    The cut value of a source set S, divided by ``scale`` and shifted by
    ``offset``, is the set functional evaluated at S.
    """
    graph: nx.DiGraph
    domain: domain_.WeightedDomain
    t: float = 0.0
    scale: float = 1.0
    offset: float = 0.0

    def capacity(self, tail, head):
        if not self.graph.has_edge(tail, head):
            return 0.0
        return self.graph[tail][head]['capacity']


@dataclasses.dataclass
class CheegerSolution:
    h: float
    set: domain_.SetMask
    method: str
    trace: typing.Tuple = ()
    perimeter: float = 0.0
    volume: float = 0.0

    @property
    def iterations(self):
        return len(self.trace)

    @property
    def certificate(self):
        return self.perimeter - self.h * self.volume


def _exterior_cells(domain):
    faces = domain.faces
    exterior = domain.exterior
    return np.where(
        faces.tail[exterior] < 0, faces.head[exterior], faces.tail[exterior])


def _ratio(subset):
    perimeter = domain_.weighted_perimeter(subset)
    volume = domain_.weighted_volume(subset)
    return perimeter / volume, perimeter, volume


def build_cut_graph(domain, t):
    if t < 0:
        raise errors.NegativeT('t must be >= 0, got {}'.format(t))

    faces = domain.faces
    capacity = faces.weight * domain.face_area
    exterior = domain.exterior

    boundary = np.zeros(domain.cell_count)
    np.add.at(boundary, _exterior_cells(domain), capacity[exterior])
    reward = t * domain.b_cells * domain.volume_element

    # a cell pays min(boundary, reward) whichever side it lands on
    common = np.minimum(boundary, reward)
    boundary -= common
    reward -= common
    offset = float(common.sum()) - t * float(
        domain.b_cells.sum()) * domain.volume_element

    arcs = collections.defaultdict(float)
    interior = ~exterior
    for tail, head, value in zip(
            faces.tail[interior].tolist(), faces.head[interior].tolist(),
            capacity[interior].tolist()):
        arcs[tail, head] += value
        arcs[head, tail] += value
    for cell in np.flatnonzero(boundary).tolist():
        arcs[cell, SINK] = float(boundary[cell])
    for cell in np.flatnonzero(reward).tolist():
        arcs[SOURCE, cell] = float(reward[cell])

    scale = max(arcs.values(), default=0.0) or 1.0
    graph = nx.DiGraph()
    graph.add_nodes_from([SOURCE, SINK])
    graph.add_nodes_from(range(domain.cell_count))
    graph.add_edges_from(
        (tail, head, {'capacity': value / scale})
        for (tail, head), value in arcs.items())

    return FlowNetwork(graph, domain, t=t, scale=1.0 / scale, offset=offset)


def min_cut(net, algorithm=None):
    """Cut value and the smallest minimising source set."""
    flow_func = FLOW_FUNCTIONS[algorithm or settings.FLOW_ALGORITHM]
    residual = flow_func(net.graph, SOURCE, SINK, capacity='capacity')

    seen = {SOURCE}
    stack = [SOURCE]
    while stack:
        node = stack.pop()
        for head, attr in residual[node].items():
            if head in seen:
                continue
            if attr['capacity'] - attr['flow'] > RESIDUAL_TOL:
                seen.add(head)
                stack.append(head)

    selected = np.zeros(net.domain.cell_count, dtype=bool)
    cells = [node for node in seen if node not in (SOURCE, SINK)]
    selected[cells] = True

    value = residual.graph['flow_value'] / net.scale + net.offset
    return value, domain_.SetMask.from_cells(net.domain, selected)


def dinkelbach_cheeger(domain, opts=None):
    opts = opts or CheegerOptions()
    if not domain.b_cells.sum() > 0:
        raise errors.ZeroMassB('b vanishes on the domain', key='weights.b')

    best = domain_.SetMask(domain.mask, domain)
    ratio, perimeter, volume = _ratio(best)
    trace = []

    for __ in range(opts.max_iters):
        cut, subset = min_cut(build_cut_graph(domain, ratio), opts.algorithm)
        trace.append(CutStep(ratio, cut, subset.size))
        logger.debug(
            't=%.15g cut %.3g set of %d cells', ratio, cut, subset.size)
        if not subset.size:
            break

        candidate, cand_perimeter, cand_volume = _ratio(subset)
        if cand_perimeter - ratio * cand_volume >= -opts.delta:
            break
        best, ratio = subset, candidate
        perimeter, volume = cand_perimeter, cand_volume
    else:
        logger.warning(
            'dinkelbach stopped after %d iterations', opts.max_iters)

    logger.debug('h=%.15g on %d cells', ratio, best.size)
    return CheegerSolution(
        h=ratio,
        set=best,
        method='dinkelbach',
        trace=tuple(trace),
        perimeter=perimeter,
        volume=volume,
    )


def brute_force_cheeger(domain, max_cells=settings.BRUTE_FORCE_MAX_CELLS):
    count = domain.cell_count
    if count > max_cells:
        raise errors.TooLarge(
            '{} cells, brute force stops at {}'.format(count, max_cells))
    if not domain.b_cells.sum() > 0:
        raise errors.ZeroMassB('b vanishes on the domain', key='weights.b')

    diff = domain.diff.toarray() * domain.spacing
    weight = domain.faces.weight * domain.face_area
    mass = domain.b_cells * domain.volume_element
    bits = np.arange(count)

    total = 1 << count
    ratios = np.full(total, np.inf)
    sizes = np.zeros(total, dtype=np.int64)
    for start in range(1, total, BRUTE_FORCE_CHUNK):
        codes = np.arange(start, min(start + BRUTE_FORCE_CHUNK, total))
        members = ((codes[:, None] >> bits) & 1).astype(float)
        perimeter = np.abs(members @ diff.T) @ weight
        volume = members @ mass
        valid = volume > 0
        chunk = np.full(len(codes), np.inf)
        chunk[valid] = perimeter[valid] / volume[valid]
        ratios[codes] = chunk
        sizes[codes] = members.sum(axis=1).astype(np.int64)

    best = ratios.min()
    tied = np.flatnonzero(ratios <= best * (1 + TIE_TOL))
    tied = tied[sizes[tied] == sizes[tied].min()]
    # lexicographic order on masks: cell 0 is the leading digit
    reversed_codes = [
        sum(((code >> i) & 1) << (count - 1 - i) for i in range(count))
        for code in tied.tolist()]
    code = tied[int(np.argmin(reversed_codes))]

    subset = domain_.SetMask.from_cells(domain, ((code >> bits) & 1) > 0)
    ratio, perimeter, volume = _ratio(subset)
    logger.debug(
        'brute force over %d sets: h=%.15g (%d ties)',
        total - 1, ratio, len(tied))
    return CheegerSolution(
        h=ratio,
        set=subset,
        method='brute',
        trace=(),
        perimeter=perimeter,
        volume=volume,
    )


def sigma_upper_bound(domain, inner, eps):
    """Rayleigh quotient (p = 1) of the ramp 1 on `inner`, 0 past eps."""
    if not inner.size:
        raise errors.EmptySet('inner set is empty')
    if eps < domain.spacing * (1 - 1e-12):
        raise errors.LayerTooThin(
            'eps={} is below the grid spacing {}'.format(eps, domain.spacing))
    if inner.cells[_exterior_cells(domain)].any():
        raise errors.TouchesBoundary('inner set touches the boundary')

    distance = scipy.ndimage.distance_transform_edt(
        ~inner.values) * domain.spacing
    ramp = np.clip(1.0 - distance / eps, 0.0, 1.0)
    return p_eigen.rayleigh_quotient(domain.field(ramp), 1)


def interior_family(domain, depths=settings.INTERIOR_DEPTHS):
    """Eroded masks with every layer width that fits between them and Omega.

    Returns (set, eps, depth) triples.
    """
    structure = scipy.ndimage.generate_binary_structure(
        domain.dim, domain.dim)
    family = []
    for depth in depths:
        core = scipy.ndimage.binary_erosion(
            domain.mask, structure=structure, iterations=depth,
            border_value=0)
        if not core.any():
            continue
        inner = domain_.SetMask(core, domain)
        for width in range(1, depth + 1):
            family.append((inner, width * domain.spacing, depth))
    return family


def lipschitz_monotone_approx(domain, k):
    """Domain with a replaced by its k-Lipschitz inf-convolution."""
    if not k >= 1:
        raise errors.ValidationError('must be >= 1, got {}'.format(k), 'k')

    points = np.column_stack(
        [axis[domain.mask] for axis in domain.centers[:domain.dim]])
    weights = domain.a_cells
    lowered = np.empty(domain.cell_count)
    for start in range(0, domain.cell_count, DISTANCE_CHUNK):
        block = points[start:start + DISTANCE_CHUNK]
        distance = scipy.spatial.distance.cdist(block, points)
        lowered[start:start + DISTANCE_CHUNK] = (
            weights[None, :] + k * distance).min(axis=1)

    a_field = np.zeros(domain.shape)
    a_field[domain.mask] = np.minimum(lowered, weights)
    return domain.with_weights(a=a_field)


def best_level_set(domain, u):
    """Best P_a/vol_b over the superlevel sets {u > t} of u >= 0."""
    cells = u.cells
    if (cells < 0).any():
        raise errors.NegativeField(
            'level sets need u >= 0, min is {}'.format(cells.min()))

    values = np.unique(cells[cells > 0])
    if not values.size:
        raise errors.EmptySet('u has no positive values')
    thresholds = np.concatenate(([0.0], values[:-1]))
    steps = len(thresholds)

    faces = domain.faces
    extended = np.append(cells, 0.0)
    tail, head = extended[faces.tail], extended[faces.head]
    capacity = faces.weight * domain.face_area
    # a face is cut for thresholds in [min, max)
    low = np.searchsorted(thresholds, np.minimum(tail, head))
    high = np.searchsorted(thresholds, np.maximum(tail, head))
    change = np.zeros(steps + 1)
    np.add.at(change, low, capacity)
    np.add.at(change, high, -capacity)
    perimeter = np.cumsum(change)[:steps]

    change = np.zeros(steps + 1)
    np.add.at(
        change, np.searchsorted(thresholds, cells),
        -domain.b_cells * domain.volume_element)
    change[0] += domain.b_cells.sum() * domain.volume_element
    volume = np.cumsum(change)[:steps]

    ratios = np.full(steps, np.inf)
    valid = volume > 0
    ratios[valid] = perimeter[valid] / volume[valid]
    if not valid.any():
        raise errors.EmptySet('no superlevel set carries b-mass')

    index = int(np.argmin(ratios))
    subset = domain_.SetMask.from_cells(domain, cells > thresholds[index])
    ratio, __, __ = _ratio(subset)
    return ratio, subset
