"""Weighted grids, difference operators and the discrete energies on them.

Cells are cell-centered on a uniform grid of spacing ``spacing``.  Every
pair of neighbouring cells under the stencil is a *face*; pairs with one
cell outside the mask are kept and the outside value is the ghost zero, so
the Dirichlet trace term of the total variation comes out of the same sum.
Vectors indexed by mask cells (row-major order) are called *compressed*.
"""
import collections
import dataclasses
import functools
import logging
import typing

import numpy as np
import scipy.ndimage
import scipy.sparse

from . import constants, errors, settings, utils

logger = logging.getLogger(__name__)

Faces = collections.namedtuple(
    'Faces', ['tail', 'head', 'coef', 'weight', 'offset'])
Level = collections.namedtuple('Level', ['threshold', 'set', 'dt'])


@dataclasses.dataclass
class DomainSpec:
    dim: int
    n: int
    m: typing.Optional[int] = None
    spacing: typing.Optional[float] = None
    extent: typing.Optional[float] = None
    mask: typing.Any = None
    a: typing.Any = 1.0
    b: typing.Any = 1.0
    mu: typing.Optional[float] = None
    stencil: str = constants.DEFAULT_STENCIL

    @property
    def shape(self):
        if self.dim == 1:
            return (self.n,)
        return (self.n, self.m or self.n)

    @property
    def cell_spacing(self):
        if self.spacing is not None:
            return float(self.spacing)
        return float(self.extent or 1.0) / self.n


def _shifted(offset):
    src, dst = [], []
    for step in offset:
        if step == 1:
            src.append(slice(0, -1))
            dst.append(slice(1, None))
        elif step == -1:
            src.append(slice(1, None))
            dst.append(slice(0, -1))
        else:
            src.append(slice(None))
            dst.append(slice(None))
    return tuple(src), tuple(dst)


def _readonly(array):
    array = np.array(array)
    array.setflags(write=False)
    return array


class WeightedDomain:
    """Validated grid with weights a, b; immutable after construction."""

    def __init__(self, dim, shape, spacing, mask, a_field, b_field,
                 mu=None, stencil=constants.DEFAULT_STENCIL):
        if dim not in (1, 2):
            raise errors.ValidationError(
                'only 1 or 2 dimensions are supported', key='domain.dim')
        shape = tuple(int(s) for s in shape)
        if len(shape) != dim or min(shape) < 1:
            raise errors.ValidationError(
                'shape {} does not fit dim={}'.format(shape, dim),
                key='domain.shape')
        if not spacing > 0 or not np.isfinite(spacing):
            raise errors.ValidationError(
                'spacing must be positive, got {}'.format(spacing),
                key='domain.spacing')
        if stencil not in constants.STENCILS:
            raise errors.ValidationError(
                'unknown stencil {!r}'.format(stencil), key='domain.stencil')
        if dim not in constants.STENCILS[stencil]:
            raise errors.ValidationError(
                'stencil {} is not defined in {}D'.format(stencil, dim),
                key='domain.stencil')

        mask = np.ones(shape, dtype=bool) if mask is None else np.asarray(
            mask, dtype=bool)
        if mask.shape != shape:
            raise errors.ValidationError(
                'mask shape {} differs from grid {}'.format(mask.shape, shape),
                key='domain.mask')
        if not mask.any():
            raise errors.EmptyDomain('mask has no cells', key='domain.mask')
        __, components = scipy.ndimage.label(mask)
        if components > 1:
            raise errors.DisconnectedMask(
                'mask has {} components'.format(components), key='domain.mask')

        a_field = np.asarray(a_field, dtype=float)
        b_field = np.asarray(b_field, dtype=float)
        for name, field in (('a', a_field), ('b', b_field)):
            if field.shape != shape:
                raise errors.ValidationError(
                    'shape {} differs from grid {}'.format(field.shape, shape),
                    key='weights.' + name)
            if not np.all(np.isfinite(field[mask])):
                raise errors.NonFiniteWeight(
                    'non-finite values inside the mask', key='weights.' + name)

        a_min = float(a_field[mask].min())
        if a_min <= 0:
            raise errors.NonPositiveWeightA(
                'min a = {} is not positive'.format(a_min), key='weights.a')
        if mu is None:
            mu = a_min
        if not mu > 0:
            raise errors.NonPositiveWeightA(
                'declared mu = {} is not positive'.format(mu),
                key='weights.mu')
        if a_min < mu:
            raise errors.WeightBelowMu(
                'min a = {} is below mu = {}'.format(a_min, mu),
                key='weights.a')
        if (b_field[mask] < 0).any():
            raise errors.NegativeWeightB(
                'b is negative at {} cells'.format(
                    int(np.count_nonzero(b_field[mask] < 0))),
                key='weights.b')
        if not b_field[mask].sum() > 0:
            raise errors.ZeroMassB('b vanishes on the domain', key='weights.b')

        self.dim = dim
        self.shape = shape
        self.spacing = float(spacing)
        self.stencil = stencil
        self.mu = float(mu)
        self.mask = _readonly(mask)
        self.a_field = _readonly(np.where(mask, a_field, 0.0))
        self.b_field = _readonly(np.where(mask, b_field, 0.0))

    def __repr__(self):
        return '<WeightedDomain {}D {} cells={} h={:g} {}>'.format(
            self.dim, 'x'.join(map(str, self.shape)), self.cell_count,
            self.spacing, self.stencil)

    @functools.cached_property
    def cell_count(self):
        return int(np.count_nonzero(self.mask))

    @functools.cached_property
    def cell_index(self):
        index = np.full(self.shape, -1, dtype=np.int64)
        index[self.mask] = np.arange(self.cell_count)
        return _readonly(index)

    @functools.cached_property
    def centers(self):
        axes = [(np.arange(s) + 0.5) * self.spacing for s in self.shape]
        if self.dim == 1:
            return axes[0], np.zeros(self.shape)
        return tuple(np.meshgrid(*axes, indexing='ij'))

    @property
    def volume_element(self):
        return self.spacing ** self.dim

    @property
    def face_area(self):
        return self.spacing ** (self.dim - 1)

    @functools.cached_property
    def a_cells(self):
        return _readonly(self.a_field[self.mask])

    @functools.cached_property
    def b_cells(self):
        return _readonly(self.b_field[self.mask])

    @functools.cached_property
    def faces(self):
        pmask = np.pad(self.mask, 1)
        pindex = np.pad(self.cell_index, 1, constant_values=-1)
        pa = np.pad(self.a_field, 1)

        parts = collections.defaultdict(list)
        entries = constants.STENCILS[self.stencil][self.dim]
        for position, (offset, coef) in enumerate(entries):
            src, dst = _shifted(offset)
            touch = pmask[src] | pmask[dst]
            in_tail, in_head = pmask[src][touch], pmask[dst][touch]
            a_tail, a_head = pa[src][touch], pa[dst][touch]
            a_pair = np.where(
                in_tail & in_head, 0.5 * (a_tail + a_head),
                np.where(in_tail, a_tail, a_head))

            parts['tail'].append(pindex[src][touch])
            parts['head'].append(pindex[dst][touch])
            parts['coef'].append(np.full(a_pair.shape, coef))
            parts['weight'].append(coef * a_pair)
            parts['offset'].append(np.full(a_pair.shape, position))

        return Faces(**{
            name: _readonly(np.concatenate(values))
            for name, values in parts.items()})

    @property
    def face_count(self):
        return len(self.faces.tail)

    @functools.cached_property
    def exterior(self):
        faces = self.faces
        return _readonly((faces.tail < 0) | (faces.head < 0))

    @functools.cached_property
    def diff(self):
        """Sparse forward difference: compressed cells -> faces, over h."""
        faces = self.faces
        rows = np.arange(self.face_count)
        inv = 1.0 / self.spacing
        head, tail = faces.head >= 0, faces.tail >= 0
        data = np.concatenate([np.full(head.sum(), inv),
                               np.full(tail.sum(), -inv)])
        matrix = scipy.sparse.coo_matrix(
            (data, (np.concatenate([rows[head], rows[tail]]),
                    np.concatenate([faces.head[head], faces.tail[tail]]))),
            shape=(self.face_count, self.cell_count))
        return matrix.tocsr()

    @functools.cached_property
    def b_dynamic_range(self):
        positive = self.b_cells[self.b_cells > 0]
        return float(positive.max() / positive.min())

    def same_grid(self, other):
        return (
            self.dim == other.dim
            and self.shape == other.shape
            and self.spacing == other.spacing
            and self.stencil == other.stencil
            and np.array_equal(self.mask, other.mask))

    def with_weights(self, a=None, b=None, mu=None):
        a_field = self.a_field if a is None else a
        b_field = self.b_field if b is None else b
        if mu is None and a is not None:
            mu = float(np.asarray(a, dtype=float)[self.mask].min())
        return WeightedDomain(
            self.dim, self.shape, self.spacing, self.mask, a_field, b_field,
            mu=self.mu if mu is None else mu, stencil=self.stencil)

    def field(self, values):
        return ScalarField(values, self)

    def from_cells(self, vector):
        values = np.zeros(self.shape)
        values[self.mask] = vector
        return ScalarField(values, self)

    # energies on compressed vectors

    def energy(self, vector, p, eps=0.0):
        """Sum of w (|Du|^2 + eps^2)^(p/2) - eps^p over faces, times h^dim."""
        grad = self.diff @ vector
        if eps:
            density = (grad ** 2 + eps ** 2) ** (p / 2.0) - eps ** p
        else:
            density = np.abs(grad) ** p
        return float(self.faces.weight @ density) * self.volume_element

    def mass(self, vector, p):
        return float(self.b_cells @ (np.abs(vector) ** p)) * \
            self.volume_element


@dataclasses.dataclass(frozen=True, eq=False)
class ScalarField:
    values: np.ndarray
    domain: WeightedDomain

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.domain.shape:
            raise errors.DomainMismatch(
                'field shape {} on a {} grid'.format(
                    values.shape, self.domain.shape))
        if not np.all(np.isfinite(values)):
            raise errors.DomainMismatch('field has non-finite values')
        object.__setattr__(
            self, 'values', _readonly(np.where(self.domain.mask, values, 0.0)))

    @property
    def cells(self):
        return self.values[self.domain.mask]

    def __mul__(self, scale):
        return ScalarField(self.values * scale, self.domain)

    __rmul__ = __mul__


@dataclasses.dataclass(frozen=True, eq=False)
class SetMask:
    values: np.ndarray
    domain: WeightedDomain

    def __post_init__(self):
        values = np.asarray(self.values, dtype=bool)
        if values.shape != self.domain.shape:
            raise errors.DomainMismatch(
                'set shape {} on a {} grid'.format(
                    values.shape, self.domain.shape))
        if (values & ~self.domain.mask).any():
            raise errors.DomainMismatch('set leaves the domain mask')
        object.__setattr__(self, 'values', _readonly(values))

    @classmethod
    def from_cells(cls, domain, selected):
        values = np.zeros(domain.shape, dtype=bool)
        values[domain.mask] = selected
        return cls(values, domain)

    @property
    def cells(self):
        return self.values[self.domain.mask]

    @property
    def size(self):
        return int(np.count_nonzero(self.values))

    def indicator(self):
        return ScalarField(self.values.astype(float), self.domain)


@dataclasses.dataclass(frozen=True, eq=False)
class VectorField:
    values: np.ndarray
    domain: WeightedDomain

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.domain.face_count,):
            raise errors.DomainMismatch(
                '{} face values for {} faces'.format(
                    values.shape, self.domain.face_count))
        if not np.all(np.isfinite(values)):
            raise errors.DomainMismatch('vector field has non-finite values')
        object.__setattr__(self, 'values', _readonly(values))


def build_domain(spec):
    x, y = _centers(spec)
    mask = spec.mask
    if mask is not None and not isinstance(mask, np.ndarray):
        mask = utils.evaluate_field(mask, x, y, key='domain.mask') > 0

    a_field = utils.evaluate_field(spec.a, x, y, key='weights.a')
    b_field = utils.evaluate_field(spec.b, x, y, key='weights.b')

    domain = WeightedDomain(
        spec.dim, spec.shape, spec.cell_spacing, mask, a_field, b_field,
        mu=spec.mu, stencil=spec.stencil)

    logger.debug(
        'domain %r: min a %g, max b %g, b range %g', domain,
        domain.a_cells.min(), domain.b_cells.max(), domain.b_dynamic_range)
    if domain.b_dynamic_range > settings.B_DYNAMIC_RANGE_MAX:
        logger.warning(
            'b spans %.3g orders of magnitude', np.log10(
                domain.b_dynamic_range))
    return domain


def _centers(spec):
    if spec.dim not in (1, 2):
        raise errors.ValidationError(
            'only 1 or 2 dimensions are supported', key='domain.dim')
    if spec.n < 1 or (spec.dim == 2 and spec.m is not None and spec.m < 1):
        raise errors.ValidationError('empty grid', key='domain.n')
    spacing = spec.cell_spacing
    if not spacing > 0:
        raise errors.ValidationError(
            'spacing must be positive, got {}'.format(spacing),
            key='domain.spacing')
    axes = [(np.arange(s) + 0.5) * spacing for s in spec.shape]
    if spec.dim == 1:
        return axes[0], np.zeros(spec.shape)
    return tuple(np.meshgrid(*axes, indexing='ij'))


def _check_domain(field, domain):
    if field.domain is not domain and not field.domain.same_grid(domain):
        raise errors.DomainMismatch('fields live on different grids')


def gradient(u):
    domain = u.domain
    return VectorField(domain.diff @ u.cells, domain)


def divergence(z):
    domain = z.domain
    return domain.from_cells(-(domain.diff.T @ z.values))


def inner(left, right):
    _check_domain(left, right.domain)
    return float(np.dot(left.values.ravel(), right.values.ravel()))


def weighted_tv(u):
    return u.domain.energy(u.cells, 1)


def unweighted_tv(u):
    domain = u.domain
    grad = domain.diff @ u.cells
    return float(domain.faces.coef @ np.abs(grad)) * domain.volume_element


def weighted_perimeter(subset):
    return weighted_tv(subset.indicator())


def weighted_volume(subset):
    domain = subset.domain
    return float(domain.b_field[subset.values].sum()) * domain.volume_element


def p_energy(u, p, eps=0.0):
    return u.domain.energy(u.cells, p, eps)


def p_mass(u, p):
    return u.domain.mass(u.cells, p)


def coarea_decompose(u):
    """Superlevel sets {u > t} at the distinct values of u, with widths."""
    cells = u.cells
    if (cells < 0).any():
        raise errors.NegativeField(
            'coarea needs u >= 0, min is {}'.format(cells.min()))

    levels = []
    previous = 0.0
    for value in np.unique(cells[cells > 0]):
        subset = SetMask.from_cells(u.domain, cells > previous)
        levels.append(Level(previous, subset, float(value - previous)))
        previous = float(value)
    return levels
