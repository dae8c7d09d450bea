"""First Dirichlet eigenpair of the weighted p-Laplacian, 1 < p <= 2.

The eigenvalue is the minimum of the Rayleigh quotient
``sum_faces w |Du|^p h^dim / sum_cells b |u|^p h^dim``.  The solver runs
nonlinear inverse power steps on the eps-regularised numerator: each step
solves ``-div(w (|Du|^2 + eps^2)^((p-2)/2) Du) = q b u^(p-1)`` by damped
Newton and rescales to ``sum b u^p h^dim = 1``.  A step that fails to lower
the quotient is replaced by a projected line search along it, and failing
that by a preconditioned gradient step on the quotient.
"""
import dataclasses
import logging
import typing

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from . import domain as domain_, errors, settings

logger = logging.getLogger(__name__)

ARMIJO_C = 1e-4
STEP_MIN = 1e-12
LINE_SEARCH_MIN = 1e-8
SIGN_DELTA = 1e-8


@dataclasses.dataclass
class SolverOptions:
    eps_initial: float = settings.EPS_INITIAL
    eps_final: float = settings.EPS_FINAL
    max_iters: int = settings.MAX_ITERS
    inner_max_iters: int = settings.INNER_MAX_ITERS
    inner_tol: float = 1e-13
    tol: float = settings.TOL
    stall_window: int = settings.STALL_WINDOW
    residual_tol: float = settings.RESIDUAL_TOL

    def __post_init__(self):
        if not self.eps_final > 0:
            raise errors.ValidationError(
                'must be positive', key='solver.eps_final')
        if self.eps_initial < self.eps_final:
            raise errors.ValidationError(
                'must not be below eps_final', key='solver.eps_initial')
        if self.max_iters < 1 or self.inner_max_iters < 1:
            raise errors.ValidationError(
                'must be at least 1', key='solver.max_iters')
        if not self.tol > 0:
            raise errors.ValidationError('must be positive', key='solver.tol')
        if not self.residual_tol > 0:
            raise errors.ValidationError(
                'must be positive', key='solver.residual_tol')
        if self.stall_window < 1:
            raise errors.ValidationError(
                'must be at least 1', key='solver.stall_window')


@dataclasses.dataclass
class EigenPair:
    p: float
    eigenvalue: float
    u: domain_.ScalarField
    iterations: int
    residual_norm: float
    converged: bool
    eps: float
    history: typing.Tuple = ()


@dataclasses.dataclass
class DualCertificate:
    z: domain_.VectorField
    gamma: domain_.ScalarField
    sup_norm_z: float
    pde_residual: float
    boundary_sign_defect: float
    sign_gap: float


@dataclasses.dataclass
class AcotBound:
    s_constant: float
    r: float
    bound_value: float
    sup_norm: float
    satisfied: bool


def rayleigh_quotient(u, p):
    if not p >= 1:
        raise errors.InvalidExponent('p must be >= 1, got {}'.format(p))
    domain = u.domain
    denominator = domain.mass(u.cells, p)
    if not denominator > 0:
        raise errors.ZeroDenominator('sum b |u|^p vanishes')
    return domain.energy(u.cells, p) / denominator


def _quotient(domain, vector, p, eps):
    return domain.energy(vector, p, eps) / domain.mass(vector, p)


def _normalize(domain, vector, p):
    return vector / domain.mass(vector, p) ** (1.0 / p)


def _stiffness(domain):
    weights = scipy.sparse.diags(domain.faces.weight)
    return (domain.diff.T @ weights @ domain.diff) * domain.volume_element


def linear_ground_state(domain, tol=1e-13, max_iters=1000):
    """First eigenvector of the p = 2 problem by inverse power iteration."""
    factor = scipy.sparse.linalg.splu(_stiffness(domain).tocsc())
    mass = domain.b_cells * domain.volume_element

    vector = np.ones(domain.cell_count)
    previous = np.inf
    for iteration in range(max_iters):
        vector = factor.solve(mass * vector)
        vector = _normalize(domain, vector, 2)
        value = _quotient(domain, vector, 2, 0.0)
        if abs(previous - value) <= tol * value:
            break
        previous = value

    logger.debug(
        'linear ground state: lambda_2 %.12g after %d iterations',
        value, iteration + 1)
    return domain.from_cells(_normalize(domain, np.abs(vector), 2))


def _newton_step(domain, vector, p, eps, rhs, opts):
    """Minimise energy(v) - rhs.v by damped Newton, warm started at vector."""
    diff, weight = domain.diff, domain.faces.weight
    volume = domain.volume_element

    def objective(trial):
        return domain.energy(trial, p, eps) - rhs @ trial

    value = objective(vector)
    for __ in range(opts.inner_max_iters):
        grad = diff @ vector
        squared = grad ** 2 + eps ** 2
        flux = weight * squared ** (p / 2.0 - 1.0) * grad
        gradient = p * volume * (diff.T @ flux) - rhs
        curvature = p * volume * weight * squared ** (p / 2.0 - 2.0) * (
            (p - 1.0) * grad ** 2 + eps ** 2)
        hessian = (diff.T @ scipy.sparse.diags(curvature) @ diff).tocsc()

        step = scipy.sparse.linalg.spsolve(hessian, -gradient)
        slope = float(gradient @ step)
        if -slope <= opts.inner_tol * max(abs(float(rhs @ vector)), 1e-300):
            break

        alpha = 1.0
        while True:
            trial = vector + alpha * step
            trial_value = objective(trial)
            if trial_value <= value + ARMIJO_C * alpha * slope:
                break
            alpha *= 0.5
            if alpha < STEP_MIN:
                return vector
        vector, value = trial, trial_value

    return vector


def _inverse_power_step(domain, vector, p, eps, value, opts):
    rhs = value * p * domain.volume_element * domain.b_cells * vector ** (
        p - 1.0)
    candidate = np.abs(_newton_step(domain, vector.copy(), p, eps, rhs, opts))
    if not domain.mass(candidate, p) > 0:
        return None
    return _normalize(domain, candidate, p)


def _line_search(domain, vector, candidate, p, eps, value):
    direction = candidate - vector
    alpha = 0.5
    while alpha > LINE_SEARCH_MIN:
        trial = np.abs(vector + alpha * direction)
        if domain.mass(trial, p) > 0:
            trial = _normalize(domain, trial, p)
            trial_value = _quotient(domain, trial, p, eps)
            if trial_value < value:
                return trial, trial_value
        alpha *= 0.5
    return None, value


def _euler_lagrange_defect(domain, vector, p, eps, eigenvalue):
    grad = domain.diff @ vector
    flux = (grad ** 2 + eps ** 2) ** ((p - 2.0) / 2.0) * grad
    divergence = domain.diff.T @ (domain.faces.weight * flux)
    return flux, divergence - eigenvalue * domain.b_cells * vector ** (p - 1.0)


def _residual(domain, vector, p, eps, eigenvalue):
    """Max-norm defect of the Euler-Lagrange equation, scaled to max u = 1."""
    __, defect = _euler_lagrange_defect(domain, vector, p, eps, eigenvalue)
    scale = float(vector.max()) ** (1.0 - p)
    return scale * float(np.abs(defect).max()) * domain.volume_element


def _gradient_step(domain, vector, p, eps, value):
    """Projected descent on the quotient, preconditioned by the energy Hessian.

    Lowers the regularised quotient whenever its gradient is nonzero.
    """
    diff, weight = domain.diff, domain.faces.weight
    volume = domain.volume_element

    grad = diff @ vector
    squared = grad ** 2 + eps ** 2
    flux = weight * squared ** (p / 2.0 - 1.0) * grad
    gradient = p * volume * (
        diff.T @ flux - value * domain.b_cells * vector ** (p - 1.0)
    ) / domain.mass(vector, p)
    curvature = p * volume * weight * squared ** (p / 2.0 - 2.0) * (
        (p - 1.0) * grad ** 2 + eps ** 2)
    hessian = (diff.T @ scipy.sparse.diags(curvature) @ diff).tocsc()

    direction = scipy.sparse.linalg.spsolve(hessian, -gradient)
    slope = float(gradient @ direction)
    if not slope < 0:
        return None, value

    alpha = 1.0
    while alpha > LINE_SEARCH_MIN:
        trial = np.abs(vector + alpha * direction)
        if domain.mass(trial, p) > 0:
            trial = _normalize(domain, trial, p)
            trial_value = _quotient(domain, trial, p, eps)
            if trial_value <= value + ARMIJO_C * alpha * slope:
                return trial, trial_value
        alpha *= 0.5
    return None, value


def solve_first_eigenpair(domain, p, opts=None, initial=None):
    """Minimise the Rayleigh quotient at exponent p.

    Inverse power steps run while eps is annealed.  At ``eps_final`` the
    pair counts as converged once the quotient has stalled over
    ``stall_window`` iterations and the scaled residual is at most
    ``residual_tol``; a stall above that residual switches to gradient
    steps for the rest of the run.
    """
    if not 1 < p <= 2:
        raise errors.InvalidExponent('p must lie in (1, 2], got {}'.format(p))
    if not domain.b_cells.sum() > 0:
        raise errors.DegenerateDomain('b vanishes on the domain')
    opts = opts or SolverOptions()

    if initial is not None:
        if not initial.domain.same_grid(domain):
            raise errors.DomainMismatch('initial guess on another grid')
        vector = np.abs(initial.cells)
    elif p == 2:
        vector = np.ones(domain.cell_count)
    else:
        vector = linear_ground_state(domain).cells
    if not domain.mass(vector, p) > 0:
        vector = np.ones(domain.cell_count)
    vector = _normalize(domain, vector, p)

    history = []
    trail = []
    converged = False
    polishing = False
    eps = opts.eps_initial
    iteration = 0
    for iteration in range(1, opts.max_iters + 1):
        eps = max(opts.eps_final, opts.eps_initial * 2.0 ** (1 - iteration))
        value = _quotient(domain, vector, p, eps)

        if polishing:
            candidate, candidate_value = _gradient_step(
                domain, vector, p, eps, value)
        else:
            candidate = _inverse_power_step(
                domain, vector, p, eps, value, opts)
            if candidate is None:
                candidate_value = np.inf
            else:
                candidate_value = _quotient(domain, candidate, p, eps)
            if not candidate_value <= value:
                if candidate is not None:
                    candidate, candidate_value = _line_search(
                        domain, vector, candidate, p, eps, value)
                if candidate is None:
                    candidate, candidate_value = _gradient_step(
                        domain, vector, p, eps, value)
        if candidate is None:
            logger.debug(
                'p=%g: no descent at iteration %d (eps %g)', p, iteration, eps)
            if eps > opts.eps_final:
                continue
            converged = _residual(
                domain, vector, p, eps, _quotient(domain, vector, p, 0.0)
            ) <= opts.residual_tol
            break

        history.append((eps, value, candidate_value))
        vector = candidate
        logger.debug(
            'p=%g iteration %d eps %.1e quotient %.15g',
            p, iteration, eps, candidate_value)

        if eps > opts.eps_final:
            continue
        trail.append(candidate_value)
        window = opts.stall_window
        stalled = len(trail) > window and abs(
            trail[-1 - window] - trail[-1]) <= opts.tol * trail[-1]
        if not stalled:
            continue
        residual = _residual(
            domain, vector, p, eps, _quotient(domain, vector, p, 0.0))
        if residual <= opts.residual_tol:
            converged = True
            break
        if not polishing:
            logger.debug(
                'p=%g: stalled at residual %.3g, switching to gradient steps',
                p, residual)
            polishing = True

    u = domain.from_cells(vector)
    eigenvalue = rayleigh_quotient(u, p)
    residual = _residual(domain, vector, p, eps, eigenvalue)

    if converged:
        logger.debug(
            'p=%g: lambda %.12g in %d iterations, residual %.3g',
            p, eigenvalue, iteration, residual)
    else:
        logger.warning(
            'p=%g: not converged after %d iterations (lambda %.12g, '
            'residual %.3g)', p, iteration, eigenvalue, residual)

    return EigenPair(
        p=p,
        eigenvalue=eigenvalue,
        u=u,
        iterations=iteration,
        residual_norm=residual,
        converged=converged,
        eps=eps,
        history=tuple(history),
    )


def dual_certificate(pair):
    """Flux z and selection gamma of the eigenpair, scaled to max u = 1."""
    if not pair.converged:
        raise errors.NotConverged(
            'p={}: certificate needs a converged eigenpair'.format(pair.p))
    domain = pair.u.domain
    p = pair.p
    vector = pair.u.cells
    top = float(vector.max())
    scale = top ** (1.0 - p)

    flux, defect = _euler_lagrange_defect(
        domain, vector, p, pair.eps, pair.eigenvalue)
    flux = scale * flux
    gamma = np.clip(scale * vector ** (p - 1.0), -1.0, 1.0)

    faces = domain.faces
    exterior = domain.exterior
    inside = np.where(faces.tail[exterior] < 0,
                      faces.head[exterior], faces.tail[exterior])
    normal = np.where(faces.head[exterior] < 0, 1.0, -1.0)
    trace = vector[inside] / top
    boundary = faces.weight[exterior] * trace * np.abs(
        1.0 + normal * flux[exterior])

    positive = vector > 0
    selection = np.minimum(1.0, vector / (SIGN_DELTA * top))
    sign_gap = np.abs(gamma - selection)[positive]

    return DualCertificate(
        z=domain_.VectorField(flux, domain),
        gamma=domain.from_cells(gamma),
        sup_norm_z=float(np.abs(flux).max()),
        pde_residual=scale * float(np.abs(defect).max()) *
        domain.volume_element,
        boundary_sign_defect=float(boundary.max()) if boundary.size else 0.0,
        sign_gap=float(sign_gap.max()) if sign_gap.size else 0.0,
    )


def check_acot_bound(pair, r, s_constant):
    """Compare max |u| with (S |lambda| |b|_r / mu)^(Nr/(r-N)) |u|_1."""
    domain = pair.u.domain
    dim = domain.dim
    if not r > dim:
        raise errors.BadExponent(
            'r must exceed the dimension {}, got {}'.format(dim, r))
    if not s_constant > 0:
        raise errors.ValidationError('must be positive', key='S')

    volume = domain.volume_element
    vector = np.abs(pair.u.cells)
    b_norm = float((domain.b_cells ** r).sum() * volume) ** (1.0 / r)
    u_l1 = float(vector.sum()) * volume
    with np.errstate(over='ignore'):
        base = s_constant * abs(pair.eigenvalue) * b_norm / domain.mu
        bound_value = float(base ** (dim * r / (r - dim))) * u_l1

    sup_norm = float(vector.max())
    satisfied = bool(sup_norm <= bound_value)
    return AcotBound(
        s_constant=s_constant,
        r=r,
        bound_value=bound_value,
        sup_norm=sup_norm,
        satisfied=satisfied,
    ), satisfied


def eigenvalue_bound(domain, u0=None):
    """(p0, C) with lambda_p <= C for every 1 < p < p0."""
    if u0 is None:
        u0 = linear_ground_state(domain)
    vector = np.abs(u0.cells)
    vector = vector / vector.max()

    volume = domain.volume_element
    gradient_energy = domain.energy(vector, 2)
    face_total = float(domain.faces.weight.sum()) * volume
    b_l1 = float(domain.b_cells @ vector) * volume
    b_total = float(domain.b_cells.sum()) * volume

    constant = (gradient_energy + face_total) / (0.5 * b_l1)
    p0 = min(2.0, 1.0 + b_l1 / (2.0 * b_total))
    return p0, constant
