"""Self-checks behind ``cheeger-lab verify``.

Each suite is a function ``suite(rng) -> [Verdict]``; suites run as tasks
on the thread pool and draw from their own seeded generator, so results
do not depend on scheduling.
"""
import logging
import math

import numpy as np

from . import cheeger, domain as domain_, errors, p_eigen, settings, sweep
from . import tasks, utils

logger = logging.getLogger(__name__)

Verdict = sweep.Verdict

ADJOINT_TOL = 1e-12
COAREA_TOL = 1e-10
EXACT_TOL = 1e-10
ANALYTIC_TOL = 0.01
LIMIT_TOL = 0.02


def unit_interval(n, a=1.0, b=1.0):
    return domain_.build_domain(
        domain_.DomainSpec(dim=1, n=n, extent=1.0, a=a, b=b))


def unit_square(n, a=1.0, b=1.0, m=None, stencil=None):
    return domain_.build_domain(domain_.DomainSpec(
        dim=2, n=n, m=m, extent=1.0, a=a, b=b,
        stencil=stencil or domain_.DomainSpec.stencil))


def analytic_eigenvalue(p):
    """First Dirichlet eigenvalue of the p-Laplacian on (0, 1)."""
    return (p - 1) * (2 * math.pi / (p * math.sin(math.pi / p))) ** p


def _relative(value, expected):
    return abs(value - expected) / abs(expected)


def _close(name, value, expected, tol, detail=''):
    error = _relative(value, expected)
    return Verdict(
        name, error <= tol, tol - error,
        detail=detail or '{:.12g} vs {:.12g}'.format(value, expected))


def _random_grid(rng, max_side=16):
    if rng.random() < 0.25:
        return (int(rng.integers(1, max_side * max_side + 1)),)
    return tuple(int(s) for s in rng.integers(1, max_side + 1, size=2))


def _random_domain(rng, shape, low=0.5, high=2.0):
    a = rng.uniform(low, high, size=shape)
    b = rng.uniform(low, high, size=shape)
    return domain_.WeightedDomain(
        len(shape), shape, 1.0 / shape[0], None, a, b)


def perimeter_oracle(rng):
    del rng
    square = unit_square(4)
    interval = unit_interval(8)
    return [
        _close('perimeter_square', domain_.weighted_perimeter(
            domain_.SetMask(square.mask, square)), 4.0, EXACT_TOL),
        _close('perimeter_interval', domain_.weighted_perimeter(
            domain_.SetMask(interval.mask, interval)), 2.0, EXACT_TOL),
    ]


def adjointness(rng, trials=200):
    worst = 0.0
    for __ in range(trials):
        domain = _random_domain(rng, _random_grid(rng))
        u = domain.from_cells(rng.normal(size=domain.cell_count))
        z = domain_.VectorField(rng.normal(size=domain.face_count), domain)
        left = float(domain_.gradient(u).values @ z.values)
        right = -domain_.inner(u, domain_.divergence(z))
        scale = np.linalg.norm(domain.diff @ u.cells) * np.linalg.norm(
            z.values) or 1.0
        worst = max(worst, abs(left - right) / scale)
    return [Verdict('adjointness', worst <= ADJOINT_TOL, ADJOINT_TOL - worst,
                    detail='{} pairs'.format(trials))]


def coarea(rng, trials=200):
    worst = 0.0
    for __ in range(trials):
        domain = _random_domain(rng, _random_grid(rng))
        # at most a dozen distinct levels
        values = rng.integers(0, 12, size=domain.cell_count) * rng.uniform(
            0.1, 3.0)
        u = domain.from_cells(values)
        total = sum(level.dt * domain_.weighted_perimeter(level.set)
                    for level in domain_.coarea_decompose(u))
        tv = domain_.weighted_tv(u)
        if tv:
            worst = max(worst, _relative(total, tv))
        elif total:
            worst = math.inf
    return [Verdict('coarea', worst <= COAREA_TOL, COAREA_TOL - worst,
                    detail='{} fields'.format(trials))]


def homogeneity(rng, trials=10):
    worst = 0.0
    same = True
    for __ in range(trials):
        domain = _random_domain(rng, (3, 3))
        base = cheeger.dinkelbach_cheeger(domain)
        heavy = cheeger.dinkelbach_cheeger(
            domain.with_weights(a=2 * domain.a_field))
        massive = cheeger.dinkelbach_cheeger(
            domain.with_weights(b=2 * domain.b_field))
        worst = max(worst, _relative(heavy.h, 2 * base.h),
                    _relative(massive.h, base.h / 2))
        same = same and np.array_equal(base.set.values, heavy.set.values) \
            and np.array_equal(base.set.values, massive.set.values)
    margin = EXACT_TOL - worst
    return [Verdict('homogeneity', same and margin >= 0, margin,
                    detail='' if same else 'optimal sets differ')]


def oracle_equivalence(rng, trials=20, shapes=((3, 3),)):
    verdicts = []
    for shape in shapes:
        worst = 0.0
        for __ in range(trials):
            domain = _random_domain(rng, shape, low=0.1)
            exact = cheeger.brute_force_cheeger(domain)
            fast = cheeger.dinkelbach_cheeger(domain)
            worst = max(worst, _relative(fast.h, exact.h))
        verdicts.append(Verdict(
            'oracle_equivalence_{}'.format('x'.join(map(str, shape))),
            worst <= EXACT_TOL, EXACT_TOL - worst,
            detail='{} trials'.format(trials)))
    return verdicts


def oracle_equivalence_full(rng):
    return oracle_equivalence(rng, trials=100, shapes=((3, 3), (4, 4)))


def analytic_1d(rng, n=2000, ps=(2.0, 1.5, 1.2)):
    del rng
    domain = unit_interval(n)
    verdicts = []
    for p in ps:
        pair = p_eigen.solve_first_eigenpair(domain, p)
        verdicts.append(_close(
            'analytic_1d_p{:g}'.format(p), pair.eigenvalue,
            analytic_eigenvalue(p), ANALYTIC_TOL))
    return verdicts


def limit_1d(rng, n=1000):
    del rng
    domain = unit_interval(n)
    report = sweep.run_p_sweep(domain)
    verdicts = [
        _close('limit_1d_h', report.h_value, 2.0, EXACT_TOL),
        check_full_set('limit_1d_set', report.cheeger),
        check_sandwich_verdict('limit_1d', report),
        sweep.check_truco(report, 1.0),
    ]
    if report.limit_estimate is None:
        verdicts.append(Verdict('limit_1d', False, math.nan,
                                detail='no limit estimate'))
    else:
        verdicts.append(_close(
            'limit_1d', report.limit_estimate, 2.0, LIMIT_TOL,
            detail='limit {:.9g}, q {:.4g}'.format(
                report.limit_estimate, report.limit_order)))
    for cells in range(1, 13):
        solution = cheeger.brute_force_cheeger(unit_interval(cells))
        verdicts.append(check_full_set(
            'brute_1d_n{}'.format(cells), solution, 2.0))
    verdicts.extend(
        v for v in report.verdicts
        if v.name in ('dual_residual', 'dual_sup_norm', 'mass_convergence'))
    return verdicts


def unit_square_suite(rng, sizes=(8, 32, 128), sweep_n=16):
    del rng
    verdicts = []
    for n in sizes:
        verdicts.append(check_full_set(
            'square_n{}'.format(n),
            cheeger.dinkelbach_cheeger(unit_square(n)), 4.0))
    report = sweep.run_p_sweep(unit_square(sweep_n))
    verdicts.append(check_sandwich_verdict('square', report))
    return verdicts


def weight_comparison(rng, trials=20, n=5, p=1.5):
    verdicts = []
    for trial in range(trials):
        lower = _random_domain(rng, (n, n))
        bump = rng.uniform(0.0, 1.0, size=lower.shape)
        upper = lower.with_weights(a=lower.a_field + bump)
        verdict = sweep.check_weight_comparison(lower, upper, p)
        verdict.name = 'weight_comparison_{}'.format(trial)
        verdicts.append(verdict)
    return verdicts


def lipschitz_chain(rng, n=8, ks=(1, 2, 4, 8, 16)):
    del rng
    domain = unit_square(n)
    x, __ = domain.centers
    step = domain.with_weights(a=1.0 + (x > 0.5))
    return [sweep.check_lipschitz_chain(step, ks)]


def check_full_set(name, solution, expected=None):
    domain = solution.set.domain
    full = bool(np.array_equal(solution.set.values, domain.mask))
    if expected is None:
        return Verdict(name, full, 0.0 if full else -1.0,
                       detail='set of {} cells'.format(solution.set.size))
    verdict = _close(name, solution.h, expected, EXACT_TOL)
    verdict.passed = verdict.passed and full
    if not full:
        verdict.detail += ', set of {} of {} cells'.format(
            solution.set.size, domain.cell_count)
    return verdict


def check_sandwich_verdict(prefix, report):
    verdict = sweep.check_sandwich(report)
    verdict.name = '{}_sandwich'.format(prefix)
    return verdict


QUICK = {
    'perimeter_oracle': perimeter_oracle,
    'adjointness': adjointness,
    'coarea': coarea,
    'homogeneity': homogeneity,
    'oracle_equivalence': oracle_equivalence,
}
FULL = dict(QUICK, **{
    'oracle_equivalence': oracle_equivalence_full,
    'analytic_1d': analytic_1d,
    'limit_1d': limit_1d,
    'unit_square': unit_square_suite,
    'weight_comparison': weight_comparison,
    'lipschitz_chain': lipschitz_chain,
})
SCALES = {'quick': QUICK, 'full': FULL}


class Suite(tasks.Task):
    done = 'checked'

    def handler(self):
        try:
            return self.data['suite'](self.data['rng'])
        except errors.LabError as exc:
            logger.warning('suite %s failed: %s', self.name, exc)
            return [Verdict(self.name, False, math.nan, detail=str(exc))]


def run_verify(scale='quick', seed=settings.SEED, threads=1, output=None,
               conf=None):
    if scale not in SCALES:
        raise errors.ValidationError(
            'expected one of {}'.format(', '.join(SCALES)), key='scale')

    pool = tasks.ThreadPool(threads, conf)
    for index, (name, suite) in enumerate(SCALES[scale].items()):
        pool.add_task(Suite(name, suite=suite, rng=utils.rng((seed, index))))
    pool.start(output)

    verdicts = []
    for task in pool.join():
        verdicts.extend(task.result)
    failed = [v.name for v in verdicts if v.failed]
    logger.debug('%d verdicts, %d failed %s', len(verdicts), len(failed),
                 ' '.join(failed))
    return verdicts
