"""p -> 1 continuation: eigenpairs along a schedule against h and sigma.

Every check returns a :class:`Verdict`; nothing here raises on a failed
inequality, so a report always carries the full picture.
"""
import dataclasses
import logging
import math
import typing

import numpy as np
import scipy.optimize

from . import cheeger, errors, p_eigen, settings, tasks
from .cheeger import CheegerSolution

logger = logging.getLogger(__name__)

RELATIVE_SLACK = 1e-12
ENERGY_IDENTITY_TOL = 1e-8
ORDER_BRACKET = (1e-6, 50.0)


@dataclasses.dataclass
class Verdict:
    name: str
    passed: bool
    margin: float
    applicable: bool = True
    detail: str = ''

    @property
    def failed(self):
        return self.applicable and not self.passed


@dataclasses.dataclass
class SweepRecord:
    p: float
    eigenvalue: typing.Optional[float] = None
    u_inf: typing.Optional[float] = None
    u_l1: typing.Optional[float] = None
    z_sup: typing.Optional[float] = None
    residual: typing.Optional[float] = None
    converged: bool = False
    iterations: int = 0
    mass_l1: typing.Optional[float] = None
    energy: typing.Optional[float] = None
    mass: typing.Optional[float] = None
    sign_gap: typing.Optional[float] = None
    u: typing.Any = None
    error: typing.Optional[str] = None

    @property
    def row(self):
        return (self.p, self.eigenvalue, self.u_inf, self.u_l1, self.z_sup,
                self.residual)


@dataclasses.dataclass
class SweepReport:
    schedule: typing.Tuple[float, ...]
    records: typing.List[SweepRecord]
    domain: typing.Any = None
    cheeger: typing.Optional[CheegerSolution] = None
    sigma_bound: typing.Optional[float] = None
    sigma_layer: typing.Optional[typing.Tuple[int, float]] = None
    eigen_bound: typing.Optional[typing.Tuple[float, float]] = None
    limit_estimate: typing.Optional[float] = None
    limit_order: typing.Optional[float] = None
    level_set_ratio: typing.Optional[float] = None
    spacing: float = 0.0
    flags: typing.Dict[str, typing.Any] = dataclasses.field(
        default_factory=dict)
    verdicts: typing.List[Verdict] = dataclasses.field(default_factory=list)

    @property
    def h_value(self):
        return self.cheeger.h if self.cheeger is not None else None

    @property
    def converged_records(self):
        return [r for r in self.records if r.converged]

    @property
    def failed(self):
        return [v for v in self.verdicts if v.failed]


def default_schedule(k_max=settings.SCHEDULE_K_MAX):
    return tuple(1.0 + 2.0 ** -k for k in range(1, k_max + 1))


def check_schedule(schedule):
    schedule = tuple(float(p) for p in schedule)
    if not schedule:
        raise errors.ValidationError('empty schedule', key='sweep.schedule')
    for p in schedule:
        if not 1 < p <= 2:
            raise errors.ValidationError(
                'p={} outside (1, 2]'.format(p), key='sweep.schedule')
    if any(b >= a for a, b in zip(schedule, schedule[1:])):
        raise errors.ValidationError(
            'must be strictly decreasing', key='sweep.schedule')
    return schedule


def _record(pair):
    domain = pair.u.domain
    cells = np.abs(pair.u.cells)
    record = SweepRecord(
        p=pair.p,
        eigenvalue=pair.eigenvalue,
        u_inf=float(cells.max()),
        u_l1=float(cells.sum()) * domain.volume_element,
        converged=pair.converged,
        iterations=pair.iterations,
        mass_l1=domain.mass(cells, 1),
        energy=domain.energy(cells, pair.p),
        mass=domain.mass(cells, pair.p),
        u=pair.u,
    )
    if pair.converged:
        certificate = p_eigen.dual_certificate(pair)
        record.z_sup = certificate.sup_norm_z
        record.residual = certificate.pde_residual
        record.sign_gap = certificate.sign_gap
    return record


class Continuation(tasks.Task):
    done = 'solved'

    def handler(self):
        domain = self.data['domain']
        schedule = self.data['schedule']
        opts = self.data['opts']

        records = []
        initial = None
        for index, p in enumerate(schedule):
            self.progress(index, len(schedule), 'p={:.6g}'.format(p))
            try:
                pair = p_eigen.solve_first_eigenpair(
                    domain, p, opts, initial=initial)
            except errors.LabError as exc:
                logger.warning('p=%g failed: %s', p, exc)
                records.append(SweepRecord(p=p, error=str(exc)))
                continue
            records.append(_record(pair))
            initial = pair.u
        self.progress(len(schedule), len(schedule))
        return records


class Dinkelbach(tasks.Task):
    done = 'cut'

    def handler(self):
        return cheeger.dinkelbach_cheeger(
            self.data['domain'], self.data.get('opts'))


class SigmaLayer(tasks.Task):
    done = 'bounded'

    def handler(self):
        return cheeger.sigma_upper_bound(
            self.data['domain'], self.data['inner'], self.data['eps'])


class Eigen(tasks.Task):
    done = 'solved'

    def handler(self):
        return p_eigen.solve_first_eigenpair(
            self.data['domain'], self.data['p'], self.data.get('opts'))


class EigenBound(tasks.Task):
    done = 'bounded'

    def handler(self):
        return p_eigen.eigenvalue_bound(self.data['domain'])


def _run(jobs, threads, conf=None, output=None):
    pool = tasks.ThreadPool(threads, conf)
    for job in jobs:
        pool.add_task(job)
    pool.start(output)
    return pool.join()


def run_p_sweep(domain, schedule=None, opts=None, threads=1, output=None,
                conf=None, cheeger_opts=None,
                depths=settings.INTERIOR_DEPTHS):
    schedule = check_schedule(
        default_schedule() if schedule is None else schedule)
    opts = opts or p_eigen.SolverOptions()
    # cached operators are shared by the worker threads
    domain.diff  # pylint: disable=pointless-statement

    continuation = Continuation('sweep', domain=domain, schedule=schedule,
                                opts=opts)
    dinkelbach = Dinkelbach('h', domain=domain, opts=cheeger_opts)
    bound = EigenBound('bound', domain=domain)
    layers = [
        SigmaLayer('sigma m={} eps={:.4g}'.format(depth, eps),
                   domain=domain, inner=inner, eps=eps, depth=depth)
        for inner, eps, depth in cheeger.interior_family(domain, depths)]
    _run([continuation, dinkelbach, bound] + layers, threads, conf, output)

    report = SweepReport(
        schedule=schedule,
        records=continuation.result,
        domain=domain,
        cheeger=dinkelbach.result,
        eigen_bound=bound.result,
        spacing=domain.spacing,
    )

    if layers:
        best = min(layers, key=lambda layer: layer.result)
        report.sigma_bound = best.result
        report.sigma_layer = (best.data['depth'], best.data['eps'])
    else:
        logger.warning('domain too thin for an interior layer')

    try:
        report.limit_estimate, __, report.limit_order = _limit_fit(report)
    except errors.InsufficientData as exc:
        logger.warning('no limit estimate: %s', exc)

    finals = report.converged_records
    if finals:
        report.level_set_ratio, __ = cheeger.best_level_set(
            domain, finals[-1].u)

    report.flags = {
        'b_dynamic_range': domain.b_dynamic_range,
        'b_range_exceeded':
            domain.b_dynamic_range > settings.B_DYNAMIC_RANGE_MAX,
        'unconverged': [r.p for r in report.records if not r.converged],
    }
    report.verdicts = [check_sandwich(report), check_truco(report)]
    report.verdicts.extend(check_bounds(report))

    for verdict in report.verdicts:
        logger.debug(
            'verdict %s: %s (margin %.3g)', verdict.name,
            verdict.passed if verdict.applicable else 'n/a', verdict.margin)
    return report


def fit_power_law(ps, lambdas):
    """(L, c, q) with lambda = L + c (p - 1)^q through three points."""
    if len(ps) != 3 or len(lambdas) != 3:
        raise errors.InsufficientData('need exactly three points')
    order = np.argsort(ps)[::-1]
    x1, x2, x3 = (float(ps[i]) - 1.0 for i in order)
    y1, y2, y3 = (float(lambdas[i]) for i in order)

    if y1 == y2 == y3:
        return y3, 0.0, 1.0

    def gap(q):
        return (x1 ** q - x2 ** q) / (x2 ** q - x3 ** q) - ratio

    q = 1.0
    if y2 != y3:
        ratio = (y1 - y2) / (y2 - y3)
        low, high = ORDER_BRACKET
        if ratio > 0 and gap(low) * gap(high) < 0:
            q = scipy.optimize.brentq(gap, low, high, xtol=1e-14)
        else:
            logger.debug('no power law through %r, using q=1', lambdas)

    slope = (y2 - y3) / (x2 ** q - x3 ** q)
    return y3 - slope * x3 ** q, slope, q


def _limit_fit(report):
    records = report.converged_records
    if len(records) < 3:
        raise errors.InsufficientData(
            '{} converged records, need 3'.format(len(records)))
    tail = sorted(records, key=lambda r: r.p, reverse=True)[-3:]
    return fit_power_law([r.p for r in tail], [r.eigenvalue for r in tail])


def extrapolate_limit(report):
    limit, __, __ = _limit_fit(report)
    return limit


def sandwich_tolerance(spacing):
    return settings.SANDWICH_TOL + settings.DISCRETIZATION_C * spacing


def check_sandwich(report, tol=None):
    tol = sandwich_tolerance(report.spacing) if tol is None else tol
    h = report.h_value
    values = [r.eigenvalue for r in report.records if r.eigenvalue is not None]
    if h is None or not values:
        return Verdict('sandwich', True, math.nan, applicable=False,
                       detail='needs h and one eigenvalue')

    margins = [min(values) / h - (1 - tol)]
    detail = 'min lambda {:.6g} vs h {:.6g}'.format(min(values), h)
    if report.sigma_bound is not None and report.limit_estimate is not None:
        margins.append(
            1 + tol - report.limit_estimate / report.sigma_bound)
        detail += ', limit {:.6g} vs sigma {:.6g}'.format(
            report.limit_estimate, report.sigma_bound)

    margin = min(margins)
    return Verdict('sandwich', margin >= 0, margin, detail=detail)


def comparison_constant(domain):
    """Smallest C with a <= C b on the grid (inf if b vanishes under a)."""
    a, b = domain.a_cells, domain.b_cells
    if (b[a > 0] <= 0).any():
        return math.inf
    return float((a / b).max())


def check_truco(report, constant=None, tol=settings.TRUCO_TOL):
    domain = report.domain
    if constant is None:
        constant = comparison_constant(domain)
    a, b = domain.a_cells, domain.b_cells
    if not np.isfinite(constant) or (
            a > constant * b * (1 + RELATIVE_SLACK)).any():
        return Verdict(
            'scaled_monotonicity', True, math.nan, applicable=False,
            detail='a <= {} b fails'.format(constant))

    points = sorted(
        (r.p, r.p * constant ** (-1 / r.p) * r.eigenvalue ** (1 / r.p))
        for r in report.records if r.eigenvalue is not None)
    margin = math.inf
    for index, (__, lower) in enumerate(points):
        for __, upper in points[index + 1:]:
            margin = min(margin, (upper * (1 + tol) - lower) / upper)
    return Verdict(
        'scaled_monotonicity', margin >= 0, margin,
        detail='C={:.6g}, {} points'.format(constant, len(points)))


def check_weight_comparison(domain1, domain2, p, opts=None, threads=1,
                            cheeger_opts=None):
    if not domain1.same_grid(domain2):
        raise errors.DomainMismatch('weights live on different grids')
    if not np.array_equal(domain1.b_cells, domain2.b_cells):
        raise errors.NotComparable('b differs between the domains')
    crossing = int(np.count_nonzero(domain1.a_cells > domain2.a_cells))
    if crossing:
        raise errors.NotComparable(
            'a1 <= a2 fails at {} cells'.format(crossing))

    opts = opts or p_eigen.SolverOptions()
    jobs = [
        Eigen('lambda a1', domain=domain1, p=p, opts=opts),
        Eigen('lambda a2', domain=domain2, p=p, opts=opts),
        Dinkelbach('h a1', domain=domain1, opts=cheeger_opts),
        Dinkelbach('h a2', domain=domain2, opts=cheeger_opts),
    ]
    lam1, lam2, cut1, cut2 = (job.result for job in _run(jobs, threads))

    tol = max(2 * opts.tol, settings.COMPARISON_TOL)
    lam_margin = (lam2.eigenvalue * (1 + tol) - lam1.eigenvalue) / \
        lam2.eigenvalue
    h_margin = (cut2.h * (1 + RELATIVE_SLACK) - cut1.h) / cut2.h
    margin = min(lam_margin, h_margin)
    return Verdict(
        'weight_comparison', margin >= 0, margin,
        detail='lambda {:.9g} <= {:.9g}, h {:.12g} <= {:.12g}'.format(
            lam1.eigenvalue, lam2.eigenvalue, cut1.h, cut2.h))


def check_lipschitz_chain(domain, ks, threads=1, cheeger_opts=None,
                          tol=settings.LIPSCHITZ_TOL):
    ks = list(ks)
    if not ks or any(b <= a for a, b in zip(ks, ks[1:])):
        raise errors.ValidationError('must be strictly increasing', key='ks')

    lowered = [cheeger.lipschitz_monotone_approx(domain, k) for k in ks]
    jobs = [Dinkelbach('h', domain=domain, opts=cheeger_opts)] + [
        Dinkelbach('h k={}'.format(k), domain=weights, opts=cheeger_opts)
        for k, weights in zip(ks, lowered)]
    results = [job.result.h for job in _run(jobs, threads)]
    h, chain = results[0], results[1:]
    gaps = [float(np.abs(weights.a_cells - domain.a_cells).max())
            for weights in lowered]

    margins = [(h * (1 + RELATIVE_SLACK) - value) / h for value in chain]
    margins += [
        (upper * (1 + RELATIVE_SLACK) - lower) / h
        for lower, upper in zip(chain, chain[1:])]
    close = [value for value, gap in zip(chain, gaps) if gap < domain.spacing]
    if close:
        margins.append(tol - abs(h - close[-1]) / h)

    margin = min(margins)
    return Verdict(
        'lipschitz_chain', margin >= 0, margin,
        detail='h={:.9g}, chain {}'.format(
            h, ' '.join('{:.6g}'.format(v) for v in chain)))


def check_bounds(report):
    records = report.converged_records
    verdicts = []

    if records:
        gap = max(abs(r.energy - r.eigenvalue * r.mass) / (
            r.eigenvalue * r.mass) for r in records)
        verdicts.append(Verdict(
            'energy_identity', gap <= ENERGY_IDENTITY_TOL,
            ENERGY_IDENTITY_TOL - gap))
    else:
        verdicts.append(Verdict(
            'energy_identity', True, math.nan, applicable=False,
            detail='no converged record'))

    if report.eigen_bound is not None:
        p0, constant = report.eigen_bound
        below = [r.eigenvalue for r in records if r.p < p0]
        if below:
            margin = (constant - max(below)) / constant
            verdicts.append(Verdict(
                'eigenvalue_bound', margin >= 0, margin,
                detail='p0={:.6g} C={:.6g}'.format(p0, constant)))
        else:
            verdicts.append(Verdict(
                'eigenvalue_bound', True, math.nan, applicable=False,
                detail='no record below p0={:.6g}'.format(p0)))

    if report.limit_estimate is not None:
        verdicts.append(Verdict(
            'limit_positive', report.limit_estimate > 0,
            report.limit_estimate, detail='q={:.4g}'.format(
                report.limit_order)))
    else:
        verdicts.append(Verdict(
            'limit_positive', True, math.nan, applicable=False,
            detail='no limit estimate'))

    if records:
        last = min(records, key=lambda r: r.p)
        residual = max(r.residual for r in records)
        verdicts.append(Verdict(
            'dual_residual', residual <= settings.DUAL_RESIDUAL_MAX,
            settings.DUAL_RESIDUAL_MAX - residual))

        if last.p <= settings.LIMIT_P:
            mass_margin = settings.MASS_TOL - abs(last.mass_l1 - 1)
            verdicts.append(Verdict(
                'mass_convergence', mass_margin >= 0, mass_margin,
                detail='p={:.6g} int b|u|={:.9g}'.format(
                    last.p, last.mass_l1)))
            verdicts.append(Verdict(
                'dual_sup_norm', last.z_sup <= settings.DUAL_SUP_NORM_MAX,
                settings.DUAL_SUP_NORM_MAX - last.z_sup,
                detail='p={:.6g}'.format(last.p)))
        else:
            # limit behaviour is only observed, not checked, above LIMIT_P
            detail = 'p={:.6g} int b|u|={:.9g} |z|={:.6g}'.format(
                last.p, last.mass_l1, last.z_sup)
            verdicts.append(Verdict(
                'mass_convergence', True, math.nan, applicable=False,
                detail=detail))
            verdicts.append(Verdict(
                'dual_sup_norm', True, math.nan, applicable=False,
                detail=detail))

    h = report.h_value
    if report.level_set_ratio is not None and h is not None:
        ratio = report.level_set_ratio / h
        margin = min(ratio - (1 - RELATIVE_SLACK),
                     1 + settings.LEVEL_SET_TOL - ratio)
        verdicts.append(Verdict(
            'level_set_optimality', margin >= 0, margin,
            detail='best level set {:.9g}'.format(report.level_set_ratio)))
    return verdicts
