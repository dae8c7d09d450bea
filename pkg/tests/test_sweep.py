import math

import numpy as np
import pytest

from cheeger_lab import errors, p_eigen, settings, sweep
from cheeger_lab.verify import unit_interval, unit_square

SHORT = (1.5, 1.25, 1.125)


@pytest.fixture(scope='module')
def short_report():
    return sweep.run_p_sweep(unit_interval(50), SHORT)


def record(p, eigenvalue, **kwargs):
    return sweep.SweepRecord(p=p, eigenvalue=eigenvalue, converged=True,
                             **kwargs)


@pytest.mark.unit
def test_default_schedule():
    assert sweep.default_schedule(3) == SHORT
    schedule = sweep.default_schedule()
    assert len(schedule) == 8
    assert schedule[-1] == 1 + 2 ** -8


@pytest.mark.unit
@pytest.mark.parametrize('schedule', [(), (1.5, 1.5), (1.25, 1.5), (2.5,),
                                      (1.5, 1.0)])
def test_check_schedule_rejects(schedule):
    with pytest.raises(errors.ValidationError):
        sweep.check_schedule(schedule)


@pytest.mark.unit
def test_verdict_failed():
    assert sweep.Verdict('x', False, -1.0).failed
    assert not sweep.Verdict('x', True, 1.0).failed
    assert not sweep.Verdict('x', False, math.nan, applicable=False).failed


@pytest.mark.unit
def test_fit_power_law_linear():
    ps = [1.5, 1.25, 1.125]
    limit, slope, order = sweep.fit_power_law(
        ps, [2 + 3 * (p - 1) for p in ps])
    assert limit == pytest.approx(2.0)
    assert slope == pytest.approx(3.0)
    assert order == pytest.approx(1.0)


@pytest.mark.unit
def test_fit_power_law_sqrt():
    ps = [1.125, 1.5, 1.25]
    limit, __, order = sweep.fit_power_law(
        ps, [2 + math.sqrt(p - 1) for p in ps])
    assert limit == pytest.approx(2.0, rel=1e-9)
    assert order == pytest.approx(0.5, rel=1e-9)


@pytest.mark.unit
def test_fit_power_law_constant():
    assert sweep.fit_power_law([1.5, 1.25, 1.125], [5.0] * 3)[0] == 5.0


@pytest.mark.unit
def test_fit_power_law_needs_three_points():
    with pytest.raises(errors.InsufficientData):
        sweep.fit_power_law([1.5, 1.25], [3.0, 2.5])


@pytest.mark.unit
def test_extrapolate_limit_insufficient():
    report = sweep.SweepReport(
        schedule=SHORT, records=[record(1.5, 5.0), record(1.25, 3.5),
                                 sweep.SweepRecord(p=1.125)])
    with pytest.raises(errors.InsufficientData):
        sweep.extrapolate_limit(report)


@pytest.mark.unit
def test_sandwich_tolerance():
    assert sweep.sandwich_tolerance(0.0) == pytest.approx(0.02)
    assert sweep.sandwich_tolerance(0.01) > sweep.sandwich_tolerance(0.0)


@pytest.mark.unit
def test_sandwich_not_applicable_without_h():
    report = sweep.SweepReport(schedule=SHORT, records=[record(1.5, 5.0)])
    verdict = sweep.check_sandwich(report)
    assert not verdict.applicable
    assert not verdict.failed


@pytest.mark.unit
def test_comparison_constant():
    dom = unit_square(3, a='1 + x', b=0.5)
    assert sweep.comparison_constant(dom) == pytest.approx(2 * (1 + 5 / 6))


@pytest.mark.unit
def test_truco_not_applicable():
    report = sweep.SweepReport(
        schedule=SHORT, records=[record(1.5, 5.0), record(1.25, 4.0)],
        domain=unit_interval(4, a=2.0))
    verdict = sweep.check_truco(report, 1.0)
    assert not verdict.applicable
    assert verdict.name == 'scaled_monotonicity'


@pytest.mark.unit
def test_truco_detects_decrease():
    report = sweep.SweepReport(
        schedule=SHORT, records=[record(1.5, 1.0), record(1.25, 9.0)],
        domain=unit_interval(4))
    verdict = sweep.check_truco(report)
    assert verdict.applicable
    assert verdict.failed


@pytest.mark.unit
def test_sweep_interval(short_report):
    report = short_report
    assert report.schedule == SHORT
    assert [r.p for r in report.records] == list(SHORT)
    assert all(r.converged for r in report.records)
    assert report.h_value == pytest.approx(2.0)
    assert report.cheeger.set.size == 50

    lambdas = [r.eigenvalue for r in report.records]
    assert lambdas == sorted(lambdas, reverse=True)
    assert min(lambdas) >= report.h_value

    assert report.sigma_bound >= report.h_value
    assert report.sigma_layer[0] in (1, 2, 3)
    assert report.limit_estimate is not None
    assert report.level_set_ratio >= report.h_value * (1 - 1e-12)
    assert report.flags['unconverged'] == []
    assert all(r.residual <= settings.DUAL_RESIDUAL_MAX
               for r in report.records)
    assert not report.flags['b_range_exceeded']

    for r in report.records:
        assert r.residual is not None
        assert r.z_sup is not None
        assert r.row[0] == r.p


@pytest.mark.unit
def test_sweep_interval_verdicts(short_report):
    verdicts = {v.name: v for v in short_report.verdicts}
    assert {'sandwich', 'scaled_monotonicity', 'energy_identity',
            'eigenvalue_bound', 'limit_positive', 'mass_convergence',
            'dual_residual', 'dual_sup_norm',
            'level_set_optimality'} <= set(verdicts)
    for name in ('scaled_monotonicity', 'energy_identity',
                 'eigenvalue_bound', 'limit_positive', 'dual_residual',
                 'level_set_optimality'):
        assert verdicts[name].passed, verdicts[name]
    # the schedule stops short of LIMIT_P
    for name in ('mass_convergence', 'dual_sup_norm'):
        assert not verdicts[name].applicable
        assert not verdicts[name].failed
    # a three point fit is coarse, so only the loose sandwich holds here
    assert sweep.check_sandwich(short_report, tol=0.2).passed


@pytest.mark.unit
def test_sweep_threads_agree(short_report):
    threaded = sweep.run_p_sweep(unit_interval(50), SHORT, threads=2)
    assert [r.eigenvalue for r in threaded.records] == \
        [r.eigenvalue for r in short_report.records]
    assert threaded.h_value == short_report.h_value
    assert threaded.sigma_bound == short_report.sigma_bound


@pytest.mark.unit
def test_sweep_records_solver_failure():
    opts = p_eigen.SolverOptions(max_iters=1)
    report = sweep.run_p_sweep(unit_interval(10), (1.5,), opts)
    assert report.flags['unconverged'] == [1.5]
    assert report.records[0].residual is None


@pytest.mark.unit
def test_weight_comparison():
    lower = unit_interval(20)
    upper = lower.with_weights(a=lower.a_field + np.linspace(0, 1, 20))
    verdict = sweep.check_weight_comparison(lower, upper, 1.5)
    assert verdict.passed
    assert verdict.margin > 0


@pytest.mark.unit
def test_weight_comparison_errors():
    lower = unit_interval(20)
    with pytest.raises(errors.NotComparable):
        sweep.check_weight_comparison(
            lower.with_weights(a=2 * lower.a_field), lower, 1.5)
    with pytest.raises(errors.NotComparable):
        sweep.check_weight_comparison(
            lower, lower.with_weights(b=2 * lower.b_field), 1.5)
    with pytest.raises(errors.DomainMismatch):
        sweep.check_weight_comparison(lower, unit_interval(10), 1.5)


@pytest.mark.unit
def test_lipschitz_chain_step_weight():
    dom = unit_square(6)
    x, __ = dom.centers
    step = dom.with_weights(a=1.0 + (x > 0.5))
    verdict = sweep.check_lipschitz_chain(step, (1, 4, 16))
    assert verdict.passed, verdict
    with pytest.raises(errors.ValidationError):
        sweep.check_lipschitz_chain(step, (4, 1))


@pytest.mark.slow
def test_sweep_interval_default_schedule():
    report = sweep.run_p_sweep(unit_interval(1000))
    assert report.h_value == pytest.approx(2.0)
    assert report.limit_estimate == pytest.approx(2.0, rel=0.02)
    verdict = sweep.check_sandwich(report)
    assert verdict.passed, verdict
    assert report.flags['unconverged'] == []
    assert not report.failed, report.failed


@pytest.mark.unit
def test_limit_verdicts_apply_at_limit_p():
    records = [
        record(1.5, 5.0, residual=1e-6, z_sup=1.5, mass_l1=0.9,
               energy=5.0, mass=1.0),
        record(settings.LIMIT_P, 2.1, residual=1e-6, z_sup=1.05,
               mass_l1=0.99, energy=2.1, mass=1.0),
    ]
    report = sweep.SweepReport(schedule=(1.5, settings.LIMIT_P),
                               records=records)
    verdicts = {v.name: v for v in sweep.check_bounds(report)}
    assert verdicts['dual_sup_norm'].passed
    assert verdicts['dual_sup_norm'].margin == pytest.approx(0.05)
    assert verdicts['mass_convergence'].passed

    records[-1].z_sup = 1.2
    verdicts = {v.name: v for v in sweep.check_bounds(report)}
    assert verdicts['dual_sup_norm'].failed
