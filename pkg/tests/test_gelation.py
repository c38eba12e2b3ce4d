"""Gel-time detection, cutoff sweep machinery, blow-up and tail diagnostics."""
import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from ohslab import ConstantKernel, GridSpec, PowerSumKernel, SimConfig, UniformOn
from ohslab.errors import InvalidInputError, WindowEmptyError
from ohslab.gelation import (
    blowup_bound,
    comparison_ode_blowup,
    cutoff_sweep,
    gelation_time,
    tail_decay_fit,
    tail_positivity,
)
from ohslab.grid import State, build
from ohslab.moments import MomentRecord, MomentSeries
from ohslab.solver import RunResult, run

# regression baselines recorded from the deterministic reference run
POWERSUM_T_LOSS = 0.5943603100879776
POWERSUM_TAIL_RATE = -108.82324872935166


def synthetic_series(times, gel, m1=None, tails=None, thresholds=()):
    series = MomentSeries(orders=(0.0, 1.0), thresholds=thresholds)
    for k, t in enumerate(times):
        series.records.append(
            MomentRecord(
                t=float(t),
                moments={0.0: 1.0, 1.0: (m1[k] if m1 is not None else 1.0 - gel[k])},
                tails={m: tails[m][k] for m in thresholds} if tails else {},
                gel_mass=float(gel[k]),
                clamped_mass=0.0,
            )
        )
    return series


def test_gelation_time_linear_interpolation():
    series = synthetic_series([0.0, 1.0, 2.0], [0.0, 0.005, 0.02])
    assert gelation_time(series, 0.01) == pytest.approx(4.0 / 3.0, rel=1e-12)


def test_gelation_time_not_reached(bagland_runs):
    # support never gets near the cutoff within the horizon
    result, _ = bagland_runs[256]
    assert gelation_time(result.series, 0.01) is None


def test_gelation_time_validation():
    series = synthetic_series([0.0, 1.0], [0.0, 0.1])
    for eps in (0.0, 1.0, -0.2):
        with pytest.raises(InvalidInputError):
            gelation_time(series, eps)


def test_gelation_time_monotone_in_threshold(powersum_run):
    losses = [gelation_time(powersum_run.series, eps) for eps in (0.005, 0.01, 0.02)]
    assert all(t is not None for t in losses)
    assert losses[0] <= losses[1] <= losses[2]


def test_gelation_time_regression_value(powersum_run):
    t_loss = gelation_time(powersum_run.series, 0.01)
    assert t_loss == pytest.approx(POWERSUM_T_LOSS, rel=1e-3)


def constant_base(t_end=1.0):
    return SimConfig(
        kernel=ConstantKernel(1.0), grid=GridSpec("uniform", 4.0, 64),
        initial=UniformOn(0.0, 1.0, 1.0), t_end=t_end, record_cadence=0.05,
    )


def test_sweep_constant_kernel_never_reaches_cutoffs():
    # explicit-solution support stays in [0, M*(1+t_end)] = [0, 2]
    report, artifacts = cutoff_sweep(constant_base(), (4.0, 8.0), epsilon=0.01, workers=1)
    assert [row.R for row in report.rows] == [4.0, 8.0]
    assert all(row.t_loss is None for row in report.rows)
    # upwind leakage beyond the support is at roundoff scale
    assert all(row.gel_fraction_final <= 1e-12 for row in report.rows)
    assert len(artifacts) == 2


def test_sweep_empty_cutoffs_yield_empty_report():
    report, artifacts = cutoff_sweep(constant_base(), (), epsilon=0.01)
    assert report.rows == [] and artifacts == []


def test_sweep_requires_increasing_cutoffs():
    with pytest.raises(InvalidInputError):
        cutoff_sweep(constant_base(), (4.0, 4.0), epsilon=0.01)
    with pytest.raises(InvalidInputError):
        cutoff_sweep(constant_base(), (8.0, 4.0), epsilon=0.01)


def powersum_base():
    return SimConfig(
        kernel=PowerSumKernel(1.0, 1.5), grid=GridSpec("uniform", 2.0, 32),
        initial=UniformOn(0.5, 1.0, 1.0), t_end=1.0, record_cadence=0.02,
    )


def test_sweep_row_replicates_direct_run():
    base = powersum_base()
    report, _ = cutoff_sweep(base, (2.0, 3.0), epsilon=0.01, resolution=1.0 / 16.0, workers=1)
    direct = run(base)  # R = 2, N = 32 equals the first row's configuration
    assert report.rows[0].N == 32
    assert report.rows[0].t_loss == gelation_time(direct.series, 0.01)


def test_sweep_parallel_matches_serial():
    base = powersum_base()
    serial, _ = cutoff_sweep(base, (2.0, 3.0), epsilon=0.01, workers=1)
    parallel, _ = cutoff_sweep(base, (2.0, 3.0), epsilon=0.01, workers=2)
    for a, b in zip(serial.rows, parallel.rows):
        assert (a.R, a.N, a.t_loss, a.gel_fraction_final) == (b.R, b.N, b.t_loss, b.gel_fraction_final)


def test_sweep_scales_cell_count_with_cutoff():
    report, _ = cutoff_sweep(powersum_base(), (2.0, 4.0), epsilon=0.01,
                             resolution=1.0 / 16.0, workers=1)
    assert [row.N for row in report.rows] == [32, 64]


def test_blowup_bound_spot_values():
    # sigma = 1/2: bound = (1/4)^(1/2) = 0.5
    assert blowup_bound(3, 0.0, 4.0, 1.0, 2.0, 1.0) == pytest.approx(0.5, rel=1e-15)
    # sigma = 1: bound = 1 + 1 = 2
    assert blowup_bound(2, 1.0, 1.0, 1.0, 2.0, 1.0) == pytest.approx(2.0, rel=1e-15)


def test_blowup_bound_validation():
    with pytest.raises(InvalidInputError):
        blowup_bound(1.5, 0.0, 1.0, 1.0, 2.0, 1.0)
    with pytest.raises(InvalidInputError):
        blowup_bound(2, 0.0, 1.0, 1.0, 1.0, 1.0)
    with pytest.raises(InvalidInputError):
        blowup_bound(2, 0.0, 0.0, 1.0, 2.0, 1.0)
    with pytest.raises(InvalidInputError):
        blowup_bound(2, -0.1, 1.0, 1.0, 2.0, 1.0)
    with pytest.raises(InvalidInputError):
        blowup_bound(2, 0.0, 1.0, 0.0, 2.0, 1.0)


def test_blowup_bound_limit_with_huge_moment():
    # an enormous moment value pins the bound at delta
    assert blowup_bound(3, 0.25, 1e300, 1.0, 2.0, 1.0) == pytest.approx(0.25, abs=1e-12)


def test_blowup_bound_monotonicities():
    moments_grid = np.geomspace(0.1, 1e4, 13)
    bounds = [blowup_bound(3, 0.0, m, 1.0, 2.0, 1.0) for m in moments_grid]
    assert np.all(np.diff(bounds) < 0)
    theta_grid = np.geomspace(0.1, 100.0, 13)
    bounds = [blowup_bound(3, 0.0, 4.0, th, 2.0, 1.0) for th in theta_grid]
    assert np.all(np.diff(bounds) < 0)
    # fixed sigma = 0.5 realized through r = 1 + (beta - 1) / sigma >= 2
    betas = np.linspace(1.5, 3.0, 10)
    bounds = [blowup_bound(1.0 + (b - 1.0) / 0.5, 0.0, 4.0, 1.0, b, 1.0) for b in betas]
    assert np.all(np.diff(bounds) < 0)


def test_comparison_ode_spot_values():
    assert comparison_ode_blowup(1.0, 1.0, 1.0) == 1.0
    assert comparison_ode_blowup(4.0, 2.0, 0.5) == pytest.approx(0.5, rel=1e-15)
    with pytest.raises(InvalidInputError):
        comparison_ode_blowup(0.0, 1.0, 1.0)
    with pytest.raises(InvalidInputError):
        comparison_ode_blowup(1.0, -1.0, 1.0)
    with pytest.raises(InvalidInputError):
        comparison_ode_blowup(1.0, 1.0, 0.0)


def test_comparison_ode_matches_bound_under_identification():
    q0 = 4.0
    theta1, rho0 = 1.3, 0.8
    for r in (2, 3, 4, 5, 6):
        for beta in (1.2, 1.5, 2.0, 2.5, 3.0):
            sigma = (beta - 1.0) / (r - 1.0)
            c = theta1 * rho0 ** (1.0 - sigma) * (r - 1.0)
            bound = blowup_bound(r, 0.0, q0, theta1, beta, rho0)
            tstar = comparison_ode_blowup(q0, c, sigma)
            assert abs(bound - tstar) / tstar <= 1e-12


@pytest.mark.parametrize("params", [(1.0, 1.0, 1.0), (1.0, 1.0, 0.5), (2.0, 1.5, 2.0)])
def test_numerical_ode_diverges_at_predicted_time(params):
    q0, c, sigma = params
    tstar = comparison_ode_blowup(q0, c, sigma)

    def escaped(t, y):
        return y[0] - 1e6

    escaped.terminal = True
    escaped.direction = 1.0
    sol = solve_ivp(
        lambda t, y: c * y ** (sigma + 1.0), (0.0, tstar), [q0],
        rtol=1e-10, atol=1e-12, events=escaped, max_step=tstar / 50.0,
    )
    assert sol.t_events[0].size == 1
    t_escape = sol.t_events[0][0]
    assert 0.99 * tstar <= t_escape <= tstar


def test_tail_fit_recovers_planted_exponential():
    times = np.linspace(0.0, 2.0, 41)
    theta = 1e-3 * np.exp(-3.0 * times)
    series = synthetic_series(times, np.zeros_like(times), m1=np.ones_like(times),
                              tails={2.0: theta}, thresholds=(2.0,))
    cfg = SimConfig(
        kernel=ConstantKernel(1.0), grid=GridSpec("uniform", 4.0, 16),
        initial=UniformOn(0.0, 1.0, 1.0), t_end=2.0, record_cadence=0.05,
    ).resolved()
    handle = RunResult(config=cfg, series=series, final_state=None, states=None)
    fit = tail_decay_fit(handle, 2.0)
    assert fit.rate == pytest.approx(3.0, abs=1e-6)
    assert fit.reference_rate is None  # constant kernel has no growth parameters


def test_tail_fit_zero_tail_reports_no_rate():
    # few steps, so the numerical front never gets anywhere near lambda
    cfg = SimConfig(
        kernel=ConstantKernel(1.0), grid=GridSpec("uniform", 4.0, 64),
        initial=UniformOn(0.0, 1.0, 1.0), t_end=0.1, record_cadence=0.02,
        dt_max=0.05, truncation_thresholds=(3.9,),
    )
    result = run(cfg)
    fit = tail_decay_fit(result, 3.9)
    assert np.all(fit.theta == 0.0)
    assert fit.rate is None


def test_tail_fit_window_empty():
    times = np.linspace(0.0, 1.0, 11)
    theta = np.full_like(times, 0.9)
    series = synthetic_series(times, np.zeros_like(times), m1=np.ones_like(times),
                              tails={2.0: theta}, thresholds=(2.0,))
    cfg = SimConfig(
        kernel=ConstantKernel(1.0), grid=GridSpec("uniform", 4.0, 16),
        initial=UniformOn(0.0, 1.0, 1.0), t_end=1.0, record_cadence=0.1,
    ).resolved()
    handle = RunResult(config=cfg, series=series, final_state=None, states=None)
    with pytest.raises(WindowEmptyError):
        tail_decay_fit(handle, 2.0)


def test_tail_fit_regression_for_powersum(powersum_run):
    fit = tail_decay_fit(powersum_run, 2.0)
    assert fit.reference_rate == pytest.approx(0.5 * math.sqrt(2.0), rel=1e-15)
    assert fit.rate == pytest.approx(POWERSUM_TAIL_RATE, rel=1e-3)


def test_tail_fit_threshold_validation(powersum_run):
    with pytest.raises(InvalidInputError):
        tail_decay_fit(powersum_run, 4.0)  # not inside (0, R)
    no_states = RunResult(
        config=powersum_run.config, series=powersum_run.series,
        final_state=powersum_run.final_state, states=None,
    )
    with pytest.raises(InvalidInputError):
        tail_decay_fit(no_states, 3.0)  # neither recorded nor replayable


def test_tail_positivity(bagland_t2):
    first, last = bagland_t2.states[0], bagland_t2.states[-1]
    value0, flag0 = tail_positivity(first, 2.0)
    assert value0 == 0.0 and not flag0
    value2, flag2 = tail_positivity(last, 2.0)
    assert value2 > 0.0 and flag2
    zero = State(t=0.0, xi=np.zeros(16), gel_mass=0.0, grid=build("uniform", 4.0, 16))
    value, flag = tail_positivity(zero, 2.0)
    assert value == 0.0 and not flag
    with pytest.raises(InvalidInputError):
        tail_positivity(zero, 4.0)
