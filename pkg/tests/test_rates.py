import numpy as np
import pytest

import leadfollow as lf
from leadfollow.rates import (
    GridMismatchError, NotHurwitzError, QuadratureUnresolvedError,
    WindowTooNarrowError, jordan_transition, jordan_transition_ode,
)
from leadfollow.series import MomentSeries


def _synthetic_series(times, mse):
    times = np.asarray(times, dtype=float)
    mse = np.asarray(mse, dtype=float)
    return MomentSeries(
        times=times, follower_ids=(1,), mean_err=np.zeros((times.size, 1, 2)),
        mse=mse[:, None], halfwidth=None, provenance="oracle",
    )


def test_monte_carlo_preconditions(fig1):
    with pytest.raises(ValueError):
        lf.monte_carlo_moments(fig1, trials=1)


def test_monte_carlo_zero_noise(fig1):
    scen = fig1.with_overrides(t_end=5.0, rho=0.0, trials=5,
                               sample_times=[0.0, 5.0])
    mc = lf.monte_carlo_moments(scen)
    assert np.abs(mc.halfwidth).max() <= 1e-12
    det = lf.simulate_full(scen, scen.base_seed)
    err = det.states[:, 1:, :] - det.states[:, [0], :]
    assert np.allclose(mc.mean_err, err, atol=1e-12)


def test_fit_exact_power_law():
    t = np.geomspace(1.0, 100.0, 40)
    fit = lf.fit_power_law(_synthetic_series(t, 7.0 * t ** -0.4), (1.0, 100.0))
    assert fit.slope[0] == pytest.approx(-0.4, abs=1e-10)
    assert fit.intercept[0] == pytest.approx(np.log(7.0), abs=1e-10)

    fit = lf.fit_power_law(_synthetic_series(t, np.full(t.size, 2.0)), (1.0, 100.0))
    assert fit.slope[0] == pytest.approx(0.0, abs=1e-12)


def test_fit_window_too_narrow():
    t = np.geomspace(1.0, 100.0, 40)
    series = _synthetic_series(t, 7.0 * t ** -0.4)
    with pytest.raises(WindowTooNarrowError):
        lf.fit_power_law(series, (10.0, 20.0))


def test_reference_slope_window(fig1_oracle):
    fit = lf.fit_power_law(fig1_oracle, (20.0, 100.0))
    assert np.all(fit.slope >= -0.55)
    assert np.all(fit.slope <= -0.25)


def test_slope_stable_under_window_shift(fig1):
    """Extending the horizon and shifting the fit window moves the slope only
    marginally."""
    scen = fig1.with_overrides(t_end=150.0,
                               sample_times=np.geomspace(0.5, 150.0, 60))
    series = lf.evolve_moments(scen)
    a = lf.fit_power_law(series, (20.0, 100.0))
    b = lf.fit_power_law(series, (30.0, 150.0))
    assert np.abs(a.slope - b.slope).max() <= 0.05


def test_envelope_check_limits(fig1_oracle):
    assert np.all(lf.envelope_check(fig1_oracle, 1e12, 0.4, 5.0) == 0.0)
    assert np.all(lf.envelope_check(fig1_oracle, 0.0, 0.4, 5.0) == 1.0)


def test_envelope_check_antitone(fig1_oracle):
    fracs = [lf.envelope_check(fig1_oracle, C, 0.4, 5.0) for C in
             (0.1, 1.0, 5.0, 20.0, 100.0)]
    for lo, hi in zip(fracs[:-1], fracs[1:]):
        assert np.all(hi <= lo)


def _const_gain(t):
    return np.ones_like(np.asarray(t, dtype=float))


def test_jordan_scalar_constant_gain():
    grid = np.linspace(1.0, 6.0, 501)
    tm = jordan_transition(1.0, _const_gain, 1, 1.0, grid)
    assert np.allclose(tm.values[:, 0, 0], np.exp(-(grid - 1.0)), atol=1e-12)


def test_jordan_block_closed_form():
    # r = 2, lambda = 1, a = 1 from t0 = 0: off-diagonal entry is -t e^{-t}
    grid = np.linspace(0.0, 5.0, 2001)
    tm = jordan_transition(1.0, _const_gain, 2, 0.0, grid)
    assert np.allclose(tm.values[:, 0, 1], -grid * np.exp(-grid), atol=1e-9)
    assert np.allclose(tm.values[:, 1, 0], 0.0)
    assert np.allclose(tm.values[:, 0, 0], tm.values[:, 1, 1])


def test_jordan_recursion_vs_ode_battery():
    rng = np.random.default_rng(3)
    for _ in range(10):
        lam = complex(rng.uniform(0.3, 3.0), rng.uniform(-1.0, 1.0))
        r = int(rng.integers(1, 5))
        mu, c, d = rng.uniform(0.3, 2.0), rng.uniform(0.5, 3.0), rng.uniform(0.5, 3.0)
        beta = rng.uniform(0.2, 0.8)

        def gain(t, mu=mu, c=c, d=d, beta=beta):
            return mu * (c * np.asarray(t) + d) ** (-beta)

        grid = np.linspace(0.5, 10.0, 8001)
        tm = jordan_transition(lam, gain, r, 0.5, grid)
        ode = jordan_transition_ode(lam, gain, r, 0.5, grid)
        assert np.abs(tm.values - ode).max() <= 1e-6


def test_jordan_coarse_grid_rejected():
    grid = np.linspace(0.5, 10.0, 41)
    with pytest.raises(QuadratureUnresolvedError):
        jordan_transition(2.0, lambda t: 1.5 * (np.asarray(t) + 0.5) ** -0.3,
                          3, 0.5, grid)


def test_transition_bound_scalar_exact(fig1):
    """For r = 1 the normalized log ratio is exactly -eps * int(envelope):
    strictly decreasing, so the witness passes."""
    grid = np.geomspace(1.0, 100.0, 4001)
    rep = lf.transition_bound_check([1.0], fig1.profile, 0.1, grid)
    entry = rep.entries[0]
    tm = jordan_transition(1.0, fig1.profile.envelope, 1, 1.0, grid)
    log_ratio = tm.log_norms() + (1.0 - 0.1) * tm.gain_integral
    assert np.allclose(log_ratio, -0.1 * tm.gain_integral, atol=1e-9)
    assert entry.no_growth
    assert entry.head_log_max == pytest.approx(0.0, abs=1e-12)


def test_transition_bound_preconditions(fig1):
    grid = np.geomspace(1.0, 10.0, 101)
    with pytest.raises(ValueError):
        lf.transition_bound_check([0.5 + 0.0j], fig1.profile, 0.6, grid)
    with pytest.raises(ValueError):
        lf.transition_bound_check([-1.0], fig1.profile, 0.1, grid)


def test_transition_bound_jordan_block(fig1):
    grid = np.geomspace(1.0, 1000.0, 20001)
    rep = lf.transition_bound_check([(1.0, 3)], fig1.profile, 0.5, grid)
    assert rep.all_no_growth
    assert rep.entries[0].tail_log_max < rep.entries[0].head_log_max
    assert len(rep.lines()) == 1


def test_filter_constant_drive(fig1):
    b = fig1.plant.stabilizer_poly()
    t = np.arange(0.0, 50.0 + 1e-9, 0.01)
    _, states = lf.filter_response(b, t, np.full(t.size, 2.0), [0.5, -0.5, 1.0])
    assert abs(states[-1, 0] - 2.0 / b[0]) <= 1e-4
    assert np.abs(states[-1, 1:3]).max() <= 1e-4


def test_filter_exponential_tail(fig1):
    b = fig1.plant.stabilizer_poly()
    t = np.arange(0.0, 100.0 + 1e-9, 0.005)
    drive = 2.0 + np.exp(-t ** 0.4)
    _, states = lf.filter_response(b, t, drive, np.zeros(3))
    ratio = np.abs(states[:, 0] - 2.0) * np.exp(t ** 0.4)
    head = ratio[(t >= 5.0) & (t <= 10.0)].max()
    tail = ratio[(t >= 50.0) & (t <= 100.0)].max()
    assert tail <= 1.05 * head


def test_filter_power_tail(fig1):
    b = fig1.plant.stabilizer_poly()
    t = np.arange(0.01, 100.0 + 1e-9, 0.005)
    drive = 2.0 + t ** -0.2  # squared deviation decays like t^(-0.4)
    _, states = lf.filter_response(b, t, drive, np.zeros(3))
    witness = (states[:, 0] - 2.0 / b[0]) ** 2 * t ** 0.4
    head = witness[(t >= 5.0) & (t <= 10.0)].max()
    tail = witness[(t >= 50.0) & (t <= 100.0)].max()
    assert tail <= 1.05 * head


def test_filter_rejections():
    t = np.linspace(0.0, 1.0, 11)
    with pytest.raises(NotHurwitzError):
        lf.filter_response([-1.0, 1.0], t, np.zeros(t.size), [0.0])
    with pytest.raises(GridMismatchError):
        lf.filter_response([1.0, 1.0], t, np.zeros(5), [0.0])
    with pytest.raises(GridMismatchError):
        lf.filter_response([1.0, 1.0], t ** 2, np.zeros(t.size), [0.0])
    with pytest.raises(GridMismatchError):
        lf.filter_response([1.0, 1.0], t, np.zeros(t.size), [0.0, 0.0])
