"""Monte Carlo aggregation, power-law fits, envelope tests, transition-matrix checks.

The Monte Carlo estimator runs all trials through the batched path engine with a
single counter-based noise stream keyed on the base seed, and aggregates moments
in fixed trial order, so results are bit-reproducible and independent of any
scheduling concerns.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import sde
from .integrate import rk4_path
from .matrices import DegenerateRowError, is_hurwitz
from .series import MomentSeries


class WindowTooNarrowError(ValueError):
    pass


class QuadratureUnresolvedError(RuntimeError):
    pass


class NotHurwitzError(ValueError):
    pass


class GridMismatchError(ValueError):
    pass


def monte_carlo_moments(scen, trials: int | None = None, base_seed: int | None = None,
                        sample_times=None) -> MomentSeries:
    """Sample means of the follower errors and squared errors over many trials."""
    trials = scen.trials if trials is None else int(trials)
    base_seed = scen.base_seed if base_seed is None else int(base_seed)
    if trials < 2:
        raise ValueError("need at least 2 trials for a variance estimate")
    record_idx = sde._record_indices(scen, sample_times)
    states = sde._run_full(scen, base_seed, trials, record_idx)
    fol = scen.graph.follower_indices
    lead = scen.graph.leader_index
    err = states[:, :, fol, :] - states[:, :, [lead], :]
    sq = np.einsum("tsfk,tsfk->tsf", err, err)
    mean_err = err.mean(axis=0)
    mse = sq.mean(axis=0)
    hw = 1.96 * sq.std(axis=0, ddof=1) / np.sqrt(trials)
    return MomentSeries(
        times=record_idx * scen.dt, follower_ids=tuple(fol), mean_err=mean_err,
        mse=mse, halfwidth=hw, provenance="monte_carlo",
    )


@dataclass(frozen=True)
class PowerLawFit:
    follower_ids: tuple[int, ...]
    window: tuple[float, float]
    slope: np.ndarray       # per follower
    intercept: np.ndarray
    slope_stderr: np.ndarray


def fit_power_law(series: MomentSeries, window: tuple[float, float]) -> PowerLawFit:
    """Unweighted least squares of log(mse) against log(t) inside the window."""
    t_lo, t_hi = window
    mask = series.window(t_lo, t_hi) & (series.times > 0)
    tt = series.times[mask]
    if tt.size < 8 or tt.max() / tt.min() < 10 ** 0.6:
        raise WindowTooNarrowError(
            f"window {window} has {tt.size} points spanning "
            f"{np.log10(tt.max() / tt.min()) if tt.size else 0:.2f} decades; "
            "need >= 8 points over >= 0.6 decades"
        )
    x = np.log(tt)
    y = np.log(series.mse[mask])
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    dof = x.size - 2
    s2 = (resid ** 2).sum(axis=0) / dof
    xvar = ((x - x.mean()) ** 2).sum()
    stderr = np.sqrt(s2 / xvar)
    return PowerLawFit(
        follower_ids=series.follower_ids, window=(float(t_lo), float(t_hi)),
        slope=coef[0], intercept=coef[1], slope_stderr=stderr,
    )


def envelope_check(series: MomentSeries, C: float, beta: float, t_min: float) -> np.ndarray:
    """Per-follower fraction of sample times t >= t_min with mse > C t^(-beta)."""
    mask = (series.times >= t_min) & (series.times > 0)
    if not mask.any():
        raise ValueError("t_min beyond the sampled horizon")
    tt = series.times[mask]
    bound = C * tt ** (-beta)
    viol = series.mse[mask] > bound[:, None]
    return viol.mean(axis=0)


@dataclass(frozen=True)
class TransitionMatrix:
    """Jordan-block transition matrix on a grid, upper triangular Toeplitz."""

    lam: complex
    r: int
    t0: float
    grid: np.ndarray            # (S,), increasing from t0
    values: np.ndarray          # (S, r, r) complex
    gain_integral: np.ndarray   # (S,): int_{t0}^{t} a
    band: np.ndarray            # (S, r): P_0 .. P_{r-1}
    scaled_band: np.ndarray     # (S, r): P_i * exp(+lam * int a), always O(poly)

    def log_norms(self) -> np.ndarray:
        """log of the spectral norm at every grid point, computed stably.

        Factoring out the diagonal decay exp(-lam * int a) keeps the residual
        Toeplitz factor well scaled even when the raw entries underflow.
        """
        out = np.empty(self.grid.size)
        for s in range(self.grid.size):
            out[s] = -self.lam.real * self.gain_integral[s] + np.log(
                np.linalg.norm(_toeplitz_upper(self.scaled_band[s]), 2)
            )
        return out


def _cumtrapz(y: np.ndarray, x: np.ndarray) -> np.ndarray:
    out = np.zeros(x.size, dtype=y.dtype)
    out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(x))
    return out


def _toeplitz_upper(band: np.ndarray) -> np.ndarray:
    r = band.size
    m = np.zeros((r, r), dtype=band.dtype)
    for i in range(r):
        m += band[i] * np.eye(r, k=i)
    return m


def _transition_band(lam: complex, a_vals: np.ndarray, grid: np.ndarray, r: int):
    """P_0..P_{r-1} on the grid via the integral recursion in scaled form.

    With u(t) = int a and Q_i = P_i exp(+lam u), the recursion collapses to
    Q_i(t) = -int_{t0}^t a Q_{i-1}, evaluated by composite trapezoid.
    """
    u = _cumtrapz(a_vals, grid)
    Q = np.empty((grid.size, r), dtype=complex)
    Q[:, 0] = 1.0
    for i in range(1, r):
        Q[:, i] = -_cumtrapz(a_vals * Q[:, i - 1], grid)
    band = Q * np.exp(-lam * u)[:, None]
    return u, Q, band


def jordan_transition(lam: complex, gain_fn, r: int, t0: float, grid,
                      quad_tol: float = 1e-6) -> TransitionMatrix:
    """Transition matrix of x' = -a(t) J x for an r-sized Jordan block J(lam).

    ``gain_fn`` maps a time array to gain values.  The off-diagonal band comes
    from trapezoid quadrature of the recursion on the supplied grid; a
    Richardson comparison against the half-resolution grid guards resolution.
    """
    if r < 1:
        raise ValueError("block size must be >= 1")
    grid = np.asarray(grid, dtype=float)
    if grid[0] != t0 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must increase starting exactly at t0")
    lam = complex(lam)
    a_vals = np.asarray(gain_fn(grid), dtype=float)
    u, Q, band = _transition_band(lam, a_vals, grid, r)
    if grid.size >= 5:
        coarse = slice(None, None, 2)
        _, Qc, _ = _transition_band(lam, a_vals[coarse], grid[coarse], r)
        # Trapezoid converges at order 2: the grid-vs-half-grid gap over 3
        # estimates the fine-grid error.
        est = np.abs(Q[coarse] - Qc).max() / 3.0
        if est > quad_tol:
            raise QuadratureUnresolvedError(
                f"estimated quadrature error {est:.2e} exceeds {quad_tol:.1e}"
            )
    values = np.empty((grid.size, r, r), dtype=complex)
    for s in range(grid.size):
        values[s] = _toeplitz_upper(band[s])
    return TransitionMatrix(
        lam=lam, r=r, t0=float(t0), grid=grid, values=values,
        gain_integral=u, band=band, scaled_band=Q,
    )


def jordan_transition_ode(lam: complex, gain_fn, r: int, t0: float, grid) -> np.ndarray:
    """Independent oracle: direct RK4 integration of Xi' = -a(t) J Xi from I."""
    J = np.eye(r, dtype=complex) * lam + np.eye(r, k=1)
    grid = np.asarray(grid, dtype=float)
    dt = np.diff(grid).min()

    def f(t, y):
        return -float(gain_fn(np.asarray(t))) * (J @ y)

    _, states = rk4_path(f, np.eye(r, dtype=complex), t0, grid[-1], dt, record_times=grid)
    return states


@dataclass(frozen=True)
class BoundEntry:
    lam: complex
    r: int
    eps: float
    head_log_max: float       # max log ratio over the first decade of the grid
    tail_log_max: float       # max log ratio over the last decade
    no_growth: bool
    power_form_log_max: float  # sup of log ||Phi|| + mu1 (Re lam - eps) t^(1-beta)/(1-beta)


@dataclass(frozen=True)
class BoundReport:
    entries: tuple[BoundEntry, ...]

    @property
    def all_no_growth(self) -> bool:
        return all(e.no_growth for e in self.entries)

    def lines(self) -> list[str]:
        out = []
        for e in self.entries:
            out.append(
                f"lambda={e.lam:.4g} r={e.r} eps={e.eps:.4g} "
                f"head_log_max={e.head_log_max:.4f} tail_log_max={e.tail_log_max:.4f} "
                f"no_growth={e.no_growth}"
            )
        return out


def transition_bound_check(lam_set, profile, eps: float, grid,
                           growth_slack: float = 1.05,
                           quad_tol: float = 1e-4) -> BoundReport:
    """Finiteness witnesses for the envelope-driven transition-matrix bound.

    For each lambda (optionally (lambda, block size) pairs) the normalized log
    ratio log||Phi|| + (Re(lambda) - eps) int envelope is evaluated on the grid;
    absence of growth is witnessed by tail max <= head max + log(slack).
    All arithmetic stays in log space: the raw ratios under/overflow quickly.
    """
    grid = np.asarray(grid, dtype=float)
    entries = []
    for item in lam_set:
        lam, r = (item if isinstance(item, tuple) else (item, 1))
        lam = complex(lam)
        if lam.real <= 0:
            raise ValueError(f"lambda must have positive real part, got {lam}")
        if not (0.0 < eps < lam.real):
            raise ValueError(f"eps must lie in (0, {lam.real}), got {eps}")
        tm = jordan_transition(lam, profile.envelope, r, float(grid[0]), grid,
                               quad_tol=quad_tol)
        log_ratio = tm.log_norms() + (lam.real - eps) * tm.gain_integral
        head = grid <= grid[0] * 10.0
        tail = grid >= grid[-1] / 10.0
        head_max = float(log_ratio[head].max())
        tail_max = float(log_ratio[tail].max())
        power_log = tm.log_norms() + profile.mu1 * (lam.real - eps) / (1.0 - profile.beta) * (
            grid ** (1.0 - profile.beta)
        )
        entries.append(BoundEntry(
            lam=lam, r=r, eps=float(eps), head_log_max=head_max, tail_log_max=tail_max,
            no_growth=tail_max <= head_max + np.log(growth_slack),
            power_form_log_max=float(power_log.max()),
        ))
    return BoundReport(entries=tuple(entries))


def filter_response(b, drive_times, drive_values, init):
    """Response of the stable filter xi^(n) + b_{n-1} xi^(n-1) + ... + b_0 xi = drive.

    ``b`` lists monic coefficients low to high (b_0, ..., b_{n-1}, 1).  The
    drive is sampled on a uniform grid; midpoint values for the RK4 stages come
    from linear interpolation.  Returns (times, states) where states[:, k] is
    the kth derivative of xi for k = 0..n (the nth from the equation itself).
    """
    b = np.asarray(b, dtype=float)
    try:
        stable = is_hurwitz(b)
    except DegenerateRowError as exc:
        raise NotHurwitzError(str(exc)) from exc
    if not stable:
        raise NotHurwitzError("filter polynomial is not Hurwitz")
    n = b.size - 1
    t = np.asarray(drive_times, dtype=float)
    z = np.asarray(drive_values, dtype=float)
    if t.size != z.size or t.size < 2:
        raise GridMismatchError("drive times and values must match with >= 2 samples")
    dts = np.diff(t)
    dt = dts[0]
    if not np.allclose(dts, dt, rtol=1e-9, atol=1e-12):
        raise GridMismatchError("drive grid must be uniform")
    init = np.asarray(init, dtype=float)
    if init.shape != (n,):
        raise GridMismatchError(f"initial state must have shape ({n},)")

    comp = np.zeros((n, n))
    comp[:-1, 1:] = np.eye(n - 1)
    comp[-1] = -b[:n]
    zmid = 0.5 * (z[:-1] + z[1:])
    states = np.empty((t.size, n))
    states[0] = init
    y = init.copy()
    forc = np.zeros(n)
    forc[-1] = 1.0
    for k in range(t.size - 1):
        k1 = comp @ y + forc * z[k]
        k2 = comp @ (y + 0.5 * dt * k1) + forc * zmid[k]
        k3 = comp @ (y + 0.5 * dt * k2) + forc * zmid[k]
        k4 = comp @ (y + dt * k3) + forc * z[k + 1]
        y = y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        states[k + 1] = y
    top = z - states @ b[:n]
    return t, np.column_stack([states, top])
