"""Shared fixed-step classical Runge-Kutta integration helpers."""

from __future__ import annotations

import numpy as np


def rk4_step(f, t: float, y, dt: float):
    """One classical fourth-order Runge-Kutta step of y' = f(t, y)."""
    k1 = f(t, y)
    k2 = f(t + 0.5 * dt, y + 0.5 * dt * k1)
    k3 = f(t + 0.5 * dt, y + 0.5 * dt * k2)
    k4 = f(t + dt, y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_path(f, y0, t0: float, t_end: float, dt: float, record_times=None):
    """Integrate y' = f(t, y) on a uniform grid, recording at selected times.

    ``record_times`` defaults to every grid point.  Recorded times are snapped
    to the nearest grid point.  Returns (times, states) with states stacked
    along axis 0.
    """
    steps = int(round((t_end - t0) / dt))
    if record_times is None:
        record_idx = np.arange(steps + 1)
    else:
        record_idx = np.asarray(
            [int(round((s - t0) / dt)) for s in np.atleast_1d(record_times)], dtype=int
        )
        if np.any(record_idx < 0) or np.any(record_idx > steps):
            raise ValueError("record time outside integration span")
    wanted = np.zeros(steps + 1, dtype=bool)
    wanted[record_idx] = True
    y = np.array(y0, dtype=complex if np.iscomplexobj(y0) else float)
    out = {}
    if wanted[0]:
        out[0] = y.copy()
    for k in range(steps):
        y = rk4_step(f, t0 + k * dt, y, dt)
        if wanted[k + 1]:
            out[k + 1] = y.copy()
    times = t0 + record_idx * dt
    states = np.stack([out[i] for i in record_idx], axis=0)
    return times, states
