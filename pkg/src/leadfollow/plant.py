"""Canonical-form agent dynamics and the consensus controller vectors.

Every agent shares the single-input companion-form plant

    x' = A x + B u,      A = companion(alpha),  B = e_n,

and the controller splits into a local part K1 = (-alpha_1, -alpha_2 - b_1, ...,
-alpha_n - b_{n-1}) and a relative part K2 = (b_1, ..., b_{n-1}, 1).  Two
algebraic identities make the whole analysis work: K2 (A + B K1) = 0 and
K2 B K2 = K2; both are checked at construction time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .integrate import rk4_path
from .matrices import DegenerateRowError, is_hurwitz

IDENTITY_TOL = 1e-12


class PlantError(ValueError):
    pass


class DimensionMismatchError(PlantError):
    pass


class NotHurwitzError(PlantError):
    pass


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PlantModel:
    n: int
    alpha: np.ndarray        # (n,)
    b: np.ndarray            # (n-1,)
    A: np.ndarray            # (n, n) companion form
    B: np.ndarray            # (n, 1)
    K1: np.ndarray           # (1, n)
    K2: np.ndarray           # (1, n)

    @property
    def closed_loop_A(self) -> np.ndarray:
        """A + B K1, the leader's autonomous dynamics matrix."""
        return self.A + self.B @ self.K1

    def stabilizer_poly(self) -> np.ndarray:
        """Monic coefficients (low to high) of s^{n-1} + b_{n-1} s^{n-2} + ... + b_1."""
        return np.concatenate([self.b, [1.0]])


def build_plant(alpha, b) -> PlantModel:
    """Assemble the companion plant and controller vectors, checking stability.

    The design vector b must make s^{n-1} + b_{n-1} s^{n-2} + ... + b_1 Hurwitz;
    otherwise NotHurwitzError is raised.
    """
    alpha = np.asarray(alpha, dtype=float)
    b = np.asarray(b, dtype=float)
    n = alpha.size
    if n < 2:
        raise DimensionMismatchError(f"state dimension must be >= 2, got {n}")
    if b.size != n - 1:
        raise DimensionMismatchError(f"expected {n - 1} design parameters, got {b.size}")
    poly = np.concatenate([b, [1.0]])
    try:
        stable = is_hurwitz(poly)
    except DegenerateRowError as exc:
        raise NotHurwitzError(f"marginally stable design polynomial: {exc}") from exc
    if not stable:
        raise NotHurwitzError("design polynomial has a root with nonnegative real part")

    A = np.zeros((n, n))
    A[:-1, 1:] = np.eye(n - 1)
    A[-1, :] = alpha
    B = np.zeros((n, 1))
    B[-1, 0] = 1.0
    K1 = np.zeros((1, n))
    K1[0, 0] = -alpha[0]
    K1[0, 1:] = -alpha[1:] - b
    K2 = np.concatenate([b, [1.0]]).reshape(1, n)

    resid1 = np.abs(K2 @ (A + B @ K1)).max()
    resid2 = np.abs(K2 @ B @ K2 - K2).max()
    if resid1 > IDENTITY_TOL or resid2 > IDENTITY_TOL:
        raise PlantError(
            f"controller identities violated: |K2(A+BK1)|={resid1:.3e}, |K2BK2-K2|={resid2:.3e}"
        )
    return PlantModel(
        n=n, alpha=_frozen(alpha), b=_frozen(b), A=_frozen(A), B=_frozen(B),
        K1=_frozen(K1), K2=_frozen(K2),
    )


def leader_closed_loop(plant: PlantModel, x0_init, t_end: float, dt: float = 1e-3):
    """Integrate the leader's autonomous closed loop x0' = (A + B K1) x0.

    Returns (times, trajectory, limit_vector).  The limit is reported as the
    integrated endpoint with components 2..n zeroed out when they have decayed,
    reflecting the (v, 0, ..., 0) structure of the stationary state.
    """
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    m = plant.closed_loop_A
    x0 = np.asarray(x0_init, dtype=float)
    if x0.shape != (plant.n,):
        raise DimensionMismatchError(f"initial state must have shape ({plant.n},)")
    times, traj = rk4_path(lambda t, y: m @ y, x0, 0.0, t_end, dt)
    limit = np.zeros(plant.n)
    limit[0] = traj[-1, 0]
    return times, traj, limit
