"""Euler-Maruyama simulation of the noisy consensus closed loop.

Two simulators share one noise-increment convention:

* ``simulate_full`` integrates every agent's state under the relative-state
  protocol with per-edge measurement noise.  In the leader-following case the
  leader is autonomous and noise-free, so its linear dynamics are advanced with
  the exact matrix-exponential propagator; followers take Euler-Maruyama steps.
* ``simulate_reduced`` integrates the N-dimensional filtered error
  Xhat = (I (x) K2)(X_F - 1 (x) x0), whose drift is -Gains(t) L2 Xhat.

Both consume Brownian increments from the same counter-based Philox stream in
the same canonical order (step-major, then edges sorted row-major, then state
component), so a shared (scenario, seed) pair yields pathwise-consistent noise.
Additive noise makes plain Euler-Maruyama strong order 1.0; nothing higher is
warranted at desk scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .topology import laplacian

BLOCK_STEPS = 512


class SimulationError(RuntimeError):
    pass


class StepTooLargeError(SimulationError):
    pass


class NonFiniteError(SimulationError):
    pass


@dataclass(frozen=True)
class NoiseModel:
    """Per-edge diagonal noise intensities; edges mirror the digraph."""

    edges: tuple[tuple[int, int], ...]  # (receiver, sender), row-major order
    rho: np.ndarray                     # (E, n) diagonal intensity entries

    def __post_init__(self):
        if not np.all(np.isfinite(self.rho)):
            raise ValueError("noise intensities must be finite")
        if self.rho.shape[0] != len(self.edges):
            raise ValueError("one intensity row required per edge")


def uniform_noise(graph, n: int, rho: float) -> NoiseModel:
    """Same scalar intensity on every component of every existing edge."""
    edges = tuple(graph.edges())
    arr = np.full((len(edges), n), float(rho))
    arr.setflags(write=False)
    return NoiseModel(edges=edges, rho=arr)


@dataclass(frozen=True)
class Trajectory:
    """Sampled path of one simulation run with its reproduction fingerprint."""

    times: np.ndarray    # (S,), uniform subgrid of the integration grid
    states: np.ndarray   # full: (S, N+1, n); reduced: (S, N)
    dt: float
    seed: int
    scenario_hash: str
    kind: str            # "full" | "reduced"


def _noise_rng(seed: int) -> np.random.Generator:
    # Philox is counter-based: the stream is a pure function of the key, so
    # identical (scenario, seed) pairs replay bit-identically anywhere.
    return np.random.Generator(np.random.Philox(key=np.uint64(seed)))


def _record_indices(scen, record_times) -> np.ndarray:
    steps = scen.steps
    if record_times is None:
        record_times = scen.sample_times
    idx = np.asarray([int(round(s / scen.dt)) for s in np.atleast_1d(record_times)], dtype=int)
    if np.any(idx < 0) or np.any(idx > steps):
        raise ValueError("sample time outside the integration span")
    return idx


class _ClosedLoop:
    """Precomputed constant matrices for one scenario."""

    def __init__(self, scen):
        plant = scen.plant
        n = plant.n
        self.n = n
        self.dt = scen.dt
        self.steps = scen.steps
        K2 = plant.K2[0]
        BK2 = plant.B @ plant.K2
        m0 = plant.closed_loop_A

        if scen.leaderless:
            self.sim_nodes = list(range(scen.graph.node_count))
        else:
            self.sim_nodes = scen.graph.follower_indices
        self.M = len(self.sim_nodes)
        pos = {node: p for p, node in enumerate(self.sim_nodes)}

        L = laplacian(scen.graph.weights)
        Lsub = L[np.ix_(self.sim_nodes, self.sim_nodes)]
        self.Lsub = Lsub
        self.M0 = np.kron(np.eye(self.M), m0)
        stack = np.empty((self.M, self.M * n, self.M * n))
        for p in range(self.M):
            E = np.zeros((self.M, self.M))
            E[p] = Lsub[p]
            stack[p] = np.kron(E, BK2)
        self.Nstack = stack

        # Noise routing: one n-dimensional channel per directed edge into a
        # simulated node; the K2 row and the edge weight fold into a constant
        # projection vector per channel.
        edges = [(i, j) for (i, j) in scen.noise.edges if i in pos]
        self.edges = edges
        self.E = len(edges)
        self.ke = np.empty((self.E, n))
        self.Winc = np.zeros((self.M, self.E))
        for e, (i, j) in enumerate(edges):
            row = list(scen.noise.edges).index((i, j))
            self.ke[e] = scen.graph.weights[i, j] * K2 * scen.noise.rho[row]
            self.Winc[pos[i], e] = 1.0

        # Per-step gains of the simulated agents, steps+1 rows.
        tgrid = np.arange(self.steps + 1) * self.dt
        self.gains = np.column_stack(
            [scen.gain_of(node)(tgrid) for node in self.sim_nodes]
        )

        self.last_cols = np.array([p * n + (n - 1) for p in range(self.M)])

        if scen.leaderless:
            self.x0_path = None
            self.forcing = None
        else:
            lead = scen.graph.leader_index
            prop = expm(m0 * self.dt)
            x0 = np.empty((self.steps + 1, n))
            x0[0] = scen.init_states[lead]
            for k in range(self.steps):
                x0[k + 1] = prop @ x0[k]
            self.x0_path = x0
            L1col = L[self.sim_nodes, lead]
            w0 = x0 @ K2
            # Drift term -a_i(t) L1_i K2 x0(t) entering each follower's last component.
            self.forcing = -(self.gains * L1col[None, :]) * w0[:, None]

        self.X0 = scen.init_states[self.sim_nodes].reshape(-1)
        drift0 = self.M0 - np.tensordot(self.gains[0], stack, axes=(0, 0))
        if self.dt * np.linalg.norm(drift0, 2) > 1.0:
            raise StepTooLargeError(
                f"dt = {self.dt} violates the drift stability heuristic at t = 0"
            )


def _run_full(scen, seed: int, trials: int, record_idx: np.ndarray,
              noise_increments: np.ndarray | None = None) -> np.ndarray:
    """Batched Euler-Maruyama paths; returns (trials, S, node_count, n)."""
    cl = _ClosedLoop(scen)
    n, M, E = cl.n, cl.M, cl.E
    dt = cl.dt
    sqrt_dt = np.sqrt(dt)
    rng = _noise_rng(seed)
    wanted = np.full(cl.steps + 1, -1, dtype=int)
    for s_i, g_i in enumerate(record_idx):
        wanted[g_i] = s_i
    out = np.empty((trials, record_idx.size, scen.graph.node_count, n))

    X = np.tile(cl.X0, (trials, 1))

    def store(global_k):
        s_i = wanted[global_k]
        if s_i < 0:
            return
        out[:, s_i, cl.sim_nodes, :] = X.reshape(trials, M, n)
        if cl.x0_path is not None:
            out[:, s_i, scen.graph.leader_index, :] = cl.x0_path[global_k]

    store(0)
    for k0 in range(0, cl.steps, BLOCK_STEPS):
        k1 = min(k0 + BLOCK_STEPS, cl.steps)
        nb = k1 - k0
        a_b = cl.gains[k0:k1]
        Fb = cl.M0[None] - np.tensordot(a_b, cl.Nstack, axes=(1, 0))
        if E:
            if noise_increments is None:
                dW = rng.normal(0.0, sqrt_dt, size=(trials, nb, E, n))
            else:
                dW = noise_increments[:, k0:k1]
            s = np.einsum("tbeh,eh->tbe", dW, cl.ke)
            nv = np.einsum("tbe,ie->tbi", s, cl.Winc) * a_b[None]
        else:
            nv = np.zeros((trials, nb, M))
        fb = cl.forcing[k0:k1] if cl.forcing is not None else None
        for k in range(nb):
            X = X + dt * (X @ Fb[k].T)
            incr = nv[:, k, :] if fb is None else dt * fb[k] + nv[:, k, :]
            X[:, cl.last_cols] += incr
            store(k0 + k + 1)
        if not np.all(np.isfinite(X)):
            raise NonFiniteError(f"state overflowed near t = {k1 * dt:.6g}")
    return out


def _run_reduced(scen, seed: int, trials: int, record_idx: np.ndarray) -> np.ndarray:
    """Batched paths of the filtered error dynamics; returns (trials, S, N)."""
    if scen.leaderless:
        raise SimulationError("the reduced error dynamics require a leader")
    cl = _ClosedLoop(scen)
    n, M, E = cl.n, cl.M, cl.E
    dt = cl.dt
    sqrt_dt = np.sqrt(dt)
    rng = _noise_rng(seed)
    wanted = np.full(cl.steps + 1, -1, dtype=int)
    for s_i, g_i in enumerate(record_idx):
        wanted[g_i] = s_i
    out = np.empty((trials, record_idx.size, M))

    K2 = scen.plant.K2[0]
    err0 = scen.init_states[cl.sim_nodes] - scen.init_states[scen.graph.leader_index]
    Xh = np.tile(err0 @ K2, (trials, 1))
    if wanted[0] >= 0:
        out[:, wanted[0], :] = Xh
    L2T = cl.Lsub.T
    for k0 in range(0, cl.steps, BLOCK_STEPS):
        k1 = min(k0 + BLOCK_STEPS, cl.steps)
        nb = k1 - k0
        a_b = cl.gains[k0:k1]
        if E:
            dW = rng.normal(0.0, sqrt_dt, size=(trials, nb, E, n))
            s = np.einsum("tbeh,eh->tbe", dW, cl.ke)
            nv = np.einsum("tbe,ie->tbi", s, cl.Winc) * a_b[None]
        else:
            nv = np.zeros((trials, nb, M))
        for k in range(nb):
            Xh = Xh - dt * (a_b[k] * (Xh @ L2T)) + nv[:, k, :]
            s_i = wanted[k0 + k + 1]
            if s_i >= 0:
                out[:, s_i, :] = Xh
        if not np.all(np.isfinite(Xh)):
            raise NonFiniteError(f"state overflowed near t = {k1 * dt:.6g}")
    return out


def simulate_full(scen, seed: int, record_times=None) -> Trajectory:
    """One full-system path, sampled at ``record_times`` (default scenario grid)."""
    record_idx = _record_indices(scen, record_times)
    states = _run_full(scen, seed, 1, record_idx)[0]
    return Trajectory(
        times=record_idx * scen.dt, states=states, dt=scen.dt, seed=seed,
        scenario_hash=scen.fingerprint, kind="full",
    )


def simulate_reduced(scen, seed: int, record_times=None) -> Trajectory:
    """One path of the reduced error dynamics, noise-consistent with simulate_full."""
    record_idx = _record_indices(scen, record_times)
    states = _run_reduced(scen, seed, 1, record_idx)[0]
    return Trajectory(
        times=record_idx * scen.dt, states=states, dt=scen.dt, seed=seed,
        scenario_hash=scen.fingerprint, kind="reduced",
    )


def trajectory_to_csv(traj: Trajectory, path) -> None:
    """CSV export with one row per sample per state component."""
    with open(path, "w") as fh:
        fh.write("t,node,component,value\n")
        states = traj.states
        if states.ndim == 2:  # reduced: one scalar per follower
            states = states[:, :, None]
        for s_i, t in enumerate(traj.times):
            for node in range(states.shape[1]):
                for comp in range(states.shape[2]):
                    fh.write(f"{t:.17g},{node},{comp},{states[s_i, node, comp]:.17g}\n")
