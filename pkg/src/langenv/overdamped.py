"""First-order (overdamped) dynamics, averaging, and inertial-gap measures.

The overdamped system q' = b/lam + sqrt(eps) (sigma/lam) w' shares the
environment kernels with the second-order integrator and can consume the
node-level w-increments recorded by a second-order run, which puts both
systems on one probability space for pathwise comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .environment import (FastDiffusion, MarkovSwitching,
                          diffusion_substeps, initial_env_state,
                          stationary_measure)
from .errors import BadInterval, BlowUp, GridMismatch, UnsupportedEnvironment
from .grid import TimeGrid
from .integrate import TrajectoryBundle, _advance_env, _markov_labels_for_substeps
from .model import ValidatedModel
from .streams import (LANE_ENV, LANE_NOISE, NoiseStream,
                      batch_standard_normals, correlation_factor,
                      spawn_stream)


@dataclass
class Path:
    """Vector path sampled at grid nodes."""

    grid: TimeGrid
    values: np.ndarray  # (n_steps + 1, d)

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if self.values.shape[0] != self.grid.n_steps + 1:
            raise GridMismatch(
                f"{self.values.shape[0]} values on a grid with "
                f"{self.grid.n_steps + 1} nodes")

    def sup_distance(self, other: "Path") -> float:
        if self.grid != other.grid:
            raise GridMismatch("paths live on different grids")
        return float(np.max(np.linalg.norm(self.values - other.values, axis=1)))


def _fast_eligible(model: ValidatedModel) -> bool:
    fam = model.family
    return (fam is not None and model.d == 1 and model.m == 1
            and isinstance(model.environment, MarkovSwitching)
            and fam.env_coupling is None)


def _simulate_one(model: ValidatedModel, eps, grid, stream, shared_w):
    """Per-replica overdamped Euler loop for opaque callables.

    Returns (Q, env_path, W) node arrays.
    """
    coeff = model.coefficients
    d, m = model.d, model.m
    K = grid.n_steps
    dt = grid.dt
    noise = stream.child(LANE_NOISE)
    env_stream = stream.child(LANE_ENV)
    env_spec = model.environment
    correlated = (isinstance(env_spec, FastDiffusion)
                  and np.any(env_spec.sigma_corr != 0.0))
    fac = (correlation_factor(m, env_spec.n, env_spec.sigma_corr)
           if correlated else None)
    q = model.spec.x0.astype(float).copy()
    env_state = initial_env_state(env_spec)
    Q = np.empty((K + 1, d))
    Q[0] = q
    W = np.zeros((K + 1, m))
    env_disc = not isinstance(env_spec, FastDiffusion)
    env_path = (np.empty(K + 1, dtype=np.int64) if env_disc
                else np.empty((K + 1, env_spec.l)))
    env_path[0] = env_state.value
    sq_eps = math.sqrt(eps)
    for k in range(K):
        t = grid.node(k)
        n_sub = diffusion_substeps(eps, dt) if correlated else 1
        h = dt / n_sub
        w_inc = np.zeros(m)
        for j in range(n_sub):
            tj = t + j * h
            b = np.asarray(coeff.drift(tj, q, env_state.value), float)
            lam = coeff.friction(tj, q, eps)
            sig = np.atleast_2d(np.asarray(coeff.diffusion(tj, q, eps), float))
            if shared_w is not None:
                dw = np.asarray(shared_w[k], float)
                corr_tilde = None
            elif correlated:
                z = noise.standard_normal(m + env_spec.n)
                dw = math.sqrt(h) * z[:m]
                corr_tilde = (math.sqrt(h) * (env_spec.sigma_corr.T @ z[:m]
                                              + fac @ z[m:])).reshape(1, -1)
            else:
                dw = math.sqrt(h) * noise.standard_normal(m)
                corr_tilde = None
            q_new = q + (b / lam) * h + sq_eps * (sig @ dw) / lam
            env_state = _advance_env(env_spec, env_state, q, tj, eps, h,
                                     env_stream, corr_tilde)
            q = q_new
            w_inc += dw
            if np.any(np.abs(q) > 1e10):
                raise BlowUp("overdamped state exceeded 1e10")
        Q[k + 1] = q
        W[k + 1] = W[k] + w_inc
        env_path[k + 1] = env_state.value
    return Q, env_path, W


def simulate_overdamped(model: ValidatedModel, eps: float, grid: TimeGrid,
                        stream: NoiseStream,
                        shared_w: np.ndarray | None = None) -> Path:
    """One overdamped realization at grid nodes.

    ``shared_w`` holds (n_steps, m) node increments recorded by a
    second-order run; the environment is re-simulated from this replica's
    environment lane, so a shared-stream pair of runs sees the identical
    environment realization.
    """
    if eps <= 0.0:
        raise BadInterval("eps must be positive")
    if _fast_eligible(model):
        shared = None if shared_w is None else shared_w[None, :, 0]
        Q = _simulate_fast(model, eps, grid, stream.master_seed,
                           stream.replica_id, 1, shared)
        return Path(grid=grid, values=Q[0][:, None])
    Q, _, _ = _simulate_one(model, eps, grid, stream, shared_w)
    return Path(grid=grid, values=Q)


def simulate_overdamped_bundle(model: ValidatedModel, eps: float,
                               grid: TimeGrid, stream: NoiseStream,
                               shared_w: np.ndarray | None = None
                               ) -> TrajectoryBundle:
    """Overdamped realization packaged with its environment and w paths.

    Used by the CSV dump (trajectory format minus momentum columns); the
    momentum slot is zero-filled and never written.
    """
    if eps <= 0.0:
        raise BadInterval("eps must be positive")
    if _fast_eligible(model):
        # Re-derive env nodes and w path alongside the kernel run.
        shared = None if shared_w is None else shared_w[None, :, 0]
        Q = _simulate_fast(model, eps, grid, stream.master_seed,
                           stream.replica_id, 1, shared)[0][:, None]
        env_spec = model.environment
        if env_spec.n_states > 1:
            _, env_nodes = _markov_labels_for_substeps(
                env_spec, eps, grid, 1, stream.child(LANE_ENV))
        else:
            env_nodes = np.zeros(grid.n_steps + 1, dtype=np.int64)
        if shared_w is None:
            dW = np.empty((1, grid.n_steps))
            batch_standard_normals(stream.master_seed, stream.replica_id,
                                   LANE_NOISE, dW)
            dW *= math.sqrt(grid.dt)
            W = np.concatenate(([0.0], np.cumsum(dW[0])))[:, None]
        else:
            W = np.concatenate((np.zeros((1, model.m)),
                                np.cumsum(shared_w, axis=0)))
        return TrajectoryBundle(grid=grid, eps=eps, X=Q,
                                p=np.zeros_like(Q), env=env_nodes, w=W)
    Q, env_path, W = _simulate_one(model, eps, grid, stream, shared_w)
    return TrajectoryBundle(grid=grid, eps=eps, X=Q, p=np.zeros_like(Q),
                            env=env_path, w=W)


def _simulate_fast(model: ValidatedModel, eps, grid, master_seed, replica_lo,
                   n_replicas, shared_dW):
    """Batched scalar overdamped kernel; shared_dW is (R, K) or None."""
    fam = model.family
    K = grid.n_steps
    env_spec = model.environment
    R = n_replicas
    if shared_dW is None:
        dW = np.empty((R, K))
        batch_standard_normals(master_seed, replica_lo, LANE_NOISE, dW)
        dW *= math.sqrt(grid.dt)
    else:
        dW = np.ascontiguousarray(shared_dW, dtype=float)
    if env_spec.n_states > 1:
        labels = np.empty((R, K), dtype=np.int64)
        for r in range(R):
            env_stream = spawn_stream(master_seed,
                                      replica_lo + r).child(LANE_ENV)
            sub, _ = _markov_labels_for_substeps(env_spec, eps, grid, 1,
                                                 env_stream)
            labels[r] = sub
    else:
        labels = None
    lin_a = float(fam.lin_a[0, 0]) if fam.lin_a is not None else 0.0
    noise_coef = math.sqrt(eps) * fam.sig / fam.lam
    bvals = np.ascontiguousarray(fam.b_states[:, 0])
    Q = kernels.overdamped_batch(float(model.spec.x0[0]), bvals, lin_a,
                                 fam.height, fam.lam, noise_coef, grid.dt,
                                 K, dW, labels)
    if not np.isfinite(Q[:, -1]).all():
        raise BlowUp("non-finite overdamped state in batch simulation")
    return Q


def simulate_overdamped_paths(model: ValidatedModel, eps: float,
                              grid: TimeGrid, master_seed: int,
                              replica_lo: int, replica_hi: int,
                              shared_dW: np.ndarray | None = None) -> np.ndarray:
    """Stacked overdamped node paths (R, K+1, d) for a replica range."""
    if _fast_eligible(model):
        sh = None if shared_dW is None else shared_dW[:, :, 0]
        return _simulate_fast(model, eps, grid, master_seed, replica_lo,
                              replica_hi - replica_lo, sh)[:, :, None]
    out = []
    for i, r in enumerate(range(replica_lo, replica_hi)):
        sh = None if shared_dW is None else shared_dW[i]
        Q, _, _ = _simulate_one(model, eps, grid,
                                spawn_stream(master_seed, r), sh)
        out.append(Q)
    return np.stack(out)


# ---------------------------------------------------------------------------
# Averaging
# ---------------------------------------------------------------------------

def lambda0(model: ValidatedModel, t: float, x: np.ndarray) -> float:
    """Friction of the eps -> 0 member of the coefficient family."""
    return float(model.coefficients.friction(t, x, 0.0))


def averaged_drift(model: ValidatedModel, t: float, x: np.ndarray) -> np.ndarray:
    """Drift integrated against the frozen-state stationary measure."""
    env = model.environment
    if isinstance(env, FastDiffusion):
        raise UnsupportedEnvironment(
            "averaged drift needs a discrete environment")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    pi = stationary_measure(env, x=x).weights
    out = np.zeros(model.d)
    for y, w in enumerate(pi):
        out += w * np.asarray(model.coefficients.drift(t, x, y), float)
    return out


def solve_averaged_ode(model: ValidatedModel, grid: TimeGrid) -> Path:
    """Classical RK4 solve of phi' = bbar(t, phi) / lam0(t, phi)."""

    def rhs(t, x):
        return averaged_drift(model, t, x) / lambda0(model, t, x)

    dt = grid.dt
    x = model.spec.x0.astype(float).copy()
    values = np.empty((grid.n_steps + 1, model.d))
    values[0] = x
    for k in range(grid.n_steps):
        t = grid.node(k)
        k1 = rhs(t, x)
        k2 = rhs(t + dt / 2.0, x + dt / 2.0 * k1)
        k3 = rhs(t + dt / 2.0, x + dt / 2.0 * k2)
        k4 = rhs(t + dt, x + dt * k3)
        x = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        values[k + 1] = x
    return Path(grid=grid, values=values)


def sk_distance(bundle: TrajectoryBundle, q: Path) -> float:
    """Sup over nodes of |X_t - q_t| for a shared-noise pair of runs."""
    if bundle.grid != q.grid:
        raise GridMismatch("trajectory and overdamped path grids differ")
    return float(np.max(np.linalg.norm(bundle.X - q.values, axis=1)))
