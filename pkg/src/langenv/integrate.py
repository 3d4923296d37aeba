"""Second-order (inertial) integrators and path diagnostics.

Two schemes integrate the momentum system

    dX = p dt,
    eps^2 dp = (b(t, X, xi) - lam(t, X) p) dt + sqrt(eps) sigma(t, X) dw:

* ``euler``: substepped Euler-Maruyama with h proportional to eps^2 / lam,
  the trusted-but-slow oracle;
* ``exponential``: a variation-of-parameters integrator that freezes the
  coefficients at each substep's left endpoint and applies the exact
  Ornstein-Uhlenbeck update, with h proportional to eps.  For constant
  coefficients it is exact at every node, which is what makes it usable at
  the 1/eps^2 stiffness the model lives at.

The exponential substep samples the triple (dw, xi_X, xi_p) jointly, where
xi_X and xi_p are the exact stochastic displacements of position and
momentum.  Including dw in the triple is what lets the recorded node-level
w-path drive the overdamped comparison system on the same probability space.

Diagnostics along a trajectory use the friction integral
A(t) = eps^-2 int_0^t lam and the stochastic convolution
H(t) = sqrt(eps) e^{-A(t)} int_0^t e^{A(s)} sigma dw.  H is evaluated by a
forward recursion on exp(-dA) increments; forming exp(A) itself would
overflow at A ~ kappa0/eps^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from . import kernels
from .environment import (EnvState, FastDiffusion, MarkovSwitching,
                          StateDependentJump, diffusion_substeps,
                          env_step_diffusion, env_step_jump, env_step_markov,
                          initial_env_state, labels_at, simulate_markov_path)
from .errors import (BadInterval, BlowUp, MissingDiagnostics, StepTooCoarse)
from .grid import TimeGrid
from .model import ValidatedModel
from .streams import (LANE_ENV, LANE_NOISE, NoiseStream,
                      batch_standard_normals, correlation_factor,
                      spawn_stream)

Scheme = Literal["euler", "exponential"]


@dataclass(frozen=True)
class SchemeConfig:
    """Integrator selection: scheme, substep refinement, diagnostics flag."""

    scheme: Scheme = "exponential"
    substep_factor: float = 0.5
    record_diagnostics: bool = False

    def __post_init__(self):
        if not 0.0 < self.substep_factor <= 1.0:
            raise ValueError("substep_factor must lie in (0, 1]")
        if self.scheme not in ("euler", "exponential"):
            raise ValueError(f"unknown scheme {self.scheme!r}")


@dataclass
class Diagnostics:
    """Recorded A, H and the five remainder components at grid nodes."""

    A_eps: np.ndarray            # (K+1,)
    H_eps: np.ndarray            # (K+1, d)
    R_components: np.ndarray     # (5, K+1, d)

    @property
    def R_total(self) -> np.ndarray:
        return self.R_components.sum(axis=0)


@dataclass
class TrajectoryBundle:
    """One realization at grid nodes: state, momentum, environment, noise."""

    grid: TimeGrid
    eps: float
    X: np.ndarray                # (K+1, d)
    p: np.ndarray                # (K+1, d)
    env: np.ndarray              # (K+1,) labels or (K+1, l) vectors
    w: np.ndarray                # (K+1, m) cumulative Brownian path, w[0] = 0
    diagnostics: Diagnostics | None = None


# ---------------------------------------------------------------------------
# Exact frozen-coefficient OU step moments
# ---------------------------------------------------------------------------

def _ou_scalars(a: float):
    """Integral building blocks of the frozen OU kernel, exponent a = lam h / eps^2.

    Returns (one_m_E1, one_m_E2, amE1, g2, f3) where amE1 = a - (1 - e^-a),
    g2 = int_0^a e^-u (1 - e^-u) du and f3 = int_0^a (1 - e^-u)^2 du,
    series-evaluated below a = 0.01 to dodge cancellation.
    """
    one_m_E1 = -math.expm1(-a)
    one_m_E2 = -math.expm1(-2.0 * a)
    if a < 0.01:
        a2, a3, a4, a5 = a * a, a ** 3, a ** 4, a ** 5
        amE1 = a2 / 2.0 - a3 / 6.0 + a4 / 24.0 - a5 / 120.0
        g2 = a2 / 2.0 - a3 / 2.0 + 7.0 * a4 / 24.0 - a5 / 8.0
        f3 = a3 / 3.0 - a4 / 4.0 + 7.0 * a5 / 60.0 - a ** 6 / 24.0
    else:
        amE1 = a - one_m_E1
        g2 = one_m_E1 - one_m_E2 / 2.0
        f3 = a - 2.0 * one_m_E1 + one_m_E2 / 2.0
    return one_m_E1, one_m_E2, amE1, g2, f3


def exponential_step_moments(lam: float, sigma: np.ndarray, eps: float,
                             h: float):
    """Exact one-substep moments of the frozen-coefficient OU update.

    Returns ``(decay, mean_x, M)`` where ``decay = exp(-lam h / eps^2)``,
    ``mean_x = (eps^2 / lam)(1 - decay)`` is the coefficient of the starting
    momentum in the position mean, and M is the (m + 2d) x (m + 2d)
    covariance of the stacked Gaussian [dw, xi_X, xi_p].
    """
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    d, m = sigma.shape
    kappa = lam / eps ** 2
    a = kappa * h
    one_m_E1, one_m_E2, amE1, g2, f3 = _ou_scalars(a)
    decay = math.exp(-a)
    mean_x = one_m_E1 / kappa
    c = math.sqrt(eps) / eps ** 2
    i_pw = one_m_E1 / kappa
    i_pp = one_m_E2 / (2.0 * kappa)
    i_xw = amE1 / kappa ** 2
    i_xp = g2 / kappa ** 2
    i_xx = f3 / kappa ** 3
    ssT = sigma @ sigma.T
    n_tot = m + 2 * d
    M = np.zeros((n_tot, n_tot))
    M[:m, :m] = h * np.eye(m)
    M[:m, m:m + d] = c * i_xw * sigma.T
    M[:m, m + d:] = c * i_pw * sigma.T
    M[m:m + d, :m] = c * i_xw * sigma
    M[m + d:, :m] = c * i_pw * sigma
    M[m:m + d, m:m + d] = c * c * i_xx * ssT
    M[m:m + d, m + d:] = c * c * i_xp * ssT
    M[m + d:, m:m + d] = c * c * i_xp * ssT
    M[m + d:, m + d:] = c * c * i_pp * ssT
    return decay, mean_x, M


def _psd_factor(M: np.ndarray) -> np.ndarray:
    """Factor L with L L^T = M for a PSD (possibly singular) covariance."""
    try:
        return np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(M)
        vals = np.clip(vals, 0.0, None)
        return vecs @ np.diag(np.sqrt(vals))


def exponential_step_factor(lam: float, sigma, eps: float, h: float):
    """(decay, mean_x, L) with L the factor of the joint triple covariance."""
    decay, mean_x, M = exponential_step_moments(lam, sigma, eps, h)
    return decay, mean_x, _psd_factor(M)


def n_substeps(scheme: Scheme, substep_factor: float, eps: float, dt: float,
               lam_max: float) -> int:
    """Substeps per grid step; euler tiles h ~ eps^2/lam, exponential h ~ eps."""
    if scheme == "euler":
        target = substep_factor * eps ** 2 / max(lam_max, 1e-300)
    else:
        target = substep_factor * eps
    if target <= 0.0:
        raise StepTooCoarse("substep target must be positive")
    return max(1, int(math.ceil(dt / target - 1e-12)))


# ---------------------------------------------------------------------------
# Environment advance over one substep (slow state frozen)
# ---------------------------------------------------------------------------

def _advance_env(env_spec, state: EnvState, x, t, eps, h,
                 env_stream: NoiseStream, corr_tilde=None):
    if isinstance(env_spec, MarkovSwitching):
        return env_step_markov(state, env_spec.Q, eps, h, env_stream)
    if isinstance(env_spec, StateDependentJump):
        return env_step_jump(state, env_spec, x, eps, h, env_stream)
    n_env = diffusion_substeps(eps, h)
    if corr_tilde is not None:
        inc = corr_tilde
    else:
        inc = math.sqrt(h / n_env) * env_stream.standard_normal((n_env, env_spec.n))
    return env_step_diffusion(state, env_spec, x, t, eps, h, inc)


def _env_is_correlated(env_spec) -> bool:
    return (isinstance(env_spec, FastDiffusion)
            and env_spec.sigma_corr.size > 0
            and np.any(env_spec.sigma_corr != 0.0))


# ---------------------------------------------------------------------------
# Single public steps (draw their own noise from the replica stream)
# ---------------------------------------------------------------------------

def step_euler(x, p, env_state: EnvState, t: float, dt: float, eps: float,
               model: ValidatedModel, stream: NoiseStream,
               substep_factor: float = 0.5):
    """One Euler-Maruyama grid step of size dt, internally substepped."""
    cfg = SchemeConfig(scheme="euler", substep_factor=substep_factor)
    x, p, env_state, _ = _generic_step(
        np.asarray(x, float), np.asarray(p, float), env_state, t, dt, eps,
        model, cfg, stream.child(LANE_NOISE), stream.child(LANE_ENV))
    return x, p, env_state


def step_exponential(x, p, env_state: EnvState, t: float, dt: float,
                     eps: float, model: ValidatedModel, stream: NoiseStream,
                     substep_factor: float = 0.5):
    """One exact-OU (frozen coefficient) grid step of size dt."""
    cfg = SchemeConfig(scheme="exponential", substep_factor=substep_factor)
    x, p, env_state, _ = _generic_step(
        np.asarray(x, float), np.asarray(p, float), env_state, t, dt, eps,
        model, cfg, stream.child(LANE_NOISE), stream.child(LANE_ENV))
    return x, p, env_state


def _generic_step(x, p, env_state, t, dt, eps, model, cfg,
                  noise: NoiseStream, env_stream: NoiseStream,
                  given_dw=None):
    """Advance one grid step; returns (x, p, env_state, node w increment)."""
    coeff = model.coefficients
    d, m = model.d, model.m
    env_spec = model.environment
    n_sub = n_substeps(cfg.scheme, cfg.substep_factor, eps, dt, model.lam_max)
    correlated = _env_is_correlated(env_spec)
    if correlated and cfg.scheme == "exponential":
        raise StepTooCoarse(
            "exponential scheme does not support a correlated fast-diffusion "
            "environment; use the euler scheme")
    if correlated:
        # Keep one correlated (w, w~) draw per substep: force h <= eps/10.
        n_env_target = diffusion_substeps(eps, dt / n_sub)
        n_sub *= n_env_target
        fac = correlation_factor(m, env_spec.n, env_spec.sigma_corr)
    if given_dw is not None and n_sub != 1:
        raise StepTooCoarse("shared node increments need substeps to tile "
                            "the grid step exactly (h = dt)")
    h = dt / n_sub
    w_inc = np.zeros(m)
    if cfg.scheme == "euler":
        sq_h = math.sqrt(h)
        amp = math.sqrt(eps) / eps ** 2
        for j in range(n_sub):
            tj = t + j * h
            b = np.asarray(coeff.drift(tj, x, env_state.value), float)
            lam = coeff.friction(tj, x, eps)
            sig = np.atleast_2d(np.asarray(coeff.diffusion(tj, x, eps), float))
            if given_dw is not None:
                dw = np.asarray(given_dw, float)
                corr_tilde = None
            elif correlated:
                z = noise.standard_normal(m + env_spec.n)
                dw = sq_h * z[:m]
                corr_tilde = (sq_h * (env_spec.sigma_corr.T @ z[:m]
                                      + fac @ z[m:])).reshape(1, env_spec.n)
            else:
                dw = sq_h * noise.standard_normal(m)
                corr_tilde = None
            x_new = x + p * h
            p = p + (b - lam * p) * (h / eps ** 2) + amp * (sig @ dw)
            env_state = _advance_env(env_spec, env_state, x, tj, eps, h,
                                     env_stream, corr_tilde)
            x = x_new
            w_inc += dw
            if np.any(np.abs(p) > 1e10):
                raise BlowUp("momentum exceeded 1e10; euler substep unstable")
    else:
        for j in range(n_sub):
            tj = t + j * h
            b = np.asarray(coeff.drift(tj, x, env_state.value), float)
            lam = coeff.friction(tj, x, eps)
            sig = np.atleast_2d(np.asarray(coeff.diffusion(tj, x, eps), float))
            decay, mean_x, L = exponential_step_factor(lam, sig, eps, h)
            z = L @ noise.standard_normal(m + 2 * d)
            dw, xi_x, xi_p = z[:m], z[m:m + d], z[m + d:]
            g = b / lam
            x_new = x + p * mean_x + g * (h - mean_x) + xi_x
            p = p * decay + g * (1.0 - decay) + xi_p
            env_state = _advance_env(env_spec, env_state, x, tj, eps, h,
                                     env_stream)
            x = x_new
            w_inc += dw
            if np.any(np.abs(p) > 1e10):
                raise BlowUp("momentum exceeded 1e10")
    return x, p, env_state, w_inc


# ---------------------------------------------------------------------------
# Full-trajectory simulation
# ---------------------------------------------------------------------------

def _fast_eligible(model: ValidatedModel, cfg: SchemeConfig,
                   shared_w) -> bool:
    fam = model.family
    return (fam is not None
            and shared_w is None
            and model.d == 1 and model.m == 1
            and isinstance(model.environment, MarkovSwitching)
            and fam.env_coupling is None)


def _markov_labels_for_substeps(env_spec: MarkovSwitching, eps, grid,
                                n_sub, env_stream):
    """Presimulated labels at substep left endpoints plus node values."""
    jt, labs = simulate_markov_path(env_spec.Q, env_spec.y0, eps,
                                    grid.t0, grid.t_end, env_stream)
    h = grid.dt / n_sub
    t_sub = grid.t0 + np.arange(grid.n_steps * n_sub) * h
    return labels_at(t_sub, jt, labs), labels_at(grid.nodes(), jt, labs)


def _simulate_fast(model: ValidatedModel, eps, grid, master_seed, replica_lo,
                   n_replicas, cfg):
    """Batch kernels for scalar built-in families in a Markov environment.

    Replica i uses the lanes of spawn_stream(master_seed, replica_lo + i);
    both schemes are supported.  Returns (X, P, W, env_nodes) arrays with a
    leading replica axis.
    """
    fam = model.family
    K = grid.n_steps
    n_sub = n_substeps(cfg.scheme, cfg.substep_factor, eps, grid.dt,
                       model.lam_max)
    h = grid.dt / n_sub
    env_spec = model.environment
    R = n_replicas
    total = K * n_sub
    if env_spec.n_states > 1:
        labels = np.empty((R, total), dtype=np.int64)
        env_nodes = np.empty((R, K + 1), dtype=np.int64)
        for r in range(R):
            env_stream = spawn_stream(master_seed,
                                      replica_lo + r).child(LANE_ENV)
            labels[r], env_nodes[r] = _markov_labels_for_substeps(
                env_spec, eps, grid, n_sub, env_stream)
    else:
        labels = None
        env_nodes = np.zeros((R, K + 1), dtype=np.int64)
    lin_a = float(fam.lin_a[0, 0]) if fam.lin_a is not None else 0.0
    x0 = float(model.spec.x0[0])
    p0 = float(model.initial_momentum(eps)[0])
    bvals = np.ascontiguousarray(fam.b_states[:, 0])
    if cfg.scheme == "exponential":
        decay, mean_x, L = exponential_step_factor(fam.lam, fam.sig, eps, h)
        Z = np.empty((R, total, 3))
        batch_standard_normals(master_seed, replica_lo, LANE_NOISE, Z)
        Z = Z @ L.T
        X, P, W = kernels.second_order_exponential_batch(
            x0, p0, bvals, lin_a, fam.height, fam.lam, eps, h, K, n_sub,
            decay, mean_x, Z, labels)
    else:
        Z = np.empty((R, total))
        batch_standard_normals(master_seed, replica_lo, LANE_NOISE, Z)
        noise_amp = math.sqrt(h) * math.sqrt(eps) * fam.sig / eps ** 2
        X, P, W = kernels.second_order_euler_batch(
            x0, p0, bvals, lin_a, fam.height, fam.lam, eps, h, K, n_sub,
            noise_amp, Z, labels)
    if not (np.isfinite(X[:, -1]).all() and np.isfinite(P[:, -1]).all()):
        raise BlowUp("non-finite state in batch simulation")
    return X, P, W, env_nodes


def _simulate_generic_one(model: ValidatedModel, eps, grid, stream, cfg,
                          shared_w=None):
    """Reference per-replica trajectory loop handling opaque callables."""
    d, m = model.d, model.m
    K = grid.n_steps
    noise = stream.child(LANE_NOISE)
    env_stream = stream.child(LANE_ENV)
    x = model.spec.x0.astype(float).copy()
    p = model.initial_momentum(eps).astype(float).copy()
    env_state = initial_env_state(model.environment)
    X = np.empty((K + 1, d))
    P = np.empty((K + 1, d))
    W = np.zeros((K + 1, m))
    env_disc = not isinstance(model.environment, FastDiffusion)
    env_path = (np.empty(K + 1, dtype=np.int64) if env_disc
                else np.empty((K + 1, model.environment.l)))
    X[0], P[0] = x, p
    env_path[0] = env_state.value
    for k in range(K):
        t = grid.node(k)
        dw = None if shared_w is None else shared_w[k]
        x, p, env_state, w_inc = _generic_step(
            x, p, env_state, t, grid.dt, eps, model, cfg, noise, env_stream,
            given_dw=dw)
        X[k + 1], P[k + 1] = x, p
        W[k + 1] = W[k] + w_inc
        env_path[k + 1] = env_state.value
    return X, P, W, env_path


def simulate_second_order(model: ValidatedModel, eps: float, grid: TimeGrid,
                          stream: NoiseStream, config: SchemeConfig,
                          shared_w: np.ndarray | None = None) -> TrajectoryBundle:
    """Integrate one realization of the second-order system at grid nodes.

    ``shared_w``, when given, must hold (n_steps, m) node-level w-increments
    to consume instead of fresh draws (euler scheme with h = dt only); this
    is the coupling device for cross-scheme checks.
    """
    if eps <= 0.0:
        raise BadInterval("eps must be positive")
    if shared_w is not None and config.scheme != "euler":
        raise StepTooCoarse("shared increments are consumed by the euler "
                            "scheme only; the exponential scheme records "
                            "its own w path")
    if _fast_eligible(model, config, shared_w):
        X, P, W, env_nodes = _simulate_fast(model, eps, grid,
                                            stream.master_seed,
                                            stream.replica_id, 1, config)
        bundle = TrajectoryBundle(grid=grid, eps=eps, X=X[0][:, None],
                                  p=P[0][:, None], env=env_nodes[0],
                                  w=W[0][:, None])
    else:
        X, P, W, env_path = _simulate_generic_one(model, eps, grid, stream,
                                                  config, shared_w)
        bundle = TrajectoryBundle(grid=grid, eps=eps, X=X, p=P, env=env_path,
                                  w=W)
    if config.record_diagnostics:
        attach_diagnostics(bundle, model)
    return bundle


def simulate_second_order_paths(model: ValidatedModel, eps: float,
                                grid: TimeGrid, master_seed: int,
                                replica_lo: int, replica_hi: int,
                                config: SchemeConfig):
    """Node paths for replicas [replica_lo, replica_hi) as stacked arrays.

    Returns (X, P, W, env_nodes) with shapes (R, K+1, d), (R, K+1, d),
    (R, K+1, m) and (R, K+1) / (R, K+1, l).  Replica k uses
    spawn_stream(master_seed, k), so results are independent of chunking.
    """
    if _fast_eligible(model, config, None):
        X, P, W, env_nodes = _simulate_fast(model, eps, grid, master_seed,
                                            replica_lo,
                                            replica_hi - replica_lo, config)
        return X[:, :, None], P[:, :, None], W[:, :, None], env_nodes
    streams = [spawn_stream(master_seed, r)
               for r in range(replica_lo, replica_hi)]
    outs = [_simulate_generic_one(model, eps, grid, s, config)
            for s in streams]
    X = np.stack([o[0] for o in outs])
    P = np.stack([o[1] for o in outs])
    W = np.stack([o[2] for o in outs])
    env = np.stack([o[3] for o in outs])
    return X, P, W, env


# ---------------------------------------------------------------------------
# Diagnostics: A, H, the remainder components, and the representation identity
# ---------------------------------------------------------------------------

def _node_friction(bundle: TrajectoryBundle, model: ValidatedModel):
    ts = bundle.grid.nodes()
    return ts, np.array([model.coefficients.friction(t, x, bundle.eps)
                         for t, x in zip(ts, bundle.X)])


def compute_A_eps(bundle: TrajectoryBundle, model: ValidatedModel) -> np.ndarray:
    """Trapezoid accumulation of A(t) = eps^-2 int_0^t lam(r, X_r) dr."""
    _, lam = _node_friction(bundle, model)
    dt = bundle.grid.dt
    incr = 0.5 * (lam[:-1] + lam[1:]) * dt / bundle.eps ** 2
    return np.concatenate(([0.0], np.cumsum(incr)))


def compute_H_eps(bundle: TrajectoryBundle, model: ValidatedModel,
                  A: np.ndarray | None = None) -> np.ndarray:
    """Stochastic convolution H at grid nodes by stable forward recursion.

    H_{k+1} = e^{-dA} H_k + sqrt(eps) sigma(t_k, X_k) dw_k e^{-dA/2}; the
    midpoint weighting e^{-dA/2} is the quadrature of the kernel over one
    step.  Only differences of A are ever exponentiated.
    """
    if bundle.w is None:
        raise MissingDiagnostics("bundle has no recorded w path")
    if A is None:
        A = compute_A_eps(bundle, model)
    ts = bundle.grid.nodes()
    K = bundle.grid.n_steps
    d = bundle.X.shape[1]
    H = np.zeros((K + 1, d))
    sq_eps = math.sqrt(bundle.eps)
    dw = np.diff(bundle.w, axis=0)
    for k in range(K):
        dA = A[k + 1] - A[k]
        sig = np.atleast_2d(np.asarray(
            model.coefficients.diffusion(ts[k], bundle.X[k], bundle.eps), float))
        H[k + 1] = (math.exp(-dA) * H[k]
                    + sq_eps * math.exp(-dA / 2.0) * (sig @ dw[k]))
    return H


def _friction_gradients(model: ValidatedModel, t, x, eps, fd_step=1e-5):
    """Central finite differences of lam in t and x."""
    f = model.coefficients.friction
    dt_lam = (f(t + fd_step, x, eps) - f(t - fd_step, x, eps)) / (2 * fd_step)
    d = x.shape[0]
    dx_lam = np.empty(d)
    for i in range(d):
        e = np.zeros(d)
        e[i] = fd_step
        dx_lam[i] = (f(t, x + e, eps) - f(t, x - e, eps)) / (2 * fd_step)
    return dt_lam, dx_lam


def compute_remainder(bundle: TrajectoryBundle, model: ValidatedModel,
                      A: np.ndarray | None = None,
                      H: np.ndarray | None = None) -> np.ndarray:
    """The five remainder components of the first-order representation.

    Exponential kernels e^{-(A_t - A_s)} are evaluated through A-differences
    with the same midpoint weighting as the H recursion; outer integrals use
    the trapezoid rule on node values.  Returns an array (5, K+1, d).
    """
    if bundle.w is None:
        raise MissingDiagnostics("bundle has no recorded w path")
    if A is None:
        A = compute_A_eps(bundle, model)
    if H is None:
        H = compute_H_eps(bundle, model, A)
    coeff = model.coefficients
    grid = bundle.grid
    ts = grid.nodes()
    dt = grid.dt
    eps = bundle.eps
    K = grid.n_steps
    d = bundle.X.shape[1]
    lam = np.array([coeff.friction(t, x, eps) for t, x in zip(ts, bundle.X)])
    env_vals = bundle.env
    b = np.stack([np.asarray(coeff.drift(ts[k], bundle.X[k], env_vals[k]), float)
                  for k in range(K + 1)])
    grads = [_friction_gradients(model, ts[k], bundle.X[k], eps)
             for k in range(K + 1)]
    # psi_k = (d_t lam + <grad_x lam, p>) / lam^2 at node k
    psi = np.array([(g[0] + float(np.dot(g[1], bundle.p[k]))) / lam[k] ** 2
                    for k, g in enumerate(grads)])

    R = np.zeros((5, K + 1, d))
    dA = np.diff(A)
    # R1: p(0) * int_0^t e^{-A(s)} ds, trapezoid on e^{-A} node values.
    expA = np.exp(-A)
    R[0] = np.cumsum(np.concatenate(
        ([0.0], 0.5 * (expA[:-1] + expA[1:]) * dt)))[:, None] * bundle.p[0]
    # Convolution I_k = int_0^{t_k} e^{-(A_k - A_s)} b ds by forward recursion.
    I = np.zeros((K + 1, d))
    for k in range(K):
        I[k + 1] = (math.exp(-dA[k]) * I[k]
                    + dt * math.exp(-dA[k] / 2.0) * 0.5 * (b[k] + b[k + 1]))
    R[1] = -I / lam[:, None]
    # R3: -int (I_s psi_s) ds, R5: -int (H_s psi_s) ds, trapezoid.
    integrand3 = I * psi[:, None]
    integrand5 = H * psi[:, None]
    for comp, integrand in ((2, integrand3), (4, integrand5)):
        R[comp] = -np.concatenate(
            (np.zeros((1, d)),
             np.cumsum(0.5 * (integrand[:-1] + integrand[1:]) * dt, axis=0)))
    R[3] = -H / lam[:, None]
    return R


def attach_diagnostics(bundle: TrajectoryBundle, model: ValidatedModel) -> None:
    A = compute_A_eps(bundle, model)
    H = compute_H_eps(bundle, model, A)
    R = compute_remainder(bundle, model, A, H)
    bundle.diagnostics = Diagnostics(A_eps=A, H_eps=H, R_components=R)


def representation_residual(bundle: TrajectoryBundle,
                            model: ValidatedModel) -> np.ndarray:
    """Node residual of the executable first-order representation identity.

    X_t - x_0 - int b/lam ds - sqrt(eps) int (sigma/lam) dw - R(t) should
    vanish up to quadrature error of order dt.
    """
    if bundle.diagnostics is None:
        attach_diagnostics(bundle, model)
    coeff = model.coefficients
    grid = bundle.grid
    ts = grid.nodes()
    dt = grid.dt
    eps = bundle.eps
    K = grid.n_steps
    d = bundle.X.shape[1]
    lam = np.array([coeff.friction(t, x, eps) for t, x in zip(ts, bundle.X)])
    b = np.stack([np.asarray(coeff.drift(ts[k], bundle.X[k], bundle.env[k]),
                             float) for k in range(K + 1)])
    drift_term = np.concatenate(
        (np.zeros((1, d)),
         np.cumsum(0.5 * (b[:-1] / lam[:-1, None] + b[1:] / lam[1:, None]) * dt,
                   axis=0)))
    dw = np.diff(bundle.w, axis=0)
    noise_incr = np.zeros((K + 1, d))
    for k in range(K):
        sig = np.atleast_2d(np.asarray(
            coeff.diffusion(ts[k], bundle.X[k], eps), float))
        noise_incr[k + 1] = (sig @ dw[k]) / lam[k]
    noise_term = math.sqrt(eps) * np.cumsum(noise_incr, axis=0)
    R_total = bundle.diagnostics.R_total
    return bundle.X - model.spec.x0[None, :] - drift_term - noise_term - R_total
