"""Large-deviations machinery for the Markov-switching environment.

The normalized log-moment-generating functional of the environment-modulated
drift is realized as the principal eigenvalue of Q + diag(g) (Perron root of
the tilted generator); its Fenchel-Legendre transform L feeds the action
integral and the least-action search.  A deterministic matrix-exponential
oracle cross-checks the eigenvalue realization against the defining limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
import scipy.linalg

from .environment import MarkovSwitching, StateDependentJump, stationary_measure
from .errors import (BoundaryHit, NegativeControl, NoConvergence,
                     NonscalarModel, UnsupportedEnvironment)
from .grid import make_grid
from .model import ValidatedModel
from .overdamped import Path, lambda0

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class RateModel:
    """H-functional and Lagrangian evaluators for one validated model."""

    model: ValidatedModel
    beta_box: float = 8.0
    eig_tol: float = 1e-12

    def __post_init__(self):
        if self.beta_box <= 0:
            raise ValueError("beta_box must be positive")
        if not isinstance(self.model.environment, MarkovSwitching):
            raise UnsupportedEnvironment(
                "rate computations need a Markov-switching (or constant) "
                "environment")

    @property
    def n_states(self) -> int:
        return self.model.environment.n_states


def h_functional(Q: np.ndarray, g: np.ndarray, eig_tol: float = 1e-12) -> float:
    """Principal eigenvalue of Q + diag(g).

    The tilted semigroup e^{t(Q + diag g)} is positive, so Perron-Frobenius
    gives a real simple top eigenvalue; a dense solve returns it directly for
    moderate state counts, power iteration on the exponential otherwise.
    """
    Q = np.asarray(Q, dtype=float)
    g = np.asarray(g, dtype=float)
    M = Q + np.diag(g)
    n = M.shape[0]
    if n <= 64:
        vals = np.linalg.eigvals(M)
        return float(np.max(vals.real))
    # Power iteration on the positive matrix exp(M * s).
    s = 1.0 / max(1.0, float(np.max(np.abs(M))))
    P = scipy.linalg.expm(M * s)
    v = np.ones(n) / math.sqrt(n)
    prev = -np.inf
    for _ in range(100000):
        w = P @ v
        norm = float(np.linalg.norm(w))
        v = w / norm
        val = math.log(norm) / s
        if abs(val - prev) < eig_tol:
            return val
        prev = val
    raise NoConvergence("power iteration on the tilted semigroup stalled")


def h_functional_expm_oracle(Q: np.ndarray, g: np.ndarray, eps: float = 0.01,
                             T: float = 1.0, state: int = 0) -> float:
    """Defining-limit check: (eps/T) log [e^{(Q + diag g) T / eps} 1]_state."""
    M = np.asarray(Q, float) + np.diag(np.asarray(g, float))
    row = scipy.linalg.expm(M * (T / eps)) @ np.ones(M.shape[0])
    return float(eps / T * math.log(row[state]))


def _sigma0(model: ValidatedModel, t: float, x: np.ndarray) -> np.ndarray:
    return np.atleast_2d(np.asarray(model.coefficients.diffusion(t, x, 0.0),
                                    float))


def h_at(rate: RateModel, t: float, x: np.ndarray, beta: np.ndarray) -> float:
    """H(x, beta, t): tilt exponent assembled per environment state.

    Each state i contributes g(i) = beta . b(t, x, i) / lam0
    + |sigma0^T beta|^2 / (2 lam0^2); a one-state environment returns g
    directly.
    """
    model = rate.model
    x = np.atleast_1d(np.asarray(x, dtype=float))
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    lam = lambda0(model, t, x)
    sig = _sigma0(model, t, x)
    quad = float(np.dot(sig.T @ beta, sig.T @ beta)) / (2.0 * lam ** 2)
    n = rate.n_states
    g = np.empty(n)
    for i in range(n):
        b = np.asarray(model.coefficients.drift(t, x, i), float)
        g[i] = float(np.dot(beta, b)) / lam + quad
    if n == 1:
        return float(g[0])
    return h_functional(model.environment.Q, g, rate.eig_tol)


def _golden_max(f: Callable[[float], float], lo: float, hi: float,
                xtol: float = 1e-8):
    """Golden-section maximization of a unimodal f on [lo, hi]."""
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > xtol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    xm = 0.5 * (a + b)
    return xm, f(xm)


def lagrangian(rate: RateModel, t: float, x: np.ndarray,
               gamma: np.ndarray) -> float:
    """Fenchel-Legendre transform L = sup_beta [<gamma, beta> - H].

    Concave maximization over the box [-beta_box, beta_box]^d by
    coordinate-wise golden-section refinement; raises BoundaryHit when the
    maximizer touches the box (beta_box too small, L may be underestimated).
    """
    model = rate.model
    d = model.d
    gamma = np.atleast_1d(np.asarray(gamma, dtype=float))
    box = rate.beta_box
    beta = np.zeros(d)

    def objective(vec):
        return float(np.dot(gamma, vec)) - h_at(rate, t, x, vec)

    if d == 1:
        bstar, best = _golden_max(
            lambda b1: objective(np.array([b1])), -box, box)
        beta[0] = bstar
    else:
        best = objective(beta)
        for _ in range(60):
            prev = best
            for i in range(d):
                def f_i(v, i=i):
                    trial = beta.copy()
                    trial[i] = v
                    return objective(trial)
                beta[i], best = _golden_max(f_i, -box, box)
            if abs(best - prev) < 1e-9:
                break
    if np.any(np.abs(beta) > box - 1e-4 * box):
        raise BoundaryHit(
            f"Legendre maximizer at {beta} touches the box +-{box}")
    return max(best, 0.0)


def action(rate: RateModel, phi: Path) -> float:
    """Composite-midpoint quadrature of L along phi with forward-difference
    velocities; returns inf when a segment's velocity stays unattainable
    after one automatic box doubling."""
    grid = phi.grid
    dt = grid.dt
    vals = phi.values
    total = 0.0
    for j in range(grid.n_steps):
        gamma = (vals[j + 1] - vals[j]) / dt
        xm = 0.5 * (vals[j] + vals[j + 1])
        tm = grid.node(j) + dt / 2.0
        try:
            lvals = lagrangian(rate, tm, xm, gamma)
        except BoundaryHit:
            try:
                lvals = lagrangian(replace(rate, beta_box=2.0 * rate.beta_box),
                                   tm, xm, gamma)
            except BoundaryHit:
                return math.inf
        total += dt * lvals
    return total


def gaussian_action(lam0: float, sig0: float, b0: float, phi: Path) -> float:
    """Closed-form one-state action: int lam^2 (phi' - b/lam)^2 / (2 sig^2).

    Exact per-segment quadrature (the integrand is constant on each
    segment); scalar constant-coefficient models only.
    """
    if phi.values.shape[1] != 1:
        raise NonscalarModel("gaussian_action needs d = 1")
    dt = phi.grid.dt
    gamma = np.diff(phi.values[:, 0]) / dt
    return float(np.sum(dt * lam0 ** 2 * (gamma - b0 / lam0) ** 2
                        / (2.0 * sig0 ** 2)))


@dataclass
class MinActionResult:
    path: Path
    value: float
    converged: bool
    n_iterations: int


def minimize_action(rate: RateModel, x_start, x_end, n_segments: int,
                    grad_step: float = 1e-6, grad_tol: float = 1e-6,
                    max_iterations: int = 10000) -> MinActionResult:
    """Least-action path between fixed endpoints on [0, 1].

    Piecewise-linear parameterization, straight-line initialization, and
    plain gradient descent with Armijo backtracking; gradients come from
    central finite differences because L itself is eigenvalue-based.  When
    the iteration budget runs out the best iterate is returned with
    ``converged=False``.
    """
    if n_segments < 2:
        raise ValueError("n_segments must be at least 2")
    d = rate.model.d
    x_start = np.atleast_1d(np.asarray(x_start, dtype=float))
    x_end = np.atleast_1d(np.asarray(x_end, dtype=float))
    grid = make_grid(0.0, 1.0, n_segments)
    fracs = np.linspace(0.0, 1.0, n_segments + 1)[:, None]
    base = x_start[None, :] * (1.0 - fracs) + x_end[None, :] * fracs

    def assemble(z):
        vals = base.copy()
        vals[1:-1] = z.reshape(n_segments - 1, d)
        return Path(grid=grid, values=vals)

    def objective(z):
        return action(rate, assemble(z))

    z = base[1:-1].reshape(-1).copy()
    value = objective(z)
    n_iter = 0
    converged = False
    while n_iter < max_iterations:
        grad = np.empty_like(z)
        for i in range(z.size):
            zp = z.copy()
            zp[i] += grad_step
            zm = z.copy()
            zm[i] -= grad_step
            grad[i] = (objective(zp) - objective(zm)) / (2.0 * grad_step)
        if np.max(np.abs(grad)) < grad_tol:
            converged = True
            break
        alpha = 1.0
        improved = False
        g2 = float(np.dot(grad, grad))
        for _ in range(40):
            trial = z - alpha * grad
            tval = objective(trial)
            if tval <= value - 1e-4 * alpha * g2:
                z, value = trial, tval
                improved = True
                break
            alpha *= 0.5
        n_iter += 1
        if not improved:
            # Flat to within line-search resolution; treat as converged.
            converged = True
            break
    return MinActionResult(path=assemble(z), value=value,
                           converged=converged, n_iterations=n_iter)


# ---------------------------------------------------------------------------
# Point evaluation of the jump-environment cost objective
# ---------------------------------------------------------------------------

def entropy_ell(x: float) -> float:
    """l(x) = x ln x - x + 1 with the continuous extension l(0) = 1."""
    if x < 0.0:
        raise NegativeControl(f"control value {x} is negative")
    if x == 0.0:
        return 1.0
    return x * math.log(x) - x + 1.0


@dataclass(frozen=True)
class JumpControls:
    """Controls (u, v, pi) entering the jump-model cost objective.

    ``u(i, s) -> (m,)`` is the per-state diffusion control, ``v(i, j, s, z)``
    the nonnegative jump tilt on [0, 1] x [0, zeta], and ``pi(s)`` a
    probability vector over states for each time.
    """

    u: Callable[[int, float], np.ndarray]
    v: Callable[[int, int, float, float], float]
    pi: Callable[[float], np.ndarray]


@dataclass
class JumpCostResult:
    value: float
    diffusion_term: float
    jump_term: float
    drift_residual: float
    stationarity_residual: float


def jump_cost_evaluate(controls: JumpControls, model: ValidatedModel,
                       phi: Path, n_z: int = 64) -> JumpCostResult:
    """Evaluate the jump-model cost objective along phi.

    Composite midpoint quadrature of
    sum_i 1/2 int |u_i|^2 pi_i ds
    + sum_(i,j) int int l(v_ij(s, z)) pi_i(s) dz ds over [0, zeta] x [0, 1].
    Membership of (u, v, pi) in the admissible class is *not* enforced; the
    drift-reproduction and stationarity residuals are returned for
    inspection instead.
    """
    env = model.environment
    if not isinstance(env, StateDependentJump):
        raise UnsupportedEnvironment("jump_cost_evaluate needs a jump "
                                     "environment")
    n = env.n_states
    grid = phi.grid
    dt = grid.dt
    zeta = env.zeta
    dz = zeta / n_z
    z_mid = (np.arange(n_z) + 0.5) * dz
    pairs = set()
    for j_seg in range(grid.n_steps):
        xm = 0.5 * (phi.values[j_seg] + phi.values[j_seg + 1])
        for i in range(n):
            for j in range(n):
                if i != j and env.transition(xm, i, j) > 0.0:
                    pairs.add((i, j))
    pairs = sorted(pairs)

    diffusion_term = 0.0
    jump_term = 0.0
    drift_res = 0.0
    stat_res = 0.0
    for j_seg in range(grid.n_steps):
        s = grid.node(j_seg) + dt / 2.0
        xm = 0.5 * (phi.values[j_seg] + phi.values[j_seg + 1])
        pi = np.asarray(controls.pi(s), dtype=float)
        if pi.shape != (n,) or np.any(pi < -1e-9) or abs(pi.sum() - 1.0) > 1e-6:
            raise ValueError(f"pi({s}) is not a distribution over {n} states")
        us = [np.atleast_1d(np.asarray(controls.u(i, s), float))
              for i in range(n)]
        for i in range(n):
            diffusion_term += 0.5 * float(np.dot(us[i], us[i])) * pi[i] * dt
        for (i, j) in pairs:
            vals = np.array([entropy_ell(controls.v(i, j, s, z))
                             for z in z_mid])
            jump_term += float(vals.sum()) * dz * pi[i] * dt

        # Drift-reproduction residual against the segment velocity.
        lam = lambda0(model, s, xm)
        sig = _sigma0(model, s, xm)
        gamma = (phi.values[j_seg + 1] - phi.values[j_seg]) / dt
        recon = np.zeros(model.d)
        for i in range(n):
            b = np.asarray(model.coefficients.drift(s, xm, i), float)
            recon += pi[i] * (b + sig @ us[i]) / lam
        drift_res = max(drift_res, float(np.linalg.norm(gamma - recon)))

        # Stationarity residual of the v-tilted frozen generator.
        G = np.zeros((n, n))
        for (i, j) in pairs:
            ub = env.intensity(xm, i) * env.transition(xm, i, j)
            widths = np.clip(np.minimum(z_mid + dz / 2.0, ub)
                             - (z_mid - dz / 2.0), 0.0, dz)
            vals = np.array([controls.v(i, j, s, z) for z in z_mid])
            if np.any(vals < 0.0):
                raise NegativeControl("v must be nonnegative")
            G[i, j] = float(np.dot(vals, widths))
        for i in range(n):
            G[i, i] = -G[i].sum()
        stat_res = max(stat_res, float(np.max(np.abs(pi @ G))))
    value = diffusion_term + jump_term
    return JumpCostResult(value=value, diffusion_term=diffusion_term,
                          jump_term=jump_term, drift_residual=drift_res,
                          stationarity_residual=stat_res)


def averaged_velocity(rate: RateModel, t: float, x: np.ndarray) -> np.ndarray:
    """Zero of L: the averaged drift over friction at (t, x)."""
    pi = stationary_measure(rate.model.environment, x=x).weights
    lam = lambda0(rate.model, t, x)
    out = np.zeros(rate.model.d)
    for i, w in enumerate(pi):
        out += w * np.asarray(rate.model.coefficients.drift(t, x, i), float)
    return out / lam
