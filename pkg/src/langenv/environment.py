"""Environment processes: Markov switching, state-dependent jumps, fast diffusion.

All three are exposed through step kernels that advance the environment over
one integrator substep ``[t, t + dt]`` with the slow state frozen, plus an
event-driven path simulator for the autonomous Markov case.  Discrete kernels
keep a residual clock inside :class:`EnvState` so that exactly one
exponential draw is consumed per event, never per substep; that makes the
step-by-step kernels and the event-driven simulator consume identical
stream draws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .errors import (BadInterval, BlowUp, IntensityExceedsZeta,
                     Reducible, UnsupportedEnvironment)
from .streams import NoiseStream


@dataclass(frozen=True)
class MarkovSwitching:
    """Finite chain run at speed 1/eps; Q is a generator matrix."""

    Q: np.ndarray
    y0: int = 0

    def __post_init__(self):
        object.__setattr__(self, "Q", np.asarray(self.Q, dtype=float))

    @property
    def n_states(self) -> int:
        return self.Q.shape[0]


@dataclass(frozen=True)
class StateDependentJump:
    """Jump process thinned against the uniform bound zeta.

    ``intensity(x, y) -> rate`` and ``transition(x, y, y') -> probability``
    define the jump mechanism; candidates arrive at rate zeta/eps and a
    candidate in state y is accepted as a jump to y' with probability
    c_y(x) r_{yy'}(x) / zeta, which reproduces the measure-zeta
    uniformization sets [0, c_y(x) r_{yy'}(x)].
    """

    n_states: int
    intensity: Callable[[np.ndarray, int], float]
    transition: Callable[[np.ndarray, int, int], float]
    zeta: float
    y0: int = 0


@dataclass(frozen=True)
class FastDiffusion:
    """Fast diffusion dY = F/eps dt + G/sqrt(eps) dW~ on R^l.

    ``sigma_corr`` is the (m, n) correlation between the primary noise and
    the environment noise; zero means independent.
    """

    l: int
    n: int
    F: Callable[[float, np.ndarray, np.ndarray], np.ndarray]
    G: Callable[[float, np.ndarray, np.ndarray], np.ndarray]
    sigma_corr: np.ndarray
    y0: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "sigma_corr",
                           np.asarray(self.sigma_corr, dtype=float))
        object.__setattr__(self, "y0",
                           np.asarray(self.y0, dtype=float).reshape(self.l))


EnvironmentSpec = MarkovSwitching | StateDependentJump | FastDiffusion


def trivial_environment() -> MarkovSwitching:
    """One-state chain: the degenerate environment with no switching."""
    return MarkovSwitching(Q=np.zeros((1, 1)), y0=0)


def is_discrete(env: EnvironmentSpec) -> bool:
    return isinstance(env, (MarkovSwitching, StateDependentJump))


@dataclass(frozen=True)
class EnvState:
    """Current environment value plus discrete-case clock bookkeeping.

    ``residual_clock`` is the time left until the already-drawn next event;
    0 means the next holding time has not been drawn yet.
    """

    label: int = 0
    y: np.ndarray | None = None
    residual_clock: float = 0.0

    @property
    def value(self):
        return self.label if self.y is None else self.y


def initial_env_state(env: EnvironmentSpec) -> EnvState:
    if isinstance(env, FastDiffusion):
        return EnvState(label=0, y=env.y0.copy())
    return EnvState(label=env.y0, y=None, residual_clock=0.0)


@dataclass(frozen=True)
class Distribution:
    """Probability weights over the discrete state set."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if np.any(w < -1e-12) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"not a distribution: {w}")
        object.__setattr__(self, "weights", w)


# ---------------------------------------------------------------------------
# Markov switching
# ---------------------------------------------------------------------------

def _markov_holding(Q: np.ndarray, label: int, eps: float,
                    stream: NoiseStream) -> float:
    rate = -Q[label, label]
    if rate <= 0.0:
        return math.inf
    return stream.exponential(scale=eps / rate)


def _markov_jump_target(Q: np.ndarray, label: int, stream: NoiseStream) -> int:
    rate = -Q[label, label]
    u = stream.uniform() * rate
    acc = 0.0
    target = label
    for k in range(Q.shape[0]):
        if k == label:
            continue
        if Q[label, k] > 0.0:
            target = k
            acc += Q[label, k]
            if u < acc:
                break
    return target


def env_step_markov(state: EnvState, Q: np.ndarray, eps: float, dt: float,
                    stream: NoiseStream) -> EnvState:
    """Advance the chain with generator Q/eps exactly over [0, dt]."""
    Q = np.asarray(Q, dtype=float)
    label = state.label
    residual = state.residual_clock
    remaining = dt
    if residual == 0.0:
        residual = _markov_holding(Q, label, eps, stream)
    while residual <= remaining:
        remaining -= residual
        label = _markov_jump_target(Q, label, stream)
        residual = _markov_holding(Q, label, eps, stream)
    return EnvState(label=label, residual_clock=residual - remaining)


def simulate_markov_path(Q: np.ndarray, y0: int, eps: float, t0: float,
                         t_end: float, stream: NoiseStream):
    """Event-driven chain realization on [t0, t_end].

    Returns ``(jump_times, labels)`` where ``labels[0]`` is the initial
    state and ``labels[i]`` holds from ``jump_times[i - 1]`` on (the path is
    right continuous).  Consumes the same draws as repeated
    :func:`env_step_markov` calls over any partition of the interval.
    """
    Q = np.asarray(Q, dtype=float)
    t = t0
    label = int(y0)
    times = []
    labels = [label]
    while True:
        hold = _markov_holding(Q, label, eps, stream)
        t += hold
        if t >= t_end or math.isinf(t):
            break
        label = _markov_jump_target(Q, label, stream)
        times.append(t)
        labels.append(label)
    return np.asarray(times, dtype=float), np.asarray(labels, dtype=np.int64)


def labels_at(times: np.ndarray, jump_times: np.ndarray,
              labels: np.ndarray) -> np.ndarray:
    """Right-continuous lookup of a piecewise-constant label path."""
    idx = np.searchsorted(jump_times, times, side="right")
    return labels[idx]


def occupation_fractions(jump_times: np.ndarray, labels: np.ndarray,
                         t0: float, t_end: float, n_states: int) -> np.ndarray:
    """Exact fraction of [t0, t_end] spent in each state."""
    edges = np.concatenate(([t0], jump_times, [t_end]))
    occ = np.zeros(n_states)
    for i in range(len(labels)):
        occ[labels[i]] += edges[i + 1] - edges[i]
    return occ / (t_end - t0)


# ---------------------------------------------------------------------------
# State-dependent jump process (uniformization / thinning)
# ---------------------------------------------------------------------------

def env_step_jump(state: EnvState, spec: StateDependentJump, x: np.ndarray,
                  eps: float, dt: float, stream: NoiseStream) -> EnvState:
    """Advance the thinned jump process over [0, dt] with x frozen."""
    label = state.label
    residual = state.residual_clock
    remaining = dt
    scale = eps / spec.zeta
    if residual == 0.0:
        residual = stream.exponential(scale=scale)
    while residual <= remaining:
        remaining -= residual
        c = spec.intensity(x, label)
        if c > spec.zeta - 1.0 + 1e-9:
            raise IntensityExceedsZeta(
                f"c_{label}(x) = {c} exceeds zeta - 1 = {spec.zeta - 1.0}")
        u = stream.uniform(0.0, spec.zeta)
        if u < c:
            # Accepted: u falls in the stacked intervals [0, c r_{yy'}].
            acc = 0.0
            target = label
            for yp in range(spec.n_states):
                if yp == label:
                    continue
                acc += c * spec.transition(x, label, yp)
                if u < acc:
                    target = yp
                    break
            label = target
        residual = stream.exponential(scale=scale)
    return EnvState(label=label, residual_clock=residual - remaining)


# ---------------------------------------------------------------------------
# Fast diffusion environment
# ---------------------------------------------------------------------------

def diffusion_substeps(eps: float, dt: float) -> int:
    """Internal Euler substep count keeping h <= eps/10."""
    return max(1, int(math.ceil(dt / (eps / 10.0))))


def env_step_diffusion(state: EnvState, spec: FastDiffusion, x: np.ndarray,
                       t: float, eps: float, dt: float,
                       w_tilde_increments: np.ndarray) -> EnvState:
    """Euler-Maruyama update of the fast diffusion over [t, t + dt].

    ``w_tilde_increments`` holds one N(0, h) row per internal substep; at
    least diffusion_substeps(eps, dt) rows are required so the substep size
    stays at or below eps/10 (the stability cap for the 1/eps drift), and
    more rows refine the update further.
    """
    inc = np.asarray(w_tilde_increments, dtype=float).reshape(-1, spec.n)
    n_sub = inc.shape[0]
    if n_sub < diffusion_substeps(eps, dt):
        raise BadInterval(
            f"need at least {diffusion_substeps(eps, dt)} increment rows to "
            f"keep the fast-diffusion substep at or below eps/10")
    h = dt / n_sub
    y = np.array(state.y, dtype=float)
    root_eps = math.sqrt(eps)
    for j in range(n_sub):
        tj = t + j * h
        y = y + (h / eps) * np.asarray(spec.F(tj, x, y), dtype=float) \
            + (np.asarray(spec.G(tj, x, y), dtype=float) @ inc[j]) / root_eps
        if np.any(np.abs(y) > 1e8):
            raise BlowUp("fast environment exceeded 1e8; check the inward "
                         "drift condition or reduce dt")
    return replace(state, y=y)


# ---------------------------------------------------------------------------
# Frozen-state stationary measure
# ---------------------------------------------------------------------------

def frozen_generator(env: EnvironmentSpec, x: np.ndarray | None = None) -> np.ndarray:
    """Generator of the environment with the slow state frozen at x."""
    if isinstance(env, MarkovSwitching):
        return np.array(env.Q, dtype=float)
    if isinstance(env, StateDependentJump):
        if x is None:
            raise UnsupportedEnvironment("jump environment needs a frozen x")
        n = env.n_states
        Q = np.zeros((n, n))
        for y in range(n):
            c = env.intensity(x, y)
            for yp in range(n):
                if yp != y:
                    Q[y, yp] = c * env.transition(x, y, yp)
            Q[y, y] = -Q[y].sum()
        return Q
    raise UnsupportedEnvironment(
        "stationary measure of a fast diffusion is out of scope")


def stationary_measure(env: EnvironmentSpec, x: np.ndarray | None = None,
                       t: float | None = None) -> Distribution:
    """Solve pi Q = 0, sum(pi) = 1 for the frozen-state generator."""
    Q = frozen_generator(env, x)
    n = Q.shape[0]
    if n == 1:
        return Distribution(weights=np.ones(1))
    _, s, vt = np.linalg.svd(Q.T)
    null_dim = int(np.sum(s < 1e-10 * max(s[0], 1.0)))
    if null_dim != 1:
        raise Reducible(f"stationary measure not unique (null dim {null_dim})")
    pi = vt[-1]
    pi = pi / pi.sum()
    if np.any(pi < -1e-10):
        raise Reducible("nullspace vector is not a probability vector")
    pi = np.clip(pi, 0.0, None)
    return Distribution(weights=pi / pi.sum())
