"""Model assembly and probe-lattice validation.

Coefficients are opaque callables, so the validator cannot prove the
regularity assumptions symbolically; instead it spot-checks them on a
deterministic lattice (by default 64 points per axis over a configured box,
thinned for higher dimensions) and reports every violated invariant at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .coefficients import CoefficientField, FamilyInfo
from .environment import (EnvironmentSpec, FastDiffusion, MarkovSwitching,
                          StateDependentJump)
from .errors import (BadCorrelation, BadGenerator, DimensionMismatch,
                     ModelValidationError, NonpositiveFriction)
from .streams import correlation_factor

_EPS_PROBES = (1.0, 0.5, 0.1, 0.0)


@dataclass(frozen=True)
class ModelSpec:
    """Full problem description handed to the simulators."""

    coefficients: CoefficientField
    environment: EnvironmentSpec
    x0: np.ndarray
    x1: np.ndarray
    x1_scaling: Literal["fixed", "one_over_eps"] = "fixed"

    def __post_init__(self):
        object.__setattr__(self, "x0", np.atleast_1d(np.asarray(self.x0, float)))
        object.__setattr__(self, "x1", np.atleast_1d(np.asarray(self.x1, float)))


@dataclass(frozen=True)
class ValidatedModel:
    """Validation handle: the spec plus probe-derived bounds.

    ``lam_max`` feeds the Euler substep size; ``report`` keeps the list of
    checks that ran (useful for the CLI's env-check command).
    """

    spec: ModelSpec
    lam_max: float
    report: tuple[str, ...] = field(default=())

    @property
    def d(self) -> int:
        return self.spec.coefficients.d

    @property
    def m(self) -> int:
        return self.spec.coefficients.m

    @property
    def coefficients(self) -> CoefficientField:
        return self.spec.coefficients

    @property
    def environment(self) -> EnvironmentSpec:
        return self.spec.environment

    @property
    def family(self) -> FamilyInfo | None:
        return self.spec.coefficients.family

    def initial_momentum(self, eps: float) -> np.ndarray:
        if self.spec.x1_scaling == "one_over_eps":
            return self.spec.x1 / eps
        return self.spec.x1


def _probe_axes(d: int, box: tuple[float, float], t_max: float,
                points_per_axis: int):
    # Keep the total lattice size near points_per_axis**2 regardless of d.
    n_ax = points_per_axis if d <= 1 else max(
        4, int(round(points_per_axis ** (2.0 / (d + 1)))))
    ts = np.linspace(0.0, t_max, n_ax)
    axes = [np.linspace(box[0], box[1], n_ax) for _ in range(d)]
    mesh = np.meshgrid(*axes, indexing="ij") if d else []
    xs = np.stack([g.ravel() for g in mesh], axis=-1)
    return ts, xs


def _env_probe_values(env: EnvironmentSpec):
    if isinstance(env, FastDiffusion):
        return [env.y0]
    n = env.n_states
    return list(range(n))


def validate_model(spec: ModelSpec, box: tuple[float, float] = (-2.0, 2.0),
                   t_max: float = 1.0,
                   points_per_axis: int = 64) -> ValidatedModel:
    """Check every type invariant on the probe lattice.

    Returns a :class:`ValidatedModel` if everything passes, otherwise raises
    a :class:`~langenv.errors.ModelValidationError` whose ``violations``
    list names every failed invariant.
    """
    coeff = spec.coefficients
    env = spec.environment
    violations: list[tuple[str, str]] = []
    report: list[str] = []

    d, m = coeff.d, coeff.m
    if spec.x0.shape != (d,):
        violations.append(("DimensionMismatch",
                           f"x0 has shape {spec.x0.shape}, expected ({d},)"))
    if spec.x1.shape != (d,):
        violations.append(("DimensionMismatch",
                           f"x1 has shape {spec.x1.shape}, expected ({d},)"))

    if coeff.kappa0 <= 0.0:
        violations.append(("NonpositiveFriction",
                           f"kappa0 = {coeff.kappa0} must be positive"))

    ts, xs = _probe_axes(d, box, t_max, points_per_axis)
    env_values = _env_probe_values(env)

    lam_max = -np.inf
    lam_min = np.inf
    shape_ok = True
    probe_x = xs[:: max(1, len(xs) // 64)]  # drift/diffusion probes are pricier
    for t in ts[:: max(1, len(ts) // 8)]:
        for x in probe_x:
            for e in _EPS_PROBES:
                lam = float(coeff.friction(t, x, e))
                lam_max = max(lam_max, lam)
                lam_min = min(lam_min, lam)
            sig = np.asarray(coeff.diffusion(t, x, _EPS_PROBES[0]), float)
            if sig.shape != (d, m):
                shape_ok = False
            b = np.asarray(coeff.drift(t, x, env_values[0]), float)
            if b.shape != (d,):
                shape_ok = False
    # Dense friction sweep on the full lattice at a representative time.
    for x in xs:
        for e in _EPS_PROBES:
            lam = float(coeff.friction(t_max / 2.0, x, e))
            lam_max = max(lam_max, lam)
            lam_min = min(lam_min, lam)
    if not shape_ok:
        violations.append(("DimensionMismatch",
                           f"drift/diffusion output does not match d={d}, m={m}"))
    if lam_min < coeff.kappa0 - 1e-12:
        violations.append(("NonpositiveFriction",
                           f"friction {lam_min:.6g} below kappa0 = {coeff.kappa0}"))
    report.append(f"friction range [{lam_min:.6g}, {lam_max:.6g}] on "
                  f"{len(xs)} x-probes")

    # Lipschitz spot check on adjacent lattice pairs.
    if shape_ok and len(xs) > 1 and not violations:
        worst = 0.0
        step = max(1, len(xs) // 64)
        for i in range(0, len(xs) - step, step):
            x1p, x2p = xs[i], xs[i + step]
            gap = float(np.linalg.norm(x2p - x1p))
            if gap == 0.0:
                continue
            for e in env_values:
                df = np.linalg.norm(
                    np.asarray(coeff.drift(0.0, x2p, e), float)
                    - np.asarray(coeff.drift(0.0, x1p, e), float))
                worst = max(worst, df / gap)
        if worst > coeff.lip_b * (1.0 + 1e-9) + 1e-9:
            violations.append(("LipschitzBound",
                               f"drift slope {worst:.6g} exceeds lip_b = "
                               f"{coeff.lip_b}"))
        report.append(f"max drift slope on probes {worst:.6g} "
                      f"(declared {coeff.lip_b})")

    # Diffusion norm bounds (only meaningful square).
    if shape_ok and d == m and not violations:
        s_hi, s_inv_hi = coeff.sigma_bounds
        for x in probe_x[:: max(1, len(probe_x) // 16)]:
            sig = np.asarray(coeff.diffusion(0.0, x, 0.0), float)
            if np.linalg.norm(sig) > s_hi * (1 + 1e-9) + 1e-12:
                violations.append(("SigmaBound", "sigma norm above bound"))
                break
            if s_inv_hi < np.inf:
                try:
                    inv = np.linalg.inv(sig)
                    if np.linalg.norm(inv) > s_inv_hi * (1 + 1e-9) + 1e-12:
                        violations.append(("SigmaBound",
                                           "sigma inverse norm above bound"))
                        break
                except np.linalg.LinAlgError:
                    violations.append(("SigmaBound", "sigma not invertible"))
                    break

    # Environment-specific invariants.
    if isinstance(env, MarkovSwitching):
        Q = env.Q
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            violations.append(("BadGenerator", f"Q has shape {Q.shape}"))
        else:
            rows = np.abs(Q.sum(axis=1))
            if rows.max() > 1e-12:
                violations.append(("BadGenerator",
                                   f"row sums up to {rows.max():.3e} != 0"))
            off = Q - np.diag(np.diag(Q))
            if off.min() < -1e-12:
                violations.append(("BadGenerator",
                                   "negative off-diagonal entries"))
            if not (0 <= env.y0 < Q.shape[0]):
                violations.append(("BadGenerator", f"y0 = {env.y0} out of range"))
        report.append(f"markov generator {Q.shape} checked")
    elif isinstance(env, StateDependentJump):
        sup_c = 0.0
        for x in probe_x[:: max(1, len(probe_x) // 16)]:
            for y in range(env.n_states):
                c = float(env.intensity(x, y))
                if c < 0:
                    violations.append(("BadGenerator",
                                       f"negative intensity at state {y}"))
                sup_c = max(sup_c, c)
                tot = 0.0
                for yp in range(env.n_states):
                    r = float(env.transition(x, y, yp))
                    if yp == y and abs(r) > 1e-12:
                        violations.append(("BadGenerator",
                                           f"r({y},{y}) = {r} != 0"))
                    tot += r
                if abs(tot - 1.0) > 1e-9:
                    violations.append(("BadGenerator",
                                       f"transition row {y} sums to {tot}"))
        if env.zeta < sup_c + 1.0 - 1e-9:
            violations.append(("BadGenerator",
                               f"zeta = {env.zeta} below sup c + 1 = {sup_c + 1}"))
        report.append(f"jump spec checked, sup probe intensity {sup_c:.6g}")
    elif isinstance(env, FastDiffusion):
        try:
            correlation_factor(m, env.n, env.sigma_corr)
        except BadCorrelation as exc:
            violations.append(("BadCorrelation", str(exc)))
        y = env.y0
        try:
            f = np.asarray(env.F(0.0, spec.x0, y), float)
            g = np.asarray(env.G(0.0, spec.x0, y), float)
            if f.shape != (env.l,) or g.shape != (env.l, env.n):
                violations.append(("DimensionMismatch",
                                   "F or G output shape mismatch"))
        except Exception as exc:  # malformed user callables
            violations.append(("DimensionMismatch", f"F/G evaluation failed: {exc}"))
        report.append("fast-diffusion spec checked")

    if violations:
        codes = {c for c, _ in violations}
        klass = {("NonpositiveFriction",): NonpositiveFriction,
                 ("BadGenerator",): BadGenerator,
                 ("BadCorrelation",): BadCorrelation,
                 ("DimensionMismatch",): DimensionMismatch}.get(
            tuple(sorted(codes)), ModelValidationError)
        raise klass(violations)
    return ValidatedModel(spec=spec, lam_max=float(lam_max), report=tuple(report))
