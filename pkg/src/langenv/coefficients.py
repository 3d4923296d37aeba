"""Coefficient fields: drift, friction and diffusion of the second-order model.

A :class:`CoefficientField` bundles the three coefficient callables together
with the regularity metadata the validator spot-checks (uniform friction
lower bound, drift Lipschitz constant, diffusion norm bounds).  Coefficients
are opaque callables as far as the integrators are concerned; the built-in
families (``constant``, ``linear``, ``double_well``) additionally carry a
numeric descriptor that lets eligible simulations run on the batch kernels.

Conventions:

* ``drift(t, x, env_value) -> (d,)`` where ``env_value`` is an integer label
  for discrete environments or an ``(l,)`` vector for diffusion environments.
* ``friction(t, x, eps) -> float``; ``diffusion(t, x, eps) -> (d, m)``.
* The zero-noise-size member of the family is obtained with ``eps = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

FAMILY_CONSTANT = 0
FAMILY_LINEAR = 1
FAMILY_DOUBLE_WELL = 2

_FAMILY_CODES = {"constant": FAMILY_CONSTANT,
                 "linear": FAMILY_LINEAR,
                 "double_well": FAMILY_DOUBLE_WELL}


@dataclass(frozen=True)
class FamilyInfo:
    """Numeric description of a built-in coefficient family.

    ``b_states`` has one row per environment label (a single row when the
    drift ignores the label).  ``env_coupling`` adds ``coupling . y`` to the
    drift for vector-valued (diffusion) environments.
    """

    name: str
    lam: float
    sig: float
    b_states: np.ndarray            # (n_rows, d)
    lin_a: np.ndarray | None = None  # (d, d), linear family only
    height: float = 0.0              # double-well family only
    env_coupling: np.ndarray | None = None  # (d, l) or None

    @property
    def code(self) -> int:
        return _FAMILY_CODES[self.name]


@dataclass(frozen=True)
class CoefficientField:
    """Drift/friction/diffusion callables plus regularity metadata."""

    d: int
    m: int
    drift: Callable[[float, np.ndarray, object], np.ndarray]
    friction: Callable[[float, np.ndarray, float], float]
    diffusion: Callable[[float, np.ndarray, float], np.ndarray]
    kappa0: float
    lip_b: float
    sigma_bounds: tuple[float, float]
    family: FamilyInfo | None = field(default=None)


def _state_rows(b, d: int) -> np.ndarray:
    """Normalize the drift parameter to an (n_rows, d) array of offsets."""
    arr = np.atleast_1d(np.asarray(b, dtype=float))
    if arr.ndim == 1:
        if arr.size == 1:
            arr = np.full((1, d), float(arr[0]))
        elif arr.size == d:
            arr = arr[None, :]
        elif d == 1:
            arr = arr[:, None]  # one scalar per environment state
        else:
            raise ValueError(f"drift parameter of size {arr.size} does not "
                             f"match d={d}")
    if arr.shape[1] != d:
        raise ValueError(f"drift rows have dimension {arr.shape[1]} != d={d}")
    return arr


def _offset_for(b_states: np.ndarray, env_coupling, env_value) -> np.ndarray:
    if env_value is None:
        return b_states[0]
    if np.isscalar(env_value) or getattr(env_value, "ndim", 1) == 0:
        idx = int(env_value)
        return b_states[idx if b_states.shape[0] > 1 else 0]
    out = b_states[0]
    if env_coupling is not None:
        out = out + env_coupling @ np.asarray(env_value, dtype=float)
    return out


def _build(name: str, d: int, m: int, lam: float, sigma: float, b,
           lin_a=None, height: float = 0.0, env_coupling=None,
           lip_extra: float = 0.0, box_halfwidth: float = 2.0,
           kappa0: float | None = None) -> CoefficientField:
    b_states = _state_rows(b, d)
    a_mat = None if lin_a is None else np.asarray(lin_a, dtype=float).reshape(d, d)
    coup = None
    if env_coupling is not None:
        coup = np.atleast_1d(np.asarray(env_coupling, dtype=float))
        if coup.ndim == 1:
            coup = np.diag(coup) if coup.size == d else coup.reshape(d, -1)
    fam = FamilyInfo(name=name, lam=float(lam), sig=float(sigma),
                     b_states=b_states, lin_a=a_mat, height=float(height),
                     env_coupling=coup)
    sig_mat = float(sigma) * np.eye(d, m)

    def drift(t, x, env_value):
        base = _offset_for(b_states, coup, env_value)
        if a_mat is not None:
            base = base + a_mat @ x
        if height:
            r2 = float(np.dot(x, x))
            base = base - 4.0 * height * (r2 - 1.0) * x
        return np.asarray(base, dtype=float)

    def friction(t, x, eps):
        return float(lam)

    def diffusion(t, x, eps):
        return sig_mat

    if sigma != 0.0 and d == m:
        s_hi = abs(float(sigma)) * np.sqrt(d)
        s_inv = np.sqrt(d) / abs(float(sigma))
    else:
        s_hi, s_inv = float(np.linalg.norm(sig_mat)), np.inf
    return CoefficientField(
        d=d, m=m, drift=drift, friction=friction, diffusion=diffusion,
        kappa0=float(lam) if kappa0 is None else float(kappa0),
        lip_b=lip_extra, sigma_bounds=(s_hi, s_inv), family=fam)


def make_constant_field(d: int = 1, m: int = 1, lam: float = 1.0,
                        sigma: float = 1.0, b=0.0,
                        env_coupling=None) -> CoefficientField:
    """Constant drift (optionally per environment state), constant lam/sigma."""
    lip = 0.0 if env_coupling is None else 0.0
    return _build("constant", d, m, lam, sigma, b,
                  env_coupling=env_coupling, lip_extra=lip)


def make_linear_field(d: int = 1, m: int = 1, lam: float = 1.0,
                      sigma: float = 1.0, A=None, b=0.0,
                      env_coupling=None) -> CoefficientField:
    """Drift A x + b_state; Lipschitz constant is the spectral norm of A."""
    a_mat = np.zeros((d, d)) if A is None else np.asarray(A, dtype=float).reshape(d, d)
    lip = float(np.linalg.norm(a_mat, 2))
    return _build("linear", d, m, lam, sigma, b, lin_a=a_mat,
                  env_coupling=env_coupling, lip_extra=lip)


def make_double_well_field(d: int = 1, m: int = 1, lam: float = 1.0,
                           sigma: float = 1.0, height: float = 1.0, b=0.0,
                           box_halfwidth: float = 2.0) -> CoefficientField:
    """Gradient drift b = -grad V with V(x) = height * (|x|^2 - 1)^2.

    The Lipschitz metadata is the gradient bound on the validation box
    [-box_halfwidth, box_halfwidth]^d; outside that box the cubic growth
    exceeds any global constant, which is why the box is part of the field.
    """
    r2 = d * box_halfwidth ** 2
    lip = 4.0 * abs(height) * (3.0 * r2 + 1.0)
    return _build("double_well", d, m, lam, sigma, b, height=height,
                  lip_extra=lip, box_halfwidth=box_halfwidth)
