"""Model registry: TOML configuration files and bundled presets.

A configuration names one built-in coefficient family with numeric
parameters and one environment variant; unknown keys are hard errors so a
typo never silently falls back to a default.  The models used by the
verification suite ship as named presets (``constant-schilder``,
``two-state-averaging``, ``jump-equiv``, ``fast-ou``) so experiment runs
never depend on hand-written files.
"""

from __future__ import annotations

import hashlib
import math
from importlib import resources

import numpy as np

try:
    import tomllib  # py >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .coefficients import (make_constant_field, make_double_well_field,
                           make_linear_field)
from .environment import (FastDiffusion, MarkovSwitching, StateDependentJump,
                          trivial_environment)
from .errors import MissingField, ParseError, UnknownKey
from .model import ModelSpec

PRESETS = ("constant-schilder", "two-state-averaging", "jump-equiv", "fast-ou")

_MODEL_KEYS = {"x0", "x1", "x1_scaling"}
_COEFF_KEYS = {"family", "d", "m", "lam", "sigma", "b", "A", "height",
               "env_coupling"}
_ENV_KEYS = {
    "trivial": {"kind"},
    "markov": {"kind", "Q", "y0"},
    "jump": {"kind", "c", "r", "zeta", "y0"},
    "diffusion": {"kind", "l", "n", "relax", "mean", "noise", "sigma_corr",
                  "y0_vec"},
}


def _check_keys(section: dict, allowed: set, where: str):
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise UnknownKey(f"unknown key(s) {unknown} in [{where}]; "
                         f"allowed: {sorted(allowed)}")


def _need(section: dict, key: str, where: str):
    if key not in section:
        raise MissingField(f"[{where}] requires key '{key}'")
    return section[key]


def _coefficients(section: dict):
    _check_keys(section, _COEFF_KEYS, "coefficients")
    family = _need(section, "family", "coefficients")
    d = int(section.get("d", 1))
    m = int(section.get("m", 1))
    lam = float(section.get("lam", 1.0))
    sigma = float(section.get("sigma", 1.0))
    b = section.get("b", 0.0)
    coupling = section.get("env_coupling")
    if family == "constant":
        return make_constant_field(d=d, m=m, lam=lam, sigma=sigma, b=b,
                                   env_coupling=coupling)
    if family == "linear":
        return make_linear_field(d=d, m=m, lam=lam, sigma=sigma,
                                 A=_need(section, "A", "coefficients"), b=b,
                                 env_coupling=coupling)
    if family == "double_well":
        return make_double_well_field(d=d, m=m, lam=lam, sigma=sigma,
                                      height=float(section.get("height", 1.0)),
                                      b=b)
    raise UnknownKey(f"unknown coefficient family '{family}'; expected "
                     f"constant, linear or double_well")


def _environment(section: dict, m: int):
    kind = _need(section, "kind", "environment")
    if kind not in _ENV_KEYS:
        raise UnknownKey(f"unknown environment kind '{kind}'; expected one "
                         f"of {sorted(_ENV_KEYS)}")
    _check_keys(section, _ENV_KEYS[kind], "environment")
    if kind == "trivial":
        return trivial_environment()
    if kind == "markov":
        return MarkovSwitching(Q=np.asarray(_need(section, "Q", "environment"),
                                            dtype=float),
                               y0=int(section.get("y0", 0)))
    if kind == "jump":
        c = np.asarray(_need(section, "c", "environment"), dtype=float)
        r = np.asarray(_need(section, "r", "environment"), dtype=float)
        zeta = float(section.get("zeta", float(c.max()) + 1.0))

        def intensity(x, y, c=c):
            return float(c[y])

        def transition(x, y, yp, r=r):
            return float(r[y, yp])

        return StateDependentJump(n_states=len(c), intensity=intensity,
                                  transition=transition, zeta=zeta,
                                  y0=int(section.get("y0", 0)))
    l = int(section.get("l", 1))
    n = int(section.get("n", 1))
    relax = float(section.get("relax", 1.0))
    mean = np.asarray(section.get("mean", [0.0] * l), dtype=float).reshape(l)
    noise = float(section.get("noise", math.sqrt(2.0)))
    sigma_corr = np.asarray(section.get("sigma_corr",
                                        np.zeros((m, n))), dtype=float)

    def F(t, x, y, relax=relax, mean=mean):
        return -relax * (y - mean)

    def G(t, x, y, noise=noise, l=l, n=n):
        return noise * np.eye(l, n)

    return FastDiffusion(l=l, n=n, F=F, G=G, sigma_corr=sigma_corr,
                         y0=np.asarray(section.get("y0_vec", [0.0] * l),
                                       dtype=float))


def model_from_dict(data: dict) -> ModelSpec:
    _check_keys(data, {"model", "coefficients", "environment"}, "top level")
    model = data.get("model", {})
    _check_keys(model, _MODEL_KEYS, "model")
    coeff_section = data.get("coefficients")
    if coeff_section is None:
        raise MissingField("config requires a [coefficients] section")
    env_section = data.get("environment")
    if env_section is None:
        raise MissingField("config requires an [environment] section")
    coeff = _coefficients(coeff_section)
    env = _environment(env_section, coeff.m)
    d = coeff.d
    x0 = np.asarray(model.get("x0", [0.0] * d), dtype=float)
    x1 = np.asarray(model.get("x1", [0.0] * d), dtype=float)
    scaling = model.get("x1_scaling", "fixed")
    if scaling not in ("fixed", "one_over_eps"):
        raise UnknownKey(f"x1_scaling must be 'fixed' or 'one_over_eps', "
                         f"got {scaling!r}")
    return ModelSpec(coefficients=coeff, environment=env, x0=x0, x1=x1,
                     x1_scaling=scaling)


def _read_toml(raw: bytes) -> dict:
    try:
        return tomllib.loads(raw.decode("utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"config is not valid TOML: {exc}") from exc


def load_preset(name: str) -> ModelSpec:
    raw = preset_bytes(name)
    return model_from_dict(_read_toml(raw))


def preset_bytes(name: str) -> bytes:
    if name not in PRESETS:
        raise MissingField(f"unknown preset '{name}'; bundled presets: "
                           f"{', '.join(PRESETS)}")
    return resources.files("langenv.presets").joinpath(f"{name}.toml").read_bytes()


def load_config(path_or_preset: str) -> ModelSpec:
    """Parse a config file path, or a bundled preset name."""
    if path_or_preset in PRESETS:
        return load_preset(path_or_preset)
    try:
        with open(path_or_preset, "rb") as fh:
            raw = fh.read()
    except FileNotFoundError:
        raise MissingField(f"no such config file or preset: {path_or_preset} "
                           f"(bundled presets: {', '.join(PRESETS)})")
    return model_from_dict(_read_toml(raw))


def config_digest(path_or_preset: str) -> str:
    """Content hash of the configuration bytes (reproducible)."""
    if path_or_preset in PRESETS:
        raw = preset_bytes(path_or_preset)
    else:
        with open(path_or_preset, "rb") as fh:
            raw = fh.read()
    return hashlib.sha256(raw).hexdigest()
