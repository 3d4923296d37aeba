import dataclasses

import numpy as np
import pytest

from langenv.coefficients import make_constant_field, make_linear_field
from langenv.config import (config_digest, load_config, load_preset,
                            model_from_dict)
from langenv.environment import FastDiffusion, MarkovSwitching, trivial_environment
from langenv.errors import (BadCorrelation, BadGenerator, DimensionMismatch,
                            MissingField, ModelValidationError,
                            NonpositiveFriction, ParseError, UnknownKey)
from langenv.model import ModelSpec, validate_model


def _spec(coeff, env=None, x0=None, x1=None):
    d = coeff.d
    return ModelSpec(coefficients=coeff,
                     environment=env or trivial_environment(),
                     x0=np.zeros(d) if x0 is None else x0,
                     x1=np.zeros(d) if x1 is None else x1)


def test_constant_model_with_two_state_generator_is_valid():
    spec = _spec(make_constant_field(),
                 env=MarkovSwitching(Q=[[-1.0, 1.0], [2.0, -2.0]]))
    vm = validate_model(spec)
    assert vm.lam_max == 1.0


def test_negative_friction_reported():
    coeff = dataclasses.replace(make_constant_field(),
                                friction=lambda t, x, e: -1.0, family=None)
    with pytest.raises(NonpositiveFriction):
        validate_model(_spec(coeff))


def test_bad_generator_row_sum():
    spec = _spec(make_constant_field(),
                 env=MarkovSwitching(Q=[[-1.0, 0.5], [2.0, -2.0]]))
    with pytest.raises(BadGenerator):
        validate_model(spec)


def test_dimension_mismatch_on_initial_data():
    spec = _spec(make_constant_field(), x0=np.zeros(3))
    with pytest.raises(DimensionMismatch):
        validate_model(spec)


def test_bad_correlation_in_diffusion_environment():
    env = FastDiffusion(l=1, n=1, F=lambda t, x, y: -y,
                        G=lambda t, x, y: np.eye(1),
                        sigma_corr=[[1.5]], y0=[0.0])
    with pytest.raises(BadCorrelation):
        validate_model(_spec(make_constant_field(), env=env))


def test_lipschitz_breach_is_caught():
    coeff = dataclasses.replace(
        make_linear_field(A=[[-3.0]]), lip_b=0.5, family=None)
    with pytest.raises(ModelValidationError) as err:
        validate_model(_spec(coeff))
    assert "LipschitzBound" in err.value.codes


def test_validation_collects_multiple_violations():
    coeff = dataclasses.replace(make_constant_field(), kappa0=-1.0, family=None)
    spec = _spec(coeff, env=MarkovSwitching(Q=[[-1.0, 0.5], [2.0, -2.0]]))
    with pytest.raises(ModelValidationError) as err:
        validate_model(spec)
    assert {"NonpositiveFriction", "BadGenerator"} <= set(err.value.codes)


# -- configuration files ----------------------------------------------------

def test_schilder_preset_shape():
    spec = load_preset("constant-schilder")
    fam = spec.coefficients.family
    assert (spec.coefficients.d, spec.coefficients.m) == (1, 1)
    assert fam.lam == 1.0 and fam.sig == 1.0
    assert np.all(fam.b_states == 0.0)
    assert spec.environment.n_states == 1


def test_averaging_preset_matches_worked_example():
    spec = load_preset("two-state-averaging")
    assert np.array_equal(spec.environment.Q, [[-1.0, 1.0], [2.0, -2.0]])
    assert np.array_equal(spec.coefficients.family.b_states,
                          [[3.0], [-3.0]])


def test_unknown_key_is_named(tmp_path):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("[coefficients]\nfamily = 'constant'\nlamda = 2.0\n"
                   "[environment]\nkind = 'trivial'\n")
    with pytest.raises(UnknownKey, match="lamda"):
        load_config(str(cfg))


def test_parse_error_reports_position(tmp_path):
    cfg = tmp_path / "broken.toml"
    cfg.write_text("[coefficients\nfamily = 'constant'\n")
    with pytest.raises(ParseError, match="line"):
        load_config(str(cfg))


def test_missing_section_reported():
    with pytest.raises(MissingField):
        model_from_dict({"coefficients": {"family": "constant"}})


def test_unknown_preset_lists_options():
    with pytest.raises(MissingField, match="constant-schilder"):
        load_config("no-such-preset")


def test_digest_is_stable():
    assert config_digest("jump-equiv") == config_digest("jump-equiv")
    assert config_digest("jump-equiv") != config_digest("fast-ou")


def test_one_over_eps_scaling_from_dict():
    spec = model_from_dict({
        "model": {"x1": [2.0], "x1_scaling": "one_over_eps"},
        "coefficients": {"family": "constant"},
        "environment": {"kind": "trivial"},
    })
    vm = validate_model(spec)
    assert np.allclose(vm.initial_momentum(0.5), [4.0])
    assert np.allclose(vm.initial_momentum(0.1), [20.0])
