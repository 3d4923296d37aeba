import pytest

from langenv.config import load_preset
from langenv.model import validate_model


@pytest.fixture(scope="session")
def constant_model():
    return validate_model(load_preset("constant-schilder"))


@pytest.fixture(scope="session")
def two_state_model():
    return validate_model(load_preset("two-state-averaging"))


@pytest.fixture(scope="session")
def jump_model():
    return validate_model(load_preset("jump-equiv"))


@pytest.fixture(scope="session")
def fast_ou_model():
    return validate_model(load_preset("fast-ou"))
