import numpy as np
import pytest

from langenv.errors import BadCorrelation
from langenv.grid import make_grid
from langenv.streams import (correlation_factor, sample_brownian_increments,
                             spawn_stream)

N_INDEP = 100_000
CORR_TOL = 4.0 / np.sqrt(N_INDEP)


def test_same_key_is_bit_identical():
    a = spawn_stream(7, 0).standard_normal(1000)
    b = spawn_stream(7, 0).standard_normal(1000)
    assert np.array_equal(a, b)


@pytest.mark.parametrize("other", [(7, 1), (8, 0)])
def test_distinct_streams_uncorrelated(other):
    x = spawn_stream(7, 0).standard_normal(N_INDEP)
    y = spawn_stream(*other).standard_normal(N_INDEP)
    assert abs(np.corrcoef(x, y)[0, 1]) < CORR_TOL


def test_lanes_do_not_overlap():
    base = spawn_stream(3, 4)
    x = base.child(1).standard_normal(N_INDEP)
    y = base.child(2).standard_normal(N_INDEP)
    assert abs(np.corrcoef(x, y)[0, 1]) < CORR_TOL


def test_split_draws_match_single_call():
    one = spawn_stream(5, 5).standard_normal(1200)
    g = spawn_stream(5, 5)
    parts = np.concatenate([g.standard_normal(100), g.standard_normal(500),
                            g.standard_normal(600)])
    assert np.array_equal(one, parts)


def test_brownian_marginal_variance():
    grid = make_grid(0, 100_000 * 0.25, 100_000)
    table = sample_brownian_increments(spawn_stream(1, 0), grid, m=1)
    var = table.dw[:, 0].var()
    assert 0.245 <= var <= 0.255


def test_perfect_correlation_duplicates_increments():
    grid = make_grid(0, 1, 512)
    table = sample_brownian_increments(spawn_stream(2, 0), grid, m=1, n=1,
                                       sigma=[[1.0]])
    assert np.max(np.abs(table.dw - table.dw_tilde)) < 1e-12


def test_half_correlation_empirical():
    grid = make_grid(0, 1, N_INDEP)
    table = sample_brownian_increments(spawn_stream(3, 0), grid, m=1, n=1,
                                       sigma=[[0.5]])
    rho = np.corrcoef(table.dw[:, 0], table.dw_tilde[:, 0])[0, 1]
    assert abs(rho - 0.5) < 0.013


def test_entry_outside_unit_interval_rejected():
    with pytest.raises(BadCorrelation):
        correlation_factor(1, 1, [[1.5]])


def test_joint_block_must_be_psd():
    # Two perfectly correlated pairs sharing one driver cannot coexist.
    with pytest.raises(BadCorrelation):
        correlation_factor(2, 2, [[1.0, 1.0], [1.0, 1.0]])


def test_factor_reproduces_schur_complement():
    sigma = np.array([[0.3, -0.2], [0.1, 0.6]])
    fac = correlation_factor(2, 2, sigma)
    assert np.allclose(fac @ fac.T, np.eye(2) - sigma.T @ sigma, atol=1e-12)
