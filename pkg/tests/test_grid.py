import numpy as np
import pytest
from hypothesis import given, strategies as st

from langenv.errors import BadInterval
from langenv.grid import make_grid


def test_unit_interval_nodes():
    grid = make_grid(0, 1, 4)
    assert np.array_equal(grid.nodes(), [0.0, 0.25, 0.5, 0.75, 1.0])


def test_zero_steps_rejected():
    with pytest.raises(BadInterval):
        make_grid(0, 1, 0)


def test_empty_interval_rejected():
    with pytest.raises(BadInterval):
        make_grid(1.0, 1.0, 5)


def test_last_node_exact():
    grid = make_grid(0, 2, 8)
    assert grid.dt == 0.25
    assert grid.node(8) == 2.0


@given(t0=st.floats(-10, 10), span=st.floats(0.1, 20),
       n=st.integers(1, 500))
def test_nodes_have_no_accumulation_drift(t0, span, n):
    grid = make_grid(t0, t0 + span, n)
    nodes = grid.nodes()
    expected = t0 + np.arange(n + 1) * grid.dt
    assert np.max(np.abs(nodes - expected)) == 0.0
