"""Uniform time grids.

Nodes are always computed multiplicatively as ``t0 + k * dt`` so that node
``k`` carries no accumulated summation drift; every consumer indexes the same
float values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadInterval


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid on [t0, t_end] with n_steps steps (n_steps + 1 nodes)."""

    t0: float
    t_end: float
    n_steps: int

    def __post_init__(self):
        if not self.t_end > self.t0:
            raise BadInterval(f"t_end={self.t_end} must exceed t0={self.t0}")
        if self.n_steps < 1:
            raise BadInterval(f"n_steps={self.n_steps} must be >= 1")

    @property
    def dt(self) -> float:
        return (self.t_end - self.t0) / self.n_steps

    @property
    def n_nodes(self) -> int:
        return self.n_steps + 1

    def nodes(self) -> np.ndarray:
        return self.t0 + np.arange(self.n_steps + 1) * self.dt

    def node(self, k: int) -> float:
        return self.t0 + k * self.dt


def make_grid(t0: float, t_end: float, n_steps: int) -> TimeGrid:
    """Build a uniform grid; raises BadInterval on a degenerate request."""
    return TimeGrid(float(t0), float(t_end), int(n_steps))
