"""Counter-based random-number streams and correlated Brownian increments.

Every replica of every experiment draws from a Philox4x64 generator keyed by
``(master_seed, replica_id)``.  Because the key fully determines the stream,
results are reproducible independently of execution order: replica k produces
the same numbers whether it runs first, last, or on another thread.

A stream owns several non-overlapping *lanes* (Philox counter offsets), so
that e.g. environment jumps and driving noise never compete for the same
draws; re-simulating the environment lane reproduces the identical
environment realization regardless of how much driving noise was consumed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BadCorrelation
from .grid import TimeGrid

# Lane allocation; lane 0 is left to the stream's owner, the simulators
# derive the lanes below. Each lane has 2^128 draws of headroom.
LANE_NOISE = 1
LANE_ENV = 2

_MASK64 = (1 << 64) - 1


@dataclass
class NoiseStream:
    """A reproducible Philox stream identified by (master_seed, replica_id).

    ``counter`` selects the lane: streams with equal seed/replica but
    different counters are non-overlapping sections of the same key's
    counter space.
    """

    master_seed: int
    replica_id: int
    counter: int = 0
    _gen: np.random.Generator | None = field(default=None, repr=False)

    @property
    def generator(self) -> np.random.Generator:
        if self._gen is None:
            key = np.array([self.master_seed & _MASK64,
                            self.replica_id & _MASK64], dtype=np.uint64)
            ctr = np.array([0, 0, self.counter & _MASK64, 0], dtype=np.uint64)
            self._gen = np.random.Generator(np.random.Philox(key=key, counter=ctr))
        return self._gen

    def child(self, lane: int) -> "NoiseStream":
        """Fresh stream on another lane of the same (seed, replica) key."""
        return NoiseStream(self.master_seed, self.replica_id, lane)

    # Thin draw helpers so callers never touch the generator layout.
    def standard_normal(self, shape=None):
        return self.generator.standard_normal() if shape is None \
            else self.generator.standard_normal(shape)

    def exponential(self, scale=1.0, size=None):
        return self.generator.exponential(scale, size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.generator.uniform(low, high, size)


def spawn_stream(master_seed: int, replica_id: int) -> NoiseStream:
    """Stream for one replica; a pure function of its arguments."""
    return NoiseStream(int(master_seed), int(replica_id))


def batch_standard_normals(master_seed: int, replica_lo: int, lane: int,
                           out: np.ndarray) -> None:
    """Fill ``out[i]`` with the draws of spawn_stream(seed, lo + i).child(lane).

    Bit-identical to per-stream generation (one Philox is re-keyed through
    its state instead of constructed per replica, which is what makes
    million-replica studies affordable).
    """
    bg = np.random.Philox(key=np.zeros(2, dtype=np.uint64))
    gen = np.random.Generator(bg)
    buffer = np.zeros(4, dtype=np.uint64)
    counter = np.array([0, 0, lane & _MASK64, 0], dtype=np.uint64)
    ms = master_seed & _MASK64
    for i in range(out.shape[0]):
        bg.state = {"bit_generator": "Philox",
                    "state": {"counter": counter,
                              "key": np.array([ms, (replica_lo + i) & _MASK64],
                                              dtype=np.uint64)},
                    "buffer": buffer, "buffer_pos": 4,
                    "has_uint32": 0, "uinteger": 0}
        gen.standard_normal(out=out[i])


@dataclass(frozen=True)
class IncrementTable:
    """Per-step Brownian increments; dw is (n_steps, m), dw_tilde (n_steps, n)."""

    dw: np.ndarray
    dw_tilde: np.ndarray


def correlation_factor(m: int, n: int, sigma) -> np.ndarray:
    """Lower-triangular-style factor M with M M^T = I_n - Sigma^T Sigma.

    The joint (m+n) covariance [[I, Sigma], [Sigma^T, I]] is realized
    blockwise: w-increments are raw normals, w-tilde increments are
    Sigma^T z_w + M z_tilde.  Raises BadCorrelation when the joint block is
    not positive semidefinite or an entry leaves [-1, 1].
    """
    if n == 0:
        return np.zeros((0, 0))
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (m, n):
        raise BadCorrelation(f"Sigma shape {sigma.shape} != ({m}, {n})")
    if np.any(np.abs(sigma) > 1.0 + 1e-12):
        raise BadCorrelation("correlation entries must lie in [-1, 1]")
    schur = np.eye(n) - sigma.T @ sigma
    try:
        return np.linalg.cholesky(schur)
    except np.linalg.LinAlgError:
        # Semi-definite case (e.g. perfectly correlated components).
        vals, vecs = np.linalg.eigh(schur)
        if vals.min() < -1e-10:
            raise BadCorrelation(
                f"joint covariance not PSD (min eigenvalue {vals.min():.3e})")
        return vecs @ np.diag(np.sqrt(np.clip(vals, 0.0, None)))


def sample_brownian_increments(stream: NoiseStream, grid: TimeGrid,
                               m: int, n: int = 0,
                               sigma=None) -> IncrementTable:
    """Jointly Gaussian (w, w-tilde) increments over the grid steps.

    Each marginal increment is N(0, dt); the cross-covariance between
    w-component i and w-tilde component j is Sigma_ij * dt.
    """
    if sigma is None:
        sigma = np.zeros((m, n))
    fac = correlation_factor(m, n, sigma)
    sigma = np.asarray(sigma, dtype=float)
    z = stream.standard_normal((grid.n_steps, m + n))
    sqdt = np.sqrt(grid.dt)
    dw = sqdt * z[:, :m]
    if n:
        dw_tilde = sqdt * (z[:, :m] @ sigma + z[:, m:] @ fac.T)
    else:
        dw_tilde = np.zeros((grid.n_steps, 0))
    return IncrementTable(dw=dw, dw_tilde=dw_tilde)
