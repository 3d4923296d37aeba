"""Monte Carlo experiment harness: rare-event ladders, SK and scaling studies.

Replicas are pure functions of (master_seed, replica_id); chunks of replicas
run independently (optionally on a thread pool) and are reduced in fixed
replica order, so every study is bit-reproducible regardless of thread
count.  Probabilities carry 95% Wilson intervals, which stay honest at the
rare-event end where Wald intervals collapse.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .environment import MarkovSwitching
from .grid import TimeGrid
from .integrate import (SchemeConfig, compute_A_eps, compute_H_eps,
                        simulate_second_order, simulate_second_order_paths)
from .model import ValidatedModel
from .overdamped import Path, simulate_overdamped_paths
from .streams import spawn_stream

_Z95 = 1.959963984540054
_CHUNK_BYTES = 96e6


@dataclass(frozen=True)
class MCEstimate:
    """Hit-count estimate with a 95% Wilson interval and seed provenance."""

    n_replicas: int
    n_hits: int
    p_hat: float
    ci_low: float
    ci_high: float
    seed_provenance: tuple[int, tuple[int, int]]


def wilson_interval(n_hits: int, n: int, z: float = _Z95) -> tuple[float, float]:
    """95% Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise ValueError("need at least one trial")
    p = n_hits / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if n_hits == 0 else max(0.0, center - half)
    hi = 1.0 if n_hits == n else min(1.0, center + half)
    return lo, hi


def make_estimate(n_hits: int, n: int, master_seed: int,
                  replica_range: tuple[int, int]) -> MCEstimate:
    lo, hi = wilson_interval(n_hits, n)
    return MCEstimate(n_replicas=n, n_hits=n_hits, p_hat=n_hits / n,
                      ci_low=lo, ci_high=hi,
                      seed_provenance=(master_seed, replica_range))


# ---------------------------------------------------------------------------
# Path events
# ---------------------------------------------------------------------------

EventKind = Literal["sup_norm_exceeds", "sup_coord_exceeds",
                    "sup_dist_from_path_exceeds", "endpoint_in_halfspace"]


@dataclass(frozen=True)
class PathEvent:
    """Predicate on a node path, evaluated replica-wise.

    ``sup_norm_exceeds``: sup_t |X_t - x0| >= a (two-sided norm event).
    ``sup_coord_exceeds``: sup_t <e, X_t - x0> >= a, the one-sided level
    crossing whose exact Gaussian value the reflection principle gives.
    ``sup_dist_from_path_exceeds``: sup_t |X_t - ref_t| >= a.
    ``endpoint_in_halfspace``: <c, X_end> >= a.
    """

    kind: EventKind
    threshold: float
    applies_to: Literal["second_order", "overdamped"] = "overdamped"
    direction: np.ndarray | None = None
    reference: Path | None = None

    def __post_init__(self):
        if self.kind != "endpoint_in_halfspace" and not self.threshold > 0.0:
            raise ValueError("event threshold must be positive")
        if self.kind == "sup_dist_from_path_exceeds" and self.reference is None:
            raise ValueError("sup_dist_from_path_exceeds needs a reference path")

    def _dir(self, d: int) -> np.ndarray:
        if self.direction is None:
            e = np.zeros(d)
            e[0] = 1.0
            return e
        return np.asarray(self.direction, dtype=float)

    def evaluate(self, X: np.ndarray, x0: np.ndarray) -> np.ndarray:
        """Boolean hit vector for stacked node paths X of shape (R, K+1, d)."""
        if self.kind == "sup_norm_exceeds":
            dev = np.linalg.norm(X - x0[None, None, :], axis=2)
            return dev.max(axis=1) >= self.threshold
        if self.kind == "sup_coord_exceeds":
            e = self._dir(X.shape[2])
            # sup <e, X - x0> = sup <e, X> - <e, x0>; avoids temporaries
            level = self.threshold + float(x0 @ e)
            if X.shape[2] == 1:
                col = X[:, :, 0]
                if e[0] >= 0:
                    return e[0] * col.max(axis=1) >= level
                return e[0] * col.min(axis=1) >= level
            proj = X @ e
            return proj.max(axis=1) >= level
        if self.kind == "sup_dist_from_path_exceeds":
            ref = self.reference.values[None, :, :]
            dev = np.linalg.norm(X - ref, axis=2)
            return dev.max(axis=1) >= self.threshold
        proj = X[:, -1, :] @ self._dir(X.shape[2])
        return proj >= self.threshold


# ---------------------------------------------------------------------------
# Chunked replica execution
# ---------------------------------------------------------------------------

def _chunk_size(grid: TimeGrid, scheme: SchemeConfig, eps: float,
                second_order: bool) -> int:
    from .integrate import n_substeps
    per = grid.n_steps
    if second_order:
        per *= 3 * n_substeps(scheme.scheme, scheme.substep_factor, eps,
                              grid.dt, 1.0)
    return max(64, int(_CHUNK_BYTES / (8 * max(per, 1))))


def _map_chunks(n_replicas: int, chunk: int, threads: int, fn):
    """Apply fn(lo, hi) over replica chunks; results come back in order."""
    bounds = [(lo, min(lo + chunk, n_replicas))
              for lo in range(0, n_replicas, chunk)]
    if threads <= 1:
        return [fn(lo, hi) for lo, hi in bounds]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futs = [pool.submit(fn, lo, hi) for lo, hi in bounds]
        return [f.result() for f in futs]


def _paths_for(model: ValidatedModel, eps: float, grid: TimeGrid,
               master_seed: int, lo: int, hi: int, scheme: SchemeConfig,
               system: str) -> np.ndarray:
    if system == "second_order":
        X, _, _, _ = simulate_second_order_paths(model, eps, grid,
                                                 master_seed, lo, hi, scheme)
        return X
    return simulate_overdamped_paths(model, eps, grid, master_seed, lo, hi)


def estimate_event_probability(model: ValidatedModel, eps: float,
                               event: PathEvent, n_replicas: int,
                               master_seed: int, grid: TimeGrid,
                               scheme: SchemeConfig = SchemeConfig(),
                               threads: int = 1) -> MCEstimate:
    """Plain Monte Carlo probability of a path event with a Wilson interval."""
    x0 = model.spec.x0

    def chunk_hits(lo, hi):
        X = _paths_for(model, eps, grid, master_seed, lo, hi, scheme,
                       event.applies_to)
        return int(event.evaluate(X, x0).sum())

    chunk = _chunk_size(grid, scheme, eps, event.applies_to == "second_order")
    hits = sum(_map_chunks(n_replicas, chunk, threads, chunk_hits))
    return make_estimate(hits, n_replicas, master_seed, (0, n_replicas))


# ---------------------------------------------------------------------------
# epsilon-ladders
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RateLadderRow:
    eps: float
    estimate: MCEstimate
    eps_log_p: float            # nan when censored
    eps_log_ci: tuple[float, float]
    censored: bool


@dataclass
class RateLadder:
    rows: list[RateLadderRow] = field(default_factory=list)

    def eps_values(self):
        return [r.eps for r in self.rows]


def rate_ladder(model: ValidatedModel, event: PathEvent,
                eps_list: Sequence[float], n_replicas: int | Sequence[int],
                master_seed: int, grid: TimeGrid,
                scheme: SchemeConfig = SchemeConfig(),
                threads: int = 1) -> RateLadder:
    """One estimate per epsilon; rows with zero hits are flagged censored.

    ``n_replicas`` may be a single count or one count per epsilon (rare-event
    rows need more replicas than the bulk rows to stay uncensored).
    """
    eps_list = list(eps_list)
    if any(e2 >= e1 for e1, e2 in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be strictly decreasing")
    if isinstance(n_replicas, int):
        counts = [n_replicas] * len(eps_list)
    else:
        counts = list(n_replicas)
        if len(counts) != len(eps_list):
            raise ValueError("one replica count per epsilon required")
    ladder = RateLadder()
    for eps, n in zip(eps_list, counts):
        est = estimate_event_probability(model, eps, event, n, master_seed,
                                         grid, scheme, threads)
        censored = est.n_hits == 0
        eps_log_p = math.nan if censored else eps * math.log(est.p_hat)
        lo = math.nan if est.ci_low <= 0.0 else eps * math.log(est.ci_low)
        hi = math.nan if est.ci_high <= 0.0 else eps * math.log(est.ci_high)
        ladder.rows.append(RateLadderRow(eps=eps, estimate=est,
                                         eps_log_p=eps_log_p,
                                         eps_log_ci=(lo, hi),
                                         censored=censored))
    return ladder


# ---------------------------------------------------------------------------
# Smoluchowski-Kramers convergence study
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SKRow:
    eps: float
    median: float
    upper_quartile: float


@dataclass
class SKStudy:
    rows: list[SKRow]
    slope: float | None  # least-squares slope of log median vs log eps


def sk_convergence_study(model: ValidatedModel, eps_list: Sequence[float],
                         n_replicas: int, master_seed: int, grid: TimeGrid,
                         scheme: SchemeConfig = SchemeConfig(),
                         threads: int = 1) -> SKStudy:
    """Pathwise |X - q| sup distances under shared noise, per epsilon.

    The overdamped path of each replica consumes exactly the node-level
    w-increments recorded by that replica's second-order run, and the same
    environment lane, so the distance is a property of one probability
    space.
    """
    rows = []
    for eps in eps_list:
        def chunk_dists(lo, hi, eps=eps):
            X, _, W, _ = simulate_second_order_paths(model, eps, grid,
                                                     master_seed, lo, hi,
                                                     scheme)
            dW = np.diff(W, axis=1)
            Q = simulate_overdamped_paths(model, eps, grid, master_seed,
                                          lo, hi, shared_dW=dW)
            return np.linalg.norm(X - Q, axis=2).max(axis=1)

        chunk = _chunk_size(grid, scheme, eps, True)
        dists = np.concatenate(_map_chunks(n_replicas, chunk, threads,
                                           chunk_dists))
        rows.append(SKRow(eps=eps, median=float(np.median(dists)),
                          upper_quartile=float(np.quantile(dists, 0.75))))
    slope = None
    if len(rows) >= 2 and all(r.median > 0 for r in rows):
        slope = float(np.polyfit(np.log([r.eps for r in rows]),
                                 np.log([r.median for r in rows]), 1)[0])
    return SKStudy(rows=rows, slope=slope)


# ---------------------------------------------------------------------------
# Exponential-tightness diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TightnessRow:
    kind: Literal["norm", "modulus_sup", "modulus_union"]
    eps: float
    parameter: float            # L for norm rows, delta for modulus rows
    ell: float | None
    p_hat: float
    ci_low: float
    ci_high: float
    eps_log_p: float
    censored: bool


def tightness_diagnostics(model: ValidatedModel, eps_list: Sequence[float],
                          L_list: Sequence[float],
                          delta_list: Sequence[float], ell: float,
                          n_replicas: int, master_seed: int, grid: TimeGrid,
                          scheme: SchemeConfig = SchemeConfig(),
                          threads: int = 1) -> list[TightnessRow]:
    """Empirical Puhalskii criteria on the second-order paths.

    For each (eps, L): eps log P(sup_t |X_t| > L).  For each (eps, delta)
    and the given ell, two modulus readings are reported: the sup over
    window starts of the per-start probability (the criterion as displayed)
    and the union-over-windows probability (documented alternative).  Node
    paths lower-bound the continuous modulus.
    """
    dt = grid.dt
    K = grid.n_steps
    rows: list[TightnessRow] = []
    for eps in eps_list:
        def chunk_stats(lo, hi, eps=eps):
            X, _, _, _ = simulate_second_order_paths(model, eps, grid,
                                                     master_seed, lo, hi,
                                                     scheme)
            norms = np.linalg.norm(X, axis=2)          # (R, K+1)
            sup_norm = norms.max(axis=1)
            norm_hits = np.array([(sup_norm > L).sum() for L in L_list])
            per_start_hits = []
            union_hits = []
            for delta in delta_list:
                w_len = max(1, int(round(delta / dt)))
                n_starts = K + 1 - w_len
                hit_mat = np.zeros((hi - lo, n_starts), dtype=bool)
                for i in range(n_starts):
                    window = X[:, i + 1:i + w_len + 1, :] - X[:, i:i + 1, :]
                    mod = np.linalg.norm(window, axis=2).max(axis=1)
                    hit_mat[:, i] = mod > ell
                per_start_hits.append(hit_mat.sum(axis=0))
                union_hits.append(int(hit_mat.any(axis=1).sum()))
            return norm_hits, per_start_hits, union_hits

        chunk = _chunk_size(grid, scheme, eps, True)
        parts = _map_chunks(n_replicas, chunk, threads, chunk_stats)
        norm_hits = np.sum([p[0] for p in parts], axis=0)
        for L, hits in zip(L_list, norm_hits):
            rows.append(_tightness_row("norm", eps, L, None, int(hits),
                                       n_replicas))
        for j, delta in enumerate(delta_list):
            start_hits = np.sum([p[1][j] for p in parts], axis=0)
            union = int(np.sum([p[2][j] for p in parts]))
            # Criterion form: sup over starts, outside the probability.
            worst = int(start_hits.max()) if start_hits.size else 0
            rows.append(_tightness_row("modulus_sup", eps, delta, ell, worst,
                                       n_replicas))
            rows.append(_tightness_row("modulus_union", eps, delta, ell,
                                       union, n_replicas))
    return rows


def _tightness_row(kind, eps, parameter, ell, hits, n) -> TightnessRow:
    lo, hi = wilson_interval(hits, n)
    censored = hits == 0
    p = hits / n
    return TightnessRow(kind=kind, eps=eps, parameter=parameter, ell=ell,
                        p_hat=p, ci_low=lo, ci_high=hi,
                        eps_log_p=math.nan if censored else eps * math.log(p),
                        censored=censored)


# ---------------------------------------------------------------------------
# Stochastic-convolution scaling study
# ---------------------------------------------------------------------------

@dataclass
class HScalingStudy:
    rows: list[tuple[float, float]]      # (eps, median sup |H|)
    slope: float | None                  # None when any median vanishes


def _h_sup_norms(model: ValidatedModel, eps: float, grid: TimeGrid,
                 master_seed: int, lo: int, hi: int,
                 scheme: SchemeConfig) -> np.ndarray:
    fam = model.family
    if (fam is not None and model.d == 1 and model.m == 1
            and isinstance(model.environment, MarkovSwitching)):
        X, _, W, _ = simulate_second_order_paths(model, eps, grid,
                                                 master_seed, lo, hi, scheme)
        dW = np.diff(W[:, :, 0], axis=1)
        dA = fam.lam * grid.dt / eps ** 2
        rho = math.exp(-dA)
        amp = math.sqrt(eps) * fam.sig * math.exp(-dA / 2.0)
        H = np.zeros(hi - lo)
        sup = np.zeros(hi - lo)
        for k in range(grid.n_steps):
            H = rho * H + amp * dW[:, k]
            np.maximum(sup, np.abs(H), out=sup)
        return sup
    out = np.empty(hi - lo)
    for i, r in enumerate(range(lo, hi)):
        bundle = simulate_second_order(model, eps, grid,
                                       spawn_stream(master_seed, r), scheme)
        H = compute_H_eps(bundle, model, compute_A_eps(bundle, model))
        out[i] = np.max(np.linalg.norm(H, axis=1))
    return out


def h_eps_scaling_study(model: ValidatedModel, eps_list: Sequence[float],
                        n_replicas: int, master_seed: int, grid: TimeGrid,
                        scheme: SchemeConfig = SchemeConfig(),
                        threads: int = 1) -> HScalingStudy:
    """Median sup |H| per epsilon and the slope of its log-log fit.

    The slope is None (undefined) when fewer than two epsilons are given or
    any median vanishes (sigma = 0 runs).
    """
    rows = []
    for eps in eps_list:
        chunk = _chunk_size(grid, scheme, eps, True)
        sups = np.concatenate(_map_chunks(
            n_replicas, chunk, threads,
            lambda lo, hi, eps=eps: _h_sup_norms(model, eps, grid,
                                                 master_seed, lo, hi, scheme)))
        rows.append((eps, float(np.median(sups))))
    slope = None
    if len(rows) >= 2 and all(m > 0 for _, m in rows):
        slope = float(np.polyfit(np.log([e for e, _ in rows]),
                                 np.log([m for _, m in rows]), 1)[0])
    return HScalingStudy(rows=rows, slope=slope)
