"""CSV and run-manifest output.

Floats are written with ``repr`` (shortest round-trip form), so reruns with
the same seed produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
import time
from pathlib import Path as FSPath

import numpy as np

from .integrate import TrajectoryBundle


def _fmt(x) -> str:
    return repr(float(x))


def write_csv(path, header, rows) -> None:
    path = FSPath(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([v if isinstance(v, str) else _fmt(v)
                             for v in row])


def trajectory_header(d: int, m: int, env_dim: int,
                      diagnostics: bool) -> list[str]:
    header = ["t"]
    header += [f"X_{i + 1}" for i in range(d)]
    header += [f"p_{i + 1}" for i in range(d)]
    header += (["env"] if env_dim == 0
               else [f"env_{i + 1}" for i in range(env_dim)])
    header += [f"w_{i + 1}" for i in range(m)]
    if diagnostics:
        header += ["A_eps"]
        header += [f"H_{i + 1}" for i in range(d)]
        for r in range(1, 6):
            header += [f"R{r}_{i + 1}" for i in range(d)]
    return header


def write_trajectory_csv(path, bundle: TrajectoryBundle,
                         momentum: bool = True) -> None:
    """Node-path dump: t, X, p, env, w and the diagnostics when recorded."""
    d = bundle.X.shape[1]
    m = bundle.w.shape[1]
    env = np.asarray(bundle.env)
    env_dim = 0 if env.ndim == 1 else env.shape[1]
    diag = bundle.diagnostics
    header = trajectory_header(d, m, env_dim, diag is not None)
    if not momentum:
        header = [h for h in header if not h.startswith("p_")]
    ts = bundle.grid.nodes()
    rows = []
    for k, t in enumerate(ts):
        row = [t] + list(bundle.X[k])
        if momentum:
            row += list(bundle.p[k])
        row += ([str(int(env[k]))] if env_dim == 0 else list(env[k]))
        row += list(bundle.w[k])
        if diag is not None:
            row += [diag.A_eps[k]]
            row += list(diag.H_eps[k])
            for r in range(5):
                row += list(diag.R_components[r, k])
        rows.append(row)
    write_csv(path, header, rows)


def write_ladder_csv(path, ladder) -> None:
    header = ["eps", "n_replicas", "n_hits", "p_hat", "ci_low", "ci_high",
              "eps_log_p", "eps_log_ci_low", "eps_log_ci_high", "censored"]
    rows = []
    for row in ladder.rows:
        est = row.estimate
        rows.append([row.eps, est.n_replicas, est.n_hits, est.p_hat,
                     est.ci_low, est.ci_high, row.eps_log_p,
                     row.eps_log_ci[0], row.eps_log_ci[1],
                     "1" if row.censored else "0"])
    write_csv(path, header, rows)


def write_sk_csv(path, study) -> None:
    header = ["eps", "median_sk_distance", "upper_quartile"]
    write_csv(path, header, [[r.eps, r.median, r.upper_quartile]
                             for r in study.rows])


def write_tightness_csv(path, rows) -> None:
    header = ["kind", "eps", "parameter", "ell", "p_hat", "ci_low", "ci_high",
              "eps_log_p", "censored"]
    out = []
    for r in rows:
        out.append([r.kind, r.eps, r.parameter,
                    "" if r.ell is None else _fmt(r.ell), r.p_hat, r.ci_low,
                    r.ci_high, r.eps_log_p, "1" if r.censored else "0"])
    write_csv(path, header, out)


def write_hscaling_csv(path, study) -> None:
    header = ["eps", "median_sup_H"]
    write_csv(path, header, [[e, m] for e, m in study.rows])


def write_legendre_csv(path, rows) -> None:
    """Action/Legendre table: one row (t, x, gamma, L) per path segment."""
    header = ["t", "x", "gamma", "L"]
    write_csv(path, header, rows)


def write_path_csv(path, grid, values, name: str = "phi") -> None:
    d = values.shape[1]
    header = ["t"] + [f"{name}_{i + 1}" for i in range(d)]
    write_csv(path, header,
              [[t] + list(v) for t, v in zip(grid.nodes(), values)])


def write_manifest(outdir, command: str, *, config: str | None,
                   digest: str | None, master_seed: int | None, grid,
                   scheme: str | None, eps_values, outputs,
                   started: float, error: str | None = None) -> FSPath:
    """JSON run manifest; written on success and on failure alike."""
    outdir = FSPath(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    from . import __version__
    data = {
        "command": command,
        "config": config,
        "config_digest": digest,
        "master_seed": master_seed,
        "grid": None if grid is None else {"t0": grid.t0, "t_end": grid.t_end,
                                           "n_steps": grid.n_steps},
        "scheme": scheme,
        "eps": list(eps_values) if eps_values is not None else None,
        "outputs": [str(p) for p in outputs],
        "started_unix": started,
        "finished_unix": time.time(),
        "wall_seconds": time.time() - started,
        "library_version": __version__,
        "error": error,
    }
    path = outdir / "manifest.json"
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
