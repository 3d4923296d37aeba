"""Command-line front end.

Every run writes its artifacts plus a JSON manifest (command line, config
digest, seeds, grid, timing) into the output directory, so results are
attributable to their exact inputs.  Exit codes: 0 success, 1 model or
configuration error, 2 usage error.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path as FSPath

import numpy as np

from . import io
from .config import config_digest, load_config
from .errors import LangenvError
from .grid import make_grid
from .integrate import SchemeConfig, simulate_second_order
from .lab import (PathEvent, h_eps_scaling_study, rate_ladder,
                  sk_convergence_study, tightness_diagnostics)
from .model import validate_model
from .overdamped import (Path, simulate_overdamped_bundle,
                         solve_averaged_ode)
from .rates import RateModel, action, h_functional, minimize_action
from .streams import spawn_stream


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default="constant-schilder",
                        help="config file path or bundled preset name")
    common.add_argument("--seed", type=int, default=0, help="master seed")
    common.add_argument("--eps", default="0.2",
                        help="comma-separated epsilon list (decreasing)")
    common.add_argument("--steps", type=int, default=200,
                        help="time grid steps on [0, 1]")
    common.add_argument("--t-end", type=float, default=1.0,
                        help="horizon (grid is [0, t_end])")
    common.add_argument("--scheme", choices=["euler", "exponential"],
                        default="exponential")
    common.add_argument("--substep-factor", type=float, default=0.5)
    common.add_argument("--replicas", type=int, default=100)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--out", default=None,
                        help="output directory (default $LANGENV_OUT or "
                             "./langenv-out)")
    common.add_argument("--diagnostics", action="store_true",
                        help="record A, H and remainder components")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog="langenv",
        description="Langevin dynamics in random environments: simulation, "
                    "rate functions, rare-event studies.")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("simulate", parents=[common],
                   help="second-order trajectories, one CSV per replica")
    sub.add_parser("overdamped", parents=[common],
                   help="overdamped trajectories, one CSV per replica")
    sub.add_parser("averaged", parents=[common],
                   help="deterministic averaged path")
    sub.add_parser("sk-compare", parents=[common],
                   help="shared-noise inertial/overdamped distance study")
    p = sub.add_parser("rate-ladder", parents=[common],
                       help="rare-event probability ladder over epsilon")
    p.add_argument("--threshold", type=float, default=1.0)
    p.add_argument("--event", default="sup_coord_exceeds",
                   choices=["sup_coord_exceeds", "sup_norm_exceeds",
                            "endpoint_in_halfspace"])
    p.add_argument("--system", default="overdamped",
                   choices=["overdamped", "second_order"])
    p = sub.add_parser("tightness", parents=[common],
                       help="empirical exponential-tightness diagnostics")
    p.add_argument("--levels", default="1,2,4",
                   help="comma-separated norm levels L")
    p.add_argument("--windows", default="0.05,0.1",
                   help="comma-separated window widths delta")
    p.add_argument("--ell", type=float, default=0.5)
    sub.add_parser("h-scaling", parents=[common],
                   help="stochastic-convolution sup-norm scaling study")
    p = sub.add_parser("h-functional", parents=[common],
                       help="print the tilted-generator principal eigenvalue")
    p.add_argument("--Q", required=True,
                   help="generator rows, e.g. '[[-1,1],[2,-2]]'")
    p.add_argument("--g", required=True, help="tilt vector, e.g. '[1,0]'")
    p = sub.add_parser("action", parents=[common],
                       help="action integral of a path CSV (columns t, phi_*)")
    p.add_argument("--path", required=True)
    p = sub.add_parser("min-action", parents=[common],
                       help="least-action path between endpoints")
    p.add_argument("--start", default="0.0", help="comma-separated start point")
    p.add_argument("--end", default="1.0", help="comma-separated end point")
    p.add_argument("--segments", type=int, default=16)
    sub.add_parser("env-check", parents=[common],
                   help="validate the model and print the report")
    return parser


def _parse_floats(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok.strip()]


def _outdir(args) -> FSPath:
    out = args.out or os.environ.get("LANGENV_OUT") or "langenv-out"
    return FSPath(out)


def _scheme(args) -> SchemeConfig:
    return SchemeConfig(scheme=args.scheme,
                        substep_factor=args.substep_factor,
                        record_diagnostics=args.diagnostics)


def _run(args) -> tuple[list, str | None]:
    """Execute one subcommand; returns (output paths, error)."""
    outdir = _outdir(args)
    outputs: list = []
    eps_list = _parse_floats(args.eps)
    grid = make_grid(0.0, args.t_end, args.steps)

    if args.command == "h-functional":
        import json
        Q = np.asarray(json.loads(args.Q), dtype=float)
        g = np.asarray(json.loads(args.g), dtype=float)
        print(f"{h_functional(Q, g):.7f}")
        return outputs, None

    model = validate_model(load_config(args.config))
    scheme = _scheme(args)

    if args.command == "env-check":
        print(f"model '{args.config}': valid")
        for line in model.report:
            print(f"  {line}")
        return outputs, None

    if args.command == "simulate":
        eps = eps_list[0]
        for r in range(args.replicas):
            bundle = simulate_second_order(model, eps, grid,
                                           spawn_stream(args.seed, r), scheme)
            path = outdir / f"trajectory_r{r:06d}.csv"
            io.write_trajectory_csv(path, bundle)
            outputs.append(path)
    elif args.command == "overdamped":
        eps = eps_list[0]
        for r in range(args.replicas):
            bundle = simulate_overdamped_bundle(model, eps, grid,
                                                spawn_stream(args.seed, r))
            path = outdir / f"overdamped_r{r:06d}.csv"
            io.write_trajectory_csv(path, bundle, momentum=False)
            outputs.append(path)
    elif args.command == "averaged":
        phi = solve_averaged_ode(model, grid)
        path = outdir / "averaged_path.csv"
        io.write_path_csv(path, grid, phi.values)
        outputs.append(path)
    elif args.command == "sk-compare":
        study = sk_convergence_study(model, eps_list, args.replicas,
                                     args.seed, grid, scheme, args.threads)
        path = outdir / "sk_convergence.csv"
        io.write_sk_csv(path, study)
        outputs.append(path)
        if study.slope is not None:
            print(f"fitted slope of log median distance vs log eps: "
                  f"{study.slope:.4f}")
    elif args.command == "rate-ladder":
        event = PathEvent(kind=args.event, threshold=args.threshold,
                          applies_to=args.system)
        ladder = rate_ladder(model, event, eps_list, args.replicas,
                             args.seed, grid, scheme, args.threads)
        path = outdir / "rate_ladder.csv"
        io.write_ladder_csv(path, ladder)
        outputs.append(path)
        for row in ladder.rows:
            tag = "censored" if row.censored else f"{row.eps_log_p:.4f}"
            print(f"eps={row.eps:g}: p_hat={row.estimate.p_hat:.6g} "
                  f"eps*log p = {tag}")
    elif args.command == "tightness":
        rows = tightness_diagnostics(model, eps_list,
                                     _parse_floats(args.levels),
                                     _parse_floats(args.windows), args.ell,
                                     args.replicas, args.seed, grid, scheme,
                                     args.threads)
        path = outdir / "tightness.csv"
        io.write_tightness_csv(path, rows)
        outputs.append(path)
    elif args.command == "h-scaling":
        study = h_eps_scaling_study(model, eps_list, args.replicas,
                                    args.seed, grid, scheme, args.threads)
        path = outdir / "h_scaling.csv"
        io.write_hscaling_csv(path, study)
        outputs.append(path)
        slope = "undefined" if study.slope is None else f"{study.slope:.4f}"
        print(f"fitted slope of log median sup|H| vs log eps: {slope}")
    elif args.command == "action":
        rate = RateModel(model=model)
        data = np.loadtxt(args.path, delimiter=",", skiprows=1)
        n = data.shape[0] - 1
        pgrid = make_grid(data[0, 0], data[-1, 0], n)
        phi = Path(grid=pgrid, values=data[:, 1:])
        value = action(rate, phi)
        from .rates import lagrangian

        def cell(v):
            return (repr(float(v[0])) if v.size == 1
                    else ";".join(repr(float(c)) for c in v))

        rows = []
        for j in range(n):
            gamma = (phi.values[j + 1] - phi.values[j]) / pgrid.dt
            xm = 0.5 * (phi.values[j] + phi.values[j + 1])
            tm = pgrid.node(j) + pgrid.dt / 2.0
            rows.append([tm, cell(xm), cell(gamma),
                         lagrangian(rate, tm, xm, gamma)])
        table = outdir / "legendre_table.csv"
        io.write_legendre_csv(table, rows)
        outputs.append(table)
        print(f"action: {value:.8f}")
    elif args.command == "min-action":
        rate = RateModel(model=model)
        result = minimize_action(rate, _parse_floats(args.start),
                                 _parse_floats(args.end), args.segments)
        path = outdir / "min_action_path.csv"
        io.write_path_csv(path, result.path.grid, result.path.values)
        outputs.append(path)
        flag = "" if result.converged else " (iteration budget reached)"
        print(f"least action: {result.value:.8f}{flag}")
    else:  # pragma: no cover
        raise LangenvError(f"unhandled command {args.command}")
    return outputs, None


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    started = time.time()
    digest = None
    error = None
    outputs: list = []
    try:
        if args.command != "h-functional":
            digest = config_digest(args.config)
    except (LangenvError, OSError):
        digest = None
    try:
        outputs, error = _run(args)
        code = 0
    except LangenvError as exc:
        error = str(exc)
        print(f"error: {error}", file=sys.stderr)
        code = 1
    try:
        io.write_manifest(_outdir(args), command=" ".join(argv or sys.argv),
                          config=getattr(args, "config", None), digest=digest,
                          master_seed=args.seed,
                          grid=make_grid(0.0, args.t_end, args.steps),
                          scheme=args.scheme, eps_values=_parse_floats(args.eps),
                          outputs=outputs, started=started, error=error)
    except OSError as exc:  # out dir not writable; still honor exit code
        print(f"warning: manifest not written: {exc}", file=sys.stderr)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
