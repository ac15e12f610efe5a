"""Command line front end: ``simulate`` runs one experiment, ``converge``
runs an h- or k-refinement study on the square benchmark."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path


from .assembly import error_norms
from .config import EXPERIMENTS, SimConfig, config_from_mapping, read_config_file
from .convergence import run_convergence
from .mesh import ConfigurationError
from .output import write_state_vtk, write_timeseries
from .solvers import NonConvergenceError

log = logging.getLogger("viscodamage")


def simulate(config: SimConfig) -> Path:
    """Run ``config`` and write VTK snapshots and the damage/velocity time series."""
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    problem = config.build_problem()
    state0 = problem.initial_state(zeta0=config.zeta0)
    rows = [(0, 0.0, float(state0.zeta.min()), float(state0.zeta.max()), 0.0)]

    def record(state):
        wv = error_norms(problem.mesh, state.w, None)[0]
        rows.append((state.n, state.t, float(state.zeta.min()), float(state.zeta.max()), wv))
        log.info("step %d/%d  t=%.4g  zeta in [%.4f, %.4f]  |w|_V=%.5g",
                 state.n, problem.grid.N, state.t, rows[-1][2], rows[-1][3], wv)

    states = problem.run(state0, snapshots=config.snapshots, callback=record)
    write_state_vtk(out / "fields_t0.vtk", problem.mesh, states[0])
    write_state_vtk(out / "fields_tN.vtk", problem.mesh, states[-1])
    if config.snapshots != "final":
        for s in states[1:-1]:
            write_state_vtk(out / f"fields_t{s.n:05d}.vtk", problem.mesh, s)
    write_timeseries(out / "timeseries.csv", rows)
    return out


def _split_values(text: str) -> list[str]:
    return [v for v in text.replace(" ", "").split(",") if v]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="viscodamage", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log every time step")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one experiment and write VTK/CSV output")
    sim.add_argument("--experiment", type=int, choices=sorted(EXPERIMENTS))
    sim.add_argument("--preset", help="named preset (exp1, exp2, exp3, benchmark)")
    sim.add_argument("--config", help="key = value file; flags given here override it")
    sim.add_argument("--h", help="mesh size, e.g. 1/32")
    sim.add_argument("--k", help="time step, e.g. 1/32")
    sim.add_argument("--T", help="final time")
    sim.add_argument("--zeta0", help="constant initial damage in [0, 1]")
    sim.add_argument("--snapshots", help="final, all or every:<m>")
    sim.add_argument("--elasticity", choices=["linear", "von_mises"])
    sim.add_argument("--out", help="output directory")

    conv = sub.add_parser("converge", help="h- or k-convergence study on the square benchmark")
    conv.add_argument("--sweep", choices=["h", "k"], required=True)
    conv.add_argument("--values", required=True, help="comma separated, e.g. 1/4,1/8,1/16")
    conv.add_argument("--fixed", required=True, help="value of the variable not swept")
    conv.add_argument("--ref", required=True, help="reference resolution")
    conv.add_argument("--config", help="key = value file for the base configuration")
    conv.add_argument("--error-time", choices=["final", "max"], default="final")
    conv.add_argument("--workers", type=int, default=1)
    conv.add_argument("--out", default="out")
    return parser


def _config(args, keys) -> SimConfig:
    values = read_config_file(args.config) if args.config else {}
    for key in keys:
        value = getattr(args, key, None)
        if value is not None:
            values[key] = value
    return config_from_mapping(values)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "simulate":
            cfg = _config(args, ("experiment", "preset", "h", "k", "T", "zeta0",
                                 "snapshots", "elasticity", "out"))
            out = simulate(cfg)
            print(f"wrote {out}/fields_t0.vtk, {out}/fields_tN.vtk, {out}/timeseries.csv")
        else:
            base = _config(args, ()) if args.config else SimConfig(preset="benchmark")
            report = run_convergence(args.sweep, _split_values(args.values), args.fixed, args.ref,
                                     base=base, error_time=args.error_time,
                                     workers=args.workers, outdir=args.out)
            print(report.format())
            print(f"wrote {Path(args.out) / 'report.csv'}")
    except (ConfigurationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NonConvergenceError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
