"""Command line entry point: ``graphonlab <subcommand> [options]``.

Exit status: 0 success, 1 usage error, 2 invalid input (schema or file),
3 numerical blow-up.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__
from ._kernels import BACKEND
from .config import ConfigError, load_config, validate_config
from .experiments import (
    RateError,
    RateParams,
    default_threads,
    estimate_coupling_error,
    estimate_empirical_lln,
    estimate_spatial_continuity,
    estimate_weighted_lln,
    rate_m_n,
)
from .graphon import (
    DiscretizedGraphon,
    GraphonError,
    cut_norm,
    discretize,
    inf_to_one_norm,
    read_matrix_csv,
    step_difference,
)
from .io import (
    CSV_COLUMNS,
    atomic_write,
    csv_text,
    fits_csv,
    fmt,
    plot_report_svg,
    provenance_lines,
    read_measure,
    report_csv,
    write_json,
)
from .measures import is_path
from .meanfield import simulate_reference
from .noise import generate_noise, uniform_labels
from .sde import NumericalBlowUp, TrajectoryEnsemble, simulate_finite
from .transport import TransportError, wop2, wop2_closed_form, wop2_path_upper_bound

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_BLOWUP = 0, 1, 2, 3
DEFAULT_OUT = "results"


class _Parser(argparse.ArgumentParser):
    """argparse that exits with status 1 (usage text on stderr) on bad flags."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _int_list(text: str) -> list:
    try:
        return [int(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _global_flags(p, suppress: bool):
    default = argparse.SUPPRESS if suppress else None
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS if suppress else 0,
                   help="master seed (default 0)")
    p.add_argument("--threads", type=int, default=default,
                   help="worker processes (default: available cores)")
    p.add_argument("--out-dir", default=default, help=f"output directory (default {DEFAULT_OUT!r})")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="graphonlab", description="Graphon particle systems with common noise.")
    parser.add_argument("--version", action="version", version=f"graphonlab {__version__}")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", metavar="subcommand", parser_class=_Parser)
    sub.required = True

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text)
        _global_flags(p, suppress=True)
        return p

    p = add("simulate", "simulate the finite system (or the reference surrogate)")
    p.add_argument("--config", required=True)
    p.add_argument("--graphon", help="n x n discretized graphon CSV (default: discretize the config graphon)")
    p.add_argument("--n", type=int, help="particle count when discretizing the config graphon")
    p.add_argument("--reference", action="store_true", help="simulate the reference surrogate")
    p.add_argument("--nref", type=int, default=64, help="reference labels (default 64)")
    p.add_argument("--cloud", type=int, default=1, help="particles per reference label (default 1)")
    p.add_argument("--replicate", type=int, default=0)
    p.add_argument("--out", help="ensemble JSON path (default <out-dir>/ensemble.json)")

    p = add("metric", "WOP2 distance between two measure JSON files")
    p.add_argument("mu")
    p.add_argument("nu")
    p.add_argument("--space", choices=("state", "path"), default="state")
    p.add_argument("--form", choices=("definition", "closed", "upper"), default="definition")
    p.add_argument("--x0", help="reference point (JSON list) or path (nested list)")
    p.add_argument("--plan", help="write the optimal coupling to this CSV")

    p = add("cutnorm", "cut norm of the difference of two discretized graphons")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--mode", choices=("exact", "heuristic", "auto"), default="auto")
    p.add_argument("--restarts", type=int, default=20)

    for name, help_text in (
        ("lln", "empirical-measure law of large numbers"),
        ("weighted-lln", "graphon-weighted law of large numbers"),
        ("coupling", "pathwise coupling error with the sampled discretization"),
    ):
        p = add(name, help_text)
        p.add_argument("--config", required=True)
        p.add_argument("--n", type=_int_list, default=[8, 32, 128], help="comma-separated n values")
        p.add_argument("--nref", type=int, default=512)
        p.add_argument("--reps", type=int, default=64)
        p.add_argument("--delta-reps", type=int, default=None,
                       help="replications for the n_ref-doubling delta (default min(reps, 16))")
        if name != "coupling":
            p.add_argument("--mode", choices=("average", "sample"), default=None,
                           help="discretization (default from config)")
        p.add_argument("--plot", action="store_true", help="also write a log-log SVG")

    p = add("spatial", "label continuity of the conditional laws")
    p.add_argument("--config", required=True)
    p.add_argument("--cloud", type=int, default=64)
    p.add_argument("--nref", type=int, default=16)
    p.add_argument("--reps", type=int, default=32)
    p.add_argument("--delta-reps", type=int, default=None)
    p.add_argument("--plot", action="store_true")

    p = add("rates", "evaluate the M_n rate")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--n", type=_int_list, required=True, help="comma-separated n values")

    p = add("validate", "probe the standing assumptions for a config")
    p.add_argument("--config", required=True)
    p.add_argument("--n", type=int, default=8, help="base size for the cut-norm trend check")
    p.add_argument("--probes", type=int, default=400)
    return parser


# -- helpers -----------------------------------------------------------------


def _out_dir(args) -> str:
    return getattr(args, "out_dir", None) or DEFAULT_OUT


def _threads(args) -> int:
    return getattr(args, "threads", None) or default_threads()


def _manifest(args, subcommand, config_hash, outputs, started, extra=None):
    doc = {
        "tool": "graphonlab",
        "version": __version__,
        "backend": BACKEND,
        "subcommand": subcommand,
        "config_path": getattr(args, "config", None),
        "config_hash": config_hash,
        "seed": args.seed,
        "out_dir": _out_dir(args),
        "threads": _threads(args),
        "wall_clock_seconds": round(time.time() - started, 3),
        "outputs": outputs,
    }
    doc.update(extra or {})
    return doc


def _graphon_of(cfg):
    if cfg.graphon is None:
        raise ConfigError("config has no 'graphon' entry")
    return cfg.graphon


# -- subcommands -----------------------------------------------------------------


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    if args.reference:
        G = _graphon_of(cfg)
        grid = simulate_reference(cfg, G, args.nref, args.cloud, args.seed, args.replicate)
        labels = tuple(u for u in grid.u_grid for _ in range(grid.M))
        members = np.tile(np.arange(grid.M), grid.n_ref)
        h = cfg.config_hash({"system": "reference", "n_ref": args.nref, "M": args.cloud})
        prov = dict(grid.provenance, config_hash=h)
        ens = TrajectoryEnsemble(labels, members, grid.time_grid, grid.flat_states(), prov)
    else:
        if args.graphon:
            Gn = DiscretizedGraphon(read_matrix_csv(args.graphon), "file")
        else:
            n = args.n or cfg.n
            if n is None:
                raise ConfigError("give --graphon, --n or an 'n' entry in the config")
            Gn = discretize(_graphon_of(cfg), n, cfg.discretization, cfg.quad_points)
        noise = generate_noise(args.seed, uniform_labels(Gn.n), cfg.steps, cfg.m, cfg.m_common,
                               dt=cfg.dt, d=cfg.d, replicate=args.replicate)
        h = cfg.config_hash({"system": "finite", "graphon": Gn.matrix.tolist()})
        ens = simulate_finite(cfg, Gn, noise)
        ens.provenance["config_hash"] = h
    out = args.out or os.path.join(_out_dir(args), "ensemble.json")
    atomic_write(out, ens.to_json() + "\n")
    print(f"simulate: {ens.n} particles, {len(ens.time_grid)} time points -> {out} [config_hash={h}]")
    return EXIT_OK


def cmd_metric(args) -> int:
    mu, nu = read_measure(args.mu), read_measure(args.nu)
    want_path = args.space == "path"
    if is_path(mu) != want_path or is_path(nu) != want_path:
        raise TransportError(f"--space {args.space} does not match the measure files")
    x0 = None if args.x0 is None else np.asarray(json.loads(args.x0), dtype=np.float64)
    res = wop2(mu, nu, x0)
    value = res.value
    if args.form == "closed":
        value = wop2_closed_form(mu, nu, x0)
    elif args.form == "upper":
        if not want_path:
            raise TransportError("--form upper applies to path measures")
        value = wop2_path_upper_bound(mu, nu, x0)
    print(f"value {fmt(value)}")
    print(f"mass_gap {fmt(res.mass_gap)}")
    print(f"w2_term {fmt(res.w2_term)}")
    if args.plan:
        rows = [(i, j, f) for (i, j), f in sorted(res.plan.flow.items())]
        atomic_write(args.plan, csv_text(("i", "j", "mass"), rows))
    return EXIT_OK


def cmd_cutnorm(args) -> int:
    D = step_difference(read_matrix_csv(args.a), read_matrix_csv(args.b))
    res = cut_norm(D, args.mode, args.restarts, args.seed)
    inf = inf_to_one_norm(D, args.restarts, args.seed)
    kind = "exact" if res.exact else "heuristic"
    print(f"cut_norm {fmt(res.value)} ({kind})")
    print("S " + " ".join(str(i + 1) for i in res.rows))
    print("T " + " ".join(str(j + 1) for j in res.cols))
    print(f"inf_to_one {fmt(inf.value)} ({'exact' if inf.exact else 'heuristic'})")
    return EXIT_OK


def _experiment(args, name) -> int:
    started = time.time()
    cfg = load_config(args.config)
    G = _graphon_of(cfg)
    threads = _threads(args)
    common = dict(seed=args.seed, threads=threads, delta_reps=args.delta_reps)
    if name == "lln":
        report = estimate_empirical_lln(cfg, G, args.n, args.nref, args.reps, mode=args.mode, **common)
    elif name == "weighted-lln":
        report = estimate_weighted_lln(cfg, G, args.n, args.nref, args.reps, mode=args.mode, **common)
    elif name == "coupling":
        report = estimate_coupling_error(cfg, G, args.n, args.nref, args.reps, **common)
    else:
        report = estimate_spatial_continuity(cfg, G, args.cloud, args.reps, n_ref=args.nref, **common)
    return _emit(args, name, report, started)


def _emit(args, name, report, started) -> int:
    out = _out_dir(args)
    stem = name.replace("-", "_")
    outputs = [atomic_write(os.path.join(out, f"{stem}.csv"), report_csv(report, name))]
    if report.fits:
        outputs.append(atomic_write(os.path.join(out, f"{stem}_fits.csv"), fits_csv(report, name)))
    if getattr(args, "plot", False):
        svg = plot_report_svg(report, os.path.join(out, f"{stem}.svg"), title=name)
        if svg:
            outputs.append(svg)
    fits = {q: {"slope": f.slope, "stderr": f.stderr, "ci": list(f.ci)} for q, f in report.fits.items()}
    manifest = _manifest(args, name, report.config_hash, outputs, started,
                         {"reps": report.reps, "n_ref": report.n_ref, "fits": fits, "meta": report.meta})
    write_json(os.path.join(out, f"{stem}_manifest.json"), manifest)
    for q in report.quantities():
        parts = " ".join(f"n={r.n}:{r.mean:.6g}+-{r.stderr:.2g}" for r in report.select(q))
        slope = f" slope={report.fits[q].slope:.3f}" if q in report.fits else ""
        print(f"{q}: {parts}{slope}")
    return EXIT_OK


def cmd_rates(args) -> int:
    params = RateParams(args.d, args.eps)
    values = [rate_m_n(n, params) for n in args.n]
    if len(values) == 1:
        print(f"{values[0]:.6f}")
    else:
        for n, v in zip(args.n, values):
            print(f"{n} {v:.6f}")
    if getattr(args, "out_dir", None):
        h = f"d={args.d},eps={fmt(args.eps)}"
        rows = [("M_n", n, v, 0.0, 0.0, args.seed) for n, v in zip(args.n, values)]
        atomic_write(os.path.join(args.out_dir, "rates.csv"),
                     csv_text(CSV_COLUMNS, rows, provenance_lines("rates", h, args.seed)))
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    report = validate_config(cfg, n=args.n, probes=args.probes)
    for line in report.lines():
        print(line)
    warns = sum(c.status == "WARN" for c in report.checks)
    print(f"{len(report.checks) - warns} PASS, {warns} WARN [config_hash={cfg.config_hash()}]")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "metric": cmd_metric,
    "cutnorm": cmd_cutnorm,
    "lln": lambda a: _experiment(a, "lln"),
    "weighted-lln": lambda a: _experiment(a, "weighted-lln"),
    "coupling": lambda a: _experiment(a, "coupling"),
    "spatial": lambda a: _experiment(a, "spatial"),
    "rates": cmd_rates,
    "validate": cmd_validate,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except NumericalBlowUp as exc:
        print(f"error: numerical blow-up: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    except (ConfigError, GraphonError, TransportError, RateError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
