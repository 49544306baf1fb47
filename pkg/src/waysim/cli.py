"""Command line entry point: ``waysim {sweep,verify,bounds,repeat} -c config.json``.

Exit codes: 0 success, 1 check failure, 2 config error, 3 numerical
precondition error (grid too small/coarse, leakage).
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from dataclasses import replace

from . import __version__
from .errors import ConfigError, WaysimError
from .grid import GridSpec
from .sweep import (
    SweepConfig, bounds_table, dump_densities, records_csv, repeat_table, report_json,
    run_sweep, verify, write_outputs,
)

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def _lambdas(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of reals: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="waysim", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"waysim {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in [("sweep", "run a lambda sweep and write CSV + JSON"),
                        ("verify", "run the invariant suite; nonzero exit on failure"),
                        ("bounds", "tabulate the noise/momentum-spread bounds"),
                        ("repeat", "tabulate repeatability widths against predictions")]:
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("-c", "--config", required=True, help="JSON configuration file")
        sp.add_argument("--model", choices=("ozawa", "alt"))
        sp.add_argument("--lambda", dest="lambdas", type=_lambdas, action="append",
                        help="comma-separated coupling values (repeatable)")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--grid-n", type=int, help="samples per axis (power of two)")
        sp.add_argument("--grid-span", type=float, help="grid half-width L: grid is [-L, L)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--workers", type=int, help="parallel lambda evaluations")
        sp.add_argument("--emit-plot-data", action="store_true",
                        help="also write per-lambda error density samples (x, e(x))")
        sp.add_argument("-v", "--verbose", action="store_true")
    return p


def load_config(args) -> SweepConfig:
    cfg = SweepConfig.load(args.config)
    over = {}
    if args.model:
        over["model"] = args.model
    if args.lambdas:
        over["lambda_values"] = [v for group in args.lambdas for v in group]
    if args.out:
        over["output_path"] = args.out
    if args.seed is not None:
        over["seed"] = args.seed
    if args.workers is not None:
        over["workers"] = args.workers
    if args.grid_n is not None or args.grid_span is not None:
        g = cfg.grid
        n = args.grid_n if args.grid_n is not None else g.n
        lo, hi = (-args.grid_span, args.grid_span) if args.grid_span is not None else (g.x_min, g.x_max)
        try:
            over["grid"] = GridSpec(lo, hi, n)
        except WaysimError as exc:
            raise ConfigError(str(exc)) from None
    if over:
        try:
            cfg = replace(cfg, **over)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
    return cfg


def _run(args) -> int:
    cfg = load_config(args)
    out = sys.stdout
    if args.command == "sweep":
        records = run_sweep(cfg)
        path = write_outputs("sweep", cfg, records)
        out.write(records_csv(records))
        out.write(f"wrote {path / 'sweep.csv'} and {path / 'sweep.json'}\n")
        status = EXIT_OK
    elif args.command == "verify":
        checks = verify(cfg)
        for c in checks:
            out.write(f"[{c.status.upper():>18}] {c.name}: {c.detail}\n")
        failed = sum(c.failed for c in checks)
        out.write(f"{len(checks)} checks, {failed} failed\n")
        path = write_outputs("verify", cfg, [], {"checks": [c.__dict__ for c in checks],
                                                 "failed": failed}, csv_name=None)
        status = EXIT_CHECK if failed else EXIT_OK
    elif args.command == "bounds":
        table = bounds_table(cfg)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        keys = list(table[0][1].to_dict())
        w.writerow(["lambda"] + keys)
        for lam, rep in table:
            w.writerow([format(lam, ".17g")] + [_fmt(v) for v in rep.to_dict().values()])
        out.write(buf.getvalue())
        path = write_outputs("bounds", cfg, [], {"bounds": [dict(rep.to_dict(), **{"lambda": lam})
                                                            for lam, rep in table]},
                             csv_name=None)
        (path / "bounds.csv").write_text(buf.getvalue())
        status = EXIT_OK
    else:
        rows = repeat_table(cfg)
        for r in rows:
            out.write(f"lambda={r['lambda']:.6g}  repeat_width={r['repeat_width']:.6g}  "
                      f"predicted_d={r['predicted_d']:.6g}\n")
        path = write_outputs("repeat", cfg, [], {"repeatability": rows}, csv_name=None)
        status = EXIT_OK
    if args.emit_plot_data:
        for p in dump_densities(cfg):
            out.write(f"wrote {p}\n")
    return status


def _fmt(v):
    if isinstance(v, bool):
        return str(v).lower()
    if v is None:
        return ""
    return format(v, ".17g")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except WaysimError as exc:
        print(f"numerical precondition error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
