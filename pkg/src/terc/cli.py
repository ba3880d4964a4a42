"""Command line front end: ``terc simulate | estimate | montecarlo``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from threadpoolctl import threadpool_limits

from .config import ConfigError, dump_json, load_estimate_config
from .errors import TercError
from .panel import load_csv, write_csv
from .pipeline import estimate
from .simulation import COEF_NAMES, load_sim_config, resolve_threads, run_montecarlo

log = logging.getLogger("terc")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_PARTIAL = 3


def _float(v: float) -> str:
    return repr(float(v))


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for row in rows:
            out.writerow([_float(v) if isinstance(v, float) else v for v in row])


def cmd_simulate(config_path, out_data_path, out_truth_path=None, seed=None, rep: int = 0) -> int:
    from .simulation import gen_dgp

    config = load_sim_config(config_path)
    if seed is not None:
        config = config.replace(seed=seed)
    panel, truth = gen_dgp(config, rep)
    out_data_path = Path(out_data_path)
    write_csv(panel, out_data_path)
    if out_truth_path is None:
        out_truth_path = out_data_path.with_name(out_data_path.stem + "_truth.csv")
    rows = []
    for i, uid in enumerate(panel.unit_ids):
        for t, label in enumerate(panel.periods):
            rows.append((uid, label, float(truth.a_i[i]), float(truth.u_it[i, t]), *map(float, truth.beta_it[i, t])))
    _write_rows(Path(out_truth_path), ["id", "t", "a", "u", *COEF_NAMES], rows)
    return EXIT_OK


def cmd_estimate(data_path, config_path, out_report_path, per_obs_path=None) -> int:
    config = load_estimate_config(config_path) if config_path else None
    if config is None:
        from .config import EstimateConfig

        config = EstimateConfig()
    panel = load_csv(data_path, add_intercept=config.add_intercept)
    with threadpool_limits(1):
        report = estimate(panel, config)
    dump_json(report.to_dict(), out_report_path)
    if per_obs_path:
        header = ["id", "t", "vhat", *[f"beta_{k + 1}" for k in range(panel.d_x)]]
        _write_rows(Path(per_obs_path), header, report.per_obs_rows())
    return EXIT_OK


def cmd_montecarlo(config_path, out_report_path, hist_dir=None, threads=None, seed=None) -> int:
    config = load_sim_config(config_path)
    if seed is not None:
        config = config.replace(seed=seed)
    with threadpool_limits(1):
        report = run_montecarlo(config, threads=resolve_threads(threads if threads is not None else config.threads))
    dump_json(report.to_dict(), out_report_path)
    if hist_dir:
        hist_dir = Path(hist_dir)
        hist_dir.mkdir(parents=True, exist_ok=True)
        for name, label, rows in report.hist_tables():
            _write_rows(hist_dir / f"hist_{name}_{label}.csv", ["bin_lo", "bin_hi", "count_estimated", "count_true"], rows)
    if report.failures:
        log.warning("%d replications failed", len(report.failures))
        return EXIT_PARTIAL
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="terc", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw one panel from the production DGP")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="panel CSV path")
    p.add_argument("--truth", help="truth CSV path (default: <out>_truth.csv)")
    p.add_argument("--seed", type=int)
    p.add_argument("--rep", type=int, default=0, help="replication index")

    p = sub.add_parser("estimate", help="run the three-step estimator on a panel CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--config")
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--per-obs", help="per-observation CSV path")

    p = sub.add_parser("montecarlo", help="Monte Carlo study on the production DGP")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--hist-dir")
    p.add_argument("--threads", type=int)
    p.add_argument("--seed", type=int)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "simulate":
            return cmd_simulate(args.config, args.out, args.truth, args.seed, args.rep)
        if args.command == "estimate":
            return cmd_estimate(args.data, args.config, args.out, args.per_obs)
        return cmd_montecarlo(args.config, args.out, args.hist_dir, args.threads, args.seed)
    except ConfigError as exc:
        print(f"terc {args.command}: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TercError as exc:
        print(f"terc {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except OSError as exc:
        print(f"terc {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
