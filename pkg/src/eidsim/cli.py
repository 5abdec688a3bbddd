"""Command-line entry point: ``eidsim run|sweep|sieve|check-pointer``.

Exit codes: 0 success, 2 invalid configuration, 3 branch mixing (the
evolved state left the correlated form), 4 numerical-invariant breach.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .config import SWEEPABLE, ExperimentConfig, load_config, parse_config
from .exceptions import ConfigError, EidError, InvariantBreachError, ModelViolationError
from .runner import Outcome, Table, run_experiment

log = logging.getLogger("eidsim")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MODEL = 3
EXIT_INVARIANT = 4


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, ModelViolationError):
        return EXIT_MODEL
    if isinstance(exc, InvariantBreachError):
        return EXIT_INVARIANT
    if isinstance(exc, (ConfigError, EidError, ValueError)):
        return EXIT_CONFIG
    raise exc


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if x is None:
        return ""
    if isinstance(x, (bool,)):
        return str(x).lower()
    if isinstance(x, int) or (hasattr(x, "dtype") and x.dtype.kind in "iu"):
        return str(int(x))
    return format(float(x), ".17g")


def write_table(path: Path, table: Table) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(table.columns)
        for row in table.rows:
            writer.writerow([_fmt(x) for x in row])


def write_json(path: Path, doc: dict) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def write_outcome(out_dir: Path, outcome: Outcome, elapsed: float) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, table in outcome.tables.items():
        write_table(out_dir / name, table)
    write_json(out_dir / "summary.json", outcome.summary)
    # wall-clock kept apart so summary.json stays byte-reproducible
    write_json(out_dir / "timing.json", {"wall_clock_s": elapsed})


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    return cfg.with_overrides(seed=args.seed, tol=args.tol)


def _out_dir(args, cfg: ExperimentConfig) -> Path:
    return Path(args.out) if args.out else Path(cfg.output_dir)


def _timed(cfg: ExperimentConfig) -> tuple[Outcome, float]:
    start = time.perf_counter()
    outcome = run_experiment(cfg)
    return outcome, time.perf_counter() - start


def cmd_run(args) -> int:
    cfg = _load(args)
    outcome, elapsed = _timed(cfg)
    write_outcome(_out_dir(args, cfg), outcome, elapsed)
    return EXIT_OK


def _as_kind(cfg: ExperimentConfig, kind: str) -> ExperimentConfig:
    doc = dict(cfg.doc, experiment=kind)
    return parse_config(doc)


def cmd_sieve(args) -> int:
    cfg = _as_kind(_load(args), "sieve")
    outcome, elapsed = _timed(cfg)
    if args.out:
        write_outcome(Path(args.out), outcome, elapsed)
    json.dump(outcome.summary["sieve"], sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return EXIT_OK


def cmd_check_pointer(args) -> int:
    cfg = _as_kind(_load(args), "pointer_check")
    outcome, elapsed = _timed(cfg)
    if args.out:
        write_outcome(Path(args.out), outcome, elapsed)
    report = {k: outcome.summary[k] for k in ("pointer", "stability", "preferred_context", "regime")}
    json.dump(report, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return EXIT_OK


def _parse_values(text: str, param: str) -> list[tuple[str, float]]:
    tokens = [t.strip() for t in text.split(",") if t.strip()]
    if not tokens:
        raise ConfigError("--values must list at least one value")
    try:
        return [(t, float(t)) for t in tokens]
    except ValueError:
        raise ConfigError(f"--values for {param} must be numbers, got {text!r}") from None


def _sweep_one(doc: dict, param: str, token: str, value: float, out_dir: str) -> dict:
    row = {"value": value, "status": "ok", "exit_code": EXIT_OK}
    try:
        cfg = parse_config(doc).with_value(param, value)
        outcome, elapsed = _timed(cfg)
    except Exception as exc:  # noqa: BLE001 - mapped to a per-value status
        code = exit_code_for(exc)
        row.update(status=type(exc).__name__, exit_code=code, message=str(exc))
        return row
    write_outcome(Path(out_dir) / f"{param}={token}", outcome, elapsed)
    s = outcome.summary
    regime = s.get("regime") or {}
    sieve = s.get("sieve") or {}
    row.update(
        ratio=regime.get("ratio"),
        regime=regime.get("regime"),
        winner_angle_deg=sieve.get("winner_angle_deg"),
        t_probe=sieve.get("t_probe"),
        decoherence_time=s.get("decoherence_time"),
    )
    return row


SWEEP_COLUMNS = ["value", "status", "exit_code", "ratio", "regime", "winner_angle_deg",
                 "t_probe", "decoherence_time"]


def cmd_sweep(args) -> int:
    cfg = _load(args)
    if args.param not in SWEEPABLE:
        raise ConfigError(f"--param must be one of {sorted(SWEEPABLE)}")
    values = _parse_values(args.values, args.param)
    out_dir = _out_dir(args, cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = [(cfg.doc, args.param, token, value, str(out_dir)) for token, value in values]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_one, *zip(*jobs)))
    else:
        rows = [_sweep_one(*job) for job in jobs]
    for row in rows:
        if row["status"] != "ok":
            log.error("value %s failed: %s", row["value"], row.get("message", row["status"]))
    table = Table(SWEEP_COLUMNS, [[row.get(c) for c in SWEEP_COLUMNS] for row in rows])
    write_table(out_dir / "sweep.csv", table)
    failed = [row["exit_code"] for row in rows if row["exit_code"] != EXIT_OK]
    return failed[0] if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eidsim", description="Closed-system decoherence experiments from a JSON config."
    )
    parser.add_argument("--version", action="version", version=f"eidsim {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config", help="path to the JSON experiment config")
    common.add_argument("--out", help="output directory (default: config output_dir)")
    common.add_argument("--seed", type=int, help="override the coupling seed")
    common.add_argument("--tol", type=float, help="override the preferred-context tolerance")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="run the configured experiment")
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("sweep", parents=[common], help="repeat the experiment over one parameter")
    p.add_argument("--param", required=True, help=f"one of {', '.join(sorted(SWEEPABLE))}")
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.set_defaults(func=cmd_sweep)
    p = sub.add_parser("sieve", parents=[common], help="run the predictability sieve")
    p.set_defaults(func=cmd_sieve)
    p = sub.add_parser("check-pointer", parents=[common], help="pointer stability and context report")
    p.set_defaults(func=cmd_check_pointer)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    if args.tol is not None and args.tol <= 0:
        log.error("--tol must be positive")
        return EXIT_CONFIG
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - translated to documented exit codes
        code = exit_code_for(exc)
        log.error("%s", exc)
        return code


if __name__ == "__main__":
    sys.exit(main())
