"""Command-line entry point: ``sixdma <subcommand> [options]``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .channel import Scenario, dbm_to_watt
from .cssca import CsscaConfig
from .harness import (
    SCHEMES,
    ExperimentConfig,
    desk_scenario,
    emit_cdf_csv,
    emit_csv,
    emit_traces_csv,
    paper_scenario,
    run_experiment,
    summarize,
)

log = logging.getLogger("sixdma")

# subcommand -> (sweep axis, default sweep values)
SUBCOMMANDS = {
    "cdf": ("none", ()),
    "sweep-movable": ("movable_region", (0.0, 1.0, 2.0, 3.0)),
    "sweep-rotation": ("rotation_range", (0.0, 10.0, 20.0, 30.0)),
    "sweep-rician": ("rician_db", (-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0)),
    "convergence": ("none", ()),
}
DEFAULT_SCHEMES = {
    "convergence": ("proposed_6dma", "fpa", "position_only", "orientation_only"),
}
CSSCA_KEYS = {f.name for f in dataclasses.fields(CsscaConfig)} - {"s_max"}


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _schemes(text: str) -> tuple[str, ...]:
    out = tuple(x.strip() for x in text.split(",") if x.strip())
    bad = [x for x in out if x not in SCHEMES]
    if bad or not out:
        raise argparse.ArgumentTypeError(f"unknown schemes {bad}; choose from {', '.join(SCHEMES)}")
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON file with 'scenario' and/or 'cssca' sections")
    common.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    common.add_argument("--realizations", type=int, help="Monte Carlo realizations (desk 20, paper-scale 200)")
    common.add_argument("--schemes", type=_schemes, help=f"comma list from: {', '.join(SCHEMES)}")
    common.add_argument("--out", type=Path, required=True, help="output CSV path")
    scale = common.add_mutually_exclusive_group()
    scale.add_argument("--desk", dest="scale", action="store_const", const="desk",
                       help="small 4x4x4x4 scenario at 70 dBm (default)")
    scale.add_argument("--paper-scale", dest="scale", action="store_const", const="paper",
                       help="full 10 AP x 6 antenna x 10 user scenario")
    common.add_argument("--user-dist", choices=("uniform", "hotspot"), default="uniform")
    common.add_argument("--values", type=_floats, help="sweep values, comma list (use --values=-10,20 for negatives)")
    common.add_argument("--s-max", type=int, default=100, help="optimizer iterations (default 100)")
    common.add_argument("--eval-samples", type=int, default=200, help="fading draws per ergodic-rate estimate")
    common.add_argument("--tx-power-dbm", type=float, help="override the transmit power")
    common.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
    common.add_argument("--timing", action="store_true", help="add a wall_time column (not byte-reproducible)")
    common.add_argument("-v", "--verbose", action="store_true")
    common.set_defaults(scale="desk")

    parser = argparse.ArgumentParser(prog="sixdma", description="6D movable-antenna cell-free uplink experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "cdf":
            p.add_argument("--cdf-out", type=Path, help="CDF companion CSV (default <out>_cdf.csv)")
        if name == "convergence":
            p.add_argument("--trace-out", type=Path, help="per-iteration trace CSV (default <out>_trace.csv)")
    return parser


def load_config(path: Path | None) -> tuple[dict, dict]:
    if path is None:
        return {}, {}
    try:
        cfg = json.loads(path.read_text())
    except OSError as exc:
        raise SystemExit(f"error: cannot read config {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise SystemExit(f"error: {path} is not valid JSON: {exc}")
    unknown = set(cfg) - {"scenario", "cssca"}
    if unknown:
        raise SystemExit(f"error: unknown config sections {sorted(unknown)}")
    cssca = cfg.get("cssca", {})
    bad = set(cssca) - CSSCA_KEYS
    if bad:
        raise SystemExit(f"error: unknown cssca keys {sorted(bad)}")
    return cfg.get("scenario", {}), cssca


def make_config(args) -> ExperimentConfig:
    scen_cfg, cssca_cfg = load_config(args.config)
    base = desk_scenario() if args.scale == "desk" else paper_scenario()
    if scen_cfg:
        merged = base.to_config()
        merged.update(scen_cfg)
        base = Scenario.from_config(merged)
    if args.tx_power_dbm is not None:
        base = dataclasses.replace(base, tx_power=float(dbm_to_watt(args.tx_power_dbm)))
    axis, default_values = SUBCOMMANDS[args.command]
    realizations = args.realizations or (20 if args.scale == "desk" else 200)
    return ExperimentConfig(
        scenario=base,
        schemes=args.schemes or DEFAULT_SCHEMES.get(args.command, SCHEMES),
        num_realizations=realizations,
        s_max=args.s_max,
        eval_samples=args.eval_samples,
        sweep_axis=axis,
        sweep_values=(args.values or default_values) if axis != "none" else (),
        master_seed=args.seed,
        user_dist=args.user_dist,
        cssca=CsscaConfig(**cssca_cfg),
        jobs=args.jobs,
        keep_traces=args.command == "convergence",
    )


def _companion(out: Path, suffix: str) -> Path:
    return out.with_name(f"{out.stem}_{suffix}{out.suffix or '.csv'}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = make_config(args)
    except (ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    rows, traces = run_experiment(config, return_traces=True)
    try:
        emit_csv(rows, args.out, include_timing=args.timing)
        if args.command == "cdf":
            emit_cdf_csv(rows, args.cdf_out or _companion(args.out, "cdf"))
        if args.command == "convergence":
            emit_traces_csv(traces, args.trace_out or _companion(args.out, "trace"))
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for (scheme, value), (mean, se, n) in summarize(rows).items():
        at = "" if config.sweep_axis == "none" else f" @ {config.sweep_axis}={value:g}"
        print(f"{scheme:18s}{at}: {mean:8.3f} +/- {se:.3f} bits/s/Hz (n={n})")
    failed = sum(1 for r in rows if r.error)
    if failed:
        print(f"warning: {failed} scheme runs failed; see the 'error' column", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
