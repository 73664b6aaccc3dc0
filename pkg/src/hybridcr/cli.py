"""``simulate`` command line entry point."""

from __future__ import annotations

import argparse
import logging
import sys
import time

from .channel import ModelInvalidError
from .experiment import (
    ConfigParseError,
    ConfigValidationError,
    ExperimentConfig,
    emit_csv,
    parse_config,
    parse_grid,
    sweep,
    with_overrides,
    _parse_floats,
    _parse_modes,
)

log = logging.getLogger("hybridcr")

FIGURE_PRESETS = {
    "fig3": {"modes": "noncoop,coop,hybrid", "alphas": "0.2"},
    "fig4": {"modes": "hybrid", "alphas": "0.2,0.4,0.6"},
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="simulate",
        description="Monte Carlo throughput sweep for hybrid underlay/cooperative spectrum sharing.",
    )
    p.add_argument("--config", help="flat key = value config file (default: built-in scenario)")
    p.add_argument("--modes", help="comma list of noncoop,coop,hybrid")
    p.add_argument("--lambda-grid", help="start:stop:step or comma list of PU arrival rates")
    p.add_argument("--alpha", help="comma list of underlay power fractions")
    p.add_argument("--slots", type=int, help="slots per run")
    p.add_argument("--seeds", type=int, help="independent runs per sweep point")
    p.add_argument("--master-seed", type=int)
    p.add_argument("--out", help="output CSV path")
    p.add_argument("--figure", choices=sorted(FIGURE_PRESETS),
                   help="preset modes/alphas for the figure layout (explicit flags win)")
    p.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    p.add_argument("-q", "--quiet", action="store_true")
    return p


def load_config(args) -> ExperimentConfig:
    cfg = parse_config(args.config) if args.config else ExperimentConfig()
    changes = {}
    if args.figure:
        preset = FIGURE_PRESETS[args.figure]
        changes["figure"] = args.figure
        changes["modes"] = _parse_modes(preset["modes"])
        changes["alphas"] = _parse_floats(preset["alphas"])
    try:
        if args.modes:
            changes["modes"] = _parse_modes(args.modes)
        if args.lambda_grid:
            changes["lambda_grid"] = parse_grid(args.lambda_grid)
        if args.alpha:
            changes["alphas"] = _parse_floats(args.alpha)
    except ValueError as exc:
        raise ConfigParseError(str(exc)) from None
    changes.update(slots=args.slots, seeds=args.seeds, master_seed=args.master_seed, output=args.out)
    return with_overrides(cfg, **changes)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args)
        cfg.build()
    except (ConfigParseError, ConfigValidationError, ModelInvalidError) as exc:
        print(f"simulate: error: {exc}", file=sys.stderr)
        return 2

    n_runs = len(cfg.modes) * len(cfg.lambda_grid) * len(cfg.alphas) * cfg.seeds
    log.info("%d runs x %d slots", n_runs, cfg.slots)
    t0 = time.perf_counter()
    curve = sweep(cfg, workers=args.workers)
    try:
        script = emit_csv(curve, cfg.output, figure=cfg.figure)
    except OSError as exc:
        print(f"simulate: error: cannot write {cfg.output}: {exc.strerror}", file=sys.stderr)
        return 1
    log.info("wrote %s and %s in %.1f s", cfg.output, script, time.perf_counter() - t0)
    if not args.quiet:
        for r in curve.rows:
            print(f"{r.mode:8s} lambda={r.lambda_p:5.2f} alpha={r.alpha:4.2f} "
                  f"su={r.su_throughput:.5f}+-{r.su_ci95:.5f} pu={r.pu_throughput:.5f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
