"""Command-line entry point ``superradiance-mf``.

Exit codes: 0 success, 2 configuration error, 3 when more than 10% of the
grid cells of a sweep failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import MODES, PRESETS, ConfigError, load_config
from .driver import FAILURE_FRACTION, run

log = logging.getLogger("superradiance_mf")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="superradiance-mf",
                                 description="Mean-field superradiance with recoil: runs and sweeps.")
    ap.add_argument("mode", choices=MODES)
    ap.add_argument("--config", help="flat JSON file with SweepConfig fields")
    ap.add_argument("--preset", choices=sorted(PRESETS))
    ap.add_argument("--w", type=float)
    ap.add_argument("--lambda", dest="lam", type=float)
    ap.add_argument("--delta-over-kappa", type=float)
    ap.add_argument("--n-max", type=int)
    ap.add_argument("--dt", type=float)
    ap.add_argument("--t-end", type=float)
    ap.add_argument("--out")
    ap.add_argument("--workers", type=int)
    ap.add_argument("--set", action="append", default=[], metavar="FIELD=VALUE",
                    help="override any config field (JSON-parsed value), repeatable")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def _parse_sets(items: list[str]) -> dict:
    out = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"--set expects FIELD=VALUE, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            out[key.strip()] = json.loads(raw)
        except json.JSONDecodeError:
            out[key.strip()] = raw
    return out


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        overrides = _parse_sets(args.set)
        flags = dict(mode=args.mode, w=args.w, lam=args.lam, delta_over_kappa=args.delta_over_kappa,
                     n_max=args.n_max, dt=args.dt, t_end=args.t_end, out=args.out, workers=args.workers)
        overrides.update({k: v for k, v in flags.items() if v is not None})
        config = load_config(args.config, args.preset, **overrides)
        config.effective_workers()
        config.output_dir()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    log.info("running %s", config.mode)
    result = run(config)
    for path in result.files:
        print(path)
    if result.failed_fraction > FAILURE_FRACTION:
        print(f"{result.failed_cells}/{result.total_cells} cells failed", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
