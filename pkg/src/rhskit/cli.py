"""Command-line entry point: ``rhs <kind> --config FILE``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import SCHEMA_VERSION, __version__
from .errors import ConfigError
from .harness.config import KINDS, load_config

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


def build_parser():
    p = argparse.ArgumentParser(prog="rhs", description="Run a holographic-surface experiment from a TOML config.")
    p.add_argument("--version", action="version", version=f"rhs {__version__} (schema {SCHEMA_VERSION})")
    p.add_argument("kind", choices=KINDS, help="experiment kind; must match the config's 'kind'")
    p.add_argument("--config", required=True, type=Path, help="TOML experiment file")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out", type=Path, default=None, help="output directory (default: output.dir or ./results)")
    p.add_argument("--plots", action="store_true", help="also write SVG figures")
    return p



def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on usage errors; usage errors are validation errors here
        return EXIT_OK if e.code in (0, None) else EXIT_INVALID
    try:
        cfg = load_config(args.config, args.seed)
        if cfg.kind != args.kind:
            raise ConfigError(f"key 'kind': config is {cfg.kind!r} but the command asks for {args.kind!r}")
        if args.seed is not None and args.seed < 0:
            raise ConfigError("--seed must be non-negative")
    except ConfigError as e:
        print(f"rhs: invalid configuration: {e}", file=sys.stderr)
        return EXIT_INVALID

    from .harness.plots import default_specs, emit_plots
    from .harness.runner import run_experiment

    out = args.out or Path(cfg.output["dir"])
    try:
        rs = run_experiment(cfg)
        csv_path = rs.write_csv(out / f"{cfg.kind}.csv")
        if args.plots or cfg.output["plots"]:
            emit_plots(rs, default_specs(cfg.kind, cfg), out, csv_path.name)
    except ConfigError as e:
        print(f"rhs: invalid configuration: {e}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as e:  # noqa: BLE001
        print(f"rhs: run failed: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    for err in rs.metadata.get("errors", []):
        print(f"rhs: cell failed: {err}", file=sys.stderr)
    if rs.metadata.get("errors") and all(r.get("error") for r in rs.rows):
        return EXIT_RUNTIME
    print(csv_path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
