"""Command-line entry point: sample | benchmark | validate | oracle | demo-divergence.

Exit codes: 0 ok, 2 usage error, 3 configuration error, 4 all chains exploded.
"""
from __future__ import annotations

import argparse
import sys
import time
from typing import Optional, Sequence

from .harness import (
    EXIT_CONFIG,
    EXIT_EXPLODED,
    EXIT_USAGE,
    PRESETS,
    ConfigError,
    UsageError,
    build_experiment,
    cli_benchmark,
    cli_demo_divergence,
    cli_oracle,
    cli_sample,
    cli_validate,
)
from .sampler import AllChainsExploded

__all__ = ["main"]


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat TOML config, or an emitted *.json header")
    p.add_argument("--preset", help=f"one of: {', '.join(sorted(PRESETS))}")
    p.add_argument("--lambda", dest="lam", type=float, help="step size override")
    p.add_argument("--seed", type=int, help="root seed override")
    p.add_argument("--out", default="langtame-out", help="artifact directory")
    p.add_argument("--emit", help="comma list from csv,json,svg")
    p.add_argument("--chains", type=int, help="n_chains override")
    p.add_argument("--iters", type=int, help="n_iters override")


def _overrides(args: argparse.Namespace) -> dict:
    ov = {
        "lambda": getattr(args, "lam", None),
        "seed": getattr(args, "seed", None),
        "emit": getattr(args, "emit", None),
        "n_chains": getattr(args, "chains", None),
        "n_iters": getattr(args, "iters", None),
        "n_runs": getattr(args, "runs", None),
        "potential": getattr(args, "potential", None),
        "dim": getattr(args, "dim", None),
        "scheme": getattr(args, "scheme", None),
    }
    return {k: v for k, v in ov.items() if v is not None}


def _build(args: argparse.Namespace, light: bool = False):
    ov = _overrides(args)
    if light:
        # report-only commands do not sample; fill the run keys they ignore
        for key, val in (("lambda", 0.01), ("n_chains", 1),
                         ("n_iters", 2), ("seed", 0)):
            ov.setdefault(key, val)
        if args.preset is None and args.config is None and "potential" in ov:
            return build_experiment(overrides=ov)
    return build_experiment(preset=args.preset, config_path=args.config, overrides=ov)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="langtame",
        description="Tamed Langevin samplers with quadrature ground truth.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="one sampling run; archive + reports")
    _add_common(p)

    p = sub.add_parser("benchmark", help="multi-run (scheme, lambda) grid; boxplots")
    _add_common(p)
    p.add_argument("--runs", type=int, help="n_runs override")

    p = sub.add_parser("validate", help="assumption margins and inequality probes")
    _add_common(p)
    p.add_argument("--potential", help="catalog potential name")
    p.add_argument("--dim", type=int, help="dimension for parametric potentials")
    p.add_argument("--scheme", help="drift scheme to probe")

    p = sub.add_parser("oracle", help="quadrature ground-truth moments")
    _add_common(p)
    p.add_argument("--potential", help="catalog potential name")
    p.add_argument("--dim", type=int, help="dimension for parametric potentials")

    p = sub.add_parser("demo-divergence", help="second-moment blow-up of plain ula")
    _add_common(p)
    p.set_defaults(preset="divergence-demo")

    args = parser.parse_args(argv)
    t0 = time.perf_counter()
    try:
        if args.command == "sample":
            code = cli_sample(_build(args), args.out)
        elif args.command == "benchmark":
            code = cli_benchmark(_build(args), args.out)
        elif args.command == "validate":
            code = cli_validate(_build(args, light=True), args.out)
        elif args.command == "oracle":
            code = cli_oracle(_build(args, light=True), args.out)
        else:
            code = cli_demo_divergence(_build(args), args.out)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except AllChainsExploded as e:
        print(f"all chains exploded: {e}", file=sys.stderr)
        return EXIT_EXPLODED
    finally:
        # timing stays out of the artifacts so reruns stay byte-identical
        print(f"wall time {time.perf_counter() - t0:.2f}s", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
