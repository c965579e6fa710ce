"""Command-line entry points: `neuroedge run` and `neuroedge sweep`.

Exit codes: 0 on success, 2 on configuration errors, 3 on runtime
divergence or collision.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import load_config
from .errors import InsideObstacle, NonFiniteState, ParseError, ValidationError
from .runner import SweepSpec, run_scenario, run_sweep


def _parse_seeds(text: str) -> list[int]:
    if "," in text:
        return [int(part) for part in text.split(",") if part]
    return list(range(int(text)))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="neuroedge",
        description="Cloud-edge spiking control simulator",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="info-level logs")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one scenario")
    run_p.add_argument("--config", required=True, help="JSON scenario file")
    run_p.add_argument("--seed", type=int, default=None, help="override config seed")
    run_p.add_argument("--out", default=None, help="output directory for telemetry")
    run_p.add_argument(
        "--link",
        default=None,
        help="transport: 'inproc' (default) or 'tcp://HOST:PORT' (port 0 = ephemeral)",
    )

    sweep_p = sub.add_parser("sweep", help="run a neuron-count sweep")
    sweep_p.add_argument("--config", required=True, help="JSON scenario file")
    sweep_p.add_argument(
        "--n", required=True, help="comma-separated neuron counts, e.g. 5,15,30,50"
    )
    sweep_p.add_argument(
        "--seeds",
        default="5",
        help="seed count (first k seeds) or comma-separated seed list",
    )
    sweep_p.add_argument("--out", default=None, help="directory for sweep.csv")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = load_config(args.config)
        if args.command == "run":
            if args.seed is not None:
                cfg.seed = args.seed
            if args.link is not None:
                cfg.link = args.link
            cfg.validate()
            result = run_scenario(cfg, out_dir=args.out)
            print(json.dumps(result.summary.to_dict(), indent=2))
        else:
            spec = SweepSpec(
                base=cfg,
                n_values=[int(part) for part in args.n.split(",") if part],
                seeds=_parse_seeds(args.seeds),
            )
            rows = run_sweep(spec, out_dir=args.out)
            print(json.dumps(rows, indent=2))
    except (ParseError, ValidationError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (NonFiniteState, InsideObstacle) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
