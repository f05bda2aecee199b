"""``lvgen`` command line.

    lvgen ingest   --out runs/demo
    lvgen train    --out runs/demo --mode WCS --config desk.cfg
    lvgen sample   --out runs/demo --mode WCS
    lvgen evaluate --out runs/demo --mode WCS
    lvgen loadflow --out runs/demo --mode WCS
    lvgen report   --out runs/demo

Exit codes: 0 success, 2 input error, 3 missing upstream artifact,
4 numerical divergence.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .config import ConfigError, load_config

EXIT_OK, EXIT_INPUT, EXIT_MISSING, EXIT_DIVERGED = 0, 2, 3, 4
COMMANDS = ("ingest", "train", "sample", "evaluate", "loadflow", "report")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lvgen", description="Substation load profile generation pipeline")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat 'section.key = value' file; flags override it")
    common.add_argument("--seed", type=int, help="run.seed")
    common.add_argument("--mode", choices=("U", "WC", "WCS"), help="run.mode (condition regime)")
    common.add_argument("--jobs", type=int, help="run.jobs (thread bound for training and sampling)")
    common.add_argument("--out", default="lvgen-run", help="run root directory (default: %(default)s)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config key, e.g. --set sample.generator=gmm")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=f"run the {name} stage")
    return parser


def _overrides(args) -> dict:
    out = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v
    # dedicated flags win over --set
    out.update({"run.seed": args.seed, "run.mode": args.mode, "run.jobs": args.jobs})
    return out


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    from .diffusion import DivergenceError
    from .pipeline import STAGES, InputError, MissingArtifact

    try:
        cfg = load_config(args.config, _overrides(args))
        manifest = STAGES[args.command](cfg, Path(args.out))
    except (ConfigError, InputError) as exc:
        print(f"lvgen {args.command}: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except MissingArtifact as exc:
        print(f"lvgen {args.command}: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except DivergenceError as exc:
        print(f"lvgen {args.command}: numerical divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    outputs = ", ".join(sorted(manifest["outputs"]))
    print(f"lvgen {args.command}: ok ({manifest['timings']['seconds']:.1f}s) -> {outputs}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
