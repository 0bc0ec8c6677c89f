"""Command line entry point: ``multipeak <stage> [--config F] [--out D] [--seed S]``."""

from __future__ import annotations

import argparse
import sys

from . import pipeline
from .config import ConfigError, RunConfig, emit, load

EPILOG = """exit codes:
  0  success
  1  invalid command line or configuration file
  2  exponent or subcriticality hypothesis violated
  3  empty window or inadmissible triplet
  4  scale solve, ground state or kernel constants failed
  5  verification check failed (first failure named on stderr)
  6  Newton refinement did not converge
"""

STAGES = {
    "triplets": "list admissible (m, n, k) triplets",
    "construct": "ground state, kernel constants, balanced scales and peaks",
    "verify": "projection and linear-response checks on the constructed peaks",
    "refine": "Newton refinement of the ansatz on a finite grid",
    "all": "every stage in order",
    "config": "print the effective configuration",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(pipeline.EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="multipeak", description="Segregated multi-peak configurations "
                     "for a coupled Schrödinger system.", epilog=EPILOG,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="stage", required=True, metavar="STAGE",
                                parser_class=_Parser)
    for name, text in STAGES.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--out", default="out", help="output directory (default: out)")
        p.add_argument("--seed", type=int, default=0, help="seed for randomized checks")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load(args.config) if args.config else RunConfig()
    except (OSError, ConfigError) as exc:
        print(f"config: {exc}", file=sys.stderr)
        return pipeline.EXIT_CONFIG
    if args.stage == "config":
        sys.stdout.write(emit(cfg))
        return pipeline.EXIT_OK
    if args.stage == "triplets":
        return pipeline.cmd_triplets(cfg, args.out)
    if args.stage == "construct":
        return pipeline.cmd_construct(cfg, args.out)
    if args.stage == "verify":
        return pipeline.cmd_verify(cfg, args.out, seed=args.seed)
    if args.stage == "refine":
        return pipeline.cmd_refine(cfg, args.out)
    return pipeline.cmd_all(cfg, args.out, seed=args.seed)


if __name__ == "__main__":
    sys.exit(main())
