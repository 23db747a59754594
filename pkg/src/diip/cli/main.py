"""Argparse front end: train | degrade | restore | bench | report.

Every parameter can come from a flat `key = value` config file (--config) and
be overridden on the command line (--key value).  Exit codes: 0 success,
1 internal numerical failure, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import sys

import torch

from .. import __version__
from ..util import NonFiniteError
from . import commands
from .config import Param, load_config_file, resolve

_COMMANDS = {
    "train": (commands.TRAIN_SCHEMA, commands.cmd_train,
              "train the small denoiser on a synthetic dataset"),
    "degrade": (commands.DEGRADE_SCHEMA, commands.cmd_degrade,
                "materialize a (clean, degraded) benchmark directory"),
    "restore": (commands.RESTORE_SCHEMA, commands.cmd_restore,
                "blind-restore one degraded image"),
    "bench": (commands.BENCH_SCHEMA, commands.cmd_bench,
              "run restoration + ablation sweeps over a benchmark manifest"),
    "report": (commands.REPORT_SCHEMA, commands.cmd_report,
               "render trajectory curves and the slope/PSNR minima table"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="diip", description=__doc__)
    parser.add_argument("--version", action="version", version=f"diip {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (schema, _, help_text) in _COMMANDS.items():
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", default=None, help="flat key = value config file")
        for p in schema:
            sp.add_argument(f"--{p.name}", default=None, metavar="V", help=p.help or None)
    return parser


def main(argv: list[str] | None = None) -> int:
    # desk-scale workloads; a single intra-op thread keeps runs reproducible
    # regardless of how the bench fans out across images
    torch.set_num_threads(1)
    parser = build_parser()
    args = parser.parse_args(argv)
    schema, fn, _ = _COMMANDS[args.command]
    try:
        file_values = load_config_file(args.config) if args.config else {}
        cli_values = {
            p.name: getattr(args, p.name)
            for p in schema
            if getattr(args, p.name) is not None
        }
        cfg = resolve(schema, file_values, cli_values)
        return fn(cfg)
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except NonFiniteError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
