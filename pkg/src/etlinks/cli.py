"""``etlinks`` command line entry point."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields

from .errors import InputError
from .pipeline import STAGES, PipelineConfig, run

# flags documented for every subcommand; the remaining config keys get generic flags
_CHOICES = {
    "format": ("text", "binary"),
    "anchor_mode": ("supplied", "mutual-nn"),
    "count_transform": ("log1p", "raw"),
    "primary_coefficient": ("pearson", "spearman"),
    "p_method": ("t", "permutation"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="etlinks", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in (*STAGES, "all"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="INI file with an [etlinks] section")
        p.add_argument("-v", "--verbose", action="count", default=0)
        for f in fields(PipelineConfig):
            flag = "--" + f.name.replace("_", "-")
            if f.name == "exclude_zero":
                p.add_argument(flag, dest=f.name, action="store_const", const="true", default=None)
                p.add_argument("--include-zero", dest=f.name, action="store_const", const="false")
            elif f.name == "clusters":
                p.add_argument(flag, "-k", dest=f.name)
            else:
                p.add_argument(flag, dest=f.name, choices=_CHOICES.get(f.name))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {f.name: getattr(args, f.name) for f in fields(PipelineConfig)}
    try:
        config = PipelineConfig.from_file(args.config, overrides)
        written = run(args.subcommand, config)
    except (InputError, OSError) as exc:
        print(f"etlinks: error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        logging.getLogger("etlinks").exception("internal error")
        print(f"etlinks: internal error: {exc!r}", file=sys.stderr)
        return 2
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
