"""figviz command line: `figviz <figure-id> --in <csv...> --out <png/svg>`."""

from __future__ import annotations

import argparse
import sys

from .render import FigureSpec, render
from .schemas import FIGURE_IDS, EmptyInputError, FigvizError, SchemaError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="figviz",
        description="Render losswatch CSV outputs into figures.",
    )
    parser.add_argument("figure_id", choices=list(FIGURE_IDS))
    parser.add_argument("--in", dest="inputs", nargs="+", required=True,
                        help="input CSV path(s); fig3 accepts an optional "
                             "second CSV (threshold table) as an overlay")
    parser.add_argument("--out", dest="output", required=True,
                        help="output image path (.png or .svg)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = FigureSpec(args.figure_id, tuple(args.inputs), args.output)
        path = render(spec)
    except (SchemaError, EmptyInputError, FigvizError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
