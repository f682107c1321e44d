"""Command line: one image per invocation from benchmark CSVs."""

import argparse
import sys

from .plots import FIGURE_KINDS, FigureDataError, FigureSpec, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="snls-figures",
        description="Render convergence, charge, moment and tail figures "
        "from snls CSV outputs.",
    )
    parser.add_argument("kind", choices=FIGURE_KINDS)
    parser.add_argument("inputs", nargs="+", help="input CSV path(s)")
    parser.add_argument("--output", required=True, help="output image path")
    parser.add_argument("--alpha", action="append", type=float, default=[],
                        help="moment exponent(s) to draw (moments only)")
    parser.add_argument("--xlabel")
    parser.add_argument("--ylabel")
    args = parser.parse_args(argv)

    try:
        spec = FigureSpec(
            inputs=tuple(args.inputs),
            kind=args.kind,
            output=args.output,
            xlabel=args.xlabel,
            ylabel=args.ylabel,
            alphas=tuple(args.alpha),
        )
        annotation = render(spec)
    except FigureDataError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return 1
    print(f"{args.kind}: wrote {args.output} (annotation {annotation})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
