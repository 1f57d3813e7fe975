"""Command line: render_figs <figid> --in DIR --out DIR."""

from __future__ import annotations

import argparse
import sys

from .recipes import FIGURE_IDS, RecipeError, recipe_for, render


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="render_figs",
        description="Render an nvmotion reproduce artifact set into a figure.",
    )
    parser.add_argument("figure_id", choices=FIGURE_IDS)
    parser.add_argument("--in", dest="in_dir", required=True, help="artifact directory")
    parser.add_argument("--out", dest="out_dir", required=True, help="image directory")
    args = parser.parse_args(argv)
    try:
        recipe = recipe_for(args.figure_id, args.in_dir, args.out_dir)
        path = render(recipe)
    except RecipeError as exc:
        print(f"render error: {exc}", file=sys.stderr)
        return 1
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
