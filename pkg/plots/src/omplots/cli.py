"""omplots: render figures from an ompath output directory.

Exit codes: 0 success, 2 bad arguments or bad input (missing files,
checksum mismatch, malformed CSV).
"""
from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from .figures import KINDS, FigureSpec, render_figure
from .io import InputError

__all__ = ["main"]


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="omplots",
        description="Render trajectory figures from a checksummed ompath "
        "output directory (a pure view; nothing is recomputed).",
    )
    parser.add_argument("--input-dir", required=True,
                        help="directory written by 'ompath reproduce'")
    parser.add_argument("--kind", required=True, choices=KINDS,
                        help="which figure to draw")
    parser.add_argument("--out", required=True,
                        help="output image (.png or .svg)")
    parser.add_argument("--format", choices=("png", "svg"),
                        help="image format (default: from --out extension, else png)")
    parser.add_argument("--dpi", type=int, default=150,
                        help="raster resolution (default 150)")
    args = parser.parse_args(argv)
    try:
        record = render_figure(FigureSpec(input_dir=args.input_dir, kind=args.kind,
                                          out=args.out, fmt=args.format, dpi=args.dpi))
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    print(f"{args.out}: {record['curves']} curves")
    return 0


if __name__ == "__main__":
    sys.exit(main())
