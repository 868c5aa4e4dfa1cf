"""Figure rendering for ompath output directories."""

from .figures import KINDS, FigureSpec, render_figure
from .io import InputError, load_manifest, read_path_csv, verify_checksums

__all__ = [
    "KINDS",
    "FigureSpec",
    "InputError",
    "load_manifest",
    "read_path_csv",
    "render_figure",
    "verify_checksums",
]
