"""Figure rendering: a pure view of already-computed trajectories.

Nothing here recomputes mathematics. Inputs are verified against the
producer's checksum manifest first; each render writes the image plus a
small JSON manifest of its own (``<image>.manifest.json``) recording the
kind, the curve count, and the labels, so downstream checks can assert
what the figure contains without parsing pixels.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  backend must be pinned first

from .io import InputError, load_manifest, read_path_csv, verify_checksums

__all__ = ["FigureSpec", "render_figure", "KINDS"]

KINDS = ("paths-overlay", "mpp-grid", "p-comparison")

# fixed styling keeps byte-identical output across runs
_RC = {
    "figure.dpi": 100,
    "font.family": "DejaVu Sans",
    "svg.hashsalt": "omplots",
    "axes.grid": True,
    "grid.alpha": 0.25,
}
_THIN = dict(color="0.65", linewidth=0.7)
_THICK = dict(color="crimson", linewidth=2.2)


@dataclass(frozen=True)
class FigureSpec:
    """One render request: which directory, which figure, where to."""

    input_dir: str
    kind: str
    out: str
    fmt: Optional[str] = None  # png (default) or svg; inferred from out
    dpi: int = 150

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown figure kind {self.kind!r}, pick one of {KINDS}")
        fmt = self.fmt or (os.path.splitext(self.out)[1][1:].lower() or "png")
        if fmt not in ("png", "svg"):
            raise InputError(f"unsupported format {fmt!r}, use png or svg")
        object.__setattr__(self, "fmt", fmt)
        if self.dpi <= 0:
            raise InputError("dpi must be positive")


def _curve(ax, times, states, **style):
    """One line per file: 1-D paths against time, wider states as a plane."""
    if states.shape[1] == 1:
        (line,) = ax.plot(times, states[:, 0], **style)
    else:
        (line,) = ax.plot(states[:, 0], states[:, 1], **style)
    return line


def _render_overlay(ax, input_dir, manifest):
    fig1 = manifest["experiments"]["fig1"]
    labels = []
    for rel in fig1["samples"]:
        _curve(ax, *read_path_csv(os.path.join(input_dir, rel)), **_THIN)
        labels.append(None)
    times, states = read_path_csv(os.path.join(input_dir, fig1["mpp"]))
    _curve(ax, times, states, label="most probable path", **_THICK)
    labels.append("most probable path")
    ax.set_xlabel("t" if states.shape[1] == 1 else "x1")
    ax.set_ylabel("x" if states.shape[1] == 1 else "x2")
    ax.legend(loc="upper left")
    return labels


def _sweep_entries(input_dir, manifest):
    sweep = manifest["experiments"]["sweep"]
    out = []
    for rel, (a, b), p in zip(sweep["paths"], sweep["ab"], sweep["P"]):
        times, states = read_path_csv(os.path.join(input_dir, rel))
        out.append((times, states, float(a), float(b), float(p)))
    if not out:
        raise InputError(f"{input_dir}: manifest lists no sweep paths")
    return out


def _render_grid(fig, input_dir, manifest):
    entries = _sweep_entries(input_dir, manifest)
    ncols = 2
    nrows = (len(entries) + ncols - 1) // ncols
    labels = []
    for i, (times, states, a, b, _) in enumerate(entries):
        ax = fig.add_subplot(nrows, ncols, i + 1)
        for j in range(states.shape[1]):
            name = f"x{j + 1}"
            ax.plot(times, states[:, j], linewidth=1.6,
                    linestyle="-" if j == 0 else "--", label=name)
            labels.append(f"a={a:g} b={b:g} {name}")
        ax.set_title(f"a = {a:g}, b = {b:g}")
        ax.set_xlabel("t")
        if i == 0:
            ax.legend(loc="upper left")
    return labels


def _render_comparison(ax, input_dir, manifest):
    labels = []
    for times, states, _, _, p in _sweep_entries(input_dir, manifest):
        label = f"P = {p:g}"
        _curve(ax, times, states, linewidth=1.8, label=label)
        labels.append(label)
    ax.set_xlabel("t" if states.shape[1] == 1 else "x1")
    ax.set_ylabel("x" if states.shape[1] == 1 else "x2")
    ax.legend(loc="upper left")
    return labels


def render_figure(spec: FigureSpec) -> dict:
    """Verify the input directory, draw, and write image + own manifest."""
    manifest = load_manifest(spec.input_dir)
    verified = verify_checksums(spec.input_dir, manifest)

    with plt.rc_context(_RC):
        if spec.kind == "mpp-grid":
            fig = plt.figure(figsize=(9.0, 7.0))
            labels = _render_grid(fig, spec.input_dir, manifest)
            fig.tight_layout()
        else:
            fig, ax = plt.subplots(figsize=(7.0, 5.0))
            if spec.kind == "paths-overlay":
                labels = _render_overlay(ax, spec.input_dir, manifest)
            else:
                labels = _render_comparison(ax, spec.input_dir, manifest)
            fig.tight_layout()
        out_dir = os.path.dirname(os.path.abspath(spec.out))
        os.makedirs(out_dir, exist_ok=True)
        meta = {"Software": "omplots"} if spec.fmt == "png" else {"Date": None}
        fig.savefig(spec.out, format=spec.fmt, dpi=spec.dpi, metadata=meta)
        plt.close(fig)

    record = {
        "kind": spec.kind,
        "image": os.path.basename(spec.out),
        "format": spec.fmt,
        "dpi": spec.dpi,
        "curves": len(labels),
        "labels": [v for v in labels if v is not None],
        "verified_input_files": verified,
    }
    with open(spec.out + ".manifest.json", "w") as f:
        json.dump(record, f, indent=2, sort_keys=True)
        f.write("\n")
    return record
