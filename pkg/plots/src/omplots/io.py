"""Reading and verifying an ompath output directory.

The directory's ``manifest.json`` lists every produced file with its
sha256; nothing is rendered from a directory whose bytes do not match.
Path CSVs have the documented ``t,x1,...,xn`` header and one row per
grid node.
"""
from __future__ import annotations

import hashlib
import json
import os
from typing import Dict, List, Tuple

import numpy as np

__all__ = ["InputError", "load_manifest", "verify_checksums", "read_path_csv"]


class InputError(Exception):
    """Missing, malformed, or tampered input; the message names the file."""


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def load_manifest(input_dir: str) -> dict:
    mf = os.path.join(input_dir, "manifest.json")
    try:
        with open(mf, "r") as f:
            manifest = json.load(f)
    except OSError as e:
        raise InputError(f"cannot read {mf}: {e}") from e
    except json.JSONDecodeError as e:
        raise InputError(f"{mf}: not valid JSON ({e})") from e
    for key in ("files", "experiments"):
        if key not in manifest:
            raise InputError(f"{mf}: missing {key!r} section")
    return manifest


def verify_checksums(input_dir: str, manifest: dict) -> int:
    """Compare every listed file against its recorded sha256.

    Returns the number of verified files; raises naming the first file
    that is absent or whose bytes changed.
    """
    files: Dict[str, str] = manifest["files"]
    for rel in sorted(files):
        full = os.path.join(input_dir, rel)
        if not os.path.exists(full):
            raise InputError(f"{full}: listed in the manifest but missing")
        actual = _sha256(full)
        if actual != files[rel]:
            raise InputError(
                f"{full}: checksum mismatch (manifest {files[rel][:12]}..., "
                f"file {actual[:12]}...); refusing to plot stale or edited data"
            )
    return len(files)


def read_path_csv(path_file: str) -> Tuple[np.ndarray, np.ndarray]:
    """Load one path CSV; returns (times (K,), states (K, n))."""
    try:
        with open(path_file, "r") as f:
            raw = f.read().splitlines()
    except OSError as e:
        raise InputError(f"cannot read {path_file}: {e}") from e
    rows: List[Tuple[int, str]] = [
        (i + 1, line.strip()) for i, line in enumerate(raw) if line.strip()
    ]
    if not rows:
        raise InputError(f"{path_file}: empty file")
    header = [c.strip() for c in rows[0][1].split(",")]
    if header[0] != "t" or len(header) < 2:
        raise InputError(f"{path_file}:1: expected header 't,x1,...,xn'")
    data = []
    for lineno, line in rows[1:]:
        parts = line.split(",")
        if len(parts) != len(header):
            raise InputError(
                f"{path_file}:{lineno}: {len(parts)} fields, header has {len(header)}"
            )
        try:
            data.append([float(p) for p in parts])
        except ValueError:
            raise InputError(f"{path_file}:{lineno}: non-numeric field")
    if len(data) < 2:
        raise InputError(f"{path_file}: too short, a path needs at least 2 rows")
    arr = np.asarray(data, dtype=float)
    return arr[:, 0], arr[:, 1:]
