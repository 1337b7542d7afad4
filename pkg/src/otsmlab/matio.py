"""Plain-text matrix exchange format (OTSM-MAT v1).

Layout: a header line ``OTSM-MAT 1 <rows> <cols>`` followed by the entries
in row-major order, whitespace separated, one row per line.  Values are
written with 17 significant digits, which round-trips IEEE doubles
bit-exactly.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import InvalidInput

_MAGIC = "OTSM-MAT"
_VERSION = 1


def dump_matrix(a: np.ndarray, path: str | os.PathLike) -> None:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise InvalidInput(f"only 2-d arrays are supported, got ndim={a.ndim}")
    rows, cols = a.shape
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{_MAGIC} {_VERSION} {rows} {cols}\n")
        for row in a:
            fh.write(" ".join(f"{x:.17g}" for x in row))
            fh.write("\n")


def load_matrix(path: str | os.PathLike) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 4 or header[0] != _MAGIC:
            raise InvalidInput(f"{path}: not an {_MAGIC} file")
        if header[1] != str(_VERSION):
            raise InvalidInput(f"{path}: unsupported format version {header[1]}")
        try:
            rows, cols = int(header[2]), int(header[3])
        except ValueError:
            raise InvalidInput(f"{path}: malformed header {header!r}") from None
        if rows < 0 or cols < 0:
            raise InvalidInput(f"{path}: negative dimensions in header")
        tokens = fh.read().split()
    if len(tokens) != rows * cols:
        raise InvalidInput(
            f"{path}: header promises {rows * cols} entries, found {len(tokens)}"
        )
    try:
        flat = np.array([float(t) for t in tokens], dtype=float)
    except ValueError as exc:
        raise InvalidInput(f"{path}: non-numeric entry: {exc}") from None
    return flat.reshape(rows, cols)
