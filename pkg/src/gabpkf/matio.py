"""Matrix and vector files: plain CSV and MatrixMarket.

CSV is one row per line, comma-separated decimals, with an optional header
row (a first line that does not parse as numbers). Values are written with
``repr`` so a write/read round trip is exact.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

from .errors import MatrixFormatError

MTX_SUFFIXES = {".mtx", ".mm"}


def _parse_row(cells, path, lineno):
    try:
        return [float(c) for c in cells]
    except ValueError:
        bad = next(c for c in cells if not _is_float(c))
        raise MatrixFormatError(path, lineno, f"not a number: {bad!r}") from None


def _is_float(s):
    try:
        float(s)
        return True
    except ValueError:
        return False


def read_csv(path) -> np.ndarray:
    path = Path(path)
    rows = []
    width = None
    with path.open(newline="") as fh:
        for lineno, cells in enumerate(csv.reader(fh), start=1):
            cells = [c.strip() for c in cells]
            if not cells or all(c == "" for c in cells):
                continue
            if not rows and width is None and not all(_is_float(c) for c in cells):
                # header row
                width = len(cells)
                continue
            row = _parse_row(cells, path, lineno)
            if width is not None and len(row) != width:
                raise MatrixFormatError(path, lineno, f"expected {width} columns, got {len(row)}")
            width = len(row)
            rows.append(row)
    if not rows:
        raise MatrixFormatError(path, None, "no numeric rows")
    return np.array(rows, dtype=float)


def write_csv(path, m, header=None) -> None:
    m = np.atleast_2d(np.asarray(m, dtype=float))
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        if header is not None:
            w.writerow(header)
        for row in m:
            w.writerow([repr(float(v)) for v in row])


def read_mtx(path, sparse=False):
    try:
        m = scipy.io.mmread(str(path))
    except (ValueError, OSError) as exc:
        raise MatrixFormatError(path, None, str(exc)) from exc
    if sp.issparse(m):
        return m.tocsr() if sparse else m.toarray().astype(float)
    m = np.asarray(m, dtype=float)
    return sp.csr_matrix(m) if sparse else m


def write_mtx(path, m, symmetry="general") -> None:
    if not sp.issparse(m):
        m = np.atleast_2d(np.asarray(m, dtype=float))
    scipy.io.mmwrite(str(path), m, precision=17, symmetry=symmetry)


def read_matrix(path, sparse=False):
    """Read a matrix from ``.mtx``/``.mm`` (MatrixMarket) or CSV."""
    path = Path(path)
    if path.suffix.lower() in MTX_SUFFIXES:
        return read_mtx(path, sparse=sparse)
    m = read_csv(path)
    return sp.csr_matrix(m) if sparse else m


def write_matrix(path, m) -> None:
    path = Path(path)
    if path.suffix.lower() in MTX_SUFFIXES:
        write_mtx(path, m)
    else:
        write_csv(path, m.toarray() if sp.issparse(m) else m)


def read_vector(path) -> np.ndarray:
    """A vector stored as a single row or a single column."""
    m = read_matrix(path)
    if sp.issparse(m):
        m = m.toarray()
    if m.ndim == 2 and 1 not in m.shape:
        raise MatrixFormatError(path, None, f"expected a vector, got shape {m.shape}")
    return m.ravel()
