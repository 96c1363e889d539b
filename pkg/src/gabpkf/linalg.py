"""Dense linear-algebra substrate.

Schur complements, MMSE conditioning of a partitioned Gaussian, the matrix
inversion lemma and a guarded direct inverse. The direct inverse is the
oracle every iterative result in the package is validated against, so it
refuses to return anything for badly conditioned input.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DimensionMismatch, SingularBlock, SingularMatrix

COND_LIMIT = 1e12

Inverter = Callable[[np.ndarray], np.ndarray]


def as_matrix(m, name="matrix") -> np.ndarray:
    arr = np.asarray(m, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {arr.shape}")
    return arr


def as_vector(v, name="vector") -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim == 2 and 1 in arr.shape:
        arr = arr.ravel()
    if arr.ndim != 1:
        raise DimensionMismatch(f"{name} must be 1-D, got shape {arr.shape}")
    return arr


def symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def is_symmetric(m, rtol=1e-12) -> bool:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    return bool(np.all(np.abs(m - m.T) <= rtol * np.maximum(1.0, np.abs(m))))


def condition_estimate(m: np.ndarray) -> float:
    if m.size == 0:
        return 1.0
    with np.errstate(all="ignore"):
        c = np.linalg.cond(m)
    return float(c) if np.isfinite(c) else np.inf


@dataclass(frozen=True)
class BlockMatrix2x2:
    """``[[a, b], [c, d]]`` with consistent block shapes."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        for name in "abcd":
            object.__setattr__(self, name, as_matrix(getattr(self, name), name))
        a, b, c, d = self.a, self.b, self.c, self.d
        if a.shape[0] != b.shape[0] or c.shape[0] != d.shape[0]:
            raise DimensionMismatch("row counts of block rows disagree")
        if a.shape[1] != c.shape[1] or b.shape[1] != d.shape[1]:
            raise DimensionMismatch("column counts of block columns disagree")

    @classmethod
    def split(cls, m, k: int) -> "BlockMatrix2x2":
        """Partition a square matrix after its first ``k`` rows/columns."""
        m = as_matrix(m)
        return cls(m[:k, :k], m[:k, k:], m[k:, :k], m[k:, k:])

    def full(self) -> np.ndarray:
        return np.block([[self.a, self.b], [self.c, self.d]])


@dataclass(frozen=True)
class ConditionalGaussian:
    mean: np.ndarray
    covariance: np.ndarray


def direct_inverse(m) -> np.ndarray:
    """LU-based inverse; raises SingularMatrix above the condition limit."""
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"cannot invert non-square {m.shape}")
    if m.shape[0] == 0:
        return m.copy()
    if not np.all(np.isfinite(m)):
        raise SingularMatrix("matrix has non-finite entries")
    cond = condition_estimate(m)
    if cond > COND_LIMIT:
        raise SingularMatrix(f"condition estimate {cond:.3g} exceeds {COND_LIMIT:.0e}")
    try:
        return np.linalg.inv(m)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrix(str(exc)) from exc


def _guarded(invert: Inverter, m: np.ndarray, what: str) -> np.ndarray:
    try:
        return invert(m)
    except SingularBlock:
        raise
    except SingularMatrix as exc:
        raise SingularBlock(f"{what}: {exc}") from exc


def schur_complement_from_inverse(ainv, b, c, d) -> np.ndarray:
    """``d - c @ ainv @ b`` when the inverse of the pivot block is at hand.

    The Kalman prediction step is exactly this with ``ainv = -P_{k-1}``,
    which stays valid for singular (e.g. zero) prior covariances.
    """
    ainv, b, c, d = (as_matrix(x, n) for x, n in zip((ainv, b, c, d), "ABCD"))
    if ainv.shape != (b.shape[0], c.shape[1]) or c.shape[0] != d.shape[0] or b.shape[1] != d.shape[1]:
        raise DimensionMismatch(
            f"blocks do not conform: ainv {ainv.shape}, b {b.shape}, c {c.shape}, d {d.shape}"
        )
    return d - c @ ainv @ b


def schur_complement(m: BlockMatrix2x2, invert: Inverter = direct_inverse) -> np.ndarray:
    """Schur complement ``D - C A^{-1} B`` of the upper-left block."""
    if m.a.shape[0] != m.a.shape[1]:
        raise DimensionMismatch("pivot block must be square")
    ainv = _guarded(invert, m.a, "pivot block")
    return schur_complement_from_inverse(ainv, m.b, m.c, m.d)


def mmse_condition(joint: BlockMatrix2x2, x, invert: Inverter = direct_inverse) -> ConditionalGaussian:
    """Condition the ``y`` block of a joint Gaussian on an observed ``x``.

    ``joint`` is ``[[S_xx, S_xy], [S_yx, S_yy]]``. The formulas are applied
    as written in the source construction::

        covariance = (S_yy - S_yx S_xx^{-1} S_xy)^{-1}
        mean       = covariance @ S_yx @ S_xx^{-1} @ x

    i.e. ``covariance`` is the inverse of the Schur complement of ``S_xx``.
    """
    x = as_vector(x, "x")
    if x.shape[0] != joint.a.shape[0]:
        raise DimensionMismatch(f"x has length {x.shape[0]}, S_xx is {joint.a.shape}")
    sxx_inv = _guarded(invert, joint.a, "S_xx")
    schur = schur_complement_from_inverse(sxx_inv, joint.b, joint.c, joint.d)
    cov = symmetrize(_guarded(invert, schur, "Schur complement"))
    mean = cov @ joint.c @ sxx_inv @ x
    return ConditionalGaussian(mean=mean, covariance=cov)


def matrix_inversion_lemma(ainv, b, c, d, invert: Inverter = direct_inverse) -> np.ndarray:
    """``ainv + ainv b (d - c ainv b)^{-1} c ainv``.

    Equals ``(A - b d^{-1} c)^{-1}`` for ``A = ainv^{-1}`` (Woodbury). The
    only inversion is of ``d - c ainv b`` and goes through ``invert``, so a
    distributed solver can be plugged in.
    """
    ainv, b, c, d = (as_matrix(x, n) for x, n in zip((ainv, b, c, d), "ABCD"))
    inner = schur_complement_from_inverse(ainv, b, c, d)
    inner_inv = _guarded(invert, inner, "d - c ainv b")
    return ainv + ainv @ b @ inner_inv @ c @ ainv
