"""Seeded random problem generators shared by tests and experiment scripts."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .gabp import spectral_radius_check
from .gib import GibProblem, GibState
from .kalman import KalmanModel


def random_symmetric(rng: np.random.Generator, n: int, density: float = 0.6,
                     scale: float = 1.0) -> np.ndarray:
    """Symmetric matrix with diagonal in ``[1, 2]`` and sparse normal off-diagonals."""
    off = rng.normal(scale=scale, size=(n, n)) * (rng.random((n, n)) < density)
    off = np.triu(off, 1)
    return off + off.T + np.diag(rng.uniform(1.0, 2.0, n))


def walk_summable(rng: np.random.Generator, n: int, max_tries: int = 1000) -> np.ndarray:
    """Random symmetric matrix that passes ``spectral_radius_check``."""
    for _ in range(max_tries):
        a = random_symmetric(rng, n, scale=rng.uniform(0.1, 1.0) / np.sqrt(n))
        if spectral_radius_check(a).satisfied:
            return a
    raise RuntimeError("no walk-summable draw")


def diagonally_dominant(rng: np.random.Generator, n: int, margin: float = 0.1) -> np.ndarray:
    """Symmetric, strictly diagonally dominant, mixed-sign diagonal allowed."""
    a = random_symmetric(rng, n, density=0.7)
    np.fill_diagonal(a, 0.0)
    rowsum = np.abs(a).sum(axis=1)
    sign = rng.choice([-1.0, 1.0], size=n)
    np.fill_diagonal(a, sign * (rowsum + margin + rng.random(n)))
    return a


def tridiagonal(n: int, off: float = -1.0, diag: float = 2.5) -> sp.csr_matrix:
    return sp.diags([off, diag, off], [-1, 0, 1], shape=(n, n), format="csr")


def cycle_system(n: int = 10, coupling: float = 0.45) -> np.ndarray:
    """``I + coupling * adjacency`` of an ``n``-cycle; walk-summable when ``coupling < 0.5``."""
    a = np.eye(n)
    for i in range(n):
        a[i, (i + 1) % n] = a[(i + 1) % n, i] = coupling
    return a


def spd(rng: np.random.Generator, n: int, floor: float = 0.5) -> np.ndarray:
    w = rng.normal(size=(n, n))
    return w @ w.T / n + floor * np.eye(n)


def kalman_case(rng: np.random.Generator, n: int, m: int, symmetric_a: bool = True):
    """``(model, p_prev)`` with an innovation matrix that is diagonally dominant.

    ``R`` is built after ``P-`` so that ``H P- H^T + R`` is dominant, which
    keeps the innovation solve inside GaBP's guaranteed region.
    """
    a = rng.normal(scale=0.7, size=(n, n))
    if symmetric_a:
        a = (a + a.T) / 2
    h = rng.normal(size=(m, n))
    q = spd(rng, n)
    p_prev = spd(rng, n)
    s0 = h @ (a @ p_prev @ a.T + q) @ h.T
    off = np.abs(s0).sum(axis=1) - np.abs(np.diag(s0))
    r = np.diag(off + rng.uniform(0.2, 1.0, m))
    return KalmanModel(a, h, q, r), p_prev


def gib_case(rng: np.random.Generator, d: int, beta: float = 1.0):
    """``(problem, state)`` with a valid joint and a symmetric ``A_k``."""
    joint = spd(rng, 2 * d, floor=0.3)
    problem = GibProblem(joint[:d, :d], joint[d:, d:], joint[:d, d:], beta)
    a = rng.normal(scale=0.5, size=(d, d))
    a = (a + a.T) / 2 + np.eye(d)
    return problem, GibState(a, spd(rng, d))


def bounded_lp(rng: np.random.Generator, p: int, n: int):
    """``(a, b, c, x0)``: first row positive so ``{A x = b, x >= 0}`` is bounded."""
    a = rng.normal(size=(p, n))
    a[0] = rng.uniform(0.5, 2.0, n)
    x0 = rng.uniform(0.2, 2.0, n)
    return a, a @ x0, rng.normal(size=n), x0
