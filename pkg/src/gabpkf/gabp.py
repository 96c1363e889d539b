"""Gaussian belief propagation for symmetric linear systems ``A x = b``.

The system is read as an undirected graphical model with one node per
variable and one edge per nonzero off-diagonal ``A_ij``. Each directed edge
``i -> j`` carries a scalar message ``(P_ij, mu_ij)`` (precision, mean).
One round recomputes every message from

    P_i\\j  = P_ii + sum_{k in N(i)\\j} P_ki
    mu_i\\j = (P_ii mu_ii + sum_{k in N(i)\\j} P_ki mu_ki) / P_i\\j
    P_ij    = -A_ij A_ji / P_i\\j
    mu_ij   = -A_ij mu_i\\j / P_ij

starting from ``P_ii = A_ii``, ``mu_ii = b_i / A_ii`` and zero messages. At a
fixed point the marginal means solve the system exactly.

Messages are stored as flat arrays indexed by directed edge, with edges
sorted by ``(source, target)``; dense and ``scipy.sparse`` inputs are both
accepted.
"""
from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .errors import (
    DimensionMismatch,
    Divergence,
    GabpRuntimeError,
    NonPositiveDiagonal,
    NotConverged,
    ZeroDiagonal,
    ZeroIntermediatePrecision,
    ZeroMarginalPrecision,
)

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10


class Schedule(str, enum.Enum):
    SYNCHRONOUS = "synchronous"
    SEQUENTIAL = "sequential"


def default_max_rounds(n: int) -> int:
    return 10 * n + 200


def _offdiag_coo(a):
    """(rows, cols, values, diag) of a square dense or sparse matrix."""
    if sp.issparse(a):
        a = sp.coo_matrix(a, dtype=float)
        a.sum_duplicates()
        a.eliminate_zeros()
        diag = a.diagonal().astype(float)
        mask = a.row != a.col
        return a.row[mask], a.col[mask], a.data[mask], diag
    a = np.asarray(a, dtype=float)
    diag = np.diag(a).copy()
    off = a.copy()
    np.fill_diagonal(off, 0.0)
    rows, cols = np.nonzero(off)
    return rows, cols, off[rows, cols], diag


def _check_symmetric(a, rtol=1e-12):
    if sp.issparse(a):
        diff = abs(a - a.T)
        worst = diff.max() if diff.nnz else 0.0
        scale = max(1.0, abs(a).max() if a.nnz else 0.0)
        ok = worst <= rtol * scale
    else:
        ok = bool(np.all(np.abs(a - a.T) <= rtol * np.maximum(1.0, np.abs(a))))
    if not ok:
        raise DimensionMismatch("system matrix is not symmetric")


@dataclass(frozen=True, eq=False)
class GabpGraph:
    """Graph of a symmetric system; edges ``src[e] -> dst[e]``.

    ``w_out[e]`` is ``A_ij`` and ``w_in[e]`` is ``A_ji`` for ``e = (i, j)``;
    ``rev[e]`` is the index of ``j -> i``; the outgoing edges of node ``i``
    are ``out_ptr[i]:out_ptr[i + 1]``.
    """

    n: int
    diag: np.ndarray
    b: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    w_out: np.ndarray
    w_in: np.ndarray
    rev: np.ndarray
    out_ptr: np.ndarray

    @classmethod
    def from_system(cls, a, b, check_symmetric=True) -> "GabpGraph":
        shape = a.shape
        if len(shape) != 2 or shape[0] != shape[1]:
            raise DimensionMismatch(f"system matrix must be square, got {shape}")
        n = shape[0]
        b = np.asarray(b, dtype=float).ravel()
        if b.shape[0] != n:
            raise DimensionMismatch(f"b has length {b.shape[0]}, expected {n}")
        if check_symmetric:
            _check_symmetric(a if sp.issparse(a) else np.asarray(a, dtype=float))
        rows, cols, vals, diag = _offdiag_coo(a)
        order = np.lexsort((cols, rows))
        src, dst, w_out = rows[order].astype(np.int64), cols[order].astype(np.int64), vals[order]
        # index of the reverse edge: position of (dst, src) in the (src, dst) ordering
        key = src * n + dst
        rkey = dst * n + src
        rev = np.searchsorted(key, rkey)
        if rev.size and (np.any(rev >= key.size) or np.any(key[np.minimum(rev, key.size - 1)] != rkey)):
            raise DimensionMismatch("sparsity pattern is not symmetric")
        w_in = w_out[rev]
        out_ptr = np.searchsorted(src, np.arange(n + 1))
        return cls(n, diag, b, src, dst, w_out, w_in, rev, out_ptr)

    @property
    def num_edges(self) -> int:
        """Number of directed edges (twice the undirected count)."""
        return int(self.src.size)

    def neighbors(self, i: int) -> np.ndarray:
        return self.dst[self.out_ptr[i]:self.out_ptr[i + 1]]

    def edge_index(self, i: int, j: int) -> int:
        lo, hi = self.out_ptr[i], self.out_ptr[i + 1]
        k = lo + int(np.searchsorted(self.dst[lo:hi], j))
        if k >= hi or self.dst[k] != j:
            raise KeyError((i, j))
        return k


class GabpMessage(NamedTuple):
    precision: float
    mean: float


@dataclass(frozen=True, eq=False)
class GabpState:
    graph: GabpGraph
    precision: np.ndarray
    mean: np.ndarray
    round: int = 0

    @property
    def self_precision(self) -> np.ndarray:
        return self.graph.diag

    @property
    def self_mean(self) -> np.ndarray:
        return self.graph.b / self.graph.diag

    @property
    def messages(self) -> dict:
        """``{(i, j): GabpMessage}`` for every directed edge."""
        g = self.graph
        return {
            (int(i), int(j)): GabpMessage(float(p), float(m))
            for i, j, p, m in zip(g.src, g.dst, self.precision, self.mean)
        }


@dataclass
class SolveReport:
    solution: np.ndarray
    marginal_precisions: np.ndarray
    rounds: int
    converged: bool
    residual_history: list
    error: str | None = None
    state: GabpState | None = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        d = {
            "solution": [float(v) for v in self.solution],
            "marginal_precisions": [float(v) for v in self.marginal_precisions],
            "rounds": int(self.rounds),
            "converged": bool(self.converged),
            "residual_history": [float(v) for v in self.residual_history],
        }
        if self.error is not None:
            d["error"] = self.error
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def init(graph: GabpGraph) -> GabpState:
    zero = np.flatnonzero(graph.diag == 0)
    if zero.size:
        raise ZeroDiagonal(f"A_ii = 0 for i in {zero.tolist()}")
    m = graph.num_edges
    return GabpState(graph, np.zeros(m), np.zeros(m), 0)


def _edge_update(p_self, h_self, p_in, h_in, p_back, h_back, w_out, w_in):
    """Outgoing message from aggregated incoming messages (vectorised)."""
    p_excl = p_self + (p_in - p_back)
    if np.any(p_excl == 0):
        raise ZeroIntermediatePrecision("P_i\\j = 0")
    # overflow surfaces as a non-finite message and is reported as Divergence
    with np.errstate(over="ignore", invalid="ignore"):
        mu_excl = (h_self + (h_in - h_back)) / p_excl
        p_new = -w_out * w_in / p_excl
        if np.any(p_new == 0):
            raise ZeroIntermediatePrecision("P_ij = 0")
        mu_new = -(w_out * mu_excl) / p_new
    return p_new, mu_new


def _incoming_sums(graph: GabpGraph, precision, mean):
    h = precision * mean
    p_in = np.bincount(graph.dst, weights=precision, minlength=graph.n)
    h_in = np.bincount(graph.dst, weights=h, minlength=graph.n)
    return p_in, h_in, h


def iterate_round(state: GabpState, schedule=Schedule.SYNCHRONOUS, damping: float = 0.0) -> GabpState:
    """One round of message updates; returns a new state.

    Synchronous rounds compute every message from the previous round's
    values. Sequential rounds visit nodes ``0..n-1`` and each node uses the
    freshest messages available. ``damping`` (default off) mixes the old
    message back in: ``new <- (1 - damping) new + damping old``.
    """
    g = state.graph
    schedule = Schedule(schedule)
    if g.num_edges == 0:
        return GabpState(g, state.precision, state.mean, state.round + 1)
    p_self = g.diag
    h_self = g.b  # P_ii * mu_ii
    if schedule is Schedule.SYNCHRONOUS:
        p_in, h_in, h = _incoming_sums(g, state.precision, state.mean)
        s = g.src
        p_new, mu_new = _edge_update(
            p_self[s], h_self[s], p_in[s], h_in[s],
            state.precision[g.rev], h[g.rev], g.w_out, g.w_in,
        )
    else:
        p_new = state.precision.copy()
        mu_new = state.mean.copy()
        for i in range(g.n):
            lo, hi = g.out_ptr[i], g.out_ptr[i + 1]
            if lo == hi:
                continue
            back = g.rev[lo:hi]
            p_back = p_new[back]
            h_back = p_back * mu_new[back]
            p_in = 0.0
            h_in = 0.0
            for pb, hb in zip(p_back, h_back):
                p_in += pb
                h_in += hb
            p_new[lo:hi], mu_new[lo:hi] = _edge_update(
                p_self[i], h_self[i], p_in, h_in, p_back, h_back, g.w_out[lo:hi], g.w_in[lo:hi]
            )
    if damping:
        p_new = (1.0 - damping) * p_new + damping * state.precision
        mu_new = (1.0 - damping) * mu_new + damping * state.mean
    if not (np.all(np.isfinite(p_new)) and np.all(np.isfinite(mu_new))):
        raise Divergence(f"non-finite message in round {state.round + 1}")
    return GabpState(g, p_new, mu_new, state.round + 1)


def message_delta(prev: GabpState, nxt: GabpState) -> float:
    if prev.precision.size == 0:
        return 0.0
    return float(max(np.max(np.abs(nxt.precision - prev.precision)),
                     np.max(np.abs(nxt.mean - prev.mean))))


def has_converged(prev: GabpState, nxt: GabpState, tol: float) -> bool:
    return message_delta(prev, nxt) <= tol


def infer(state: GabpState) -> SolveReport:
    """Marginal precisions and means from the current messages."""
    g = state.graph
    p_in, h_in, _ = _incoming_sums(g, state.precision, state.mean)
    p_marg = g.diag + p_in
    if np.any(p_marg == 0):
        raise ZeroMarginalPrecision(f"P_i = 0 for i in {np.flatnonzero(p_marg == 0).tolist()}")
    mu = (g.b + h_in) / p_marg
    return SolveReport(mu, p_marg, state.round, False, [], state=state)


def solve(a, b, tol: float = DEFAULT_TOL, max_rounds: int | None = None,
          schedule=Schedule.SYNCHRONOUS, damping: float = 0.0) -> SolveReport:
    """Run init / iterate / check until the message deltas fall below ``tol``.

    Runtime failures (divergence, zero intermediate precision) end the loop
    and are reported through ``converged=False`` and ``error``; malformed
    input raises.
    """
    graph = GabpGraph.from_system(a, b)
    if max_rounds is None:
        max_rounds = default_max_rounds(graph.n)
    state = init(graph)
    history = []
    converged = graph.num_edges == 0
    error = None
    while not converged and state.round < max_rounds:
        try:
            nxt = iterate_round(state, schedule, damping)
        except GabpRuntimeError as exc:
            error = f"{type(exc).__name__}: {exc}"
            break
        delta = message_delta(state, nxt)
        history.append(delta)
        state = nxt
        converged = delta <= tol
    try:
        report = infer(state)
    except ZeroMarginalPrecision as exc:
        nan = np.full(graph.n, np.nan)
        report = SolveReport(nan, nan, state.round, False, [], state=state)
        error = error or f"ZeroMarginalPrecision: {exc}"
        converged = False
    report.converged = converged
    report.residual_history = history
    report.error = error
    if not converged:
        log.debug("GaBP stopped after %d rounds without converging (%s)", state.round, error)
    return report


def invert_via_gabp(a, tol: float = DEFAULT_TOL, max_rounds: int | None = None,
                    schedule=Schedule.SYNCHRONOUS) -> np.ndarray:
    """Inverse of ``a`` column by column, ``solve(a, e_i)``."""
    n = a.shape[0]
    inv = np.empty((n, n))
    failing = []
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        rep = solve(a, e, tol, max_rounds, schedule)
        inv[:, i] = rep.solution
        if not rep.converged:
            failing.append(i)
    if failing:
        raise NotConverged(f"GaBP did not converge for columns {failing}", partial=inv, failing=failing)
    return inv


def diagonal_dominance_check(a) -> bool:
    """Strict row diagonal dominance ``|A_ii| > sum_{j != i} |A_ij|``."""
    if sp.issparse(a):
        absa = abs(sp.csr_matrix(a, dtype=float))
        d = absa.diagonal()
        off = np.asarray(absa.sum(axis=1)).ravel() - d
    else:
        absa = np.abs(np.asarray(a, dtype=float))
        d = np.diag(absa)
        off = absa.sum(axis=1) - d
    return bool(np.all(d > off))


class SpectralCheck(NamedTuple):
    radius: float
    satisfied: bool


def spectral_radius_check(a, tol: float = 1e-12, max_iter: int = 100_000) -> SpectralCheck:
    """Walk-summability test ``rho(|I - A_norm|) < 1``.

    ``A_norm = D^{-1/2} A D^{-1/2}`` has unit diagonal. The radius of the
    nonnegative matrix ``M = |I - A_norm|`` is found by power iteration on
    ``M + I`` (the shift keeps the iteration aperiodic); the Rayleigh
    quotient is the estimate.
    """
    rows, cols, vals, diag = _offdiag_coo(a)
    if np.any(diag <= 0):
        raise NonPositiveDiagonal("spectral radius check needs a positive diagonal")
    n = diag.size
    if rows.size == 0:
        return SpectralCheck(0.0, True)
    s = 1.0 / np.sqrt(diag)
    m = sp.csr_matrix((np.abs(vals * s[rows] * s[cols]), (rows, cols)), shape=(n, n))
    x = np.full(n, 1.0 / np.sqrt(n))
    lam = 0.0
    for _ in range(max_iter):
        mx = m @ x
        new = float(x @ mx)
        y = mx + x
        x = y / np.linalg.norm(y)
        if abs(new - lam) <= tol * max(1.0, abs(new)):
            lam = new
            break
        lam = new
    else:
        log.warning("power iteration hit max_iter=%d; radius estimate %.6g", max_iter, lam)
    return SpectralCheck(lam, lam < 1.0)
