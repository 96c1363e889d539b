"""Affine-scaling interior-point method for ``min c^T x  s.t.  A x = b, x >= 0``.

From a strictly feasible ``x`` with ``D = diag(x)``::

    w     = (A D^2 A^T)^-1 A D^2 c
    r     = c - A^T w
    P     = I - D A^T (A D^2 A^T)^-1 A D
    gamma = max_i (P D c)_i
    x'    = x - (alpha / gamma) D^2 r

Since ``D r = P D c`` every component shrinks by at most a factor ``alpha``,
so ``x'`` stays positive, and ``A D^2 r = 0`` keeps ``A x' = b``. Because
``gamma -> 0`` at the optimum, ``P D c`` must be accurate relative to its own
size; the dual estimate ``w`` is refined iteratively to get there.

The same iteration is a Kalman round with transition and measurement
``A D``, unit process and measurement noise and zero prior covariance; its
posterior ``I - D A^T (A D^2 A^T + I)^-1 A D`` is the unit-regularised form
of the projector ``P``.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import gabp
from .errors import (
    DegenerateStep,
    DimensionMismatch,
    InfeasibleStart,
    MatrixFormatError,
    NotConverged,
    SingularMatrix,
    SingularNormalMatrix,
)
from .kalman import KalmanModel, build_e_matrix
from .linalg import COND_LIMIT, as_matrix, as_vector, condition_estimate, direct_inverse

GAMMA_MIN = 1e-14
REFINE_STEPS = 2


@dataclass(frozen=True)
class LpProblem:
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a", as_matrix(self.a, "A"))
        object.__setattr__(self, "b", as_vector(self.b, "b"))
        object.__setattr__(self, "c", as_vector(self.c, "c"))
        p, n = self.a.shape
        if self.b.shape[0] != p or self.c.shape[0] != n:
            raise DimensionMismatch(f"A is {self.a.shape}, b has {self.b.shape[0]}, c has {self.c.shape[0]}")
        if not p < n:
            raise DimensionMismatch(f"need fewer constraints than variables, got {p} x {n}")
        if condition_estimate(self.a @ self.a.T) > COND_LIMIT:
            raise DimensionMismatch("constraint matrix is rank deficient")

    def objective(self, x) -> float:
        return float(self.c @ x)


@dataclass(frozen=True)
class AffineStep:
    r: np.ndarray
    w: np.ndarray
    gamma: float
    decrease: float = 0.0  # alpha |P D c|^2 / gamma, the exact-arithmetic drop in c^T x


@dataclass(frozen=True)
class AffineState:
    x: np.ndarray
    iteration: int = 0
    last_step: AffineStep | None = None


@dataclass(frozen=True)
class StepDiagnostics:
    d: np.ndarray
    p: np.ndarray
    objective: float


def _normal_inverse(a, d2, use_gabp=False, tol=1e-12):
    m = a @ np.diag(d2) @ a.T
    if use_gabp:
        try:
            return gabp.invert_via_gabp(m, tol)
        except NotConverged as exc:
            exc.step = "normal matrix"
            raise
    try:
        return direct_inverse(m)
    except SingularMatrix as exc:
        raise SingularNormalMatrix(str(exc)) from exc


def projection_matrix(problem: LpProblem, x) -> np.ndarray:
    """``I - D A^T (A D^2 A^T)^-1 A D`` at the point ``x``."""
    x = as_vector(x, "x")
    ad = problem.a * x
    return np.eye(x.size) - ad.T @ _normal_inverse(problem.a, x * x) @ ad


def step_diagnostics(problem: LpProblem, state: AffineState) -> StepDiagnostics:
    x = state.x
    return StepDiagnostics(np.diag(x), projection_matrix(problem, x), problem.objective(x))


def check_feasible(problem: LpProblem, x, atol=1e-8) -> None:
    x = as_vector(x, "x0")
    if x.shape[0] != problem.a.shape[1]:
        raise InfeasibleStart(f"x0 has length {x.shape[0]}, expected {problem.a.shape[1]}")
    if not np.all(x > 0):
        raise InfeasibleStart("x0 must be strictly positive")
    resid = np.max(np.abs(problem.a @ x - problem.b))
    if resid > atol * max(1.0, np.max(np.abs(problem.b))):
        raise InfeasibleStart(f"|A x0 - b| = {resid:.3g}")


def affine_step(problem: LpProblem, state: AffineState, alpha: float = 0.5,
                use_gabp: bool = False) -> AffineState:
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    a, c, x = problem.a, problem.c, state.x
    d2 = x * x
    m_inv = _normal_inverse(a, d2, use_gabp)
    w = m_inv @ (a @ (d2 * c))
    r = c - a.T @ w
    # iterative refinement: P D c = P D r for any dual estimate, and D r -> 0
    # near the optimum, so each pass cuts the error relative to P D c itself
    for _ in range(REFINE_STEPS):
        dw = m_inv @ (a @ (d2 * r))
        w = w + dw
        r = r - a.T @ dw
    pdc = x * r  # = P D c
    gamma = float(np.max(pdc))
    if not gamma > GAMMA_MIN:
        exc = DegenerateStep(f"gamma = {gamma:.3g}: projected cost gives no descent direction")
        exc.direction = pdc
        raise exc
    # x - (alpha / gamma) D^2 r, written per component so x stays positive
    x_new = x * (1.0 - (alpha / gamma) * pdc)
    step = AffineStep(r, w, gamma, alpha * float(pdc @ pdc) / gamma)
    return AffineState(x_new, state.iteration + 1, step)


def solve_lp(problem: LpProblem, x0, alpha: float = 0.5, tol: float = 1e-10,
             max_iter: int = 500, use_gabp: bool = False, history: list | None = None):
    """Iterate affine steps; returns ``(best_state, converged)``.

    Converged when the next step would lower the objective by at most
    ``tol * max(1, |c^T x|)`` (such a step is round-off and is not taken),
    when ``|D r|`` is below ``tol``, or when the projected cost vanishes. A
    nonzero projected cost with ``gamma <= 0`` means the LP is unbounded and
    is reported as not converged. States are appended to ``history``.
    """
    check_feasible(problem, x0)
    state = AffineState(as_vector(x0, "x0").copy())
    if history is not None:
        history.append(state)
    for _ in range(max_iter):
        f = problem.objective(state.x)
        try:
            nxt = affine_step(problem, state, alpha, use_gabp)
        except DegenerateStep as exc:
            scale = max(1.0, float(np.max(np.abs(state.x * problem.c))))
            return state, bool(np.max(np.abs(exc.direction)) <= tol * scale)
        step = nxt.last_step
        if step.decrease <= tol * max(1.0, abs(f)) or np.max(np.abs(state.x * step.r)) <= tol:
            return state, True
        if not np.all(np.isfinite(nxt.x)):
            return state, False
        state = nxt
        if history is not None:
            history.append(state)
    return state, False


def affine_block_matrix(problem: LpProblem, state: AffineState) -> np.ndarray:
    """``[[0, AD, 0], [DA^T, I, DA^T], [0, AD, I]]``.

    This is the E matrix of the Kalman round given by
    ``kalman_params_from_lp``; the ``(2,3)`` block is ``D A^T`` and the
    ``(3,2)`` block ``A D`` so the blocks conform when ``p != n``.
    """
    model, p_prev = kalman_params_from_lp(problem, state)
    return build_e_matrix(p_prev, model)


build_appendix_d_block = affine_block_matrix


def kalman_params_from_lp(problem: LpProblem, state: AffineState):
    """Kalman model ``A = H = A D``, ``Q = I_n``, ``R = I_p`` and ``P_prev = 0``."""
    x = as_vector(state.x, "x")
    p, n = problem.a.shape
    if x.shape[0] != n:
        raise DimensionMismatch(f"x has length {x.shape[0]}, expected {n}")
    ad = problem.a * x
    return KalmanModel(ad, ad, np.eye(n), np.eye(p)), np.zeros((p, p))


def vertex_enumeration(problem: LpProblem):
    """Brute-force optimum over basic feasible solutions: ``(x*, f*)``.

    Returns ``(None, inf)`` if no vertex is feasible.
    """
    p, n = problem.a.shape
    best_x, best_f = None, np.inf
    for cols in itertools.combinations(range(n), p):
        basis = problem.a[:, cols]
        if abs(np.linalg.det(basis)) < 1e-12:
            continue
        xb = np.linalg.solve(basis, problem.b)
        if np.any(xb < -1e-12):
            continue
        x = np.zeros(n)
        x[list(cols)] = xb
        f = problem.objective(x)
        if f < best_f:
            best_x, best_f = x, f
    return best_x, best_f


def load_lp(path):
    """LP from JSON ``{A, b, c, x0?}`` or the plain text form.

    The text form is whitespace-separated rows: the rows of ``A``, then
    ``b``, then ``c`` (and optionally ``x0`` as a fourth block, separated by
    a blank line). Without blank lines the last two rows are ``b`` and ``c``.
    Returns ``(problem, x0 or None)``.
    """
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".json":
        d = json.loads(text)
        return LpProblem(d["A"], d["b"], d["c"]), (as_vector(d["x0"]) if d.get("x0") is not None else None)
    blocks, cur = [], []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            if cur:
                blocks.append(cur)
                cur = []
            continue
        try:
            cur.append([float(t) for t in line.replace(",", " ").split()])
        except ValueError:
            raise MatrixFormatError(path, lineno, f"not a row of numbers: {line!r}") from None
    if cur:
        blocks.append(cur)
    if len(blocks) == 1:
        rows = blocks[0]
        if len(rows) < 3:
            raise MatrixFormatError(path, None, "need rows of A, then b, then c")
        return LpProblem(rows[:-2], rows[-2], rows[-1]), None
    if len(blocks) in (3, 4):
        x0 = as_vector(blocks[3][0]) if len(blocks) == 4 else None
        return LpProblem(blocks[0], blocks[1][0], blocks[2][0]), x0
    raise MatrixFormatError(path, None, f"expected 3 or 4 blank-line separated blocks, got {len(blocks)}")


def lp_trace(problem: LpProblem, history: list) -> list:
    """Per-iteration records ``{iter, x, objective, gamma}``."""
    return [{"iter": s.iteration, "x": [float(v) for v in s.x], "objective": problem.objective(s.x),
             "gamma": None if s.last_step is None else s.last_step.gamma} for s in history]
