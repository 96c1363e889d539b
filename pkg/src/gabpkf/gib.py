"""Gaussian information bottleneck iterations and their Kalman reading.

The compressed variable is ``T_k = A_k X + xi_k`` with ``xi_k ~ N(0, S_xi_k)``.
One round computes

    S_t    = A_k S_x A_k^T + S_xi_k
    S_t|y  = S_t - S_ty S_y^-1 S_yt          (S_ty = A_k S_xy)
    S_xi'  = (beta S_t|y^-1 - (beta - 1) S_t^-1)^-1
    A'     = beta S_xi' S_t|y^-1 A_k (I - S_x|y S_x^-1)

At ``beta = 1`` the noise update is ``S_xi' = S_t|y``, which is exactly a
Kalman posterior covariance: predict with transition ``A_k`` and process
noise ``S_xi`` from prior ``S_x`` to get ``S_t``, then condition on ``Y``.
For ``beta > 1`` the same two Kalman phases feed the covariance-space blend
``beta S_t|y + (1 - beta) S_t``.

Alternative forms of both updates are kept callable for comparison:
``xi_form="printed"`` is the literal ``beta S_t|y - (beta - 1) S_t^-1`` (which
mixes a covariance with a precision) and ``xi_form="blend"`` the
covariance-space blend; ``conditional="y|x"`` uses ``S_y|x`` in the ``A``
update, which only type-checks when X and Y have equal dimension.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BetaOutOfRange, DimensionMismatch, SingularCovariance, SingularMatrix
from .kalman import KalmanModel, _classical_step, two_schur_step
from .linalg import BlockMatrix2x2, Inverter, as_matrix, direct_inverse, schur_complement, symmetrize


def _inv(m, what, invert: Inverter = direct_inverse):
    try:
        return invert(m)
    except SingularMatrix as exc:
        raise SingularCovariance(f"{what}: {exc}") from exc


@dataclass(frozen=True)
class GibProblem:
    sigma_x: np.ndarray
    sigma_y: np.ndarray
    sigma_xy: np.ndarray
    beta: float = 1.0

    def __post_init__(self):
        for name in ("sigma_x", "sigma_y", "sigma_xy"):
            object.__setattr__(self, name, as_matrix(getattr(self, name), name))
        dx, dy = self.sigma_x.shape[0], self.sigma_y.shape[0]
        if self.sigma_x.shape != (dx, dx) or self.sigma_y.shape != (dy, dy):
            raise DimensionMismatch("sigma_x and sigma_y must be square")
        if self.sigma_xy.shape != (dx, dy):
            raise DimensionMismatch(f"sigma_xy is {self.sigma_xy.shape}, expected {(dx, dy)}")
        if not self.beta > 0:
            raise BetaOutOfRange(f"beta must be positive, got {self.beta}")
        joint = self.joint
        if not np.allclose(joint, joint.T, rtol=1e-12, atol=1e-12):
            raise SingularCovariance("joint covariance is not symmetric")
        try:
            np.linalg.cholesky(joint)
        except np.linalg.LinAlgError:
            raise SingularCovariance("joint covariance of (X, Y) is not positive definite") from None

    @property
    def sigma_yx(self) -> np.ndarray:
        return self.sigma_xy.T

    @property
    def joint(self) -> np.ndarray:
        return np.block([[self.sigma_x, self.sigma_xy], [self.sigma_yx, self.sigma_y]])

    @property
    def sigma_x_given_y(self) -> np.ndarray:
        return symmetrize(schur_complement(BlockMatrix2x2(self.sigma_y, self.sigma_yx, self.sigma_xy, self.sigma_x)))

    @property
    def sigma_y_given_x(self) -> np.ndarray:
        return symmetrize(schur_complement(BlockMatrix2x2(self.sigma_x, self.sigma_xy, self.sigma_yx, self.sigma_y)))

    def with_beta(self, beta: float) -> "GibProblem":
        return GibProblem(self.sigma_x, self.sigma_y, self.sigma_xy, beta)

    @classmethod
    def from_dict(cls, d: dict) -> "GibProblem":
        return cls(d["sigma_x"], d["sigma_y"], d["sigma_xy"], float(d.get("beta", 1.0)))

    def to_dict(self) -> dict:
        return {"sigma_x": self.sigma_x.tolist(), "sigma_y": self.sigma_y.tolist(),
                "sigma_xy": self.sigma_xy.tolist(), "beta": float(self.beta)}


def load_gib_json(path) -> GibProblem:
    return GibProblem.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class GibState:
    a: np.ndarray
    sigma_xi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a", as_matrix(self.a, "A_k"))
        object.__setattr__(self, "sigma_xi", as_matrix(self.sigma_xi, "sigma_xi"))
        if self.sigma_xi.shape != (self.a.shape[0],) * 2:
            raise DimensionMismatch(f"sigma_xi is {self.sigma_xi.shape}, A_k is {self.a.shape}")


def initial_state(problem: GibProblem, seed: int = 0, scale: float = 0.1) -> GibState:
    """``A_0 = I + scale * N(0, 1)`` (seeded) and ``S_xi_0 = I``."""
    d = problem.sigma_x.shape[0]
    rng = np.random.default_rng(seed)
    return GibState(np.eye(d) + scale * rng.standard_normal((d, d)), np.eye(d))


def t_covariances(problem: GibProblem, state: GibState):
    """``(S_t, S_t|y)`` for the current projection."""
    a = state.a
    if a.shape[1] != problem.sigma_x.shape[0]:
        raise DimensionMismatch(f"A_k is {a.shape}, X has dimension {problem.sigma_x.shape[0]}")
    sigma_t = symmetrize(a @ problem.sigma_x @ a.T + state.sigma_xi)
    sigma_ty = a @ problem.sigma_xy
    try:
        sigma_t_y = schur_complement(BlockMatrix2x2(problem.sigma_y, sigma_ty.T, sigma_ty, sigma_t))
    except SingularMatrix as exc:
        raise SingularCovariance(str(exc)) from exc
    return sigma_t, symmetrize(sigma_t_y)


def xi_update(beta: float, sigma_t, sigma_t_y, form: str = "amended") -> np.ndarray:
    if form == "amended":
        prec = beta * _inv(sigma_t_y, "S_t|y") - (beta - 1.0) * _inv(sigma_t, "S_t")
        return symmetrize(_inv(prec, "beta S_t|y^-1 - (beta-1) S_t^-1"))
    if form == "printed":
        return beta * sigma_t_y - (beta - 1.0) * _inv(sigma_t, "S_t")
    if form == "blend":
        return symmetrize(beta * sigma_t_y + (1.0 - beta) * sigma_t)
    raise ValueError(f"unknown form {form!r}")


def a_update(problem: GibProblem, state: GibState, sigma_xi_next, sigma_t_y,
             conditional: str = "x|y") -> np.ndarray:
    sx_inv = _inv(problem.sigma_x, "S_x")
    if conditional == "x|y":
        cond = problem.sigma_x_given_y
    elif conditional == "y|x":
        cond = problem.sigma_y_given_x
        if cond.shape != problem.sigma_x.shape:
            raise DimensionMismatch("S_y|x S_x^-1 needs X and Y of equal dimension")
    else:
        raise ValueError(f"unknown conditional {conditional!r}")
    right = np.eye(sx_inv.shape[0]) - cond @ sx_inv
    return problem.beta * sigma_xi_next @ _inv(sigma_t_y, "S_t|y") @ state.a @ right


def gib_iterate(problem: GibProblem, state: GibState, xi_form: str = "amended",
                conditional: str = "x|y") -> GibState:
    sigma_t, sigma_t_y = t_covariances(problem, state)
    xi = xi_update(problem.beta, sigma_t, sigma_t_y, xi_form)
    return GibState(a_update(problem, state, xi, sigma_t_y, conditional), xi)


def gib_fixed_point(problem: GibProblem, init: GibState, tol: float = 1e-10,
                    max_rounds: int = 1000, **kw):
    """Iterate until both ``A_k`` and ``S_xi`` move by at most ``tol`` (max-abs)."""
    state = init
    for k in range(1, max_rounds + 1):
        nxt = gib_iterate(problem, state, **kw)
        delta = max(np.max(np.abs(nxt.a - state.a)), np.max(np.abs(nxt.sigma_xi - state.sigma_xi)))
        state = nxt
        if delta <= tol:
            return state, k
    return state, max_rounds


def kalman_from_gib(problem: GibProblem, state: GibState, literal: bool = False):
    """Kalman model whose round reproduces the GIB covariances.

    Returns ``(model, p_prev)`` with ``p_prev = S_x``, transition ``A_k``,
    process noise ``S_xi``, and ``Y`` as the measurement of the predicted
    state: ``H = S_yt S_t^-1``, ``R = S_y - S_yt S_t^-1 S_ty``. With these,
    ``H S_t H^T + R = S_y`` and the Kalman posterior is ``S_t|y``.

    ``literal=True`` returns the shorthand dictionary ``H = A_k^T S_yx``,
    ``R = S_y`` instead; it needs square, equal dimensions and does not in
    general reproduce ``S_t|y``.
    """
    a = state.a
    if literal:
        if not (a.shape[0] == a.shape[1] == problem.sigma_y.shape[0] == problem.sigma_x.shape[0]):
            raise DimensionMismatch("literal mapping needs square A_k and equal X, Y dimensions")
        h, r = a.T @ problem.sigma_yx, problem.sigma_y
    else:
        sigma_t = symmetrize(a @ problem.sigma_x @ a.T + state.sigma_xi)
        sigma_yt = problem.sigma_yx @ a.T
        h = sigma_yt @ _inv(sigma_t, "S_t")
        r = symmetrize(problem.sigma_y - h @ sigma_yt.T)
    return KalmanModel(a, h, state.sigma_xi, r), problem.sigma_x


def gib_via_modified_kalman(problem: GibProblem, state: GibState, engine: str = "classical") -> GibState:
    """GIB round for ``beta >= 1`` through a Kalman round.

    The mapped model's prediction gives ``S_t`` and its measurement
    ``S_t|y``; the new noise covariance is ``beta S_t|y + (1 - beta) S_t``,
    then ``A`` is updated as in ``gib_iterate``. ``engine="schur"`` runs the
    block route, which uses ``A^T P A`` and so matches only for symmetric
    ``A_k``.
    """
    if problem.beta < 1:
        raise BetaOutOfRange(f"modified Kalman computation needs beta >= 1, got {problem.beta}")
    model, p_prev = kalman_from_gib(problem, state)
    if engine == "classical":
        sigma_t, sigma_t_y = _classical_step(p_prev, model)
    elif engine == "schur":
        sigma_t, sigma_t_y = two_schur_step(p_prev, model)
    else:
        raise ValueError(f"unknown engine {engine!r}")
    xi = xi_update(problem.beta, sigma_t, sigma_t_y, "blend")
    return GibState(a_update(problem, state, xi, sigma_t_y), xi)


def _logdet(m):
    sign, ld = np.linalg.slogdet(m)
    return ld if sign > 0 else np.nan


def information_terms(problem: GibProblem, state: GibState):
    """``(I(X;T), I(T;Y))`` in nats from the Gaussian log-det formulas."""
    sigma_t, sigma_t_y = t_covariances(problem, state)
    compression = 0.5 * (_logdet(sigma_t) - _logdet(state.sigma_xi))
    relevance = 0.5 * (_logdet(sigma_t) - _logdet(sigma_t_y))
    return float(compression), float(relevance)


def gib_trace(problem: GibProblem, init: GibState, rounds: int, tol: float | None = None, **kw) -> list:
    """Per-round records ``{k, A_k, Sigma_xi, info_compression, info_relevance}``.

    Runs ``rounds`` iterations, or fewer if both ``A_k`` and ``S_xi`` move by
    at most ``tol``.
    """
    def record(k, st):
        ic, ir = information_terms(problem, st)
        return {"k": k, "A_k": st.a.tolist(), "Sigma_xi": st.sigma_xi.tolist(),
                "info_compression": ic, "info_relevance": ir}

    state = init
    out = [record(0, state)]
    for k in range(1, rounds + 1):
        nxt = gib_iterate(problem, state, **kw)
        delta = max(np.max(np.abs(nxt.a - state.a)), np.max(np.abs(nxt.sigma_xi - state.sigma_xi)))
        state = nxt
        out.append(record(k, state))
        if tol is not None and delta <= tol:
            break
    return out
