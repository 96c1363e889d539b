"""Discrete Kalman filter, classical and as two Schur-complement steps.

Classical round::

    x-  = A x + B u                P- = A P A^T + Q
    K   = P- H^T (H P- H^T + R)^-1
    x   = x- + K (z - H x-)        P  = (I - K H) P-

Block-matrix round: assemble ``E = [[-P, A, 0], [A^T, Q, H^T], [0, H, R]]``
and eliminate it in two steps. The first Schur complement (pivot inverse
``-P``) gives the prediction ``P- = Q + A^T P A``; the second, taken with the
matrix inversion lemma, gives ``P = P- - P- H^T (R + H P- H^T)^-1 H P-``.
Note the transpose: this route propagates ``A^T P A`` where the classical
one propagates ``A P A^T``. The two agree for symmetric ``A`` and both are
kept as written.

Only the innovation ``R + H P- H^T`` is ever inverted, so running that
inversion through GaBP (or a simulated network) gives a distributed filter.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import gabp
from .errors import (
    DimensionMismatch,
    GabpkfError,
    NotConverged,
    SingularBlock,
    SingularInnovation,
    SingularMatrix,
)
from .linalg import (
    Inverter,
    as_matrix,
    as_vector,
    direct_inverse,
    matrix_inversion_lemma,
    schur_complement_from_inverse,
    symmetrize,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class KalmanModel:
    """Fixed system matrices. ``b`` (control input) is optional.

    ``a`` may be rectangular: the classical engine needs ``a`` to map the
    previous state to the new one (``n_new x n_prev``), the block engine
    uses it transposed (``n_prev x n_new``).
    """

    a: np.ndarray
    h: np.ndarray
    q: np.ndarray
    r: np.ndarray
    b: np.ndarray | None = None

    def __post_init__(self):
        for name in ("a", "h", "q", "r"):
            object.__setattr__(self, name, as_matrix(getattr(self, name), name))
        if self.b is not None:
            object.__setattr__(self, "b", as_matrix(self.b, "b"))
        q, r, h = self.q, self.r, self.h
        if q.shape[0] != q.shape[1] or r.shape[0] != r.shape[1]:
            raise DimensionMismatch("Q and R must be square")
        if h.shape != (r.shape[0], q.shape[0]):
            raise DimensionMismatch(f"H is {h.shape}, expected {(r.shape[0], q.shape[0])}")
        if self.b is not None and self.b.shape[0] != q.shape[0]:
            raise DimensionMismatch("B must have as many rows as Q")

    @property
    def n(self) -> int:
        return self.q.shape[0]

    @property
    def m(self) -> int:
        return self.r.shape[0]

    def to_dict(self) -> dict:
        d = {"A": self.a.tolist(), "H": self.h.tolist(), "Q": self.q.tolist(), "R": self.r.tolist()}
        if self.b is not None:
            d["B"] = self.b.tolist()
        return d


@dataclass(frozen=True)
class KalmanState:
    xhat: np.ndarray
    p: np.ndarray
    k: int = 0

    def to_dict(self) -> dict:
        return {"k": int(self.k), "xhat": [float(v) for v in self.xhat], "P": self.p.tolist()}


@dataclass(frozen=True)
class Prediction:
    xhat_minus: np.ndarray
    p_minus: np.ndarray
    k: int = 0


class RoundError(GabpkfError):
    """A filter round failed; ``__cause__`` holds the original error."""

    def __init__(self, k: int, cause: Exception):
        super().__init__(f"round {k}: {type(cause).__name__}: {cause}")
        self.round = k
        self.cause = cause


def predict(model: KalmanModel, state: KalmanState, u=None) -> Prediction:
    a = model.a
    if a.shape != (model.n, state.p.shape[0]) or state.xhat.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"A is {a.shape}, state has dimension {state.p.shape[0]}")
    xm = a @ state.xhat
    if u is not None:
        if model.b is None:
            raise DimensionMismatch("control input given but model has no B")
        xm = xm + model.b @ as_vector(u, "u")
    pm = symmetrize(a @ state.p @ a.T + model.q)
    return Prediction(xm, pm, state.k)


def _innovation_inverse(model: KalmanModel, p_minus, invert: Inverter):
    s = model.h @ p_minus @ model.h.T + model.r
    try:
        return invert(s)
    except SingularMatrix as exc:
        raise SingularInnovation(str(exc)) from exc


def measure(model: KalmanModel, pred: Prediction, z) -> KalmanState:
    z = as_vector(z, "z")
    if z.shape[0] != model.m:
        raise DimensionMismatch(f"z has length {z.shape[0]}, expected {model.m}")
    h = model.h
    s_inv = _innovation_inverse(model, pred.p_minus, direct_inverse)
    k_gain = pred.p_minus @ h.T @ s_inv
    xhat = pred.xhat_minus + k_gain @ (z - h @ pred.xhat_minus)
    p = symmetrize((np.eye(model.n) - k_gain @ h) @ pred.p_minus)
    return KalmanState(xhat, p, pred.k + 1)


def build_e_matrix(p_prev, model: KalmanModel) -> np.ndarray:
    """``[[-P, A, 0], [A^T, Q, H^T], [0, H, R]]``.

    ``H`` sits below the diagonal and ``H^T`` above it so that the blocks
    conform for any ``m x n`` measurement matrix.
    """
    p = as_matrix(p_prev, "P")
    a, q, h, r = model.a, model.q, model.h, model.r
    k, n, m = p.shape[0], model.n, model.m
    if p.shape != (k, k) or a.shape != (k, n):
        raise DimensionMismatch(f"P is {p.shape} and A is {a.shape}; need A of shape ({k}, {n})")
    return np.block([
        [-p, a, np.zeros((k, m))],
        [a.T, q, h.T],
        [np.zeros((m, k)), h, r],
    ])


def reduce_e_matrix(e, k: int, n: int, m: int, invert: Inverter = direct_inverse):
    """Two-step Schur reduction of an assembled E; returns ``(P-, P)``.

    The leading block ``-P`` is taken as the pivot inverse itself, so a
    singular (even zero) prior covariance is fine.
    """
    e = as_matrix(e, "E")
    if e.shape != (k + n + m, k + n + m):
        raise DimensionMismatch(f"E is {e.shape}, expected {k + n + m} square")
    i1, i2, i3 = slice(0, k), slice(k, k + n), slice(k + n, k + n + m)
    p_minus = symmetrize(schur_complement_from_inverse(e[i1, i1], e[i1, i2], e[i2, i1], e[i2, i2]))
    try:
        p_k = matrix_inversion_lemma(p_minus, e[i2, i3], -e[i3, i2], e[i3, i3], invert)
    except SingularBlock as exc:
        raise SingularInnovation(str(exc)) from exc
    return p_minus, symmetrize(p_k)


def two_schur_step(p_prev, model: KalmanModel, invert: Inverter = direct_inverse):
    """``(P-, P)`` by the two Schur steps, without materialising E."""
    p = as_matrix(p_prev, "P")
    if p.shape[0] != p.shape[1] or model.a.shape != (p.shape[0], model.n):
        raise DimensionMismatch(f"P is {p.shape} and A is {model.a.shape}")
    p_minus = symmetrize(schur_complement_from_inverse(-p, model.a, model.a.T, model.q))
    h = model.h
    try:
        p_k = matrix_inversion_lemma(p_minus, h.T, -h, model.r, invert)
    except SingularBlock as exc:
        raise SingularInnovation(str(exc)) from exc
    return p_minus, symmetrize(p_k)


def pk_via_two_schur(p_prev, model: KalmanModel) -> np.ndarray:
    return two_schur_step(p_prev, model)[1]


def gabp_inverter(tol: float = gabp.DEFAULT_TOL, max_rounds: int | None = None,
                  schedule=gabp.Schedule.SYNCHRONOUS, step: str = "measurement") -> Inverter:
    def invert(s):
        check = gabp.spectral_radius_check(s)
        if not check.satisfied:
            log.warning("%s system is not walk-summable (rho=%.4g); GaBP may fail", step, check.radius)
        try:
            return gabp.invert_via_gabp(s, tol, max_rounds, schedule)
        except NotConverged as exc:
            exc.step = step
            raise
    return invert


def pk_via_gabp(p_prev, model: KalmanModel, tol: float = gabp.DEFAULT_TOL,
                max_rounds: int | None = None) -> np.ndarray:
    """Same as ``pk_via_two_schur`` with the innovation inverted by GaBP."""
    return two_schur_step(p_prev, model, gabp_inverter(tol, max_rounds))[1]


CovarianceStep = Callable[[np.ndarray, KalmanModel], tuple]


def _classical_step(p_prev, model):
    a = model.a
    p_minus = symmetrize(a @ p_prev @ a.T + model.q)
    s_inv = _innovation_inverse(model, p_minus, direct_inverse)
    k_gain = p_minus @ model.h.T @ s_inv
    return p_minus, symmetrize((np.eye(model.n) - k_gain @ model.h) @ p_minus)


def covariance_engine(engine, tol: float = gabp.DEFAULT_TOL) -> CovarianceStep:
    """Resolve ``classical`` / ``schur`` / ``gabp`` or pass a callable through."""
    if callable(engine):
        return engine
    if engine == "classical":
        return _classical_step
    if engine == "schur":
        return two_schur_step
    if engine == "gabp":
        inv = gabp_inverter(tol)
        return lambda p, model: two_schur_step(p, model, inv)
    raise ValueError(f"unknown engine {engine!r}")


def filter_sequence(model: KalmanModel, init: KalmanState, observations: Sequence,
                    engine="classical", u=None, tol: float = gabp.DEFAULT_TOL) -> list:
    """Run one round per observation and return the posterior states.

    The covariance path comes from ``engine``; the mean path always uses the
    closed-form gain built from that engine's prediction covariance.
    """
    step = covariance_engine(engine, tol)
    out = []
    state = init
    for z in observations:
        k = state.k + 1
        try:
            z = as_vector(z, "z")
            if engine == "classical":
                state = measure(model, predict(model, state, u), z)
            else:
                p_minus, p_k = step(state.p, model)
                xm = model.a @ state.xhat
                if u is not None:
                    xm = xm + model.b @ as_vector(u, "u")
                s_inv = _innovation_inverse(model, p_minus, direct_inverse)
                gain = p_minus @ model.h.T @ s_inv
                state = KalmanState(xm + gain @ (z - model.h @ xm), p_k, k)
        except GabpkfError as exc:
            raise RoundError(k, exc) from exc
        out.append(state)
    return out


def load_kalman_json(path) -> tuple:
    """``(KalmanModel, KalmanState)`` from ``{A, H, Q, R, B?, x0, P0}``."""
    d = json.loads(Path(path).read_text())
    try:
        model = KalmanModel(d["A"], d["H"], d["Q"], d["R"], d.get("B"))
        init = KalmanState(as_vector(d["x0"], "x0"), as_matrix(d["P0"], "P0"), 0)
    except KeyError as exc:
        raise DimensionMismatch(f"{path}: missing key {exc}") from None
    return model, init
