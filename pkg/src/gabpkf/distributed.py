"""Simulated distributed GaBP: one actor per variable, messages only.

Each ``NodeActor`` is built from its own row of ``(A, b)`` and never sees
the full matrix. Actors exchange ``GabpMessage`` values through a
``Scheduler``, which owns delivery:

* ``synchronous``: every actor reads the messages of round ``k - 1`` and
  emits round ``k``; all sends are delivered behind a barrier. Sums and
  updates use the same arithmetic and order as the centralized engine, so
  the two produce bit-identical messages.
* ``random-sequential``: each sweep activates the actors in a fresh seeded
  permutation; a send lands in the recipient's inbox at once and is read on
  its next activation.

Convergence is judged by the harness looking at every actor (oracle-style);
there is no distributed termination protocol.
"""
from __future__ import annotations

import collections
import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import gabp
from .errors import DimensionMismatch, Divergence, GabpRuntimeError, NotConverged, ZeroDiagonal
from .gabp import GabpMessage, _edge_update

SYNCHRONOUS = "synchronous"
RANDOM_SEQUENTIAL = "random-sequential"


@dataclass(eq=False)
class NodeActor:
    """Node ``id`` holding row ``id`` of the system.

    ``weights`` maps each neighbour ``j`` to ``A_ij`` (ascending ``j``);
    ``inbox`` holds undelivered-to-state messages per sender in FIFO order;
    ``incoming`` the latest message read from each neighbour and
    ``outgoing`` the latest one sent.
    """

    id: int
    diag: float
    b: float
    weights: dict
    inbox: dict = field(default_factory=dict)
    incoming: dict = field(default_factory=dict)
    outgoing: dict = field(default_factory=dict)
    delta: float = np.inf
    error: str | None = None

    @classmethod
    def from_row(cls, i: int, row: dict, b_i: float) -> "NodeActor":
        """``row`` maps column index to ``A_ij`` (zeros are dropped)."""
        diag = float(row.get(i, 0.0))
        if diag == 0:
            raise ZeroDiagonal(f"A_ii = 0 for node {i}")
        weights = {int(j): float(v) for j, v in sorted(row.items()) if j != i and v != 0}
        zero = GabpMessage(0.0, 0.0)
        return cls(
            id=i, diag=diag, b=float(b_i), weights=weights,
            inbox={j: collections.deque() for j in weights},
            incoming={j: zero for j in weights},
            outgoing={j: zero for j in weights},
            delta=0.0 if not weights else np.inf,
        )

    @property
    def neighbors(self) -> list:
        return list(self.weights)

    def receive(self, sender: int, msg: GabpMessage) -> None:
        self.inbox[sender].append(msg)

    def drain(self) -> None:
        """Read every pending message, in per-sender FIFO order."""
        for j, q in self.inbox.items():
            while q:
                self.incoming[j] = q.popleft()

    def _sums(self):
        p_in = 0.0
        h_in = 0.0
        for j in self.weights:
            m = self.incoming[j]
            p_in += m.precision
            h_in += m.precision * m.mean
        return p_in, h_in

    def compute(self) -> list:
        """New outgoing messages ``[(j, GabpMessage)]`` from ``incoming``."""
        if not self.weights:
            return []
        nbrs = self.neighbors
        p_in, h_in = self._sums()
        p_back = np.array([self.incoming[j].precision for j in nbrs])
        h_back = p_back * np.array([self.incoming[j].mean for j in nbrs])
        w = np.array([self.weights[j] for j in nbrs])
        try:
            # symmetric system: A_ji equals the locally held A_ij
            p_new, mu_new = _edge_update(self.diag, self.b, p_in, h_in, p_back, h_back, w, w)
            if not (np.all(np.isfinite(p_new)) and np.all(np.isfinite(mu_new))):
                raise Divergence("non-finite message")
        except GabpRuntimeError as exc:
            self.error = f"{type(exc).__name__}: {exc}"
            exc.node = self.id
            raise
        out = []
        delta = 0.0
        for j, p, mu in zip(nbrs, p_new, mu_new):
            old = self.outgoing[j]
            delta = max(delta, abs(p - old.precision), abs(mu - old.mean))
            msg = GabpMessage(float(p), float(mu))
            self.outgoing[j] = msg
            out.append((j, msg))
        self.delta = delta
        return out

    def marginal(self) -> GabpMessage:
        """``(P_i, mu_i)`` from the latest incoming messages."""
        p_in, h_in = self._sums()
        p = self.diag + p_in
        return GabpMessage(p, (self.b + h_in) / p if p != 0 else np.nan)


@dataclass
class Scheduler:
    """Delivery policy. ``delivered`` counts every message handed to an inbox."""

    mode: str = SYNCHRONOUS
    seed: int = 0
    delivered: int = 0

    def __post_init__(self):
        if self.mode == "sequential":
            self.mode = RANDOM_SEQUENTIAL
        if self.mode not in (SYNCHRONOUS, RANDOM_SEQUENTIAL):
            raise ValueError(f"unknown schedule {self.mode!r}")
        self._rng = np.random.default_rng(self.seed)

    @property
    def barrier(self) -> str:
        if self.mode == SYNCHRONOUS:
            return "all sends of a round are delivered after every node has computed"
        return "each send is delivered immediately; read at the recipient's next activation"

    def activation_order(self, n: int) -> list:
        if self.mode == SYNCHRONOUS:
            return list(range(n))
        return [int(i) for i in self._rng.permutation(n)]

    def deliver(self, actors, sender: int, sends, round_no: int, log: list | None):
        for j, msg in sends:
            actors[j].receive(sender, msg)
            self.delivered += 1
            if log is not None:
                log.append({"round": round_no, "from": sender, "to": j,
                            "precision": msg.precision, "mean": msg.mean})

    def run_round(self, actors, round_no: int, log: list | None) -> int:
        """One round (synchronous) or one sweep (random-sequential); returns sends."""
        before = self.delivered
        if self.mode == SYNCHRONOUS:
            for a in actors:
                a.drain()
            pending = [(a.id, a.compute()) for a in actors]
            for sender, sends in pending:
                self.deliver(actors, sender, sends, round_no, log)
        else:
            for i in self.activation_order(len(actors)):
                actors[i].drain()
                self.deliver(actors, i, actors[i].compute(), round_no, log)
        return self.delivered - before


@dataclass
class RunTranscript:
    messages_per_round: list
    node_converged: list
    precisions: np.ndarray
    means: np.ndarray
    rounds: int
    converged: bool
    deliveries: list
    node_errors: dict = field(default_factory=dict)

    @property
    def solution(self) -> np.ndarray:
        return self.means

    def to_dict(self) -> dict:
        return {
            "messages_per_round": list(self.messages_per_round),
            "node_converged": [bool(v) for v in self.node_converged],
            "precisions": [float(v) for v in self.precisions],
            "means": [float(v) for v in self.means],
            "rounds": int(self.rounds),
            "converged": bool(self.converged),
            "node_errors": {str(k): v for k, v in self.node_errors.items()},
        }

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.deliveries)


def _rows(a):
    if sp.issparse(a):
        csr = sp.csr_matrix(a, dtype=float)
        for i in range(csr.shape[0]):
            lo, hi = csr.indptr[i], csr.indptr[i + 1]
            yield dict(zip(csr.indices[lo:hi].tolist(), csr.data[lo:hi].tolist()))
    else:
        for row in np.asarray(a, dtype=float):
            nz = np.flatnonzero(row)
            yield dict(zip(nz.tolist(), row[nz].tolist()))


def spawn_network(a, b) -> list:
    """One actor per row; each actor receives only its row and ``b_i``."""
    shape = a.shape
    if len(shape) != 2 or shape[0] != shape[1]:
        raise DimensionMismatch(f"system matrix must be square, got {shape}")
    b = np.asarray(b, dtype=float).ravel()
    if b.shape[0] != shape[0]:
        raise DimensionMismatch(f"b has length {b.shape[0]}, expected {shape[0]}")
    gabp._check_symmetric(a if sp.issparse(a) else np.asarray(a, dtype=float))
    return [NodeActor.from_row(i, row, b[i]) for i, row in enumerate(_rows(a))]


def run_distributed(actors, scheduler: Scheduler | None = None, tol: float = gabp.DEFAULT_TOL,
                    max_rounds: int | None = None, record: bool = True) -> RunTranscript:
    """Drive the actors until every node's last update moved by at most ``tol``.

    A runtime failure in a node (non-finite or zero-precision message) is
    recorded against that node and ends the run unconverged.
    """
    scheduler = scheduler or Scheduler()
    n = len(actors)
    if max_rounds is None:
        max_rounds = gabp.default_max_rounds(n)
    log = [] if record else None
    counts = []
    errors = {}
    rounds = 0
    done = all(not a.weights for a in actors)
    while not done and rounds < max_rounds:
        rounds += 1
        try:
            counts.append(scheduler.run_round(actors, rounds, log))
        except GabpRuntimeError as exc:
            errors[getattr(exc, "node", -1)] = f"{type(exc).__name__}: {exc}"
            break
        done = all(a.delta <= tol for a in actors)
    if not errors:
        for a in actors:
            a.drain()
    marg = [a.marginal() for a in actors]
    flags = [a.delta <= tol and a.error is None for a in actors]
    return RunTranscript(
        counts, flags,
        np.array([m.precision for m in marg]), np.array([m.mean for m in marg]),
        rounds, bool(done and not errors), log if log is not None else [], errors,
    )


def distributed_solve(a, b, schedule: str = SYNCHRONOUS, seed: int = 0,
                      tol: float = gabp.DEFAULT_TOL, max_rounds: int | None = None) -> RunTranscript:
    return run_distributed(spawn_network(a, b), Scheduler(schedule, seed), tol, max_rounds)


def distributed_inverse(s, network_factory=spawn_network, schedule: str = SYNCHRONOUS,
                        seed: int = 0, tol: float = gabp.DEFAULT_TOL, step: str = "measurement"):
    """``s^-1`` column by column, each column a separate network run."""
    n = s.shape[0]
    inv = np.empty((n, n))
    failing = []
    nodes = set()
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        tr = run_distributed(network_factory(s, e), Scheduler(schedule, seed), tol, record=False)
        inv[:, i] = tr.means
        if not tr.converged:
            failing.append(i)
            nodes.update(k for k, ok in enumerate(tr.node_converged) if not ok)
    if failing:
        exc = NotConverged(f"{step} step: distributed GaBP did not converge for columns {failing} "
                           f"(unconverged nodes {sorted(nodes)})", partial=inv, failing=failing, step=step)
        exc.nodes = sorted(nodes)
        raise exc
    return inv


def distributed_kalman_round(network_factory, model, p_prev, tol: float = gabp.DEFAULT_TOL,
                             schedule: str = SYNCHRONOUS, seed: int = 0) -> np.ndarray:
    """``P_k`` by the two Schur steps with the innovation inverted by actor networks.

    The prediction step needs no inversion, so the innovation solve is the
    only linear solve and it runs entirely through ``run_distributed``.
    """
    from .kalman import two_schur_step

    factory = network_factory or spawn_network
    return two_schur_step(p_prev, model,
                          lambda s: distributed_inverse(s, factory, schedule, seed, tol))[1]
