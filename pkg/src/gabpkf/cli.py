"""Batch front end: ``python -m gabpkf <command> [inputs] [flags]``.

Every command writes one JSON report (sorted keys, resolved config
embedded) to ``--output`` or stdout. A nonzero exit status is 2 when an
iteration did not converge and 1 for bad input.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import affine, distributed, gabp, gib, kalman
from .errors import GabpkfError, NotConverged
from .matio import read_matrix, read_vector

COMMANDS = ("solve", "invert", "kalman", "gib", "lp", "simulate")
ENGINES = {
    "solve": ("gabp", "direct", "distributed"),
    "invert": ("gabp", "direct"),
    "kalman": ("schur", "direct", "gabp", "distributed"),
    "gib": ("direct", "schur"),
    "lp": ("direct", "gabp"),
    "simulate": ("distributed",),
}
EXIT_OK, EXIT_INPUT, EXIT_NOT_CONVERGED = 0, 1, 2


@dataclass
class RunConfig:
    command: str
    inputs: list
    engine: str
    tol: float = gabp.DEFAULT_TOL
    max_rounds: int | None = None
    alpha: float = 0.5
    beta: float | None = None
    seed: int = 0
    schedule: str = "synchronous"
    output: str | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        allowed = ENGINES[self.command]
        if self.engine is None:
            self.engine = allowed[0]
        if self.engine not in allowed:
            raise ValueError(f"engine {self.engine!r} is not available for {self.command} "
                             f"(choose from {', '.join(allowed)})")


class _Failed(Exception):
    """Carries a finished report whose run did not converge."""

    def __init__(self, report):
        super().__init__("not converged")
        self.report = report


def _vec(a) -> list:
    return [float(v) for v in np.asarray(a).ravel()]


def _mat(a) -> list:
    return np.asarray(a, dtype=float).tolist()


def _load_system(cfg: RunConfig):
    a = read_matrix(cfg.inputs[0], sparse=Path(cfg.inputs[0]).suffix.lower() in (".mtx", ".mm"))
    b = read_vector(cfg.inputs[1]) if len(cfg.inputs) > 1 else np.ones(a.shape[0])
    return a, b


def cmd_solve(cfg: RunConfig) -> dict:
    a, b = _load_system(cfg)
    if cfg.engine == "direct":
        dense = a.toarray() if hasattr(a, "toarray") else a
        return {"solution": _vec(np.linalg.solve(dense, b)), "converged": True}
    if cfg.engine == "distributed":
        tr = distributed.distributed_solve(a, b, cfg.schedule, cfg.seed, cfg.tol, cfg.max_rounds)
        rep = {"solution": _vec(tr.means), "marginal_precisions": _vec(tr.precisions),
               "rounds": tr.rounds, "converged": tr.converged,
               "messages_per_round": tr.messages_per_round, "node_errors": tr.to_dict()["node_errors"]}
    else:
        schedule = "sequential" if cfg.schedule != "synchronous" else "synchronous"
        rep = gabp.solve(a, b, cfg.tol, cfg.max_rounds, schedule).to_dict()
    if not rep["converged"]:
        raise _Failed(rep)
    return rep


def cmd_invert(cfg: RunConfig) -> dict:
    a = read_matrix(cfg.inputs[0])
    if cfg.engine == "direct":
        from .linalg import direct_inverse
        return {"inverse": _mat(direct_inverse(a))}
    check = gabp.spectral_radius_check(a)
    inv = gabp.invert_via_gabp(a, cfg.tol, cfg.max_rounds)
    return {"inverse": _mat(inv), "walk_summable": check.satisfied, "spectral_radius": check.radius}


def cmd_kalman(cfg: RunConfig) -> dict:
    model, init = kalman.load_kalman_json(cfg.inputs[0])
    obs = read_matrix(cfg.inputs[1]) if len(cfg.inputs) > 1 else np.zeros((cfg.extra.get("rounds", 1), model.m))
    if obs.ndim == 1 or obs.shape[1] != model.m:
        obs = obs.reshape(-1, model.m)
    engine = {"direct": "classical", "schur": "schur", "gabp": "gabp"}.get(cfg.engine)
    if cfg.engine == "distributed":
        def engine(p, m):
            inv = lambda s: distributed.distributed_inverse(s, schedule=cfg.schedule, seed=cfg.seed, tol=cfg.tol)
            return kalman.two_schur_step(p, m, inv)
    try:
        states = kalman.filter_sequence(model, init, obs, engine, tol=cfg.tol)
    except kalman.RoundError as exc:
        if isinstance(exc.cause, NotConverged):
            raise exc.cause from exc
        raise
    return {"model": model.to_dict(), "states": [s.to_dict() for s in states]}


def cmd_gib(cfg: RunConfig) -> dict:
    problem = gib.load_gib_json(cfg.inputs[0])
    if cfg.beta is not None:
        problem = problem.with_beta(cfg.beta)
    cfg.beta = problem.beta
    state = gib.initial_state(problem, cfg.seed)
    rounds = cfg.max_rounds if cfg.max_rounds is not None else 1000
    cfg.max_rounds = rounds
    if cfg.engine == "direct":
        trace = gib.gib_trace(problem, state, rounds, cfg.tol)
        final = gib.GibState(trace[-1]["A_k"], trace[-1]["Sigma_xi"])
        converged = len(trace) - 1 < rounds or rounds == 0
    else:
        trace, final, converged = [], state, False
        for k in range(1, rounds + 1):
            nxt = gib.gib_via_modified_kalman(problem, final, "schur")
            delta = max(np.max(np.abs(nxt.a - final.a)), np.max(np.abs(nxt.sigma_xi - final.sigma_xi)))
            final = nxt
            trace.append({"k": k, "A_k": _mat(final.a), "Sigma_xi": _mat(final.sigma_xi)})
            if delta <= cfg.tol:
                converged = True
                break
    rep = {"problem": problem.to_dict(), "trace": trace, "A": _mat(final.a),
           "Sigma_xi": _mat(final.sigma_xi), "rounds": len(trace) - (cfg.engine == "direct"),
           "converged": bool(converged)}
    if not converged:
        raise _Failed(rep)
    return rep


def cmd_lp(cfg: RunConfig) -> dict:
    problem, x0 = affine.load_lp(cfg.inputs[0])
    if len(cfg.inputs) > 1:
        x0 = read_vector(cfg.inputs[1])
    if x0 is None:
        raise affine.InfeasibleStart(f"{cfg.inputs[0]}: no starting point x0 given")
    history = []
    max_iter = cfg.max_rounds if cfg.max_rounds is not None else 500
    cfg.max_rounds = max_iter
    state, converged = affine.solve_lp(problem, x0, cfg.alpha, cfg.tol, max_iter,
                                       cfg.engine == "gabp", history)
    rep = {"x": _vec(state.x), "objective": problem.objective(state.x),
           "iterations": state.iteration, "converged": converged,
           "trace": affine.lp_trace(problem, history)}
    if not converged:
        raise _Failed(rep)
    return rep


def cmd_simulate(cfg: RunConfig) -> dict:
    a, b = _load_system(cfg)
    actors = distributed.spawn_network(a, b)
    sched = distributed.Scheduler(cfg.schedule, cfg.seed)
    tr = distributed.run_distributed(actors, sched, cfg.tol, cfg.max_rounds)
    path = cfg.extra.get("transcript")
    if path:
        Path(path).write_text(tr.to_jsonl())
    rep = tr.to_dict()
    rep["delivered"] = sched.delivered
    rep["solution"] = rep["means"]
    if not tr.converged:
        raise _Failed(rep)
    return rep


HANDLERS = {"solve": cmd_solve, "invert": cmd_invert, "kalman": cmd_kalman,
            "gib": cmd_gib, "lp": cmd_lp, "simulate": cmd_simulate}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=gabp.DEFAULT_TOL)
    common.add_argument("--max-rounds", type=int, default=None)
    common.add_argument("--engine", default=None, choices=("direct", "schur", "gabp", "distributed"))
    common.add_argument("--alpha", type=float, default=0.5, help="affine-scaling step factor (lp)")
    common.add_argument("--beta", type=float, default=None,
                        help="bottleneck weight (gib); defaults to the problem file's value, else 1.0")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--schedule", default="synchronous",
                        choices=("synchronous", "sequential", "random-sequential"))
    common.add_argument("--output", "-o", default=None, help="report path (default: stdout)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="gabpkf", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("solve", parents=[common], help="solve A x = b")
    s.add_argument("inputs", nargs="+", metavar="PATH", help="A (CSV or .mtx), then b")
    s = sub.add_parser("invert", parents=[common], help="invert a symmetric matrix")
    s.add_argument("inputs", nargs=1, metavar="A")
    s = sub.add_parser("kalman", parents=[common], help="run a Kalman filter")
    s.add_argument("inputs", nargs="+", metavar="PATH", help="model JSON, then observations CSV")
    s.add_argument("--rounds", type=int, default=1, help="covariance-only rounds when no observations are given")
    s = sub.add_parser("gib", parents=[common], help="Gaussian information bottleneck iterations")
    s.add_argument("inputs", nargs=1, metavar="PROBLEM")
    s = sub.add_parser("lp", parents=[common], help="affine-scaling linear program")
    s.add_argument("inputs", nargs="+", metavar="PATH", help="LP (JSON or text), optionally x0")
    s = sub.add_parser("simulate", parents=[common], help="distributed GaBP on simulated nodes")
    s.add_argument("inputs", nargs="+", metavar="PATH", help="A, then b")
    s.add_argument("--transcript", default=None, help="write per-delivery JSON lines here")
    return p


def config_from_args(args) -> RunConfig:
    extra = {}
    if getattr(args, "transcript", None):
        extra["transcript"] = args.transcript
    if args.command == "kalman":
        extra["rounds"] = args.rounds
    schedule = "random-sequential" if args.schedule == "sequential" else args.schedule
    return RunConfig(args.command, list(args.inputs), args.engine, args.tol, args.max_rounds,
                     args.alpha, args.beta, args.seed, schedule, args.output, extra)


def _emit(report: dict, cfg: RunConfig) -> None:
    report = dict(report, config=asdict(cfg))
    text = json.dumps(report, sort_keys=True, indent=2) + "\n"
    if cfg.output:
        Path(cfg.output).write_text(text)
    else:
        sys.stdout.write(text)


def run(cfg: RunConfig) -> int:
    try:
        report = HANDLERS[cfg.command](cfg)
    except _Failed as exc:
        _emit(exc.report, cfg)
        return EXIT_NOT_CONVERGED
    except NotConverged as exc:
        _emit({"converged": False, "error": str(exc), "step": exc.step,
               "failing": [int(i) for i in exc.failing]}, cfg)
        return EXIT_NOT_CONVERGED
    except json.JSONDecodeError as exc:
        print(f"error: {cfg.inputs[0]}:{exc.lineno}: {exc.msg}", file=sys.stderr)
        return EXIT_INPUT
    except (GabpkfError, OSError, ValueError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    _emit(report, cfg)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
