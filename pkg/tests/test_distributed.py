import gc
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gabpkf import distributed as dist, gabp, kalman
from gabpkf.errors import NotConverged, ZeroDiagonal
from gabpkf.kalman import KalmanModel
from gabpkf.problems import kalman_case, tridiagonal, walk_summable

A2 = np.array([[2.0, 1.0], [1.0, 2.0]])
seeds = st.integers(min_value=0, max_value=2**32 - 1)


def messages_by_round(transcript):
    out = {}
    for r in transcript.deliveries:
        out.setdefault(r["round"], {})[(r["from"], r["to"])] = (r["precision"], r["mean"])
    return out


def test_spawn_examples():
    actors = dist.spawn_network(np.diag([2.0, 4.0]), [1.0, 2.0])
    assert all(not a.neighbors for a in actors)
    tr = dist.run_distributed(actors)
    assert tr.rounds == 0 and tr.converged
    assert np.array_equal(tr.means, [0.5, 0.5])
    assert sum(len(a.neighbors) for a in dist.spawn_network(A2, [3.0, 3.0])) == 2
    assert sum(len(a.neighbors) for a in dist.spawn_network(tridiagonal(10), np.ones(10))) == 18
    with pytest.raises(ZeroDiagonal):
        dist.spawn_network(np.array([[0.0, 1.0], [1.0, 2.0]]), [1.0, 1.0])


def test_actor_holds_only_its_row():
    actors = dist.spawn_network(tridiagonal(5), np.arange(5.0))
    a = actors[2]
    assert a.diag == 2.5 and a.b == 2.0 and a.weights == {1: -1.0, 3: -1.0}
    assert not any(isinstance(v, np.ndarray) and v.ndim == 2 for v in vars(a).values())


def test_locality_after_deleting_matrix():
    rng = np.random.default_rng(1)
    a = walk_summable(rng, 6)
    b = rng.normal(size=6)
    expected = np.linalg.solve(a, b)
    actors = dist.spawn_network(a, b)
    del a
    gc.collect()
    tr = dist.run_distributed(actors)
    assert tr.converged and np.allclose(tr.means, expected, atol=1e-8)


def test_two_by_two_round_for_round():
    tr = dist.run_distributed(dist.spawn_network(A2, [3.0, 3.0]))
    rep = gabp.solve(A2, [3.0, 3.0])
    assert np.allclose(tr.means, [1.0, 1.0], atol=1e-8)
    assert tr.rounds == rep.rounds
    assert messages_by_round(tr)[1] == {(0, 1): (-0.5, 3.0), (1, 0): (-0.5, 3.0)}


@settings(max_examples=25, deadline=None)
@given(seeds, st.integers(2, 9))
def test_synchronous_matches_centralized_messages(seed, n):
    rng = np.random.default_rng(seed)
    a = walk_summable(rng, n)
    b = rng.normal(size=n)
    tr = dist.run_distributed(dist.spawn_network(a, b))
    state = gabp.init(gabp.GabpGraph.from_system(a, b))
    rounds = messages_by_round(tr)
    for k in range(1, tr.rounds + 1):
        state = gabp.iterate_round(state)
        central = state.messages
        assert set(rounds[k]) == set(central)
        for key, (p, mu) in rounds[k].items():
            assert abs(p - central[key].precision) <= 1e-12
            assert abs(mu - central[key].mean) <= 1e-12
    rep = gabp.solve(a, b)
    assert tr.rounds == rep.rounds
    assert np.max(np.abs(tr.means - rep.solution)) <= 1e-9


def test_message_counts_and_fifo_delivery():
    a = tridiagonal(10)
    sched = dist.Scheduler()
    tr = dist.run_distributed(dist.spawn_network(a, np.ones(10)), sched)
    assert all(c == 18 for c in tr.messages_per_round)
    assert sched.delivered == 18 * tr.rounds == len(tr.deliveries)
    per_edge = {}
    for r in tr.deliveries:
        per_edge.setdefault((r["from"], r["to"]), []).append(r["round"])
    assert all(rs == sorted(rs) and len(rs) == tr.rounds for rs in per_edge.values())


def test_inbox_keeps_latest_in_order():
    actor = dist.spawn_network(A2, [3.0, 3.0])[0]
    actor.receive(1, gabp.GabpMessage(1.0, 1.0))
    actor.receive(1, gabp.GabpMessage(2.0, 2.0))
    actor.drain()
    assert actor.incoming[1] == (2.0, 2.0) and not actor.inbox[1]


def test_random_sequential_seeds_agree():
    rng = np.random.default_rng(3)
    a = walk_summable(rng, 9)
    b = rng.normal(size=9)
    t1 = dist.run_distributed(dist.spawn_network(a, b), dist.Scheduler("random-sequential", 1))
    t2 = dist.run_distributed(dist.spawn_network(a, b), dist.Scheduler("random-sequential", 2))
    assert t1.converged and t2.converged
    assert np.allclose(t1.means, t2.means, atol=1e-6)
    assert np.allclose(t1.means, np.linalg.solve(a, b), atol=1e-6)
    # every edge fires at least once per sweep
    first = [r for r in t1.deliveries if r["round"] == 1]
    assert len({(r["from"], r["to"]) for r in first}) == sum(len(x.neighbors) for x in dist.spawn_network(a, b))


def test_synchronous_runs_are_bit_identical():
    rng = np.random.default_rng(4)
    a = walk_summable(rng, 7)
    b = rng.normal(size=7)
    t1 = dist.run_distributed(dist.spawn_network(a, b))
    t2 = dist.run_distributed(dist.spawn_network(a, b))
    assert t1.to_jsonl() == t2.to_jsonl()
    assert json.dumps(t1.to_dict(), sort_keys=True) == json.dumps(t2.to_dict(), sort_keys=True)


def test_jsonl_export():
    tr = dist.run_distributed(dist.spawn_network(A2, [3.0, 3.0]))
    lines = tr.to_jsonl().splitlines()
    assert len(lines) == 4
    assert set(json.loads(lines[0])) == {"round", "from", "to", "precision", "mean"}


def test_divergence_is_recorded_per_node():
    a = np.array([[1.0, 2.0], [2.0, 1.0]]) * 1e200
    tr = dist.run_distributed(dist.spawn_network(a, [1.0, 1.0]), max_rounds=50)
    assert not tr.converged
    (node, err), = tr.node_errors.items()
    assert node in (0, 1) and err.startswith("Divergence")
    assert not tr.node_converged[node]


def test_kalman_round_scalar_and_random():
    one = KalmanModel([[1.0]], [[1.0]], [[1.0]], [[1.0]])
    assert dist.distributed_kalman_round(dist.spawn_network, one, [[1.0]])[0, 0] == pytest.approx(2 / 3, abs=1e-6)
    rng = np.random.default_rng(9)
    for _ in range(5):
        model, p = kalman_case(rng, 3, 2)
        got = dist.distributed_kalman_round(dist.spawn_network, model, p)
        assert np.allclose(got, kalman.pk_via_two_schur(p, model), atol=1e-6)


def test_kalman_round_diagonal_model():
    m = KalmanModel(np.diag([0.9, 1.1]), np.diag([1.0, 0.5]), np.diag([0.3, 0.7]), np.diag([0.2, 1.5]))
    p0 = np.diag([1.0, 2.0])
    got = dist.distributed_kalman_round(None, m, p0)
    assert np.allclose(got, kalman._classical_step(p0, m)[1], atol=1e-10)


def test_kalman_round_not_converged():
    s = np.array([[1.0, 0.9, 0.9], [0.9, 1.0, 0.9], [0.9, 0.9, 1.0]])
    assert not gabp.spectral_radius_check(s).satisfied
    m = KalmanModel(np.zeros((3, 3)), np.eye(3), 0.05 * np.eye(3), s - 0.05 * np.eye(3))
    with pytest.raises(NotConverged) as info:
        dist.distributed_kalman_round(dist.spawn_network, m, np.zeros((3, 3)))
    assert info.value.step == "measurement" and info.value.nodes
