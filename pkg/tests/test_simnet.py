"""Discrete-event engine: determinism, tracing, stragglers, failure modes."""
import numpy as np
import pytest

from etsgd.node import ComputeNode
from etsgd.objectives import Dataset, MeanQuadratic, gaussian_cloud
from etsgd.rngs import SAMPLE_STREAM, stream
from etsgd.simnet import (
    DeadlockError,
    DelayModel,
    SimError,
    Simulation,
    Trace,
    TraceRecord,
    simulate,
)
from etsgd.topology import neighbors, ring


def build_nodes(n, budgets, max_lag=1, seed=0, topo=None):
    topo = topo if topo is not None else ring(n)
    objective = MeanQuadratic(2)
    data = gaussian_cloud(42, 20, 2, (0.0, 0.0), 1.0)
    etas = [0.01] * len(budgets)
    nodes = [
        ComputeNode(i, objective, data, np.arange(data.m), list(budgets), etas,
                    neighbors(topo, i), max_lag, stream(seed, SAMPLE_STREAM, i))
        for i in range(n)
    ]
    return nodes, topo


class TestDelayModel:
    def test_validation(self):
        with pytest.raises(SimError):
            DelayModel(compute=(-0.1, 1.0))
        with pytest.raises(SimError):
            DelayModel(network=(2.0, 1.0))

    def test_draws_inside_range(self):
        dm = DelayModel(compute=(0.2, 0.4), network=(1.0, 1.5))
        rng = np.random.default_rng(0)
        for _ in range(100):
            assert 0.2 <= dm.compute_delay(rng) <= 0.4
            assert 1.0 <= dm.network_delay(rng) <= 1.5

    def test_straggler_factor_scales(self):
        dm = DelayModel()
        plain = dm.compute_delay(np.random.default_rng(1))
        scaled = dm.compute_delay(np.random.default_rng(1), 5.0)
        assert scaled == pytest.approx(5 * plain)


class TestEngine:
    def test_runs_to_completion(self):
        nodes, topo = build_nodes(5, [10, 20, 30])
        result = simulate(nodes, topo, seed=0)
        assert result.rounds_completed == [3] * 5
        assert result.messages_sent == result.messages_delivered == 5 * 3 * 2
        assert result.duration_ms > 0
        assert all(f <= result.duration_ms for f in result.node_finish_ms)

    def test_deterministic(self):
        a = simulate(*build_nodes(4, [5, 5], seed=3), seed=3)
        b = simulate(*build_nodes(4, [5, 5], seed=3), seed=3)
        assert a.duration_ms == b.duration_ms
        assert a.trace.records == b.trace.records
        assert np.array_equal(a.nodes[2].w, b.nodes[2].w)

    def test_single_node_no_messages(self):
        nodes, topo = build_nodes(1, [10, 10])
        result = simulate(nodes, topo, seed=0)
        assert result.messages_sent == 0
        assert result.rounds_completed == [2]
        # 20 compute draws from U(0.1, 1.0) bound the virtual duration
        assert 20 * 0.1 <= result.duration_ms <= 20 * 1.0

    def test_trace_record_shapes(self):
        nodes, topo = build_nodes(3, [4, 4])
        result = simulate(nodes, topo, seed=1)
        records = result.trace.records
        kinds = {r.kind for r in records}
        assert kinds <= {"grad", "apply", "round_end", "wait_enter", "wait_exit"}
        grads = [r for r in records if r.kind == "grad"]
        assert len(grads) == 3 * 8
        assert all(1 <= r.step <= 4 for r in grads)
        round_ends = [r for r in records if r.kind == "round_end"]
        assert len(round_ends) == 3 * 2
        assert all(r.detail == "msgs=2" for r in round_ends)
        applies = [r for r in records if r.kind == "apply"]
        assert len(applies) == result.messages_delivered
        assert all(r.step == -1 and r.detail.startswith("from=") for r in applies)
        times = [r.time for r in records]
        assert times == sorted(times)

    def test_straggler_unity_factor_is_identity(self):
        plain = simulate(*build_nodes(3, [5, 5]), seed=2)
        sim = Simulation(*build_nodes(3, [5, 5]), seed=2)
        sim.set_straggler(0, 1.0)
        assert sim.run().duration_ms == plain.duration_ms

    def test_straggler_slows_its_node(self):
        plain = simulate(*build_nodes(3, [20, 20]), seed=2)
        slowed = simulate(*build_nodes(3, [20, 20]), seed=2, stragglers={1: 5.0})
        assert slowed.node_finish_ms[1] > plain.node_finish_ms[1] * 2
        assert slowed.duration_ms > plain.duration_ms

    def test_lockstep_bound_forces_waiting(self):
        nodes, topo = build_nodes(3, [10] * 4, max_lag=0)
        result = simulate(nodes, topo, seed=0, stragglers={0: 5.0})
        kinds = [r.kind for r in result.trace.records]
        assert "wait_enter" in kinds and "wait_exit" in kinds
        assert result.rounds_completed == [4] * 3

    def test_run_only_once(self):
        sim = Simulation(*build_nodes(2, [2]), seed=0)
        sim.run()
        with pytest.raises(SimError):
            sim.run()

    def test_straggler_validation(self):
        sim = Simulation(*build_nodes(2, [2]), seed=0)
        with pytest.raises(SimError):
            sim.set_straggler(9, 2.0)
        with pytest.raises(SimError):
            sim.set_straggler(0, 0.5)

    def test_node_count_must_match_topology(self):
        nodes, _ = build_nodes(3, [2])
        with pytest.raises(SimError):
            Simulation(nodes, ring(4), seed=0)

    def test_deadlock_reported(self):
        class Stuck:
            """Driver-surface stub that blocks forever."""

            def __init__(self, node_id):
                self.node_id = node_id
                self.finished = False
                self.round_index = 0
                self.step_in_round = 0
                self.received = {}

            def check_sync(self):
                return False

        topo = ring(2)
        with pytest.raises(DeadlockError) as err:
            simulate([Stuck(0), Stuck(1)], topo, seed=0)
        assert err.value.blocked[0]["node"] == 0


class TestTraceIO:
    def test_write_read_round_trip(self, tmp_path):
        nodes, topo = build_nodes(3, [3, 3])
        result = simulate(nodes, topo, seed=5)
        path = tmp_path / "run.trace"
        result.trace.write(path)
        back = Trace.read(path)
        assert back.n == result.trace.n
        assert back.edges == result.trace.edges
        assert back.records == result.trace.records
        assert back.topology().edges == topo.edges

    def test_negative_step_round_trips_as_blank(self, tmp_path):
        trace = Trace(2, ((0, 1),), [TraceRecord(0.5, 1, "apply", 0, -1, "from=0")])
        path = tmp_path / "t.trace"
        trace.write(path)
        text = path.read_text()
        assert "0.5,1,apply,0,," in text
        assert Trace.read(path).records[0].step == -1

    def test_malformed_line_rejected(self, tmp_path):
        path = tmp_path / "bad.trace"
        path.write_text("# nodes 2\n# edge 0 1\ntime,node,event,round,h,detail\n1.0,0,grad\n")
        with pytest.raises(SimError):
            Trace.read(path)

    def test_missing_header_rejected(self, tmp_path):
        path = tmp_path / "bad.trace"
        path.write_text("time,node,event,round,h,detail\n")
        with pytest.raises(SimError):
            Trace.read(path)

    def test_float_times_survive_exactly(self, tmp_path):
        t = 0.30000000000000004
        trace = Trace(1, (), [TraceRecord(t, 0, "grad", 0, 1, "")])
        path = tmp_path / "t.trace"
        trace.write(path)
        assert Trace.read(path).records[0].time == t
