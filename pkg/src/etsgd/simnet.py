"""Deterministic discrete-event simulator for message-passing SGD nodes.

Virtual time is a float in milliseconds.  The event queue is a heap keyed
by (time, sequence number), so ties resolve by insertion order and a run
is a pure function of its seed.  Three event kinds exist: a node finishing
one gradient step, a message delivery, and the wake of a node that was
blocked at its synchronization checkpoint.  Wakes are only ever scheduled
by deliveries; a waiting node costs no virtual time.

Latencies are sampled per concern from independent streams: one uniform
draw per gradient step (scaled by the node's straggler factor) and one per
message per link.  Delivery is reliable but not ordered; a slow message
can be overtaken by a later fast one.

Any object with the small driver surface used by ComputeNode (finished,
check_sync, advance, on_receive, plus round_index/step_in_round for the
trace) can ride the engine; the threshold baseline reuses it unchanged.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple

from .rngs import COMPUTE_STREAM, NETWORK_STREAM, stream
from .topology import Topology, neighbors

STEP_DONE = 0
DELIVER = 1
WAKE = 2

_COMPUTING = "computing"
_WAITING = "waiting"
_DONE = "done"


class SimError(ValueError):
    """Raised for invalid simulation parameters."""


class DeadlockError(RuntimeError):
    """Event queue drained while some node still had work left.

    The scheduled protocol cannot deadlock on a connected topology with a
    uniform round count, so this firing indicates a defect in a node
    implementation or a disconnected/partial setup.
    """

    def __init__(self, blocked):
        self.blocked = blocked
        parts = ", ".join(
            f"node {b['node']} at round {b['round']} step {b['step']} received={b['received']}"
            for b in blocked
        )
        super().__init__(f"no runnable events left; blocked: {parts}")


@dataclass
class DelayModel:
    """Uniform latency ranges in milliseconds: per gradient step and per message."""

    compute: tuple[float, float] = (0.1, 1.0)
    network: tuple[float, float] = (0.1, 1.5)

    def __post_init__(self):
        for lo, hi in (self.compute, self.network):
            if lo < 0 or hi < lo:
                raise SimError(f"bad latency range ({lo}, {hi})")

    def compute_delay(self, rng, factor: float = 1.0) -> float:
        lo, hi = self.compute
        return rng.uniform(lo, hi) * factor

    def network_delay(self, rng) -> float:
        lo, hi = self.network
        return rng.uniform(lo, hi)


class TraceRecord(NamedTuple):
    """One simulator observation; step < 0 means the column is not applicable."""

    time: float
    node: int
    kind: str
    round_index: int
    step: int
    detail: str


@dataclass
class Trace:
    """Recorded run: topology summary plus records in processing order."""

    n: int
    edges: tuple[tuple[int, int], ...]
    records: list[TraceRecord] = field(default_factory=list)

    def topology(self) -> Topology:
        return Topology(self.n, frozenset(self.edges))

    def write(self, path: str | Path) -> None:
        lines = [f"# nodes {self.n}"]
        lines.extend(f"# edge {u} {v}" for u, v in sorted(self.edges))
        lines.append("time,node,event,round,h,detail")
        for r in self.records:
            step = str(r.step) if r.step >= 0 else ""
            lines.append(f"{r.time!r},{r.node},{r.kind},{r.round_index},{step},{r.detail}")
        Path(path).write_text("\n".join(lines) + "\n")

    @staticmethod
    def read(path: str | Path) -> "Trace":
        n = None
        edges = []
        records = []
        for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
            if raw.startswith("# nodes "):
                n = int(raw.split()[2])
            elif raw.startswith("# edge "):
                _, _, u, v = raw.split()
                edges.append((int(u), int(v)))
            elif not raw or raw.startswith("#") or raw.startswith("time,"):
                continue
            else:
                parts = raw.split(",", 5)
                if len(parts) != 6:
                    raise SimError(f"{path}:{lineno}: malformed trace line {raw!r}")
                t, node, kind, rnd, step, detail = parts
                records.append(
                    TraceRecord(float(t), int(node), kind, int(rnd), int(step) if step else -1, detail)
                )
        if n is None:
            raise SimError(f"{path}: missing '# nodes' header")
        return Trace(n, tuple(edges), records)


@dataclass
class SimResult:
    trace: Trace
    duration_ms: float
    node_finish_ms: list[float]
    rounds_completed: list[int]
    messages_sent: int
    messages_delivered: int
    nodes: list

    @property
    def mean_finish_ms(self) -> float:
        return sum(self.node_finish_ms) / len(self.node_finish_ms)


class Simulation:
    """One configured run.  Build, optionally inject stragglers, then run() once."""

    def __init__(
        self,
        nodes,
        topo: Topology,
        delay_model: DelayModel | None = None,
        seed: int = 0,
    ):
        if len(nodes) != topo.n:
            raise SimError(f"{len(nodes)} nodes for a {topo.n}-node topology")
        self.nodes = list(nodes)
        self.topo = topo
        self.delays = delay_model if delay_model is not None else DelayModel()
        self._compute_rng = stream(seed, COMPUTE_STREAM)
        self._network_rng = stream(seed, NETWORK_STREAM)
        self._factors = {i: 1.0 for i in range(topo.n)}
        self._neighbors = {i: neighbors(topo, i) for i in range(topo.n)}
        self._ran = False

    def set_straggler(self, node: int, factor: float) -> None:
        """Scale every later compute-latency draw of one node."""
        if node not in self._factors:
            raise SimError(f"unknown node id {node}")
        if factor < 1.0:
            raise SimError(f"straggler factor must be >= 1, got {factor}")
        self._factors[node] = factor

    def run(self, round_hook: Callable | None = None) -> SimResult:
        """Drain the event queue and return the recorded run.

        round_hook(node, round_index, now) fires after each completed round,
        once that round's messages are already in flight.
        """
        if self._ran:
            raise SimError("a Simulation object runs only once")
        self._ran = True

        n = self.topo.n
        heap: list[tuple] = []
        seq = 0
        state = [_DONE] * n
        finish = [0.0] * n
        rounds_done = [0] * n
        sent = 0
        delivered = 0
        records: list[TraceRecord] = []
        now = 0.0

        def push(time, kind, node_id, msg=None):
            nonlocal seq
            heapq.heappush(heap, (time, seq, kind, node_id, msg))
            seq += 1

        def start_or_wait(node_id):
            node = self.nodes[node_id]
            if node.finished:
                state[node_id] = _DONE
                finish[node_id] = now
                return
            if not node.check_sync():
                state[node_id] = _WAITING
                records.append(
                    TraceRecord(now, node_id, "wait_enter", node.round_index, node.step_in_round, "")
                )
                return
            state[node_id] = _COMPUTING
            push(now + self.delays.compute_delay(self._compute_rng, self._factors[node_id]),
                 STEP_DONE, node_id)

        for node_id in range(n):
            start_or_wait(node_id)

        while heap:
            now, _, kind, node_id, msg = heapq.heappop(heap)
            node = self.nodes[node_id]

            if kind == STEP_DONE:
                rnd, step, completed, outbox = node.advance()
                if step >= 1:
                    records.append(TraceRecord(now, node_id, "grad", rnd, step, ""))
                if completed:
                    rounds_done[node_id] += 1
                    records.append(
                        TraceRecord(now, node_id, "round_end", rnd, step, f"msgs={len(outbox)}")
                    )
                    for dest, out in outbox:
                        push(now + self.delays.network_delay(self._network_rng), DELIVER, dest, out)
                        sent += 1
                    if round_hook is not None:
                        round_hook(node, rnd, now)
                start_or_wait(node_id)

            elif kind == DELIVER:
                node.on_receive(msg)
                delivered += 1
                records.append(
                    TraceRecord(now, node_id, "apply", msg.round_index, -1, f"from={msg.sender}")
                )
                if state[node_id] == _WAITING and node.check_sync():
                    push(now, WAKE, node_id)

            else:  # WAKE
                if state[node_id] == _WAITING and node.check_sync():
                    records.append(
                        TraceRecord(now, node_id, "wait_exit", node.round_index, node.step_in_round, "")
                    )
                    state[node_id] = _COMPUTING
                    push(now + self.delays.compute_delay(self._compute_rng, self._factors[node_id]),
                         STEP_DONE, node_id)

        if sent != delivered:
            raise RuntimeError(f"message conservation broken: sent {sent}, delivered {delivered}")
        blocked = [
            {
                "node": i,
                "round": self.nodes[i].round_index,
                "step": self.nodes[i].step_in_round,
                "received": getattr(self.nodes[i], "received", {}),
            }
            for i in range(n)
            if state[i] != _DONE
        ]
        if blocked:
            raise DeadlockError(blocked)

        trace = Trace(n, tuple(sorted(self.topo.edges)), records)
        return SimResult(
            trace=trace,
            duration_ms=now,
            node_finish_ms=finish,
            rounds_completed=rounds_done,
            messages_sent=sent,
            messages_delivered=delivered,
            nodes=self.nodes,
        )


def simulate(
    nodes,
    topo: Topology,
    delay_model: DelayModel | None = None,
    seed: int = 0,
    *,
    stragglers: dict[int, float] | None = None,
    round_hook: Callable | None = None,
) -> SimResult:
    """Convenience wrapper: configure a Simulation and run it."""
    sim = Simulation(nodes, topo, delay_model, seed)
    for node_id, factor in (stragglers or {}).items():
        sim.set_straggler(node_id, factor)
    return sim.run(round_hook)
