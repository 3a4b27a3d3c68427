"""Experiment runner: config validation, metrics, sweeps, CSV and SVG export.

A run is described by a plain-data ExperimentConfig, so configs can come
from code, from a config file, or from command-line flags without three
different shapes.  run_experiment builds the task, drives the simulator,
verifies the recorded trace against the configured lag bound, and packs
everything into Metrics.  Runs are deterministic per seed: identical
configs produce byte-identical CSV, SVG, and trace exports.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import consistency
from .baselines import ThresholdNode, default_threshold_schedules
from .node import ComputeNode, assignment_from_budgets
from .objectives import (
    Dataset,
    Logistic,
    MeanQuadratic,
    gaussian_cloud,
    iid_indices,
    load_idx,
    synthetic_blobs,
)
from .rngs import SAMPLE_STREAM, eval_seed, stream
from .schedules import (
    parse_sample_schedule,
    parse_step_schedule,
    required_rounds,
    round_plan,
    step_size,
)
from .simnet import DelayModel, Simulation, Trace
from .topology import Topology, complete, is_connected, line, load_edge_list, neighbors, ring

SWEEP_AXES = ("n", "d", "K", "constant-s", "threshold-coeff")

CSV_COLUMNS = "experiment,node,round,iter,loss,accuracy,rounds_total,messages,duration_ms,speedup"

_SVG_PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
    "#8c564b", "#17becf", "#7f7f7f", "#bcbd22", "#e377c2",
)


class ConfigError(ValueError):
    """Raised when an ExperimentConfig fails validation."""


@dataclass
class ExperimentConfig:
    """Everything one run needs, as plain data."""

    name: str = "run"
    topology: str = "ring"
    n: int = 5
    objective: str = "blobs"
    samples: int = 2000
    dim: int = 2
    classes: int = 2
    separation: float = 10.0
    center: tuple[float, ...] | None = None
    spread: float = 1.0
    l2: float = 0.0
    idx_images: str | None = None
    idx_labels: str | None = None
    sample_schedule: str = "linear:10,1,0"
    step_schedule: str = "diminishing:0.01,0.01"
    max_lag: int = 1
    iterations: int | None = None
    total_iterations: int | None = None
    algorithm: str = "scheduled"
    threshold_coeff: float = 0.2
    compute_range: tuple[float, float] = (0.1, 1.0)
    network_range: tuple[float, float] = (0.1, 1.5)
    stragglers: dict[int, float] = field(default_factory=dict)
    seed: int = 0
    eval_every: int = 1
    eval_samples: int = 1000

    def validate(self) -> None:
        if self.n < 1:
            raise ConfigError(f"n must be >= 1, got {self.n}")
        if (self.iterations is None) == (self.total_iterations is None):
            raise ConfigError("set exactly one of iterations / total_iterations")
        k = self.iterations if self.iterations is not None else self.total_iterations
        if k < 0:
            raise ConfigError(f"iteration budget must be >= 0, got {k}")
        if self.algorithm not in ("scheduled", "threshold"):
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        if self.objective not in ("blobs", "quadratic", "idx"):
            raise ConfigError(f"unknown objective {self.objective!r}")
        if self.objective == "idx" and not (self.idx_images and self.idx_labels):
            raise ConfigError("objective 'idx' needs idx_images and idx_labels paths")
        if self.max_lag < 0:
            raise ConfigError(f"max_lag must be >= 0, got {self.max_lag}")
        if not 0 < self.threshold_coeff <= 1:
            raise ConfigError(f"threshold_coeff must be in (0, 1], got {self.threshold_coeff}")
        if self.eval_every < 0:
            raise ConfigError(f"eval_every must be >= 0, got {self.eval_every}")
        if self.eval_samples < 1:
            raise ConfigError(f"eval_samples must be >= 1, got {self.eval_samples}")
        for node, factor in self.stragglers.items():
            if not (0 <= node < self.n):
                raise ConfigError(f"straggler node {node} out of range for n={self.n}")
            if factor < 1:
                raise ConfigError(f"straggler factor must be >= 1, got {factor}")
        parse_sample_schedule(self.sample_schedule)
        parse_step_schedule(self.step_schedule)

    @property
    def per_node_iterations(self) -> int:
        if self.iterations is not None:
            return self.iterations
        return math.ceil(self.total_iterations / self.n)


@dataclass
class NodeMetrics:
    node: int
    rounds: int
    iterations: int
    final_loss: float
    final_accuracy: float | None
    finish_ms: float
    final_w: np.ndarray
    curve: list[tuple[int, int, float, float | None]] = field(default_factory=list)


@dataclass
class Metrics:
    config: ExperimentConfig
    nodes: list[NodeMetrics]
    rounds_total: int
    broadcasts_total: int
    messages: int
    duration_ms: float
    mean_finish_ms: float
    speedup: float | None
    connected: bool
    delay_check_ok: bool | None
    trace: Trace | None = None

    def node_models(self) -> list[np.ndarray]:
        return [nm.final_w for nm in self.nodes]


def build_topology(cfg: ExperimentConfig) -> Topology:
    kind = cfg.topology
    if kind == "ring":
        return ring(cfg.n)
    if kind == "line":
        return line(cfg.n)
    if kind == "complete":
        return complete(cfg.n)
    return load_edge_list(kind, cfg.n)


def build_task(cfg: ExperimentConfig):
    """Construct (objective, train set, eval set) for a config.

    Synthetic tasks get a disjoint eval set drawn from the same
    distribution under a derived seed; IDX tasks evaluate on the training
    set itself since no second file pair is configured.
    """
    if cfg.objective == "blobs":
        train = synthetic_blobs(cfg.seed, cfg.samples, cfg.dim, cfg.classes, cfg.separation)
        held = synthetic_blobs(
            eval_seed(cfg.seed), cfg.eval_samples, cfg.dim, cfg.classes, cfg.separation
        )
        return Logistic(cfg.dim, cfg.classes, cfg.l2), train, held
    if cfg.objective == "quadratic":
        center = cfg.center if cfg.center is not None else (0.0,) * cfg.dim
        train = gaussian_cloud(cfg.seed, cfg.samples, cfg.dim, center, cfg.spread)
        held = gaussian_cloud(eval_seed(cfg.seed), cfg.eval_samples, cfg.dim, center, cfg.spread)
        return MeanQuadratic(cfg.dim), train, held
    train = load_idx(cfg.idx_images, cfg.idx_labels)
    classes = int(train.labels.max()) + 1
    return Logistic(train.dim, classes, cfg.l2), train, train


def planned_budgets(cfg: ExperimentConfig) -> tuple[list[int], list[float]]:
    """Per-round step budgets and step sizes one node will execute.

    The final round is trimmed so the budgets sum to exactly the per-node
    iteration count; each round's step size is the step schedule evaluated
    at the round's first global iteration.
    """
    sample_sched = parse_sample_schedule(cfg.sample_schedule)
    step_sched = parse_step_schedule(cfg.step_schedule)
    k = cfg.per_node_iterations
    rounds = required_rounds(sample_sched, k)
    sizes, starts = round_plan(sample_sched, rounds)
    budgets = list(sizes)
    if rounds:
        budgets[-1] = k - starts[-1]
    etas = [step_size(step_sched, s) for s in starts]
    return budgets, etas


def run_experiment(
    cfg: ExperimentConfig,
    *,
    keep_trace: bool = False,
    reference_duration_ms: float | None = None,
) -> Metrics:
    """Run one configured experiment and collect its metrics.

    Scheduled runs assert the protocol's round arithmetic and verify the
    recorded trace against the configured lag bound; a verification
    failure is a defect, surfaced in delay_check_ok rather than raised.
    """
    cfg.validate()
    topo = build_topology(cfg)
    objective, train, held = build_task(cfg)
    parts = iid_indices(cfg.n, train.m)
    k = cfg.per_node_iterations

    if cfg.algorithm == "scheduled":
        budgets, etas = planned_budgets(cfg)
        expected_rounds = len(budgets)
        nodes = [
            ComputeNode(
                i,
                objective,
                train,
                parts[i],
                budgets,
                etas,
                neighbors(topo, i),
                cfg.max_lag,
                stream(cfg.seed, SAMPLE_STREAM, i),
            )
            for i in range(cfg.n)
        ]
    else:
        alpha, beta = default_threshold_schedules()
        nodes = [
            ThresholdNode(
                i,
                objective,
                train,
                parts[i],
                k,
                alpha,
                beta,
                neighbors(topo, i),
                stream(cfg.seed, SAMPLE_STREAM, i),
                coeff=cfg.threshold_coeff,
            )
            for i in range(cfg.n)
        ]

    curves: dict[int, list[tuple[int, int, float, float | None]]] = {
        i: [] for i in range(cfg.n)
    }
    labeled = isinstance(objective, Logistic)

    def round_hook(node, rnd, now):
        if cfg.eval_every == 0 or (rnd + 1) % cfg.eval_every != 0:
            return
        done = node.t if cfg.algorithm == "threshold" else sum(budgets[: rnd + 1])
        loss = objective.loss(node.w, held)
        acc = objective.accuracy(node.w, held) if labeled else None
        curves[node.node_id].append((rnd, done, loss, acc))

    sim = Simulation(nodes, topo, DelayModel(cfg.compute_range, cfg.network_range), cfg.seed)
    for node_id, factor in sorted(cfg.stragglers.items()):
        sim.set_straggler(node_id, factor)
    result = sim.run(round_hook)

    if cfg.algorithm == "scheduled":
        for i, done in enumerate(result.rounds_completed):
            if done != expected_rounds:
                raise RuntimeError(
                    f"node {i} completed {done} rounds, schedule demands {expected_rounds}"
                )
        delay_ok = consistency.verify_round_delay(result.trace, cfg.max_lag).ok
        rounds_total = expected_rounds
    else:
        delay_ok = None
        rounds_total = max(result.rounds_completed, default=0)

    node_metrics = []
    for i, node in enumerate(nodes):
        loss = objective.loss(node.w, held)
        acc = objective.accuracy(node.w, held) if labeled else None
        node_metrics.append(
            NodeMetrics(
                node=i,
                rounds=result.rounds_completed[i],
                iterations=k,
                final_loss=loss,
                final_accuracy=acc,
                finish_ms=result.node_finish_ms[i],
                final_w=node.w.copy(),
                curve=curves[i],
            )
        )

    if cfg.n == 1:
        speedup = 1.0
    elif reference_duration_ms is not None:
        speedup = reference_duration_ms / result.duration_ms if result.duration_ms else None
    else:
        speedup = None

    return Metrics(
        config=cfg,
        nodes=node_metrics,
        rounds_total=rounds_total,
        broadcasts_total=sum(result.rounds_completed),
        messages=result.messages_sent,
        duration_ms=result.duration_ms,
        mean_finish_ms=result.mean_finish_ms,
        speedup=speedup,
        connected=is_connected(topo),
        delay_check_ok=delay_ok,
        trace=result.trace if keep_trace else None,
    )


def run_timeline(cfg: ExperimentConfig) -> consistency.TimelineMap:
    """The global iteration labeling matching a scheduled run of this config."""
    budgets, _ = planned_budgets(cfg)
    return consistency.TimelineMap(assignment_from_budgets([budgets] * cfg.n))


def sweep(cfg: ExperimentConfig, axis: str, values, **run_kwargs) -> list[Metrics]:
    """One run per axis value, sharing the base config and seed.

    Sweeping n with a total iteration budget reproduces the node-scaling
    layout; the n=1 point, when present, is run first and used as the
    speedup reference for the other points.
    """
    if axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; pick one of {', '.join(SWEEP_AXES)}")
    points = []
    for v in values:
        name = f"{cfg.name}[{axis}={v}]"
        if axis == "n":
            points.append(replace(cfg, name=name, n=int(v)))
        elif axis == "d":
            points.append(replace(cfg, name=name, max_lag=int(v)))
        elif axis == "K":
            points.append(replace(cfg, name=name, iterations=int(v), total_iterations=None))
        elif axis == "constant-s":
            points.append(replace(cfg, name=name, sample_schedule=f"const:{int(v)}"))
        else:
            points.append(
                replace(cfg, name=name, algorithm="threshold", threshold_coeff=float(v))
            )

    reference = None
    if axis == "n":
        for point in points:
            if point.n == 1:
                reference = run_experiment(point, **run_kwargs)
                break

    out = []
    for point in points:
        if reference is not None and point.n == 1:
            out.append(reference)
        else:
            ref_ms = reference.duration_ms if reference is not None else None
            out.append(run_experiment(point, reference_duration_ms=ref_ms, **run_kwargs))
    return out


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def export_csv(metrics, path: str | Path) -> None:
    """Write metrics (one or a list) as CSV with a fixed column order.

    Each node contributes its evaluation-curve rows, or a single final
    row when no curve was recorded.  Output is deterministic byte for
    byte given equal metrics.
    """
    if isinstance(metrics, Metrics):
        metrics = [metrics]
    lines = [CSV_COLUMNS]
    for m in metrics:
        for nm in m.nodes:
            rows = nm.curve or [(nm.rounds - 1, nm.iterations, nm.final_loss, nm.final_accuracy)]
            for rnd, it, loss, acc in rows:
                lines.append(
                    ",".join(
                        (
                            m.config.name,
                            str(nm.node),
                            str(rnd),
                            str(it),
                            _fmt(loss),
                            _fmt(acc),
                            str(nm.rounds),
                            str(m.messages),
                            _fmt(m.duration_ms),
                            _fmt(m.speedup),
                        )
                    )
                )
    Path(path).write_text("\n".join(lines) + "\n")


def loss_curves(m: Metrics) -> list[tuple[str, list[tuple[float, float]]]]:
    """Per-node (iteration, loss) polyline inputs for export_svg_lines."""
    return [
        (f"node {nm.node}", [(float(it), float(loss)) for _, it, loss, _ in nm.curve])
        for nm in m.nodes
        if nm.curve
    ]


def export_svg_lines(curves, path: str | Path, title: str = "") -> None:
    """Render labeled polylines as a small standalone SVG chart.

    Purely deterministic text output: fixed canvas, fixed palette, fixed
    number formatting.  Good enough to eyeball convergence, not a plotting
    library.
    """
    width, height = 640.0, 400.0
    left, right, top, bottom = 60.0, 20.0, 30.0, 40.0
    pts = [p for _, series in curves for p in series]
    if pts:
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        xmin, xmax = min(xs), max(xs)
        ymin, ymax = min(ys), max(ys)
    else:
        xmin = ymin = 0.0
        xmax = ymax = 1.0
    if xmax == xmin:
        xmax = xmin + 1.0
    if ymax == ymin:
        ymax = ymin + 1.0

    def sx(x: float) -> float:
        return left + (x - xmin) / (xmax - xmin) * (width - left - right)

    def sy(y: float) -> float:
        return height - bottom - (y - ymin) / (ymax - ymin) * (height - top - bottom)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" height="{height:.0f}" '
        f'viewBox="0 0 {width:.0f} {height:.0f}">',
        f'<rect width="{width:.0f}" height="{height:.0f}" fill="white"/>',
        f'<line x1="{left:.1f}" y1="{height - bottom:.1f}" x2="{width - right:.1f}" '
        f'y2="{height - bottom:.1f}" stroke="black"/>',
        f'<line x1="{left:.1f}" y1="{top:.1f}" x2="{left:.1f}" y2="{height - bottom:.1f}" '
        f'stroke="black"/>',
    ]
    if title:
        out.append(
            f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" '
            f'font-family="sans-serif" font-size="14">{title}</text>'
        )
    out.append(
        f'<text x="{left:.1f}" y="{height - bottom + 16:.1f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="11">{xmin:g}</text>'
    )
    out.append(
        f'<text x="{width - right:.1f}" y="{height - bottom + 16:.1f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="11">{xmax:g}</text>'
    )
    out.append(
        f'<text x="{left - 6:.1f}" y="{height - bottom:.1f}" text-anchor="end" '
        f'font-family="sans-serif" font-size="11">{ymin:.4g}</text>'
    )
    out.append(
        f'<text x="{left - 6:.1f}" y="{top + 10:.1f}" text-anchor="end" '
        f'font-family="sans-serif" font-size="11">{ymax:.4g}</text>'
    )
    for i, (label, series) in enumerate(curves):
        color = _SVG_PALETTE[i % len(_SVG_PALETTE)]
        if series:
            coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in series)
            out.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        out.append(
            f'<text x="{width - right - 4:.1f}" y="{top + 14 * (i + 1):.1f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11" fill="{color}">{label}</text>'
        )
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")
