"""Seed derivation for the independent random streams used in a run.

Each concern (compute latency, network latency, per-node data sampling,
dataset generation, slot assignment) draws from its own numpy Generator,
derived from the experiment seed plus a stream tag.  Adding draws on one
stream never perturbs another, which keeps runs reproducible when a knob
such as a straggler factor is toggled.
"""
from __future__ import annotations

import numpy as np

COMPUTE_STREAM = 1
NETWORK_STREAM = 2
SAMPLE_STREAM = 3
DATA_STREAM = 4
SETUP_STREAM = 5

# XOR'd into the experiment seed to derive the held-out evaluation set.
EVAL_SEED_XOR = 0x9E3779B9


def stream(seed: int, tag: int, *extra: int) -> np.random.Generator:
    """Generator for one concern; extra sub-keys (e.g. a node id) split further."""
    return np.random.default_rng([seed, tag, *extra])


def eval_seed(seed: int) -> int:
    """Seed for evaluation data, disjoint from the training stream."""
    return seed ^ EVAL_SEED_XOR
