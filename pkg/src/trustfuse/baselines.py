"""Majority vote and the Counts (Naive Bayes) baseline."""

from __future__ import annotations

import numpy as np

from .instance import FusionInstance, GroundTruth
from .model import argmax_with_ties

__all__ = ["majority_vote", "counts_fit", "counts_infer"]


def majority_vote(instance: FusionInstance, seed: int = 0) -> dict[str, str]:
    """Most frequent observed value per object; ties broken per seed."""
    counts = np.zeros(instance.n_candidates)
    np.add.at(counts, instance.obs_cand, 1.0)
    rng = np.random.default_rng(seed)
    return argmax_with_ties(counts, instance, rng)


def counts_fit(
    instance: FusionInstance,
    ground_truth: GroundTruth,
    smoothing: float = 1.0,
) -> dict[str, float]:
    """Smoothed fraction of correct labeled observations per source.

    Sources with no labeled observations get the uninformed prior 0.5.
    """
    if smoothing < 0:
        raise ValueError("smoothing must be non-negative")
    ground_truth.validate(instance)
    correct = np.zeros(instance.n_sources)
    total = np.zeros(instance.n_sources)
    for o, value in ground_truth.labels.items():
        v_idx = instance.domains[o].index(value)
        rows = instance.observers_of(o)
        srcs = instance.obs_source[rows]
        np.add.at(total, srcs, 1.0)
        np.add.at(correct, srcs[instance.obs_value_idx[rows] == v_idx], 1.0)
    acc = np.full(instance.n_sources, 0.5)
    seen = total > 0
    acc[seen] = (correct[seen] + smoothing) / (total[seen] + 2.0 * smoothing)
    return {instance.sources[s]: float(acc[s]) for s in range(instance.n_sources)}


def counts_infer(
    instance: FusionInstance,
    accuracies: dict[str, float],
    seed: int = 0,
) -> dict[str, str]:
    """Naive Bayes inference: error mass split uniformly over wrong values."""
    acc = np.array([accuracies[s] for s in instance.sources], dtype=float)
    if np.any(acc <= 0.0) or np.any(acc >= 1.0):
        raise ValueError("accuracies must lie strictly in (0, 1)")
    log_a = np.log(acc)
    dom_sizes = instance.cand_counts
    # Per observation: log((1 - A_s) / max(|D_o| - 1, 1)).
    wrong_div = np.maximum(dom_sizes[instance.obs_object] - 1, 1)
    log_wrong = np.log(1.0 - acc[instance.obs_source]) - np.log(wrong_div)
    base = np.zeros(instance.n_objects)
    np.add.at(base, instance.obs_object, log_wrong)
    scores = base[instance.cand_object].copy()
    np.add.at(scores, instance.obs_cand, log_a[instance.obs_source] - log_wrong)
    rng = np.random.default_rng(seed)
    return argmax_with_ties(scores, instance, rng)
