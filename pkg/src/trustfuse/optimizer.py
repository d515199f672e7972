"""Automatic choice between ERM and EM via information units.

Ground truth is worth m units per labeled object (m = observing sources).
An EM E-step under an equal-accuracy majority-vote model is worth
m * (1 - H(p_e)) per object, where p_e is the probability majority vote
recovers the true value. A generalization-bound check short-circuits to ERM
when labels are plentiful relative to the feature count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .instance import FusionInstance, GroundTruth

__all__ = [
    "OptimizerDecision",
    "estimate_avg_accuracy",
    "em_units",
    "ground_truth_units",
    "decide",
    "agreement_matrix",
]


@dataclass(frozen=True)
class OptimizerDecision:
    choice: str  # "ERM" or "EM"
    erm_bound: float
    estimated_avg_accuracy: float | None
    ground_truth_units: float
    em_units: float | None
    tau: float


def agreement_matrix(instance: FusionInstance) -> np.ndarray:
    """Mean pairwise agreement-minus-disagreement; 0 where no overlap."""
    n = instance.n_sources
    num = np.zeros((n, n))
    cnt = np.zeros((n, n))
    for o in range(instance.n_objects):
        rows = instance.observers_of(o)
        if rows.size < 2:
            continue
        srcs = instance.obs_source[rows]
        vals = instance.obs_value_idx[rows]
        sign = np.where(np.equal.outer(vals, vals), 1.0, -1.0)
        ix = np.ix_(srcs, srcs)
        num[ix] += sign
        cnt[ix] += 1.0
    with np.errstate(invalid="ignore"):
        x = np.where(cnt > 0, num / np.maximum(cnt, 1.0), 0.0)
    np.fill_diagonal(x, 0.0)
    return x


def estimate_avg_accuracy(instance: FusionInstance) -> float:
    """Average source accuracy from the agreement matrix, in [0.5, 1]."""
    n = instance.n_sources
    if n < 2:
        raise ValueError("need at least two sources to estimate agreement")
    x = agreement_matrix(instance)
    mu_hat = np.sqrt(max(0.0, float(x.sum())) / (n * n - n))
    return float(np.clip((mu_hat + 1.0) / 2.0, 0.5, 1.0))


def _entropy_bits(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return float(-p * np.log2(p) - (1.0 - p) * np.log2(1.0 - p))


def em_units(
    instance: FusionInstance, avg_accuracy: float, per_observer: bool = True
) -> float:
    """Expected information units contributed by one EM E-step.

    ``per_observer=True`` multiplies each object's 1 - H(p_e) by its number
    of observers so the scale matches ground-truth units; set it to False
    to count one unit slot per object instead.
    """
    if not (0.0 < avg_accuracy < 1.0):
        raise ValueError("average accuracy must lie strictly in (0, 1)")
    total = 0.0
    m_arr = instance.obs_counts
    d_arr = instance.cand_counts
    for m, d in zip(m_arr, d_arr):
        p_e = majority_success_probability(int(m), int(d), avg_accuracy)
        if p_e >= 0.5:
            gain = 1.0 - _entropy_bits(p_e)
            total += (int(m) if per_observer else 1) * gain
    return total


def majority_success_probability(m: int, domain_size: int, accuracy: float) -> float:
    """P(majority vote is correct): upper binomial tail past floor(m/|D|).

    The threshold is capped at m - 1 so a domain observed with a single
    distinct value degenerates to the plain per-source success probability.
    """
    if m < 1 or domain_size < 1:
        raise ValueError("object must have observations and a non-empty domain")
    k = min(m // domain_size, m - 1)
    # Survival function of Binomial(m, accuracy) at k, computed via the
    # regularized incomplete beta function (stable for m up to 1e4+).
    return float(special.bdtrc(k, m, accuracy))


def ground_truth_units(instance: FusionInstance, ground_truth: GroundTruth) -> float:
    """Total observers over labeled objects: m units per labeled object."""
    counts = instance.obs_counts
    return float(sum(int(counts[o]) for o in ground_truth.labels))


def decide(
    instance: FusionInstance,
    ground_truth: GroundTruth,
    tau: float,
    n_features: int | None = None,
) -> OptimizerDecision:
    """Pick ERM or EM for this instance.

    ERM wins outright when sqrt(|K|/|G|) * ln(max(|G|, 2)) <= tau; otherwise
    EM wins iff its estimated units exceed the ground-truth units. No labels
    forces EM.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    n_k = instance.n_features if n_features is None else n_features
    n_g = len(ground_truth)
    if n_g > 0:
        bound = float(np.sqrt(n_k / n_g) * np.log(max(n_g, 2)))
    else:
        bound = float("inf")

    avg_acc: float | None = None
    units_em: float | None = None
    try:
        avg_acc = estimate_avg_accuracy(instance)
        units_em = em_units(instance, min(avg_acc, 1.0 - 1e-12))
    except ValueError:
        avg_acc = None
        units_em = None

    units_gt = ground_truth_units(instance, ground_truth)
    if n_g > 0 and bound <= tau:
        choice = "ERM"
    elif n_g == 0:
        choice = "EM"
    else:
        if units_em is None:
            raise ValueError("cannot estimate EM units for this instance")
        choice = "EM" if units_em > units_gt else "ERM"
    return OptimizerDecision(
        choice=choice,
        erm_bound=bound,
        estimated_avg_accuracy=avg_acc,
        ground_truth_units=units_gt,
        em_units=units_em,
        tau=tau,
    )
