"""Seeded synthetic fusion instances with known truth and source accuracies."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .instance import FusionInstance, GroundTruth
from .model import _logistic

__all__ = ["SimConfig", "SimResult", "generate", "add_clone"]


@dataclass(frozen=True)
class SimConfig:
    n_sources: int
    n_objects: int
    density: float = 0.1
    pair_sampling: bool = False
    domain_size: int = 2
    # UNIFORM model: accuracies drawn uniformly from mean +- spread.
    accuracy_mean: float = 0.8
    accuracy_spread: float = 0.0
    # FEATURE_LOGISTIC model: Boolean features, A_s = logistic(w . f_s).
    true_weights: tuple[float, ...] | None = None
    feature_density: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_sources < 1 or self.n_objects < 1:
            raise ValueError("need at least one source and one object")
        if not self.pair_sampling and not (0.0 < self.density <= 1.0):
            raise ValueError("density must be in (0, 1]")
        if self.pair_sampling and self.n_sources < 2:
            raise ValueError("pair sampling needs at least two sources")
        if self.domain_size < 2:
            raise ValueError("domain size must be at least 2")
        if self.true_weights is None:
            lo = self.accuracy_mean - self.accuracy_spread
            hi = self.accuracy_mean + self.accuracy_spread
            if lo < 0.0 or hi > 1.0:
                raise ValueError("accuracy range must stay within [0, 1]")


@dataclass(frozen=True)
class SimResult:
    instance: FusionInstance
    truth: GroundTruth
    true_accuracies: np.ndarray
    true_weights: np.ndarray | None


def _draw_accuracies(
    config: SimConfig, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, np.ndarray | None, tuple[str, ...]]:
    if config.true_weights is None:
        acc = rng.uniform(
            config.accuracy_mean - config.accuracy_spread,
            config.accuracy_mean + config.accuracy_spread,
            size=config.n_sources,
        )
        features = np.zeros((config.n_sources, 0))
        return acc, features, None, ()
    w = np.asarray(config.true_weights, dtype=float)
    features = (
        rng.random((config.n_sources, w.size)) < config.feature_density
    ).astype(float)
    acc = _logistic(features @ w)
    names = tuple(f"f{k}" for k in range(w.size))
    return acc, features, w, names


def generate(config: SimConfig) -> SimResult:
    """Draw a full synthetic instance; identical seeds give identical output.

    True values are uniform over the domain; a source reports the truth with
    its accuracy, otherwise a uniform wrong value. Density mode re-rolls any
    object left with zero observations; pair mode picks exactly two sources
    per object.
    """
    rng = np.random.default_rng(config.seed)
    n_s, n_o, d = config.n_sources, config.n_objects, config.domain_size
    accuracies, features, true_w, feature_names = _draw_accuracies(config, rng)
    truth_idx = rng.integers(d, size=n_o)

    triples: list[tuple[int, int, str]] = []
    for o in range(n_o):
        if config.pair_sampling:
            observers = rng.choice(n_s, size=2, replace=False)
        else:
            observers = np.flatnonzero(rng.random(n_s) < config.density)
            while observers.size == 0:
                observers = np.flatnonzero(rng.random(n_s) < config.density)
        for s in observers:
            if rng.random() < accuracies[s]:
                v = int(truth_idx[o])
            else:
                v = int(rng.integers(d - 1))
                if v >= truth_idx[o]:
                    v += 1
            triples.append((o, int(s), f"v{v}"))

    instance = FusionInstance.from_triples(
        sources=[f"s{i}" for i in range(n_s)],
        objects=[f"o{i}" for i in range(n_o)],
        triples=triples,
        features=features,
        feature_names=feature_names,
    )
    truth = GroundTruth({o: f"v{int(truth_idx[o])}" for o in range(n_o)})
    return SimResult(
        instance=instance,
        truth=truth,
        true_accuracies=accuracies,
        true_weights=true_w,
    )


def add_clone(
    result: SimResult, source: int, noise: float, seed: int = 0
) -> SimResult:
    """Append a copy of ``source`` that re-rolls each value with prob ``noise``.

    The clone observes exactly the objects its template observes; with
    probability 1 - noise it repeats the template's value, otherwise it picks
    a uniform different value from that object's synthetic domain.
    """
    if not (0.0 <= noise <= 1.0):
        raise ValueError("noise must be in [0, 1]")
    inst = result.instance
    if not (0 <= source < inst.n_sources):
        raise ValueError(f"source index {source} out of range")
    rng = np.random.default_rng(seed)
    clone_idx = inst.n_sources
    triples = inst.triples()
    domain_size = max(inst.cand_counts.max(), 2)
    for o, s, value in list(triples):
        if s != source:
            continue
        if rng.random() < noise:
            v = int(value[1:])
            alt = int(rng.integers(domain_size - 1))
            if alt >= v:
                alt += 1
            value = f"v{alt}"
        triples.append((o, clone_idx, value))
    features = inst.features
    if features.shape[1]:
        features = np.vstack([features, features[source]])
    else:
        features = np.zeros((clone_idx + 1, 0))
    new_inst = FusionInstance.from_triples(
        sources=list(inst.sources) + [f"s{clone_idx}"],
        objects=inst.objects,
        triples=triples,
        features=features,
        feature_names=inst.feature_names,
    )
    acc = np.append(result.true_accuracies, result.true_accuracies[source])
    return SimResult(
        instance=new_inst,
        truth=result.truth,
        true_accuracies=acc,
        true_weights=result.true_weights,
    )
