"""Immutable fusion-instance and ground-truth containers.

A fusion instance bundles the sources, the objects, the conflicting
observations, the per-object candidate domains, and an optional per-source
feature matrix. Everything is frozen after construction; downstream code
treats instances as values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = ["FusionInstance", "GroundTruth", "InstanceError"]


class InstanceError(ValueError):
    """Raised when an instance or ground truth violates a structural rule."""


@dataclass(frozen=True)
class FusionInstance:
    """Sources, objects, observations and candidate domains, index-based.

    Observations are stored column-wise: ``obs_object[i]``, ``obs_source[i]``
    and ``obs_value_idx[i]`` describe the i-th observation, where the value
    index points into ``domains[obs_object[i]]``. Candidate domains list the
    distinct values observed per object, in first-appearance order.
    """

    sources: tuple[str, ...]
    objects: tuple[str, ...]
    obs_object: np.ndarray
    obs_source: np.ndarray
    obs_value_idx: np.ndarray
    domains: tuple[tuple[str, ...], ...]
    features: np.ndarray
    feature_names: tuple[str, ...] = ()
    # Registered copying pairs (i < j); empty unless add_copying_features ran.
    pairs: tuple[tuple[int, int], ...] = ()

    @classmethod
    def from_triples(
        cls,
        sources: Sequence[str],
        objects: Sequence[str],
        triples: Iterable[tuple[int, int, str]],
        features: np.ndarray | None = None,
        feature_names: Sequence[str] = (),
    ) -> "FusionInstance":
        """Build an instance from (object index, source index, value) triples.

        Rejects duplicate (object, source) pairs, out-of-range indices,
        objects with zero observations, and non-finite feature values.
        """
        sources = tuple(sources)
        objects = tuple(objects)
        n_s, n_o = len(sources), len(objects)
        domains: list[list[str]] = [[] for _ in range(n_o)]
        value_pos: list[dict[str, int]] = [{} for _ in range(n_o)]
        seen: set[tuple[int, int]] = set()
        obs_o: list[int] = []
        obs_s: list[int] = []
        obs_v: list[int] = []
        for o, s, value in triples:
            if not (0 <= o < n_o):
                raise InstanceError(f"object index {o} out of range")
            if not (0 <= s < n_s):
                raise InstanceError(f"source index {s} out of range")
            if (o, s) in seen:
                raise InstanceError(
                    f"duplicate observation for object {objects[o]!r} "
                    f"and source {sources[s]!r}"
                )
            seen.add((o, s))
            pos = value_pos[o].get(value)
            if pos is None:
                pos = len(domains[o])
                value_pos[o][value] = pos
                domains[o].append(value)
            obs_o.append(o)
            obs_s.append(s)
            obs_v.append(pos)
        for o, dom in enumerate(domains):
            if not dom:
                raise InstanceError(f"object {objects[o]!r} has no observations")
        if features is None:
            features = np.zeros((n_s, len(feature_names)), dtype=float)
        features = np.asarray(features, dtype=float)
        if features.shape != (n_s, len(feature_names)):
            raise InstanceError(
                f"feature matrix shape {features.shape} does not match "
                f"{n_s} sources x {len(feature_names)} features"
            )
        if features.size and not np.all(np.isfinite(features)):
            raise InstanceError("feature values must be finite")
        return cls(
            sources=sources,
            objects=objects,
            obs_object=np.asarray(obs_o, dtype=np.int64),
            obs_source=np.asarray(obs_s, dtype=np.int64),
            obs_value_idx=np.asarray(obs_v, dtype=np.int64),
            domains=tuple(tuple(d) for d in domains),
            features=features,
            feature_names=tuple(feature_names),
        )

    # -- basic shape accessors -------------------------------------------

    @property
    def n_sources(self) -> int:
        return len(self.sources)

    @property
    def n_objects(self) -> int:
        return len(self.objects)

    @property
    def n_observations(self) -> int:
        return int(self.obs_object.size)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    # -- derived index structures (cached, instances are immutable) ------

    @cached_property
    def cand_counts(self) -> np.ndarray:
        """Domain size |D_o| per object."""
        return np.array([len(d) for d in self.domains], dtype=np.int64)

    @cached_property
    def cand_offsets(self) -> np.ndarray:
        """Offsets of each object's candidate block in the flat layout."""
        off = np.zeros(self.n_objects + 1, dtype=np.int64)
        np.cumsum(self.cand_counts, out=off[1:])
        return off

    @property
    def n_candidates(self) -> int:
        return int(self.cand_offsets[-1])

    @cached_property
    def obs_cand(self) -> np.ndarray:
        """Flat candidate index of each observation's value."""
        return self.cand_offsets[self.obs_object] + self.obs_value_idx

    @cached_property
    def cand_object(self) -> np.ndarray:
        """Object index owning each flat candidate slot."""
        return np.repeat(np.arange(self.n_objects), self.cand_counts)

    @cached_property
    def obs_counts(self) -> np.ndarray:
        """Number of observing sources per object."""
        counts = np.zeros(self.n_objects, dtype=np.int64)
        np.add.at(counts, self.obs_object, 1)
        return counts

    @cached_property
    def _obs_by_object(self) -> tuple[np.ndarray, np.ndarray]:
        order = np.argsort(self.obs_object, kind="stable")
        bounds = np.zeros(self.n_objects + 1, dtype=np.int64)
        np.cumsum(self.obs_counts, out=bounds[1:])
        return order, bounds

    def observers_of(self, o: int) -> np.ndarray:
        """Indices into the observation arrays for object ``o``."""
        order, bounds = self._obs_by_object
        return order[bounds[o] : bounds[o + 1]]

    @cached_property
    def source_obs_counts(self) -> np.ndarray:
        counts = np.zeros(self.n_sources, dtype=np.int64)
        np.add.at(counts, self.obs_source, 1)
        return counts

    @cached_property
    def pair_events(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Copying-feature firings: (object, agreed candidate, pair id).

        One event per registered pair and object where both sources observe
        the object and report the same value.
        """
        if not self.pairs:
            empty = np.zeros(0, dtype=np.int64)
            return empty, empty.copy(), empty.copy()
        pair_id = {p: i for i, p in enumerate(self.pairs)}
        ev_obj: list[int] = []
        ev_cand: list[int] = []
        ev_pair: list[int] = []
        for o in range(self.n_objects):
            rows = self.observers_of(o)
            if rows.size < 2:
                continue
            srcs = self.obs_source[rows]
            vals = self.obs_value_idx[rows]
            order = np.argsort(srcs)
            srcs, vals = srcs[order], vals[order]
            for a in range(srcs.size):
                for b in range(a + 1, srcs.size):
                    pid = pair_id.get((int(srcs[a]), int(srcs[b])))
                    if pid is not None and vals[a] == vals[b]:
                        ev_obj.append(o)
                        ev_cand.append(int(self.cand_offsets[o] + vals[a]))
                        ev_pair.append(pid)
        return (
            np.asarray(ev_obj, dtype=np.int64),
            np.asarray(ev_cand, dtype=np.int64),
            np.asarray(ev_pair, dtype=np.int64),
        )

    def with_pairs(self, pairs: Sequence[tuple[int, int]]) -> "FusionInstance":
        """Copy of this instance with the given copying pairs registered."""
        norm = tuple(sorted((min(i, j), max(i, j)) for i, j in pairs))
        if len(set(norm)) != len(norm):
            raise InstanceError("duplicate copying pair")
        for i, j in norm:
            if i == j or not (0 <= i < self.n_sources and 0 <= j < self.n_sources):
                raise InstanceError(f"invalid copying pair ({i}, {j})")
        return FusionInstance(
            sources=self.sources,
            objects=self.objects,
            obs_object=self.obs_object,
            obs_source=self.obs_source,
            obs_value_idx=self.obs_value_idx,
            domains=self.domains,
            features=self.features,
            feature_names=self.feature_names,
            pairs=norm,
        )

    def triples(self) -> list[tuple[int, int, str]]:
        """Observations as (object index, source index, value) triples."""
        return [
            (int(o), int(s), self.domains[o][v])
            for o, s, v in zip(self.obs_object, self.obs_source, self.obs_value_idx)
        ]

    def __eq__(self, other: object) -> bool:
        """Semantic equality: everything is compared keyed by name, so two
        instances that index the same observations in a different internal
        order still compare equal."""
        if not isinstance(other, FusionInstance):
            return NotImplemented
        if (
            sorted(self.sources) != sorted(other.sources)
            or sorted(self.objects) != sorted(other.objects)
            or self.feature_names != other.feature_names
        ):
            return False

        def named_triples(inst: FusionInstance) -> set[tuple[str, str, str]]:
            return {
                (inst.objects[o], inst.sources[s], v)
                for o, s, v in inst.triples()
            }

        def named_pairs(inst: FusionInstance) -> set[frozenset[str]]:
            return {
                frozenset((inst.sources[i], inst.sources[j]))
                for i, j in inst.pairs
            }

        if named_triples(self) != named_triples(other):
            return False
        if named_pairs(self) != named_pairs(other):
            return False
        other_row = {name: i for i, name in enumerate(other.sources)}
        return all(
            np.array_equal(self.features[i], other.features[other_row[name]])
            for i, name in enumerate(self.sources)
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class GroundTruth:
    """Known true values for a subset of objects, keyed by object index."""

    labels: Mapping[int, str] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.labels)

    def validate(self, instance: FusionInstance) -> None:
        """Check labels name valid objects and values inside their domain."""
        for o, value in self.labels.items():
            if not (0 <= o < instance.n_objects):
                raise InstanceError(f"ground-truth object index {o} out of range")
            if value not in instance.domains[o]:
                raise InstanceError(
                    f"ground-truth value {value!r} for object "
                    f"{instance.objects[o]!r} was not reported by any source"
                )

    def restricted_to_domains(self, instance: FusionInstance) -> "GroundTruth":
        """Drop labels whose value no source reported (closed-world rule)."""
        kept = {
            o: v
            for o, v in self.labels.items()
            if 0 <= o < instance.n_objects and v in instance.domains[o]
        }
        return GroundTruth(kept)
