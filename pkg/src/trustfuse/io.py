"""CSV/JSON file formats: loading instances and writing reproducible output."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .instance import FusionInstance, GroundTruth, InstanceError
from .simulation import SimResult

__all__ = [
    "load_instance",
    "write_instance",
    "dump_json",
    "round_floats",
]


def _read_rows(path: Path, expected_min_cols: int) -> tuple[list[str], list[tuple[int, list[str]]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InstanceError(f"{path}: file is empty") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) < expected_min_cols:
                raise InstanceError(
                    f"{path}, line {lineno}: expected at least "
                    f"{expected_min_cols} columns, got {len(row)}"
                )
            rows.append((lineno, row))
    return [h.strip() for h in header], rows


def load_instance(
    observations_path: str | Path,
    features_path: str | Path | None = None,
    truth_path: str | Path | None = None,
) -> tuple[FusionInstance, GroundTruth | None]:
    """Load an instance (and ground truth, when given) from CSV files.

    Values are normalized by trimming surrounding whitespace only. Rule
    violations raise InstanceError naming the file, line, and rule.
    """
    obs_path = Path(observations_path)
    header, rows = _read_rows(obs_path, 3)
    if header[:3] != ["object_id", "source_id", "value"]:
        raise InstanceError(
            f"{obs_path}: header must be object_id,source_id,value"
        )
    sources: list[str] = []
    objects: list[str] = []
    source_idx: dict[str, int] = {}
    object_idx: dict[str, int] = {}
    seen: dict[tuple[int, int], int] = {}
    triples: list[tuple[int, int, str]] = []
    for lineno, row in rows:
        obj, src, value = (c.strip() for c in row[:3])
        if obj not in object_idx:
            object_idx[obj] = len(objects)
            objects.append(obj)
        if src not in source_idx:
            source_idx[src] = len(sources)
            sources.append(src)
        key = (object_idx[obj], source_idx[src])
        if key in seen:
            raise InstanceError(
                f"{obs_path}, line {lineno}: duplicate observation for object "
                f"{obj!r} and source {src!r} (first at line {seen[key]})"
            )
        seen[key] = lineno
        triples.append((object_idx[obj], source_idx[src], value))

    features = None
    feature_names: tuple[str, ...] = ()
    if features_path is not None:
        feat_path = Path(features_path)
        fheader, frows = _read_rows(feat_path, 1)
        if not fheader or fheader[0] != "source_id":
            raise InstanceError(f"{feat_path}: header must start with source_id")
        feature_names = tuple(fheader[1:])
        features = np.zeros((len(sources), len(feature_names)))
        for lineno, row in frows:
            src = row[0].strip()
            if src not in source_idx:
                continue  # features for sources without observations are ignored
            if len(row) != len(fheader):
                raise InstanceError(
                    f"{feat_path}, line {lineno}: expected "
                    f"{len(fheader)} columns, got {len(row)}"
                )
            for k, cell in enumerate(row[1:]):
                try:
                    features[source_idx[src], k] = float(cell)
                except ValueError:
                    raise InstanceError(
                        f"{feat_path}, line {lineno}: non-numeric feature "
                        f"value {cell.strip()!r} for {fheader[k + 1]!r}"
                    ) from None

    instance = FusionInstance.from_triples(
        sources, objects, triples, features, feature_names
    )

    truth = None
    if truth_path is not None:
        t_path = Path(truth_path)
        theader, trows = _read_rows(t_path, 2)
        if theader[:2] != ["object_id", "value"]:
            raise InstanceError(f"{t_path}: header must be object_id,value")
        labels: dict[int, str] = {}
        for lineno, row in trows:
            obj, value = row[0].strip(), row[1].strip()
            if obj not in object_idx:
                raise InstanceError(
                    f"{t_path}, line {lineno}: object {obj!r} has no observations"
                )
            o = object_idx[obj]
            if value not in instance.domains[o]:
                raise InstanceError(
                    f"{t_path}, line {lineno}: value {value!r} for object "
                    f"{obj!r} was not reported by any source"
                )
            if o in labels:
                raise InstanceError(
                    f"{t_path}, line {lineno}: duplicate label for object {obj!r}"
                )
            labels[o] = value
        truth = GroundTruth(labels)
    return instance, truth


def write_instance(result: SimResult, out_dir: str | Path) -> dict[str, Path]:
    """Write a simulated instance as observations/features/truth CSVs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    inst = result.instance
    paths: dict[str, Path] = {}

    obs_path = out / "observations.csv"
    with open(obs_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["object_id", "source_id", "value"])
        for o, s, value in inst.triples():
            writer.writerow([inst.objects[o], inst.sources[s], value])
    paths["observations"] = obs_path

    if inst.n_features:
        feat_path = out / "features.csv"
        with open(feat_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["source_id", *inst.feature_names])
            for s, name in enumerate(inst.sources):
                writer.writerow([name, *(f"{v:.12g}" for v in inst.features[s])])
        paths["features"] = feat_path

    truth_path = out / "truth.csv"
    with open(truth_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["object_id", "value"])
        # Labels whose value no source reported are unloadable under the
        # closed-world rule, so they are dropped on write.
        loadable = result.truth.restricted_to_domains(inst)
        for o in sorted(loadable.labels):
            writer.writerow([inst.objects[o], loadable.labels[o]])
    paths["truth"] = truth_path
    return paths


def round_floats(obj):
    """Recursively round floats to 12 significant digits for stable diffs."""
    if isinstance(obj, float):
        return float(f"{obj:.12g}")
    if isinstance(obj, dict):
        return {k: round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_floats(v) for v in obj]
    return obj


def dump_json(obj, path: str | Path) -> None:
    text = json.dumps(round_floats(obj), sort_keys=True, indent=2)
    Path(path).write_text(text + "\n", encoding="utf-8")
