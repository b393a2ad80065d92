"""Training-matrix assembly: join profiles, device features, and labels.

One labeled sample per (workload, device) run: the feature vector is the
8 instruction-class counts concatenated with the 6 device features, the
targets are measured watts and instructions/s.  Assembly shuffles with a
user-visible seed, takes floor(0.7 n) rows for training and the rest for
validation, and computes z-score statistics on the training split only.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .device_catalog import DEVICE_FEATURE_NAMES, DeviceSpec, device_to_features
from .errors import WattrankError
from .instruction_profiler import (
    InstructionProfile,
    class_feature_names,
    profile_to_features,
)
from .telemetry_ingest import RunRecord


class TooFewSamples(WattrankError):
    def __init__(self, n: int):
        super().__init__(f"need at least 3 samples to split, got {n}")
        self.n = n


class InconsistentFeatureLength(WattrankError):
    pass


def feature_names() -> list[str]:
    """The 14 canonical feature names, in dataset column order."""
    return class_feature_names() + DEVICE_FEATURE_NAMES


@dataclass(frozen=True)
class LabeledSample:
    workload_id: str
    device_name: str
    features: np.ndarray
    power_w: float
    perf_ips: float


def make_sample(
    profile: InstructionProfile, device: DeviceSpec, record: RunRecord
) -> LabeledSample:
    """Build one training row; raw class counts + device features."""
    features = np.concatenate(
        [profile_to_features(profile, "raw"), device_to_features(device)]
    )
    return LabeledSample(
        workload_id=record.workload_id,
        device_name=record.device_name,
        features=features,
        power_w=record.mean_power_w,
        perf_ips=record.perf_ips,
    )


def sample_to_json(sample: LabeledSample) -> str:
    return json.dumps(
        {
            "workload_id": sample.workload_id,
            "device_name": sample.device_name,
            "feature_names": feature_names(),
            "features": [float(x) for x in sample.features],
            "power_w": sample.power_w,
            "perf_ips": sample.perf_ips,
        },
        indent=2,
    )


def sample_from_json(text: str) -> LabeledSample:
    try:
        doc = json.loads(text)
        names = doc.get("feature_names")
        if names is not None and list(names) != feature_names():
            raise InconsistentFeatureLength(
                f"sample feature ordering {names} does not match the contract"
            )
        return LabeledSample(
            workload_id=str(doc["workload_id"]),
            device_name=str(doc["device_name"]),
            features=np.asarray(doc["features"], dtype=float),
            power_w=float(doc["power_w"]),
            perf_ips=float(doc["perf_ips"]),
        )
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise InconsistentFeatureLength(f"bad sample JSON: {exc}") from exc


@dataclass(frozen=True)
class NormStats:
    """Z-score statistics; std entries of exactly 0 flag constant columns."""

    feature_means: np.ndarray
    feature_stds: np.ndarray
    target_means: np.ndarray
    target_stds: np.ndarray

    def standardize_features(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        out = np.zeros_like(v)
        np.divide(v - self.feature_means, self.feature_stds,
                  out=out, where=self.feature_stds > 0)
        return out

    def standardize_targets(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        out = np.zeros_like(y)
        np.divide(y - self.target_means, self.target_stds,
                  out=out, where=self.target_stds > 0)
        return out

    def destandardize_targets(self, y: np.ndarray) -> np.ndarray:
        return np.asarray(y, dtype=float) * self.target_stds + self.target_means

    def to_dict(self) -> dict:
        return {
            "feature_means": self.feature_means.tolist(),
            "feature_stds": self.feature_stds.tolist(),
            "target_means": self.target_means.tolist(),
            "target_stds": self.target_stds.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "NormStats":
        return cls(
            feature_means=np.asarray(doc["feature_means"], dtype=float),
            feature_stds=np.asarray(doc["feature_stds"], dtype=float),
            target_means=np.asarray(doc["target_means"], dtype=float),
            target_stds=np.asarray(doc["target_stds"], dtype=float),
        )


@dataclass(frozen=True)
class TrainingDataset:
    samples: list[LabeledSample]
    train_indices: list[int]
    val_indices: list[int]
    feature_means: np.ndarray
    feature_stds: np.ndarray
    target_means: np.ndarray
    target_stds: np.ndarray
    seed: int

    def norm_stats(self) -> NormStats:
        return NormStats(
            feature_means=self.feature_means,
            feature_stds=self.feature_stds,
            target_means=self.target_means,
            target_stds=self.target_stds,
        )

    def feature_matrix(self, indices=None) -> np.ndarray:
        rows = self.samples if indices is None else [self.samples[i] for i in indices]
        return np.stack([s.features for s in rows])

    def target_matrix(self, indices=None) -> np.ndarray:
        rows = self.samples if indices is None else [self.samples[i] for i in indices]
        return np.array([[s.power_w, s.perf_ips] for s in rows], dtype=float)


def _split_indices(
    n: int, seed: int, groups: list[str] | None
) -> tuple[list[int], list[int]]:
    rng = np.random.default_rng(seed)
    n_train = (7 * n) // 10
    if groups is None:
        perm = rng.permutation(n)
        return [int(i) for i in perm[:n_train]], [int(i) for i in perm[n_train:]]
    # Grouped mode keeps all rows of one workload on the same side, so the
    # 70/30 law only holds approximately.
    unique = sorted(set(groups))
    order = rng.permutation(len(unique))
    train: list[int] = []
    val: list[int] = []
    for position in order:
        members = [i for i, g in enumerate(groups) if g == unique[position]]
        if len(train) < n_train:
            train.extend(members)
        else:
            val.extend(members)
    return train, val


def assemble(
    samples: list[LabeledSample], seed: int = 42, group_by_workload: bool = False
) -> TrainingDataset:
    """Deterministic shuffle-and-split plus train-side normalization stats.

    Raises :class:`TooFewSamples` below n=3 and
    :class:`InconsistentFeatureLength` if rows disagree on feature count.
    """
    n = len(samples)
    if n < 3:
        raise TooFewSamples(n)
    width = samples[0].features.shape[0]
    for sample in samples:
        if sample.features.shape != (width,):
            raise InconsistentFeatureLength(
                f"expected {width} features, {sample.workload_id}/{sample.device_name} "
                f"has {sample.features.shape}"
            )

    groups = [s.workload_id for s in samples] if group_by_workload else None
    train_idx, val_idx = _split_indices(n, seed, groups)

    X = np.stack([samples[i].features for i in train_idx])
    Y = np.array([[samples[i].power_w, samples[i].perf_ips] for i in train_idx])
    return TrainingDataset(
        samples=list(samples),
        train_indices=train_idx,
        val_indices=val_idx,
        feature_means=X.mean(axis=0),
        feature_stds=X.std(axis=0),
        target_means=Y.mean(axis=0),
        target_stds=Y.std(axis=0),
        seed=seed,
    )


def standardize(ds: TrainingDataset, v: np.ndarray) -> np.ndarray:
    """Z-score a feature vector (or row matrix); constant columns map to 0."""
    return ds.norm_stats().standardize_features(v)


def unstandardize(ds: TrainingDataset, v: np.ndarray) -> np.ndarray:
    """Inverse of :func:`standardize` for non-constant columns; constant
    columns recover their (train) mean."""
    return np.asarray(v, dtype=float) * ds.feature_stds + ds.feature_means


_TARGET_COLUMN = {"power": 0, "perf": 1}


def feature_importance(
    ds: TrainingDataset, target: str = "power"
) -> list[tuple[str, float]]:
    """Pearson correlation of each feature with the target on the train split.

    Returns (name, score) pairs sorted by |score| descending; constant
    columns (or a constant target) score 0.
    """
    if target not in _TARGET_COLUMN:
        raise ValueError(f"target must be 'power' or 'perf', got {target!r}")
    X = ds.feature_matrix(ds.train_indices)
    y = ds.target_matrix(ds.train_indices)[:, _TARGET_COLUMN[target]]
    names = feature_names() if X.shape[1] == len(feature_names()) else [
        f"f{i}" for i in range(X.shape[1])
    ]

    xc = X - X.mean(axis=0)
    yc = y - y.mean()
    x_ss = (xc**2).sum(axis=0)
    y_ss = (yc**2).sum()
    scores = np.zeros(X.shape[1])
    if y_ss > 0:
        valid = x_ss > 0
        scores[valid] = (xc[:, valid] * yc[:, None]).sum(axis=0) / np.sqrt(
            x_ss[valid] * y_ss
        )
    ranked = sorted(
        zip(names, scores.tolist()), key=lambda pair: abs(pair[1]), reverse=True
    )
    return [(name, float(score)) for name, score in ranked]


def select_features(
    importance: list[tuple[str, float]], threshold: float
) -> list[bool]:
    """Boolean mask over :func:`feature_names` order keeping features with
    |score| >= threshold; the top-scored feature is always kept."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must be in [0, 1], got {threshold}")
    order = feature_names() if len(importance) == len(feature_names()) and all(
        name in feature_names() for name, _ in importance
    ) else [name for name, _ in importance]
    position = {name: i for i, name in enumerate(order)}
    mask = [False] * len(order)
    for name, score in importance:
        if abs(score) >= threshold:
            mask[position[name]] = True
    if not any(mask) and importance:
        top = max(importance, key=lambda pair: abs(pair[1]))
        mask[position[top[0]]] = True
    return mask


def save_dataset(ds: TrainingDataset, prefix) -> tuple[Path, Path]:
    """Write ``<prefix>.csv`` (samples) and ``<prefix>.json`` (split+stats)."""
    prefix = Path(prefix)
    csv_path = prefix.with_suffix(".csv")
    json_path = prefix.with_suffix(".json")
    names = (
        feature_names()
        if ds.samples[0].features.shape[0] == len(feature_names())
        else [f"f{i}" for i in range(ds.samples[0].features.shape[0])]
    )
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["workload_id", "device_name", *names, "power_w", "perf_ips"])
        for s in ds.samples:
            writer.writerow(
                [s.workload_id, s.device_name]
                + [repr(float(x)) for x in s.features]
                + [repr(float(s.power_w)), repr(float(s.perf_ips))]
            )
    sidecar = {
        "seed": ds.seed,
        "train_indices": list(ds.train_indices),
        "val_indices": list(ds.val_indices),
        "norm_stats": ds.norm_stats().to_dict(),
        "feature_names": names,
    }
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2)
        fh.write("\n")
    return csv_path, json_path


def load_dataset(prefix) -> TrainingDataset:
    """Inverse of :func:`save_dataset`; restores stats without recomputing."""
    prefix = Path(prefix)
    with open(prefix.with_suffix(".csv"), newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:2] != ["workload_id", "device_name"] or header[-2:] != [
            "power_w",
            "perf_ips",
        ]:
            raise InconsistentFeatureLength(f"unexpected dataset header {header!r}")
        width = len(header) - 4
        samples = []
        for row in reader:
            if not row:
                continue
            samples.append(
                LabeledSample(
                    workload_id=row[0],
                    device_name=row[1],
                    features=np.array([float(x) for x in row[2 : 2 + width]]),
                    power_w=float(row[-2]),
                    perf_ips=float(row[-1]),
                )
            )
    with open(prefix.with_suffix(".json"), encoding="utf-8") as fh:
        sidecar = json.load(fh)
    norm = NormStats.from_dict(sidecar["norm_stats"])
    return TrainingDataset(
        samples=samples,
        train_indices=[int(i) for i in sidecar["train_indices"]],
        val_indices=[int(i) for i in sidecar["val_indices"]],
        feature_means=norm.feature_means,
        feature_stds=norm.feature_stds,
        target_means=norm.target_means,
        target_stds=norm.target_stds,
        seed=int(sidecar["seed"]),
    )
