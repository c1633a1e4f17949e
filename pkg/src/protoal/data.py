"""Dataset ingestion, serialization, splitting, and synthetic pools.

Two interchangeable on-disk formats are supported, documented field by field:

JSONL — one JSON object per line:
    {"id": int, "features": [float, ...], "label": int?, "payload": str?}
  * id        required, unique within the file
  * features  required, equal length on every line, all entries finite
  * label     optional non-negative class index
  * payload   optional display text (what a human annotator sees)

CSV — header ``id,label,f0,...,f{D-1}``; the label cell is empty for
unlabeled samples. CSV carries no payload column.

Floats are serialized with Python repr, so load -> save -> load is an
identity on every field.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DuplicateId, ParseError, SchemaError


@dataclass
class Sample:
    id: int
    features: np.ndarray
    label: int | None = None
    payload: str | None = None


@dataclass
class LabelVocab:
    """Class names, index-aligned with label integers."""

    names: list

    def index(self, name: str) -> int:
        return self.names.index(name)

    def __len__(self) -> int:
        return len(self.names)


@dataclass
class Dataset:
    samples: list
    vocab: LabelVocab
    d_in: int
    _index: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self._index:
            self._index = {s.id: i for i, s in enumerate(self.samples)}

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def num_classes(self) -> int:
        return len(self.vocab)

    @property
    def ids(self) -> list:
        return [s.id for s in self.samples]

    def by_id(self, sample_id: int) -> Sample:
        return self.samples[self._index[sample_id]]

    def feature_matrix(self, ids=None) -> np.ndarray:
        if ids is None:
            rows = self.samples
        else:
            rows = [self.by_id(i) for i in ids]
        return np.array([s.features for s in rows], dtype=np.float64)

    def labels(self, ids=None) -> np.ndarray:
        """Ground-truth labels as an int array; missing labels become -1."""
        if ids is None:
            rows = self.samples
        else:
            rows = [self.by_id(i) for i in ids]
        return np.array(
            [s.label if s.label is not None else -1 for s in rows], dtype=np.int64
        )

    def subset(self, ids) -> "Dataset":
        return Dataset(
            samples=[self.by_id(i) for i in ids], vocab=self.vocab, d_in=self.d_in
        )


def _default_vocab(max_label: int) -> LabelVocab:
    return LabelVocab(names=[f"class_{i}" for i in range(max_label + 1)])


def _build_dataset(samples: list, source: str) -> Dataset:
    if not samples:
        raise SchemaError(f"{source}: dataset is empty")
    d_in = samples[0].features.shape[0]
    seen = set()
    max_label = -1
    for s in samples:
        if s.id in seen:
            raise DuplicateId(f"{source}: duplicate id {s.id}")
        seen.add(s.id)
        if s.features.shape[0] != d_in:
            raise SchemaError(
                f"{source}: ragged feature lengths ({s.features.shape[0]} vs {d_in})"
            )
        if not np.all(np.isfinite(s.features)):
            raise SchemaError(f"{source}: non-finite feature in sample {s.id}")
        if s.label is not None:
            max_label = max(max_label, s.label)
    return Dataset(samples=samples, vocab=_default_vocab(max_label), d_in=d_in)


def load_jsonl(path) -> Dataset:
    path = Path(path)
    samples = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: {exc.msg}") from exc
            samples.append(_sample_from_obj(obj, f"{path}:{lineno}"))
    return _build_dataset(samples, str(path))


def _sample_from_obj(obj, where: str) -> Sample:
    if not isinstance(obj, dict):
        raise SchemaError(f"{where}: expected a JSON object")
    if "id" not in obj or "features" not in obj:
        raise SchemaError(f"{where}: missing required field 'id' or 'features'")
    if not isinstance(obj["id"], int) or isinstance(obj["id"], bool):
        raise SchemaError(f"{where}: id must be an integer")
    feats = obj["features"]
    if not isinstance(feats, list) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in feats
    ):
        raise SchemaError(f"{where}: features must be a list of numbers")
    label = obj.get("label")
    if label is not None and (not isinstance(label, int) or isinstance(label, bool) or label < 0):
        raise SchemaError(f"{where}: label must be a non-negative integer")
    payload = obj.get("payload")
    if payload is not None and not isinstance(payload, str):
        raise SchemaError(f"{where}: payload must be a string")
    return Sample(
        id=obj["id"],
        features=np.asarray(feats, dtype=np.float64),
        label=label,
        payload=payload,
    )


def save_jsonl(dataset: Dataset, path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for s in dataset.samples:
            obj = {"id": s.id, "features": [float(v) for v in s.features]}
            if s.label is not None:
                obj["label"] = s.label
            if s.payload is not None:
                obj["payload"] = s.payload
            fh.write(json.dumps(obj) + "\n")


def load_csv(path) -> Dataset:
    path = Path(path)
    samples = []
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        d = len(header) - 2
        if d < 1 or header[:2] != ["id", "label"] or header[2:] != [f"f{i}" for i in range(d)]:
            raise SchemaError(f"{path}: header must be id,label,f0..f{{D-1}}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
            try:
                sid = int(row[0])
                label = int(row[1]) if row[1] != "" else None
                feats = np.array([float(v) for v in row[2:]], dtype=np.float64)
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
            if label is not None and label < 0:
                raise SchemaError(f"{path}:{lineno}: label must be non-negative")
            samples.append(Sample(id=sid, features=feats, label=label))
    return _build_dataset(samples, str(path))


def save_csv(dataset: Dataset, path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "label"] + [f"f{i}" for i in range(dataset.d_in)])
        for s in dataset.samples:
            label = "" if s.label is None else s.label
            writer.writerow([s.id, label] + [repr(float(v)) for v in s.features])


def split(dataset: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded shuffle-then-cut into (train, test); disjoint and exhaustive.

    Each side keeps the parent's sample order (and vocabulary), so splits are
    stable bookkeeping for the pool.
    """
    if not 0.0 < test_fraction < 1.0:
        raise SchemaError(f"test_fraction must be in (0, 1), got {test_fraction}")
    n = len(dataset)
    n_test = int(round(n * test_fraction))
    n_test = min(max(n_test, 1), n - 1)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed)]))
    perm = rng.permutation(n)
    test_idx = np.sort(perm[:n_test])
    train_idx = np.sort(perm[n_test:])
    train = Dataset(
        samples=[dataset.samples[i] for i in train_idx],
        vocab=dataset.vocab,
        d_in=dataset.d_in,
    )
    test = Dataset(
        samples=[dataset.samples[i] for i in test_idx],
        vocab=dataset.vocab,
        d_in=dataset.d_in,
    )
    return train, test


@dataclass
class SynthConfig:
    """Gaussian blob generator settings.

    ``overlap`` in [0, 1] scales every class center toward the origin by
    (1 - overlap), so pairwise center distances shrink linearly as overlap
    rises; ``center_spread`` is the sigma of the center draw and
    ``noise_sigma`` the within-class sigma.
    """

    num_classes: int
    points_per_class: int
    d_in: int
    center_spread: float = 1.0
    noise_sigma: float = 0.35
    overlap: float = 0.5
    seed: int = 0

    def validate(self) -> "SynthConfig":
        if self.num_classes < 1 or self.points_per_class < 1 or self.d_in < 1:
            raise SchemaError("num_classes, points_per_class and d_in must be >= 1")
        if self.center_spread <= 0 or self.noise_sigma <= 0:
            raise SchemaError("center_spread and noise_sigma must be positive")
        if not 0.0 <= self.overlap <= 1.0:
            raise SchemaError(f"overlap must be in [0, 1], got {self.overlap}")
        return self

    def to_dict(self) -> dict:
        return {
            "num_classes": self.num_classes,
            "points_per_class": self.points_per_class,
            "d_in": self.d_in,
            "center_spread": self.center_spread,
            "noise_sigma": self.noise_sigma,
            "overlap": self.overlap,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        try:
            cfg = cls(
                num_classes=int(d["num_classes"]),
                points_per_class=int(d["points_per_class"]),
                d_in=int(d["d_in"]),
                center_spread=float(d.get("center_spread", 1.0)),
                noise_sigma=float(d.get("noise_sigma", 0.35)),
                overlap=float(d.get("overlap", 0.5)),
                seed=int(d.get("seed", 0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad synthetic config: {exc}") from exc
        return cfg.validate()


# Shipped generator presets. "overlapping-blobs" is the benchmark pool the
# acceptance suite runs on: 6 classes x 500 points in 16 dims with the
# overlap knob at 0.5, split 80/20 into 2400 train / 600 test.
SYNTH_PRESETS = {
    "overlapping-blobs": SynthConfig(
        num_classes=6,
        points_per_class=500,
        d_in=16,
        center_spread=1.0,
        noise_sigma=0.8,
        overlap=0.5,
        seed=1,
    ),
}


def gen_blobs(cfg: SynthConfig) -> Dataset:
    """Gaussian clusters with a controllable overlap knob; labels = cluster.

    Centers are drawn once from N(0, center_spread^2 I) and scaled by
    (1 - overlap); the center draw does not depend on overlap, so sweeping
    overlap at a fixed seed moves the same geometry closer together.
    """
    cfg.validate()
    rng = np.random.default_rng(np.random.SeedSequence([int(cfg.seed)]))
    centers = rng.normal(0.0, cfg.center_spread, size=(cfg.num_classes, cfg.d_in))
    centers = centers * (1.0 - cfg.overlap)
    samples = []
    sid = 0
    for c in range(cfg.num_classes):
        noise = rng.normal(0.0, cfg.noise_sigma, size=(cfg.points_per_class, cfg.d_in))
        X = centers[c] + noise
        for row in X:
            head = ", ".join(f"{v:.3f}" for v in row[:4])
            samples.append(
                Sample(
                    id=sid,
                    features=row.copy(),
                    label=c,
                    payload=f"sample {sid}: [{head}{', ...' if cfg.d_in > 4 else ''}]",
                )
            )
            sid += 1
    return _build_dataset(samples, "gen_blobs")
