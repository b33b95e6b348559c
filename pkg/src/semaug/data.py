"""Synthetic multi-class datasets with a controllable difficulty knob,
plus the dataset and embedding CSV formats.

Class centers are drawn uniformly on the unit sphere; a configurable
fraction of center pairs is then re-placed at a small angular separation
(5 to 15 degrees), which makes those classes genuinely confusable.
Samples are the center plus Gaussian noise with one boosted variation
direction per class.  For hard-pair members that direction points
(noisily) at the partner center, so their scatter is elongated exactly
along the axis that confuses the pair; a per-class covariance model can
exploit that structure, an isotropic margin cannot.  Inputs are left
un-normalized; normalization happens inside the embedding network.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .rng import philox_rng


@dataclass
class SynthSpec:
    num_classes: int = 20
    dim: int = 20
    samples_per_class: int = 40
    sigma: float = 0.35
    anisotropy: float = 0.5
    hard_pair_fraction: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValueError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.dim < 2:
            raise ValueError(f"dim must be >= 2, got {self.dim}")
        if self.samples_per_class < 2:
            raise ValueError(f"samples_per_class must be >= 2, got {self.samples_per_class}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not 0.0 <= self.anisotropy < 1.0:
            raise ValueError(f"anisotropy must be in [0, 1), got {self.anisotropy}")
        if not 0.0 <= self.hard_pair_fraction <= 1.0:
            raise ValueError(f"hard_pair_fraction must be in [0, 1], got {self.hard_pair_fraction}")
        if self.seed < 0:
            raise ValueError(f"seed must be >= 0, got {self.seed}")


TRAIN, EVAL = "train", "eval"


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    split: np.ndarray

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        self.split = np.asarray(self.split)
        n = self.features.shape[0]
        if self.labels.shape != (n,) or self.split.shape != (n,):
            raise ValueError("features, labels and split must have equal length")
        bad = set(np.unique(self.split)) - {TRAIN, EVAL}
        if bad:
            raise ValueError(f"unknown split tags {sorted(bad)}")

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) + 1

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def indices(self, split: str) -> np.ndarray:
        return np.nonzero(self.split == split)[0]


def generate(spec: SynthSpec) -> Dataset:
    """Deterministic synthetic dataset: equal SynthSpec, equal bytes.

    The eval split takes the last round(0.2 * samples_per_class) samples
    of each class (clamped so both splits stay nonempty), which keeps the
    eval fraction within one sample of 20% per class.
    """
    rng = philox_rng(spec.seed, 0)
    C, d, n = spec.num_classes, spec.dim, spec.samples_per_class

    centers = rng.standard_normal((C, d))
    centers /= np.linalg.norm(centers, axis=1)[:, None]

    num_hard = round(spec.hard_pair_fraction * (C // 2))
    partner = {}
    for i in range(num_hard):
        a, b = 2 * i, 2 * i + 1
        u = centers[a]
        r = rng.standard_normal(d)
        r -= (r @ u) * u
        r /= np.linalg.norm(r)
        angle = rng.uniform(math.radians(5.0), math.radians(15.0))
        centers[b] = math.cos(angle) * u + math.sin(angle) * r
        partner[a], partner[b] = b, a

    # One boosted scatter direction per class; hard-pair members aim it
    # at their partner (with jitter) so the confusable axis carries the
    # extra variance.
    boost = 3.0 * spec.anisotropy
    dirs = np.zeros((C, d))
    for c in range(C):
        if c in partner:
            u = centers[partner[c]] - centers[c]
            u = u / np.linalg.norm(u) + 0.3 * rng.standard_normal(d)
        else:
            u = rng.standard_normal(d)
        dirs[c] = u / np.linalg.norm(u)

    eval_n = min(max(int(round(0.2 * n)), 1), n - 1)
    feats = np.empty((C * n, d))
    labels = np.empty(C * n, dtype=int)
    split = np.empty(C * n, dtype=object)
    for c in range(C):
        z = rng.standard_normal((n, d))
        g = rng.standard_normal((n, 1))
        noise = spec.sigma * (z + boost * g * dirs[c])
        feats[c * n:(c + 1) * n] = centers[c] + noise
        labels[c * n:(c + 1) * n] = c
        split[c * n:(c + 1) * n - eval_n] = TRAIN
        split[(c + 1) * n - eval_n:(c + 1) * n] = EVAL
    return Dataset(features=feats, labels=labels, split=np.array(split, dtype=str))


def write_dataset(dataset: Dataset, path) -> None:
    d = dataset.dim
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["label"] + [f"x{i}" for i in range(d)] + ["split"])
        for label, row, tag in zip(dataset.labels, dataset.features, dataset.split):
            w.writerow([int(label)] + [format(v, ".17g") for v in row] + [tag])


def read_dataset(path) -> Dataset:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = rows[0]
    if len(header) < 3 or header[0] != "label" or header[-1] != "split":
        raise ValueError(f"{path}: line 1: expected header 'label,x0,...,split'")
    d = len(header) - 2
    if header[1:-1] != [f"x{i}" for i in range(d)]:
        raise ValueError(f"{path}: line 1: malformed feature columns")
    labels, feats, split = [], [], []
    for ln, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != d + 2:
            raise ValueError(f"{path}: line {ln}: expected {d + 2} fields, got {len(row)}")
        try:
            labels.append(int(row[0]))
            feats.append([float(v) for v in row[1:-1]])
        except ValueError as exc:
            raise ValueError(f"{path}: line {ln}: {exc}") from None
        if row[-1] not in (TRAIN, EVAL):
            raise ValueError(f"{path}: line {ln}: unknown split tag {row[-1]!r}")
        split.append(row[-1])
    if not labels:
        raise ValueError(f"{path}: no data rows")
    return Dataset(features=np.array(feats), labels=np.array(labels), split=np.array(split))


def write_embeddings(path, indices, vectors) -> None:
    """Embedding CSV: header 'index,e0,...,e{F-1}', one row per vector."""
    V = np.asarray(vectors, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index"] + [f"e{i}" for i in range(V.shape[1])])
        for idx, row in zip(indices, V):
            w.writerow([int(idx)] + [format(v, ".17g") for v in row])


def read_embeddings(path) -> dict[int, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = rows[0]
    if len(header) < 2 or header[0] != "index":
        raise ValueError(f"{path}: line 1: expected header 'index,e0,...'")
    dim = len(header) - 1
    out: dict[int, np.ndarray] = {}
    for ln, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != dim + 1:
            raise ValueError(f"{path}: line {ln}: expected {dim + 1} fields, got {len(row)}")
        try:
            out[int(row[0])] = np.array([float(v) for v in row[1:]])
        except ValueError as exc:
            raise ValueError(f"{path}: line {ln}: {exc}") from None
    if not out:
        raise ValueError(f"{path}: no data rows")
    return out
