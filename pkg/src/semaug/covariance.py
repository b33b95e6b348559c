"""Streaming per-class Gaussian statistics of embedding vectors.

Each class keeps a running mean and a population (divide-by-n) covariance,
updated one embedding at a time.  The covariance matrices drive two things:
the quadratic forms that appear in the closed-form augmented losses, and the
Cholesky factors used to draw explicitly augmented embeddings.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FULL = "full"
DIAGONAL = "diagonal"


class DegenerateCovarianceError(RuntimeError):
    """Covariance factorization failed even after diagonal jitter."""


@dataclass
class ClassStats:
    """Running statistics of one class.

    ``cov`` is the population covariance (single observation => zero matrix).
    In diagonal mode it is stored as an F-vector of per-coordinate variances.
    """

    class_id: int
    count: int
    mean: np.ndarray
    cov: np.ndarray

    @classmethod
    def empty(cls, class_id: int, dim: int, mode: str = FULL) -> "ClassStats":
        shape = (dim, dim) if mode == FULL else (dim,)
        return cls(class_id, 0, np.zeros(dim), np.zeros(shape))


class CovarianceBank:
    """Per-class streaming mean/covariance container.

    Updates are single-writer; reads are safe while no update is running.
    """

    def __init__(self, num_classes: int, dim: int, mode: str = FULL):
        if num_classes < 1:
            raise ValueError(f"num_classes must be >= 1, got {num_classes}")
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        if mode not in (FULL, DIAGONAL):
            raise ValueError(f"mode must be 'full' or 'diagonal', got {mode!r}")
        self.num_classes = num_classes
        self.dim = dim
        self.mode = mode
        self.stats = [ClassStats.empty(c, dim, mode) for c in range(num_classes)]

    def update(self, embedding: np.ndarray, label: int) -> None:
        """Fold one embedding into its class's running statistics.

        Mean and covariance follow the exact one-pass recurrence
        mu' = mu + d/n',  cov' = (n*cov + (n/n')*d d^T)/n'  with d = x - mu,
        which reproduces the two-pass population covariance at every step.
        """
        x = np.asarray(embedding, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"embedding has shape {x.shape}, expected ({self.dim},)")
        if not 0 <= label < self.num_classes:
            raise ValueError(f"label {label} out of range [0, {self.num_classes})")
        st = self.stats[label]
        n = st.count
        n1 = n + 1
        delta = x - st.mean
        st.mean = st.mean + delta / n1
        if self.mode == FULL:
            st.cov = (n * st.cov + (n / n1) * np.outer(delta, delta)) / n1
        else:
            st.cov = (n * st.cov + (n / n1) * delta * delta) / n1
        st.count = n1

    def quadratic_forms(self, label: int, head_weights: np.ndarray) -> np.ndarray:
        """Quadratic forms (w_j - w_y)^T Cov_y (w_j - w_y) for all rows j."""
        if not 0 <= label < self.num_classes:
            raise ValueError(f"label {label} out of range [0, {self.num_classes})")
        return quadratic_forms(self.stats[label], head_weights, label)


def quadratic_forms(stats: ClassStats, head_weights: np.ndarray, label: int) -> np.ndarray:
    """Evaluate d_j^T Cov d_j with d_j = w_j - w_label against one class's cov.

    The label's own entry is exactly zero (its difference vector is zero).
    Diagonal covariances reduce to sum_a cov[a] * d_j[a]^2.
    """
    w = np.asarray(head_weights, dtype=float)
    dim = stats.mean.shape[0]
    if w.ndim != 2 or w.shape[1] != dim:
        raise ValueError(f"weights have shape {w.shape}, expected (C, {dim})")
    if not 0 <= label < w.shape[0]:
        raise ValueError(f"label {label} out of range for {w.shape[0]} weight rows")
    d = w - w[label]
    if stats.cov.ndim == 2:
        phi = np.einsum("cf,fg,cg->c", d, stats.cov, d)
    else:
        phi = (d * d) @ stats.cov
    phi[label] = 0.0
    return phi


def apply_cov(stats: ClassStats, rows: np.ndarray) -> np.ndarray:
    """Right-multiply difference rows by the class covariance (any mode)."""
    if stats.cov.ndim == 2:
        return rows @ stats.cov
    return rows * stats.cov


def sampler_factor(stats: ClassStats, lam: float) -> np.ndarray:
    """Cholesky-like factor L with L L^T = lam*Cov + eps*I.

    The jitter eps = 1e-9 * max(1, trace(lam*Cov)/F) guards against
    covariances that are positive semidefinite only up to rounding.
    """
    if lam < 0:
        raise ValueError(f"lam must be >= 0, got {lam}")
    dim = stats.mean.shape[0]
    if stats.cov.ndim == 1:
        scaled = lam * stats.cov
        eps = 1e-9 * max(1.0, float(np.sum(scaled)) / dim)
        return np.diag(np.sqrt(scaled + eps))
    cov = stats.cov
    asym = float(np.max(np.abs(cov - cov.T))) if dim > 0 else 0.0
    if asym > 1e-8:
        raise ValueError(f"covariance is not symmetric (max asymmetry {asym:.3e})")
    scaled = lam * cov
    eps = 1e-9 * max(1.0, float(np.trace(scaled)) / dim)
    try:
        return np.linalg.cholesky(scaled + eps * np.eye(dim))
    except np.linalg.LinAlgError as exc:
        raise DegenerateCovarianceError(
            f"class {stats.class_id}: factorization failed after jitter {eps:.3e}"
        ) from exc


def save_bank(bank: CovarianceBank, path: str) -> None:
    """Write a bank snapshot as CSV.

    Header line carries the bank geometry; each following row is
    (class_id, count, mean entries, row-major covariance entries), printed
    with 17 significant digits so float64 values round-trip bit-exactly.
    """
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"num_classes={bank.num_classes},dim={bank.dim},mode={bank.mode}\n")
        for st in bank.stats:
            cells = [str(st.class_id), str(st.count)]
            cells += [format(v, ".17g") for v in st.mean]
            cells += [format(v, ".17g") for v in np.ravel(st.cov)]
            fh.write(",".join(cells) + "\n")


def load_bank(path: str) -> CovarianceBank:
    """Read a snapshot written by :func:`save_bank`."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty bank file")
    header = dict(item.split("=", 1) for item in lines[0].split(","))
    try:
        num_classes = int(header["num_classes"])
        dim = int(header["dim"])
        mode = header["mode"]
    except (KeyError, ValueError) as exc:
        raise ValueError(f"{path}: malformed bank header {lines[0]!r}") from exc
    bank = CovarianceBank(num_classes, dim, mode)
    cov_len = dim * dim if mode == FULL else dim
    if len(lines) - 1 != num_classes:
        raise ValueError(f"{path}: expected {num_classes} rows, found {len(lines) - 1}")
    for lineno, ln in enumerate(lines[1:], start=2):
        cells = ln.split(",")
        if len(cells) != 2 + dim + cov_len:
            raise ValueError(f"{path}: line {lineno}: expected {2 + dim + cov_len} cells, got {len(cells)}")
        cid = int(cells[0])
        st = bank.stats[cid]
        st.count = int(cells[1])
        st.mean = np.array([float(v) for v in cells[2:2 + dim]])
        flat = np.array([float(v) for v in cells[2 + dim:]])
        st.cov = flat.reshape(dim, dim) if mode == FULL else flat
    return bank
