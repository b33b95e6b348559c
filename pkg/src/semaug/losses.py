"""Loss functions for embedding classifiers, with analytic gradients.

Five variants share this module:

* ``softmax_ce``   - plain cross entropy on unnormalized logits w.f + b.
* ``isda_bound``   - closed-form upper bound on the expected cross entropy
  when embeddings are perturbed by a class-conditional Gaussian of
  covariance lam*Cov; reduces to ``softmax_ce`` at lam = 0.
* ``am_softmax``   - additive-margin softmax on scaled cosine logits.
* ``daam_softmax`` - additive-margin softmax whose margin is scaled per
  sample by a difficulty coefficient (``DA`` or ``DY``).
* ``dasa_bound``   - closed-form upper bound on the expected
  difficulty-aware margin loss under the same Gaussian perturbation;
  reduces to ``daam_softmax`` at lam = 0.

All operations are pure single-sample functions; a batch loss is the mean
of independent per-sample evaluations.  Gradients are returned for the
embedding, the raw (unnormalized) weight rows, and, on the softmax path,
the biases.  The class covariance is treated as a constant: no gradient
flows into the statistics bank.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .covariance import ClassStats, CovarianceBank, apply_cov, quadratic_forms

VARIANTS = ("softmax", "isda", "am", "daam", "dasa")
DIFFICULTY_MODES = ("none", "DA", "DY")
STRENGTH_MODES = ("constant", "DA", "DY")


@dataclass
class ClassifierHead:
    """Last-layer parameters: weight rows, optional biases, scale, margin.

    The margin-loss path normalizes weight rows in the forward pass and
    expects unit-norm embeddings; biases are used only by the softmax path.
    """

    weights: np.ndarray
    biases: np.ndarray | None = None
    scale: float = 32.0
    margin: float = 0.2

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.ndim != 2:
            raise ValueError(f"weights must be 2-D, got shape {self.weights.shape}")
        if self.biases is not None:
            self.biases = np.asarray(self.biases, dtype=float)
            if self.biases.shape != (self.weights.shape[0],):
                raise ValueError("biases must have one entry per weight row")
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        if self.margin < 0:
            raise ValueError(f"margin must be nonnegative, got {self.margin}")

    @property
    def num_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]


@dataclass
class LossConfig:
    """Which loss variant to run and how augmentation strength is scheduled.

    ``ramp_total_iters`` is the schedule horizon T; strength stays zero for
    the first ``deferred_fraction`` of it and then ramps linearly as t/T
    times ``lambda0`` (or times the sample's difficulty coefficient when
    ``strength_mode`` is dynamic).
    """

    variant: str = "dasa"
    difficulty: str = "DA"
    strength_mode: str = "constant"
    lambda0: float = 0.1
    gamma: float = 2.0
    ramp_total_iters: int = 1
    deferred_fraction: float = 0.4

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.difficulty not in DIFFICULTY_MODES:
            raise ValueError(f"difficulty must be one of {DIFFICULTY_MODES}, got {self.difficulty!r}")
        if self.strength_mode not in STRENGTH_MODES:
            raise ValueError(f"strength_mode must be one of {STRENGTH_MODES}, got {self.strength_mode!r}")
        if self.variant in ("softmax", "isda", "am") and self.difficulty != "none":
            raise ValueError(f"variant {self.variant!r} does not take a difficulty mode")
        # strength_mode is used by the dasa variant only; others ignore it.
        if self.lambda0 < 0:
            raise ValueError(f"lambda0 must be >= 0, got {self.lambda0}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.ramp_total_iters < 1:
            raise ValueError(f"ramp_total_iters must be >= 1, got {self.ramp_total_iters}")
        if not 0.0 <= self.deferred_fraction <= 1.0:
            raise ValueError(f"deferred_fraction must be in [0, 1], got {self.deferred_fraction}")


@dataclass
class LossOutput:
    value: float
    grad_embedding: np.ndarray
    grad_weights: np.ndarray
    grad_biases: np.ndarray | None = None
    per_sample_terms: dict = field(default_factory=dict)


def difficulty_da(cos_y: float) -> float:
    """Difficulty coefficient (1 - cos)/2 in [0, 1], decreasing in cos."""
    c = min(max(float(cos_y), -1.0), 1.0)
    return (1.0 - c) / 2.0


def difficulty_dy(cos_y: float, gamma: float) -> float:
    """Exponential difficulty coefficient exp(1 - cos)/gamma."""
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    c = min(max(float(cos_y), -1.0), 1.0)
    return math.exp(1.0 - c) / gamma


def _coef_and_slope(mode: str, cos_y: float, gamma: float) -> tuple[float, float]:
    """Difficulty coefficient and its derivative w.r.t. cos_y (0 when clamped)."""
    inside = -1.0 <= cos_y <= 1.0
    if mode == "none":
        return 1.0, 0.0
    if mode == "DA":
        return difficulty_da(cos_y), -0.5 if inside else 0.0
    if mode == "DY":
        v = difficulty_dy(cos_y, gamma)
        return v, -v if inside else 0.0
    raise ValueError(f"unknown difficulty mode {mode!r}")


def _ramp(t: float, config: LossConfig) -> float:
    """Schedule ramp t/T, zero during the deferred fraction, clamped at T."""
    if t < 0:
        raise ValueError(f"iteration must be >= 0, got {t}")
    T = config.ramp_total_iters
    t = min(t, T)
    frac = t / T
    if frac < config.deferred_fraction:
        return 0.0
    return frac


def lambda_schedule(t: float, config: LossConfig, coef: float | None = None) -> float:
    """Augmentation strength at iteration t.

    Constant mode returns ramp * lambda0; dynamic modes return ramp times
    the sample's difficulty coefficient, which the caller must supply.
    """
    r = _ramp(t, config)
    if config.strength_mode == "constant":
        return r * config.lambda0
    if coef is None:
        raise ValueError("dynamic strength_mode needs the sample's difficulty coefficient")
    return r * coef


def _diag_cos(w_y: np.ndarray, f: np.ndarray) -> float:
    """Cosine between a weight row and the embedding, for diagnostics only."""
    denom = np.linalg.norm(w_y) * np.linalg.norm(f)
    return float(w_y @ f / denom) if denom > 0 else 0.0


def _check_finite(*arrays) -> None:
    for a in arrays:
        if a is not None and not np.all(np.isfinite(a)):
            raise ValueError("non-finite values in loss inputs")


def _checked_embedding(embedding: np.ndarray, dim: int) -> np.ndarray:
    f = np.asarray(embedding, dtype=float)
    if f.shape != (dim,):
        raise ValueError(f"embedding has shape {f.shape}, expected ({dim},)")
    return f


def softmax_ce(embedding: np.ndarray, head: ClassifierHead, label: int) -> LossOutput:
    """Cross entropy -log softmax(W f + b)[label], max-subtraction stabilized."""
    f = _checked_embedding(embedding, head.dim)
    if not 0 <= label < head.num_classes:
        raise ValueError(f"label {label} out of range")
    _check_finite(f, head.weights, head.biases)
    z = head.weights @ f
    if head.biases is not None:
        z = z + head.biases
    zmax = z.max()
    ez = np.exp(z - zmax)
    lse = zmax + math.log(ez.sum())
    value = lse - z[label]
    p = ez / ez.sum()
    g = p.copy()
    g[label] -= 1.0
    return LossOutput(
        value=float(value),
        grad_embedding=head.weights.T @ g,
        grad_weights=np.outer(g, f),
        grad_biases=g if head.biases is not None else None,
        per_sample_terms={"cos_y": _diag_cos(head.weights[label], f), "coef": 1.0, "lambda": 0.0, "max_phi_term": 0.0},
    )


def isda_bound(
    embedding: np.ndarray,
    head: ClassifierHead,
    bank: CovarianceBank,
    lam: float,
    label: int,
) -> LossOutput:
    """Closed-form bound on the expected cross entropy under Gaussian
    perturbation of the embedding with covariance lam*Cov_label.

    Equals log sum_j exp((w_j-w_y).f + (b_j-b_y) + lam*phi_j/2) where
    phi_j is the quadratic form of the label class covariance; the label
    term contributes exp(0) = 1, so the value is nonnegative.  lam = 0
    delegates to ``softmax_ce`` so the reduction is bit-exact.
    """
    return _isda_core(embedding, head, bank.stats[label], lam, label)


def _isda_core(
    embedding: np.ndarray,
    head: ClassifierHead,
    stats: ClassStats,
    lam: float,
    label: int,
) -> LossOutput:
    if lam < 0:
        raise ValueError(f"lam must be >= 0, got {lam}")
    if lam == 0.0:
        return softmax_ce(embedding, head, label)
    f = _checked_embedding(embedding, head.dim)
    if not 0 <= label < head.num_classes:
        raise ValueError(f"label {label} out of range")
    _check_finite(f, head.weights, head.biases)
    W = head.weights
    z = W @ f
    if head.biases is not None:
        z = z + head.biases
    phi = quadratic_forms(stats, W, label)
    a = (z - z[label]) + 0.5 * lam * phi
    a[label] = 0.0
    amax = a.max()
    ea = np.exp(a - amax)
    value = amax + math.log(ea.sum())
    p = ea / ea.sum()

    grad_f = W.T @ p - W[label]
    dw = W - W[label]
    U = apply_cov(stats, dw)
    grad_W = p[:, None] * (f[None, :] + lam * U)
    grad_W[label] = (p[label] - 1.0) * f - lam * (p @ U)
    grad_b = None
    if head.biases is not None:
        grad_b = p.copy()
        grad_b[label] = p[label] - 1.0
    return LossOutput(
        value=float(value),
        grad_embedding=grad_f,
        grad_weights=grad_W,
        grad_biases=grad_b,
        per_sample_terms={
            "cos_y": _diag_cos(W[label], f),
            "coef": 1.0,
            "lambda": float(lam),
            "max_phi_term": float(0.5 * lam * phi.max()) if head.num_classes > 1 else 0.0,
        },
    )


def _normalized_rows(W: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(W, axis=1)
    if np.any(norms < 1e-12):
        raise ValueError("zero-norm weight row")
    return W / norms[:, None], norms


def _margin_core(
    embedding: np.ndarray,
    head: ClassifierHead,
    label: int,
    *,
    margin_mode: str,
    gamma: float,
    lam: float = 0.0,
    strength_mode: str = "constant",
    ramp: float = 0.0,
    stats: ClassStats | None = None,
    coef_override: float | None = None,
) -> LossOutput:
    """Shared forward/backward for the margin-loss family.

    The per-class exponent is s*(cos_j - cos_y) + s*m*coef + lam*s^2*phi_j/2,
    log-sum-exp'ed jointly with the constant 1 of the target term.  With
    dynamic strength, lam = ramp * strength_coef(cos_y) per sample.
    Gradients flow through the weight-row normalization, the difficulty
    coefficient, and the quadratic forms; the covariance itself is constant.
    """
    f = _checked_embedding(embedding, head.dim)
    if not 0 <= label < head.num_classes:
        raise ValueError(f"label {label} out of range")
    _check_finite(f, head.weights)
    fnorm = np.linalg.norm(f)
    if fnorm < 1e-12:
        raise ValueError("zero-norm embedding")
    if abs(fnorm - 1.0) > 1e-3:
        raise ValueError(f"embedding norm {fnorm:.6f}, expected unit length")
    What, norms = _normalized_rows(head.weights)
    s = head.scale
    m = head.margin

    u = What @ f
    uy = float(u[label])
    if coef_override is None:
        coef, dcoef = _coef_and_slope(margin_mode, uy, gamma)
    else:
        coef, dcoef = float(coef_override), 0.0  # frozen coefficient, no grad path

    dlam_duy = 0.0
    if strength_mode != "constant":
        coef_s, dcoef_s = _coef_and_slope(strength_mode, uy, gamma)
        lam = ramp * coef_s
        dlam_duy = ramp * dcoef_s
    if lam < 0:
        raise ValueError(f"lam must be >= 0, got {lam}")

    if lam != 0.0:
        if stats is None:
            raise ValueError("augmentation strength > 0 requires class statistics")
        phi = quadratic_forms(stats, What, label)
    else:
        phi = np.zeros(head.num_classes)

    b = s * (u - uy) + s * m * coef + 0.5 * lam * s * s * phi
    b[label] = 0.0  # target slot carries the constant exp(0) = 1
    bmax = b.max()
    eb = np.exp(b - bmax)
    value = bmax + math.log(eb.sum())
    q = eb / eb.sum()
    qn = q.copy()
    qn[label] = 0.0
    Q = qn.sum()

    duy = (-s + s * m * dcoef) * Q
    if dlam_duy != 0.0:
        duy += 0.5 * s * s * dlam_duy * float(qn @ phi)

    grad_f = s * (qn @ What) + duy * What[label]

    g_hat = (s * qn)[:, None] * f[None, :]
    if lam != 0.0:
        U = apply_cov(stats, What - What[label])
        g_hat += (lam * s * s) * qn[:, None] * U
        g_hat[label] = duy * f - (lam * s * s) * (qn @ U)
    else:
        g_hat[label] = duy * f
    # chain through row normalization: w_hat = w/|w|
    proj = g_hat - (np.sum(g_hat * What, axis=1, keepdims=True)) * What
    grad_W = proj / norms[:, None]

    max_phi_term = float(0.5 * lam * s * s * phi.max()) if lam != 0.0 else 0.0
    return LossOutput(
        value=float(value),
        grad_embedding=grad_f,
        grad_weights=grad_W,
        grad_biases=None,
        per_sample_terms={"cos_y": uy, "coef": float(coef), "lambda": float(lam), "max_phi_term": max_phi_term},
    )


def am_softmax(embedding: np.ndarray, head: ClassifierHead, label: int) -> LossOutput:
    """Additive-margin softmax on scaled cosines, no bias.

    Evaluated as log(1 + sum_{j != y} exp(s*(cos_j - cos_y) + s*m)), which is
    algebraically the negative log of the margin softmax target probability.
    """
    return _margin_core(embedding, head, label, margin_mode="none", gamma=1.0)


def daam_softmax(
    embedding: np.ndarray,
    head: ClassifierHead,
    label: int,
    difficulty: str = "DA",
    gamma: float = 2.0,
) -> LossOutput:
    """Additive-margin softmax with the margin scaled by a per-sample
    difficulty coefficient of the target cosine (harder samples get a
    larger effective margin)."""
    return _margin_core(embedding, head, label, margin_mode=difficulty, gamma=gamma)


def dasa_bound(
    embedding: np.ndarray,
    head: ClassifierHead,
    bank: CovarianceBank,
    label: int,
    config: LossConfig,
    t: float,
) -> LossOutput:
    """Closed-form bound on the expected difficulty-aware margin loss under
    Gaussian embedding perturbation with covariance lam*Cov_label, where lam
    follows the config's schedule at iteration t."""
    stats = bank.stats[label]
    if config.strength_mode == "constant":
        return _margin_core(
            embedding, head, label,
            margin_mode=config.difficulty, gamma=config.gamma,
            lam=lambda_schedule(t, config), stats=stats,
        )
    return _margin_core(
        embedding, head, label,
        margin_mode=config.difficulty, gamma=config.gamma,
        strength_mode=config.strength_mode, ramp=_ramp(t, config), stats=stats,
    )


def margin_bound(
    embedding: np.ndarray,
    head: ClassifierHead,
    stats: ClassStats,
    label: int,
    lam: float,
    coef: float = 1.0,
) -> LossOutput:
    """Margin-family bound at an explicit strength lam and an explicit,
    frozen margin coefficient (1.0 gives the plain-margin bound).  Used by
    the Monte-Carlo cross checks, which evaluate the coefficient once at
    the clean embedding."""
    return _margin_core(
        embedding, head, label,
        margin_mode="none", gamma=1.0, lam=lam, stats=stats, coef_override=coef,
    )


def loss_gradient_check(loss_fn, embedding: np.ndarray, head: ClassifierHead, epsilon: float = 3e-5) -> float:
    """Max relative error of analytic gradients vs central finite differences.

    ``loss_fn(embedding, head) -> LossOutput`` must close over everything
    else (label, bank, config).  Every entry of grad_embedding, grad_weights
    and, when present, grad_biases is checked; the relative error of a pair
    (ga, gf) is |ga - gf| / max(1e-8, |ga| + |gf|).
    """
    if not 1e-7 <= epsilon <= 1e-4:
        raise ValueError(f"epsilon must be in [1e-7, 1e-4], got {epsilon}")
    f0 = np.asarray(embedding, dtype=float).copy()
    W0 = head.weights.copy()
    b0 = None if head.biases is None else head.biases.copy()
    out = loss_fn(f0, head)

    def value(f, W, b):
        h = ClassifierHead(weights=W, biases=b, scale=head.scale, margin=head.margin)
        return loss_fn(f, h).value

    def rel(ga, gf):
        return abs(ga - gf) / max(1e-8, abs(ga) + abs(gf))

    worst = 0.0
    for i in range(f0.size):
        fp, fm = f0.copy(), f0.copy()
        fp[i] += epsilon
        fm[i] -= epsilon
        fd = (value(fp, W0, b0) - value(fm, W0, b0)) / (2 * epsilon)
        worst = max(worst, rel(out.grad_embedding[i], fd))
    for idx in np.ndindex(W0.shape):
        Wp, Wm = W0.copy(), W0.copy()
        Wp[idx] += epsilon
        Wm[idx] -= epsilon
        fd = (value(f0, Wp, b0) - value(f0, Wm, b0)) / (2 * epsilon)
        worst = max(worst, rel(out.grad_weights[idx], fd))
    if out.grad_biases is not None:
        for i in range(b0.size):
            bp, bm = b0.copy(), b0.copy()
            bp[i] += epsilon
            bm[i] -= epsilon
            fd = (value(f0, W0, bp) - value(f0, W0, bm)) / (2 * epsilon)
            worst = max(worst, rel(out.grad_biases[i], fd))
    return worst
