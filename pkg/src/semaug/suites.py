"""Randomized validation suites: Jensen-bound trials against the
Monte-Carlo oracle, and finite-difference gradient checks for every loss
variant and for the full network+head composition.

Each trial gets its own counter-based RNG stream keyed by (seed, family,
trial), so results are reproducible and trials are independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .covariance import ClassStats, CovarianceBank, DIAGONAL, FULL, quadratic_forms
from .embedder import TinyEmbedder
from .losses import (
    ClassifierHead,
    LossConfig,
    am_softmax,
    daam_softmax,
    dasa_bound,
    difficulty_da,
    difficulty_dy,
    isda_bound,
    lambda_schedule,
    loss_gradient_check,
    softmax_ce,
    _normalized_rows,
)

# Largest allowed spread (in nats) between margin-softmax exponents in a
# gradient-check scenario. Keeping every class term within e**-6 of the
# winner keeps every gradient entry large enough for central differences
# to resolve; wider spreads push true entries below the difference noise.
_SPREAD_CAP = 6.0
from .montecarlo import McReport, mc_expected_ce, mc_expected_margin
from .rng import philox_rng, rng_key

BOUND_FAMILIES = ("ce", "margin", "margin_da")
_FAMILY_ID = {"ce": 0, "margin": 1, "margin_da": 2}
_VARIANT_ID = {"softmax": 10, "isda": 11, "am": 12, "daam": 13, "dasa": 14}


@dataclass
class BoundTrial:
    trial: int
    family: str
    lam: float
    report: McReport


@dataclass
class GradTrial:
    kind: str  # "loss" or "composed"
    variant: str
    trial: int
    max_rel_error: float


def _random_stats(rng, dim: int, scale: float | None = None) -> ClassStats:
    """Population statistics of a random anisotropic Gaussian cloud.

    When scale is given the covariance is rescaled so its mean diagonal
    entry equals scale; gradient-check scenarios use this to keep the
    quadratic terms small enough for finite differences to resolve.
    """
    n = dim + 5 + int(rng.integers(0, 2 * dim))
    center = rng.standard_normal(dim)
    A = rng.standard_normal((dim, dim)) / math.sqrt(dim)
    pts = center + rng.standard_normal((n, dim)) @ A.T
    mean = pts.mean(axis=0)
    d = pts - mean
    cov = d.T @ d / n
    cov = 0.5 * (cov + cov.T)
    if scale is not None:
        cov *= scale / (np.trace(cov) / dim)
    return ClassStats(class_id=0, count=n, mean=mean, cov=cov)


def _unit(rng, dim: int, floor: float = 0.0) -> np.ndarray:
    """Random unit vector. A positive floor pushes every raw component
    away from zero first, so products like p_j * f_i stay clear of the
    finite-difference noise floor in gradient checks."""
    v = rng.standard_normal(dim)
    if floor > 0.0:
        small = np.abs(v) < floor
        v[small] = np.where(v[small] < 0.0, -floor, floor)
    return v / np.linalg.norm(v)


def jensen_trial(family: str, trial: int, count: int, seed) -> BoundTrial:
    """One randomized bound-vs-MC comparison for the given family."""
    if family not in BOUND_FAMILIES:
        raise ValueError(f"family must be one of {BOUND_FAMILIES}, got {family!r}")
    rng = philox_rng(seed, _FAMILY_ID[family], trial, 0)
    mc_key = rng_key(seed, _FAMILY_ID[family], trial, 1)
    C = 3 + int(rng.integers(0, 6))
    F = 3 + int(rng.integers(0, 8))
    stats = _random_stats(rng, F)
    lam = 10.0 ** rng.uniform(-2.0, 0.3)
    f = _unit(rng, F)
    label = int(rng.integers(0, C))
    W = rng.standard_normal((C, F)) / math.sqrt(F)
    if family == "ce":
        head = ClassifierHead(weights=W, biases=0.5 * rng.standard_normal(C))
        report = mc_expected_ce(f, head, stats, lam, label, count, mc_key)
    else:
        head = ClassifierHead(weights=W, biases=None,
                              scale=2.0 + 10.0 * rng.random(),
                              margin=0.05 + 0.35 * rng.random())
        if family == "margin":
            coef = 1.0
        else:
            What, _ = _normalized_rows(head.weights)
            coef = difficulty_da(float(What[label] @ f))
        report = mc_expected_margin(f, head, stats, lam, label, coef, count, mc_key)
    return BoundTrial(trial=trial, family=family, lam=lam, report=report)


def jensen_suite(trials: int, count: int, seed, families=BOUND_FAMILIES) -> list[BoundTrial]:
    return [jensen_trial(fam, k, count, seed) for fam in families for k in range(trials)]


def jensen_suite_passes(results: list[BoundTrial]) -> bool:
    """Acceptance rule: at most 2% of trials per family below z = -3, and
    nonnegative mean slack per family."""
    for fam in {r.family for r in results}:
        rs = [r for r in results if r.family == fam]
        bad = sum(1 for r in rs if r.report.z_score < -3.0)
        if bad / len(rs) > 0.02:
            return False
        if sum(r.report.slack for r in rs) / len(rs) < 0.0:
            return False
    return True


def _tempered_scale(s, f, W, label, m, coef, lam_eff, stats) -> float:
    """Shrink the margin scale until the realized exponent spread of the
    margin softmax fits _SPREAD_CAP. Every term in the spread scales with
    s (the quadratic one with s**2), so the loop terminates."""
    What, _ = _normalized_rows(W)
    rel = What @ f - float(What[label] @ f)
    rel = np.delete(rel, label)
    if lam_eff > 0.0:
        phi = np.delete(quadratic_forms(stats, What, label), label)
    else:
        phi = np.zeros_like(rel)
    while s > 0.25:
        b = s * rel + s * m * coef + 0.5 * lam_eff * s * s * phi
        spread = max(float(b.max()), 0.0) - min(float(b.min()), 0.0)
        if spread <= _SPREAD_CAP:
            break
        s *= 0.8
    return s


def _gradcheck_scenario(variant: str, trial: int, seed, epsilon: float) -> float:
    # Magnitudes here are deliberately tame (unit-scale rows, lambda well
    # below 1, modest scale s). Saturated softmax terms have true gradient
    # entries below what central differences can resolve against the
    # relative-error floor; the saturated regime is covered separately by
    # an absolute-error test.
    rng = philox_rng(seed, _VARIANT_ID[variant], trial)
    C = 3 + int(rng.integers(0, 6))
    F = 3 + int(rng.integers(0, 6))
    f = _unit(rng, F, floor=0.1)
    label = int(rng.integers(0, C))
    W = rng.standard_normal((C, F)) / math.sqrt(F)
    lam = 10.0 ** rng.uniform(-2.0, -0.5)
    diagonal = trial % 2 == 1
    if diagonal:
        stats = ClassStats(class_id=0, count=7, mean=rng.standard_normal(F),
                           cov=rng.uniform(0.05, 0.6, F))
    else:
        stats = _random_stats(rng, F, scale=rng.uniform(0.1, 0.5))
    bank = CovarianceBank(C, F, DIAGONAL if diagonal else FULL)
    bank.stats[label] = ClassStats(class_id=label, count=stats.count,
                                   mean=stats.mean, cov=stats.cov)

    if variant == "softmax":
        head = ClassifierHead(weights=W, biases=0.5 * rng.standard_normal(C))
        fn = lambda e, h: softmax_ce(e, h, label)
        return loss_gradient_check(fn, f, head, epsilon)
    if variant == "isda":
        head = ClassifierHead(weights=W, biases=0.5 * rng.standard_normal(C))
        fn = lambda e, h: isda_bound(e, h, bank, lam, label)
        return loss_gradient_check(fn, f, head, epsilon)

    s = 2.0 + 2.0 * rng.random()
    m = 0.05 + 0.25 * rng.random()
    What, _ = _normalized_rows(W)
    cos_y = float(What[label] @ f)
    if variant == "am":
        coef, lam_eff = 1.0, 0.0
        fn = lambda e, h: am_softmax(e, h, label)
    elif variant == "daam":
        difficulty = ("DA", "DY")[trial % 2]
        coef = difficulty_da(cos_y) if difficulty == "DA" else difficulty_dy(cos_y, 2.0)
        lam_eff = 0.0
        fn = lambda e, h: daam_softmax(e, h, label, difficulty, 2.0)
    else:
        cfg = LossConfig(
            variant="dasa",
            difficulty=("DA", "DY", "none")[trial % 3],
            strength_mode=("constant", "DA", "DY")[(trial // 3) % 3],
            lambda0=lam, gamma=2.0,
            ramp_total_iters=10, deferred_fraction=0.3,
        )
        t = int(rng.integers(0, 11))
        if cfg.difficulty == "DA":
            coef = difficulty_da(cos_y)
        elif cfg.difficulty == "DY":
            coef = difficulty_dy(cos_y, cfg.gamma)
        else:
            coef = 1.0
        if cfg.strength_mode == "constant":
            lam_eff = lambda_schedule(t, cfg)
        elif cfg.strength_mode == "DA":
            lam_eff = lambda_schedule(t, cfg, coef=difficulty_da(cos_y))
        else:
            lam_eff = lambda_schedule(t, cfg, coef=difficulty_dy(cos_y, cfg.gamma))
        fn = lambda e, h: dasa_bound(e, h, bank, label, cfg, t)
    s = _tempered_scale(s, f, W, label, m, coef, lam_eff, stats)
    head = ClassifierHead(weights=W, biases=None, scale=s, margin=m)
    return loss_gradient_check(fn, f, head, epsilon)


def gradcheck_suite(trials_per_variant: int, epsilon: float, seed) -> list[GradTrial]:
    """Finite-difference checks for all five loss variants."""
    out = []
    for variant in ("softmax", "isda", "am", "daam", "dasa"):
        for k in range(trials_per_variant):
            err = _gradcheck_scenario(variant, k, seed, epsilon)
            out.append(GradTrial(kind="loss", variant=variant, trial=k, max_rel_error=err))
    return out


def composed_gradcheck(trials: int, epsilon: float, seed) -> list[GradTrial]:
    """Finite-difference checks of d(loss)/d(parameter) through the full
    embedding network and head, for every loss variant in rotation."""
    variants = ("softmax", "isda", "am", "daam", "dasa")
    out = []
    for k in range(trials):
        variant = variants[k % len(variants)]
        rng = philox_rng(seed, 20, k)
        d_in = 4 + int(rng.integers(0, 4))
        hidden = [5 + int(rng.integers(0, 4))]
        F = 3 + int(rng.integers(0, 4))
        C = 3 + int(rng.integers(0, 4))
        emb = TinyEmbedder([d_in] + hidden + [F], philox_rng(seed, 21, k))
        # Redraw the input until the forward pass is well away from the
        # kinks: enough live rectifier units for gradient flow, and a
        # pre-normalization magnitude that keeps the sphere projection
        # (and its curvature) benign for finite differences.
        x = rng.standard_normal(d_in)
        f0, cache = emb.forward(x)
        for _ in range(50):
            alive = all(int(np.count_nonzero(h > 0)) >= 2 for h in cache.hidden)
            if not cache.fallback and cache.prenorm >= 0.5 and alive:
                break
            x = rng.standard_normal(d_in)
            f0, cache = emb.forward(x)
        label = int(rng.integers(0, C))
        W = rng.standard_normal((C, F)) / math.sqrt(F)
        lam = 10.0 ** rng.uniform(-2.0, -0.5)
        stats = _random_stats(rng, F, scale=rng.uniform(0.1, 0.5))
        bank = CovarianceBank(C, F, FULL)
        bank.stats[label] = ClassStats(class_id=label, count=stats.count,
                                       mean=stats.mean, cov=stats.cov)
        cfg = LossConfig(variant="dasa", difficulty="DA", strength_mode="constant",
                         lambda0=lam, ramp_total_iters=10, deferred_fraction=0.0)
        if variant in ("softmax", "isda"):
            head = ClassifierHead(weights=W, biases=0.5 * rng.standard_normal(C))
        else:
            s = 2.0 + 2.0 * rng.random()
            m = 0.05 + 0.25 * rng.random()
            What, _ = _normalized_rows(W)
            cos_y = float(What[label] @ f0)
            if variant == "am":
                coef, lam_eff = 1.0, 0.0
            elif variant == "daam":
                coef, lam_eff = difficulty_da(cos_y), 0.0
            else:
                coef = difficulty_da(cos_y)
                lam_eff = lambda_schedule(10, cfg)
            s = _tempered_scale(s, f0, W, label, m, coef, lam_eff, stats)
            head = ClassifierHead(weights=W, biases=None, scale=s, margin=m)

        def loss_of(embedder: TinyEmbedder, hd: ClassifierHead):
            f, cache = embedder.forward(x)
            if variant == "softmax":
                return softmax_ce(f, hd, label), cache
            if variant == "isda":
                return isda_bound(f, hd, bank, lam, label), cache
            if variant == "am":
                return am_softmax(f, hd, label), cache
            if variant == "daam":
                return daam_softmax(f, hd, label, "DA", 2.0), cache
            return dasa_bound(f, hd, bank, label, cfg, 10), cache

        loss, cache = loss_of(emb, head)
        param_grads = emb.backward(cache, loss.grad_embedding)

        def value() -> float:
            return loss_of(emb, head)[0].value

        def rel(ga, gf):
            return abs(ga - gf) / max(1e-8, abs(ga) + abs(gf))

        worst = 0.0
        for layer, (gW, gb) in enumerate(param_grads):
            for arr, g in ((emb.weights[layer], gW), (emb.biases[layer], gb)):
                it = np.nditer(arr, flags=["multi_index"])
                while not it.finished:
                    idx = it.multi_index
                    orig = arr[idx]
                    arr[idx] = orig + epsilon
                    vp = value()
                    arr[idx] = orig - epsilon
                    vm = value()
                    arr[idx] = orig
                    worst = max(worst, rel(g[idx], (vp - vm) / (2 * epsilon)))
                    it.iternext()
        for idx in np.ndindex(head.weights.shape):
            orig = head.weights[idx]
            head.weights[idx] = orig + epsilon
            vp = value()
            head.weights[idx] = orig - epsilon
            vm = value()
            head.weights[idx] = orig
            worst = max(worst, rel(loss.grad_weights[idx], (vp - vm) / (2 * epsilon)))
        if loss.grad_biases is not None:
            for i in range(head.biases.size):
                orig = head.biases[i]
                head.biases[i] = orig + epsilon
                vp = value()
                head.biases[i] = orig - epsilon
                vm = value()
                head.biases[i] = orig
                worst = max(worst, rel(loss.grad_biases[i], (vp - vm) / (2 * epsilon)))
        out.append(GradTrial(kind="composed", variant=variant, trial=k, max_rel_error=worst))
    return out
