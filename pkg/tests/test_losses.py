"""Loss values against high-precision oracles, exact reduction identities
between variants, difficulty/schedule contracts, and gradient checks."""

import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from semaug.covariance import FULL, ClassStats, CovarianceBank
from semaug.losses import (
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
    margin_bound,
    softmax_ce,
)
from semaug.rng import philox_rng


# -- high-precision oracles --------------------------------------------------
# Values recomputed in 60-digit arithmetic from the same float inputs, with
# none of the implementation's stabilization tricks.


def _mpf_list(xs):
    return [mp.mpf(float(x)) for x in xs]


def mp_softmax_value(W, b, f, label):
    with mp.workdps(60):
        fv = _mpf_list(f)
        z = [mp.fsum(wi * fi for wi, fi in zip(_mpf_list(row), fv)) for row in W]
        if b is not None:
            z = [zi + mp.mpf(float(bi)) for zi, bi in zip(z, b)]
        return float(mp.log(mp.fsum(mp.e ** zi for zi in z)) - z[label])


def mp_isda_value(W, b, f, cov, lam, label):
    with mp.workdps(60):
        fv = _mpf_list(f)
        rows = [_mpf_list(row) for row in W]
        z = [mp.fsum(wi * fi for wi, fi in zip(r, fv)) for r in rows]
        if b is not None:
            z = [zi + mp.mpf(float(bi)) for zi, bi in zip(z, b)]
        lam = mp.mpf(float(lam))
        terms = [mp.mpf(1)]
        for j in range(len(rows)):
            if j == label:
                continue
            d = [rows[j][a] - rows[label][a] for a in range(len(fv))]
            phi = mp.fsum(
                d[a] * mp.mpf(float(cov[a][c])) * d[c]
                for a in range(len(d))
                for c in range(len(d))
            )
            terms.append(mp.e ** (z[j] - z[label] + lam * phi / 2))
        return float(mp.log(mp.fsum(terms)))


def mp_margin_value(W, f, label, s, m, coef, lam=0.0, cov=None):
    with mp.workdps(60):
        fv = _mpf_list(f)
        what = []
        for row in W:
            r = _mpf_list(row)
            nrm = mp.sqrt(mp.fsum(x * x for x in r))
            what.append([x / nrm for x in r])
        u = [mp.fsum(wi * fi for wi, fi in zip(r, fv)) for r in what]
        s, m = mp.mpf(float(s)), mp.mpf(float(m))
        coef, lam = mp.mpf(float(coef)), mp.mpf(float(lam))
        terms = [mp.mpf(1)]
        for j in range(len(what)):
            if j == label:
                continue
            expo = s * (u[j] - u[label]) + s * m * coef
            if lam > 0:
                d = [what[j][a] - what[label][a] for a in range(len(fv))]
                phi = mp.fsum(
                    d[a] * mp.mpf(float(cov[a][c])) * d[c]
                    for a in range(len(d))
                    for c in range(len(d))
                )
                terms.append(mp.e ** (expo + lam * s * s * phi / 2))
            else:
                terms.append(mp.e ** expo)
        return float(mp.log(mp.fsum(terms)))


def random_stats(rng, dim):
    pts = rng.standard_normal((dim + 8, dim)) @ rng.standard_normal((dim, dim)).T
    mean = pts.mean(axis=0)
    d = pts - mean
    return ClassStats(class_id=0, count=len(pts), mean=mean, cov=d.T @ d / len(pts))


def unit(rng, dim):
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def bank_with(stats, num_classes, label):
    bank = CovarianceBank(num_classes, stats.cov.shape[0], FULL)
    bank.stats[label] = ClassStats(label, stats.count, stats.mean, stats.cov)
    return bank


# -- hand cases --------------------------------------------------------------


def test_softmax_hand_case_equal_logits():
    head = ClassifierHead(weights=np.eye(2))
    out = softmax_ce(np.array([1.0, 1.0]), head, 0)
    assert out.value == pytest.approx(math.log(2.0), abs=1e-15)
    np.testing.assert_allclose(out.grad_embedding, [-0.5, 0.5], atol=1e-15)
    np.testing.assert_allclose(out.grad_weights, [[-0.5, -0.5], [0.5, 0.5]], atol=1e-15)
    assert out.grad_biases is None


def test_isda_hand_case():
    # z = (1.5, -0.5), phi_1 = 2 under cov [[1,.5],[.5,2]], lam = 0.2:
    # value = log(1 + exp(-2 + 0.2)) = log(1 + exp(-1.8))
    head = ClassifierHead(weights=np.eye(2), biases=np.array([0.5, -0.5]))
    stats = ClassStats(0, 9, np.zeros(2), np.array([[1.0, 0.5], [0.5, 2.0]]))
    out = isda_bound(np.array([1.0, 0.0]), head, bank_with(stats, 2, 0), 0.2, 0)
    assert out.value == pytest.approx(0.15297761052607413, abs=1e-14)


def test_am_hand_case():
    # cosines (1, 0), s = 2, m = 0.2: value = log(1 + exp(-1.6)); the
    # non-unit rows exercise the normalization
    head = ClassifierHead(weights=np.array([[2.0, 0.0], [0.0, 3.0]]), scale=2.0, margin=0.2)
    out = am_softmax(np.array([1.0, 0.0]), head, 0)
    assert out.value == pytest.approx(0.18390074088833883, abs=1e-14)
    assert out.grad_biases is None
    assert out.per_sample_terms["coef"] == 1.0


def test_daam_hand_case():
    # cosines (0.6, 0.8), coef = (1-0.6)/2 = 0.2, s = 2, m = 0.25:
    # exponent = 0.4 + 0.1, value = log(1 + exp(0.5))
    head = ClassifierHead(weights=np.eye(2), scale=2.0, margin=0.25)
    out = daam_softmax(np.array([0.6, 0.8]), head, 0, "DA", 2.0)
    assert out.value == pytest.approx(0.9740769841801067, abs=1e-14)
    assert out.per_sample_terms["coef"] == pytest.approx(0.2, abs=1e-15)


def test_dasa_hand_case():
    # same geometry as the daam case plus lam = 0.1, identity covariance,
    # phi_1 = |e2-e1|^2 = 2: exponent gains 0.5*0.1*4*2 = 0.4
    head = ClassifierHead(weights=np.eye(2), scale=2.0, margin=0.25)
    bank = bank_with(ClassStats(0, 9, np.zeros(2), np.eye(2)), 2, 0)
    cfg = LossConfig(variant="dasa", difficulty="DA", lambda0=0.1,
                     ramp_total_iters=1, deferred_fraction=0.0)
    out = dasa_bound(np.array([0.6, 0.8]), head, bank, 0, cfg, 1)
    assert out.value == pytest.approx(1.2411538747320878, abs=1e-14)
    assert out.per_sample_terms["lambda"] == 0.1


# -- randomized oracle comparisons -------------------------------------------


def test_softmax_matches_high_precision_oracle():
    rng = philox_rng(201)
    for k in range(20):
        C, F = int(rng.integers(2, 8)), int(rng.integers(2, 8))
        W = rng.standard_normal((C, F))
        b = rng.standard_normal(C) if k % 2 else None
        f = rng.standard_normal(F)
        label = int(rng.integers(0, C))
        head = ClassifierHead(weights=W, biases=b)
        out = softmax_ce(f, head, label)
        assert out.value == pytest.approx(mp_softmax_value(W, b, f, label), rel=1e-13, abs=1e-13)


def test_isda_matches_high_precision_oracle():
    rng = philox_rng(202)
    for k in range(20):
        C, F = int(rng.integers(2, 7)), int(rng.integers(2, 7))
        W = rng.standard_normal((C, F))
        b = rng.standard_normal(C) if k % 2 else None
        f = rng.standard_normal(F)
        label = int(rng.integers(0, C))
        stats = random_stats(rng, F)
        lam = 10.0 ** rng.uniform(-2, 0)
        out = isda_bound(f, ClassifierHead(weights=W, biases=b), bank_with(stats, C, label), lam, label)
        want = mp_isda_value(W, b, f, stats.cov, lam, label)
        assert out.value == pytest.approx(want, rel=1e-12, abs=1e-12)


def test_margin_family_matches_high_precision_oracle():
    rng = philox_rng(203)
    for k in range(20):
        C, F = int(rng.integers(2, 7)), int(rng.integers(2, 7))
        W = rng.standard_normal((C, F))
        f = unit(rng, F)
        label = int(rng.integers(0, C))
        s = 2.0 + 10.0 * rng.random()
        m = 0.05 + 0.3 * rng.random()
        head = ClassifierHead(weights=W, scale=s, margin=m)
        cos_y = float((W[label] / np.linalg.norm(W[label])) @ f)

        out = am_softmax(f, head, label)
        assert out.value == pytest.approx(mp_margin_value(W, f, label, s, m, 1.0), rel=1e-12, abs=1e-12)

        mode = ("DA", "DY")[k % 2]
        coef = difficulty_da(cos_y) if mode == "DA" else difficulty_dy(cos_y, 2.0)
        out = daam_softmax(f, head, label, mode, 2.0)
        assert out.value == pytest.approx(mp_margin_value(W, f, label, s, m, coef), rel=1e-12, abs=1e-12)

        stats = random_stats(rng, F)
        lam = 10.0 ** rng.uniform(-2, -0.5)
        out = margin_bound(f, head, stats, label, lam, coef)
        want = mp_margin_value(W, f, label, s, m, coef, lam, stats.cov)
        assert out.value == pytest.approx(want, rel=1e-12, abs=1e-12)


def test_dasa_matches_high_precision_oracle_across_schedules():
    rng = philox_rng(204)
    for k in range(18):
        C, F = int(rng.integers(2, 6)), int(rng.integers(2, 6))
        W = rng.standard_normal((C, F))
        f = unit(rng, F)
        label = int(rng.integers(0, C))
        head = ClassifierHead(weights=W, scale=2.0 + 4.0 * rng.random(), margin=0.2)
        stats = random_stats(rng, F)
        cfg = LossConfig(
            variant="dasa",
            difficulty=("DA", "DY", "none")[k % 3],
            strength_mode=("constant", "DA", "DY")[k // 6],
            lambda0=10.0 ** rng.uniform(-2, -0.5),
            ramp_total_iters=10,
            deferred_fraction=0.3,
        )
        t = int(rng.integers(0, 11))
        out = dasa_bound(f, head, bank_with(stats, C, label), label, cfg, t)

        cos_y = float((W[label] / np.linalg.norm(W[label])) @ f)
        if cfg.difficulty == "none":
            coef = 1.0
        elif cfg.difficulty == "DA":
            coef = difficulty_da(cos_y)
        else:
            coef = difficulty_dy(cos_y, cfg.gamma)
        if cfg.strength_mode == "constant":
            lam = lambda_schedule(t, cfg)
        else:
            sc = difficulty_da(cos_y) if cfg.strength_mode == "DA" else difficulty_dy(cos_y, cfg.gamma)
            lam = lambda_schedule(t, cfg, coef=sc)
        want = mp_margin_value(W, f, label, head.scale, head.margin, coef, lam, stats.cov)
        assert out.value == pytest.approx(want, rel=1e-12, abs=1e-12)
        assert out.per_sample_terms["lambda"] == pytest.approx(lam, abs=1e-15)


# -- reduction identities -----------------------------------------------------


def test_isda_at_zero_strength_is_exactly_softmax():
    rng = philox_rng(205)
    for _ in range(10):
        C, F = 5, 4
        W = rng.standard_normal((C, F))
        b = rng.standard_normal(C)
        f = rng.standard_normal(F)
        label = int(rng.integers(0, C))
        bank = bank_with(random_stats(rng, F), C, label)
        a = isda_bound(f, ClassifierHead(weights=W, biases=b), bank, 0.0, label)
        c = softmax_ce(f, ClassifierHead(weights=W, biases=b), label)
        assert a.value == c.value
        np.testing.assert_array_equal(a.grad_embedding, c.grad_embedding)
        np.testing.assert_array_equal(a.grad_weights, c.grad_weights)
        np.testing.assert_array_equal(a.grad_biases, c.grad_biases)


def test_dasa_in_deferred_region_is_exactly_daam():
    rng = philox_rng(206)
    for strength in ("constant", "DA", "DY"):
        W = rng.standard_normal((4, 5))
        f = unit(rng, 5)
        label = 2
        head = ClassifierHead(weights=W, scale=8.0, margin=0.25)
        bank = bank_with(random_stats(rng, 5), 4, label)
        cfg = LossConfig(variant="dasa", difficulty="DA", strength_mode=strength,
                         lambda0=0.5, ramp_total_iters=10, deferred_fraction=0.4)
        a = dasa_bound(f, head, bank, label, cfg, 3)  # 0.3 < 0.4: strength off
        c = daam_softmax(f, head, label, "DA", cfg.gamma)
        assert a.value == c.value
        np.testing.assert_array_equal(a.grad_embedding, c.grad_embedding)
        np.testing.assert_array_equal(a.grad_weights, c.grad_weights)


def test_dasa_without_difficulty_or_strength_is_exactly_am():
    rng = philox_rng(207)
    W = rng.standard_normal((4, 5))
    f = unit(rng, 5)
    head = ClassifierHead(weights=W, scale=10.0, margin=0.2)
    bank = bank_with(random_stats(rng, 5), 4, 1)
    cfg = LossConfig(variant="dasa", difficulty="none", lambda0=0.4,
                     ramp_total_iters=10, deferred_fraction=1.0)
    a = dasa_bound(f, head, bank, 1, cfg, 9)  # strength deferred past this point
    c = am_softmax(f, head, 1)
    assert a.value == c.value
    np.testing.assert_array_equal(a.grad_embedding, c.grad_embedding)
    np.testing.assert_array_equal(a.grad_weights, c.grad_weights)


def test_margin_bound_with_unit_coefficient_is_exactly_am():
    rng = philox_rng(208)
    W = rng.standard_normal((5, 4))
    f = unit(rng, 4)
    head = ClassifierHead(weights=W, scale=6.0, margin=0.3)
    stats = random_stats(rng, 4)
    a = margin_bound(f, head, stats, 0, 0.0, 1.0)
    c = am_softmax(f, head, 0)
    assert a.value == c.value
    np.testing.assert_array_equal(a.grad_weights, c.grad_weights)


# -- ordering and invariance --------------------------------------------------


def test_bound_value_is_nondecreasing_in_strength():
    rng = philox_rng(209)
    for _ in range(10):
        C, F = 5, 4
        W = rng.standard_normal((C, F))
        f = unit(rng, F)
        label = int(rng.integers(0, C))
        stats = random_stats(rng, F)
        head_b = ClassifierHead(weights=W, biases=rng.standard_normal(C))
        head_m = ClassifierHead(weights=W, scale=4.0, margin=0.2)
        bank = bank_with(stats, C, label)
        lams = [0.0, 0.05, 0.2, 1.0]
        ce = [isda_bound(f, head_b, bank, l, label).value for l in lams]
        mg = [margin_bound(f, head_m, stats, label, l, 0.7).value for l in lams]
        for seq in (ce, mg):
            for lo, hi in zip(seq, seq[1:]):
                assert hi >= lo - 1e-12


def test_class_permutation_equivariance():
    rng = philox_rng(210)
    C, F = 6, 4
    W = rng.standard_normal((C, F))
    b = rng.standard_normal(C)
    f = unit(rng, F)
    label = 2
    perm = rng.permutation(C)
    new_label = int(np.where(perm == label)[0][0])

    a = softmax_ce(f, ClassifierHead(weights=W, biases=b), label)
    p = softmax_ce(f, ClassifierHead(weights=W[perm], biases=b[perm]), new_label)
    assert p.value == pytest.approx(a.value, rel=1e-12)
    np.testing.assert_allclose(p.grad_weights, a.grad_weights[perm], atol=1e-12)
    np.testing.assert_allclose(p.grad_biases, a.grad_biases[perm], atol=1e-12)

    head = ClassifierHead(weights=W, scale=5.0, margin=0.2)
    head_p = ClassifierHead(weights=W[perm], scale=5.0, margin=0.2)
    a = daam_softmax(f, head, label, "DA", 2.0)
    p = daam_softmax(f, head_p, new_label, "DA", 2.0)
    assert p.value == pytest.approx(a.value, rel=1e-12)
    np.testing.assert_allclose(p.grad_weights, a.grad_weights[perm], atol=1e-12)


def test_margin_losses_ignore_weight_row_magnitudes():
    rng = philox_rng(211)
    W = rng.standard_normal((4, 5))
    f = unit(rng, 5)
    head = ClassifierHead(weights=W, scale=7.0, margin=0.15)
    base = am_softmax(f, head, 1)

    # powers of two rescale rows without any rounding at all
    quad = am_softmax(f, ClassifierHead(weights=4.0 * W, scale=7.0, margin=0.15), 1)
    assert quad.value == base.value
    np.testing.assert_array_equal(quad.grad_embedding, base.grad_embedding)
    np.testing.assert_array_equal(quad.grad_weights, base.grad_weights / 4.0)

    odd = am_softmax(f, ClassifierHead(weights=1.7 * W, scale=7.0, margin=0.15), 1)
    assert odd.value == pytest.approx(base.value, rel=1e-12)
    np.testing.assert_allclose(odd.grad_weights, base.grad_weights / 1.7, rtol=1e-10)


# -- difficulty coefficients ---------------------------------------------------


def test_difficulty_exact_values_and_clamping():
    assert difficulty_da(1.0) == 0.0
    assert difficulty_da(-1.0) == 1.0
    assert difficulty_da(0.0) == 0.5
    assert difficulty_da(2.5) == 0.0    # clamped to cos = 1
    assert difficulty_da(-3.0) == 1.0   # clamped to cos = -1
    assert difficulty_dy(1.0, 2.0) == 0.5
    assert difficulty_dy(0.0, 2.0) == pytest.approx(1.3591409142295226, abs=1e-15)
    assert difficulty_dy(-1.0, 2.0) == pytest.approx(3.694528049465325, abs=1e-14)
    assert difficulty_dy(9.0, 2.0) == 0.5
    with pytest.raises(ValueError):
        difficulty_dy(0.0, 0.0)
    with pytest.raises(ValueError):
        difficulty_dy(0.0, -1.0)


def test_difficulty_strictly_decreasing_on_dense_grid():
    grid = np.linspace(-1.0, 1.0, 1000)
    for fn in (difficulty_da, lambda c: difficulty_dy(c, 2.0)):
        vals = [fn(c) for c in grid]
        assert all(a > b for a, b in zip(vals, vals[1:]))


@given(st.floats(min_value=-100.0, max_value=100.0, allow_nan=False))
def test_difficulty_ranges_hold_everywhere(c):
    assert 0.0 <= difficulty_da(c) <= 1.0
    assert 0.5 <= difficulty_dy(c, 2.0) <= math.exp(2.0) / 2.0


# -- strength schedule ----------------------------------------------------------


def test_schedule_endpoint_and_deferred_region():
    cfg = LossConfig(variant="dasa", lambda0=0.1, ramp_total_iters=10, deferred_fraction=0.4)
    assert lambda_schedule(0, cfg) == 0.0
    assert lambda_schedule(3, cfg) == 0.0          # 0.3 < 0.4
    assert lambda_schedule(4, cfg) == 0.4 * 0.1    # boundary is inclusive
    assert lambda_schedule(7, cfg) == 0.7 * 0.1
    assert lambda_schedule(10, cfg) == cfg.lambda0  # exact at the horizon
    assert lambda_schedule(25, cfg) == cfg.lambda0  # clamped past it
    with pytest.raises(ValueError):
        lambda_schedule(-1, cfg)


def test_schedule_dynamic_mode_scales_the_coefficient():
    cfg = LossConfig(variant="dasa", strength_mode="DA", lambda0=0.1,
                     ramp_total_iters=10, deferred_fraction=0.0)
    # dynamic strength multiplies the ramp by the sample coefficient alone
    assert lambda_schedule(5, cfg, coef=0.8) == 0.5 * 0.8
    assert lambda_schedule(10, cfg, coef=0.3) == 0.3
    with pytest.raises(ValueError):
        lambda_schedule(5, cfg)


@given(st.integers(min_value=0, max_value=40), st.integers(min_value=0, max_value=40))
def test_schedule_is_monotone_in_time(t1, t2):
    cfg = LossConfig(variant="dasa", lambda0=0.25, ramp_total_iters=20, deferred_fraction=0.35)
    lo, hi = sorted((t1, t2))
    assert lambda_schedule(lo, cfg) <= lambda_schedule(hi, cfg)


# -- gradients -------------------------------------------------------------------


def test_gradient_spot_checks():
    rng = philox_rng(212)
    f = unit(rng, 4)
    W = rng.standard_normal((3, 4)) / 2.0
    head = ClassifierHead(weights=W, biases=rng.standard_normal(3) / 2.0)
    err = loss_gradient_check(lambda e, h: softmax_ce(e, h, 1), f, head)
    assert err < 1e-5

    bank = bank_with(random_stats(rng, 4), 3, 1)
    cfg = LossConfig(variant="dasa", difficulty="DA", strength_mode="DY",
                     lambda0=0.05, ramp_total_iters=10, deferred_fraction=0.0)
    head = ClassifierHead(weights=W, scale=2.5, margin=0.2)
    err = loss_gradient_check(lambda e, h: dasa_bound(e, h, bank, 1, cfg, 6), f, head)
    assert err < 1e-5


def test_gradient_check_rejects_bad_epsilon():
    head = ClassifierHead(weights=np.eye(2))
    fn = lambda e, h: softmax_ce(e, h, 0)
    with pytest.raises(ValueError):
        loss_gradient_check(fn, np.array([1.0, 0.0]), head, epsilon=1e-8)
    with pytest.raises(ValueError):
        loss_gradient_check(fn, np.array([1.0, 0.0]), head, epsilon=1e-3)


def test_saturated_margin_gradients_agree_absolutely():
    """At a confidently-correct point the softmax saturates: true gradients
    sink below what central differences resolve relative to themselves, so
    the meaningful comparison is absolute."""
    f = np.array([1.0, 0.0, 0.0])
    W = np.array([[1.0, 0.0, 0.0], [-0.8, 0.5, 0.33]])
    head = ClassifierHead(weights=W, scale=32.0, margin=0.2)
    out = am_softmax(f, head, 0)
    eps = 3e-5

    worst = 0.0
    for i in range(3):
        fp, fm = f.copy(), f.copy()
        fp[i] += eps
        fm[i] -= eps
        fd = (am_softmax(fp, head, 0).value - am_softmax(fm, head, 0).value) / (2 * eps)
        worst = max(worst, abs(out.grad_embedding[i] - fd))
    for idx in np.ndindex(W.shape):
        Wp, Wm = W.copy(), W.copy()
        Wp[idx] += eps
        Wm[idx] -= eps
        hp = ClassifierHead(weights=Wp, scale=32.0, margin=0.2)
        hm = ClassifierHead(weights=Wm, scale=32.0, margin=0.2)
        fd = (am_softmax(f, hp, 0).value - am_softmax(f, hm, 0).value) / (2 * eps)
        worst = max(worst, abs(out.grad_weights[idx] - fd))
    assert worst < 1e-8


# -- input validation -------------------------------------------------------------


def test_margin_path_requires_unit_embedding():
    head = ClassifierHead(weights=np.eye(3))
    with pytest.raises(ValueError, match="unit"):
        am_softmax(np.array([0.9, 0.0, 0.0]), head, 0)
    with pytest.raises(ValueError, match="zero-norm"):
        am_softmax(np.zeros(3), head, 0)
    # a norm within the tolerance band passes
    am_softmax(np.array([1.0005, 0.0, 0.0]), head, 0)


def test_zero_norm_weight_row_rejected():
    W = np.array([[1.0, 0.0], [0.0, 0.0]])
    with pytest.raises(ValueError, match="weight row"):
        am_softmax(np.array([1.0, 0.0]), ClassifierHead(weights=W), 0)


def test_label_and_finiteness_validation():
    head = ClassifierHead(weights=np.eye(2), biases=np.zeros(2))
    with pytest.raises(ValueError, match="label"):
        softmax_ce(np.array([1.0, 0.0]), head, 2)
    with pytest.raises(ValueError, match="label"):
        am_softmax(np.array([1.0, 0.0]), ClassifierHead(weights=np.eye(2)), -1)
    with pytest.raises(ValueError, match="shape"):
        softmax_ce(np.array([1.0, 0.0, 0.0]), head, 0)
    with pytest.raises(ValueError, match="finite"):
        softmax_ce(np.array([np.nan, 0.0]), head, 0)
    bad = ClassifierHead(weights=np.array([[np.inf, 0.0], [0.0, 1.0]]), biases=np.zeros(2))
    with pytest.raises(ValueError, match="finite"):
        softmax_ce(np.array([1.0, 0.0]), bad, 0)


def test_negative_strength_rejected():
    stats = ClassStats(0, 5, np.zeros(2), np.eye(2))
    head = ClassifierHead(weights=np.eye(2), biases=np.zeros(2))
    with pytest.raises(ValueError):
        isda_bound(np.array([1.0, 0.0]), head, bank_with(stats, 2, 0), -0.5, 0)
    with pytest.raises(ValueError):
        margin_bound(np.array([1.0, 0.0]), ClassifierHead(weights=np.eye(2)), stats, 0, -0.1, 1.0)


def test_head_validation():
    with pytest.raises(ValueError):
        ClassifierHead(weights=np.zeros(3))
    with pytest.raises(ValueError):
        ClassifierHead(weights=np.eye(3), biases=np.zeros(2))
    with pytest.raises(ValueError):
        ClassifierHead(weights=np.eye(3), scale=0.0)
    with pytest.raises(ValueError):
        ClassifierHead(weights=np.eye(3), margin=-0.1)


def test_loss_config_validation():
    with pytest.raises(ValueError):
        LossConfig(variant="centerloss")
    for variant in ("softmax", "isda", "am"):
        with pytest.raises(ValueError):
            LossConfig(variant=variant, difficulty="DA")
        LossConfig(variant=variant, difficulty="none")  # ok
    with pytest.raises(ValueError):
        LossConfig(variant="dasa", difficulty="hard")
    with pytest.raises(ValueError):
        LossConfig(variant="dasa", strength_mode="ramp")
    with pytest.raises(ValueError):
        LossConfig(variant="dasa", lambda0=-0.1)
    with pytest.raises(ValueError):
        LossConfig(variant="dasa", gamma=0.0)
    with pytest.raises(ValueError):
        LossConfig(variant="dasa", ramp_total_iters=0)
    with pytest.raises(ValueError):
        LossConfig(variant="dasa", deferred_fraction=1.2)
    # strength_mode on a non-dasa variant is tolerated and ignored
    LossConfig(variant="am", difficulty="none", strength_mode="DY")
