"""Monte-Carlo estimators for the expected losses that the closed-form
bounds dominate, plus a scalar Gaussian moment identity check.

The estimators draw augmented embeddings f + L z (z standard normal, L a
factor of lam times the class covariance), evaluate the exact per-draw
loss, and report the empirical mean with its standard error next to the
closed-form bound evaluated on identical inputs.  Two conventions matter
and are deliberate: draws are not renormalized, and the margin's
difficulty coefficient is evaluated once at the clean embedding.  That is
precisely the quantity the closed form bounds, so the comparison is
apples to apples.

Zero strength short-circuits to the deterministic loss with zero standard
error; no random numbers are consumed in that case.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .covariance import ClassStats, sampler_factor
from .losses import ClassifierHead, _isda_core, _normalized_rows, margin_bound
from .rng import philox_rng

_CHUNK = 1 << 14


@dataclass
class McReport:
    """Empirical expected loss next to its closed-form bound.

    slack = bound_value - mean; z_score = slack / std_error, with the
    convention that zero slack at zero standard error scores 0 and any
    other zero-error mismatch scores signed infinity.
    """

    mean: float
    std_error: float
    samples: int
    bound_value: float
    slack: float
    z_score: float


@dataclass
class MomentReport:
    mc_mean: float
    std_error: float
    closed_form: float
    rel_error: float
    rel_std_error: float
    samples: int
    passed: bool


def sample_augmented(embedding, stats: ClassStats, lam: float, rng, count: int | None = None):
    """Draw from N(f, lam*Cov + eps*I): one F-vector, or (count, F) rows.

    lam = 0 returns exact copies of f (no jitter noise, no RNG use): the
    zero-strength Monte-Carlo estimate must equal the deterministic loss
    with zero variance.
    """
    f = np.asarray(embedding, dtype=float)
    if lam < 0:
        raise ValueError(f"lam must be >= 0, got {lam}")
    n = 1 if count is None else int(count)
    if n < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if lam == 0.0:
        draws = np.tile(f, (n, 1))
    else:
        L = sampler_factor(stats, lam)
        z = rng.standard_normal((n, f.size))
        draws = f[None, :] + z @ L.T
    return draws[0] if count is None else draws


def _finish(losses: np.ndarray, bound_value: float) -> McReport:
    m = int(losses.size)
    mean = float(losses.mean())
    se = float(losses.std(ddof=1) / math.sqrt(m)) if m > 1 else 0.0
    slack = float(bound_value) - mean
    if se > 0.0:
        z = slack / se
    elif abs(slack) <= 1e-9 * max(1.0, abs(mean)):
        z = 0.0
    else:
        z = math.copysign(math.inf, slack)
    return McReport(mean=mean, std_error=se, samples=m,
                    bound_value=float(bound_value), slack=slack, z_score=float(z))


def mc_expected_ce(embedding, head: ClassifierHead, stats: ClassStats, lam: float,
                   label: int, count: int, seed) -> McReport:
    """Estimate E[cross entropy of W f~ + b] over augmented embeddings and
    compare against the closed-form bound on the same inputs."""
    if count < 100:
        raise ValueError(f"count must be >= 100, got {count}")
    bound = _isda_core(embedding, head, stats, lam, label).value
    if lam == 0.0:
        # every draw is f itself, so the estimate is exact by construction
        return McReport(mean=bound, std_error=0.0, samples=count,
                        bound_value=bound, slack=0.0, z_score=0.0)
    f = np.asarray(embedding, dtype=float)
    rng = philox_rng(seed)
    W = head.weights
    losses = np.empty(count)
    done = 0
    while done < count:
        n = min(_CHUNK, count - done)
        draws = sample_augmented(f, stats, lam, rng, count=n)
        Z = draws @ W.T
        if head.biases is not None:
            Z = Z + head.biases
        zmax = Z.max(axis=1)
        lse = zmax + np.log(np.exp(Z - zmax[:, None]).sum(axis=1))
        losses[done:done + n] = lse - Z[:, label]
        done += n
    return _finish(losses, bound)


def mc_expected_margin(embedding, head: ClassifierHead, stats: ClassStats, lam: float,
                       label: int, margin_coef: float, count: int, seed) -> McReport:
    """Estimate the expected margin loss log(1 + sum_{j!=y} exp(s(u~_j - u~_y)
    + s*m*coef)) over augmented embeddings, coef frozen at the clean
    embedding, and compare against the matching closed-form bound."""
    if count < 100:
        raise ValueError(f"count must be >= 100, got {count}")
    coef = float(margin_coef)
    if coef < 0:
        raise ValueError(f"margin_coef must be >= 0, got {coef}")
    bound = margin_bound(embedding, head, stats, label, lam, coef).value
    if lam == 0.0:
        return McReport(mean=bound, std_error=0.0, samples=count,
                        bound_value=bound, slack=0.0, z_score=0.0)
    f = np.asarray(embedding, dtype=float)
    rng = philox_rng(seed)
    What, _ = _normalized_rows(head.weights)
    s, m = head.scale, head.margin
    base = s * m * coef
    losses = np.empty(count)
    done = 0
    while done < count:
        n = min(_CHUNK, count - done)
        draws = sample_augmented(f, stats, lam, rng, count=n)
        U = draws @ What.T
        B = s * (U - U[:, [label]]) + base
        B[:, label] = 0.0  # target slot carries the constant exp(0) = 1
        bmax = B.max(axis=1)
        losses[done:done + n] = bmax + np.log(np.exp(B - bmax[:, None]).sum(axis=1))
        done += n
    return _finish(losses, bound)


def moment_identity_check(mu: float, sigma2: float, t: float, count: int, seed) -> MomentReport:
    """Check E[exp(t X)] = exp(t mu + sigma2 t^2 / 2) for X ~ N(mu, sigma2)
    by direct sampling; passes when the relative error is within five
    relative standard errors."""
    if sigma2 < 0:
        raise ValueError(f"sigma2 must be >= 0, got {sigma2}")
    if abs(t) * math.sqrt(sigma2) > 3.0:
        raise ValueError("t*sigma above 3 makes the MC variance unusable")
    if count < 100:
        raise ValueError(f"count must be >= 100, got {count}")
    closed = math.exp(t * mu + 0.5 * sigma2 * t * t)
    if sigma2 == 0.0 or t == 0.0:
        # degenerate distribution: the estimate is the constant itself
        mean, se = math.exp(t * mu), 0.0
    else:
        rng = philox_rng(seed)
        x = mu + math.sqrt(sigma2) * rng.standard_normal(count)
        vals = np.exp(t * x)
        mean = float(vals.mean())
        se = float(vals.std(ddof=1) / math.sqrt(count)) if count > 1 else 0.0
    rel_error = abs(mean - closed) / closed
    rel_se = se / closed
    return MomentReport(mc_mean=mean, std_error=se, closed_form=closed,
                        rel_error=rel_error, rel_std_error=rel_se,
                        samples=count, passed=rel_error <= 5.0 * rel_se)
