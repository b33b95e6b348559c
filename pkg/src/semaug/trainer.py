"""End-to-end training of the embedding network under any loss variant.

The reference path is single-threaded and fully deterministic for a given
seed: parameter init, per-epoch shuffling, and trial building each use
their own counter-based RNG stream.  Per batch, every sample's loss and
gradients are computed against the covariance bank as of the batch start;
the bank then absorbs the batch's embeddings, and the optimizer steps.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .covariance import CovarianceBank
from .data import Dataset, EVAL, TRAIN
from .embedder import TinyEmbedder
from .losses import (
    ClassifierHead,
    LossConfig,
    am_softmax,
    daam_softmax,
    dasa_bound,
    isda_bound,
    lambda_schedule,
    softmax_ce,
)
from .metrics import DcfParams, build_trials, compute_eer, compute_min_dcf, score_trials
from .rng import philox_rng


class TrainingDivergedError(RuntimeError):
    def __init__(self, iteration: int):
        super().__init__(f"non-finite loss at iteration {iteration}")
        self.iteration = iteration


@dataclass
class TrainSettings:
    hidden: list = field(default_factory=lambda: [64])
    embed_dim: int = 16
    epochs: int = 60
    batch_size: int = 32
    lr_init: float = 0.05
    lr_final: float = 1e-4
    momentum: float = 0.9
    weight_decay: float = 1e-4
    scale: float = 12.0
    margin: float = 0.2
    cov_mode: str = "full"
    stats_after_deferred_only: bool = False
    max_nontarget_per_target: float = 10.0
    dcf: DcfParams = field(default_factory=DcfParams)
    seed: int = 0
    diagnostics_path: str | None = None

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if not (self.lr_init > 0 and self.lr_final > 0):
            raise ValueError("learning rates must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")


@dataclass
class MetricsRow:
    epoch: int
    loss: float
    mean_cos_y: float
    mean_coef: float
    lam: float
    eer: float
    min_dcf: float


@dataclass
class TrainRun:
    embedder: TinyEmbedder
    head: ClassifierHead
    bank: CovarianceBank
    config: LossConfig
    metrics: list
    total_iters: int
    fallback_count: int
    eval_indices: np.ndarray
    eval_embeddings: np.ndarray
    trials: object

    @property
    def final_eer(self) -> float:
        return self.metrics[-1].eer

    @property
    def final_min_dcf(self) -> float:
        return self.metrics[-1].min_dcf


class SgdNesterov:
    """SGD with Nesterov momentum, exponential LR decay, weight decay.

    Update convention (stated so runs are reproducible bit for bit):
    g <- g + wd*theta; v' = mu*v - lr*g; theta' = theta + mu*v' - lr*g.
    lr(t) = lr_init * (lr_final/lr_init)^(t/T), with the endpoints
    returned exactly at t=0 and t=T.
    """

    def __init__(self, params: list, lr_init: float, lr_final: float,
                 total_iters: int, momentum: float = 0.9, weight_decay: float = 1e-4):
        if total_iters < 1:
            raise ValueError("total_iters must be >= 1")
        self.params = params
        self.velocity = [np.zeros_like(p) for p in params]
        self.lr_init = float(lr_init)
        self.lr_final = float(lr_final)
        self.total_iters = int(total_iters)
        self.momentum = float(momentum)
        self.weight_decay = float(weight_decay)

    def lr_at(self, t: float) -> float:
        if t < 0:
            raise ValueError(f"iteration must be >= 0, got {t}")
        if t == 0:
            return self.lr_init
        if t >= self.total_iters:
            return self.lr_final
        return self.lr_init * (self.lr_final / self.lr_init) ** (t / self.total_iters)

    def step(self, grads: list, t: int) -> None:
        lr = self.lr_at(t)
        mu = self.momentum
        for p, v, g in zip(self.params, self.velocity, grads):
            g = g + self.weight_decay * p
            v *= mu
            v -= lr * g
            p += mu * v
            p -= lr * g


def _loss_dispatch(variant, f, head, bank, label, cfg, t):
    if variant == "softmax":
        return softmax_ce(f, head, label)
    if variant == "isda":
        return isda_bound(f, head, bank, lambda_schedule(t, cfg), label)
    if variant == "am":
        return am_softmax(f, head, label)
    if variant == "daam":
        return daam_softmax(f, head, label, cfg.difficulty, cfg.gamma)
    if variant == "dasa":
        return dasa_bound(f, head, bank, label, cfg, t)
    raise ValueError(f"unknown variant {variant!r}")


def train(dataset: Dataset, loss_config: LossConfig, settings: TrainSettings) -> TrainRun:
    X = dataset.features
    y = dataset.labels
    C = dataset.num_classes
    if C < 2:
        raise ValueError("training needs at least 2 classes")
    train_idx = dataset.indices(TRAIN)
    eval_idx = dataset.indices(EVAL)
    if train_idx.size == 0 or eval_idx.size == 0:
        raise ValueError("dataset must contain both train and eval samples")

    n_train = train_idx.size
    B = settings.batch_size
    iters_per_epoch = math.ceil(n_train / B)
    total_iters = settings.epochs * iters_per_epoch
    cfg = replace(loss_config, ramp_total_iters=total_iters)
    if cfg.variant != "dasa" and cfg.strength_mode != "constant":
        cfg = replace(cfg, strength_mode="constant")  # ignored by these variants

    F = settings.embed_dim
    init_rng = philox_rng(settings.seed, 1)
    embedder = TinyEmbedder([dataset.dim] + list(settings.hidden) + [F], init_rng)
    head_w = init_rng.standard_normal((C, F)) / math.sqrt(F)
    softmax_path = cfg.variant in ("softmax", "isda")
    head = ClassifierHead(weights=head_w,
                          biases=np.zeros(C) if softmax_path else None,
                          scale=settings.scale, margin=settings.margin)
    bank = CovarianceBank(C, F, settings.cov_mode)

    params = embedder.parameters() + [head.weights]
    if head.biases is not None:
        params.append(head.biases)
    opt = SgdNesterov(params, settings.lr_init, settings.lr_final, total_iters,
                      settings.momentum, settings.weight_decay)

    shuffle_rng = philox_rng(settings.seed, 2)
    trials = build_trials(y[eval_idx], settings.max_nontarget_per_target,
                          (settings.seed, 3))

    diag = None
    diag_file = None
    if settings.diagnostics_path is not None:
        diag_file = open(settings.diagnostics_path, "w", newline="")
        diag = csv.writer(diag_file)
        diag.writerow(["iteration", "sample_id", "cos_y", "coef", "lambda", "loss"])

    def stats_allowed(t: int) -> bool:
        if not settings.stats_after_deferred_only:
            return True
        return t / total_iters >= cfg.deferred_fraction

    metrics = []
    eval_embs = None
    t = 0
    try:
        for epoch in range(settings.epochs):
            order = shuffle_rng.permutation(train_idx)
            ep_loss = ep_cos = ep_coef = ep_lam = 0.0
            ep_count = 0
            for start in range(0, n_train, B):
                batch = order[start:start + B]
                head_gw = np.zeros_like(head.weights)
                head_gb = np.zeros_like(head.biases) if head.biases is not None else None
                emb_grads = [np.zeros_like(p) for p in embedder.parameters()]
                batch_embs = []
                for i in batch:
                    f, cache = embedder.forward(X[i])
                    # blown-up parameters surface here as a non-finite
                    # embedding before any loss sees them
                    if not math.isfinite(cache.prenorm) or not np.all(np.isfinite(f)):
                        raise TrainingDivergedError(t)
                    out = _loss_dispatch(cfg.variant, f, head, bank, int(y[i]), cfg, t)
                    if not math.isfinite(out.value):
                        raise TrainingDivergedError(t)
                    per = out.per_sample_terms
                    ep_loss += out.value
                    ep_cos += per["cos_y"]
                    ep_coef += per["coef"]
                    ep_lam += per["lambda"]
                    ep_count += 1
                    if diag is not None:
                        diag.writerow([t, int(i),
                                       format(per["cos_y"], ".17g"),
                                       format(per["coef"], ".17g"),
                                       format(per["lambda"], ".17g"),
                                       format(out.value, ".17g")])
                    head_gw += out.grad_weights
                    if head_gb is not None:
                        head_gb += out.grad_biases
                    for k, (gw, gb) in enumerate(embedder.backward(cache, out.grad_embedding)):
                        emb_grads[2 * k] += gw
                        emb_grads[2 * k + 1] += gb
                    batch_embs.append((f, int(y[i])))
                if stats_allowed(t):
                    for f, label in batch_embs:
                        bank.update(f, label)
                inv = 1.0 / len(batch)
                grads = [g * inv for g in emb_grads] + [head_gw * inv]
                if head_gb is not None:
                    grads.append(head_gb * inv)
                opt.step(grads, t)
                t += 1

            eval_embs = np.array([embedder.forward(X[i])[0] for i in eval_idx])
            scores = score_trials(eval_embs, trials)
            eer, _ = compute_eer(scores)
            mdcf = compute_min_dcf(scores, settings.dcf)
            row = MetricsRow(epoch=epoch,
                             loss=ep_loss / ep_count,
                             mean_cos_y=ep_cos / ep_count,
                             mean_coef=ep_coef / ep_count,
                             lam=ep_lam / ep_count,
                             eer=eer, min_dcf=mdcf)
            for v in (row.loss, row.mean_cos_y, row.mean_coef, row.lam, row.eer, row.min_dcf):
                if not math.isfinite(v):
                    raise TrainingDivergedError(t)
            metrics.append(row)
    finally:
        if diag_file is not None:
            diag_file.close()

    return TrainRun(embedder=embedder, head=head, bank=bank, config=cfg,
                    metrics=metrics, total_iters=total_iters,
                    fallback_count=embedder.fallback_count,
                    eval_indices=eval_idx, eval_embeddings=eval_embs, trials=trials)


def save_metrics(path, metrics: list) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "loss", "mean_cos_y", "mean_coef", "lambda", "eer", "min_dcf"])
        for r in metrics:
            w.writerow([r.epoch] + [format(v, ".17g") for v in
                                    (r.loss, r.mean_cos_y, r.mean_coef, r.lam, r.eer, r.min_dcf)])


def save_model(path, embedder: TinyEmbedder, head: ClassifierHead) -> None:
    """Layer dump, one CSV line per tensor, 17-significant-digit decimals."""
    def fmt(arr):
        return [format(float(v), ".17g") for v in np.asarray(arr).ravel()]

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["semaug-model", 1])
        w.writerow(["layers"] + [str(s) for s in embedder.layer_sizes])
        w.writerow(["scale", format(head.scale, ".17g")])
        w.writerow(["margin", format(head.margin, ".17g")])
        w.writerow(["head_biases", int(head.biases is not None)])
        for k, (W, b) in enumerate(zip(embedder.weights, embedder.biases)):
            w.writerow([f"W{k}"] + fmt(W))
            w.writerow([f"b{k}"] + fmt(b))
        w.writerow(["HW"] + fmt(head.weights))
        if head.biases is not None:
            w.writerow(["Hb"] + fmt(head.biases))


def load_model(path) -> tuple[TinyEmbedder, ClassifierHead]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:1] != ["semaug-model"]:
        raise ValueError(f"{path}: not a model snapshot")
    fields = {r[0]: r[1:] for r in rows[1:] if r}
    sizes = [int(s) for s in fields["layers"]]
    emb = TinyEmbedder(sizes, rng=None)
    for k, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        emb.weights[k] = np.array([float(v) for v in fields[f"W{k}"]]).reshape(fan_out, fan_in)
        emb.biases[k] = np.array([float(v) for v in fields[f"b{k}"]])
    hw = np.array([float(v) for v in fields["HW"]])
    C = hw.size // sizes[-1]
    head = ClassifierHead(
        weights=hw.reshape(C, sizes[-1]),
        biases=np.array([float(v) for v in fields["Hb"]]) if int(fields["head_biases"][0]) else None,
        scale=float(fields["scale"][0]),
        margin=float(fields["margin"][0]),
    )
    return emb, head
