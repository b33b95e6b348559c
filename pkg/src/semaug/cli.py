"""Command-line entry point.

Subcommands: gen, train, compare, bound-check, grad-check, score.  Every
command resolves its configuration from defaults, an optional --config
file, and repeatable --set key=value overrides (--seed and --out are
shorthands for the seed/out keys), then writes the fully resolved
configuration next to its outputs so any run can be reproduced exactly.

Exit codes: 0 success, 2 validation or usage error, 3 numerical failure
(divergence, degenerate covariance, or a failed bound/gradient check).
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from .config import (
    ConfigError,
    parse_config_file,
    parse_value,
    resolve,
    to_dcf_params,
    to_loss_config,
    to_synth_spec,
    to_train_settings,
    write_config,
)
from .covariance import DegenerateCovarianceError, save_bank
from .data import generate, read_dataset, read_embeddings, write_dataset, write_embeddings
from .metrics import compute_eer, compute_min_dcf, format_metrics, read_trials, score_trials, write_scores, write_trials
from .suites import composed_gradcheck, gradcheck_suite, jensen_suite, jensen_suite_passes
from .trainer import TrainingDivergedError, save_metrics, save_model, train

GRAD_THRESHOLD = 1e-5


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="configuration file (flat key = value lines)")
    p.add_argument("--seed", type=int, help="override the seed key")
    p.add_argument("--out", help="override the out (output directory) key")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config key (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="semaug",
                                     description="difficulty-aware semantic augmentation lab")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("gen", "generate a synthetic dataset CSV"),
        ("train", "train an embedding model and report EER/minDCF"),
        ("compare", "train several loss variants on shared data"),
        ("bound-check", "Monte-Carlo validation of the closed-form bounds"),
        ("grad-check", "finite-difference validation of analytic gradients"),
        ("score", "score a trial list against an embeddings CSV"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        if name == "score":
            p.add_argument("embeddings", help="embeddings CSV (index,e0,...)")
            p.add_argument("trials", help="trial CSV (index_a,index_b,is_target)")
    return parser


def _resolve_config(args) -> dict:
    file_values = parse_config_file(args.config) if args.config else None
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, raw = item.split("=", 1)
        overrides[key.strip()] = parse_value(key.strip(), raw)
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out"] = args.out
    return resolve(file_values, overrides)


def _outdir(cfg: dict) -> str:
    out = cfg["out"]
    os.makedirs(out, exist_ok=True)
    return out


def cmd_gen(cfg: dict, args) -> int:
    ds = generate(to_synth_spec(cfg))
    out = _outdir(cfg)
    path = os.path.join(out, "dataset.csv")
    write_dataset(ds, path)
    write_config(os.path.join(out, "gen.config"), cfg)
    print(path)
    return 0


def cmd_train(cfg: dict, args) -> int:
    ds = read_dataset(cfg["train.dataset"])
    out = _outdir(cfg)
    diag = os.path.join(out, "diagnostics.csv") if cfg["train.diagnostics"] else None
    run = train(ds, to_loss_config(cfg), to_train_settings(cfg, diagnostics_path=diag))
    save_metrics(os.path.join(out, "metrics.csv"), run.metrics)
    save_model(os.path.join(out, "model.csv"), run.embedder, run.head)
    save_bank(run.bank, os.path.join(out, "bank.csv"))
    write_embeddings(os.path.join(out, "embeddings.csv"),
                     range(len(run.eval_indices)), run.eval_embeddings)
    write_trials(os.path.join(out, "trials.csv"), run.trials)
    write_config(os.path.join(out, "train.config"), cfg)
    print(format_metrics(run.final_eer, run.final_min_dcf))
    return 0


def cmd_compare(cfg: dict, args) -> int:
    raw = [v.strip() for v in cfg["compare.variants"].split(",") if v.strip()]
    variants = list(dict.fromkeys(raw))
    if len(variants) < len(raw):
        print("warning: duplicate variants removed", file=sys.stderr)
    if len(variants) < 2:
        raise ConfigError("compare needs at least 2 distinct variants")
    try:
        seeds = [int(s) for s in cfg["compare.seeds"].split(",")]
    except ValueError:
        raise ConfigError(f"bad compare.seeds: {cfg['compare.seeds']!r}") from None
    out = _outdir(cfg)
    rows = []
    for seed in seeds:
        ds = generate(to_synth_spec({**cfg, "seed": seed}))
        for v in variants:
            lc = to_loss_config(cfg, variant=v)
            run = train(ds, lc, to_train_settings(cfg, seed=seed))
            rows.append([v, lc.difficulty, lc.strength_mode,
                         format(cfg["loss.lambda0"], ".17g"), seed,
                         format(run.final_eer, ".17g"), format(run.final_min_dcf, ".17g")])
    path = os.path.join(out, "compare.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["variant", "difficulty", "strength_mode", "lambda0", "seed", "eer", "min_dcf"])
        w.writerows(rows)
    write_config(os.path.join(out, "compare.config"), cfg)
    print(path)
    return 0


def cmd_bound_check(cfg: dict, args) -> int:
    results = jensen_suite(cfg["bound.trials"], cfg["bound.samples"], cfg["seed"])
    out = _outdir(cfg)
    path = os.path.join(out, "bound_check.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["trial", "variant", "lambda", "M", "mc_mean", "se", "bound", "slack", "z_score"])
        for r in results:
            w.writerow([r.trial, r.family, format(r.lam, ".17g"), r.report.samples] +
                       [format(v, ".17g") for v in
                        (r.report.mean, r.report.std_error, r.report.bound_value,
                         r.report.slack, r.report.z_score)])
    write_config(os.path.join(out, "bound_check.config"), cfg)
    if not jensen_suite_passes(results):
        for r in results:
            if r.report.z_score < -3.0:
                print(f"bound violated: family={r.family} trial={r.trial} "
                      f"z={r.report.z_score:.2f}", file=sys.stderr)
        print("bound check FAILED", file=sys.stderr)
        return 3
    print(f"{path}: all {len(results)} trials within tolerance")
    return 0


def cmd_grad_check(cfg: dict, args) -> int:
    results = gradcheck_suite(cfg["grad.trials"], cfg["grad.epsilon"], cfg["seed"])
    results += composed_gradcheck(cfg["grad.composed_trials"], cfg["grad.epsilon"], cfg["seed"])
    out = _outdir(cfg)
    path = os.path.join(out, "grad_check.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kind", "variant", "trial", "epsilon", "max_rel_error"])
        for r in results:
            w.writerow([r.kind, r.variant, r.trial,
                        format(cfg["grad.epsilon"], ".17g"),
                        format(r.max_rel_error, ".17g")])
    write_config(os.path.join(out, "grad_check.config"), cfg)
    bad = [r for r in results if not r.max_rel_error < GRAD_THRESHOLD]
    if bad:
        for r in bad:
            print(f"gradient mismatch: {r.kind}/{r.variant} trial={r.trial} "
                  f"rel_error={r.max_rel_error:.3e}", file=sys.stderr)
        print("gradient check FAILED", file=sys.stderr)
        return 3
    print(f"{path}: all {len(results)} trials below {GRAD_THRESHOLD}")
    return 0


def cmd_score(cfg: dict, args) -> int:
    embs = read_embeddings(args.embeddings)
    trials = read_trials(args.trials)
    missing = (set(trials.index_a) | set(trials.index_b)) - set(embs)
    if missing:
        raise ValueError(f"{args.trials}: indices missing from embeddings: {sorted(missing)[:5]}")
    order = sorted(embs)
    pos = {idx: k for k, idx in enumerate(order)}
    mat = np.array([embs[idx] for idx in order])
    remapped = type(trials)(
        index_a=np.array([pos[i] for i in trials.index_a]),
        index_b=np.array([pos[i] for i in trials.index_b]),
        is_target=trials.is_target,
    )
    scores = score_trials(mat, remapped)
    eer, _ = compute_eer(scores)
    mdcf = compute_min_dcf(scores, to_dcf_params(cfg))
    out = _outdir(cfg)
    write_scores(os.path.join(out, "scores.csv"), trials, scores)
    write_config(os.path.join(out, "score.config"), cfg)
    print(format_metrics(eer, mdcf))
    return 0


COMMANDS = {
    "gen": cmd_gen,
    "train": cmd_train,
    "compare": cmd_compare,
    "bound-check": cmd_bound_check,
    "grad-check": cmd_grad_check,
    "score": cmd_score,
}


def entry(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _resolve_config(args)
        return COMMANDS[args.command](cfg, args)
    except (TrainingDivergedError, DegenerateCovarianceError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(entry())


if __name__ == "__main__":
    main()
