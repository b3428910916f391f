"""Command-line entry point: deterministic training runs with held-out
perplexity logging, model re-evaluation, synthetic corpus generation, and a
standalone Monte Carlo property check of the hybrid update.

Configuration precedence is CLI flags over config-file lines (simple
``key=value``) over built-in defaults. Every run gets a stable identifier,
a hash of the resolved configuration, and writes ``metrics.csv`` plus
``model.json`` into ``<output-root>/<run_id>/``. The output root comes from
``--out``, else the HYBRIDMIX_OUTPUT environment variable, else ``./runs``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import asdict, dataclass

import numpy as np

from . import dpmm, hdplda
from .corpus import Corpus, UciParseError, load_uci, split_train_test, write_uci_bagofwords
from .dcm import DcmHyper
from .estimators import iter_minibatches
from .evaluation import (
    EvaluationError,
    MetricsRecord,
    emit_metrics,
    heldout_mixed_membership,
    heldout_single_membership,
    split_heldout,
)
from .properties import run_property_suite
from .snapshot import DpmmSnapshot, load_snapshot, save_snapshot, snapshot_dpmm, snapshot_hdp

BATCH_ALGORITHMS = ("hcvb0", "cgs", "tcvb0")
STOCHASTIC_ALGORITHMS = ("hcsvb0", "scvb0", "pcsvb0")
ALGORITHMS = BATCH_ALGORITHMS + STOCHASTIC_ALGORITHMS
FINITE_ALGORITHMS = ("tcvb0", "scvb0", "pcsvb0")
DEFAULT_TRUNCATION = {"tcvb0": 40, "scvb0": 40, "pcsvb0": 300}

OUTPUT_ENV_VAR = "HYBRIDMIX_OUTPUT"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PARSE = 3


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    algorithm: str
    corpus: str
    vocab: str | None
    seed: int
    n_iterations: int
    truncation: int | None
    alpha: float
    beta: float
    a: float
    alpha0: float
    tau0: float
    kappa: float
    batch_size: int
    burn_in_passes: int
    prune_threshold: float
    test_fraction: float
    estimation_fraction: float
    eval_every: int

    def run_id(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


# keys a config file may set, with their types (None-able ints stay int)
_CONFIG_TYPES = {
    "algo": str, "corpus": str, "vocab": str, "seed": int, "sweeps": int,
    "steps": int, "T": int, "alpha": float, "beta": float, "a": float,
    "alpha0": float, "tau0": float, "kappa": float, "batch_size": int,
    "burn_in_passes": int, "prune_threshold": float, "test_fraction": float,
    "estimation_fraction": float, "eval_every": int, "out": str,
}


def _parse_config_file(path: str) -> dict:
    out = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in _CONFIG_TYPES:
                raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
            try:
                out[key] = _CONFIG_TYPES[key](value)
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: bad value for {key}: {value!r}") from None
    return out


def _pick(cli_value, file_config: dict, key: str, default):
    if cli_value is not None:
        return cli_value
    if key in file_config:
        return file_config[key]
    return default


def resolve_train_config(args) -> tuple[RunConfig, str]:
    file_config = _parse_config_file(args.config) if args.config else {}
    algo = _pick(args.algo, file_config, "algo", None)
    if algo is None:
        raise ConfigError("no algorithm given (--algo or config file)")
    if algo not in ALGORITHMS:
        raise ConfigError(f"unknown algorithm {algo!r}; choose from {', '.join(ALGORITHMS)}")
    corpus = _pick(args.corpus, file_config, "corpus", None)
    if corpus is None:
        raise ConfigError("no corpus given (--corpus or config file)")

    batch = algo in BATCH_ALGORITHMS
    sweeps = _pick(args.sweeps, file_config, "sweeps", None)
    steps = _pick(args.steps, file_config, "steps", None)
    if sweeps is not None and steps is not None:
        raise ConfigError("give either --sweeps or --steps, not both")
    n_iterations = sweeps if sweeps is not None else steps
    if n_iterations is None:
        n_iterations = 100 if batch else 200
    if n_iterations < 1:
        raise ConfigError("iteration count must be >= 1")

    truncation = _pick(args.T, file_config, "T", None)
    if algo in FINITE_ALGORITHMS:
        if truncation is None:
            truncation = DEFAULT_TRUNCATION[algo]
        if truncation < 1:
            raise ConfigError(f"{algo} requires a truncation T >= 1")
    elif truncation is not None:
        raise ConfigError(f"{algo} is truncation-free and rejects a T flag")

    cfg = RunConfig(
        algorithm=algo,
        corpus=corpus,
        vocab=_pick(args.vocab, file_config, "vocab", None),
        seed=_pick(args.seed, file_config, "seed", 0),
        n_iterations=n_iterations,
        truncation=truncation,
        alpha=_pick(args.alpha, file_config, "alpha", dpmm.DEFAULT_ALPHA),
        beta=_pick(args.beta, file_config, "beta", dpmm.DEFAULT_BETA if batch else 0.01),
        a=_pick(args.a, file_config, "a", 1.0),
        alpha0=_pick(args.alpha0, file_config, "alpha0", 1.0),
        tau0=_pick(args.tau0, file_config, "tau0", 64.0),
        kappa=_pick(args.kappa, file_config, "kappa", 0.6),
        batch_size=_pick(args.batch_size, file_config, "batch_size", 60),
        burn_in_passes=_pick(args.burn_in_passes, file_config, "burn_in_passes", 5),
        prune_threshold=_pick(args.prune_threshold, file_config, "prune_threshold", 1e-3),
        test_fraction=_pick(args.test_fraction, file_config, "test_fraction", 0.2),
        estimation_fraction=_pick(args.estimation_fraction, file_config, "estimation_fraction", 0.7),
        eval_every=_pick(args.eval_every, file_config, "eval_every", 1 if batch else 25),
    )
    if not 0.0 < cfg.test_fraction < 1.0:
        raise ConfigError("test_fraction must lie in (0, 1)")
    if not 0.0 < cfg.estimation_fraction < 1.0:
        raise ConfigError("estimation_fraction must lie in (0, 1)")
    if cfg.eval_every < 1:
        raise ConfigError("eval_every must be >= 1")
    out_root = args.out if args.out is not None else file_config.get("out") or os.environ.get(OUTPUT_ENV_VAR, "runs")
    return cfg, out_root


def _run_batch_training(cfg: RunConfig, train: Corpus, test: Corpus, run_id: str):
    hyper = dpmm.DpmmHyper(cfg.alpha, DcmHyper(cfg.beta, train.vocab_size))
    if cfg.algorithm == "hcvb0":
        state = dpmm.init_state(train, cfg.seed)
    elif cfg.algorithm == "cgs":
        state = dpmm.init_state(train, cfg.seed, hard=True)
    else:
        state = dpmm.init_truncated_state(train, cfg.truncation, cfg.seed)
    split = split_heldout(test, cfg.estimation_fraction, cfg.seed)
    records = []
    elapsed = 0.0
    for sweep in range(1, cfg.n_iterations + 1):
        if cfg.algorithm == "hcvb0":
            report = dpmm.hcvb0_sweep(state, hyper, prune_threshold=cfg.prune_threshold)
        elif cfg.algorithm == "cgs":
            report = dpmm.cgs_sweep(state, hyper)
        else:
            report = dpmm.tcvb0_sweep(state, hyper)
        elapsed += report.seconds
        if sweep % cfg.eval_every == 0 or sweep == cfg.n_iterations:
            result = heldout_single_membership(snapshot_dpmm(state, hyper), split)
            records.append(MetricsRecord(
                run_id, cfg.algorithm, sweep, sweep * train.n_docs,
                elapsed, state.K, result.perplexity, cfg.seed,
            ))
    return records, snapshot_dpmm(state, hyper)


def _run_stochastic_training(cfg: RunConfig, train: Corpus, test: Corpus, run_id: str):
    hyper = hdplda.HdpHyper(
        a=cfg.a, alpha0=cfg.alpha0, beta=cfg.beta,
        tau0=cfg.tau0, kappa=cfg.kappa, batch_size=cfg.batch_size,
    )
    if cfg.algorithm == "hcsvb0":
        state = hdplda.init_hdp_state(train.vocab_size, train.n_docs, cfg.seed)
    else:
        state = hdplda.init_fixed_state(
            train.vocab_size, train.n_docs, cfg.truncation,
            train.total_tokens, cfg.seed, mode=cfg.algorithm, hyper=hyper,
        )
    split = split_heldout(test, cfg.estimation_fraction, cfg.seed)
    batch_rng = np.random.default_rng(cfg.seed + 1)
    records = []
    elapsed = 0.0
    step = 0
    for idx in iter_minibatches(train.n_docs, cfg.batch_size, cfg.n_iterations, batch_rng):
        batch = [train.docs[i] for i in idx]
        report = hdplda.minibatch_step(
            state, batch, hyper, mode=cfg.algorithm,
            burn_in_passes=cfg.burn_in_passes,
            prune_threshold=cfg.prune_threshold,
        )
        elapsed += report.seconds
        step += 1
        if (step % cfg.eval_every == 0 or step == cfg.n_iterations) and state.K >= 1:
            result = heldout_mixed_membership(snapshot_hdp(state, hyper), split)
            records.append(MetricsRecord(
                run_id, cfg.algorithm, step, step * cfg.batch_size,
                elapsed, state.K, result.perplexity, cfg.seed,
            ))
    return records, snapshot_hdp(state, hyper)


def cmd_train(args) -> int:
    try:
        cfg, out_root = resolve_train_config(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        corpus = load_uci(cfg.corpus, cfg.vocab)
    except (UciParseError, OSError) as exc:
        print(f"error: cannot read corpus: {exc}", file=sys.stderr)
        return EXIT_PARSE
    try:
        train, test = split_train_test(corpus, cfg.test_fraction, cfg.seed)
        run_id = cfg.run_id()
        if cfg.algorithm in BATCH_ALGORITHMS:
            records, snap = _run_batch_training(cfg, train, test, run_id)
        else:
            records, snap = _run_stochastic_training(cfg, train, test, run_id)
    except (ValueError, EvaluationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    run_dir = os.path.join(out_root, run_id)
    os.makedirs(run_dir, exist_ok=True)
    metrics_path = os.path.join(run_dir, "metrics.csv")
    with open(metrics_path, "w", encoding="utf-8", newline="") as f:
        emit_metrics(records, f)
    save_snapshot(snap, os.path.join(run_dir, "model.json"))
    final = records[-1] if records else None
    print(f"run_id: {run_id}")
    print(f"metrics: {metrics_path}")
    if final is not None:
        print(f"final: iteration={final.iteration} K={final.K} "
              f"heldout_perplexity={final.heldout_perplexity:.4f}")
    return EXIT_OK


def cmd_eval(args) -> int:
    try:
        snap = load_snapshot(args.snapshot)
    except (OSError, ValueError) as exc:
        print(f"error: cannot load snapshot: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        corpus = load_uci(args.corpus, args.vocab)
    except (UciParseError, OSError) as exc:
        print(f"error: cannot read corpus: {exc}", file=sys.stderr)
        return EXIT_PARSE
    try:
        split = split_heldout(corpus, args.estimation_fraction, args.seed)
        if isinstance(snap, DpmmSnapshot):
            result = heldout_single_membership(snap, split)
        else:
            result = heldout_mixed_membership(snap, split)
    except EvaluationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"heldout_perplexity={result.perplexity!r} docs_scored={result.n_docs_scored} "
          f"docs_skipped={result.n_docs_skipped} tokens={result.n_tokens}")
    return EXIT_OK


def cmd_synth(args) -> int:
    if min(args.k_true, args.n_docs, args.vocab_size, args.doc_length) < 1:
        print("error: k-true, n-docs, vocab-size and doc-length must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    corpus, labels = dpmm.generate_synthetic(
        args.k_true, args.n_docs, args.vocab_size, args.doc_length,
        args.alpha, args.beta_true, args.seed,
    )
    docword_path = args.out_prefix + ".docword"
    labels_path = args.out_prefix + ".labels"
    os.makedirs(os.path.dirname(os.path.abspath(docword_path)), exist_ok=True)
    with open(docword_path, "w", encoding="utf-8", newline="") as f:
        write_uci_bagofwords(corpus, f)
    with open(labels_path, "w", encoding="utf-8", newline="") as f:
        for lab in labels.tolist():
            f.write(f"{lab}\n")
    print(f"wrote {docword_path} ({corpus.n_docs} docs, V={corpus.vocab_size}, "
          f"{corpus.total_tokens} tokens) and {labels_path}")
    return EXIT_OK


def cmd_properties(args) -> int:
    checks = run_property_suite(seed=args.seed, n_draws=args.draws)
    all_ok = True
    for check in checks:
        status = "PASS" if check.passed else "FAIL"
        print(f"{status} {check.name}: {check.detail}")
        all_ok &= check.passed
    return EXIT_OK if all_ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hybridmix",
        description="Truncation-free hybrid inference for mixture and topic models",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="train a model and log held-out perplexity")
    train.add_argument("--algo", choices=ALGORITHMS, help="inference algorithm")
    train.add_argument("--corpus", help="docword file in UCI bag-of-words format")
    train.add_argument("--vocab", help="optional vocabulary file (one term per line)")
    train.add_argument("--config", help="config file with key=value lines")
    train.add_argument("--seed", type=int, help="random seed (default 0)")
    train.add_argument("--sweeps", type=int, help="full passes for batch algorithms (default 100)")
    train.add_argument("--steps", type=int, help="minibatch steps for stochastic algorithms (default 200)")
    train.add_argument("--T", type=int, help="truncation for finite algorithms "
                       "(defaults: tcvb0/scvb0 40, pcsvb0 300)")
    train.add_argument("--alpha", type=float, help="mixture concentration (default 1.0)")
    train.add_argument("--beta", type=float, help="word smoothing (default 0.1 batch, 0.01 stochastic)")
    train.add_argument("--a", type=float, help="document-level concentration (default 1.0)")
    train.add_argument("--alpha0", type=float, help="top-level stick concentration (default 1.0)")
    train.add_argument("--tau0", type=float, help="schedule offset (default 64)")
    train.add_argument("--kappa", type=float, help="schedule exponent in (0.5, 1] (default 0.6)")
    train.add_argument("--batch-size", type=int, dest="batch_size", help="minibatch size (default 60)")
    train.add_argument("--burn-in-passes", type=int, dest="burn_in_passes",
                       help="local passes per document (default 5)")
    train.add_argument("--prune-threshold", type=float, dest="prune_threshold",
                       help="component/topic mass below which it is pruned (default 1e-3)")
    train.add_argument("--test-fraction", type=float, dest="test_fraction",
                       help="held-out document fraction (default 0.2)")
    train.add_argument("--estimation-fraction", type=float, dest="estimation_fraction",
                       help="per-document estimation fraction (default 0.7)")
    train.add_argument("--eval-every", type=int, dest="eval_every",
                       help="evaluation cadence (default: every sweep / every 25 steps)")
    train.add_argument("--out", help=f"output root (default ${OUTPUT_ENV_VAR} or ./runs)")
    train.set_defaults(func=cmd_train)

    ev = sub.add_parser("eval", help="re-evaluate a saved model on a corpus")
    ev.add_argument("--snapshot", required=True, help="model.json written by train")
    ev.add_argument("--corpus", required=True, help="docword file to evaluate on")
    ev.add_argument("--vocab", help="optional vocabulary file")
    ev.add_argument("--seed", type=int, default=0, help="document-split seed (default 0)")
    ev.add_argument("--estimation-fraction", type=float, dest="estimation_fraction",
                    default=0.7, help="per-document estimation fraction (default 0.7)")
    ev.set_defaults(func=cmd_eval)

    synth = sub.add_parser("synth", help="write a synthetic single-membership corpus")
    synth.add_argument("--k-true", type=int, dest="k_true", default=5,
                       help="number of generating components (default 5)")
    synth.add_argument("--n-docs", type=int, dest="n_docs", default=500,
                       help="documents to generate (default 500)")
    synth.add_argument("--vocab-size", type=int, dest="vocab_size", default=50,
                       help="vocabulary size (default 50)")
    synth.add_argument("--doc-length", type=int, dest="doc_length", default=50,
                       help="tokens per document (default 50)")
    synth.add_argument("--alpha", type=float, default=25.0,
                       help="total concentration of the mixture weights (default 25)")
    synth.add_argument("--beta-true", type=float, dest="beta_true", default=0.01,
                       help="word-distribution concentration (default 0.01)")
    synth.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    synth.add_argument("--out-prefix", dest="out_prefix", default="synth",
                       help="writes <prefix>.docword and <prefix>.labels (default synth)")
    synth.set_defaults(func=cmd_synth)

    props = sub.add_parser("properties", help="Monte Carlo checks of the hybrid update laws")
    props.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    props.add_argument("--draws", type=int, default=100_000,
                       help="Monte Carlo draws per vector (default 100000)")
    props.set_defaults(func=cmd_properties)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
