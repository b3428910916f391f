"""Held-out evaluation and metrics logging.

Each test document is split at the token level into an estimation part and a
scoring part; the model is frozen, latent structure is estimated on the first
part, and perplexity (exp of the negative mean per-token log predictive) is
computed on the second. Documents too short to split are skipped and counted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import IO, Iterable, Sequence

import numpy as np

from .corpus import Corpus, Document, DocumentSplitError, split_document
from .dcm import DcmHyper
from .dpmm import DpmmHyper, component_log_posterior
from .hdplda import HdpHyper, doc_topic_proportions, fold_in_document
from .snapshot import DpmmSnapshot, HdpSnapshot


class EvaluationError(ValueError):
    """No documents could be evaluated."""


@dataclass(frozen=True)
class MetricsRecord:
    run_id: str
    algorithm: str
    iteration: int
    docs_processed: int
    wall_clock_s: float
    K: int
    heldout_perplexity: float
    seed: int


CSV_HEADER = "run_id,algorithm,iteration,docs_processed,wall_clock_s,K,heldout_perplexity,seed"


@dataclass
class HeldoutSplit:
    pairs: list[tuple[Document, Document]]
    n_skipped: int


@dataclass
class HeldoutResult:
    perplexity: float
    n_docs_scored: int
    n_docs_skipped: int
    n_tokens: int


def split_heldout(docs: Sequence[Document] | Corpus, estimation_fraction: float, seed: int) -> HeldoutSplit:
    """Split every test document into (estimation, scoring) parts with
    per-document seeds derived from one master seed. Documents shorter than
    two tokens cannot be split and are skipped."""
    if isinstance(docs, Corpus):
        docs = docs.docs
    rng = np.random.default_rng(seed)
    pairs = []
    skipped = 0
    for doc in docs:
        doc_seed = int(rng.integers(0, 2**63 - 1))
        try:
            pairs.append(split_document(doc, estimation_fraction, doc_seed))
        except DocumentSplitError:
            skipped += 1
    return HeldoutSplit(pairs, skipped)


def perplexity_from_loglik(total_loglik: float, n_tokens: int) -> float:
    if n_tokens <= 0:
        raise EvaluationError("no tokens to score")
    return float(math.exp(-total_loglik / n_tokens))


def heldout_single_membership(snap: DpmmSnapshot, split: HeldoutSplit) -> HeldoutResult:
    """Mixture-model held-out perplexity: a posterior over the explaining
    component (including the fresh-component slot) is computed from the
    estimation part, and the scoring part is scored under the resulting
    mixture of smoothed component word distributions (the fresh slot
    contributes the uniform 1/V)."""
    if snap.K < 1:
        raise EvaluationError("model has no components")
    hyper = DpmmHyper(alpha=snap.alpha, dcm=DcmHyper(beta=snap.beta, vocab_size=snap.vocab_size))
    beta, V = snap.beta, snap.vocab_size
    denom = np.array([s.n_k + V * beta for s in snap.comp_stats])
    total_ll = 0.0
    total_tokens = 0
    scored = 0
    for part_a, part_b in split.pairs:
        if part_b.length == 0:
            continue
        q = component_log_posterior(part_a, snap.comp_doc_mass, snap.comp_stats, hyper)
        for w, c in zip(part_b.words.tolist(), part_b.counts.tolist()):
            per_comp = np.array([s.n_kw.get(w, 0.0) + beta for s in snap.comp_stats]) / denom
            p = float(q[:-1] @ per_comp) + float(q[-1]) / V
            total_ll += c * math.log(p)
        total_tokens += part_b.length
        scored += 1
    if scored == 0:
        raise EvaluationError("no evaluable documents")
    ppx = perplexity_from_loglik(total_ll, total_tokens)
    return HeldoutResult(ppx, scored, split.n_skipped, total_tokens)


def heldout_mixed_membership(snap: HdpSnapshot, split: HeldoutSplit) -> HeldoutResult:
    """Topic-model held-out perplexity: topics are frozen, document-topic
    counts are fit on the estimation part by deterministic local passes, and
    the scoring part is scored under the smoothed mixture of topic word
    distributions."""
    if snap.K < 1:
        raise EvaluationError("model has no topics")
    state = snap.to_state()
    hyper = HdpHyper(a=snap.a, alpha0=snap.alpha0, beta=snap.beta)
    word_probs = (state.N_kw + snap.beta) / (state.N_k + snap.vocab_size * snap.beta)[:, None]
    total_ll = 0.0
    total_tokens = 0
    scored = 0
    for part_a, part_b in split.pairs:
        if part_b.length == 0:
            continue
        counts = fold_in_document(part_a, state, hyper)
        theta = doc_topic_proportions(counts, state, hyper)
        for w, c in zip(part_b.words.tolist(), part_b.counts.tolist()):
            total_ll += c * math.log(float(theta @ word_probs[:, w]))
        total_tokens += part_b.length
        scored += 1
    if scored == 0:
        raise EvaluationError("no evaluable documents")
    ppx = perplexity_from_loglik(total_ll, total_tokens)
    return HeldoutResult(ppx, scored, split.n_skipped, total_tokens)


def _format_value(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_metrics(records: Iterable[MetricsRecord], stream: IO[str]) -> None:
    """CSV with a fixed header, one row per record, LF line endings, floats
    in shortest round-trip form."""
    stream.write(CSV_HEADER + "\n")
    for rec in records:
        row = [rec.run_id, rec.algorithm, rec.iteration, rec.docs_processed,
               rec.wall_clock_s, rec.K, rec.heldout_perplexity, rec.seed]
        stream.write(",".join(_format_value(v) for v in row) + "\n")


def read_metrics(stream: IO[str]) -> list[MetricsRecord]:
    header = stream.readline().rstrip("\n")
    if header != CSV_HEADER:
        raise ValueError(f"unexpected metrics header {header!r}")
    types = {f.name: f.type for f in fields(MetricsRecord)}
    names = CSV_HEADER.split(",")
    out = []
    for line in stream:
        line = line.rstrip("\n")
        if not line:
            continue
        values = line.split(",")
        kwargs = {}
        for name, raw in zip(names, values):
            t = types[name]
            kwargs[name] = int(raw) if t == "int" else float(raw) if t == "float" else raw
        out.append(MetricsRecord(**kwargs))
    return out
