"""Single-membership Dirichlet process mixture engines over bag-of-words
documents, all sharing one bookkeeping discipline:

  * a document's fractional contribution is subtracted from the component
    statistics before its update is computed and re-added afterwards,
  * component weights in the assignment prior are document masses (how many
    documents a component explains in expectation), while the data term uses
    expected token counts,
  * everything is computed in log space and normalized after max subtraction.

Three engines are provided: the truncation-free hybrid engine (soft updates
that occasionally instantiate a component, `hcvb0_sweep`), collapsed Gibbs
sampling (`cgs_sweep`, the hard-assignment special case), and a fixed-size
soft baseline (`tcvb0_sweep`).

A DpmmState belongs to one engine run; sweeps are inherently sequential
(each update conditions on every other document's current statistics).
Snapshots taken between sweeps may be evaluated concurrently.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .corpus import Corpus, Document
from .dcm import ComponentStats, DcmHyper, log_predictive_doc, log_predictive_empty
from .hybrid import (
    HybridUpdate,
    NEW_COMPONENT,
    TRUNCATED,
    categorical_index,
    hybrid_update,
    normalize_log_weights,
)

DEFAULT_ALPHA = 1.0
DEFAULT_BETA = 0.1
DEFAULT_PRUNE_THRESHOLD = 1e-3

# Concentration of the symmetric Dirichlet that perturbs the uniform
# responsibility rows when a fixed-size model is initialized.
TRUNCATED_INIT_CONCENTRATION = 10.0


@dataclass(frozen=True)
class DpmmHyper:
    alpha: float
    dcm: DcmHyper

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")


@dataclass
class SweepReport:
    k_before: int
    k_after: int
    n_new_components: int
    n_pruned: int
    seconds: float


class DpmmState:
    """Mutable inference state bound to a corpus.

    gamma rows are variable-length: row i holds responsibilities for the
    first len(row) components and implicit zeros beyond, which lets the
    component list grow without touching every row. A row of size zero means
    the document's contribution is currently absent from the statistics.
    """

    def __init__(self, corpus: Corpus, seed: int, hard: bool = False):
        self.docs: list[Document] = list(corpus.docs)
        self.vocab_size = corpus.vocab_size
        self.rng = np.random.default_rng(seed)
        self.comp_doc_mass: list[float] = []
        self.comp_stats: list[ComponentStats] = []
        self.gamma: list[np.ndarray] = [np.zeros(0) for _ in self.docs]
        self.assignments: np.ndarray | None = (
            np.full(len(self.docs), -1, dtype=np.int64) if hard else None
        )
        self.n_added = 0  # documents whose contribution is currently in the stats

    @property
    def K(self) -> int:
        return len(self.comp_stats)

    @property
    def n_docs(self) -> int:
        return len(self.docs)

    def total_tokens(self) -> float:
        return float(sum(s.n_k for s in self.comp_stats))


def init_state(corpus: Corpus, seed: int, hard: bool = False) -> DpmmState:
    """Empty starting state (K = 0): the first update is forced to
    instantiate a component."""
    return DpmmState(corpus, seed, hard=hard)


def init_truncated_state(corpus: Corpus, n_components: int, seed: int) -> DpmmState:
    """State with a fixed number of components and near-uniform random
    responsibility rows (symmetric-Dirichlet perturbed to break ties)."""
    if n_components < 1:
        raise ValueError("n_components must be >= 1")
    state = DpmmState(corpus, seed)
    conc = np.full(n_components, TRUNCATED_INIT_CONCENTRATION)
    state.comp_doc_mass = [0.0] * n_components
    state.comp_stats = [ComponentStats() for _ in range(n_components)]
    for i in range(state.n_docs):
        row = state.rng.dirichlet(conc) if n_components > 1 else np.ones(1)
        state.gamma[i] = row
        state.n_added += 1
    recompute_statistics(state)
    return state


def remove_contribution(state: DpmmState, i: int) -> None:
    """Subtract document i's current responsibilities from the statistics
    and clear its row; a no-op if the document was never added."""
    row = state.gamma[i]
    if row.size == 0:
        return
    doc = state.docs[i]
    for k in np.nonzero(row)[0].tolist():
        w = float(row[k])
        state.comp_stats[k].remove_doc(doc, w)
        m = state.comp_doc_mass[k] - w
        state.comp_doc_mass[k] = m if m > 0.0 else 0.0
    state.gamma[i] = np.zeros(0)
    if state.assignments is not None:
        state.assignments[i] = -1
    state.n_added -= 1


def _log_weights(
    doc: Document,
    comp_doc_mass,
    comp_stats,
    total_mass: float,
    hyper: DpmmHyper,
    include_new: bool,
) -> np.ndarray:
    """Unnormalized log weights of the component-assignment conditional:
    document-mass prior times the Polya predictive, plus (optionally) the
    concentration-weighted prior predictive for a fresh component."""
    K = len(comp_stats)
    log_denom = math.log(total_mass + hyper.alpha)
    out = np.full(K + (1 if include_new else 0), -np.inf)
    for k in range(K):
        m = comp_doc_mass[k]
        if m <= 0.0:
            continue
        out[k] = math.log(m) - log_denom + log_predictive_doc(doc, comp_stats[k], hyper.dcm)
    if include_new:
        out[K] = math.log(hyper.alpha) - log_denom + log_predictive_empty(doc, hyper.dcm)
    return out


def cvb0_responsibilities(i: int, state: DpmmState, hyper: DpmmHyper) -> np.ndarray:
    """K+1 responsibility vector for document i, which must currently have
    its contribution removed from the statistics. With K = 0 this degenerates
    to all mass on the new-component slot."""
    doc = state.docs[i]
    logw = _log_weights(
        doc, state.comp_doc_mass, state.comp_stats, float(state.n_added), hyper, include_new=True
    )
    return normalize_log_weights(logw)


def apply_update(state: DpmmState, i: int, update: HybridUpdate) -> None:
    """Write a hybrid update back into the state: either a soft K-vector row
    or a fresh one-hot component."""
    doc = state.docs[i]
    if update.is_new:
        state.comp_stats.append(ComponentStats())
        state.comp_doc_mass.append(0.0)
        k_new = state.K - 1
        row = np.zeros(state.K)
        row[k_new] = 1.0
        state.gamma[i] = row
        state.comp_stats[k_new].add_doc(doc, 1.0)
        state.comp_doc_mass[k_new] = 1.0
        if state.assignments is not None:
            state.assignments[i] = k_new
    else:
        row = np.asarray(update.weights, dtype=np.float64)
        if row.size != state.K:
            raise ValueError(f"truncated update has {row.size} entries, state has K={state.K}")
        state.gamma[i] = row
        for k in np.nonzero(row)[0].tolist():
            w = float(row[k])
            state.comp_stats[k].add_doc(doc, w)
            state.comp_doc_mass[k] += w
    state.n_added += 1


def _assign_hard(state: DpmmState, i: int, k: int) -> None:
    """Hard-assign document i to component k; k == K instantiates."""
    if k == state.K:
        apply_update(state, i, HybridUpdate(NEW_COMPONENT))
        return
    doc = state.docs[i]
    row = np.zeros(state.K)
    row[k] = 1.0
    state.gamma[i] = row
    state.comp_stats[k].add_doc(doc, 1.0)
    state.comp_doc_mass[k] += 1.0
    if state.assignments is not None:
        state.assignments[i] = k
    state.n_added += 1


def _delete_component(state: DpmmState, k: int) -> None:
    del state.comp_doc_mass[k]
    del state.comp_stats[k]
    for i, row in enumerate(state.gamma):
        if row.size > k:
            state.gamma[i] = np.delete(row, k)
    if state.assignments is not None:
        state.assignments[state.assignments > k] -= 1


def recompute_statistics(state: DpmmState) -> None:
    """Rebuild component masses and token statistics from the responsibility
    rows; run once per sweep to stop incremental-update drift."""
    K = state.K
    mass = [0.0] * K
    stats = [ComponentStats() for _ in range(K)]
    for i, row in enumerate(state.gamma):
        if row.size == 0:
            continue
        doc = state.docs[i]
        for k in np.nonzero(row)[0].tolist():
            w = float(row[k])
            mass[k] += w
            stats[k].add_doc(doc, w)
    for s in stats:
        s.recompute_total()
    state.comp_doc_mass = mass
    state.comp_stats = stats


def prune_components(state: DpmmState, threshold: float = DEFAULT_PRUNE_THRESHOLD) -> int:
    """Delete components whose document mass fell below the threshold,
    renormalize the affected rows over the survivors and rebuild statistics.
    A populated model is never emptied: if everything is below threshold the
    largest component survives."""
    K = state.K
    keep = [k for k in range(K) if state.comp_doc_mass[k] >= threshold]
    if not keep and state.n_added > 0:
        keep = [int(np.argmax(state.comp_doc_mass))]
    n_pruned = K - len(keep)
    if n_pruned == 0:
        return 0
    for i, row in enumerate(state.gamma):
        if row.size == 0:
            continue
        new_row = np.array([row[k] if k < row.size else 0.0 for k in keep])
        s = new_row.sum()
        state.gamma[i] = new_row / s if s > 0.0 else np.full(len(keep), 1.0 / len(keep))
    if state.assignments is not None:
        remap = -np.ones(K, dtype=np.int64)
        for new_k, old_k in enumerate(keep):
            remap[old_k] = new_k
        live = state.assignments >= 0
        state.assignments[live] = remap[state.assignments[live]]
    state.comp_doc_mass = [state.comp_doc_mass[k] for k in keep]
    state.comp_stats = [state.comp_stats[k] for k in keep]
    recompute_statistics(state)
    return n_pruned


def hcvb0_sweep(
    state: DpmmState,
    hyper: DpmmHyper,
    rng: np.random.Generator | None = None,
    prune_threshold: float = DEFAULT_PRUNE_THRESHOLD,
) -> SweepReport:
    """One full pass of the truncation-free hybrid engine: every document in
    seeded shuffled order gets remove -> responsibilities -> hybrid draw ->
    write-back, then low-mass components are pruned and statistics rebuilt."""
    rng = rng if rng is not None else state.rng
    t0 = time.perf_counter()
    k_before = state.K
    births = 0
    for i in rng.permutation(state.n_docs).tolist():
        remove_contribution(state, i)
        phi = cvb0_responsibilities(i, state, hyper)
        update = hybrid_update(phi, rng)
        if update.is_new:
            births += 1
        apply_update(state, i, update)
    n_pruned = prune_components(state, prune_threshold)
    if n_pruned == 0:
        recompute_statistics(state)
    return SweepReport(k_before, state.K, births, n_pruned, time.perf_counter() - t0)


def cgs_sweep(
    state: DpmmState,
    hyper: DpmmHyper,
    rng: np.random.Generator | None = None,
) -> SweepReport:
    """One collapsed Gibbs pass. With hard assignments the expected counts
    are integers and the soft responsibility formula is exactly the collapsed
    conditional, so the same weight computation is reused; components emptied
    by a removal are deleted on the spot."""
    if state.assignments is None:
        raise ValueError("cgs_sweep requires a hard-assignment state (hard=True)")
    rng = rng if rng is not None else state.rng
    t0 = time.perf_counter()
    k_before = state.K
    births = 0
    for i in rng.permutation(state.n_docs).tolist():
        k_old = int(state.assignments[i])
        remove_contribution(state, i)
        if k_old >= 0 and state.comp_doc_mass[k_old] <= 0.5:
            _delete_component(state, k_old)
        phi = cvb0_responsibilities(i, state, hyper)
        z = categorical_index(phi, rng.random())
        if z == state.K:
            births += 1
        _assign_hard(state, i, z)
    recompute_statistics(state)
    return SweepReport(k_before, state.K, births, 0, time.perf_counter() - t0)


def tcvb0_sweep(
    state: DpmmState,
    hyper: DpmmHyper,
    n_components: int | None = None,
) -> SweepReport:
    """One pass of the fixed-size soft baseline: the responsibility vector is
    restricted to the existing components (no new-component slot, nothing is
    sampled) and written back whole. The component count never changes."""
    if n_components is not None and n_components != state.K:
        raise ValueError(f"state has K={state.K}, expected truncation {n_components}")
    t0 = time.perf_counter()
    k = state.K
    for i in state.rng.permutation(state.n_docs).tolist():
        remove_contribution(state, i)
        doc = state.docs[i]
        logw = _log_weights(
            doc, state.comp_doc_mass, state.comp_stats, float(state.n_added), hyper, include_new=False
        )
        apply_update(state, i, HybridUpdate(TRUNCATED, normalize_log_weights(logw)))
    recompute_statistics(state)
    return SweepReport(k, state.K, 0, 0, time.perf_counter() - t0)


def component_log_posterior(
    doc: Document,
    comp_doc_mass,
    comp_stats,
    hyper: DpmmHyper,
) -> np.ndarray:
    """Posterior over which component explains a held-out document, with the
    K+1-th slot for a fresh component; used at prediction/evaluation time
    against full (nothing removed) statistics."""
    total = float(sum(comp_doc_mass))
    logw = _log_weights(doc, comp_doc_mass, comp_stats, total, hyper, include_new=True)
    return normalize_log_weights(logw)


def generate_synthetic(
    k_true: int,
    n_docs: int,
    vocab_size: int,
    doc_length: int,
    alpha: float,
    beta_true: float,
    seed: int,
) -> tuple[Corpus, np.ndarray]:
    """Sample a single-membership corpus: mixture weights from a symmetric
    Dirichlet with total concentration alpha, one word distribution per
    component, one component label per document, fixed document length.
    Returns the corpus and the true labels for recovery scoring."""
    if min(k_true, n_docs, vocab_size, doc_length) < 1 or alpha <= 0 or beta_true <= 0:
        raise ValueError("all generator parameters must be positive")
    rng = np.random.default_rng(seed)
    theta = rng.dirichlet(np.full(k_true, alpha / k_true))
    topics = rng.dirichlet(np.full(vocab_size, beta_true), size=k_true)
    # tiny concentrations can underflow single coordinates; keep rows proper
    topics = np.clip(topics, 1e-300, None)
    topics /= topics.sum(axis=1, keepdims=True)
    labels = rng.choice(k_true, size=n_docs, p=theta)
    docs = []
    for i in range(n_docs):
        counts = rng.multinomial(doc_length, topics[labels[i]])
        words = np.nonzero(counts)[0]
        docs.append(Document(i, words, counts[words]))
    return Corpus(vocab_size, docs), labels
