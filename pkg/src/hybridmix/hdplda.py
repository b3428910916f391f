"""Stochastic collapsed inference for topic models with a shared global
topic set: a truncation-free engine that hybridizes every token update and
can instantiate topics on the fly (mode ``hcsvb0``), plus two fixed-size
baselines: plain stochastic collapsed variational LDA (``scvb0``) and the
same stick-weighted machinery frozen at a fixed truncation (``pcsvb0``).

Global expected counts are updated by stochastic averaging: after each
minibatch the topic-word counts move toward the batch statistics rescaled to
corpus size, with a Robbins-Monro step size. Topic weights come from a
point-estimate stick-breaking construction over per-topic usage masses, so a
remainder weight is always available to price the birth of a new topic.

The global state is single-writer per step. Batch statistics are merged in
document order, so results do not depend on how the per-document local
passes would be scheduled.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .corpus import Corpus, Document
from .hybrid import hybrid_update, truncated_weights

MODE_HCSVB0 = "hcsvb0"
MODE_SCVB0 = "scvb0"
MODE_PCSVB0 = "pcsvb0"
FIXED_MODES = (MODE_SCVB0, MODE_PCSVB0)

DEFAULT_BURN_IN_PASSES = 5
DEFAULT_TOPIC_PRUNE_THRESHOLD = 1e-3


@dataclass(frozen=True)
class HdpHyper:
    """Document concentration a, top-level stick concentration alpha0,
    topic-word smoothing beta, and the stochastic schedule (tau0, kappa,
    batch_size)."""

    a: float = 1.0
    alpha0: float = 1.0
    beta: float = 0.01
    tau0: float = 64.0
    kappa: float = 0.6
    batch_size: int = 60

    def __post_init__(self):
        if self.a <= 0 or self.alpha0 <= 0 or self.beta <= 0:
            raise ValueError("a, alpha0 and beta must be positive")
        if not 0.5 < self.kappa <= 1.0:
            raise ValueError(f"kappa must lie in (0.5, 1], got {self.kappa}")
        if self.tau0 < 0:
            raise ValueError(f"tau0 must be nonnegative, got {self.tau0}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")


@dataclass
class StepReport:
    t: int
    k_before: int
    k_after: int
    n_births: int
    n_pruned: int
    seconds: float


class HdpState:
    """Global statistics: topic-word expected counts N_kw with row sums N_k,
    per-topic document-usage masses m, and the stick weights (pi, pi_rest)
    derived from m. The step counter t drives the learning-rate schedule."""

    def __init__(self, vocab_size: int, n_docs_total: int, seed: int):
        self.vocab_size = vocab_size
        self.n_docs_total = n_docs_total
        self.rng = np.random.default_rng(seed)
        self.N_kw = np.zeros((0, vocab_size))
        self.N_k = np.zeros(0)
        self.m = np.zeros(0)
        self.pi = np.zeros(0)
        self.pi_rest = 1.0
        self.t = 0
        self.fixed_k = False

    @property
    def K(self) -> int:
        return self.N_kw.shape[0]


def init_hdp_state(vocab_size: int, n_docs_total: int, seed: int) -> HdpState:
    """Truncation-free starting state: no topics, all stick mass in the
    remainder."""
    return HdpState(vocab_size, n_docs_total, seed)


def init_fixed_state(
    vocab_size: int,
    n_docs_total: int,
    n_topics: int,
    total_tokens: int,
    seed: int,
    mode: str = MODE_SCVB0,
    hyper: HdpHyper | None = None,
) -> HdpState:
    """Fixed-size starting state with randomly perturbed topic-word counts
    (symmetry breaking) scaled to the corpus token total. ``scvb0`` freezes
    uniform topic weights; ``pcsvb0`` maintains stick weights over the fixed
    topic set."""
    if n_topics < 1:
        raise ValueError("n_topics must be >= 1")
    state = HdpState(vocab_size, n_docs_total, seed)
    state.fixed_k = True
    init = state.rng.random((n_topics, vocab_size)) + 1e-2
    init *= total_tokens / init.sum()
    state.N_kw = init
    state.N_k = init.sum(axis=1)
    state.m = np.full(n_topics, n_docs_total / n_topics)
    if mode == MODE_SCVB0:
        state.pi = np.full(n_topics, 1.0 / n_topics)
        state.pi_rest = 0.0
    else:
        update_stick_weights(state, hyper if hyper is not None else HdpHyper())
    return state


def step_size(t: int, hyper: HdpHyper) -> float:
    """Robbins-Monro schedule (tau0 + t)^(-kappa); infinite at the undefined
    tau0 = t = 0 point (callers cap the applied rate at one)."""
    base = hyper.tau0 + t
    if base == 0:
        return float("inf")
    return float(base ** (-hyper.kappa))


def update_stick_weights(state: HdpState, hyper: HdpHyper) -> None:
    """Point-estimate stick weights from the usage masses.

    Topics are put in size-biased (descending m) order; each stick fraction
    is the posterior-mean Beta estimate

        vbar_r = (1 + m_(r)) / (1 + alpha0 + sum_{l >= r} m_(l))

    and pi is the usual stick product, with the unbroken remainder kept as
    pi_rest. The weights telescope to exactly 1 for any m >= 0.
    """
    K = state.K
    if K == 0:
        state.pi = np.zeros(0)
        state.pi_rest = 1.0
        return
    order = np.argsort(-state.m, kind="stable")
    m_sorted = state.m[order]
    tail = np.cumsum(m_sorted[::-1])[::-1]  # tail[r] = sum_{l >= r} m_sorted[l]
    vbar = (1.0 + m_sorted) / (1.0 + hyper.alpha0 + tail)
    stick_left = np.concatenate(([1.0], np.cumprod(1.0 - vbar)))
    pi_sorted = vbar * stick_left[:-1]
    pi = np.empty(K)
    pi[order] = pi_sorted
    state.pi = pi
    state.pi_rest = float(stick_left[-1])


def _topic_word_term(state: HdpState, word_id: int, beta: float) -> np.ndarray:
    return (state.N_kw[:, word_id] + beta) / (state.N_k + state.vocab_size * beta)


def token_responsibilities(
    word_id: int,
    doc_counts: np.ndarray,
    state: HdpState,
    hyper: HdpHyper,
) -> np.ndarray:
    """K+1 responsibility vector for one token of type ``word_id``, given
    document-topic counts that exclude this token's own contribution. The
    last slot prices a brand-new topic: remainder stick mass times the
    uniform word probability."""
    prior = doc_counts + hyper.a * state.pi
    weights = prior * _topic_word_term(state, word_id, hyper.beta)
    new = hyper.a * state.pi_rest / state.vocab_size
    vec = np.concatenate((weights, [new]))
    return vec / vec.sum()


def token_responsibilities_fixed(
    word_id: int,
    doc_counts: np.ndarray,
    state: HdpState,
    hyper: HdpHyper,
) -> np.ndarray:
    """Fixed-size variant: no new-topic slot. The document prior is
    a * pi_k, which for ``scvb0`` states (uniform frozen pi) reduces to the
    symmetric a/K prior of plain LDA."""
    weights = (doc_counts + hyper.a * state.pi) * _topic_word_term(state, word_id, hyper.beta)
    return weights / weights.sum()


def hybrid_token_update(phi: np.ndarray, rng: np.random.Generator):
    """Same construction as the single-membership hybrid update, applied to
    one token's K+1 responsibility vector."""
    return hybrid_update(phi, rng)


def _grow_one_topic(state: HdpState, hyper: HdpHyper) -> int:
    """Add one empty topic row and refresh the sticks so the newborn gets a
    usable weight immediately (its committed mass reaches the global counts
    at the end of the minibatch)."""
    state.N_kw = np.vstack([state.N_kw, np.zeros((1, state.vocab_size))])
    state.N_k = np.append(state.N_k, 0.0)
    state.m = np.append(state.m, 0.0)
    update_stick_weights(state, hyper)
    return state.K - 1


def _pad(vec: np.ndarray, k: int) -> np.ndarray:
    if vec.size == k:
        return vec
    out = np.zeros(k)
    out[: vec.size] = vec
    return out


def _document_local_pass(
    doc: Document,
    state: HdpState,
    hyper: HdpHyper,
    mode: str,
    rng: np.random.Generator,
    burn_in_passes: int,
    batch_word_stats: list,
):
    """Local inference for one document: repeated passes over its word types
    maintaining fractional document-topic counts; in ``hcsvb0`` mode every
    type update is hybridized, but only the final (committed) pass may birth
    a topic; transient burn-in responsibilities fall back to the truncated
    branch. Appends (word_id, count, gamma) triples of the committed pass to
    batch_word_stats and returns the committed document-topic counts."""
    words = doc.words.tolist()
    counts = doc.counts.tolist()
    gammas: list[np.ndarray] = [np.zeros(state.K) for _ in words]
    doc_counts = np.zeros(state.K)
    for p in range(burn_in_passes):
        final = p == burn_in_passes - 1
        for idx, (w, c) in enumerate(zip(words, counts)):
            doc_counts = _pad(doc_counts, state.K)
            g_old = _pad(gammas[idx], state.K)
            doc_counts -= c * g_old
            if mode == MODE_HCSVB0:
                phi = token_responsibilities(w, doc_counts, state, hyper)
                update = hybrid_token_update(phi, rng)
                if update.is_new:
                    if final:
                        k_new = _grow_one_topic(state, hyper)
                        doc_counts = _pad(doc_counts, state.K)
                        g = np.zeros(state.K)
                        g[k_new] = 1.0
                    elif state.K > 0:
                        g = truncated_weights(phi)
                    else:
                        g = np.zeros(0)
                else:
                    g = update.weights
            else:
                g = token_responsibilities_fixed(w, doc_counts, state, hyper)
            gammas[idx] = g
            doc_counts[: g.size] += c * g
    committed = np.zeros(state.K)
    for (w, c), g in zip(zip(words, counts), gammas):
        g = _pad(g, state.K)
        committed += c * g
        batch_word_stats.append((w, c, g))
    return committed


def minibatch_step(
    state: HdpState,
    batch: list[Document],
    hyper: HdpHyper,
    mode: str = MODE_HCSVB0,
    rng: np.random.Generator | None = None,
    burn_in_passes: int = DEFAULT_BURN_IN_PASSES,
    prune_threshold: float = DEFAULT_TOPIC_PRUNE_THRESHOLD,
) -> StepReport:
    """One stochastic step: local passes over every batch document, then the
    global statistics move toward the corpus-rescaled batch statistics,

        N_kw <- (1 - rho_t) N_kw + rho_t (D/|B|) S_kw,

    usage masses are updated the same way from per-document topic usage
    (each document contributes its topic fractions, total mass one), sticks
    are refreshed, and (in the truncation-free mode) dead topics pruned.
    """
    if not batch:
        raise ValueError("minibatch must contain at least one document")
    if mode not in (MODE_HCSVB0, MODE_SCVB0, MODE_PCSVB0):
        raise ValueError(f"unknown mode {mode!r}")
    if mode in FIXED_MODES and not state.fixed_k:
        raise ValueError(f"{mode} requires a fixed-size state (init_fixed_state)")
    rng = rng if rng is not None else state.rng
    t0 = time.perf_counter()
    k_before = state.K

    batch_word_stats: list = []
    usage = np.zeros(state.K)
    for doc in batch:
        committed = _document_local_pass(
            doc, state, hyper, mode, rng, burn_in_passes, batch_word_stats
        )
        usage = _pad(usage, state.K)
        usage += committed / doc.length

    n_births = state.K - k_before
    S = np.zeros((state.K, state.vocab_size))
    for w, c, g in batch_word_stats:
        S[: g.size, w] += c * g

    # the schedule is used as-is but capped so the global move stays a
    # convex combination (tau0 < 1 would start above one)
    rho = min(1.0, step_size(state.t, hyper))
    scale = state.n_docs_total / len(batch)
    state.N_kw = (1.0 - rho) * state.N_kw + rho * scale * S
    state.N_k = state.N_kw.sum(axis=1)
    state.m = (1.0 - rho) * state.m + rho * scale * _pad(usage, state.K)
    if mode != MODE_SCVB0:
        update_stick_weights(state, hyper)
    n_pruned = 0
    if mode == MODE_HCSVB0:
        n_pruned = prune_topics(state, hyper, prune_threshold)
    state.t += 1
    return StepReport(state.t, k_before, state.K, n_births, n_pruned, time.perf_counter() - t0)


def prune_topics(state: HdpState, hyper: HdpHyper, threshold: float = DEFAULT_TOPIC_PRUNE_THRESHOLD) -> int:
    """Delete topics whose usage mass fell below the threshold and refresh
    the sticks; a populated model keeps at least its largest topic."""
    K = state.K
    if K == 0:
        return 0
    keep = state.m >= threshold
    if not keep.any():
        keep[int(np.argmax(state.m))] = True
    n_pruned = int(K - keep.sum())
    if n_pruned == 0:
        return 0
    state.N_kw = state.N_kw[keep]
    state.N_k = state.N_k[keep]
    state.m = state.m[keep]
    update_stick_weights(state, hyper)
    return n_pruned


def fold_in_document(
    doc: Document,
    state: HdpState,
    hyper: HdpHyper,
    tol: float = 1e-6,
    max_passes: int = 100,
) -> np.ndarray:
    """Deterministic fixed-topic local inference for a held-out document: no
    topic birth, no sampling, no global updates, just soft passes until the
    document-topic counts stop moving. Returns the converged counts."""
    words = doc.words.tolist()
    counts = doc.counts.tolist()
    gammas = [np.zeros(state.K) for _ in words]
    doc_counts = np.zeros(state.K)
    for _ in range(max_passes):
        prev = doc_counts.copy()
        for idx, (w, c) in enumerate(zip(words, counts)):
            doc_counts -= c * gammas[idx]
            g = token_responsibilities_fixed(w, doc_counts, state, hyper)
            gammas[idx] = g
            doc_counts += c * g
        if np.max(np.abs(doc_counts - prev)) < tol:
            break
    return doc_counts


def doc_topic_proportions(doc_counts: np.ndarray, state: HdpState, hyper: HdpHyper) -> np.ndarray:
    """Smoothed document-topic proportions theta ~ (n_dk + a * pi_k),
    normalized over the instantiated topics."""
    theta = doc_counts + hyper.a * state.pi
    return theta / theta.sum()


def generate_synthetic_lda(
    k_true: int,
    n_docs: int,
    vocab_size: int,
    doc_length: int,
    alpha: float,
    beta_true: float,
    seed: int,
) -> tuple[Corpus, np.ndarray]:
    """Mixed-membership analog of the single-membership generator: each
    document draws its own topic proportions from Dir(alpha/K) and its tokens
    from the per-topic word distributions. Returns the corpus and the true
    document-topic proportions."""
    if min(k_true, n_docs, vocab_size, doc_length) < 1 or alpha <= 0 or beta_true <= 0:
        raise ValueError("all generator parameters must be positive")
    rng = np.random.default_rng(seed)
    topics = rng.dirichlet(np.full(vocab_size, beta_true), size=k_true)
    topics = np.clip(topics, 1e-300, None)
    topics /= topics.sum(axis=1, keepdims=True)
    theta = rng.dirichlet(np.full(k_true, alpha / k_true), size=n_docs)
    docs = []
    for i in range(n_docs):
        per_topic = rng.multinomial(doc_length, theta[i])
        counts = np.zeros(vocab_size, dtype=np.int64)
        for k in np.nonzero(per_topic)[0]:
            counts += rng.multinomial(per_topic[k], topics[k])
        words = np.nonzero(counts)[0]
        docs.append(Document(i, words, counts[words]))
    return Corpus(vocab_size, docs), theta
