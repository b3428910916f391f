"""Estimator wrappers around the inference engines, following the
scikit-learn protocol (constructor holds hyperparameters, ``fit`` takes a
corpus or a document-term count matrix, fitted attributes carry a trailing
underscore) so the models compose with the wider ecosystem.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from . import dpmm, hdplda
from .corpus import as_corpus
from .dcm import DcmHyper
from .evaluation import heldout_single_membership, heldout_mixed_membership, split_heldout
from .snapshot import snapshot_hdp


def _responsibility_matrix(state: dpmm.DpmmState) -> np.ndarray:
    out = np.zeros((state.n_docs, state.K))
    for i, row in enumerate(state.gamma):
        out[i, : row.size] = row
    return out


class _MixtureBase(BaseEstimator):
    """Shared surface of the single-membership engines."""

    def _run(self, corpus):  # pragma: no cover - overridden
        raise NotImplementedError

    def fit(self, X, y=None):
        corpus = as_corpus(X)
        self.vocab_size_ = corpus.vocab_size
        hyper = dpmm.DpmmHyper(self.alpha, DcmHyper(self.beta, corpus.vocab_size))
        state = self._run(corpus, hyper)
        self._hyper = hyper
        self.n_components_ = state.K
        self.component_doc_mass_ = np.asarray(state.comp_doc_mass)
        self.component_stats_ = state.comp_stats
        self.responsibilities_ = _responsibility_matrix(state)
        self.labels_ = self.responsibilities_.argmax(axis=1)
        return self

    def to_snapshot(self):
        self._check_fitted()
        from .snapshot import DpmmSnapshot

        return DpmmSnapshot(
            alpha=self.alpha,
            beta=self.beta,
            vocab_size=self.vocab_size_,
            comp_doc_mass=self.component_doc_mass_.tolist(),
            comp_stats=self.component_stats_,
        )

    def _check_fitted(self):
        if not hasattr(self, "n_components_"):
            raise RuntimeError("estimator is not fitted")

    def predict_proba(self, X) -> np.ndarray:
        """Posterior over components for each document, final column being
        the fresh-component slot."""
        self._check_fitted()
        corpus = as_corpus(X, vocab_size=self.vocab_size_)
        out = np.empty((corpus.n_docs, self.n_components_ + 1))
        for i, doc in enumerate(corpus.docs):
            out[i] = dpmm.component_log_posterior(
                doc, self.component_doc_mass_, self.component_stats_, self._hyper
            )
        return out

    def predict(self, X) -> np.ndarray:
        """Most probable instantiated component per document."""
        proba = self.predict_proba(X)
        return proba[:, :-1].argmax(axis=1)

    def perplexity(self, X, estimation_fraction: float = 0.7, seed: int = 0) -> float:
        self._check_fitted()
        corpus = as_corpus(X, vocab_size=self.vocab_size_)
        split = split_heldout(corpus, estimation_fraction, seed)
        return heldout_single_membership(self.to_snapshot(), split).perplexity

    def score(self, X, y=None) -> float:
        """Mean held-out per-token log likelihood (higher is better)."""
        return -float(np.log(self.perplexity(X)))


class HybridCVB0Mixture(_MixtureBase):
    """Truncation-free mixture fit by hybrid soft/sampling updates, starting
    from zero components."""

    def __init__(self, alpha=1.0, beta=0.1, n_sweeps=50, prune_threshold=1e-3, random_state=0):
        self.alpha = alpha
        self.beta = beta
        self.n_sweeps = n_sweeps
        self.prune_threshold = prune_threshold
        self.random_state = random_state

    def _run(self, corpus, hyper):
        state = dpmm.init_state(corpus, self.random_state)
        for _ in range(self.n_sweeps):
            dpmm.hcvb0_sweep(state, hyper, prune_threshold=self.prune_threshold)
        return state


class CollapsedGibbsMixture(_MixtureBase):
    """Collapsed Gibbs sampler over hard assignments, starting from zero
    components; ``labels_`` hold the final sampled assignment."""

    def __init__(self, alpha=1.0, beta=0.1, n_sweeps=50, random_state=0):
        self.alpha = alpha
        self.beta = beta
        self.n_sweeps = n_sweeps
        self.random_state = random_state

    def _run(self, corpus, hyper):
        state = dpmm.init_state(corpus, self.random_state, hard=True)
        for _ in range(self.n_sweeps):
            dpmm.cgs_sweep(state, hyper)
        return state


class TruncatedCVB0Mixture(_MixtureBase):
    """Fixed-size soft baseline: the component count is chosen up front and
    never changes."""

    def __init__(self, n_components=40, alpha=1.0, beta=0.1, n_sweeps=50, random_state=0):
        self.n_components = n_components
        self.alpha = alpha
        self.beta = beta
        self.n_sweeps = n_sweeps
        self.random_state = random_state

    def _run(self, corpus, hyper):
        state = dpmm.init_truncated_state(corpus, self.n_components, self.random_state)
        for _ in range(self.n_sweeps):
            dpmm.tcvb0_sweep(state, hyper)
        return state


def iter_minibatches(n_docs: int, batch_size: int, n_steps: int, rng: np.random.Generator):
    """Seeded shuffled cycling over document indices in batch-size chunks;
    reshuffles at every epoch boundary."""
    order = rng.permutation(n_docs)
    pos = 0
    for _ in range(n_steps):
        if pos >= n_docs:
            order = rng.permutation(n_docs)
            pos = 0
        yield order[pos : pos + batch_size].tolist()
        pos += batch_size


class _TopicModelBase(BaseEstimator):
    """Shared surface of the stochastic topic-model engines."""

    _mode = None  # set by subclasses

    def _init_state(self, corpus):  # pragma: no cover - overridden
        raise NotImplementedError

    def _hdp_hyper(self) -> hdplda.HdpHyper:
        return hdplda.HdpHyper(
            a=self.a, alpha0=self.alpha0, beta=self.beta,
            tau0=self.tau0, kappa=self.kappa, batch_size=self.batch_size,
        )

    def fit(self, X, y=None):
        corpus = as_corpus(X)
        self.vocab_size_ = corpus.vocab_size
        hyper = self._hdp_hyper()
        state = self._init_state(corpus)
        batch_rng = np.random.default_rng(self.random_state + 1)
        for idx in iter_minibatches(corpus.n_docs, self.batch_size, self.n_steps, batch_rng):
            batch = [corpus.docs[i] for i in idx]
            hdplda.minibatch_step(
                state, batch, hyper, mode=self._mode,
                burn_in_passes=self.burn_in_passes,
                prune_threshold=getattr(self, "prune_threshold", hdplda.DEFAULT_TOPIC_PRUNE_THRESHOLD),
            )
        self._hyper = hyper
        self._state = state
        self.n_topics_ = state.K
        self.topic_word_ = state.N_kw.copy()
        self.topic_weights_ = state.pi.copy()
        self.stick_rest_ = state.pi_rest
        return self

    def _check_fitted(self):
        if not hasattr(self, "n_topics_"):
            raise RuntimeError("estimator is not fitted")

    def to_snapshot(self):
        self._check_fitted()
        return snapshot_hdp(self._state, self._hyper)

    def transform(self, X) -> np.ndarray:
        """Document-topic proportions by frozen-topic fold-in."""
        self._check_fitted()
        corpus = as_corpus(X, vocab_size=self.vocab_size_)
        out = np.empty((corpus.n_docs, self.n_topics_))
        for i, doc in enumerate(corpus.docs):
            counts = hdplda.fold_in_document(doc, self._state, self._hyper)
            out[i] = hdplda.doc_topic_proportions(counts, self._state, self._hyper)
        return out

    def perplexity(self, X, estimation_fraction: float = 0.7, seed: int = 0) -> float:
        self._check_fitted()
        corpus = as_corpus(X, vocab_size=self.vocab_size_)
        split = split_heldout(corpus, estimation_fraction, seed)
        return heldout_mixed_membership(self.to_snapshot(), split).perplexity

    def score(self, X, y=None) -> float:
        return -float(np.log(self.perplexity(X)))


class HybridStochasticHdpLda(_TopicModelBase):
    """Truncation-free stochastic topic model: hybridized token updates can
    instantiate topics as the data demands, starting from zero topics."""

    _mode = hdplda.MODE_HCSVB0

    def __init__(self, a=1.0, alpha0=1.0, beta=0.01, tau0=64.0, kappa=0.6,
                 batch_size=60, n_steps=200, burn_in_passes=5,
                 prune_threshold=1e-3, random_state=0):
        self.a = a
        self.alpha0 = alpha0
        self.beta = beta
        self.tau0 = tau0
        self.kappa = kappa
        self.batch_size = batch_size
        self.n_steps = n_steps
        self.burn_in_passes = burn_in_passes
        self.prune_threshold = prune_threshold
        self.random_state = random_state

    def _init_state(self, corpus):
        return hdplda.init_hdp_state(corpus.vocab_size, corpus.n_docs, self.random_state)


class StochasticCVB0Lda(_TopicModelBase):
    """Fixed-topic stochastic collapsed variational LDA baseline with a
    symmetric document prior."""

    _mode = hdplda.MODE_SCVB0

    def __init__(self, n_topics=40, a=1.0, alpha0=1.0, beta=0.01, tau0=64.0,
                 kappa=0.6, batch_size=60, n_steps=200, burn_in_passes=5,
                 random_state=0):
        self.n_topics = n_topics
        self.a = a
        self.alpha0 = alpha0
        self.beta = beta
        self.tau0 = tau0
        self.kappa = kappa
        self.batch_size = batch_size
        self.n_steps = n_steps
        self.burn_in_passes = burn_in_passes
        self.random_state = random_state

    def _init_state(self, corpus):
        return hdplda.init_fixed_state(
            corpus.vocab_size, corpus.n_docs, self.n_topics,
            corpus.total_tokens, self.random_state, mode=self._mode,
            hyper=self._hdp_hyper(),
        )


class TruncatedStochasticHdpLda(StochasticCVB0Lda):
    """Same machinery as the truncation-free engine (stick weights and all)
    but frozen at a fixed truncation: no new-topic slot, no births."""

    _mode = hdplda.MODE_PCSVB0

    def __init__(self, n_topics=300, a=1.0, alpha0=1.0, beta=0.01, tau0=64.0,
                 kappa=0.6, batch_size=60, n_steps=200, burn_in_passes=5,
                 random_state=0):
        super().__init__(
            n_topics=n_topics, a=a, alpha0=alpha0, beta=beta, tau0=tau0,
            kappa=kappa, batch_size=batch_size, n_steps=n_steps,
            burn_in_passes=burn_in_passes, random_state=random_state,
        )
