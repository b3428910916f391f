import numpy as np
import pytest
from sklearn.base import clone

from hybridmix.dpmm import generate_synthetic
from hybridmix.estimators import (
    CollapsedGibbsMixture,
    HybridCVB0Mixture,
    HybridStochasticHdpLda,
    StochasticCVB0Lda,
    TruncatedCVB0Mixture,
    TruncatedStochasticHdpLda,
    iter_minibatches,
)
from hybridmix.hdplda import generate_synthetic_lda


@pytest.fixture(scope="module")
def mixture_data():
    return generate_synthetic(3, 90, 20, 15, 15.0, 0.02, seed=0)


@pytest.fixture(scope="module")
def lda_data():
    return generate_synthetic_lda(3, 120, 25, 20, alpha=2.0, beta_true=0.02, seed=0)


class TestSklearnProtocol:
    @pytest.mark.parametrize("est", [
        HybridCVB0Mixture(),
        CollapsedGibbsMixture(),
        TruncatedCVB0Mixture(),
        HybridStochasticHdpLda(),
        StochasticCVB0Lda(),
        TruncatedStochasticHdpLda(),
    ])
    def test_get_set_params_and_clone(self, est):
        params = est.get_params()
        assert "random_state" in params
        other = clone(est)
        assert other.get_params() == params
        est.set_params(random_state=99)
        assert est.get_params()["random_state"] == 99


class TestMixtureEstimators:
    def test_hybrid_fit_discovers_components(self, mixture_data):
        corpus, labels = mixture_data
        est = HybridCVB0Mixture(n_sweeps=25, random_state=1).fit(corpus)
        assert est.n_components_ == 3
        assert est.labels_.shape == (90,)
        assert est.responsibilities_.shape == (90, 3)
        np.testing.assert_allclose(est.responsibilities_.sum(axis=1), 1.0, atol=1e-9)

    def test_predict_consistent_with_training_labels(self, mixture_data):
        corpus, _ = mixture_data
        est = HybridCVB0Mixture(n_sweeps=25, random_state=1).fit(corpus)
        predictions = est.predict(corpus)
        agreement = (predictions == est.labels_).mean()
        assert agreement > 0.95

    def test_predict_proba_rows_normalized(self, mixture_data):
        corpus, _ = mixture_data
        est = HybridCVB0Mixture(n_sweeps=10, random_state=1).fit(corpus)
        proba = est.predict_proba(corpus.docs[:10])
        assert proba.shape == (10, est.n_components_ + 1)
        np.testing.assert_allclose(proba.sum(axis=1), 1.0, atol=1e-12)

    def test_gibbs_estimator(self, mixture_data):
        corpus, _ = mixture_data
        est = CollapsedGibbsMixture(n_sweeps=25, random_state=2).fit(corpus)
        assert est.n_components_ == 3
        # hard assignments: every responsibility row is one-hot
        assert set(np.unique(est.responsibilities_)) <= {0.0, 1.0}

    def test_truncated_estimator_keeps_size(self, mixture_data):
        corpus, _ = mixture_data
        est = TruncatedCVB0Mixture(n_components=6, n_sweeps=8, random_state=0).fit(corpus)
        assert est.n_components_ == 6

    def test_count_matrix_input(self, mixture_data):
        corpus, _ = mixture_data
        X = np.zeros((30, corpus.vocab_size), dtype=int)
        for i, doc in enumerate(corpus.docs[:30]):
            X[i, doc.words] = doc.counts
        est = HybridCVB0Mixture(n_sweeps=8, random_state=0).fit(X)
        assert est.vocab_size_ == corpus.vocab_size
        assert est.n_components_ >= 1

    def test_perplexity_and_score(self, mixture_data):
        corpus, _ = mixture_data
        est = HybridCVB0Mixture(n_sweeps=15, random_state=1).fit(corpus)
        ppx = est.perplexity(corpus.docs[:20])
        assert 1.0 < ppx < corpus.vocab_size
        assert est.score(corpus.docs[:20]) == pytest.approx(-np.log(ppx))

    def test_unfitted_raises(self):
        with pytest.raises(RuntimeError):
            HybridCVB0Mixture().predict_proba(np.array([[1, 2]]))


class TestTopicModelEstimators:
    def test_hybrid_hdp_grows_topics(self, lda_data):
        corpus, _ = lda_data
        est = HybridStochasticHdpLda(batch_size=20, n_steps=60, tau0=16.0, random_state=3).fit(corpus)
        assert est.n_topics_ >= 2
        assert est.topic_word_.shape == (est.n_topics_, 25)
        assert est.topic_weights_.sum() + est.stick_rest_ == pytest.approx(1.0, abs=1e-12)

    def test_transform_rows_sum_to_one(self, lda_data):
        corpus, _ = lda_data
        est = StochasticCVB0Lda(n_topics=3, batch_size=20, n_steps=40, random_state=0).fit(corpus)
        theta = est.transform(corpus.docs[:12])
        assert theta.shape == (12, 3)
        np.testing.assert_allclose(theta.sum(axis=1), 1.0, atol=1e-12)

    def test_truncated_variant_fixed_size(self, lda_data):
        corpus, _ = lda_data
        est = TruncatedStochasticHdpLda(n_topics=8, batch_size=20, n_steps=30, random_state=0).fit(corpus)
        assert est.n_topics_ == 8

    def test_perplexity_sane(self, lda_data):
        corpus, _ = lda_data
        est = StochasticCVB0Lda(n_topics=3, batch_size=20, n_steps=60, random_state=1).fit(corpus)
        ppx = est.perplexity(corpus.docs[:25])
        assert 1.0 < ppx < corpus.vocab_size


class TestIterMinibatches:
    def test_covers_corpus_each_epoch(self):
        rng = np.random.default_rng(0)
        batches = list(iter_minibatches(10, 3, 8, rng))
        assert len(batches) == 8
        first_epoch = [i for b in batches[:4] for i in b]
        assert sorted(first_epoch) == list(range(10))

    def test_deterministic(self):
        a = list(iter_minibatches(20, 6, 10, np.random.default_rng(5)))
        b = list(iter_minibatches(20, 6, 10, np.random.default_rng(5)))
        assert a == b
