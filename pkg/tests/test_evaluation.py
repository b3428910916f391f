import io
import math

import numpy as np
import pytest

from hybridmix.corpus import Document
from hybridmix.dcm import ComponentStats
from hybridmix.evaluation import (
    CSV_HEADER,
    EvaluationError,
    HeldoutSplit,
    MetricsRecord,
    emit_metrics,
    heldout_mixed_membership,
    heldout_single_membership,
    perplexity_from_loglik,
    read_metrics,
    split_heldout,
)
from hybridmix.snapshot import DpmmSnapshot, HdpSnapshot

from oracles import unigram_log_likelihood, urn_log_predictive


def dpmm_snapshot(comp_word_counts, comp_doc_mass, alpha=1.0, beta=0.1, vocab_size=4):
    stats = []
    for counts in comp_word_counts:
        s = ComponentStats({w: float(c) for w, c in counts.items()})
        stats.append(s)
    return DpmmSnapshot(alpha, beta, vocab_size, [float(m) for m in comp_doc_mass], stats)


def hdp_snapshot(N_kw, m, pi, pi_rest, a=1.0, alpha0=1.0, beta=0.1):
    N_kw = np.asarray(N_kw, dtype=float)
    return HdpSnapshot(
        a=a, alpha0=alpha0, beta=beta, vocab_size=N_kw.shape[1],
        n_docs_total=10, t=1, m=np.asarray(m, float),
        pi=np.asarray(pi, float), pi_rest=pi_rest, N_kw=N_kw,
    )


def pair(a_counts, b_counts):
    return (Document.from_counts(0, a_counts), Document.from_counts(0, b_counts))


class TestSplitHeldout:
    def test_short_documents_skipped_and_counted(self):
        docs = [Document.from_counts(0, {0: 1}), Document.from_counts(1, {0: 5, 1: 5})]
        split = split_heldout(docs, 0.7, seed=0)
        assert split.n_skipped == 1
        assert len(split.pairs) == 1
        a, b = split.pairs[0]
        assert a.length == 7 and b.length == 3

    def test_deterministic(self):
        docs = [Document.from_counts(i, {0: 4, 2: 6}) for i in range(5)]
        s1 = split_heldout(docs, 0.7, seed=3)
        s2 = split_heldout(docs, 0.7, seed=3)
        for (a1, b1), (a2, b2) in zip(s1.pairs, s2.pairs):
            assert a1.entries == a2.entries and b1.entries == b2.entries


class TestSingleMembership:
    def test_uniform_component_gives_vocab_perplexity(self):
        vocab_size = 100
        snap = dpmm_snapshot(
            [{w: 2.0 for w in range(vocab_size)}], [5.0], beta=0.5, vocab_size=vocab_size
        )
        split = HeldoutSplit([pair({0: 7}, {3: 2, 17: 1})], 0)
        result = heldout_single_membership(snap, split)
        assert result.perplexity == pytest.approx(vocab_size, rel=1e-12)

    def test_matches_hand_enumeration(self):
        alpha, beta, vocab_size = 0.5, 0.2, 4
        comps = [{0: 3.0, 1: 1.0}, {2: 2.0, 3: 2.0}]
        mass = [3.0, 2.0]
        snap = dpmm_snapshot(comps, mass, alpha, beta, vocab_size)
        part_a, part_b = pair({0: 2}, {0: 1, 2: 1})
        result = heldout_single_membership(snap, HeldoutSplit([(part_a, part_b)], 0))

        # independent enumeration: indicator posterior via urn products
        totals = [4.0, 4.0]
        log_q = []
        for k in range(2):
            lp = urn_log_predictive(part_a.words, part_a.counts, comps[k], totals[k], beta, vocab_size)
            log_q.append(math.log(mass[k] / (5.0 + alpha)) + lp)
        log_q.append(
            math.log(alpha / (5.0 + alpha))
            + urn_log_predictive(part_a.words, part_a.counts, {}, 0.0, beta, vocab_size)
        )
        q = np.exp(log_q - np.max(log_q))
        q /= q.sum()
        def p_word(w):
            p = q[2] / vocab_size
            for k in range(2):
                p += q[k] * (comps[k].get(w, 0.0) + beta) / (totals[k] + vocab_size * beta)
            return p
        expected = math.exp(-(math.log(p_word(0)) + math.log(p_word(2))) / 2.0)
        assert result.perplexity == pytest.approx(expected, rel=1e-10)

    def test_unigram_model_matches_unigram_perplexity(self):
        # one dominant component holding the empirical unigram counts of the
        # scoring text; the fresh-component slot carries ~1e-12 posterior, so
        # the model predictive equals the smoothed unigram distribution
        vocab_size, beta = 5, 0.01
        scale = 1e9
        counts = {0: 5.0, 1: 3.0, 2: 2.0, 3: 4.0, 4: 6.0}
        snap = dpmm_snapshot(
            [{w: c * scale for w, c in counts.items()}], [1e12], alpha=1.0,
            beta=beta, vocab_size=vocab_size,
        )
        part_b = Document.from_counts(0, {0: 2, 2: 1, 4: 3})
        split = HeldoutSplit([(Document.from_counts(0, {0: 1}), part_b)], 0)
        result = heldout_single_membership(snap, split)
        total = scale * sum(counts.values())
        probs = np.array([(counts[w] * scale + beta) / (total + vocab_size * beta)
                          for w in range(vocab_size)])
        ll = unigram_log_likelihood([part_b], probs)
        assert result.perplexity == pytest.approx(math.exp(-ll / part_b.length), rel=1e-9)

    def test_order_invariance(self):
        rng = np.random.default_rng(0)
        snap = dpmm_snapshot([{0: 2.0, 1: 1.0}, {2: 4.0}], [2.0, 3.0])
        pairs = [
            pair({int(rng.integers(0, 4)): 3}, {int(rng.integers(0, 4)): 2})
            for _ in range(10)
        ]
        forward = heldout_single_membership(snap, HeldoutSplit(list(pairs), 0))
        backward = heldout_single_membership(snap, HeldoutSplit(list(reversed(pairs)), 0))
        assert forward.perplexity == pytest.approx(backward.perplexity, rel=1e-12)

    def test_empty_model_or_split_rejected(self):
        snap = dpmm_snapshot([], [])
        with pytest.raises(EvaluationError):
            heldout_single_membership(snap, HeldoutSplit([pair({0: 1}, {1: 1})], 0))
        snap = dpmm_snapshot([{0: 1.0}], [1.0])
        with pytest.raises(EvaluationError):
            heldout_single_membership(snap, HeldoutSplit([], 3))

    def test_scoring_part_tokens_counted(self):
        snap = dpmm_snapshot([{0: 1.0}], [1.0])
        split = HeldoutSplit([pair({0: 3}, {0: 2, 1: 2})], 2)
        result = heldout_single_membership(snap, split)
        assert result.n_tokens == 4
        assert result.n_docs_scored == 1
        assert result.n_docs_skipped == 2


class TestMixedMembership:
    def test_single_topic_reduces_to_its_distribution(self):
        N_kw = [[6.0, 3.0, 1.0]]
        snap = hdp_snapshot(N_kw, m=[1.0], pi=[0.9], pi_rest=0.1, beta=0.5)
        part_b = Document.from_counts(0, {0: 1, 2: 2})
        split = HeldoutSplit([(Document.from_counts(0, {1: 2}), part_b)], 0)
        result = heldout_mixed_membership(snap, split)
        probs = (np.array(N_kw[0]) + 0.5) / (10.0 + 1.5)
        ll = math.log(probs[0]) + 2 * math.log(probs[2])
        assert result.perplexity == pytest.approx(math.exp(-ll / 3), rel=1e-10)

    def test_uniform_topics_give_vocab_perplexity(self):
        vocab_size = 8
        N_kw = np.full((3, vocab_size), 4.0)
        snap = hdp_snapshot(N_kw, m=[1.0, 1.0, 1.0], pi=[0.3, 0.3, 0.3], pi_rest=0.1)
        split = HeldoutSplit([pair({0: 4}, {5: 2})], 0)
        result = heldout_mixed_membership(snap, split)
        assert result.perplexity == pytest.approx(vocab_size, rel=1e-12)

    def test_matches_direct_scoring_given_folded_counts(self):
        from hybridmix.hdplda import HdpHyper, doc_topic_proportions, fold_in_document

        rng = np.random.default_rng(1)
        N_kw = rng.uniform(0.5, 6.0, (3, 6))
        snap = hdp_snapshot(N_kw, m=[3.0, 2.0, 1.0], pi=[0.5, 0.3, 0.1], pi_rest=0.1, beta=0.05)
        part_a, part_b = pair({0: 3, 2: 1}, {1: 2, 5: 1})
        result = heldout_mixed_membership(snap, HeldoutSplit([(part_a, part_b)], 0))

        state = snap.to_state()
        hyper = HdpHyper(a=1.0, alpha0=1.0, beta=0.05)
        theta = doc_topic_proportions(fold_in_document(part_a, state, hyper), state, hyper)
        word_probs = (N_kw + 0.05) / (N_kw.sum(axis=1) + 6 * 0.05)[:, None]
        ll = 2 * math.log(theta @ word_probs[:, 1]) + math.log(theta @ word_probs[:, 5])
        assert result.perplexity == pytest.approx(math.exp(-ll / 3), rel=1e-8)

    def test_no_topics_rejected(self):
        snap = hdp_snapshot(np.zeros((0, 4)), m=[], pi=[], pi_rest=1.0)
        with pytest.raises(EvaluationError):
            heldout_mixed_membership(snap, HeldoutSplit([pair({0: 1}, {1: 1})], 0))


class TestPerplexityHelper:
    def test_zero_loglik_gives_one(self):
        assert perplexity_from_loglik(0.0, 17) == 1.0

    def test_no_tokens_rejected(self):
        with pytest.raises(EvaluationError):
            perplexity_from_loglik(-1.0, 0)


class TestMetricsCsv:
    def test_empty_stream_header_only(self):
        buf = io.StringIO()
        emit_metrics([], buf)
        assert buf.getvalue() == CSV_HEADER + "\n"

    def test_single_record_two_lines(self):
        buf = io.StringIO()
        rec = MetricsRecord("abc", "hcvb0", 3, 1200, 0.125, 7, 431.25, 42)
        emit_metrics([rec], buf)
        lines = buf.getvalue().split("\n")
        assert len(lines) == 3 and lines[2] == ""
        assert lines[1] == "abc,hcvb0,3,1200,0.125,7,431.25,42"

    def test_round_trip_exact(self):
        records = [
            MetricsRecord("r1", "cgs", 1, 100, 0.1234567890123456, 3, 99.99999999999999, 0),
            MetricsRecord("r1", "cgs", 2, 200, 1.0 / 3.0, 4, math.pi * 100, 0),
        ]
        buf = io.StringIO()
        emit_metrics(records, buf)
        parsed = read_metrics(io.StringIO(buf.getvalue()))
        assert parsed == records

    def test_bad_header_rejected(self):
        with pytest.raises(ValueError):
            read_metrics(io.StringIO("nope\n"))
