"""Dirichlet-Multinomial (Polya) data model over documents.

A component is summarized by expected token counts (fractional, because they
are accumulated from soft responsibilities). The log predictive of a document
given a component is the collapsed Dirichlet-compound-multinomial form,

    log G(n_k + V*b) - log G(n_k + L + V*b)
        + sum_w [ log G(n_kw + x_w + b) - log G(n_kw + b) ]

computed entirely with log-gamma, which is defined for the fractional counts
CVB0-style bookkeeping produces.

ComponentStats is single-writer; the predictive functions only read and may
be called concurrently while nothing is mutating the stats.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .corpus import Document

# Removals may round slightly below zero; anything worse signals a real
# bookkeeping bug and fails fast.
NEGATIVE_TOLERANCE = 1e-6


class AccountingError(RuntimeError):
    """Count removal drove a statistic below the negative tolerance."""


@dataclass(frozen=True)
class DcmHyper:
    """Symmetric per-word Dirichlet concentration and vocabulary size."""

    beta: float
    vocab_size: int

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.vocab_size < 1:
            raise ValueError(f"vocab_size must be >= 1, got {self.vocab_size}")


class ComponentStats:
    """Per-component expected token counts: sparse per-word map plus a cached
    total. The total is kept with compensated (Kahan) summation so that an
    add followed by the matching remove restores it essentially exactly.
    """

    __slots__ = ("n_kw", "n_k", "_carry")

    def __init__(self, n_kw: dict[int, float] | None = None):
        self.n_kw: dict[int, float] = dict(n_kw) if n_kw else {}
        self.n_k: float = float(sum(self.n_kw.values()))
        self._carry = 0.0

    def copy(self) -> "ComponentStats":
        c = ComponentStats()
        c.n_kw = dict(self.n_kw)
        c.n_k = self.n_k
        c._carry = self._carry
        return c

    def _accumulate_total(self, x: float) -> None:
        y = x - self._carry
        t = self.n_k + y
        self._carry = (t - self.n_k) - y
        self.n_k = t

    def add_doc(self, doc: Document, weight: float) -> None:
        if weight == 0.0:
            return
        n_kw = self.n_kw
        for w, c in zip(doc.words.tolist(), doc.counts.tolist()):
            n_kw[w] = n_kw.get(w, 0.0) + weight * c
        self._accumulate_total(weight * doc.length)

    def remove_doc(self, doc: Document, weight: float) -> None:
        if weight == 0.0:
            return
        n_kw = self.n_kw
        for w, c in zip(doc.words.tolist(), doc.counts.tolist()):
            v = n_kw[w] - weight * c
            if v < -NEGATIVE_TOLERANCE:
                raise AccountingError(f"word {w} count would become {v}")
            if v <= 0.0:
                del n_kw[w]
            else:
                n_kw[w] = v
        self._accumulate_total(-weight * doc.length)
        if self.n_k < -NEGATIVE_TOLERANCE:
            raise AccountingError(f"component total would become {self.n_k}")
        if self.n_k < 0.0:
            self.n_k = 0.0
            self._carry = 0.0

    def recompute_total(self) -> None:
        """Re-establish n_k == sum(n_kw) exactly; called once per sweep."""
        self.n_k = float(sum(self.n_kw.values()))
        self._carry = 0.0


def log_predictive_doc(doc: Document, stats: ComponentStats, hyper: DcmHyper) -> float:
    """Log predictive probability of `doc` under the component, marginalizing
    the word distribution against its symmetric Dirichlet prior."""
    beta = hyper.beta
    v_beta = hyper.vocab_size * beta
    n_k = stats.n_k
    base = np.fromiter(
        (stats.n_kw.get(w, 0.0) for w in doc.words.tolist()),
        dtype=np.float64,
        count=doc.words.size,
    )
    counts = doc.counts.astype(np.float64)
    word_terms = gammaln(base + counts + beta) - gammaln(base + beta)
    return float(gammaln(n_k + v_beta) - gammaln(n_k + doc.length + v_beta) + word_terms.sum())


_EMPTY_STATS = ComponentStats()


def log_predictive_empty(doc: Document, hyper: DcmHyper) -> float:
    """Prior predictive of a document: the uninstantiated-component case."""
    return log_predictive_doc(doc, _EMPTY_STATS, hyper)
