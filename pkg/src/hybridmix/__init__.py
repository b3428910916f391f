"""Truncation-free hybrid inference for Dirichlet process mixture models and
HDP-LDA: collapsed variational updates most of the time, Gibbs-style
new-component instantiation when the data asks for it."""

from .corpus import (
    Corpus,
    Document,
    as_corpus,
    load_uci,
    parse_uci_bagofwords,
    split_document,
    split_train_test,
    write_uci_bagofwords,
)
from .dcm import ComponentStats, DcmHyper, log_predictive_doc, log_predictive_empty
from .dpmm import DpmmHyper, DpmmState, generate_synthetic
from .estimators import (
    CollapsedGibbsMixture,
    HybridCVB0Mixture,
    HybridStochasticHdpLda,
    StochasticCVB0Lda,
    TruncatedCVB0Mixture,
    TruncatedStochasticHdpLda,
)
from .evaluation import (
    HeldoutResult,
    MetricsRecord,
    emit_metrics,
    heldout_mixed_membership,
    heldout_single_membership,
    read_metrics,
    split_heldout,
)
from .hdplda import HdpHyper, HdpState, generate_synthetic_lda
from .hybrid import HybridUpdate, hybrid_update
from .snapshot import load_snapshot, save_snapshot

__version__ = "0.1.0"

__all__ = [
    "CollapsedGibbsMixture",
    "ComponentStats",
    "Corpus",
    "DcmHyper",
    "Document",
    "DpmmHyper",
    "DpmmState",
    "HdpHyper",
    "HdpState",
    "HeldoutResult",
    "HybridCVB0Mixture",
    "HybridStochasticHdpLda",
    "HybridUpdate",
    "MetricsRecord",
    "StochasticCVB0Lda",
    "TruncatedCVB0Mixture",
    "TruncatedStochasticHdpLda",
    "as_corpus",
    "emit_metrics",
    "generate_synthetic",
    "generate_synthetic_lda",
    "heldout_mixed_membership",
    "heldout_single_membership",
    "hybrid_update",
    "load_snapshot",
    "load_uci",
    "log_predictive_doc",
    "log_predictive_empty",
    "parse_uci_bagofwords",
    "read_metrics",
    "save_snapshot",
    "split_document",
    "split_heldout",
    "split_train_test",
    "write_uci_bagofwords",
]
