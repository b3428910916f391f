"""Sparse bag-of-words corpora: the UCI docword format, train/test splits,
and the token-level document split used for fold-in evaluation.

Word ids are 0-based everywhere inside the package; the UCI file format is
1-based and the conversion happens only at the file boundary. Documents and
corpora are plain value objects, referentially transparent given their
seeds, and safe to share read-only across threads.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import IO, Iterable

import numpy as np
import scipy.sparse as sp

logger = logging.getLogger(__name__)


class UciParseError(ValueError):
    """Malformed UCI bag-of-words input (message carries the line number)."""


class DocumentSplitError(ValueError):
    """Document too short to be split into estimation/evaluation parts."""


@dataclass(frozen=True)
class Document:
    """One document as parallel arrays of distinct word ids and counts.

    `words` is strictly increasing, `counts` is positive; `id` is the
    document's index in whatever corpus it was born in and survives
    splitting, so synthetic labels stay attached.
    """

    id: int
    words: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        words = np.asarray(self.words, dtype=np.int64)
        counts = np.asarray(self.counts, dtype=np.int64)
        object.__setattr__(self, "words", words)
        object.__setattr__(self, "counts", counts)
        if words.shape != counts.shape or words.ndim != 1:
            raise ValueError("words and counts must be 1-d arrays of equal length")
        if words.size:
            if np.any(np.diff(words) <= 0):
                raise ValueError("word ids must be strictly increasing")
            if words[0] < 0:
                raise ValueError("word ids must be nonnegative")
            if np.any(counts <= 0):
                raise ValueError("counts must be positive")

    @property
    def length(self) -> int:
        return int(self.counts.sum())

    @property
    def entries(self) -> list[tuple[int, int]]:
        return list(zip(self.words.tolist(), self.counts.tolist()))

    @classmethod
    def from_counts(cls, doc_id: int, counts: dict[int, int] | Iterable[tuple[int, int]]) -> "Document":
        items = sorted(dict(counts).items())
        words = np.array([w for w, _ in items], dtype=np.int64)
        cnts = np.array([c for _, c in items], dtype=np.int64)
        return cls(doc_id, words, cnts)

    @classmethod
    def from_tokens(cls, doc_id: int, tokens: np.ndarray) -> "Document":
        words, counts = np.unique(np.asarray(tokens, dtype=np.int64), return_counts=True)
        return cls(doc_id, words, counts)


@dataclass
class Corpus:
    vocab_size: int
    docs: list[Document]
    vocab: list[str] | None = field(default=None)

    def __post_init__(self):
        if self.vocab is not None and len(self.vocab) != self.vocab_size:
            raise ValueError("vocab list length must equal vocab_size")
        for d in self.docs:
            if d.words.size and d.words[-1] >= self.vocab_size:
                raise ValueError(f"document {d.id} has word id >= vocab_size {self.vocab_size}")

    def __len__(self) -> int:
        return len(self.docs)

    @property
    def n_docs(self) -> int:
        return len(self.docs)

    @property
    def total_tokens(self) -> int:
        return int(sum(d.length for d in self.docs))


def parse_uci_bagofwords(docword_stream: IO[str], vocab_stream: IO[str] | None = None) -> Corpus:
    """Parse the UCI docword format: three header lines D, W, NNZ followed by
    NNZ lines of "docID wordID count" with 1-based ids.

    Documents are re-indexed 0-based in ascending docID order; docIDs that
    never appear (empty documents) are dropped and counted in a warning.
    An NNZ mismatch is a warning, not an error.
    """
    header = []
    line_no = 0
    for _ in range(3):
        line = docword_stream.readline()
        line_no += 1
        if not line:
            raise UciParseError(f"line {line_no}: truncated header (expected 3 header lines)")
        try:
            header.append(int(line.strip()))
        except ValueError:
            raise UciParseError(f"line {line_no}: malformed header value {line.strip()!r}") from None
    n_docs, n_words, nnz = header
    if n_docs < 0 or n_words < 1 or nnz < 0:
        raise UciParseError(f"line {line_no}: nonsensical header D={n_docs} W={n_words} NNZ={nnz}")

    per_doc: dict[int, dict[int, int]] = {}
    n_lines = 0
    for line in docword_stream:
        line_no += 1
        stripped = line.strip()
        if not stripped:
            continue
        parts = stripped.split()
        if len(parts) != 3:
            raise UciParseError(f"line {line_no}: expected 'docID wordID count', got {stripped!r}")
        try:
            doc_id, word_id, count = int(parts[0]), int(parts[1]), int(parts[2])
        except ValueError:
            raise UciParseError(f"line {line_no}: non-integer field in {stripped!r}") from None
        if not 1 <= doc_id <= n_docs:
            raise UciParseError(f"line {line_no}: docID {doc_id} outside [1, {n_docs}]")
        if not 1 <= word_id <= n_words:
            raise UciParseError(f"line {line_no}: wordID {word_id} outside [1, {n_words}]")
        if count <= 0:
            raise UciParseError(f"line {line_no}: count must be positive, got {count}")
        entry = per_doc.setdefault(doc_id, {})
        entry[word_id - 1] = entry.get(word_id - 1, 0) + count
        n_lines += 1

    if n_lines != nnz:
        logger.warning("docword stream declared NNZ=%d but contained %d entry lines", nnz, n_lines)

    dropped = n_docs - len(per_doc)
    if dropped > 0:
        logger.warning("dropped %d empty documents at parse time", dropped)

    docs = [
        Document.from_counts(new_id, per_doc[orig])
        for new_id, orig in enumerate(sorted(per_doc))
    ]

    vocab = None
    if vocab_stream is not None:
        vocab = [ln.rstrip("\n") for ln in vocab_stream]
        while vocab and vocab[-1] == "":
            vocab.pop()
        if len(vocab) != n_words:
            raise UciParseError(f"vocab file has {len(vocab)} terms, expected W={n_words}")

    return Corpus(vocab_size=n_words, docs=docs, vocab=vocab)


def write_uci_bagofwords(corpus: Corpus, stream: IO[str]) -> None:
    """Write the canonical UCI docword form: 1-based ids, documents in order,
    entries ascending by word id, single spaces, LF line endings."""
    nnz = sum(d.words.size for d in corpus.docs)
    stream.write(f"{corpus.n_docs}\n{corpus.vocab_size}\n{nnz}\n")
    for pos, doc in enumerate(corpus.docs):
        for w, c in zip(doc.words.tolist(), doc.counts.tolist()):
            stream.write(f"{pos + 1} {w + 1} {c}\n")


def write_vocab(corpus: Corpus, stream: IO[str]) -> None:
    if corpus.vocab is None:
        raise ValueError("corpus carries no vocabulary")
    for term in corpus.vocab:
        stream.write(term + "\n")


def load_uci(docword_path: str, vocab_path: str | None = None) -> Corpus:
    with open(docword_path, "r", encoding="utf-8") as f:
        if vocab_path is None:
            return parse_uci_bagofwords(f)
        with open(vocab_path, "r", encoding="utf-8") as vf:
            return parse_uci_bagofwords(f, vf)


def split_train_test(corpus: Corpus, test_fraction: float, seed: int) -> tuple[Corpus, Corpus]:
    """Partition documents by a seeded uniform shuffle; test gets
    round(N * test_fraction) documents. Document ids are preserved."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    if corpus.n_docs == 0:
        raise ValueError("cannot split an empty corpus")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(corpus.n_docs)
    n_test = int(round(corpus.n_docs * test_fraction))
    test_idx = set(perm[:n_test].tolist())
    train_docs = [d for i, d in enumerate(corpus.docs) if i not in test_idx]
    test_docs = [d for i, d in enumerate(corpus.docs) if i in test_idx]
    return (
        Corpus(corpus.vocab_size, train_docs, corpus.vocab),
        Corpus(corpus.vocab_size, test_docs, corpus.vocab),
    )


def split_document(doc: Document, estimation_fraction: float, seed: int) -> tuple[Document, Document]:
    """Split one document at the token level: expand counts to a token
    multiset, shuffle with the seed, give round(length * fraction) tokens to
    the first part and the rest to the second, then re-compress.

    Per-word counts are conserved: count_a(w) + count_b(w) == count(w).
    """
    if not 0.0 < estimation_fraction < 1.0:
        raise ValueError(f"estimation_fraction must lie in (0, 1), got {estimation_fraction}")
    length = doc.length
    if length < 2:
        raise DocumentSplitError(f"document {doc.id} has length {length} < 2, cannot split")
    tokens = np.repeat(doc.words, doc.counts)
    rng = np.random.default_rng(seed)
    tokens = tokens[rng.permutation(length)]
    n_a = int(round(length * estimation_fraction))
    part_a = Document.from_tokens(doc.id, tokens[:n_a])
    part_b = Document.from_tokens(doc.id, tokens[n_a:])
    return part_a, part_b


def as_corpus(X, vocab_size: int | None = None) -> Corpus:
    """Coerce estimator input to a Corpus.

    Accepts a Corpus, a sequence of Documents, a dense 2-d array of counts or
    a scipy sparse matrix (rows are documents, columns word ids). All-zero
    rows are dropped with a warning, mirroring the UCI parser.
    """
    if isinstance(X, Corpus):
        if vocab_size is not None and vocab_size != X.vocab_size:
            raise ValueError(f"vocab_size {vocab_size} conflicts with corpus V={X.vocab_size}")
        return X
    if isinstance(X, (list, tuple)) and X and isinstance(X[0], Document):
        docs = list(X)
        if vocab_size is None:
            widths = [int(d.words[-1]) + 1 for d in docs if d.words.size]
            if not widths:
                raise ValueError("cannot infer vocab_size from empty documents")
            vocab_size = max(widths)
        return Corpus(vocab_size, docs)

    if sp.issparse(X):
        mat = sp.csr_matrix(X)
    else:
        arr = np.asarray(X)
        if arr.ndim != 2:
            raise ValueError(f"expected a 2-d count matrix, got shape {arr.shape}")
        mat = sp.csr_matrix(arr)
    if mat.nnz and (mat.data < 0).any():
        raise ValueError("count matrix must be nonnegative")
    data = mat.data
    if data.size and not np.allclose(data, np.round(data)):
        raise ValueError("count matrix must contain integer counts")

    if vocab_size is None:
        vocab_size = mat.shape[1]
    elif vocab_size < mat.shape[1]:
        raise ValueError(f"vocab_size {vocab_size} smaller than matrix width {mat.shape[1]}")

    docs = []
    dropped = 0
    for i in range(mat.shape[0]):
        row = mat.getrow(i)
        order = np.argsort(row.indices)
        words = row.indices[order].astype(np.int64)
        counts = np.round(row.data[order]).astype(np.int64)
        keep = counts > 0
        words, counts = words[keep], counts[keep]
        if words.size == 0:
            dropped += 1
            continue
        docs.append(Document(len(docs), words, counts))
    if dropped:
        logger.warning("dropped %d empty rows while building corpus", dropped)
    if not docs:
        raise ValueError("input contains no non-empty documents")
    return Corpus(vocab_size, docs)
