"""Document feature extraction: tf-idf vectors, word embeddings trained
with CBOW negative sampling, averaged document embeddings, and padded
word-index sequences, plus plain-text persistence for each artifact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, FormatError, NumericError
from .textproc import PAD_INDEX, Vocabulary, build_vocabulary


# ---------------------------------------------------------------------------
# tf-idf
# ---------------------------------------------------------------------------


@dataclass
class IdfTable:
    """Per-token idf aligned with vocabulary indices (slot 0 is the pad
    and carries 0)."""

    vocabulary: Vocabulary
    idf: np.ndarray

    @property
    def size(self) -> int:
        return len(self.vocabulary.token_to_index)


def compute_idf(vocab: Vocabulary) -> IdfTable:
    """idf(w) = ln(n_docs / df(w)) + 1, natural log, no smoothing terms.

    Tokens present in every document get exactly 1.
    """
    if vocab.n_docs < 1:
        raise ConfigError("vocabulary was built over zero documents")
    idf = np.zeros(len(vocab.index_to_token), dtype=np.float64)
    for token, i in vocab.token_to_index.items():
        df = vocab.doc_freq[token]
        idf[i] = math.log(vocab.n_docs / df) + 1.0
    return IdfTable(vocabulary=vocab, idf=idf)


def tfidf_vectorize(
    docs: Sequence[Sequence[str]], table: IdfTable
) -> sp.csr_matrix:
    """Sparse doc-term matrix of raw term count times idf.

    No length normalization of any kind; a doc with a token twice scores
    exactly twice the single-occurrence doc on that column. Columns are
    vocabulary indices shifted down by one (the pad slot is dropped), so
    the matrix has exactly vocabulary-size columns.
    """
    vocab = table.vocabulary
    n_cols = len(vocab.token_to_index)
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for doc in docs:
        counts: dict[int, int] = {}
        for tok in doc:
            i = vocab.token_to_index.get(tok)
            if i is not None:
                counts[i] = counts.get(i, 0) + 1
        for i in sorted(counts):
            indices.append(i - 1)
            data.append(counts[i] * table.idf[i])
        indptr.append(len(indices))
    return sp.csr_matrix(
        (np.array(data, dtype=np.float64), np.array(indices, dtype=np.int64), np.array(indptr, dtype=np.int64)),
        shape=(len(docs), n_cols),
    )


@dataclass(frozen=True)
class TfidfConfig:
    """Named vocabulary-selection recipe for tf-idf features.

    ``full_rank`` keeps the ``max_features`` tokens with the largest
    summed tf-idf mass over the training documents; ``df_band`` instead
    trims by document-frequency bounds and keeps everything that
    survives.
    """

    name: str
    strategy: str  # "full_rank" | "df_band"
    max_features: int | None = None
    min_doc_freq: int = 1
    max_doc_frac: float = 1.0


TFIDF_LARGE = TfidfConfig(name="tfidf40k", strategy="full_rank", max_features=40000)
TFIDF_FILTERED = TfidfConfig(
    name="tfidf20k", strategy="df_band", min_doc_freq=10, max_doc_frac=0.8
)

TFIDF_CONFIGS = {c.name: c for c in (TFIDF_LARGE, TFIDF_FILTERED)}


def select_tfidf_config(name: str) -> TfidfConfig:
    try:
        return TFIDF_CONFIGS[name]
    except KeyError:
        raise ConfigError(
            f"unknown tfidf config {name!r}; choose from {sorted(TFIDF_CONFIGS)}"
        ) from None


def build_tfidf_table(
    train_docs: Sequence[Sequence[str]], config: TfidfConfig
) -> IdfTable:
    """Fit a vocabulary + idf table on training documents only."""
    if config.strategy == "df_band":
        vocab = build_vocabulary(
            train_docs,
            min_doc_freq=config.min_doc_freq,
            max_doc_frac=config.max_doc_frac,
            max_size=config.max_features,
        )
        return compute_idf(vocab)
    if config.strategy != "full_rank":
        raise ConfigError(f"unknown tfidf strategy {config.strategy!r}")

    vocab = build_vocabulary(train_docs)
    table = compute_idf(vocab)
    if config.max_features is None or len(vocab.token_to_index) <= config.max_features:
        return table
    mass = np.zeros(len(vocab.index_to_token), dtype=np.float64)
    for doc in train_docs:
        counts: dict[int, int] = {}
        for tok in doc:
            i = vocab.token_to_index.get(tok)
            if i is not None:
                counts[i] = counts.get(i, 0) + 1
        for i, c in counts.items():
            mass[i] += c * table.idf[i]
    # rank by (-summed mass, token) for a deterministic cut
    order = sorted(
        vocab.token_to_index.items(), key=lambda kv: (-mass[kv[1]], kv[0])
    )
    keep = {tok for tok, _ in order[: config.max_features]}
    kept_vocab = _restrict_vocabulary(vocab, keep)
    return compute_idf(kept_vocab)


def _restrict_vocabulary(vocab: Vocabulary, keep: set[str]) -> Vocabulary:
    """Sub-vocabulary over ``keep`` with the parent's doc frequencies and
    the standard (-df, token) index order."""
    ordered = sorted(keep, key=lambda t: (-vocab.doc_freq[t], t))
    token_to_index = {tok: i + 1 for i, tok in enumerate(ordered)}
    return Vocabulary(
        token_to_index=token_to_index,
        index_to_token=[""] + ordered,
        doc_freq={t: vocab.doc_freq[t] for t in ordered},
        n_docs=vocab.n_docs,
    )


# ---------------------------------------------------------------------------
# CBOW word2vec with negative sampling
# ---------------------------------------------------------------------------


@dataclass
class Word2VecResult:
    vocabulary: Vocabulary
    vectors: np.ndarray  # rows align with vocabulary indices; row 0 is zeros
    losses: np.ndarray  # one entry per SGD step


def train_word2vec_cbow(
    docs: Sequence[Sequence[str]],
    dim: int = 50,
    window: int = 5,
    negatives: int = 5,
    epochs: int = 5,
    learning_rate: float = 0.025,
    min_learning_rate: float = 1e-4,
    min_count: int = 1,
    seed: int = 0,
) -> Word2VecResult:
    """Continuous bag-of-words embeddings trained by negative sampling.

    Single-threaded seeded SGD: for each center word the context vectors
    inside a per-position window (width drawn uniformly from 1..window)
    are averaged, scored against the true center and ``negatives`` noise
    words drawn from the unigram distribution raised to 3/4, and both
    embedding tables are updated from the logistic loss. The learning
    rate decays linearly over all scheduled steps.
    """
    if dim < 1 or window < 1 or negatives < 0 or epochs < 1:
        raise ConfigError("invalid word2vec hyperparameters")
    vocab = build_vocabulary(docs, min_doc_freq=1)
    if min_count > 1:
        counts: dict[str, int] = {}
        for doc in docs:
            for tok in doc:
                counts[tok] = counts.get(tok, 0) + 1
        keep = {t for t, c in counts.items() if c >= min_count and t in vocab.token_to_index}
        if not keep:
            raise ConfigError("min_count removed every token")
        vocab = _restrict_vocabulary(vocab, keep)

    encoded = [
        [vocab.token_to_index[t] for t in doc if t in vocab.token_to_index]
        for doc in docs
    ]
    encoded = [doc for doc in encoded if len(doc) >= 2]
    if not encoded:
        raise ConfigError("no document retains two in-vocabulary tokens")

    n_slots = len(vocab.index_to_token)
    rng = np.random.default_rng(seed)
    w_in = (rng.random((n_slots, dim)) - 0.5) / dim
    w_out = np.zeros((n_slots, dim), dtype=np.float64)
    w_in[PAD_INDEX] = 0.0

    # noise distribution: unigram counts over the encoded corpus, ^0.75
    freq = np.zeros(n_slots, dtype=np.float64)
    for doc in encoded:
        for i in doc:
            freq[i] += 1.0
    noise = freq**0.75
    noise[PAD_INDEX] = 0.0
    noise /= noise.sum()

    total_steps = epochs * sum(len(doc) for doc in encoded)
    losses = np.empty(total_steps, dtype=np.float64)
    step = 0
    for _ in range(epochs):
        for doc in encoded:
            for t, center in enumerate(doc):
                lr = max(
                    min_learning_rate,
                    learning_rate * (1.0 - step / total_steps),
                )
                b = int(rng.integers(1, window + 1))
                lo, hi = max(0, t - b), min(len(doc), t + b + 1)
                context = [doc[p] for p in range(lo, hi) if p != t]
                if not context:
                    losses[step] = 0.0
                    step += 1
                    continue
                h = w_in[context].mean(axis=0)
                targets = [center] + list(
                    rng.choice(n_slots, size=negatives, p=noise)
                )
                labels = np.zeros(len(targets))
                labels[0] = 1.0
                grad_h = np.zeros(dim)
                loss = 0.0
                for tgt, y in zip(targets, labels):
                    score = float(w_out[tgt] @ h)
                    p = 1.0 / (1.0 + math.exp(-score)) if score > -500 else 0.0
                    g = p - y
                    loss -= math.log(max(p if y else 1.0 - p, 1e-10))
                    grad_h += g * w_out[tgt]
                    w_out[tgt] -= lr * g * h
                upd = lr * grad_h / len(context)
                for c in context:
                    w_in[c] -= upd
                losses[step] = loss
                step += 1
    if not np.all(np.isfinite(w_in)):
        raise NumericError("non-finite values in trained embeddings")
    return Word2VecResult(vocabulary=vocab, vectors=w_in, losses=losses[:step])


# ---------------------------------------------------------------------------
# Embedding matrices and document encodings
# ---------------------------------------------------------------------------


@dataclass
class EmbeddingMatrix:
    """Vocabulary-aligned embedding rows; row 0 (the pad) is all zeros."""

    vocabulary: Vocabulary
    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __post_init__(self):
        if self.matrix.shape[0] != len(self.vocabulary.index_to_token):
            raise ConfigError("embedding rows do not match vocabulary slots")


def align_embeddings(
    vocab: Vocabulary,
    tokens: Sequence[str],
    vectors: np.ndarray,
    oov: str = "zeros",
    seed: int = 0,
) -> EmbeddingMatrix:
    """Build a vocabulary-aligned matrix from (token, vector) pairs.

    Tokens absent from the source get zero rows ("zeros") or small seeded
    uniform rows ("random").
    """
    if oov not in ("zeros", "random"):
        raise ConfigError(f"unknown oov policy {oov!r}")
    dim = vectors.shape[1]
    lookup = {t: i for i, t in enumerate(tokens)}
    out = np.zeros((len(vocab.index_to_token), dim), dtype=np.float64)
    rng = np.random.default_rng(seed)
    for token, i in vocab.token_to_index.items():
        j = lookup.get(token)
        if j is not None:
            out[i] = vectors[j]
        elif oov == "random":
            out[i] = (rng.random(dim) - 0.5) / dim
    out[PAD_INDEX] = 0.0
    return EmbeddingMatrix(vocabulary=vocab, matrix=out)


def average_embedding(indices: Sequence[int], emb: EmbeddingMatrix) -> np.ndarray:
    """Mean of the embedding rows for the given token indices.

    Pad indices are ignored. The sum runs over sorted unique indices
    weighted by multiplicity, so any permutation of the same multiset of
    tokens yields the bitwise-identical vector. All-pad or empty input
    gives the zero vector.
    """
    idx = np.asarray(indices, dtype=np.int64)
    idx = idx[idx != PAD_INDEX]
    if idx.size == 0:
        return np.zeros(emb.dim, dtype=np.float64)
    uniq, counts = np.unique(idx, return_counts=True)
    total = (emb.matrix[uniq] * counts[:, None]).sum(axis=0)
    return total / idx.size


def encode_word_sequence(
    tokens: Sequence[str], vocab: Vocabulary, max_len: int
) -> np.ndarray:
    """Vocabulary indices of the last ``max_len`` in-vocabulary tokens,
    front-padded with the pad index to exactly ``max_len``.

    Out-of-vocabulary tokens are dropped before the tail is taken, so a
    long document always contributes ``max_len`` real indices when it has
    that many known tokens.
    """
    if max_len < 1:
        raise ConfigError("max_len must be >= 1")
    ids = [vocab.token_to_index[t] for t in tokens if t in vocab.token_to_index]
    tail = ids[-max_len:]
    out = np.full(max_len, PAD_INDEX, dtype=np.int64)
    if tail:
        out[-len(tail):] = tail
    return out


def encode_corpus_sequences(
    docs: Sequence[Sequence[str]], vocab: Vocabulary, max_len: int
) -> np.ndarray:
    return np.stack([encode_word_sequence(d, vocab, max_len) for d in docs])


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def save_sparse(matrix: sp.csr_matrix, path: str | Path) -> None:
    """Text triplet format: header "rows cols nnz", then one
    "row col value" line per stored entry in row-major order."""
    coo = matrix.tocoo()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{matrix.shape[0]} {matrix.shape[1]} {coo.nnz}\n")
        order = np.lexsort((coo.col, coo.row))
        for i in order:
            fh.write(f"{coo.row[i]} {coo.col[i]} {float(coo.data[i])!r}\n")


def load_sparse(path: str | Path) -> sp.csr_matrix:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 3:
            raise FormatError(f"{path}: bad sparse header")
        n_rows, n_cols, nnz = (int(x) for x in header)
        rows = np.empty(nnz, dtype=np.int64)
        cols = np.empty(nnz, dtype=np.int64)
        data = np.empty(nnz, dtype=np.float64)
        for i in range(nnz):
            parts = fh.readline().split()
            if len(parts) != 3:
                raise FormatError(f"{path}: truncated at entry {i}")
            rows[i], cols[i], data[i] = int(parts[0]), int(parts[1]), float(parts[2])
    return sp.csr_matrix((data, (rows, cols)), shape=(n_rows, n_cols))


def save_dense(matrix: np.ndarray, path: str | Path) -> None:
    """Text matrix: header "rows cols", then space-separated float reprs
    (full precision, round-trip exact)."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{matrix.shape[0]} {matrix.shape[1]}\n")
        for row in matrix:
            fh.write(" ".join(repr(v) for v in row.tolist()) + "\n")


def load_dense(path: str | Path) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise FormatError(f"{path}: bad dense header")
        n_rows, n_cols = int(header[0]), int(header[1])
        out = np.empty((n_rows, n_cols), dtype=np.float64)
        for i in range(n_rows):
            parts = fh.readline().split()
            if len(parts) != n_cols:
                raise FormatError(f"{path}: row {i} has {len(parts)} values, want {n_cols}")
            out[i] = [float(p) for p in parts]
    return out


def save_sequences(seqs: np.ndarray, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{seqs.shape[0]} {seqs.shape[1]}\n")
        for row in seqs:
            fh.write(" ".join(str(int(v)) for v in row) + "\n")


def load_sequences(path: str | Path) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise FormatError(f"{path}: bad sequence header")
        n, m = int(header[0]), int(header[1])
        out = np.empty((n, m), dtype=np.int64)
        for i in range(n):
            out[i] = [int(v) for v in fh.readline().split()]
    return out


def save_word2vec_text(result: Word2VecResult | EmbeddingMatrix, path: str | Path) -> None:
    """Standard text embedding format: "count dim" header, then one
    "token v1 .. vd" line per real vocabulary entry (pad row omitted)."""
    if isinstance(result, Word2VecResult):
        vocab, matrix = result.vocabulary, result.vectors
    else:
        vocab, matrix = result.vocabulary, result.matrix
    tokens = vocab.index_to_token[1:]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(tokens)} {matrix.shape[1]}\n")
        for i, tok in enumerate(tokens, start=1):
            fh.write(tok + " " + " ".join(repr(v) for v in matrix[i].tolist()) + "\n")


def load_word2vec_text(path: str | Path) -> tuple[list[str], np.ndarray]:
    """Read the text embedding format back as (tokens, vectors)."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise FormatError(f"{path}: bad embedding header")
        count, dim = int(header[0]), int(header[1])
        tokens: list[str] = []
        vectors = np.empty((count, dim), dtype=np.float64)
        for i in range(count):
            parts = fh.readline().rstrip("\n").split(" ")
            if len(parts) != dim + 1:
                raise FormatError(f"{path}: line {i + 2} has {len(parts) - 1} values, want {dim}")
            tokens.append(parts[0])
            vectors[i] = [float(p) for p in parts[1:]]
    return tokens, vectors
