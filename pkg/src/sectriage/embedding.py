"""Skip-gram word embeddings with negative sampling, plus document
vectorization into fixed-shape word matrices.

Training is plain sequential SGD over (center, context) pairs so a fixed
seed reproduces the vector tables bit for bit. The center-word table is
the embedding; the context table exists only during training.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .neuralcore import NumericError
from .preprocess import TokenSequence, Vocabulary, build_vocabulary


class EmbeddingFormatError(Exception):
    """Raised when an embedding file does not match the text format."""


@dataclass
class EmbeddingModel:
    """Per-token dense vectors over a vocabulary (default dimension 100)."""

    vocabulary: Vocabulary
    vectors: np.ndarray              # (|V|, dim) float64
    dim: int
    training_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.vectors.shape != (len(self.vocabulary), self.dim):
            raise ValueError(
                f"vector table {self.vectors.shape} does not match "
                f"vocabulary size {len(self.vocabulary)} and dim {self.dim}"
            )

    def vector(self, token: str) -> np.ndarray:
        if token not in self.vocabulary:
            raise KeyError(f"token {token!r} not in vocabulary")
        return self.vectors[self.vocabulary.index(token)]


@dataclass
class DocumentMatrix:
    """Fixed-length stack of embedding rows for one document.

    Rows past valid_rows are exactly zero. oov_warning is set when the
    document had no in-vocabulary tokens at all.
    """

    doc_id: str
    rows: np.ndarray          # (max_len, dim)
    valid_rows: int
    oov_warning: bool = False


def generate_pairs(indices: Sequence[int], window: int) -> list[tuple[int, int]]:
    """All (center, context) pairs within the window, in position order."""
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    n = len(indices)
    pairs = []
    for i in range(n):
        for j in range(max(0, i - window), min(n, i + window + 1)):
            if j != i:
                pairs.append((indices[i], indices[j]))
    return pairs


def negative_sampling_objective(center_vec: np.ndarray,
                                context_vec: np.ndarray,
                                negative_vecs: np.ndarray):
    """Loss and exact gradients for one skip-gram update.

    loss = -log sigmoid(u_ctx . v_c) - sum_k log sigmoid(-u_k . v_c)

    Returns (loss, grad_center, grad_context, grad_negatives).
    """
    pos_score = float(context_vec @ center_vec)
    pos_sig = 1.0 / (1.0 + math.exp(-pos_score))
    neg_scores = negative_vecs @ center_vec
    neg_sigs = 1.0 / (1.0 + np.exp(-neg_scores))

    loss = -math.log(max(pos_sig, 1e-300))
    loss -= float(np.log(np.maximum(1.0 - neg_sigs, 1e-300)).sum())

    grad_context = (pos_sig - 1.0) * center_vec
    grad_negatives = neg_sigs[:, None] * center_vec[None, :]
    grad_center = (pos_sig - 1.0) * context_vec + neg_sigs @ negative_vecs
    return loss, grad_center, grad_context, grad_negatives


def _pair_update(center: np.ndarray, context: np.ndarray, c: int, ctx: int,
                 neg: np.ndarray, lr: float) -> None:
    """One SGD step on the pair objective; gradients match
    negative_sampling_objective exactly (duplicate negatives accumulate)."""
    v_c = center[c]
    u_ctx = context[ctx]
    u_neg = context[neg]
    pos_sig = 1.0 / (1.0 + math.exp(-float(u_ctx @ v_c)))
    neg_sigs = 1.0 / (1.0 + np.exp(-(u_neg @ v_c)))

    grad_center = (pos_sig - 1.0) * u_ctx + neg_sigs @ u_neg
    context[ctx] -= lr * (pos_sig - 1.0) * v_c
    for k, sig in zip(neg, neg_sigs):
        context[k] -= lr * sig * v_c
    center[c] -= lr * grad_center


def _negative_table(vocab: Vocabulary, power: float = 0.75) -> np.ndarray:
    """Cumulative distribution over token indices: count^power."""
    weights = np.array(
        [vocab.counts[vocab.token(i)] ** power for i in range(len(vocab))],
        dtype=np.float64,
    )
    cdf = np.cumsum(weights)
    return cdf / cdf[-1]


def train_skipgram(token_corpus: Iterable[TokenSequence | Sequence[str]],
                   dim: int = 100,
                   window: int = 5,
                   negatives: int = 5,
                   epochs: int = 5,
                   learning_rate: float = 0.025,
                   seed: int = 0,
                   min_count: int = 1) -> EmbeddingModel:
    """Learn word vectors from tokenized documents.

    The center table starts uniform(-0.5/dim, +0.5/dim), the context
    table at zero; the learning rate decays linearly over all scheduled
    updates with a floor of 1e-4 of the initial rate.
    """
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    sequences = [
        seq.tokens if isinstance(seq, TokenSequence) else list(seq)
        for seq in token_corpus
    ]
    if not sequences or all(len(s) == 0 for s in sequences):
        raise ValueError("cannot train an embedding on an empty corpus")
    vocab = build_vocabulary(sequences, min_count=min_count)
    encoded = [vocab.encode(seq) for seq in sequences]

    rng = np.random.default_rng(seed)
    center = rng.uniform(-0.5 / dim, 0.5 / dim, size=(len(vocab), dim))
    context = np.zeros((len(vocab), dim))
    table = _negative_table(vocab)

    total_pairs = sum(
        len(generate_pairs(seq, window)) for seq in encoded
    )
    if total_pairs == 0:
        raise ValueError("corpus yields no skip-gram pairs")
    schedule_total = total_pairs * epochs
    lr_floor = learning_rate * 1e-4

    processed = 0
    for epoch in range(epochs):
        for seq in encoded:
            n = len(seq)
            for i in range(n):
                c = seq[i]
                lo = max(0, i - window)
                hi = min(n, i + window + 1)
                for j in range(lo, hi):
                    if j == i:
                        continue
                    ctx = seq[j]
                    lr = max(
                        lr_floor,
                        learning_rate * (1.0 - processed / schedule_total),
                    )
                    processed += 1
                    draws = np.searchsorted(table, rng.random(negatives))
                    neg = draws[draws != ctx]
                    _pair_update(center, context, c, ctx, neg, lr)
        if not np.isfinite(center).all() or not np.isfinite(context).all():
            raise NumericError(f"non-finite embedding weights after epoch {epoch + 1}")

    meta = {
        "window": window,
        "negatives": negatives,
        "epochs": epochs,
        "learning_rate": learning_rate,
        "seed": seed,
        "min_count": min_count,
    }
    return EmbeddingModel(vocabulary=vocab, vectors=center, dim=dim,
                          training_meta=meta)


def nearest_neighbors(model: EmbeddingModel, token: str,
                      k: int = 10) -> list[tuple[str, float]]:
    """Top-k vocabulary tokens by cosine similarity, excluding the query.

    Ties break by vocabulary index; k larger than |V|-1 is clamped.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if token not in model.vocabulary:
        raise KeyError(f"token {token!r} not in vocabulary")
    idx = model.vocabulary.index(token)
    norms = np.linalg.norm(model.vectors, axis=1)
    norms = np.where(norms == 0.0, 1.0, norms)
    query = model.vectors[idx] / norms[idx]
    sims = (model.vectors / norms[:, None]) @ query
    order = sorted(
        (i for i in range(len(model.vocabulary)) if i != idx),
        key=lambda i: (-sims[i], i),
    )
    return [(model.vocabulary.token(i), float(sims[i])) for i in order[:k]]


def vectorize_document(model: EmbeddingModel,
                       token_sequence: TokenSequence | Sequence[str],
                       max_len: int) -> DocumentMatrix:
    """Stack embedding rows for the first max_len in-vocabulary tokens,
    zero-padding the rest."""
    if max_len < 1:
        raise ValueError(f"max_len must be >= 1, got {max_len}")
    if isinstance(token_sequence, TokenSequence):
        doc_id, tokens = token_sequence.doc_id, token_sequence.tokens
    else:
        doc_id, tokens = "", list(token_sequence)
    indices = model.vocabulary.encode(tokens)[:max_len]
    rows = np.zeros((max_len, model.dim))
    if indices:
        rows[: len(indices)] = model.vectors[indices]
    return DocumentMatrix(
        doc_id=doc_id,
        rows=rows,
        valid_rows=len(indices),
        oov_warning=len(indices) == 0,
    )


def vectorize_corpus(model: EmbeddingModel,
                     sequences: Sequence[TokenSequence],
                     max_len: int) -> np.ndarray:
    """(N, max_len, dim) stack of document matrices."""
    out = np.zeros((len(sequences), max_len, model.dim))
    for i, seq in enumerate(sequences):
        out[i] = vectorize_document(model, seq, max_len).rows
    return out


def save_embeddings(model: EmbeddingModel, path: str | Path) -> None:
    """Write the text format: '<V> <dim>' header then one token per line
    with full-precision decimal floats."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(model.vocabulary)} {model.dim}\n")
        for i in range(len(model.vocabulary)):
            values = " ".join(repr(v) for v in model.vectors[i])
            fh.write(f"{model.vocabulary.token(i)} {values}\n")


def load_embeddings(path: str | Path) -> EmbeddingModel:
    """Read the text format back; exact inverse of save_embeddings.

    Token counts are not stored in the format, so the loaded vocabulary
    carries zero counts; index order and vectors round-trip exactly.
    """
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header:
            raise EmbeddingFormatError(f"{path}: empty embedding file")
        parts = header.split()
        if len(parts) != 2:
            raise EmbeddingFormatError(
                f"{path}: header must be '<vocab_size> <dim>', got {header!r}"
            )
        try:
            size, dim = int(parts[0]), int(parts[1])
        except ValueError:
            raise EmbeddingFormatError(
                f"{path}: non-integer header fields {header!r}"
            ) from None
        tokens: list[str] = []
        vectors = np.zeros((size, dim))
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            row = len(tokens)
            if row >= size:
                raise EmbeddingFormatError(
                    f"{path}: more rows than the declared {size}"
                )
            fields = line.split(" ")
            if len(fields) != dim + 1:
                raise EmbeddingFormatError(
                    f"{path}: line {lineno} has {len(fields) - 1} values, "
                    f"expected {dim}"
                )
            tokens.append(fields[0])
            try:
                vectors[row] = [float(v) for v in fields[1:]]
            except ValueError:
                raise EmbeddingFormatError(
                    f"{path}: line {lineno} has a non-numeric value"
                ) from None
        if len(tokens) != size:
            raise EmbeddingFormatError(
                f"{path}: declared {size} rows but found {len(tokens)}"
            )
    vocab = Vocabulary(tokens, {t: 0 for t in tokens}, min_count=0)
    return EmbeddingModel(vocabulary=vocab, vectors=vectors, dim=dim)
