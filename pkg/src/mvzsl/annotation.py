"""Cross-view mapping through the embedding: annotation and naming.

The embedding gives every view a linear map into the common space. Its
pseudo-inverse maps back out, so composing "into the space via view i,
out of it via view j" carries any view-i vector to view j:

    map(i -> j) = W_i diag(rho^power) pinv(W_j diag(rho^power))

Three uses:

* instance annotation: a feature row becomes an attribute score vector,
* class description: a class word vector becomes attribute scores, whose
  top and bottom entries describe the class,
* prototype naming: an attribute prototype becomes a word-space vector,
  ranked against a vocabulary by cosine.

These maps are strictly linear (no mean offsets), matching the linearity
of the underlying projections. Singular values below 1e-10 of the largest
are treated as zero in the pseudo-inverse.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import load_identified_rows, save_identified_rows
from .embedding import MvccaModel
from .errors import ConfigError, DimensionMismatch, MissingView, NonFiniteData
from .propagation import normalize_rows

PINV_RCOND = 1e-10


@dataclass(frozen=True, eq=False)
class CrossViewMap:
    """A linear map from one view's space into another's."""

    source_view: str
    target_view: str
    matrix: np.ndarray  # (source_dim, target_dim)

    def __post_init__(self):
        m = np.array(self.matrix, float, copy=True)
        if m.ndim != 2:
            raise DimensionMismatch("cross-view map must be a matrix")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def apply(self, vectors: np.ndarray) -> np.ndarray:
        """Map one vector or a stack of row vectors; strictly linear."""
        arr = np.asarray(vectors, float)
        if arr.shape[-1] != self.matrix.shape[0]:
            raise DimensionMismatch(
                f"vectors of width {arr.shape[-1]} cannot enter a map from "
                f"{self.matrix.shape[0]} dimensions"
            )
        return arr @ self.matrix


def cross_view_map(
    model: MvccaModel,
    source_view: str,
    target_view: str,
    rcond: float = PINV_RCOND,
) -> CrossViewMap:
    """Compose view projections into a source-to-target linear map."""
    for view in (source_view, target_view):
        if view not in model.weights:
            raise MissingView(f"model has no view {view!r}")
    scale = model.coordinate_weights()
    into = model.weights[source_view] * scale
    out_of = model.weights[target_view] * scale
    matrix = into @ np.linalg.pinv(out_of, rcond=rcond)
    return CrossViewMap(source_view, target_view, matrix)


def instance_annotation(
    features: np.ndarray,
    model: MvccaModel,
    feature_view: str = "X",
    attribute_view: str = "A",
) -> np.ndarray:
    """Attribute scores for feature rows (or one feature vector)."""
    return cross_view_map(model, feature_view, attribute_view).apply(features)


def class_description(
    word_vectors: np.ndarray,
    model: MvccaModel,
    word_view: str = "V",
    attribute_view: str = "A",
) -> np.ndarray:
    """Attribute scores for word vectors: what a named class looks like."""
    return cross_view_map(model, word_view, attribute_view).apply(word_vectors)


def describe(scores: np.ndarray, names: Sequence[str], k: int = 5):
    """Top-k and bottom-k attribute names for one score vector."""
    scores = np.asarray(scores, float)
    if scores.ndim != 1 or scores.shape[0] != len(names):
        raise DimensionMismatch("one name is required per score")
    if not 1 <= k <= len(names):
        raise ConfigError(f"k must be within [1, {len(names)}]")
    order = np.argsort(-scores, kind="stable")
    top = [names[i] for i in order[:k]]
    bottom = [names[i] for i in order[::-1][:k]]
    return top, bottom


@dataclass(frozen=True, eq=False)
class Vocabulary:
    """Word identifiers with their word-space vectors."""

    words: tuple[str, ...]
    vectors: np.ndarray  # (n_words, word_dim)

    def __post_init__(self):
        object.__setattr__(self, "words", tuple(self.words))
        arr = np.array(self.vectors, float, copy=True)
        if arr.ndim != 2 or arr.shape[0] != len(self.words):
            raise DimensionMismatch("one vector is required per word")
        if not np.isfinite(arr).all():
            raise NonFiniteData("vocabulary vectors must be finite")
        if len(set(self.words)) != len(self.words):
            raise ConfigError("vocabulary words must be unique")
        arr.setflags(write=False)
        object.__setattr__(self, "vectors", arr)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.words)


def save_vocabulary(vocab: Vocabulary, path) -> None:
    save_identified_rows(path, vocab.words, vocab.vectors)


def load_vocabulary(path) -> Vocabulary:
    words, vectors = load_identified_rows(path)
    return Vocabulary(words, vectors)


@dataclass(frozen=True, eq=False)
class NameRanking:
    """Vocabulary words ranked for one query, best first."""

    words: tuple[str, ...]
    scores: np.ndarray

    def __post_init__(self):
        arr = np.array(self.scores, float, copy=True)
        arr.setflags(write=False)
        object.__setattr__(self, "scores", arr)
        object.__setattr__(self, "words", tuple(self.words))

    def rank_of(self, word: str) -> int:
        """1-based rank of a word; raises if it is not in the vocabulary."""
        try:
            return self.words.index(word) + 1
        except ValueError as exc:
            raise ConfigError(f"word {word!r} is not in the ranking") from exc


def prototype_to_name(
    attribute_vector: np.ndarray,
    model: MvccaModel,
    vocabulary: Vocabulary,
    attribute_view: str = "A",
    word_view: str = "V",
) -> NameRanking:
    """Carry an attribute prototype to word space and rank the vocabulary.

    Ranking is by cosine similarity, ties broken by vocabulary order.
    """
    query = np.asarray(attribute_vector, float)
    if query.ndim != 1:
        raise DimensionMismatch("prototype_to_name expects one vector")
    mapped = cross_view_map(model, attribute_view, word_view).apply(query)
    sims = rank_by_cosine(mapped, vocabulary.vectors)
    order = np.argsort(-sims, kind="stable")
    return NameRanking(tuple(vocabulary.words[i] for i in order), sims[order])


def rank_by_cosine(query: np.ndarray, candidates: np.ndarray) -> np.ndarray:
    """Cosine of a query vector against candidate rows (zero-safe)."""
    qn = float(np.linalg.norm(query))
    if qn == 0.0:
        return np.zeros(candidates.shape[0])
    unit = normalize_rows(candidates)
    return unit @ (query / qn)
