"""Similarity graphs over embedded nodes: plain KNN graphs and hypergraphs.

Nodes are the embedded target instances followed by the embedded class
prototypes, so prototypes take part in every neighborhood computation.

Pairwise similarity uses a squared-inner-product kernel

    w(a, b) = exp(<a, b>^2 / bandwidth)

with the bandwidth set to the median of the squared inner products over
all row pairs. (Rows are unit length, so the inner product is the cosine;
squaring makes the kernel blind to sign.)

Two kinds of graphs are built:

* ``two_graph``: the kernel matrix of one view, diagonal zeroed, sparsified
  to a union-KNN graph (an edge survives if either endpoint selects it).
* hypergraphs: every node k in a query view spawns one hyperedge holding
  the k_hyper nodes of a member view most similar to it. Similarities are
  stabilized by z-scoring per query and then per member column; selection
  uses those scores, and the retained values are shifted nonnegative by the
  per-query minimum. A hyperedge's strength is the mean retained value, a
  node's soft incidence is strength * value, l2-normalized per hyperedge,
  and the induced pairwise weight of nodes (o, l) is the sum over
  hyperedges of their soft incidence products. ``hetero_hyper`` queries one
  view against another; ``homo_hyper`` queries a view against itself.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .embedding import EmbeddedView
from .errors import (
    ConfigError,
    DegenerateBandwidth,
    DimensionMismatch,
    MissingView,
    ParseFailure,
)

GRAPH_KINDS = ("two_graph", "hetero_hyper", "homo_hyper")

_STD_TOL = 1e-12  # below this a value set counts as constant


def zscore(values: np.ndarray) -> np.ndarray:
    """Standardize by mean and population standard deviation.

    Constant inputs (std below 1e-12) map to all zeros. Needs at least
    two values.
    """
    arr = np.asarray(values, float)
    if arr.ndim != 1 or arr.shape[0] < 2:
        raise ConfigError("zscore needs a 1-d array of at least 2 values")
    std = arr.std()
    if std < _STD_TOL:
        return np.zeros_like(arr)
    return (arr - arr.mean()) / std


def _zscore_rows(matrix: np.ndarray) -> np.ndarray:
    mean = matrix.mean(axis=1, keepdims=True)
    std = matrix.std(axis=1, keepdims=True)
    out = np.zeros_like(matrix)
    np.divide(matrix - mean, std, out=out, where=std >= _STD_TOL)
    return out


def node_similarity(a: np.ndarray, b: np.ndarray, bandwidth: float) -> float:
    """Kernel similarity of two rows: exp(<a,b>^2 / bandwidth)."""
    if bandwidth <= 0:
        raise DegenerateBandwidth("bandwidth must be positive")
    return float(np.exp(np.dot(a, b) ** 2 / bandwidth))


def median_bandwidth(rows_a: np.ndarray, rows_b: np.ndarray) -> float:
    """Median of squared inner products over all row pairs.

    An even pair count takes the mean of the two central values. A zero
    median (more than half of all pairs orthogonal) leaves the kernel
    undefined and raises DegenerateBandwidth.
    """
    if isinstance(rows_a, EmbeddedView):
        rows_a = rows_a.rows
    if isinstance(rows_b, EmbeddedView):
        rows_b = rows_b.rows
    a = np.atleast_2d(np.asarray(rows_a, float))
    b = np.atleast_2d(np.asarray(rows_b, float))
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatch("rows must share a dimension to be compared")
    sq = (a @ b.T) ** 2
    med = float(np.median(sq))
    if med <= 0.0:
        raise DegenerateBandwidth("median squared inner product is zero")
    return med


def _kernel_matrix(rows_a, rows_b, bandwidth: float) -> np.ndarray:
    try:
        with np.errstate(over="raise"):
            return np.exp((rows_a @ rows_b.T) ** 2 / bandwidth)
    except FloatingPointError as exc:
        raise DegenerateBandwidth(
            f"bandwidth {bandwidth:g} is too small for the similarity spread"
        ) from exc


def _knn_union_sparsify(weights: np.ndarray, k: int) -> np.ndarray:
    """Keep edges selected by either endpoint's top-k list; symmetrize by max."""
    n = weights.shape[0]
    if not 1 <= k < n:
        raise ConfigError(f"knn must satisfy 1 <= k < {n}, got {k}")
    order = np.argsort(-weights, axis=1, kind="stable")[:, :k]
    mask = np.zeros((n, n), dtype=bool)
    mask[np.arange(n)[:, None], order] = True
    mask |= mask.T
    kept = weights * mask
    return np.maximum(kept, kept.T)


@dataclass(frozen=True, eq=False)
class Hyperedge:
    """One hyperedge: a query node plus its selected member nodes."""

    query: int
    members: tuple[int, ...]
    similarities: np.ndarray  # retained (normalized, shifted) values
    strength: float

    def __post_init__(self):
        sims = np.array(self.similarities, float, copy=True)
        sims.setflags(write=False)
        object.__setattr__(self, "similarities", sims)
        object.__setattr__(self, "members", tuple(self.members))
        if len(self.members) != sims.shape[0] or len(self.members) < 1:
            raise DimensionMismatch("one similarity is required per member")


@dataclass(frozen=True, eq=False)
class SimilarityGraph:
    """A symmetric weighted graph over the node set.

    ``weights`` is dense in memory (node counts stay modest here); the dump
    format is a sparse triple list, see :func:`save_graph`.
    """

    kind: str
    source_view: str
    target_view: str
    weights: np.ndarray
    bandwidth: float
    knn: int | None = None
    k_hyper: int | None = None
    hyperedges: tuple[Hyperedge, ...] | None = None

    def __post_init__(self):
        if self.kind not in GRAPH_KINDS:
            raise ConfigError(f"unknown graph kind {self.kind!r}")
        w = np.array(self.weights, float, copy=True)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise DimensionMismatch("graph weights must be square")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        if self.hyperedges is not None:
            object.__setattr__(self, "hyperedges", tuple(self.hyperedges))

    @property
    def n_nodes(self) -> int:
        return self.weights.shape[0]

    @property
    def label(self) -> str:
        return f"{self.kind}:{self.source_view}->{self.target_view}"


def build_two_graph(view: EmbeddedView, knn: int | None = 30) -> SimilarityGraph:
    """Within-view kernel graph, union-KNN sparsified.

    ``knn=0`` (or None) keeps the dense kernel matrix.
    """
    rows = view.rows
    if rows.shape[0] < 2:
        raise ConfigError("a graph needs at least two nodes")
    bw = median_bandwidth(rows, rows)
    weights = _kernel_matrix(rows, rows, bw)
    np.fill_diagonal(weights, 0.0)
    if knn:
        weights = _knn_union_sparsify(weights, knn)
    return SimilarityGraph(
        kind="two_graph",
        source_view=view.view_id,
        target_view=view.view_id,
        weights=weights,
        bandwidth=bw,
        knn=knn or None,
    )


def _hyperedge_weights(
    query_rows: np.ndarray,
    member_rows: np.ndarray,
    k_hyper: int,
) -> tuple[np.ndarray, tuple[Hyperedge, ...], float]:
    """Shared hypergraph pipeline; returns dense pair weights and the edges."""
    n = query_rows.shape[0]
    if member_rows.shape[0] != n:
        raise DimensionMismatch("query and member views must hold the same nodes")
    if query_rows.shape[1] != member_rows.shape[1]:
        raise DimensionMismatch("query and member rows must share a dimension")
    if not 1 <= k_hyper < n:
        raise ConfigError(f"k_hyper must satisfy 1 <= k < {n}, got {k_hyper}")

    bw = median_bandwidth(query_rows, member_rows)
    sim = _kernel_matrix(query_rows, member_rows, bw)
    # member selection and edge strength work on stabilized scores:
    # z-score per query row, then per member column, shifted nonnegative
    normed = _zscore_rows(sim)
    normed = _zscore_rows(normed.T).T

    shifted = normed - normed.min(axis=1, keepdims=True)
    incidence = np.zeros((n, n))  # rows: member nodes, cols: hyperedges
    edges = []
    for k in range(n):
        members = np.argsort(-normed[k], kind="stable")[:k_hyper]
        strength = float(shifted[k, members].mean())
        # incidence keeps the kernel similarities themselves; the scores
        # above only decide membership and strength
        incidence[members, k] = strength * sim[k, members]
        edges.append(Hyperedge(k, tuple(int(m) for m in members),
                               sim[k, members], strength))

    norms = np.linalg.norm(incidence, axis=0, keepdims=True)
    np.divide(incidence, norms, out=incidence, where=norms > 0)

    weights = incidence @ incidence.T
    weights = (weights + weights.T) / 2.0
    np.fill_diagonal(weights, 0.0)
    return weights, tuple(edges), bw


def build_hetero_hypergraph(
    nodes: "NodeSet",
    query_view: str,
    member_view: str,
    k_hyper: int = 30,
    knn: int | None = None,
) -> SimilarityGraph:
    """Hypergraph querying one view's nodes against another view's.

    ``knn`` sparsifies the induced pairwise weights; it defaults to
    ``k_hyper`` and 0 keeps them dense.
    """
    if query_view == member_view:
        raise ConfigError("query and member view must differ; see build_homo_hypergraph")
    for view in (query_view, member_view):
        if view not in nodes.views:
            raise MissingView(f"node set has no view {view!r}")
    if knn is None:
        knn = k_hyper
    weights, edges, bw = _hyperedge_weights(
        nodes.views[query_view].rows, nodes.views[member_view].rows, k_hyper
    )
    if knn:
        weights = _knn_union_sparsify(weights, knn)
    return SimilarityGraph(
        kind="hetero_hyper",
        source_view=query_view,
        target_view=member_view,
        weights=weights,
        bandwidth=bw,
        knn=knn or None,
        k_hyper=k_hyper,
        hyperedges=edges,
    )


def build_homo_hypergraph(
    view: EmbeddedView,
    k_hyper: int = 30,
    knn: int | None = None,
) -> SimilarityGraph:
    """Hypergraph of one view queried against itself (ablation variant)."""
    if knn is None:
        knn = k_hyper
    weights, edges, bw = _hyperedge_weights(view.rows, view.rows, k_hyper)
    if knn:
        weights = _knn_union_sparsify(weights, knn)
    return SimilarityGraph(
        kind="homo_hyper",
        source_view=view.view_id,
        target_view=view.view_id,
        weights=weights,
        bandwidth=bw,
        knn=knn or None,
        k_hyper=k_hyper,
        hyperedges=edges,
    )


@dataclass(frozen=True, eq=False)
class NodeSet:
    """The common node universe: target instances then class prototypes.

    Every view holds the same nodes in the same order: ``n_instances``
    embedded target rows followed by one row per prototype class.
    """

    views: Mapping[str, EmbeddedView]
    n_instances: int
    prototype_classes: tuple[str, ...] = ()

    def __post_init__(self):
        views = dict(self.views)
        if not views:
            raise ConfigError("a node set needs at least one view")
        object.__setattr__(self, "views", views)
        object.__setattr__(self, "prototype_classes", tuple(self.prototype_classes))
        expected = self.n_instances + len(self.prototype_classes)
        for view_id, ev in views.items():
            if ev.view_id != view_id:
                raise ConfigError(
                    f"view key {view_id!r} does not match its matrix ({ev.view_id!r})"
                )
            if ev.n_rows != expected:
                raise DimensionMismatch(
                    f"view {view_id!r} has {ev.n_rows} rows, expected {expected}"
                )
        if expected < 2:
            raise ConfigError("a node set needs at least two nodes")

    @property
    def view_ids(self) -> tuple[str, ...]:
        return tuple(self.views)

    @property
    def n_prototypes(self) -> int:
        return len(self.prototype_classes)

    @property
    def n_nodes(self) -> int:
        return self.n_instances + self.n_prototypes


def build_graph_suite(
    nodes: NodeSet,
    kinds: Sequence[str] = ("hetero_hyper", "two_graph"),
    knn: int | None = 30,
    k_hyper: int = 30,
) -> list[SimilarityGraph]:
    """Build every graph of the requested kinds over the node set.

    ``two_graph`` and ``homo_hyper`` contribute one graph per view;
    ``hetero_hyper`` one per ordered view pair. With three views and kinds
    ("hetero_hyper", "two_graph") that is the full nine-graph suite.
    """
    unknown = [k for k in kinds if k not in GRAPH_KINDS]
    if unknown:
        raise ConfigError(f"unknown graph kinds: {unknown}")
    if not kinds:
        raise ConfigError("at least one graph kind is required")
    view_ids = nodes.view_ids
    if "hetero_hyper" in kinds and len(view_ids) < 2:
        raise ConfigError("hetero hypergraphs need at least two views")
    graphs: list[SimilarityGraph] = []
    for kind in kinds:
        if kind == "two_graph":
            for v in view_ids:
                graphs.append(build_two_graph(nodes.views[v], knn=knn))
        elif kind == "homo_hyper":
            for v in view_ids:
                graphs.append(build_homo_hypergraph(nodes.views[v], k_hyper, knn=knn))
        else:
            for vi in view_ids:
                for vj in view_ids:
                    if vi != vj:
                        graphs.append(
                            build_hetero_hypergraph(nodes, vi, vj, k_hyper, knn=knn)
                        )
    return graphs


# ---------------------------------------------------------------------------
# dump format: sparse triples + JSON sidecar
# ---------------------------------------------------------------------------

def save_graph(graph: SimilarityGraph, basename) -> None:
    """Write ``<basename>.csv`` (row,col,weight triples) and a JSON sidecar."""
    base = str(basename)
    rows, cols = np.nonzero(graph.weights)
    with open(base + ".csv", "w") as fh:
        for r, c in zip(rows, cols):
            fh.write(f"{r},{c},{'%.17g' % graph.weights[r, c]}\n")
    sidecar = {
        "kind": graph.kind,
        "source_view": graph.source_view,
        "target_view": graph.target_view,
        "n_nodes": graph.n_nodes,
        "knn": graph.knn,
        "k_hyper": graph.k_hyper,
        "bandwidth": graph.bandwidth,
    }
    with open(base + ".json", "w") as fh:
        json.dump(sidecar, fh, indent=2)
        fh.write("\n")


def load_graph(basename) -> SimilarityGraph:
    base = str(basename)
    try:
        with open(base + ".json") as fh:
            sidecar = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseFailure(f"cannot read graph sidecar: {exc}") from exc
    try:
        n = int(sidecar["n_nodes"])
        weights = np.zeros((n, n))
        with open(base + ".csv") as fh:
            for line in fh:
                if not line.strip():
                    continue
                r, c, w = line.split(",")
                weights[int(r), int(c)] = float(w)
        return SimilarityGraph(
            kind=sidecar["kind"],
            source_view=sidecar["source_view"],
            target_view=sidecar["target_view"],
            weights=weights,
            bandwidth=float(sidecar["bandwidth"]),
            knn=sidecar.get("knn"),
            k_hyper=sidecar.get("k_hyper"),
        )
    except (OSError, KeyError, ValueError) as exc:
        raise ParseFailure(f"cannot read graph dump {base}: {exc}") from exc
