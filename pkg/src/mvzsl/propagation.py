"""Random-walk fusion of multiple graphs and closed-form label propagation.

Every graph over the shared node set defines a row-stochastic transition
matrix (isolated nodes get a self loop) and a stationary distribution
proportional to node degree. The graphs are fused through Bayes' rule at
each node: with uniform graph priors, the chance that a walk sitting at
node k came from graph G is proportional to that graph's stationary mass
at k. The fused walk takes one step by first picking a graph that way and
then stepping inside it:

    P(k, l) = sum_G p(k -> l | G) p(G | k)
    pi(k)   = sum_G pi(k | G) p(G)

The induced Laplacian is L = Pi - (Pi P + P' Pi) / 2 with Pi = diag(pi).
Known labels enter as a signed matrix (+1 own class, -1 other classes,
0 unknown) and the propagated scores solve the regularized system

    (eta Pi + L) Z_hat = eta Pi Z

directly (symmetric dense solve). Scores decide classes by row argmax;
ties fall to the lowest class index and are logged.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg

from .data import LabelMatrix, PrototypeSet, ViewMatrix
from .embedding import EmbeddedView, MvccaModel, embed
from .errors import (
    ConfigError,
    DimensionMismatch,
    MissingView,
    NoSupervision,
    SingularPropagation,
)
from .graphs import NodeSet, SimilarityGraph, build_graph_suite

logger = logging.getLogger(__name__)

STATIONARY_FLOOR = 1e-12


def per_graph_transition(graph: SimilarityGraph) -> np.ndarray:
    """Row-normalized transition matrix; isolated nodes self-loop."""
    w = graph.weights
    deg = w.sum(axis=1)
    isolated = deg == 0.0
    p = np.zeros_like(w)
    np.divide(w, deg[:, None], out=p, where=~isolated[:, None])
    if isolated.any():
        idx = np.flatnonzero(isolated)
        p[idx, idx] = 1.0
    return p


def stationary_distribution(graph: SimilarityGraph) -> np.ndarray:
    """Degree over total edge weight; all zeros for an empty graph."""
    deg = graph.weights.sum(axis=1)
    total = deg.sum()
    if total == 0.0:
        return np.zeros_like(deg)
    return deg / total


def _uniform_priors(n_graphs: int) -> np.ndarray:
    return np.full(n_graphs, 1.0 / n_graphs)


def _prepare_priors(priors, n_graphs: int) -> np.ndarray:
    if priors is None:
        return _uniform_priors(n_graphs)
    p = np.asarray(priors, float)
    if p.shape != (n_graphs,):
        raise DimensionMismatch(f"need {n_graphs} graph priors, got shape {p.shape}")
    if (p < 0).any() or p.sum() <= 0:
        raise ConfigError("graph priors must be nonnegative and sum to a positive value")
    return p / p.sum()


def graph_posterior(
    graphs: Sequence[SimilarityGraph],
    node: int,
    priors: Sequence[float] | None = None,
) -> np.ndarray:
    """p(G | node): prior-weighted stationary mass, normalized over graphs.

    A node carrying no stationary mass in any graph falls back to the
    priors themselves.
    """
    p = _prepare_priors(priors, len(graphs))
    mass = np.array([stationary_distribution(g)[node] for g in graphs]) * p
    total = mass.sum()
    if total == 0.0:
        return p.copy()
    return mass / total


@dataclass(frozen=True, eq=False)
class WalkModel:
    """The fused random walk over all graphs.

    Attributes
    ----------
    transition : ndarray (N, N)
        Fused row-stochastic transition matrix.
    stationary : ndarray (N,)
        Fused stationary distribution (floored, summing to one).
    laplacian : ndarray (N, N)
    posteriors : ndarray (N, n_graphs)
        p(G | k) per node.
    priors : ndarray (n_graphs,)
    graph_labels : tuple of str
    """

    transition: np.ndarray
    stationary: np.ndarray
    laplacian: np.ndarray
    posteriors: np.ndarray
    priors: np.ndarray
    graph_labels: tuple[str, ...] = ()
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("transition", "stationary", "laplacian", "posteriors", "priors"):
            arr = np.array(getattr(self, name), float, copy=True)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "graph_labels", tuple(self.graph_labels))
        n = self.transition.shape[0]
        if self.transition.shape != (n, n) or self.laplacian.shape != (n, n):
            raise DimensionMismatch("transition and laplacian must be square and equal")
        if self.stationary.shape != (n,):
            raise DimensionMismatch("stationary vector does not match the node count")

    @property
    def n_nodes(self) -> int:
        return self.transition.shape[0]


def fuse_walk(
    graphs: Sequence[SimilarityGraph],
    priors: Sequence[float] | None = None,
) -> WalkModel:
    """Fuse per-graph walks through node-wise Bayes posteriors."""
    if not graphs:
        raise ConfigError("at least one graph is required")
    n = graphs[0].n_nodes
    if any(g.n_nodes != n for g in graphs):
        raise DimensionMismatch("all graphs must share one node set")
    p_graph = _prepare_priors(priors, len(graphs))

    stationaries = np.stack([stationary_distribution(g) for g in graphs], axis=1)
    weighted = stationaries * p_graph
    node_mass = weighted.sum(axis=1)
    posteriors = np.zeros_like(weighted)
    has_mass = node_mass > 0
    np.divide(weighted, node_mass[:, None], out=posteriors, where=has_mass[:, None])
    if (~has_mass).any():
        posteriors[~has_mass] = p_graph  # no evidence: fall back to the priors
        logger.warning("%d nodes have no stationary mass in any graph",
                       int((~has_mass).sum()))

    transition = np.zeros((n, n))
    for gi, g in enumerate(graphs):
        transition += posteriors[:, gi][:, None] * per_graph_transition(g)

    pi = stationaries @ p_graph
    pi = np.maximum(pi, STATIONARY_FLOOR)
    pi = pi / pi.sum()

    flow = pi[:, None] * transition
    laplacian = np.diag(pi) - (flow + flow.T) / 2.0
    return WalkModel(
        transition=transition,
        stationary=pi,
        laplacian=laplacian,
        posteriors=posteriors,
        priors=p_graph,
        graph_labels=tuple(g.label for g in graphs),
        diagnostics={
            "isolated_nodes": [int(i) for i in np.flatnonzero(~has_mass)],
            "mean_posterior": [float(x) for x in posteriors.mean(axis=0)],
        },
    )


@dataclass(frozen=True, eq=False)
class PropagationResult:
    """Propagated scores and the classes they decide.

    ``scores`` covers every node (instances first, then prototype nodes);
    ``predicted`` is the per-node argmax class. Rows that were labeled in
    the input keep their flag in ``labeled_mask``.
    """

    scores: np.ndarray
    classes: tuple[str, ...]
    predicted: tuple[str, ...]
    labeled_mask: np.ndarray
    n_instances: int
    eta: float
    residual: float
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        arr = np.array(self.scores, float, copy=True)
        arr.setflags(write=False)
        object.__setattr__(self, "scores", arr)
        mask = np.array(self.labeled_mask, bool, copy=True)
        mask.setflags(write=False)
        object.__setattr__(self, "labeled_mask", mask)
        object.__setattr__(self, "classes", tuple(self.classes))
        object.__setattr__(self, "predicted", tuple(self.predicted))

    def unlabeled_instance_indices(self) -> np.ndarray:
        idx = np.arange(self.n_instances)
        return idx[~self.labeled_mask[: self.n_instances]]

    def instance_predictions(self) -> tuple[str, ...]:
        return self.predicted[: self.n_instances]


def propagate(
    walk: WalkModel,
    labels: LabelMatrix,
    eta: float = 2.0,
    n_instances: int | None = None,
) -> PropagationResult:
    """Solve (eta Pi + L) Z_hat = eta Pi Z and take per-node argmax classes."""
    if eta <= 0:
        raise ConfigError("eta must be positive")
    if labels.n_nodes != walk.n_nodes:
        raise DimensionMismatch(
            f"label matrix covers {labels.n_nodes} nodes, walk has {walk.n_nodes}"
        )

    pi = walk.stationary
    system = eta * np.diag(pi) + walk.laplacian
    rhs = eta * pi[:, None] * labels.values
    try:
        scores = scipy.linalg.solve(system, rhs, assume_a="sym")
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError, ValueError) as exc:
        raise SingularPropagation(f"propagation system is singular: {exc}") from exc
    residual = float(np.abs(system @ scores - rhs).max())

    best = scores.argmax(axis=1)
    top = scores.max(axis=1, keepdims=True)
    tied = (scores == top).sum(axis=1) > 1
    if tied.any():
        logger.info("argmax ties on %d nodes resolved to the lowest class index",
                    int(tied.sum()))
    predicted = tuple(labels.classes[j] for j in best)
    return PropagationResult(
        scores=scores,
        classes=labels.classes,
        predicted=predicted,
        labeled_mask=labels.labeled_mask,
        n_instances=walk.n_nodes if n_instances is None else n_instances,
        eta=float(eta),
        residual=residual,
        diagnostics={"tie_count": int(tied.sum()), **walk.diagnostics},
    )


# ---------------------------------------------------------------------------
# end-to-end recognition over embedded views
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RecognizeConfig:
    """Graph and propagation settings for :func:`recognize`."""

    graph_kinds: tuple[str, ...] = ("hetero_hyper", "two_graph")
    knn: int | None = 30
    k_hyper: int = 30
    eta: float = 2.0
    hard_dims: int | None = None
    priors: tuple[float, ...] | None = None


def normalize_rows(matrix: np.ndarray) -> np.ndarray:
    """l2-normalize rows, leaving zero rows at zero."""
    arr = np.asarray(matrix, float)
    norms = np.linalg.norm(arr, axis=1, keepdims=True)
    out = np.zeros_like(arr)
    np.divide(arr, norms, out=out, where=norms > 0)
    return out


def embed_prototypes(
    prototypes: PrototypeSet,
    model: MvccaModel,
    view_ids: Sequence[str],
    hard_dims: int | None = None,
) -> dict[str, np.ndarray]:
    """Embed prototypes for every requested view, synthesizing missing ones.

    Views carrying prototypes are embedded through the model. A view
    without prototypes (the low-level feature view) receives the
    renormalized mean of the available embedded prototypes.
    """
    out: dict[str, np.ndarray] = {}
    classes = prototypes.classes
    semantic = [v for v in view_ids if v in prototypes.vectors]
    if not semantic:
        raise MissingView("no requested view carries prototypes")
    for view in semantic:
        vm = embed_view_matrix(prototypes.matrix(view, classes), view, model, hard_dims)
        out[view] = vm
    stack = np.stack([out[v] for v in semantic])
    synthesized = normalize_rows(stack.mean(axis=0))
    for view in view_ids:
        if view not in out:
            if view not in model.view_ids:
                raise MissingView(f"model has no view {view!r}")
            out[view] = synthesized
    return out


def embed_view_matrix(matrix, view_id, model, hard_dims=None) -> np.ndarray:
    return embed(ViewMatrix(matrix, view_id), model, hard_dims=hard_dims).rows


def recognize(
    target_views: Mapping[str, EmbeddedView],
    prototypes: PrototypeSet | None = None,
    model: MvccaModel | None = None,
    labeled: Mapping[int, str] | None = None,
    config: RecognizeConfig | None = None,
) -> PropagationResult:
    """Zero-shot / N-shot recognition by propagation over the graph suite.

    Supervision comes from prototype nodes (zero-shot), labeled instances
    (conventional N-shot), or both. Prototypes are embedded through the
    model, the feature view's prototype is synthesized from the semantic
    ones, the labeled matrix is assembled, the graphs are built and fused,
    and the scores are propagated.

    Parameters
    ----------
    target_views : mapping view -> EmbeddedView
        The embedded (or otherwise row-normalized) target instances.
    prototypes : PrototypeSet, optional
        Omit for the labels-only condition.
    model : MvccaModel, optional
        Needed to embed prototypes; without a model, prototype vectors are
        used as given (after row normalization) in the views they cover.
    labeled : mapping instance index -> class, optional
    """
    cfg = config or RecognizeConfig()
    labeled = dict(labeled or {})
    if prototypes is None and not labeled:
        raise NoSupervision("provide prototypes, labeled instances, or both")

    view_ids = tuple(target_views)
    if not view_ids:
        raise ConfigError("at least one target view is required")
    n_instances = next(iter(target_views.values())).n_rows
    if any(ev.n_rows != n_instances for ev in target_views.values()):
        raise DimensionMismatch("target views disagree on the instance count")
    for idx in labeled:
        if not 0 <= idx < n_instances:
            raise ConfigError(f"labeled index {idx} is out of range")

    classes = set(labeled.values())
    proto_classes: tuple[str, ...] = ()
    proto_rows: dict[str, np.ndarray] = {}
    if prototypes is not None:
        proto_classes = prototypes.classes
        classes |= set(proto_classes)
        if model is not None:
            proto_rows = embed_prototypes(prototypes, model, view_ids, cfg.hard_dims)
        else:
            for view in view_ids:
                if view not in prototypes.vectors:
                    raise MissingView(
                        f"view {view!r} has no prototypes and no model to synthesize them"
                    )
                mat = prototypes.matrix(view, proto_classes)
                if mat.shape[1] != target_views[view].dim:
                    raise DimensionMismatch(
                        f"prototypes of view {view!r} do not match its embedding width"
                    )
                proto_rows[view] = normalize_rows(mat)
    class_order = tuple(sorted(classes))

    stacked = {}
    for view in view_ids:
        inst = target_views[view].rows
        rows = np.vstack([inst, proto_rows[view]]) if proto_rows else inst
        stacked[view] = EmbeddedView(rows, view,
                                     target_views[view].zero_rows)
    nodes = NodeSet(stacked, n_instances, proto_classes)

    assignments: dict[int, str] = dict(labeled)
    for offset, cls in enumerate(proto_classes):
        assignments[n_instances + offset] = cls
    label_matrix = LabelMatrix.from_assignments(nodes.n_nodes, class_order, assignments)

    graphs = build_graph_suite(nodes, cfg.graph_kinds, knn=cfg.knn, k_hyper=cfg.k_hyper)
    walk = fuse_walk(graphs, cfg.priors)
    result = propagate(walk, label_matrix, eta=cfg.eta, n_instances=n_instances)
    result.diagnostics["graphs"] = list(walk.graph_labels)
    result.diagnostics["bandwidths"] = {g.label: g.bandwidth for g in graphs}
    return result
