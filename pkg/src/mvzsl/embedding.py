"""Multi-view CCA and the eigenvalue-weighted common embedding.

Given two or more views of the same instances (rows aligned), a joint
correlation analysis finds one projection per view into a shared space of
dimension ``m_e = sum_i m_i``. The projections maximize the summed
cross-view correlation subject to a joint whitening constraint; they come
from the generalized eigenproblem

    C v = rho D v

where ``C`` is the full block covariance matrix of the concatenated
centered views and ``D`` its block diagonal (each block ridge-stabilized
by ``eps``). All ``m_e`` eigenvectors are kept. The shared eigenvalues
``rho`` measure how strongly each embedding coordinate correlates across
views: a coordinate perfectly shared by two views scores 2, an
uncorrelated one scores 1, so raising them to a power and multiplying them
in softly favors the coordinates where the views agree:

    embedding(rows) = (rows - mean) @ W_view @ diag(rho ** power)

followed by l2 normalization of every row, after which cosine similarity
is a plain inner product. A hard variant keeps only the top coordinates
unweighted instead.

Determinism: eigenvalues are sorted nonincreasing with a stable sort and
each eigenvector's largest-magnitude entry is made positive, so a given
input always yields byte-identical projections.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg

from .data import ViewMatrix, load_matrix, save_matrix
from .errors import (
    ConfigError,
    DimensionMismatch,
    MissingView,
    NonFiniteData,
    ParseFailure,
    SingularSystem,
)

logger = logging.getLogger(__name__)

# rows whose projected norm falls below this are flagged and left at zero
ZERO_ROW_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class MvccaModel:
    """A fitted multi-view correlation embedding.

    Attributes
    ----------
    view_ids : tuple of str
        Views in block order.
    view_dims : dict view -> input dimension.
    weights : dict view -> ndarray (m_i, m_e)
        Per-view projection blocks of the generalized eigenvectors.
    eigenvalues : ndarray (m_e,)
        Shared generalized eigenvalues, sorted nonincreasing, all >= 0.
    view_means : dict view -> ndarray (m_i,)
        Per-view training means, subtracted before projecting.
    soft_power : float
        Exponent applied to the eigenvalues at embedding time.
    cov_ridge : dict view -> float
        The eps actually added to each view's covariance diagonal.
    covariance : ndarray (m_e, m_e) or None
        Raw block covariance of the training data; kept on freshly fitted
        models for constraint checking, dropped by serialization.
    """

    view_ids: tuple[str, ...]
    view_dims: dict[str, int]
    weights: dict[str, np.ndarray]
    eigenvalues: np.ndarray
    view_means: dict[str, np.ndarray]
    soft_power: float = 4.0
    cov_ridge: dict[str, float] = field(default_factory=dict)
    covariance: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "view_ids", tuple(self.view_ids))
        eig = np.array(self.eigenvalues, float, copy=True)
        if eig.ndim != 1:
            raise DimensionMismatch("eigenvalues must be a vector")
        if (eig < -1e-9).any():
            raise ConfigError("eigenvalues must be nonnegative")
        eig = np.maximum(eig, 0.0)
        eig.setflags(write=False)
        object.__setattr__(self, "eigenvalues", eig)
        weights = {}
        for view in self.view_ids:
            if view not in self.weights:
                raise MissingView(f"no weight block for view {view!r}")
            w = np.array(self.weights[view], float, copy=True)
            if w.shape != (self.view_dims[view], eig.shape[0]):
                raise DimensionMismatch(
                    f"weight block for {view!r} has shape {w.shape}, expected "
                    f"({self.view_dims[view]}, {eig.shape[0]})"
                )
            w.setflags(write=False)
            weights[view] = w
        object.__setattr__(self, "weights", weights)
        means = {}
        for view in self.view_ids:
            mu = np.array(self.view_means.get(view, np.zeros(self.view_dims[view])),
                          float, copy=True)
            if mu.shape != (self.view_dims[view],):
                raise DimensionMismatch(f"mean for {view!r} has shape {mu.shape}")
            mu.setflags(write=False)
            means[view] = mu
        object.__setattr__(self, "view_means", means)

    @property
    def embed_dim(self) -> int:
        return int(self.eigenvalues.shape[0])

    def coordinate_weights(self, hard_dims: int | None = None) -> np.ndarray:
        """Per-coordinate weights: soft eigenvalue powers or a hard top cut."""
        if hard_dims is None:
            return self.eigenvalues ** self.soft_power
        if not 1 <= hard_dims <= self.embed_dim:
            raise ConfigError(
                f"hard_dims must be in [1, {self.embed_dim}], got {hard_dims}"
            )
        w = np.zeros(self.embed_dim)
        w[:hard_dims] = 1.0  # eigenvalues are sorted, so the cut is a prefix
        return w


@dataclass(frozen=True, eq=False)
class EmbeddedView:
    """Rows of one view mapped into the common embedding space.

    Every row is l2-normalized; rows whose projection vanished are left at
    zero and their indices recorded in ``zero_rows``.
    """

    rows: np.ndarray
    view_id: str
    zero_rows: tuple[int, ...] = ()

    def __post_init__(self):
        arr = np.array(self.rows, float, copy=True)
        if arr.ndim != 2:
            raise DimensionMismatch("embedded rows must form a 2-d array")
        arr.setflags(write=False)
        object.__setattr__(self, "rows", arr)
        object.__setattr__(self, "zero_rows", tuple(self.zero_rows))

    @property
    def n_rows(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]


def _block_slices(dims: Sequence[int]) -> list[slice]:
    edges = np.concatenate([[0], np.cumsum(dims)])
    return [slice(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]


def fit_mvcca(
    views: Sequence[ViewMatrix],
    eps: float | None = None,
    soft_power: float = 4.0,
) -> MvccaModel:
    """Fit the joint correlation embedding over two or more aligned views.

    Parameters
    ----------
    views : sequence of ViewMatrix
        All with the same row count; block order follows this sequence.
    eps : float, optional
        Ridge added to every view's covariance diagonal. Defaults to
        1e-6 times the mean diagonal of that view's covariance, which is
        scale free. Pass 0.0 only when every view has full-rank covariance.
    soft_power : float
        Eigenvalue exponent stored on the model (4 by default).

    Raises
    ------
    SingularSystem
        When the eigensolver fails, which includes eps = 0 on singular
        covariance blocks.
    """
    if len(views) < 2:
        raise ConfigError("the joint embedding needs at least two views")
    ids = [v.view_id for v in views]
    if len(set(ids)) != len(ids):
        raise ConfigError(f"duplicate view identifiers: {ids}")
    n = views[0].n_rows
    if any(v.n_rows != n for v in views):
        raise DimensionMismatch("all views must have the same number of rows")
    if n < 2:
        raise ConfigError("at least two rows are needed to estimate covariance")
    if eps is not None and eps < 0:
        raise ConfigError("eps must be nonnegative")

    dims = [v.dim for v in views]
    means = [v.data.mean(axis=0) for v in views]
    centered = np.hstack([v.data - mu for v, mu in zip(views, means)])
    cov = centered.T @ centered / (n - 1)
    cov = (cov + cov.T) / 2.0
    if not np.isfinite(cov).all():
        raise NonFiniteData("covariance of the stacked views is not finite")

    slices = _block_slices(dims)
    ridges = {}
    c_reg = cov.copy()
    d_blk = np.zeros_like(cov)
    for view, sl in zip(ids, slices):
        block = cov[sl, sl]
        eps_i = eps if eps is not None else 1e-6 * float(np.mean(np.diag(block)))
        ridges[view] = float(eps_i)
        c_reg[sl, sl] = block + eps_i * np.eye(block.shape[0])
        d_blk[sl, sl] = c_reg[sl, sl]

    try:
        vals, vecs = scipy.linalg.eigh(c_reg, d_blk)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError, ValueError) as exc:
        raise SingularSystem(f"joint eigenproblem failed: {exc}") from exc

    order = np.argsort(-vals, kind="stable")
    vals = np.maximum(vals[order], 0.0)
    vecs = vecs[:, order]
    # deterministic sign: the largest-magnitude entry of each vector is positive
    flip = vecs[np.abs(vecs).argmax(axis=0), np.arange(vecs.shape[1])] < 0
    vecs[:, flip] *= -1.0

    weights = {view: vecs[sl, :] for view, sl in zip(ids, slices)}
    return MvccaModel(
        view_ids=tuple(ids),
        view_dims={view: d for view, d in zip(ids, dims)},
        weights=weights,
        eigenvalues=vals,
        view_means={view: mu for view, mu in zip(ids, means)},
        soft_power=float(soft_power),
        cov_ridge=ridges,
        covariance=cov,
    )


def embed(
    view: ViewMatrix,
    model: MvccaModel,
    hard_dims: int | None = None,
) -> EmbeddedView:
    """Map one view's rows into the common space and l2-normalize them.

    ``hard_dims`` switches the soft eigenvalue weighting off and keeps only
    the top coordinates instead (a truncation ablation). Rows that project
    to (numerically) nothing are left at zero and flagged.
    """
    if view.view_id not in model.weights:
        raise MissingView(f"model has no view {view.view_id!r}")
    if view.dim != model.view_dims[view.view_id]:
        raise DimensionMismatch(
            f"view {view.view_id!r} has {view.dim} columns, model expects "
            f"{model.view_dims[view.view_id]}"
        )
    centered = view.data - model.view_means[view.view_id]
    proj = centered @ model.weights[view.view_id]
    proj = proj * model.coordinate_weights(hard_dims)
    norms = np.linalg.norm(proj, axis=1)
    zero = norms < ZERO_ROW_TOL
    if zero.any():
        logger.warning(
            "view %s: %d rows vanished in the embedding and stay at zero",
            view.view_id, int(zero.sum()),
        )
    out = np.zeros_like(proj)
    np.divide(proj, norms[:, None], out=out, where=~zero[:, None])
    return EmbeddedView(out, view.view_id, tuple(np.flatnonzero(zero)))


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity of two already-normalized embedding rows."""
    return float(np.dot(a, b))


# ---------------------------------------------------------------------------
# fitted-constraint diagnostics
# ---------------------------------------------------------------------------

def _require_covariance(model: MvccaModel) -> np.ndarray:
    if model.covariance is None:
        raise ConfigError(
            "this model was loaded without its training covariance; "
            "constraint residuals are only available on freshly fitted models"
        )
    return model.covariance


def _stacked_weights(model: MvccaModel) -> np.ndarray:
    return np.vstack([model.weights[v] for v in model.view_ids])


def _regularized_blocks(model: MvccaModel) -> tuple[np.ndarray, np.ndarray]:
    cov = _require_covariance(model).copy()
    dims = [model.view_dims[v] for v in model.view_ids]
    d_blk = np.zeros_like(cov)
    for view, sl in zip(model.view_ids, _block_slices(dims)):
        cov[sl, sl] += model.cov_ridge.get(view, 0.0) * np.eye(sl.stop - sl.start)
        d_blk[sl, sl] = cov[sl, sl]
    return cov, d_blk


def whitening_residual(model: MvccaModel) -> float:
    """Max deviation of the joint whitening constraint V' D V = I.

    With all m_e coordinates kept, whitening holds jointly over the block
    diagonal covariance (per-view whitening of an m_e-column block is not
    attainable, since the block has rank at most m_i).
    """
    _, d_blk = _regularized_blocks(model)
    v = _stacked_weights(model)
    gram = v.T @ d_blk @ v
    return float(np.abs(gram - np.eye(gram.shape[0])).max())


def decorrelation_residual(model: MvccaModel) -> float:
    """Max off-diagonal of V' C V: distinct coordinates carry no shared
    covariance, within views or across them."""
    c_reg, _ = _regularized_blocks(model)
    v = _stacked_weights(model)
    gram = v.T @ c_reg @ v
    off = gram - np.diag(np.diag(gram))
    return float(np.abs(off).max())


def total_distance_objective(model: MvccaModel, weights: Mapping[str, np.ndarray] | None = None) -> float:
    """Summed squared distances between projected view pairs on the fit data.

    Evaluates sum_{i,j} |Phi_i W_i - Phi_j W_j|_F^2 (covariance-scaled) for
    the model's own weights or any same-shaped alternative blocks.
    """
    cov = _require_covariance(model)
    dims = [model.view_dims[v] for v in model.view_ids]
    slices = dict(zip(model.view_ids, _block_slices(dims)))
    blocks = weights if weights is not None else model.weights
    total = 0.0
    for vi in model.view_ids:
        for vj in model.view_ids:
            if vi == vj:
                continue
            wi, wj = blocks[vi], blocks[vj]
            cii = cov[slices[vi], slices[vi]]
            cjj = cov[slices[vj], slices[vj]]
            cij = cov[slices[vi], slices[vj]]
            total += float(
                np.trace(wi.T @ cii @ wi)
                + np.trace(wj.T @ cjj @ wj)
                - 2.0 * np.trace(wi.T @ cij @ wj)
            )
    return total


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def save_mvcca(model: MvccaModel, basename) -> None:
    """Write ``<basename>.json`` plus one ``<basename>.<view>.csv`` per view."""
    base = str(basename)
    for view in model.view_ids:
        save_matrix(model.weights[view], f"{base}.{view}.csv")
    sidecar = {
        "view_ids": list(model.view_ids),
        "view_dims": {v: int(d) for v, d in model.view_dims.items()},
        "eigenvalues": [float(x) for x in model.eigenvalues],
        "view_means": {v: [float(x) for x in model.view_means[v]]
                       for v in model.view_ids},
        "soft_power": model.soft_power,
        "cov_ridge": {v: float(model.cov_ridge.get(v, 0.0)) for v in model.view_ids},
    }
    with open(base + ".json", "w") as fh:
        json.dump(sidecar, fh, indent=2)
        fh.write("\n")


def load_mvcca(basename) -> MvccaModel:
    base = str(basename)
    try:
        with open(base + ".json") as fh:
            sidecar = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseFailure(f"cannot read embedding sidecar: {exc}") from exc
    try:
        view_ids = tuple(sidecar["view_ids"])
        model = MvccaModel(
            view_ids=view_ids,
            view_dims={v: int(sidecar["view_dims"][v]) for v in view_ids},
            weights={v: load_matrix(f"{base}.{v}.csv").data for v in view_ids},
            eigenvalues=np.asarray(sidecar["eigenvalues"], float),
            view_means={v: np.asarray(sidecar["view_means"][v], float)
                        for v in view_ids},
            soft_power=float(sidecar["soft_power"]),
            cov_ridge={v: float(sidecar["cov_ridge"][v]) for v in view_ids},
        )
    except KeyError as exc:
        raise ParseFailure(f"embedding sidecar lacks {exc.args[0]!r}") from exc
    return model
