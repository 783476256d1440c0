"""Semantic projections: ridge regression from features to each view.

One projection is trained per semantic view on the auxiliary data and then
applied to the target features, giving every target instance an estimated
semantic vector in that view. Each output dimension is an independent
ridge problem

    min_{w, b}  sum_k (x_k . w + b - y_k)^2 + ridge * |w|^2

with an unpenalized intercept. All output dimensions share the same design
matrix, so they are solved jointly through one least-squares factorization;
the fit is a pure function of its inputs and safe under a parallel map over
output dimensions.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .data import CSV_FLOAT_FORMAT, ViewMatrix, load_matrix, save_matrix
from .errors import (
    ConfigError,
    DimensionMismatch,
    NonFiniteData,
    ParseFailure,
    SingularSystem,
)


def default_ridge(features: ViewMatrix | np.ndarray) -> float:
    """Scale-aware ridge default: 1e-3 * trace(X^T X) / n_columns."""
    x = features.data if isinstance(features, ViewMatrix) else np.asarray(features, float)
    return 1e-3 * float(np.sum(x * x)) / x.shape[1]


@dataclass(frozen=True, eq=False)
class ProjectionModel:
    """A fitted feature-to-semantic-view regression.

    Attributes
    ----------
    weights : ndarray of shape (feature_dim, output_dim)
    bias : ndarray of shape (output_dim,)
    ridge : float
        The penalty the model was trained with.
    view_id : str
        The semantic view this model predicts.
    """

    weights: np.ndarray
    bias: np.ndarray
    ridge: float
    view_id: str

    def __post_init__(self):
        w = np.array(self.weights, float, copy=True)
        b = np.array(self.bias, float, copy=True)
        if w.ndim != 2 or b.ndim != 1 or b.shape[0] != w.shape[1]:
            raise DimensionMismatch("weights must be (t, m) with an m-length bias")
        if not (np.isfinite(w).all() and np.isfinite(b).all()):
            raise NonFiniteData("projection parameters are not finite")
        w.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def feature_dim(self) -> int:
        return self.weights.shape[0]

    @property
    def output_dim(self) -> int:
        return self.weights.shape[1]


def train_projection(
    features: ViewMatrix,
    semantics: ViewMatrix,
    ridge: float | None = None,
) -> ProjectionModel:
    """Fit the per-dimension ridge regression from *features* to *semantics*.

    Parameters
    ----------
    features : ViewMatrix of shape (n, t)
    semantics : ViewMatrix of shape (n, m)
        Training targets; rows must align with *features*.
    ridge : float, optional
        Nonnegative penalty on the weights (never on the intercept).
        Defaults to :func:`default_ridge` of the features.

    Raises
    ------
    SingularSystem
        If ``ridge == 0`` and the normal equations are singular.
    """
    x = features.data
    y = semantics.data
    if x.shape[0] != y.shape[0]:
        raise DimensionMismatch(
            f"{x.shape[0]} feature rows vs {y.shape[0]} semantic rows"
        )
    if ridge is None:
        ridge = default_ridge(features)
    if ridge < 0:
        raise ConfigError("ridge must be nonnegative")

    n, t = x.shape
    design = np.hstack([x, np.ones((n, 1))])
    if ridge == 0.0:
        if np.linalg.matrix_rank(design) < t + 1:
            raise SingularSystem(
                "normal equations are singular with ridge = 0; set ridge > 0"
            )
        aug, rhs = design, y
    else:
        # sqrt-penalty rows keep the intercept column unregularized
        pen = np.hstack([np.sqrt(ridge) * np.eye(t), np.zeros((t, 1))])
        aug = np.vstack([design, pen])
        rhs = np.vstack([y, np.zeros((t, y.shape[1]))])
    sol, *_ = scipy.linalg.lstsq(aug, rhs)
    model = ProjectionModel(sol[:t], sol[t], float(ridge), semantics.view_id)
    fitted = apply_projection(model, features)
    if not np.isfinite(fitted.data).all():
        raise NonFiniteData("projection of the training data is not finite")
    return model


def apply_projection(model: ProjectionModel, features: ViewMatrix) -> ViewMatrix:
    """Predict semantic vectors for every feature row."""
    if features.dim != model.feature_dim:
        raise DimensionMismatch(
            f"model expects {model.feature_dim} feature columns, got {features.dim}"
        )
    return ViewMatrix(features.data @ model.weights + model.bias, model.view_id)


def save_projection(model: ProjectionModel, basename) -> None:
    """Write ``<basename>.csv`` (weights) and ``<basename>.json`` (sidecar)."""
    base = str(basename)
    save_matrix(model.weights, base + ".csv")
    sidecar = {
        "view_id": model.view_id,
        "ridge": model.ridge,
        "feature_dim": model.feature_dim,
        "output_dim": model.output_dim,
        "bias": [float(CSV_FLOAT_FORMAT % b) for b in model.bias],
    }
    with open(base + ".json", "w") as fh:
        json.dump(sidecar, fh, indent=2)
        fh.write("\n")


def load_projection(basename) -> ProjectionModel:
    base = str(basename)
    weights = load_matrix(base + ".csv").data
    try:
        with open(base + ".json") as fh:
            sidecar = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseFailure(f"cannot read projection sidecar: {exc}") from exc
    try:
        model = ProjectionModel(
            weights, np.asarray(sidecar["bias"], float),
            float(sidecar["ridge"]), sidecar["view_id"],
        )
    except KeyError as exc:
        raise ParseFailure(f"projection sidecar lacks {exc.args[0]!r}") from exc
    if model.feature_dim != sidecar.get("feature_dim", model.feature_dim) or (
        model.output_dim != sidecar.get("output_dim", model.output_dim)
    ):
        raise DimensionMismatch("projection sidecar dims disagree with the weights")
    return model
