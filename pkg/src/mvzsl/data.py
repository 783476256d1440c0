"""Data containers and the file formats that move them around.

Conventions
-----------
* Matrices travel as CSV of decimal floats, one instance per row, written
  with 17 significant digits so float64 values survive a round trip exactly.
* Label files hold one class identifier per line, in matrix row order.
* Prototype and vocabulary files are CSV rows of ``identifier,v1,...,vm``.
* A JSON manifest names every file and its role; see :func:`load_dataset`.

Class identifiers are strings. Wherever an integer coding is needed they
map to contiguous indices in lexicographic order, so the coding is stable
across runs and machines.

All containers are immutable after construction (their arrays are marked
read-only), which makes them safe to share between worker threads.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    ConfigError,
    DimensionMismatch,
    DisjointnessViolated,
    NonFiniteData,
    ParseFailure,
)

# 17 significant digits: the round-trip-exact format for IEEE-754 doubles.
CSV_FLOAT_FORMAT = "%.17g"


def _frozen_array(values, dtype=np.float64, ndim=2) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    if arr.ndim != ndim:
        raise DimensionMismatch(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ViewMatrix:
    """One view of a set of instances.

    Rows are instances, columns are the dimensions of this view's space.

    Parameters
    ----------
    data : ndarray of shape (n, dim)
        Float matrix; must be finite everywhere.
    view_id : str
        Identifier of the view, e.g. ``"X"``, ``"A"`` or ``"V"``.
    """

    data: np.ndarray
    view_id: str

    def __post_init__(self):
        arr = _frozen_array(self.data)
        if not np.isfinite(arr).all():
            raise NonFiniteData(f"view {self.view_id!r} contains NaN or Inf entries")
        object.__setattr__(self, "data", arr)

    @property
    def n_rows(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


def save_matrix(matrix: ViewMatrix | np.ndarray, path) -> None:
    """Write a matrix as CSV with round-trip-exact float formatting."""
    data = matrix.data if isinstance(matrix, ViewMatrix) else np.asarray(matrix, float)
    np.savetxt(path, np.atleast_2d(data), delimiter=",", fmt=CSV_FLOAT_FORMAT)


def load_matrix(path, view_id: str = "") -> ViewMatrix:
    """Read a CSV float matrix written by :func:`save_matrix`.

    Raises
    ------
    ParseFailure
        If the file is missing, empty, ragged or contains non-numeric text.
    """
    try:
        with open(path) as fh:
            arr = np.loadtxt(fh, delimiter=",", ndmin=2)
    except OSError as exc:
        raise ParseFailure(f"cannot read matrix file {path}: {exc}") from exc
    except ValueError as exc:
        raise ParseFailure(f"malformed matrix file {path}: {exc}") from exc
    if arr.size == 0:
        raise ParseFailure(f"matrix file {path} is empty")
    return ViewMatrix(arr, view_id)


def save_labels(labels: Sequence[str], path) -> None:
    with open(path, "w") as fh:
        for lab in labels:
            fh.write(f"{lab}\n")


def load_labels(path) -> tuple[str, ...]:
    """Read one class identifier per line; blank lines are rejected."""
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ParseFailure(f"cannot read label file {path}: {exc}") from exc
    labels = [line.strip() for line in lines if line.strip() != ""]
    if len(labels) != sum(1 for line in lines if line != ""):
        raise ParseFailure(f"label file {path} contains blank identifiers")
    if not labels:
        raise ParseFailure(f"label file {path} is empty")
    return tuple(labels)


def sorted_classes(labels: Sequence[str]) -> tuple[str, ...]:
    """Distinct class identifiers in lexicographic order."""
    return tuple(sorted(set(labels)))


def label_indices(labels: Sequence[str], classes: Sequence[str]) -> np.ndarray:
    """Map string labels to contiguous integer indices over *classes*."""
    pos = {c: i for i, c in enumerate(classes)}
    try:
        return np.array([pos[lab] for lab in labels], dtype=np.intp)
    except KeyError as exc:
        raise ConfigError(f"label {exc.args[0]!r} is not in the class list") from exc


@dataclass(frozen=True, eq=False)
class Dataset:
    """Auxiliary (fully labeled) and target (to be recognized) data.

    The auxiliary portion carries low-level features, one semantic matrix
    per view, and labels. The target portion carries features and, when
    available for evaluation, held-out labels. Auxiliary and target class
    sets must be disjoint.
    """

    auxiliary_features: ViewMatrix
    auxiliary_semantics: tuple[ViewMatrix, ...]
    auxiliary_labels: tuple[str, ...]
    target_features: ViewMatrix
    target_labels: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "auxiliary_semantics", tuple(self.auxiliary_semantics))
        object.__setattr__(self, "auxiliary_labels", tuple(self.auxiliary_labels))
        if self.target_labels is not None:
            object.__setattr__(self, "target_labels", tuple(self.target_labels))
        n_aux = self.auxiliary_features.n_rows
        for sem in self.auxiliary_semantics:
            if sem.n_rows != n_aux:
                raise DimensionMismatch(
                    f"semantic view {sem.view_id!r} has {sem.n_rows} rows, "
                    f"features have {n_aux}"
                )
        if len(self.auxiliary_labels) != n_aux:
            raise DimensionMismatch(
                f"{len(self.auxiliary_labels)} auxiliary labels for {n_aux} rows"
            )
        seen = set()
        for sem in self.auxiliary_semantics:
            if sem.view_id in seen or sem.view_id == self.auxiliary_features.view_id:
                raise ConfigError(f"duplicate view identifier {sem.view_id!r}")
            seen.add(sem.view_id)
        if self.target_labels is not None:
            if len(self.target_labels) != self.target_features.n_rows:
                raise DimensionMismatch(
                    f"{len(self.target_labels)} target labels for "
                    f"{self.target_features.n_rows} rows"
                )
            overlap = set(self.auxiliary_labels) & set(self.target_labels)
            if overlap:
                raise DisjointnessViolated(
                    f"classes appear on both sides: {sorted(overlap)}"
                )
            if len(set(self.target_labels)) < 2:
                raise ConfigError("target data must contain at least 2 classes")

    @property
    def n_auxiliary(self) -> int:
        return self.auxiliary_features.n_rows

    @property
    def n_target(self) -> int:
        return self.target_features.n_rows

    @property
    def auxiliary_classes(self) -> tuple[str, ...]:
        return sorted_classes(self.auxiliary_labels)

    @property
    def target_classes(self) -> tuple[str, ...] | None:
        if self.target_labels is None:
            return None
        return sorted_classes(self.target_labels)

    @property
    def semantic_view_ids(self) -> tuple[str, ...]:
        return tuple(sem.view_id for sem in self.auxiliary_semantics)

    def semantic_view(self, view_id: str) -> ViewMatrix:
        for sem in self.auxiliary_semantics:
            if sem.view_id == view_id:
                return sem
        raise ConfigError(f"no semantic view {view_id!r} in dataset")


@dataclass(frozen=True, eq=False)
class PrototypeSet:
    """One semantic prototype vector per (class, view) pair.

    ``vectors`` maps view id -> class id -> 1-d prototype vector. Every
    view must cover the same class set, and within a view all prototypes
    share one dimensionality.
    """

    vectors: Mapping[str, Mapping[str, np.ndarray]]

    def __post_init__(self):
        frozen: dict[str, dict[str, np.ndarray]] = {}
        class_sets = []
        for view, per_class in self.vectors.items():
            if not per_class:
                raise ConfigError(f"prototype view {view!r} is empty")
            dims = set()
            fr = {}
            for cls, vec in per_class.items():
                arr = _frozen_array(vec, ndim=1)
                if not np.isfinite(arr).all():
                    raise NonFiniteData(f"prototype {cls!r}/{view!r} is not finite")
                dims.add(arr.shape[0])
                fr[cls] = arr
            if len(dims) > 1:
                raise DimensionMismatch(
                    f"prototype view {view!r} mixes dimensions {sorted(dims)}"
                )
            class_sets.append(frozenset(per_class))
            frozen[view] = fr
        if not frozen:
            raise ConfigError("prototype set is empty")
        if len(set(class_sets)) > 1:
            raise DimensionMismatch("prototype views cover different class sets")
        object.__setattr__(self, "vectors", frozen)

    @property
    def views(self) -> tuple[str, ...]:
        return tuple(sorted(self.vectors))

    @property
    def classes(self) -> tuple[str, ...]:
        first = next(iter(self.vectors.values()))
        return tuple(sorted(first))

    def dim(self, view: str) -> int:
        per_class = self.vectors[view]
        return next(iter(per_class.values())).shape[0]

    def matrix(self, view: str, class_order: Sequence[str] | None = None) -> np.ndarray:
        """Stack the prototypes of one view as rows in the given class order."""
        if view not in self.vectors:
            raise ConfigError(f"no prototypes for view {view!r}")
        order = tuple(class_order) if class_order is not None else self.classes
        per_class = self.vectors[view]
        missing = [c for c in order if c not in per_class]
        if missing:
            raise ConfigError(f"no prototype for classes {missing} in view {view!r}")
        return np.vstack([per_class[c] for c in order])


def prototypes_from_instances(
    semantics: ViewMatrix,
    labels: Sequence[str],
    threshold: float | None = 0.5,
) -> dict[str, np.ndarray]:
    """Per-class prototypes as thresholded means of instance-level vectors.

    The mean vector of each class is computed and, when *threshold* is not
    None, binarized to {0, 1} by comparing against it. Pass ``threshold=None``
    to keep the plain continuous means.
    """
    if semantics.n_rows != len(labels):
        raise DimensionMismatch("label count does not match semantic rows")
    out = {}
    labs = np.asarray(labels)
    for cls in sorted_classes(labels):
        mean = semantics.data[labs == cls].mean(axis=0)
        if threshold is not None:
            mean = (mean > threshold).astype(float)
        out[cls] = mean
    return out


@dataclass(frozen=True, eq=False)
class LabelMatrix:
    """Signed label matrix over graph nodes.

    Each row is a node; each column a class. A node known to belong to
    class ``c`` carries +1 in that column and -1 in every other column.
    Unknown nodes are all-zero rows.
    """

    values: np.ndarray
    classes: tuple[str, ...]

    def __post_init__(self):
        arr = _frozen_array(self.values)
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "classes", tuple(self.classes))
        if arr.shape[1] != len(self.classes):
            raise DimensionMismatch(
                f"{arr.shape[1]} columns for {len(self.classes)} classes"
            )
        if not np.isin(arr, (-1.0, 0.0, 1.0)).all():
            raise ConfigError("label matrix entries must be -1, 0 or +1")
        pos = (arr == 1.0).sum(axis=1)
        if (pos > 1).any():
            raise ConfigError("a node may carry at most one positive label")
        labeled = pos == 1
        if not (arr[labeled] != 0).all():
            raise ConfigError("labeled rows must be -1 everywhere except the class")
        if (arr[~labeled] != 0).any():
            raise ConfigError("unlabeled rows must be all zero")

    @classmethod
    def from_assignments(
        cls,
        n_nodes: int,
        classes: Sequence[str],
        assignments: Mapping[int, str],
    ) -> "LabelMatrix":
        """Build the matrix from a node -> class mapping; other rows stay zero."""
        order = tuple(classes)
        col = {c: j for j, c in enumerate(order)}
        values = np.zeros((n_nodes, len(order)))
        for node, lab in assignments.items():
            if not 0 <= node < n_nodes:
                raise ConfigError(f"node index {node} out of range")
            if lab not in col:
                raise ConfigError(f"class {lab!r} is not in the class list")
            values[node, :] = -1.0
            values[node, col[lab]] = 1.0
        return cls(values, order)

    @property
    def n_nodes(self) -> int:
        return self.values.shape[0]

    @property
    def labeled_mask(self) -> np.ndarray:
        return (self.values == 1.0).any(axis=1)


# ---------------------------------------------------------------------------
# identifier,v1,...,vm rows (prototypes, vocabularies)
# ---------------------------------------------------------------------------

def save_identified_rows(path, identifiers: Sequence[str], matrix: np.ndarray) -> None:
    matrix = np.atleast_2d(np.asarray(matrix, float))
    if len(identifiers) != matrix.shape[0]:
        raise DimensionMismatch("one identifier is required per matrix row")
    with open(path, "w") as fh:
        for ident, row in zip(identifiers, matrix):
            cells = ",".join(CSV_FLOAT_FORMAT % v for v in row)
            fh.write(f"{ident},{cells}\n")


def load_identified_rows(path) -> tuple[tuple[str, ...], np.ndarray]:
    """Read ``identifier,v1,...,vm`` rows; returns identifiers and the matrix."""
    try:
        with open(path) as fh:
            lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    except OSError as exc:
        raise ParseFailure(f"cannot read {path}: {exc}") from exc
    if not lines:
        raise ParseFailure(f"file {path} is empty")
    idents, rows = [], []
    width = None
    for ln in lines:
        cells = ln.split(",")
        if len(cells) < 2:
            raise ParseFailure(f"row {ln!r} in {path} has no vector part")
        ident = cells[0].strip()
        if not ident:
            raise ParseFailure(f"blank identifier in {path}")
        try:
            vec = [float(c) for c in cells[1:]]
        except ValueError as exc:
            raise ParseFailure(f"non-numeric value in {path}: {exc}") from exc
        if width is None:
            width = len(vec)
        elif len(vec) != width:
            raise ParseFailure(f"ragged rows in {path}")
        idents.append(ident)
        rows.append(vec)
    return tuple(idents), np.array(rows, float)


def save_prototypes(prototypes: PrototypeSet, paths: Mapping[str, object]) -> None:
    """Write one ``class,v1,...`` CSV per view; *paths* maps view id to path."""
    for view in prototypes.views:
        if view not in paths:
            raise ConfigError(f"no output path given for prototype view {view!r}")
        save_identified_rows(
            paths[view], prototypes.classes, prototypes.matrix(view)
        )


# ---------------------------------------------------------------------------
# manifest
# ---------------------------------------------------------------------------

def _manifest_dir(manifest_path) -> Path:
    return Path(manifest_path).resolve().parent


def _read_manifest(manifest_path) -> dict:
    try:
        with open(manifest_path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ParseFailure(f"cannot read manifest {manifest_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseFailure(f"manifest {manifest_path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseFailure(f"manifest {manifest_path} must be a JSON object")
    return doc


def _load_entry_matrix(base: Path, entry, what: str) -> ViewMatrix:
    if isinstance(entry, str):
        entry = {"path": entry}
    if not isinstance(entry, dict) or "path" not in entry:
        raise ParseFailure(f"manifest entry for {what} needs a 'path'")
    vm = load_matrix(base / entry["path"], entry.get("view", ""))
    declared = entry.get("dim")
    if declared is not None and vm.dim != int(declared):
        raise DimensionMismatch(
            f"{what}: file has {vm.dim} columns, manifest declares {declared}"
        )
    return vm


def load_dataset(manifest_path) -> Dataset:
    """Load a :class:`Dataset` from a JSON manifest.

    Expected layout (paths are relative to the manifest file)::

        {
          "auxiliary": {
            "features":  "aux_X.csv",
            "semantics": [{"view": "A", "path": "aux_A.csv"},
                          {"view": "V", "path": "aux_V.csv"}],
            "labels":    "aux_labels.txt"
          },
          "target": {
            "features": "tgt_X.csv",
            "labels":   "tgt_labels.txt"        # optional
          },
          "prototypes": [{"view": "A", "path": "proto_A.csv"}, ...]
        }
    """
    doc = _read_manifest(manifest_path)
    base = _manifest_dir(manifest_path)
    try:
        aux = doc["auxiliary"]
        tgt = doc["target"]
    except KeyError as exc:
        raise ParseFailure(f"manifest lacks section {exc.args[0]!r}") from exc
    if "features" not in aux or "labels" not in aux or "features" not in tgt:
        raise ParseFailure("manifest must name auxiliary features/labels and target features")

    aux_x = _load_entry_matrix(base, aux["features"], "auxiliary features")
    aux_x = ViewMatrix(aux_x.data, aux_x.view_id or "X")
    semantics = []
    for entry in aux.get("semantics", []):
        vm = _load_entry_matrix(base, entry, f"semantic view {entry.get('view')}")
        if not vm.view_id:
            raise ParseFailure("semantic manifest entries need a 'view' identifier")
        semantics.append(vm)
    aux_labels = load_labels(base / aux["labels"])

    tgt_x = _load_entry_matrix(base, tgt["features"], "target features")
    tgt_x = ViewMatrix(tgt_x.data, tgt_x.view_id or "X")
    tgt_labels = load_labels(base / tgt["labels"]) if tgt.get("labels") else None

    return Dataset(aux_x, tuple(semantics), aux_labels, tgt_x, tgt_labels)


def load_prototypes(manifest_path) -> PrototypeSet:
    """Load the prototype section of a manifest as a :class:`PrototypeSet`."""
    doc = _read_manifest(manifest_path)
    base = _manifest_dir(manifest_path)
    entries = doc.get("prototypes")
    if not entries:
        raise ParseFailure(f"manifest {manifest_path} has no prototypes section")
    vectors: dict[str, dict[str, np.ndarray]] = {}
    for entry in entries:
        view = entry.get("view")
        if not view or "path" not in entry:
            raise ParseFailure("prototype entries need 'view' and 'path'")
        idents, matrix = load_identified_rows(base / entry["path"])
        declared = entry.get("dim")
        if declared is not None and matrix.shape[1] != int(declared):
            raise DimensionMismatch(
                f"prototype view {view!r}: {matrix.shape[1]} columns, "
                f"manifest declares {declared}"
            )
        if len(set(idents)) != len(idents):
            raise ParseFailure(f"duplicate class in prototype file for view {view!r}")
        vectors[view] = {c: matrix[i] for i, c in enumerate(idents)}
    return PrototypeSet(vectors)


def write_manifest(
    path,
    *,
    auxiliary_features: str,
    auxiliary_semantics: Mapping[str, str],
    auxiliary_labels: str,
    target_features: str,
    target_labels: str | None = None,
    prototypes: Mapping[str, str] | None = None,
) -> None:
    """Write a manifest referring to already-saved files (paths are relative)."""
    doc = {
        "auxiliary": {
            "features": auxiliary_features,
            "semantics": [
                {"view": v, "path": p} for v, p in sorted(auxiliary_semantics.items())
            ],
            "labels": auxiliary_labels,
        },
        "target": {"features": target_features},
    }
    if target_labels is not None:
        doc["target"]["labels"] = target_labels
    if prototypes:
        doc["prototypes"] = [
            {"view": v, "path": p} for v, p in sorted(prototypes.items())
        ]
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
