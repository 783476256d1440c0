"""End-to-end experiment driver: variants, baselines and run records.

One config fully determines a run: where the data comes from (a synthetic
world or a manifest), which views take part, whether the joint embedding
is used, which graphs are built, how recognition is done (label
propagation, nearest prototype, or a per-attribute posterior baseline),
and how much target supervision is available (prototypes and/or N labeled
instances per class). Evaluation always happens on the target instances
that received no label.

Run records echo the config next to the scores, so any number in a summary
can be traced back to the exact run that produced it. Records are written
atomically (temp file + rename).
"""
from __future__ import annotations

import dataclasses
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .data import (
    Dataset,
    PrototypeSet,
    ViewMatrix,
    load_dataset,
    load_prototypes,
)
from .embedding import EmbeddedView, MvccaModel, embed, fit_mvcca
from .errors import ConfigError, MetricsError, NoSupervision
from .metrics import MetricsReport, compute_metrics
from .projection import apply_projection, train_projection
from .propagation import (
    RecognizeConfig,
    embed_prototypes,
    normalize_rows,
    recognize,
)
from .synth import SynthConfig, SynthResult, generate_synthetic

logger = logging.getLogger(__name__)

RECOGNIZERS = ("propagation", "nn", "dap")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one run needs. See the module docstring for the roles."""

    seed: int = 0
    synth: SynthConfig | None = None
    manifest: str | None = None
    views: tuple[str, ...] = ("X", "A", "V")
    embed: bool = True
    recognizer: str = "propagation"
    graph_kinds: tuple[str, ...] = ("hetero_hyper", "two_graph")
    n_labeled: int = 0
    use_prototypes: bool = True
    soft_power: float = 4.0
    hard_dims: int | None = None
    knn: int = 30
    k_hyper: int = 30
    eta: float = 2.0
    ridge: float | None = None
    cov_ridge: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "views", tuple(self.views))
        object.__setattr__(self, "graph_kinds", tuple(self.graph_kinds))
        if isinstance(self.synth, Mapping):
            object.__setattr__(self, "synth", SynthConfig.from_mapping(self.synth))
        if (self.synth is None) == (self.manifest is None):
            raise ConfigError("exactly one of synth/manifest must be given")
        if self.recognizer not in RECOGNIZERS:
            raise ConfigError(f"unknown recognizer {self.recognizer!r}")
        if not self.views:
            raise ConfigError("at least one view is required")
        if len(set(self.views)) != len(self.views):
            raise ConfigError("views must be distinct")
        if self.n_labeled < 0:
            raise ConfigError("n_labeled must be nonnegative")
        if not self.use_prototypes and self.n_labeled == 0:
            raise NoSupervision(
                "a run needs prototypes, labeled instances, or both"
            )

    @classmethod
    def from_mapping(cls, doc: Mapping) -> "ExperimentConfig":
        doc = dict(doc)
        if "synth" in doc and doc["synth"] is not None:
            doc["synth"] = SynthConfig.from_mapping(doc["synth"])
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown experiment config keys: {sorted(unknown)}")
        for key in ("views", "graph_kinds"):
            if key in doc and doc[key] is not None:
                doc[key] = tuple(doc[key])
        return cls(**doc)

    def to_dict(self) -> dict:
        doc = dataclasses.asdict(self)
        doc["views"] = list(self.views)
        doc["graph_kinds"] = list(self.graph_kinds)
        return doc


@dataclass(frozen=True)
class RunRecord:
    """One run's config echo, scores and per-instance predictions."""

    config: dict
    metrics: MetricsReport
    eval_indices: tuple[int, ...]
    predictions: tuple[str, ...]
    scores: np.ndarray | None = None
    classes: tuple[str, ...] = ()
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "metrics": self.metrics.to_dict(),
            "n_evaluated": len(self.eval_indices),
            "diagnostics": self.diagnostics,
        }


# ---------------------------------------------------------------------------
# pipeline pieces
# ---------------------------------------------------------------------------

def _load_world(cfg: ExperimentConfig) -> tuple[Dataset, PrototypeSet | None]:
    if cfg.synth is not None:
        result: SynthResult = generate_synthetic(cfg.synth)
        return result.dataset, result.prototypes
    dataset = load_dataset(cfg.manifest)
    try:
        prototypes = load_prototypes(cfg.manifest)
    except Exception:
        prototypes = None
    return dataset, prototypes


def prepare_target_views(
    dataset: Dataset,
    views: Sequence[str],
    ridge: float | None = None,
) -> dict[str, ViewMatrix]:
    """Raw target-side matrices per view: features as-is, semantics projected.

    Each semantic view's regression is trained on the auxiliary data and
    applied to the target features.
    """
    feature_view = dataset.target_features.view_id
    out: dict[str, ViewMatrix] = {}
    for view in views:
        if view == feature_view:
            out[view] = dataset.target_features
        else:
            model = train_projection(
                dataset.auxiliary_features, dataset.semantic_view(view), ridge
            )
            out[view] = apply_projection(model, dataset.target_features)
    return out


def _pick_labeled(
    dataset: Dataset, n_labeled: int, rng: np.random.Generator
) -> dict[int, str]:
    if n_labeled == 0:
        return {}
    if dataset.target_labels is None:
        raise ConfigError("labeled runs need target labels to draw from")
    labels = np.asarray(dataset.target_labels)
    picked: dict[int, str] = {}
    for cls in sorted(set(labels)):
        idx = np.flatnonzero(labels == cls)
        if len(idx) <= n_labeled:
            raise ConfigError(
                f"class {cls!r} has only {len(idx)} instances; cannot label "
                f"{n_labeled} and still evaluate"
            )
        chosen = rng.choice(idx, size=n_labeled, replace=False)
        for i in chosen:
            picked[int(i)] = str(cls)
    return picked


def _mean_view_cosine(
    instance_views: Mapping[str, np.ndarray],
    anchor_views: Mapping[str, np.ndarray],
) -> np.ndarray:
    """Mean over views of instance-to-anchor cosines; rows must be unit."""
    views = list(instance_views)
    total = None
    for v in views:
        sims = instance_views[v] @ anchor_views[v].T
        total = sims if total is None else total + sims
    return total / len(views)


def _nn_predictions(
    cfg: ExperimentConfig,
    raw_views: dict[str, ViewMatrix],
    embedded: dict[str, EmbeddedView] | None,
    model: MvccaModel | None,
    prototypes: PrototypeSet | None,
    labeled: dict[int, str],
    feature_view: str,
) -> tuple[np.ndarray, tuple[str, ...]]:
    if prototypes is None:
        raise ConfigError("the nearest-prototype recognizer needs prototypes")
    classes = prototypes.classes
    if embedded is not None:
        inst = {v: embedded[v].rows for v in cfg.views}
        anchors = embed_prototypes(prototypes, model, cfg.views, cfg.hard_dims)
    else:
        usable = [v for v in cfg.views if v in prototypes.vectors]
        if not usable:
            raise ConfigError(
                f"none of the views {list(cfg.views)} carry prototypes; "
                "nearest-neighbor in raw spaces needs at least one"
            )
        dropped = [v for v in cfg.views if v not in prototypes.vectors]
        if dropped:
            logger.info("raw nearest-neighbor drops prototype-less views %s",
                        dropped)
        inst = {v: normalize_rows(raw_views[v].data) for v in usable}
        anchors = {
            v: normalize_rows(prototypes.matrix(v, classes)) for v in usable
        }
    scores = _mean_view_cosine(inst, anchors)
    if labeled:  # labeled instances join their class's anchor set
        for idx, cls in labeled.items():
            col = classes.index(cls)
            sims = np.mean(
                [inst[v] @ inst[v][idx] for v in inst], axis=0
            )
            scores[:, col] = np.maximum(scores[:, col], sims)
    return scores, classes


def _dap_predictions(
    raw_views: dict[str, ViewMatrix],
    prototypes: PrototypeSet | None,
    attribute_view: str = "A",
) -> tuple[np.ndarray, tuple[str, ...]]:
    """Per-attribute sigmoid posteriors matched to binarized prototypes."""
    if prototypes is None:
        raise ConfigError("the attribute-posterior recognizer needs prototypes")
    if attribute_view not in raw_views:
        raise ConfigError(
            f"the attribute-posterior recognizer needs view {attribute_view!r}"
        )
    classes = prototypes.classes
    protos = prototypes.matrix(attribute_view, classes)
    binary = (protos > protos.mean(axis=0)).astype(float)
    scores = raw_views[attribute_view].data
    mu = scores.mean(axis=0)
    sd = scores.std(axis=0)
    sd[sd < 1e-12] = 1.0
    prob = 1.0 / (1.0 + np.exp(-(scores - mu) / sd))
    prob = np.clip(prob, 1e-9, 1.0 - 1e-9)
    log_post = np.log(prob) @ binary.T + np.log1p(-prob) @ (1.0 - binary).T
    return log_post, classes


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> RunRecord:
    """Execute one configured run and return (optionally persist) its record."""
    dataset, prototypes = _load_world(cfg)
    feature_view = dataset.target_features.view_id
    if not cfg.use_prototypes:
        prototypes = None
    elif prototypes is None:
        raise ConfigError("prototypes were requested but are not available")

    available = set(dataset.semantic_view_ids) | {feature_view}
    unknown = [v for v in cfg.views if v not in available]
    if unknown:
        raise ConfigError(f"views {unknown} are not present in the dataset")

    rng = np.random.default_rng(cfg.seed)
    labeled = _pick_labeled(dataset, cfg.n_labeled, rng)
    raw_views = prepare_target_views(dataset, cfg.views, cfg.ridge)

    model = None
    embedded = None
    if cfg.embed:
        if len(cfg.views) < 2:
            raise ConfigError("the joint embedding needs at least two views")
        model = fit_mvcca(
            [raw_views[v] for v in cfg.views],
            eps=cfg.cov_ridge,
            soft_power=cfg.soft_power,
        )
        embedded = {
            v: embed(raw_views[v], model, hard_dims=cfg.hard_dims)
            for v in cfg.views
        }

    diagnostics: dict = {}
    if cfg.recognizer == "propagation":
        rec_cfg = RecognizeConfig(
            graph_kinds=cfg.graph_kinds,
            knn=cfg.knn,
            k_hyper=cfg.k_hyper,
            eta=cfg.eta,
            hard_dims=cfg.hard_dims,
        )
        if embedded is not None:
            target_views = embedded
        else:
            if "hetero_hyper" in cfg.graph_kinds:
                raise ConfigError(
                    "hetero hypergraphs compare views pairwise and need the "
                    "joint embedding; rerun with embed=true or drop the kind"
                )
            usable = list(cfg.views)
            if prototypes is not None and feature_view in usable:
                usable = [v for v in usable if v != feature_view]
                if not usable:
                    raise ConfigError(
                        "prototype-supervised runs without the embedding need "
                        "at least one semantic view"
                    )
                logger.info(
                    "dropping view %r: no prototypes exist in raw feature space",
                    feature_view,
                )
            target_views = {
                v: EmbeddedView(normalize_rows(raw_views[v].data), v)
                for v in usable
            }
        result = recognize(
            target_views,
            prototypes=prototypes,
            model=model,
            labeled=labeled,
            config=rec_cfg,
        )
        eval_idx = result.unlabeled_instance_indices()
        inst_pred = result.instance_predictions()
        predictions = tuple(inst_pred[i] for i in eval_idx)
        scores = result.scores[eval_idx]
        classes = result.classes
        diagnostics = dict(result.diagnostics)
        diagnostics["residual"] = result.residual
    else:
        if cfg.recognizer == "nn":
            score_matrix, classes = _nn_predictions(
                cfg, raw_views, embedded, model, prototypes, labeled, feature_view
            )
        else:
            score_matrix, classes = _dap_predictions(raw_views, prototypes)
        n_t = dataset.n_target
        eval_idx = np.array([i for i in range(n_t) if i not in labeled], dtype=int)
        best = score_matrix.argmax(axis=1)
        predictions = tuple(classes[best[i]] for i in eval_idx)
        scores = score_matrix[eval_idx]

    if dataset.target_labels is None:
        raise MetricsError("evaluation needs target labels in the dataset")
    truth = [dataset.target_labels[i] for i in eval_idx]
    metrics = compute_metrics(predictions, truth)

    record = RunRecord(
        config=cfg.to_dict(),
        metrics=metrics,
        eval_indices=tuple(int(i) for i in eval_idx),
        predictions=predictions,
        scores=scores,
        classes=tuple(classes),
        diagnostics=diagnostics,
    )
    if out_dir is not None:
        write_run_record(record, out_dir)
    return record


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def _atomic_write(path: Path, text: str) -> None:
    tmp = path.parent / (path.name + ".tmp")
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def save_predictions(path, record: RunRecord) -> None:
    """CSV: instance index, predicted class, one score column per class."""
    lines = ["instance,predicted" + "".join(f",score_{c}" for c in record.classes)]
    for row, (idx, pred) in enumerate(zip(record.eval_indices, record.predictions)):
        cells = ""
        if record.scores is not None:
            cells = "".join(",%.17g" % s for s in record.scores[row])
        lines.append(f"{idx},{pred}{cells}")
    _atomic_write(Path(path), "\n".join(lines) + "\n")


def load_predictions(path) -> tuple[tuple[int, ...], tuple[str, ...]]:
    from .errors import ParseFailure

    try:
        with open(path) as fh:
            lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    except OSError as exc:
        raise ParseFailure(f"cannot read predictions {path}: {exc}") from exc
    if not lines or not lines[0].startswith("instance,predicted"):
        raise ParseFailure(f"{path} is not a predictions file")
    indices, preds = [], []
    for ln in lines[1:]:
        cells = ln.split(",")
        if len(cells) < 2:
            raise ParseFailure(f"short row in {path}: {ln!r}")
        indices.append(int(cells[0]))
        preds.append(cells[1])
    return tuple(indices), tuple(preds)


def write_run_record(record: RunRecord, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _atomic_write(out / "run.json", json.dumps(record.to_dict(), indent=2) + "\n")
    save_predictions(out / "predictions.csv", record)


# ---------------------------------------------------------------------------
# grids (ablations, seed averaging)
# ---------------------------------------------------------------------------

def run_grid(
    base: ExperimentConfig,
    variants: Mapping[str, Mapping],
    seeds: Sequence[int],
) -> dict[str, list[RunRecord]]:
    """Run every named variant under every seed.

    A variant is a dict of config overrides on top of *base*. Seeds apply
    to both the synthetic world and the run's own sampling.
    """
    results: dict[str, list[RunRecord]] = {}
    for name, overrides in variants.items():
        records = []
        for seed in seeds:
            cfg = merge_config(base, dict(overrides), seed)
            records.append(run_experiment(cfg))
        results[name] = records
    return results


def merge_config(
    base: ExperimentConfig, overrides: Mapping, seed: int | None = None
) -> ExperimentConfig:
    doc = base.to_dict()
    overrides = dict(overrides)
    synth_over = overrides.pop("synth", None)
    doc.update(overrides)
    if synth_over:
        doc["synth"] = {**(doc["synth"] or {}), **dict(synth_over)}
    if seed is not None:
        doc["seed"] = seed
        if doc.get("synth") is not None:
            doc["synth"] = {**doc["synth"], "seed": seed}
    return ExperimentConfig.from_mapping(doc)


def mean_accuracy(records: Sequence[RunRecord]) -> float:
    """Seed-averaged mean per-class accuracy, in percentage points."""
    return 100.0 * float(
        np.mean([r.metrics.mean_per_class_accuracy for r in records])
    )
