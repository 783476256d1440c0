"""Command line front end.

Subcommands mirror the pipeline stages:

    synth      draw a synthetic dataset and write it with a manifest
    project    train the feature-to-semantic regressions, project the target
    embed      fit the joint embedding and write embedded views + model
    graphs     build and dump the similarity graphs
    recognize  zero-shot / N-shot recognition by label propagation
    annotate   cross-view annotation (instance / describe / name tasks)
    eval       score a predictions file against a manifest's target labels
    ablate     run a grid of experiment variants and summarize

Every failure exits nonzero and prints a one-line JSON object with the
error type and message on stderr, so callers can script against it.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .annotation import (
    class_description,
    describe,
    instance_annotation,
    load_vocabulary,
    prototype_to_name,
)
from .data import (
    Dataset,
    ViewMatrix,
    load_dataset,
    load_matrix,
    load_prototypes,
    save_labels,
    save_matrix,
    save_prototypes,
    write_manifest,
)
from .embedding import embed, fit_mvcca, load_mvcca, save_mvcca
from .errors import ConfigError, MvzslError
from .experiment import (
    ExperimentConfig,
    load_predictions,
    merge_config,
    run_experiment,
    run_grid,
    save_predictions,
    write_run_record,
)
from .graphs import GRAPH_KINDS, NodeSet, build_graph_suite, save_graph
from .metrics import compute_metrics
from .projection import (
    apply_projection,
    save_projection,
    train_projection,
)
from .propagation import RecognizeConfig, recognize
from .synth import SynthConfig, generate_synthetic
from .annotation import save_vocabulary


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0, help="random seed")
    parser.add_argument("--config", help="JSON file of options for this command")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--lambda", dest="soft_power", type=float, default=4.0,
                        help="eigenvalue exponent of the embedding (default 4)")
    parser.add_argument("--eta", type=float, default=2.0,
                        help="propagation regularizer (default 2)")
    parser.add_argument("--knn", type=int, default=30,
                        help="graph sparsification neighbors (default 30)")
    parser.add_argument("--khyper", type=int, default=30,
                        help="hyperedge cardinality (default 30)")
    parser.add_argument("--ridge", type=float, default=None,
                        help="projection ridge (default: scale-aware)")
    parser.add_argument("--eps", type=float, default=None,
                        help="embedding covariance ridge (default: scale-aware)")


def _load_config_file(path) -> dict:
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return doc


def _require_out(args) -> Path:
    if not args.out:
        raise ConfigError("this command needs --out")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_synth(args) -> int:
    doc = _load_config_file(args.config) if args.config else {}
    doc.setdefault("seed", args.seed)
    cfg = SynthConfig.from_mapping(doc)
    result = generate_synthetic(cfg)
    out = _require_out(args)

    ds = result.dataset
    save_matrix(ds.auxiliary_features, out / "aux_X.csv")
    semantics = {}
    for sem in ds.auxiliary_semantics:
        name = f"aux_{sem.view_id}.csv"
        save_matrix(sem, out / name)
        semantics[sem.view_id] = name
    save_labels(ds.auxiliary_labels, out / "aux_labels.txt")
    save_matrix(ds.target_features, out / "tgt_X.csv")
    save_labels(ds.target_labels, out / "tgt_labels.txt")
    proto_paths = {v: f"proto_{v}.csv" for v in result.prototypes.views}
    save_prototypes(result.prototypes, {v: out / p for v, p in proto_paths.items()})
    save_vocabulary(result.vocabulary, out / "vocabulary.csv")
    write_manifest(
        out / "manifest.json",
        auxiliary_features="aux_X.csv",
        auxiliary_semantics=semantics,
        auxiliary_labels="aux_labels.txt",
        target_features="tgt_X.csv",
        target_labels="tgt_labels.txt",
        prototypes=proto_paths,
    )
    print(json.dumps({
        "manifest": str(out / "manifest.json"),
        "auxiliary_rows": ds.n_auxiliary,
        "target_rows": ds.n_target,
        "classes": list(result.prototypes.classes),
    }))
    return 0


def cmd_project(args) -> int:
    dataset = load_dataset(args.manifest)
    out = _require_out(args)
    written = {}
    for sem in dataset.auxiliary_semantics:
        model = train_projection(dataset.auxiliary_features, sem, args.ridge)
        save_projection(model, out / f"projection_{sem.view_id}")
        projected = apply_projection(model, dataset.target_features)
        save_matrix(projected, out / f"tgt_{sem.view_id}.csv")
        written[sem.view_id] = {
            "model": f"projection_{sem.view_id}.csv",
            "projected": f"tgt_{sem.view_id}.csv",
            "ridge": model.ridge,
        }
    print(json.dumps({"out": str(out), "views": written}))
    return 0


def _gather_target_views(dataset: Dataset, projections_dir: Path, views) -> list[ViewMatrix]:
    mats = []
    for view in views:
        if view == dataset.target_features.view_id:
            mats.append(dataset.target_features)
        else:
            mats.append(load_matrix(projections_dir / f"tgt_{view}.csv", view))
    return mats


def cmd_embed(args) -> int:
    dataset = load_dataset(args.manifest)
    views = args.views.split(",") if args.views else (
        [dataset.target_features.view_id] + list(dataset.semantic_view_ids)
    )
    mats = _gather_target_views(dataset, Path(args.projections), views)
    model = fit_mvcca(mats, eps=args.eps, soft_power=args.soft_power)
    out = _require_out(args)
    save_mvcca(model, out / "embedding")
    for vm in mats:
        ev = embed(vm, model)
        save_matrix(ev.rows, out / f"psi_{vm.view_id}.csv")
    meta = {
        "views": views,
        "embed_dim": model.embed_dim,
        "soft_power": model.soft_power,
        "n_rows": mats[0].n_rows,
    }
    with open(out / "embedding_meta.json", "w") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")
    print(json.dumps({"out": str(out), **meta}))
    return 0


def _load_embedded_nodes(args, with_prototypes: bool):
    """Rebuild embedded target views (+ prototype rows) from stage outputs."""
    from .embedding import EmbeddedView
    from .propagation import embed_prototypes

    emb_dir = Path(args.embedding)
    with open(emb_dir / "embedding_meta.json") as fh:
        meta = json.load(fh)
    model = load_mvcca(emb_dir / "embedding")
    target_views = {
        v: EmbeddedView(load_matrix(emb_dir / f"psi_{v}.csv").data, v)
        for v in meta["views"]
    }
    prototypes = None
    if with_prototypes:
        prototypes = load_prototypes(args.manifest)
    return model, target_views, prototypes, meta


def cmd_graphs(args) -> int:
    model, target_views, prototypes, meta = _load_embedded_nodes(
        args, with_prototypes=not args.no_prototypes
    )
    from .embedding import EmbeddedView
    from .propagation import embed_prototypes

    proto_classes = ()
    if prototypes is not None:
        rows = embed_prototypes(prototypes, model, tuple(target_views))
        proto_classes = prototypes.classes
        target_views = {
            v: EmbeddedView(np.vstack([ev.rows, rows[v]]), v)
            for v, ev in target_views.items()
        }
    n_instances = meta["n_rows"]
    nodes = NodeSet(target_views, n_instances, proto_classes)
    kinds = tuple(args.kinds.split(",")) if args.kinds else ("hetero_hyper", "two_graph")
    graphs = build_graph_suite(nodes, kinds, knn=args.knn, k_hyper=args.khyper)
    out = _require_out(args)
    names = []
    for g in graphs:
        name = f"{g.kind}_{g.source_view}_{g.target_view}"
        save_graph(g, out / name)
        names.append(name)
    print(json.dumps({"out": str(out), "graphs": names}))
    return 0


def cmd_recognize(args) -> int:
    model, target_views, prototypes, meta = _load_embedded_nodes(
        args, with_prototypes=not args.no_prototypes
    )
    labeled = {}
    if args.n_labeled:
        dataset = load_dataset(args.manifest)
        if dataset.target_labels is None:
            raise ConfigError("--n-labeled needs target labels in the manifest")
        rng = np.random.default_rng(args.seed)
        labels = np.asarray(dataset.target_labels)
        for cls in sorted(set(labels)):
            idx = np.flatnonzero(labels == cls)
            chosen = rng.choice(idx, size=min(args.n_labeled, len(idx)), replace=False)
            for i in chosen:
                labeled[int(i)] = str(cls)
    kinds = tuple(args.kinds.split(",")) if args.kinds else ("hetero_hyper", "two_graph")
    cfg = RecognizeConfig(graph_kinds=kinds, knn=args.knn, k_hyper=args.khyper,
                          eta=args.eta)
    result = recognize(target_views, prototypes=prototypes, model=model,
                       labeled=labeled, config=cfg)
    out = _require_out(args)
    eval_idx = result.unlabeled_instance_indices()
    inst_pred = result.instance_predictions()
    lines = ["instance,predicted" + "".join(f",score_{c}" for c in result.classes)]
    for i in eval_idx:
        cells = "".join(",%.17g" % s for s in result.scores[i])
        lines.append(f"{i},{inst_pred[i]}{cells}")
    (out / "predictions.csv").write_text("\n".join(lines) + "\n")
    diag = {
        "residual": result.residual,
        "eta": result.eta,
        "classes": list(result.classes),
        **{k: v for k, v in result.diagnostics.items()},
    }
    with open(out / "diagnostics.json", "w") as fh:
        json.dump(diag, fh, indent=2)
        fh.write("\n")
    print(json.dumps({"out": str(out), "n_predicted": int(eval_idx.shape[0]),
                      "residual": result.residual}))
    return 0


def cmd_annotate(args) -> int:
    model = load_mvcca(Path(args.embedding) / "embedding")
    query = load_matrix(args.input).data
    out_doc: dict = {"task": args.task}
    if args.task == "instance":
        scores = instance_annotation(query, model,
                                     feature_view=args.feature_view,
                                     attribute_view=args.attribute_view)
        out_doc["scores"] = [[float(x) for x in row] for row in np.atleast_2d(scores)]
    elif args.task == "describe":
        scores = class_description(query, model,
                                   word_view=args.word_view,
                                   attribute_view=args.attribute_view)
        scores = np.atleast_2d(scores)
        out_doc["scores"] = [[float(x) for x in row] for row in scores]
        if args.attribute_names:
            names = Path(args.attribute_names).read_text().split()
            tb = [describe(row, names, k=args.top) for row in scores]
            out_doc["top"] = [t for t, _ in tb]
            out_doc["bottom"] = [b for _, b in tb]
    elif args.task == "name":
        if not args.vocab:
            raise ConfigError("the name task needs --vocab")
        vocab = load_vocabulary(args.vocab)
        rankings = []
        for row in np.atleast_2d(query):
            ranking = prototype_to_name(row, model, vocab,
                                        attribute_view=args.attribute_view,
                                        word_view=args.word_view)
            rankings.append(list(ranking.words[: args.top]))
        out_doc["ranked"] = rankings
    else:
        raise ConfigError(f"unknown annotate task {args.task!r}")
    text = json.dumps(out_doc, indent=2)
    if args.out:
        out = _require_out(args)
        (out / "annotation.json").write_text(text + "\n")
    print(text)
    return 0


def cmd_eval(args) -> int:
    dataset = load_dataset(args.manifest)
    if dataset.target_labels is None:
        raise ConfigError("the manifest has no target labels to evaluate against")
    indices, predictions = load_predictions(args.pred)
    truth = [dataset.target_labels[i] for i in indices]
    report = compute_metrics(predictions, truth)
    text = json.dumps(report.to_dict(), indent=2)
    if args.out:
        out = _require_out(args)
        (out / "metrics.json").write_text(text + "\n")
    print(text)
    return 0


def cmd_ablate(args) -> int:
    if not args.config:
        raise ConfigError("ablate needs --config with base/variants/seeds")
    doc = _load_config_file(args.config)
    try:
        base = ExperimentConfig.from_mapping(doc["base"])
        variants = doc["variants"]
        seeds = doc.get("seeds", [args.seed])
    except KeyError as exc:
        raise ConfigError(f"ablate config lacks {exc.args[0]!r}") from exc
    results = run_grid(base, variants, seeds)
    summary = {
        name: {
            "mean_per_class_accuracy": float(np.mean(
                [r.metrics.mean_per_class_accuracy for r in records])),
            "overall_accuracy": float(np.mean(
                [r.metrics.overall_accuracy for r in records])),
            "n_runs": len(records),
        }
        for name, records in results.items()
    }
    text = json.dumps(summary, indent=2)
    if args.out:
        out = _require_out(args)
        (out / "ablation.json").write_text(text + "\n")
        for name, records in results.items():
            for seed, record in zip(seeds, records):
                write_run_record(record, out / name / f"seed_{seed}")
    print(text)
    return 0


def cmd_run(args) -> int:
    if not args.config:
        raise ConfigError("run needs --config with an experiment config")
    cfg = ExperimentConfig.from_mapping(_load_config_file(args.config))
    record = run_experiment(cfg, out_dir=args.out)
    print(json.dumps(record.to_dict()["metrics"], indent=2))
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mvzsl",
        description="Multi-view embedding and hypergraph label propagation "
                    "for zero-shot recognition",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("project", help="train and apply semantic projections")
    _add_common(p)
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("embed", help="fit the joint embedding")
    _add_common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--projections", required=True,
                   help="directory written by the project stage")
    p.add_argument("--views", help="comma-separated view subset")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("graphs", help="build and dump similarity graphs")
    _add_common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--embedding", required=True,
                   help="directory written by the embed stage")
    p.add_argument("--kinds", help=f"comma-separated subset of {GRAPH_KINDS}")
    p.add_argument("--no-prototypes", action="store_true")
    p.set_defaults(func=cmd_graphs)

    p = sub.add_parser("recognize", help="propagate labels over the graphs")
    _add_common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--embedding", required=True)
    p.add_argument("--kinds", help="graph kinds (default hetero_hyper,two_graph)")
    p.add_argument("--no-prototypes", action="store_true",
                   help="labels-only condition")
    p.add_argument("--n-labeled", type=int, default=0,
                   help="labeled instances per target class")
    p.set_defaults(func=cmd_recognize)

    p = sub.add_parser("annotate", help="cross-view annotation tasks")
    _add_common(p)
    p.add_argument("--embedding", required=True)
    p.add_argument("--task", required=True, choices=("instance", "describe", "name"))
    p.add_argument("--input", required=True, help="CSV of query vectors")
    p.add_argument("--vocab", help="vocabulary CSV for the name task")
    p.add_argument("--attribute-names", help="text file of attribute names")
    p.add_argument("--top", type=int, default=5)
    p.add_argument("--feature-view", default="X")
    p.add_argument("--attribute-view", default="A")
    p.add_argument("--word-view", default="V")
    p.set_defaults(func=cmd_annotate)

    p = sub.add_parser("eval", help="score predictions against target labels")
    _add_common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--pred", required=True, help="predictions CSV")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="run an experiment grid")
    _add_common(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("run", help="run one experiment config")
    _add_common(p)
    p.set_defaults(func=cmd_run)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except MvzslError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 2
    except Exception as exc:  # anything unexpected still reports as JSON
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
