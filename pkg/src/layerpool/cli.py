"""Command line driver.

Subcommands: scale-plan, extract, index, search, eval-search,
eval-classify, sweep.  Exit codes: 0 success, 1 validation error, 2 sweep
finished with failed cells.  LAYERPOOL_THREADS caps the sweep worker pool.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .classify import LabeledSet, SplitSpec, run_protocol
from .errors import InvalidInputError
from .manifest import DatasetManifest, RunConfig
from .pipeline import PipelineConfig
from .reports import RetrievalReport
from .resize import ScalePlan, compute_scale1
from .retrieval import RelevanceManifest, build_index, late_fuse, per_query_ap, search
from .store import (
    TensorDirectory,
    extract_from_images,
    extract_from_tensor_dir,
    load_descriptors,
    save_descriptors,
)
from .sweep import load_network, run_sweep
from .tensor import DescriptorVector
from .tensorfile import TensorFormatError


def _parse_csv(text: str | None) -> list[str]:
    if not text:
        return []
    return [part.strip() for part in text.split(",") if part.strip()]


def _resolve_plan(args, manifest: DatasetManifest | None) -> ScalePlan | None:
    if getattr(args, "plan", None):
        plan = ScalePlan.from_json(Path(args.plan))
        if args.scale is not None:
            plan = plan.with_scale(args.scale)
        return plan
    if args.scale is not None:
        if manifest is None:
            raise InvalidInputError("--scale without --plan needs a dataset manifest with sizes")
        plan = compute_scale1(manifest.sizes(getattr(args, "split", "all") or "all"))
        return plan.with_scale(args.scale)
    return None


def cmd_scale_plan(args) -> int:
    manifest = DatasetManifest.from_json(Path(args.manifest))
    plan = compute_scale1(manifest.sizes(args.split)).with_scale(args.scale if args.scale is not None else 1.0)
    plan.to_json(Path(args.out))
    print(f"scale 1.0 long side {plan.scale1_long_side}, scale {plan.scale} "
          f"-> effective {plan.effective_long_side} ({args.out})")
    return 0


def cmd_extract(args) -> int:
    pooling = args.pooling
    if args.tensors:
        tdir = TensorDirectory(args.tensors)
        layers = _parse_csv(args.layers) or tdir.taps
        cfg = PipelineConfig(layers=tuple(layers), pooling_mode=pooling,
                             fuse=args.fuse if len(layers) > 1 else False)
        matrix, ids = extract_from_tensor_dir(args.tensors, cfg)
        net_source = f"tensors:{tdir.model or Path(args.tensors).name}"
        manifest_path = str(Path(args.tensors) / "manifest.json")
        plan = None
    else:
        if not args.manifest:
            raise InvalidInputError("extract needs --manifest (images) or --tensors (exported maps)")
        manifest = DatasetManifest.from_json(Path(args.manifest))
        net_source = args.net if args.net else f"toy:{args.seed}"
        net = load_network(net_source)
        layers = _parse_csv(args.layers) or list(net.tap_points)
        cfg = PipelineConfig(layers=tuple(layers), pooling_mode=pooling,
                             fuse=args.fuse if len(layers) > 1 else False)
        plan = _resolve_plan(args, manifest)
        matrix, ids = extract_from_images(manifest, net, cfg, plan)
        manifest_path = args.manifest

    run = RunConfig(
        net=str(net_source), layers=tuple(layers), pooling=pooling,
        scale=plan.scale if plan is not None else 0.0,
        fuse=cfg.fuse, manifest_path=str(manifest_path),
    )
    meta = {"config": run.as_dict()}
    if plan is not None:
        meta["scale_plan"] = plan.to_json()
    save_descriptors(matrix, ids, args.out, fingerprint=run.fingerprint, meta=meta)
    print(f"wrote {matrix.shape[0]} descriptors of dim {matrix.shape[1]} to {args.out}")
    return 0


def cmd_index(args) -> int:
    matrix, ids, doc = load_descriptors(args.descriptors)
    index = build_index(matrix, ids)
    save_descriptors(index.matrix, list(index.ids), args.out,
                     fingerprint=doc.get("fingerprint", ""), meta={"kind": "index"})
    print(f"indexed {index.size} descriptors of dim {index.dim} to {args.out}")
    return 0


def cmd_search(args) -> int:
    imatrix, iids, _ = load_descriptors(args.index)
    index = build_index(imatrix, iids)
    qmatrix, qids, _ = load_descriptors(args.queries)
    k = args.k if args.k is not None else index.size
    results = {}
    for qid, row in zip(qids, qmatrix):
        ranked = search(DescriptorVector(row), index, k=k, query_id=qid,
                        exclude_self=args.exclude_self)
        results[qid] = [[i, s] for i, s in ranked.entries]
    Path(args.out).write_text(json.dumps({"k": k, "results": results}, indent=2, sort_keys=True))
    print(f"searched {len(qids)} queries against {index.size} entries -> {args.out}")
    return 0


def _ranked_lists_for_eval(args, relevance: RelevanceManifest):
    """Per-query ranked lists from one index, or late-fused from several."""
    sources = args.index
    weights = [float(w) for w in _parse_csv(args.weights)] if args.weights else [1.0] * len(sources)
    if len(weights) != len(sources):
        raise InvalidInputError(f"{len(sources)} indexes but {len(weights)} weights")
    exclude = relevance.self_match == "exclude"

    per_source = []
    fingerprints = []
    for path in sources:
        matrix, ids, doc = load_descriptors(path)
        index = build_index(matrix, ids)
        fingerprints.append(doc.get("fingerprint", ""))
        by_id = dict(zip(ids, matrix))
        lists = {}
        for q in relevance.query_ids():
            if q not in by_id:
                raise InvalidInputError(f"query '{q}' is not among the descriptors in {path}")
            lists[q] = search(DescriptorVector(by_id[q]), index, k=index.size,
                              query_id=q, exclude_self=exclude)
        per_source.append(lists)

    if len(per_source) == 1:
        return per_source[0], fingerprints[0]
    fused = {
        q: late_fuse([lists[q] for lists in per_source], weights)
        for q in relevance.query_ids()
    }
    return fused, ",".join(fingerprints)


def cmd_eval_search(args) -> int:
    manifest = DatasetManifest.from_json(Path(args.manifest))
    relevance = manifest.relevance
    if relevance is None:
        relevance = RelevanceManifest.from_json(Path(args.manifest))
    ranked, fingerprint = _ranked_lists_for_eval(args, relevance)

    aps = per_query_ap(relevance, ranked)
    per_ns = {}
    if relevance.groups and all(len(g) == 4 for g in relevance.groups):
        for g in relevance.groups:
            members = frozenset(g)
            for q in g:
                per_ns[q] = len(members.intersection(ranked[q].ranked_ids()[:4]))
    report = RetrievalReport(label=args.label, fingerprint=fingerprint,
                             per_query_ap=aps, per_query_ns=per_ns)
    _emit_report(report, args.out)
    return 0


def cmd_eval_classify(args) -> int:
    matrix, ids, doc = load_descriptors(args.descriptors)
    if args.labels:
        label_doc = json.loads(Path(args.labels).read_text())
        labels_by_id = {str(k): int(v) for k, v in label_doc["labels"].items()}
        class_count = int(label_doc.get("class_count") or (max(labels_by_id.values()) + 1))
    elif args.manifest:
        manifest = DatasetManifest.from_json(Path(args.manifest))
        labels_by_id = manifest.labels()
        class_count = manifest.class_count or (max(labels_by_id.values()) + 1)
    else:
        raise InvalidInputError("eval-classify needs --labels or --manifest")
    missing = [i for i in ids if i not in labels_by_id]
    if missing:
        raise InvalidInputError(f"no labels for ids: {missing[:5]}")
    data = LabeledSet(matrix, np.array([labels_by_id[i] for i in ids]), class_count)
    spec = SplitSpec(train_per_class=args.train_per_class, repeats=args.repeats, seed=args.seed)
    topk = tuple(int(t) for t in _parse_csv(args.topk))
    report = run_protocol(data, spec, k=args.knn_k, label=args.label,
                          fingerprint=doc.get("fingerprint", ""), topk=topk)
    _emit_report(report, args.out)
    return 0


def cmd_sweep(args) -> int:
    grid = json.loads(Path(args.grid).read_text())
    failed = run_sweep(grid, args.out)
    if failed:
        print(f"sweep finished with {failed} failed cell(s); see failures.json", file=sys.stderr)
        return 2
    print(f"sweep complete -> {args.out}/summary.csv")
    return 0


def _emit_report(report, out: str) -> None:
    out_path = Path(out)
    report.to_json(out_path.with_suffix(".json"))
    table = report.text_table()
    out_path.with_suffix(".txt").write_text(table + "\n")
    print(table)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="layerpool",
                                     description="Pooled multi-layer CNN descriptors: extraction and evaluation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scale-plan", help="compute the scale-1.0 plan from a dataset manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", default="all", help="train | database | test | all")
    p.add_argument("--scale", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_scale_plan)

    p = sub.add_parser("extract", help="images or exported tensors -> descriptor file")
    p.add_argument("--manifest", help="dataset manifest with image paths")
    p.add_argument("--tensors", help="exporter output directory (manifest.json + tensor files)")
    p.add_argument("--net", help="toy:<seed> or a network JSON path")
    p.add_argument("--seed", type=int, default=0, help="toy network seed when --net is omitted")
    p.add_argument("--layers", help="comma-separated tap names (default: all taps)")
    p.add_argument("--pooling", choices=("avg", "max"), default="avg")
    p.add_argument("--plan", help="scale plan JSON")
    p.add_argument("--scale", type=float, default=None)
    p.add_argument("--split", default="all", help="split used when computing a plan on the fly")
    p.add_argument("--fuse", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("index", help="descriptor file -> normalized index file")
    p.add_argument("--descriptors", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("search", help="rank a query descriptor file against an index")
    p.add_argument("--index", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("-k", type=int, default=None, help="top-k (default: whole index)")
    p.add_argument("--exclude-self", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("eval-search", help="mAP / N-S against a relevance manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--index", action="append", required=True,
                   help="descriptor file; repeat for late fusion across layers")
    p.add_argument("--weights", help="comma-separated fusion weights")
    p.add_argument("--label", default="eval-search")
    p.add_argument("--out", required=True, help="report basename (.json/.txt appended)")
    p.set_defaults(func=cmd_eval_search)

    p = sub.add_parser("eval-classify", help="repeated-split k-NN accuracy")
    p.add_argument("--descriptors", required=True)
    p.add_argument("--manifest", help="dataset manifest carrying labels")
    p.add_argument("--labels", help="labels JSON: {class_count, labels: {id: int}}")
    p.add_argument("--train-per-class", type=int, required=True)
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--knn-k", type=int, default=5)
    p.add_argument("--topk", help="comma-separated k values for top-k error")
    p.add_argument("--label", default="eval-classify")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval_classify)

    p = sub.add_parser("sweep", help="run a layers x scales x pooling grid")
    p.add_argument("--grid", required=True, help="grid config JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InvalidInputError, TensorFormatError, FileNotFoundError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
