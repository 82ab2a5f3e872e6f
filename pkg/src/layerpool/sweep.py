"""Experiment grids over layers x scales x pooling modes.

A sweep evaluates one dataset once per grid cell and writes a CSV summary
whose columns mirror the figure axes (layer, scale, pooling, metric), one
JSON report per cell, a failure sidecar for cells that errored, and line
plots rendered from the summary.  Cell failures never abort the sweep; they
surface through the sidecar and a partial-failure exit status.

Grid config JSON::

    {"task": "retrieval" | "classification",
     "manifest": path,                 # dataset manifest
     "net": "toy:<seed>" | path,      # toy shorthand or NetworkSpec JSON
     "layers": ["conv1", ..., ["conv1", "conv2", ...]],   # str = single tap,
                                                          # list = fused taps
     "scales": [1.0, 0.75, ...],      # omit/null scale entry -> no resizing
     "pooling": ["avg", "max"],
     "plan": {"scale1_long_side": int}?,   # else computed from the manifest
     "train_per_class": int?, "repeats": int?, "knn_k": int?, "seed": int?}
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .classify import LabeledSet, SplitSpec, run_protocol
from .errors import InvalidInputError
from .manifest import DatasetManifest, RunConfig
from .pipeline import PipelineConfig
from .reports import ClassificationReport, RetrievalReport
from .resize import ScalePlan, compute_scale1
from .retrieval import build_index, per_query_ap, search
from .store import extract_from_images
from .tensor import DescriptorVector
from .toycnn import NetworkSpec, build_toy_net

CSV_COLUMNS = ("layer", "scale", "pooling", "metric", "value", "fingerprint")


def worker_count() -> int:
    """Worker pool size, capped by the LAYERPOOL_THREADS env var."""
    cap = os.environ.get("LAYERPOOL_THREADS")
    default = min(8, os.cpu_count() or 1)
    if cap is None:
        return default
    try:
        return max(1, int(cap))
    except ValueError:
        raise InvalidInputError(f"LAYERPOOL_THREADS must be an integer, got {cap!r}")


def load_network(source: str | Path) -> NetworkSpec:
    """'toy:<seed>' shorthand or a NetworkSpec JSON path."""
    text = str(source)
    if text.startswith("toy:"):
        return build_toy_net(seed=int(text.split(":", 1)[1]))
    return NetworkSpec.from_json(Path(text))


@dataclass(frozen=True)
class SweepCell:
    layers: tuple[str, ...]
    scale: float | None
    pooling: str

    @property
    def layer_label(self) -> str:
        return "+".join(self.layers)

    @property
    def slug(self) -> str:
        scale = "none" if self.scale is None else f"{self.scale:g}"
        return f"{self.layer_label}__s{scale}__{self.pooling}".replace("+", "-")


def grid_cells(grid: dict) -> list[SweepCell]:
    layers_axis = grid.get("layers") or []
    scales = grid.get("scales") or [None]
    pooling_axis = grid.get("pooling") or ["avg"]
    if not layers_axis:
        raise InvalidInputError("grid has an empty layer axis")
    cells = []
    for layer_entry in layers_axis:
        layers = (layer_entry,) if isinstance(layer_entry, str) else tuple(layer_entry)
        for scale in scales:
            for pooling in pooling_axis:
                cells.append(SweepCell(layers=layers, scale=None if scale is None else float(scale), pooling=pooling))
    return cells


def _evaluate_cell(cell: SweepCell, grid: dict, manifest: DatasetManifest,
                   net: NetworkSpec, base_plan: ScalePlan | None):
    cfg = PipelineConfig(layers=cell.layers, pooling_mode=cell.pooling, fuse=len(cell.layers) > 1)
    plan = None
    if cell.scale is not None:
        if base_plan is None:
            raise InvalidInputError("grid has scales but no plan and no manifest sizes")
        plan = base_plan.with_scale(cell.scale)
    run = RunConfig(
        net=str(grid.get("net", "toy:0")),
        layers=cell.layers,
        pooling=cell.pooling,
        scale=cell.scale if cell.scale is not None else 0.0,
        fuse=len(cell.layers) > 1,
        manifest_path=str(grid.get("manifest", "")),
        extra={"task": grid.get("task", "retrieval")},
    )
    matrix, ids = extract_from_images(manifest, net, cfg, plan)
    label = f"{cell.layer_label}/{cell.pooling}" + (f"/s{cell.scale:g}" if cell.scale is not None else "")

    if grid.get("task", "retrieval") == "classification":
        labels_by_id = manifest.labels()
        class_count = grid.get("class_count") or manifest.class_count
        if class_count is None:
            class_count = max(labels_by_id.values()) + 1
        data = LabeledSet(matrix, np.array([labels_by_id[i] for i in ids]), int(class_count))
        spec = SplitSpec(
            train_per_class=int(grid.get("train_per_class", 1)),
            repeats=int(grid.get("repeats", 10)),
            seed=int(grid.get("seed", 0)),
        )
        return run_protocol(data, spec, k=int(grid.get("knn_k", 5)),
                            label=label, fingerprint=run.fingerprint)

    relevance = manifest.relevance
    if relevance is None:
        raise InvalidInputError("retrieval sweep needs queries or groups in the manifest")
    index = build_index(matrix, ids)
    exclude = relevance.self_match == "exclude"
    by_id = {i: row for i, row in zip(ids, matrix)}
    ranked = {
        q: search(DescriptorVector(by_id[q]), index, k=index.size, query_id=q, exclude_self=exclude)
        for q in relevance.query_ids()
    }
    aps = per_query_ap(relevance, ranked)
    per_ns = {}
    if relevance.groups and all(len(g) == 4 for g in relevance.groups):
        for g in relevance.groups:
            members = frozenset(g)
            for q in g:
                per_ns[q] = len(members.intersection(ranked[q].ranked_ids()[:4]))
    return RetrievalReport(label=label, fingerprint=run.fingerprint,
                           per_query_ap=aps, per_query_ns=per_ns)


def run_sweep(grid: dict, out_dir: str | Path) -> int:
    """Run every grid cell; returns the number of failed cells.

    Writes summary.csv, reports/<cell>.json, failures.json (only when cells
    fail) and figures/*.png under out_dir.
    """
    out_dir = Path(out_dir)
    (out_dir / "reports").mkdir(parents=True, exist_ok=True)
    manifest = DatasetManifest.from_json(Path(grid["manifest"]))
    net = load_network(grid.get("net", "toy:0"))

    base_plan = None
    if grid.get("plan"):
        base_plan = ScalePlan.from_json(grid["plan"])
    elif grid.get("scales"):
        split = grid.get("plan_split", "all")
        base_plan = compute_scale1(manifest.sizes(split))

    cells = grid_cells(grid)
    results: dict[SweepCell, object] = {}
    failures: dict[SweepCell, str] = {}

    def job(cell: SweepCell):
        return cell, _evaluate_cell(cell, grid, manifest, net, base_plan)

    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        futures = [pool.submit(job, cell) for cell in cells]
        for fut, cell in zip(futures, cells):
            try:
                done_cell, report = fut.result()
                results[done_cell] = report
            except Exception as exc:  # noqa: BLE001 - cell failures must not kill the sweep
                failures[cell] = f"{type(exc).__name__}: {exc}"

    rows = []
    for cell in cells:
        report = results.get(cell)
        if report is None:
            continue
        if isinstance(report, ClassificationReport):
            metrics = {"accuracy": report.mean_accuracy}
        else:
            metrics = report.metrics()
        report.to_json(out_dir / "reports" / f"{cell.slug}.json")
        for metric, value in sorted(metrics.items()):
            rows.append({
                "layer": cell.layer_label,
                "scale": "" if cell.scale is None else f"{cell.scale:g}",
                "pooling": cell.pooling,
                "metric": metric,
                "value": f"{value:.10g}",
                "fingerprint": report.fingerprint,
            })

    with open(out_dir / "summary.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)

    if failures:
        doc = {cell.slug: message for cell, message in failures.items()}
        (out_dir / "failures.json").write_text(json.dumps(doc, indent=2, sort_keys=True))

    if rows:
        from .figures import render_sweep_figures

        render_sweep_figures(rows, out_dir / "figures")
    return len(failures)
