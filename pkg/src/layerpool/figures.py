"""Render sweep summaries as figures next to the CSV.

Three views of the same rows: metric against layer (one line per
pooling/scale combination), metric against scale (one line per layer), and
an average-vs-max pooling comparison per layer.  Plots are skipped
gracefully when an axis has a single value.
"""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def _grouped(rows, key_fields, x_field):
    groups = defaultdict(list)
    for row in rows:
        key = tuple(row[f] for f in key_fields)
        groups[key].append((row[x_field], float(row["value"])))
    return groups


def _save(fig, path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_sweep_figures(rows: list[dict], out_dir: str | Path) -> list[Path]:
    """Write layer/scale/pooling comparison plots; returns written paths."""
    out_dir = Path(out_dir)
    written: list[Path] = []
    metrics = sorted({row["metric"] for row in rows})

    for metric in metrics:
        sub = [r for r in rows if r["metric"] == metric]
        layers = list(dict.fromkeys(r["layer"] for r in sub))

        # metric vs layer, one line per (pooling, scale)
        fig, ax = plt.subplots(figsize=(6.4, 4.0))
        for (pooling, scale), points in sorted(_grouped(sub, ("pooling", "scale"), "layer").items()):
            by_layer = dict(points)
            xs = [l for l in layers if l in by_layer]
            label = pooling if not scale else f"{pooling}, scale {scale}"
            ax.plot(xs, [by_layer[l] for l in xs], marker="o", label=label)
        ax.set_xlabel("layer")
        ax.set_ylabel(metric)
        ax.legend(fontsize=8)
        ax.grid(alpha=0.3)
        ax.tick_params(axis="x", rotation=30)
        path = out_dir / f"{metric.replace('-', '').lower()}_by_layer.png"
        _save(fig, path)
        written.append(path)

        # metric vs scale, one line per (layer, pooling)
        scales = sorted({r["scale"] for r in sub if r["scale"]})
        if len(scales) > 1:
            fig, ax = plt.subplots(figsize=(6.4, 4.0))
            for (layer, pooling), points in sorted(_grouped(sub, ("layer", "pooling"), "scale").items()):
                by_scale = dict(points)
                xs = [s for s in scales if s in by_scale]
                ax.plot([float(s) for s in xs], [by_scale[s] for s in xs],
                        marker="o", label=f"{layer} ({pooling})")
            ax.set_xlabel("scale")
            ax.set_ylabel(metric)
            ax.legend(fontsize=8)
            ax.grid(alpha=0.3)
            path = out_dir / f"{metric.replace('-', '').lower()}_by_scale.png"
            _save(fig, path)
            written.append(path)

        # avg vs max pooling, grouped bars per layer
        poolings = sorted({r["pooling"] for r in sub})
        if len(poolings) > 1:
            fig, ax = plt.subplots(figsize=(6.4, 4.0))
            width = 0.8 / len(poolings)
            for i, pooling in enumerate(poolings):
                vals = defaultdict(list)
                for r in sub:
                    if r["pooling"] == pooling:
                        vals[r["layer"]].append(float(r["value"]))
                xs = [j + i * width for j, l in enumerate(layers) if l in vals]
                ys = [sum(vals[l]) / len(vals[l]) for l in layers if l in vals]
                ax.bar(xs, ys, width=width, label=pooling)
            ax.set_xticks([j + width * (len(poolings) - 1) / 2 for j in range(len(layers))])
            ax.set_xticklabels(layers, rotation=30)
            ax.set_ylabel(metric)
            ax.legend(fontsize=8)
            path = out_dir / f"{metric.replace('-', '').lower()}_pooling.png"
            _save(fig, path)
            written.append(path)

    return written
