"""Descriptor set persistence and batch extraction.

A descriptor set on disk is one 2-D interchange tensor (n_images x dim)
plus a sidecar JSON (same path, .json suffix) listing image ids and the
config fingerprint that produced it.

Tensor directories (the exporter's output) hold one interchange tensor per
(image, tap), shaped (channels, height, width), described by a
manifest.json::

    {"model": str, "taps": [str, ...], "scale_plan": {...} | null,
     "preprocessing": str?,
     "images": [{"id": str, "files": {tap: relative path, ...}}, ...]}
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import InvalidInputError
from .images import read_image
from .manifest import DatasetManifest
from .pipeline import PipelineConfig, describe, describe_maps
from .resize import ScalePlan
from .tensor import FeatureMap
from .tensorfile import read_tensor, write_tensor
from .toycnn import NetworkSpec


def sidecar_path(path: str | Path) -> Path:
    return Path(path).with_suffix(".json")


def save_descriptors(matrix: np.ndarray, ids: list[str], path: str | Path,
                     fingerprint: str = "", meta: dict | None = None) -> None:
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[0] != len(ids):
        raise InvalidInputError(
            f"descriptor matrix {matrix.shape} does not match {len(ids)} ids"
        )
    write_tensor(matrix, path)
    doc = {"ids": list(ids), "fingerprint": fingerprint, **(meta or {})}
    sidecar_path(path).write_text(json.dumps(doc, indent=2, sort_keys=True))


def load_descriptors(path: str | Path) -> tuple[np.ndarray, list[str], dict]:
    matrix = read_tensor(path).astype(np.float64)
    side = sidecar_path(path)
    if not side.exists():
        raise InvalidInputError(f"descriptor sidecar missing: {side}")
    doc = json.loads(side.read_text())
    ids = [str(i) for i in doc.get("ids", [])]
    if matrix.ndim != 2 or len(ids) != matrix.shape[0]:
        raise InvalidInputError(
            f"{path}: sidecar lists {len(ids)} ids for a {matrix.shape} matrix"
        )
    return matrix, ids, doc


def extract_from_images(manifest: DatasetManifest, net: NetworkSpec,
                        cfg: PipelineConfig, plan: ScalePlan | None) -> tuple[np.ndarray, list[str]]:
    """Decode, resize and describe every image in the manifest."""
    rows = []
    ids = []
    for entry in manifest.images:
        img = read_image(manifest.resolve_path(entry))
        rows.append(describe(img, net, cfg, plan).values)
        ids.append(entry.id)
    if not rows:
        raise InvalidInputError("manifest lists no images")
    return np.stack(rows), ids


class TensorDirectory:
    """Reader for an exporter output directory."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        manifest_file = self.root / "manifest.json"
        if not manifest_file.exists():
            raise InvalidInputError(f"no manifest.json under {self.root}")
        self.doc = json.loads(manifest_file.read_text())
        self.taps: list[str] = list(self.doc.get("taps", []))
        self.model: str = self.doc.get("model", "")
        if not self.doc.get("images"):
            raise InvalidInputError(f"{manifest_file}: no images listed")

    def image_ids(self) -> list[str]:
        return [str(e["id"]) for e in self.doc["images"]]

    def maps_for(self, image_id: str, taps: list[str] | None = None) -> dict[str, FeatureMap]:
        entry = next((e for e in self.doc["images"] if str(e["id"]) == image_id), None)
        if entry is None:
            raise InvalidInputError(f"image '{image_id}' not in tensor manifest")
        out = {}
        for tap in taps or self.taps:
            rel = entry["files"].get(tap)
            if rel is None:
                raise InvalidInputError(f"image '{image_id}' has no tensor for tap '{tap}'")
            arr = read_tensor(self.root / rel).astype(np.float64)
            if arr.ndim == 1:
                arr = arr[:, None, None]
            out[tap] = FeatureMap(arr, layer_name=tap)
        return out


def extract_from_tensor_dir(root: str | Path, cfg: PipelineConfig) -> tuple[np.ndarray, list[str]]:
    """Pool/normalize/fuse pre-exported activation maps."""
    tdir = TensorDirectory(root)
    rows = []
    ids = tdir.image_ids()
    for image_id in ids:
        maps = tdir.maps_for(image_id, list(cfg.layers))
        rows.append(describe_maps(maps, cfg).values)
    return np.stack(rows), ids
