"""Dataset manifests, run configuration, and the config fingerprint.

A dataset manifest is one JSON document describing the images of a dataset::

    {"images": [{"id": str, "path": str?, "width": int, "height": int,
                 "label": int?, "split": "train"|"test"|"database"|"query"?}, ...],
     "class_count": int?,            # classification datasets
     "queries": [...], "groups": [...], "self_match": str?}   # retrieval ground truth

Pixel dimensions live in the manifest so scale plans never need to decode
images.  The retrieval keys follow the relevance manifest schema
(see retrieval.RelevanceManifest.from_json).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import InvalidInputError
from .retrieval import RelevanceManifest


@dataclass(frozen=True)
class ImageEntry:
    id: str
    width: int
    height: int
    path: str | None = None
    label: int | None = None
    split: str | None = None


@dataclass(frozen=True)
class DatasetManifest:
    images: tuple[ImageEntry, ...]
    class_count: int | None = None
    relevance: RelevanceManifest | None = None
    base_dir: Path | None = None

    def __post_init__(self):
        ids = [e.id for e in self.images]
        if len(set(ids)) != len(ids):
            raise InvalidInputError("image ids must be unique")
        for e in self.images:
            if e.width < 1 or e.height < 1:
                raise InvalidInputError(f"image '{e.id}' has non-positive dimensions")

    def sizes(self, split: str | None = None) -> list[tuple[int, int]]:
        """(width, height) pairs, optionally restricted to one split."""
        selected = [e for e in self.images if split in (None, "all") or e.split == split]
        if not selected:
            raise InvalidInputError(f"no images in split '{split}'")
        return [(e.width, e.height) for e in selected]

    def labels(self) -> dict[str, int]:
        out = {e.id: e.label for e in self.images if e.label is not None}
        if not out:
            raise InvalidInputError("manifest carries no labels")
        return out

    def resolve_path(self, entry: ImageEntry) -> Path:
        if entry.path is None:
            raise InvalidInputError(f"image '{entry.id}' has no path")
        p = Path(entry.path)
        if not p.is_absolute() and self.base_dir is not None:
            p = self.base_dir / p
        return p

    @classmethod
    def from_json(cls, doc: dict | str | Path) -> "DatasetManifest":
        base_dir = None
        if isinstance(doc, (str, Path)):
            base_dir = Path(doc).resolve().parent
            doc = json.loads(Path(doc).read_text())
        images = tuple(
            ImageEntry(
                id=str(e["id"]),
                width=int(e["width"]),
                height=int(e["height"]),
                path=e.get("path"),
                label=None if e.get("label") is None else int(e["label"]),
                split=e.get("split"),
            )
            for e in doc.get("images", [])
        )
        relevance = None
        if doc.get("queries") or doc.get("groups"):
            relevance = RelevanceManifest.from_json(doc)
        return cls(
            images=images,
            class_count=None if doc.get("class_count") is None else int(doc["class_count"]),
            relevance=relevance,
            base_dir=base_dir,
        )


def _canonical(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: _canonical(value[k]) for k in sorted(value)}
    if isinstance(value, (list, tuple)):
        return [_canonical(v) for v in value]
    if isinstance(value, Path):
        return str(value)
    return value


def config_fingerprint(config: dict) -> str:
    """Stable hash of a canonicalized run configuration.

    Output paths are excluded so the fingerprint identifies the experiment,
    not where its artifacts land.
    """
    slim = {k: v for k, v in config.items() if k not in ("out", "out_dir", "output")}
    blob = json.dumps(_canonical(slim), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


@dataclass(frozen=True)
class RunConfig:
    """One experiment cell: network source, taps, pooling, scale, fusion."""

    net: str = "toy:0"
    layers: tuple[str, ...] = ()
    pooling: str = "avg"
    scale: float = 1.0
    fuse: bool = True
    weights: tuple[float, ...] = ()
    manifest_path: str | None = None
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "net": self.net,
            "layers": list(self.layers),
            "pooling": self.pooling,
            "scale": self.scale,
            "fuse": self.fuse,
            "weights": list(self.weights),
            "manifest": self.manifest_path,
            **self.extra,
        }

    @property
    def fingerprint(self) -> str:
        return config_fingerprint(self.as_dict())
