"""Dataset-driven sizing rule and aspect-preserving bilinear resizing.

The "scale 1.0" long side of a dataset is the rounded larger of its average
width and average height; other scales are ratios of that long side.  All
pixel dimensions round half-up so goldens stay bit-stable.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidInputError
from .images import ImageRaster


def round_half_up(x: float) -> int:
    """Round to nearest integer, ties away from zero toward +inf."""
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class ScalePlan:
    """Resize target: long side of scale 1.0 plus a scale ratio."""

    scale1_long_side: int
    scale: float = 1.0

    def __post_init__(self):
        if self.scale1_long_side < 1:
            raise InvalidInputError("scale1_long_side must be a positive pixel count")
        if not self.scale > 0:
            raise InvalidInputError("scale must be positive")
        if self.effective_long_side < 1:
            raise InvalidInputError(f"effective long side rounds to zero at scale {self.scale}")
        if self.scale > 1.0:
            warnings.warn(f"scale {self.scale} > 1.0 upscales beyond the dataset statistic", stacklevel=2)

    @property
    def effective_long_side(self) -> int:
        return round_half_up(self.scale1_long_side * self.scale)

    def with_scale(self, scale: float) -> "ScalePlan":
        return ScalePlan(self.scale1_long_side, scale)

    def to_json(self, path: str | Path | None = None) -> dict:
        doc = {"scale1_long_side": self.scale1_long_side, "scale": self.scale}
        if path is not None:
            Path(path).write_text(json.dumps(doc))
        return doc

    @classmethod
    def from_json(cls, doc: dict | str | Path) -> "ScalePlan":
        if isinstance(doc, (str, Path)):
            doc = json.loads(Path(doc).read_text())
        return cls(int(doc["scale1_long_side"]), float(doc.get("scale", 1.0)))


def compute_scale1(sizes: Iterable[tuple[int, int]]) -> ScalePlan:
    """Scale-1.0 plan from (width, height) pairs of the reference split.

    The long side is round(max(mean width, mean height)), half-up.
    """
    sizes = list(sizes)
    if not sizes:
        raise InvalidInputError("cannot compute a scale plan from an empty size list")
    widths = [w for w, _ in sizes]
    heights = [h for _, h in sizes]
    if min(widths) < 1 or min(heights) < 1:
        raise InvalidInputError("image sizes must be positive")
    long_side = max(sum(widths) / len(widths), sum(heights) / len(heights))
    return ScalePlan(scale1_long_side=round_half_up(long_side), scale=1.0)


def target_dims(orig: tuple[int, int], plan: ScalePlan) -> tuple[int, int]:
    """Resize target for one image: long side to the plan's effective long
    side, short side by the same factor (half-up, minimum 1), orientation
    preserved."""
    w, h = orig
    if w < 1 or h < 1:
        raise InvalidInputError(f"original dimensions must be positive, got {orig}")
    long_side = plan.effective_long_side
    factor = long_side / max(w, h)
    short_side = max(1, round_half_up(min(w, h) * factor))
    if w >= h:
        return (long_side, short_side)
    return (short_side, long_side)


def bilinear_resize(img: ImageRaster, dims: tuple[int, int]) -> ImageRaster:
    """Bilinear interpolation with half-pixel center alignment.

    Output pixel centers map to source coordinates
    (i + 0.5) * src/dst - 0.5, clamped to the image; resizing to the
    original dimensions returns the image bit-identically.
    """
    new_w, new_h = dims
    if new_w < 1 or new_h < 1:
        raise InvalidInputError(f"target dimensions must be positive, got {dims}")
    if (new_w, new_h) == (img.width, img.height):
        return img

    src = img.pixels
    out = np.empty((img.channels, new_h, new_w), dtype=np.float64)

    def axis_coords(n_dst: int, n_src: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        centers = (np.arange(n_dst) + 0.5) * (n_src / n_dst) - 0.5
        centers = np.clip(centers, 0.0, n_src - 1.0)
        lo = np.floor(centers).astype(np.intp)
        lo = np.minimum(lo, n_src - 1)
        hi = np.minimum(lo + 1, n_src - 1)
        frac = centers - lo
        return lo, hi, frac

    y0, y1, fy = axis_coords(new_h, img.height)
    x0, x1, fx = axis_coords(new_w, img.width)
    fy = fy[:, None]
    fx = fx[None, :]
    for c in range(img.channels):
        plane = src[c]
        top = plane[np.ix_(y0, x0)] * (1 - fx) + plane[np.ix_(y0, x1)] * fx
        bottom = plane[np.ix_(y1, x0)] * (1 - fx) + plane[np.ix_(y1, x1)] * fx
        out[c] = top * (1 - fy) + bottom * fy
    return ImageRaster(np.clip(out, 0.0, 1.0))


def resize_to_plan(img: ImageRaster, plan: ScalePlan) -> ImageRaster:
    """Resize one image to its plan target (aspect preserved)."""
    return bilinear_resize(img, target_dims((img.width, img.height), plan))
