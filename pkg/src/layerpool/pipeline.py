"""Per-layer descriptor extraction and multi-layer fusion.

Each tapped map is pooled (average or max) and sqrt+l2 normalized; fusing
concatenates the per-layer unit vectors in forward order and l2-normalizes
once more, so every layer contributes equal norm mass.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .images import ImageRaster
from .resize import ScalePlan, resize_to_plan
from .tensor import DescriptorVector, FeatureMap, avg_pool, l2_normalize, max_pool, sqrt_l2_normalize
from .toycnn import NetworkSpec, forward

POOLING_MODES = ("avg", "max")

# Channel counts of the seven fused layers (five conv blocks + two FC) for
# the two reference architectures; fused dims are 9568 and 9664.
CHANNEL_TABLES: dict[str, dict[str, int]] = {
    "alexnet": {"conv1": 96, "conv2": 256, "conv3": 384, "conv4": 384, "conv5": 256, "fc6": 4096, "fc7": 4096},
    "vggnet": {"conv1": 64, "conv2": 128, "conv3": 256, "conv4": 512, "conv5": 512, "fc6": 4096, "fc7": 4096},
}


@dataclass(frozen=True)
class PipelineConfig:
    """Which taps to use, how to pool them, and whether to fuse."""

    layers: tuple[str, ...]
    pooling_mode: str = "avg"
    fuse: bool = True

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise InvalidInputError("config needs at least one layer")
        if self.pooling_mode not in POOLING_MODES:
            raise InvalidInputError(f"pooling_mode must be one of {POOLING_MODES}")
        if not self.fuse and len(self.layers) != 1:
            raise InvalidInputError("single-layer config (fuse=False) must name exactly one layer")


def layer_descriptor(fmap: FeatureMap, mode: str = "avg") -> DescriptorVector:
    """Pool one map per mode and sqrt+l2 normalize; dim = map channels."""
    if mode not in POOLING_MODES:
        raise InvalidInputError(f"unknown pooling mode '{mode}'")
    pooled = avg_pool(fmap) if mode == "avg" else max_pool(fmap)
    return sqrt_l2_normalize(pooled)


def fuse_concat(descs: list[DescriptorVector] | tuple[DescriptorVector, ...]) -> DescriptorVector:
    """Concatenate normalized per-layer descriptors and l2-normalize once."""
    if not descs:
        raise InvalidInputError("cannot fuse an empty descriptor list")
    for i, d in enumerate(descs):
        if not d.normalized:
            raise InvalidInputError(f"descriptor {i} is not normalized; normalize per layer before fusing")
    return l2_normalize(DescriptorVector(np.concatenate([d.values for d in descs])))


def fused_dim(channel_table: dict[str, int]) -> int:
    """Dimension of the all-layer fused descriptor for a channel table."""
    return sum(channel_table.values())


def describe_maps(maps: dict[str, FeatureMap], cfg: PipelineConfig) -> DescriptorVector:
    """Descriptor from already-extracted maps (tap name -> FeatureMap)."""
    missing = [name for name in cfg.layers if name not in maps]
    if missing:
        raise InvalidInputError(f"config names taps with no maps: {missing}")
    per_layer = [layer_descriptor(maps[name], cfg.pooling_mode) for name in cfg.layers]
    if len(per_layer) == 1:
        return per_layer[0]
    return fuse_concat(per_layer)


def describe(image: ImageRaster, net: NetworkSpec, cfg: PipelineConfig,
             plan: ScalePlan | None = None) -> DescriptorVector:
    """Resize per plan, run the network, pool/normalize/fuse per config."""
    if plan is not None:
        image = resize_to_plan(image, plan)
    return describe_maps(forward(image, net), cfg)
