"""Activation tensors, global pooling and descriptor normalization.

A feature map is stored channel-major as a (channels, height, width) float64
array.  Global pooling collapses each channel's spatial grid to one scalar,
so a map becomes a vector with one component per channel.  Descriptors are
normalized with a signed square root followed by l2 scaling, or with plain
l2 scaling.

Pooling sums run over a sorted copy of each channel, which makes the reduced
value independent of spatial ordering down to the last bit: permuting or
cyclically shifting the cells of a map cannot change its pooled descriptor.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=np.float64)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class FeatureMap:
    """One layer's activations for one image, laid out (channel, row, column).

    Attributes:
        data: float64 array of shape (channels, height, width); read-only.
        layer_name: name of the layer that produced the map.
    """

    data: np.ndarray
    layer_name: str = ""

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 3:
            raise InvalidInputError(
                f"feature map must be (channels, height, width), got shape {arr.shape}"
            )
        if min(arr.shape) < 1:
            raise InvalidInputError(f"feature map has empty dimension: {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError("feature map contains NaN or Inf")
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class DescriptorVector:
    """A per-layer (or concatenated) image descriptor.

    Attributes:
        values: float64 vector; read-only.
        normalized: True once sqrt+l2 (or plain l2) normalization was applied.
    """

    values: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        arr = np.asarray(self.values)
        if arr.ndim != 1 or arr.size < 1:
            raise InvalidInputError(f"descriptor must be a non-empty 1-D vector, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError("descriptor contains NaN or Inf")
        object.__setattr__(self, "values", _freeze(arr))

    @property
    def dim(self) -> int:
        return self.values.size


def _ordered_channel_sums(data: np.ndarray) -> np.ndarray:
    # Sorting first gives every permutation of the same cells an identical
    # reduction order, so the sum is bit-stable under spatial shuffles.
    c = data.shape[0]
    flat = data.reshape(c, -1)
    return np.sum(np.sort(flat, axis=1), axis=1)


def avg_pool(fmap: FeatureMap) -> DescriptorVector:
    """Per-channel arithmetic mean over the spatial grid.

    Returns a vector of dim = channels with the normalized flag unset.
    """
    cells = fmap.height * fmap.width
    if cells < 1:
        raise InvalidInputError("cannot pool a map with zero spatial extent")
    return DescriptorVector(_ordered_channel_sums(fmap.data) / cells)


def max_pool(fmap: FeatureMap) -> DescriptorVector:
    """Per-channel maximum over the spatial grid."""
    if fmap.height * fmap.width < 1:
        raise InvalidInputError("cannot pool a map with zero spatial extent")
    flat = fmap.data.reshape(fmap.channels, -1)
    return DescriptorVector(np.max(flat, axis=1))


def sqrt_l2_normalize(vec: DescriptorVector) -> DescriptorVector:
    """Signed square root per component, then scale to unit Euclidean norm.

    The signed root sign(x)*sqrt(|x|) keeps the operation total on arbitrary
    real inputs; post-ReLU activations are unaffected by the sign.  An
    all-zero vector is returned unchanged (flag set) rather than erroring,
    since sparse maps can legitimately pool to zero.
    """
    rooted = np.sign(vec.values) * np.sqrt(np.abs(vec.values))
    norm = float(np.linalg.norm(rooted))
    if norm == 0.0:
        return DescriptorVector(rooted, normalized=True)
    return DescriptorVector(rooted / norm, normalized=True)


def l2_normalize(vec: DescriptorVector) -> DescriptorVector:
    """Scale to unit Euclidean norm; all-zero input is returned unchanged."""
    norm = float(np.linalg.norm(vec.values))
    if norm == 0.0:
        return DescriptorVector(vec.values, normalized=True)
    return DescriptorVector(vec.values / norm, normalized=True)
