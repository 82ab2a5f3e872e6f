"""A small deterministic CNN forward pass with named tap points.

The network is a plain layer list (conv / relu / maxpool / flatten-fc) run
in order; the maps at the configured tap points are returned.  Weights are
either given explicitly or drawn from a seeded uniform(-0.5, 0.5)
initializer, so two forward passes over the same input are bit-identical.

Input images of arbitrary spatial size are accepted: convolution and
spatial max pooling follow the usual floor((n + 2p - k)/s) + 1 shape rule,
and the flatten-fc layer averages each channel over space before the linear
map, so one weight set serves every input size.

JSON schema (``NetworkSpec.to_json`` / ``from_json``)::

    {"tap_points": ["conv1", ...],
     "layers": [{"name": str, "kind": "conv"|"relu"|"maxpool"|"flatten-fc",
                 "kernel_size": int, "stride": int, "padding": int,
                 "out_channels": int,
                 "weights": nested list | null, "bias": list | null}, ...]}

``from_json`` also accepts the shorthand ``{"toy_seed": int,
"in_channels": int}`` for the default three-block network.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InvalidInputError
from .images import ImageRaster
from .tensor import FeatureMap

KINDS = ("conv", "relu", "maxpool", "flatten-fc")


def conv_output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    """Closed-form output extent of a strided window over a padded axis."""
    return (size + 2 * padding - kernel) // stride + 1


@dataclass(frozen=True)
class LayerSpec:
    """One layer definition.

    conv weights are shaped (out_channels, in_channels, k, k); flatten-fc
    weights (out_channels, in_channels).  relu/maxpool carry no weights.
    """

    name: str
    kind: str
    kernel_size: int = 1
    stride: int = 1
    padding: int = 0
    out_channels: int = 0
    weights: np.ndarray | None = None
    bias: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInputError(f"layer '{self.name}': unknown kind '{self.kind}'")
        if self.kind in ("conv", "maxpool") and self.kernel_size < 1:
            raise InvalidInputError(f"layer '{self.name}': kernel_size must be positive")
        if self.stride < 1 or self.padding < 0:
            raise InvalidInputError(f"layer '{self.name}': bad stride/padding")
        if self.kind in ("conv", "flatten-fc"):
            if self.out_channels < 1:
                raise InvalidInputError(f"layer '{self.name}': out_channels must be positive")
            w = np.asarray(self.weights, dtype=np.float64)
            b = np.asarray(self.bias, dtype=np.float64)
            if self.kind == "conv":
                if w.ndim != 4 or w.shape[0] != self.out_channels or w.shape[2] != self.kernel_size or w.shape[3] != self.kernel_size:
                    raise InvalidInputError(
                        f"layer '{self.name}': conv weights must be "
                        f"(out, in, {self.kernel_size}, {self.kernel_size}), got {w.shape}"
                    )
            else:
                if w.ndim != 2 or w.shape[0] != self.out_channels:
                    raise InvalidInputError(
                        f"layer '{self.name}': fc weights must be (out, in), got {w.shape}"
                    )
            if b.shape != (self.out_channels,):
                raise InvalidInputError(
                    f"layer '{self.name}': bias must have {self.out_channels} entries, got {b.shape}"
                )
            w.flags.writeable = False
            b.flags.writeable = False
            object.__setattr__(self, "weights", w)
            object.__setattr__(self, "bias", b)

    @property
    def in_channels(self) -> int | None:
        if self.weights is None:
            return None
        return self.weights.shape[1]


@dataclass(frozen=True)
class NetworkSpec:
    """Ordered layer list plus the names whose output maps are exported."""

    layers: tuple[LayerSpec, ...]
    tap_points: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "tap_points", tuple(self.tap_points))
        names = [layer.name for layer in self.layers]
        if len(set(names)) != len(names):
            raise InvalidInputError("layer names must be unique")
        missing = [t for t in self.tap_points if t not in names]
        if missing:
            raise InvalidInputError(f"tap points not among layer names: {missing}")

    def tap_channels(self) -> dict[str, int]:
        """Channel count of every tap map, from the layer chain."""
        out = {}
        channels = None
        for layer in self.layers:
            if layer.kind in ("conv", "flatten-fc"):
                channels = layer.out_channels
            if layer.name in self.tap_points:
                out[layer.name] = channels
        return out

    def to_json(self, path: str | Path | None = None) -> dict:
        doc = {
            "tap_points": list(self.tap_points),
            "layers": [
                {
                    "name": lyr.name,
                    "kind": lyr.kind,
                    "kernel_size": lyr.kernel_size,
                    "stride": lyr.stride,
                    "padding": lyr.padding,
                    "out_channels": lyr.out_channels,
                    "weights": None if lyr.weights is None else lyr.weights.tolist(),
                    "bias": None if lyr.bias is None else lyr.bias.tolist(),
                }
                for lyr in self.layers
            ],
        }
        if path is not None:
            Path(path).write_text(json.dumps(doc))
        return doc

    @classmethod
    def from_json(cls, doc: dict | str | Path) -> "NetworkSpec":
        if isinstance(doc, (str, Path)):
            doc = json.loads(Path(doc).read_text())
        if "toy_seed" in doc:
            return build_toy_net(seed=int(doc["toy_seed"]), in_channels=int(doc.get("in_channels", 3)))
        layers = [
            LayerSpec(
                name=entry["name"],
                kind=entry["kind"],
                kernel_size=int(entry.get("kernel_size", 1)),
                stride=int(entry.get("stride", 1)),
                padding=int(entry.get("padding", 0)),
                out_channels=int(entry.get("out_channels", 0)),
                weights=entry.get("weights"),
                bias=entry.get("bias"),
            )
            for entry in doc["layers"]
        ]
        return cls(layers=tuple(layers), tap_points=tuple(doc["tap_points"]))


def conv2d(fmap: FeatureMap, layer: LayerSpec) -> FeatureMap:
    """Zero-padded strided convolution (windowed dot product plus bias)."""
    if layer.kind != "conv":
        raise InvalidInputError(f"layer '{layer.name}' is not a conv layer")
    if fmap.channels != layer.in_channels:
        raise InvalidInputError(
            f"layer '{layer.name}': input has {fmap.channels} channels, weights expect {layer.in_channels}"
        )
    k, s, p = layer.kernel_size, layer.stride, layer.padding
    if fmap.height + 2 * p < k or fmap.width + 2 * p < k:
        raise InvalidInputError(
            f"layer '{layer.name}': padded input {fmap.height + 2 * p}x{fmap.width + 2 * p} "
            f"smaller than kernel {k}"
        )
    padded = np.pad(fmap.data, ((0, 0), (p, p), (p, p)))
    windows = sliding_window_view(padded, (k, k), axis=(1, 2))[:, ::s, ::s]
    out = np.einsum("oikl,ihwkl->ohw", layer.weights, windows, optimize=True)
    out += layer.bias[:, None, None]
    return FeatureMap(out, layer_name=layer.name)


def relu(fmap: FeatureMap, layer: LayerSpec | None = None) -> FeatureMap:
    """Elementwise max(x, 0); shape preserved."""
    name = layer.name if layer is not None else fmap.layer_name
    return FeatureMap(np.maximum(fmap.data, 0.0), layer_name=name)


def maxpool2d(fmap: FeatureMap, layer: LayerSpec) -> FeatureMap:
    """Windowed spatial maximum per channel, zero-padded, conv shape rule."""
    if layer.kind != "maxpool":
        raise InvalidInputError(f"layer '{layer.name}' is not a maxpool layer")
    k, s, p = layer.kernel_size, layer.stride, layer.padding
    if fmap.height + 2 * p < k or fmap.width + 2 * p < k:
        raise InvalidInputError(
            f"layer '{layer.name}': pool window {k} larger than padded input "
            f"{fmap.height + 2 * p}x{fmap.width + 2 * p}"
        )
    padded = np.pad(fmap.data, ((0, 0), (p, p), (p, p)))
    windows = sliding_window_view(padded, (k, k), axis=(1, 2))[:, ::s, ::s]
    return FeatureMap(windows.max(axis=(3, 4)), layer_name=layer.name)


def flatten_fc(fmap: FeatureMap, layer: LayerSpec) -> FeatureMap:
    """Spatial-average flatten followed by a linear map, emitted as 1x1xC.

    Averaging over space (instead of raw flattening) keeps the weight count
    independent of the input size, which the variable-size forward pass
    requires.
    """
    if layer.kind != "flatten-fc":
        raise InvalidInputError(f"layer '{layer.name}' is not a flatten-fc layer")
    if fmap.channels != layer.in_channels:
        raise InvalidInputError(
            f"layer '{layer.name}': input has {fmap.channels} channels, weights expect {layer.in_channels}"
        )
    pooled = fmap.data.reshape(fmap.channels, -1).mean(axis=1)
    out = layer.weights @ pooled + layer.bias
    return FeatureMap(out[:, None, None], layer_name=layer.name)


_APPLY = {"conv": conv2d, "relu": relu, "maxpool": maxpool2d, "flatten-fc": flatten_fc}


def forward(image: ImageRaster, net: NetworkSpec) -> dict[str, FeatureMap]:
    """Run the network over one image and return the map at every tap point.

    Raises InvalidInputError naming the offending layer when the input is
    too small for some window.
    """
    current = FeatureMap(image.pixels, layer_name="input")
    taps: dict[str, FeatureMap] = {}
    for layer in net.layers:
        current = _APPLY[layer.kind](current, layer)
        if layer.name in net.tap_points:
            taps[layer.name] = current
    return taps


def build_toy_net(seed: int = 0, in_channels: int = 3) -> NetworkSpec:
    """Default toy network: three conv->relu->maxpool blocks (4, 8, 16
    channels) plus a 32-unit flatten-fc tap, uniform(-0.5, 0.5) weights."""
    rng = np.random.default_rng(seed)

    def uniform(shape):
        return rng.uniform(-0.5, 0.5, size=shape)

    layers: list[LayerSpec] = []
    channels = in_channels
    for i, out_c in enumerate((4, 8, 16), start=1):
        layers.append(
            LayerSpec(
                name=f"conv{i}_filter", kind="conv", kernel_size=3, stride=1, padding=1,
                out_channels=out_c, weights=uniform((out_c, channels, 3, 3)), bias=uniform((out_c,)),
            )
        )
        layers.append(LayerSpec(name=f"conv{i}_relu", kind="relu"))
        layers.append(LayerSpec(name=f"conv{i}", kind="maxpool", kernel_size=2, stride=2))
        channels = out_c
    layers.append(
        LayerSpec(
            name="fc4", kind="flatten-fc", out_channels=32,
            weights=uniform((32, channels)), bias=uniform((32,)),
        )
    )
    return NetworkSpec(layers=tuple(layers), tap_points=("conv1", "conv2", "conv3", "fc4"))
