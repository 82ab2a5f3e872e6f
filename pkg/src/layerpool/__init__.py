"""Pooled multi-layer CNN descriptors for retrieval and classification.

The pipeline: decode an image, resize it under a dataset-derived scale
plan, run a convolutional network, pool each tapped activation map to a
channel vector, signed-sqrt + l2 normalize, and optionally concatenate
taps into one fused descriptor.  Evaluation covers brute-force cosine
search (mAP, N-S) and repeated-split k-NN classification.
"""

from .classify import LabeledSet, SplitSpec, accuracy, knn_predict, random_split, run_protocol, topk_error
from .errors import InvalidInputError
from .images import ImageRaster, read_image, write_image
from .manifest import DatasetManifest, ImageEntry, RunConfig, config_fingerprint
from .pipeline import CHANNEL_TABLES, PipelineConfig, describe, describe_maps, fuse_concat, fused_dim, layer_descriptor
from .reports import ClassificationReport, FingerprintMismatchError, RetrievalReport, load_report
from .resize import ScalePlan, bilinear_resize, compute_scale1, resize_to_plan, round_half_up, target_dims
from .retrieval import (
    DescriptorIndex,
    RankedList,
    RelevanceManifest,
    average_precision,
    build_index,
    late_fuse,
    mean_ap,
    ns_score,
    search,
)
from .tensor import DescriptorVector, FeatureMap, avg_pool, l2_normalize, max_pool, sqrt_l2_normalize
from .tensorfile import (
    BadMagicError,
    TensorFormatError,
    TruncatedPayloadError,
    UnsupportedHeaderError,
    read_tensor,
    write_tensor,
)
from .toycnn import LayerSpec, NetworkSpec, build_toy_net, conv_output_size, forward

__version__ = "0.1.0"

__all__ = [
    "InvalidInputError",
    "FeatureMap",
    "DescriptorVector",
    "avg_pool",
    "max_pool",
    "sqrt_l2_normalize",
    "l2_normalize",
    "ImageRaster",
    "read_image",
    "write_image",
    "LayerSpec",
    "NetworkSpec",
    "build_toy_net",
    "conv_output_size",
    "forward",
    "ScalePlan",
    "compute_scale1",
    "target_dims",
    "bilinear_resize",
    "resize_to_plan",
    "round_half_up",
    "PipelineConfig",
    "CHANNEL_TABLES",
    "layer_descriptor",
    "fuse_concat",
    "fused_dim",
    "describe",
    "describe_maps",
    "DescriptorIndex",
    "RankedList",
    "RelevanceManifest",
    "build_index",
    "search",
    "late_fuse",
    "average_precision",
    "mean_ap",
    "ns_score",
    "LabeledSet",
    "SplitSpec",
    "random_split",
    "knn_predict",
    "accuracy",
    "topk_error",
    "run_protocol",
    "RetrievalReport",
    "ClassificationReport",
    "FingerprintMismatchError",
    "load_report",
    "DatasetManifest",
    "ImageEntry",
    "RunConfig",
    "config_fingerprint",
    "TensorFormatError",
    "BadMagicError",
    "UnsupportedHeaderError",
    "TruncatedPayloadError",
    "read_tensor",
    "write_tensor",
    "__version__",
]
