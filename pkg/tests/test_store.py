"""Descriptor persistence and the exported-tensor directory reader."""

import json

import numpy as np
import pytest

from layerpool import InvalidInputError, PipelineConfig, build_toy_net, write_tensor
from layerpool.store import TensorDirectory, extract_from_tensor_dir, load_descriptors, save_descriptors


def test_descriptor_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    matrix = rng.standard_normal((5, 12)).astype(np.float32).astype(np.float64)
    ids = [f"im{n}" for n in range(5)]
    path = tmp_path / "d.npy"
    save_descriptors(matrix, ids, path, fingerprint="fp", meta={"note": "x"})
    back, back_ids, doc = load_descriptors(path)
    np.testing.assert_array_equal(back, matrix)
    assert back_ids == ids
    assert doc["fingerprint"] == "fp"
    assert doc["note"] == "x"


def test_save_rejects_mismatched_ids(tmp_path):
    with pytest.raises(InvalidInputError):
        save_descriptors(np.zeros((2, 3)), ["only-one"], tmp_path / "d.npy")


def test_load_requires_sidecar(tmp_path):
    path = tmp_path / "d.npy"
    write_tensor(np.zeros((1, 4), dtype=np.float32), path)
    with pytest.raises(InvalidInputError):
        load_descriptors(path)


def _write_tensor_dir(root, net, images, taps=("conv1", "fc4")):
    """Emulate an exporter: forward each image, write tap tensors + manifest."""
    from layerpool import ImageRaster, forward

    root.mkdir(parents=True, exist_ok=True)
    entries = []
    for iid, pixels in images.items():
        maps = forward(ImageRaster(pixels), net)
        files = {}
        for tap in taps:
            rel = f"{iid}_{tap}.npy"
            write_tensor(maps[tap].data.astype(np.float32), root / rel)
            files[tap] = rel
        entries.append({"id": iid, "files": files})
    doc = {"model": "toy:0", "taps": list(taps), "images": entries}
    (root / "manifest.json").write_text(json.dumps(doc))


def test_tensor_directory_round_trip(tmp_path):
    net = build_toy_net(seed=0)
    rng = np.random.default_rng(1)
    images = {f"i{n}": rng.random((3, 16, 16)) for n in range(3)}
    _write_tensor_dir(tmp_path / "dump", net, images)

    tdir = TensorDirectory(tmp_path / "dump")
    assert tdir.image_ids() == ["i0", "i1", "i2"]
    maps = tdir.maps_for("i0")
    assert maps["conv1"].data.shape == (4, 8, 8)
    assert maps["fc4"].data.shape == (32, 1, 1)


def test_extract_from_tensor_dir_matches_direct(tmp_path):
    """Descriptors from dumped float32 maps equal descriptors computed from
    the same float32 maps in memory."""
    from layerpool import FeatureMap, ImageRaster, describe_maps, forward

    net = build_toy_net(seed=0)
    rng = np.random.default_rng(2)
    images = {f"i{n}": rng.random((3, 16, 16)) for n in range(2)}
    _write_tensor_dir(tmp_path / "dump", net, images)

    cfg = PipelineConfig(layers=("conv1", "fc4"), pooling_mode="avg", fuse=True)
    matrix, ids = extract_from_tensor_dir(tmp_path / "dump", cfg)
    assert ids == ["i0", "i1"]
    for row, iid in zip(matrix, ids):
        maps = forward(ImageRaster(images[iid]), net)
        quantized = {
            tap: FeatureMap(maps[tap].data.astype(np.float32).astype(np.float64), layer_name=tap)
            for tap in ("conv1", "fc4")
        }
        expected = describe_maps(quantized, cfg)
        np.testing.assert_allclose(row, expected.values, rtol=1e-6)


def test_tensor_directory_missing_manifest(tmp_path):
    with pytest.raises(InvalidInputError):
        TensorDirectory(tmp_path)


def test_tensor_directory_unknown_image(tmp_path):
    net = build_toy_net(seed=0)
    _write_tensor_dir(tmp_path / "dump", net, {"a": np.zeros((3, 16, 16))})
    tdir = TensorDirectory(tmp_path / "dump")
    with pytest.raises(InvalidInputError):
        tdir.maps_for("nope")
