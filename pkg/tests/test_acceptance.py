"""Acceptance gate: one test per shipped guarantee, each printing a
PASS/FAIL line (run with -s to see them as they happen).

Every numeric check here is against an independent oracle computed inside
this file (scalar loops, hand arithmetic, closed forms), never against the
library's own output.
"""

import time
from contextlib import contextmanager

import numpy as np
import pytest

from layerpool import (
    CHANNEL_TABLES,
    DescriptorVector,
    FeatureMap,
    ImageRaster,
    PipelineConfig,
    RankedList,
    RelevanceManifest,
    ScalePlan,
    avg_pool,
    average_precision,
    build_index,
    build_toy_net,
    compute_scale1,
    describe,
    layer_descriptor,
    max_pool,
    ns_score,
    search,
    sqrt_l2_normalize,
    target_dims,
)
from layerpool.classify import LabeledSet, SplitSpec, run_protocol, topk_error
from layerpool.pipeline import fused_dim
from layerpool.tensorfile import (
    BadMagicError,
    TruncatedPayloadError,
    UnsupportedHeaderError,
    read_tensor,
    write_tensor,
)
from layerpool.toycnn import LayerSpec, conv2d, conv_output_size, maxpool2d


@contextmanager
def criterion(name, limit_s=None):
    start = time.perf_counter()
    try:
        yield
    except Exception:
        print(f"FAIL  {name}")
        raise
    elapsed = time.perf_counter() - start
    if limit_s is not None and elapsed >= limit_s:
        print(f"FAIL  {name} (took {elapsed:.2f}s, limit {limit_s}s)")
        raise AssertionError(f"{name}: runtime {elapsed:.2f}s exceeds {limit_s}s")
    print(f"PASS  {name} ({elapsed:.2f}s)")


def test_dimension_identities():
    with criterion("dimension identities: 9,568 and 9,664 from the channel tables", limit_s=1.0):
        assert fused_dim(CHANNEL_TABLES["alexnet"]) == 9568
        assert sum(CHANNEL_TABLES["alexnet"].values()) == 96 + 256 + 384 + 384 + 256 + 4096 + 4096
        assert fused_dim(CHANNEL_TABLES["vggnet"]) == 9664
        assert sum(CHANNEL_TABLES["vggnet"].values()) == 64 + 128 + 256 + 512 + 512 + 4096 + 4096


def test_pooling_oracle_suite():
    with criterion("pooling: 200 fixed-seed maps match scalar-loop oracles (1e-9 rel)", limit_s=5.0):
        rng = np.random.default_rng(2024)
        for case in range(200):
            c = int(rng.integers(1, 65))
            h = int(rng.integers(1, 17))
            w = int(rng.integers(1, 17))
            data = rng.standard_normal((c, h, w))
            fmap = FeatureMap(data)
            avg_expected = np.empty(c)
            max_expected = np.empty(c)
            for ci in range(c):
                total = 0.0
                best = data[ci, 0, 0]
                for y in range(h):
                    for x in range(w):
                        v = data[ci, y, x]
                        total += v
                        if v > best:
                            best = v
                avg_expected[ci] = total / (h * w)
                max_expected[ci] = best
            np.testing.assert_allclose(avg_pool(fmap).values, avg_expected, rtol=1e-9)
            np.testing.assert_allclose(max_pool(fmap).values, max_expected, rtol=1e-9)


def test_normalization():
    with criterion("normalization: unit norm on 1,000 vectors; [9,16] -> [0.6,0.8]"):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            dim = int(rng.integers(1, 128))
            vec = DescriptorVector(rng.standard_normal(dim) * rng.uniform(0.01, 100))
            out = sqrt_l2_normalize(vec)
            assert abs(np.linalg.norm(out.values) - 1.0) <= 1e-6
        hand = sqrt_l2_normalize(DescriptorVector(np.array([9.0, 16.0])))
        np.testing.assert_allclose(hand.values, [0.6, 0.8], atol=1e-12)


def test_conv_and_maxpool_oracles():
    with criterion("toy cnn: 50 conv/maxpool cases match nested-loop oracles; shape rule x20"):
        rng = np.random.default_rng(11)

        def conv_oracle(data, weights, bias, s, p):
            in_c, h, w = data.shape
            out_c, _, k, _ = weights.shape
            oh, ow = conv_output_size(h, k, s, p), conv_output_size(w, k, s, p)
            out = np.zeros((out_c, oh, ow))
            for oc in range(out_c):
                for oy in range(oh):
                    for ox in range(ow):
                        acc = bias[oc]
                        for ic in range(in_c):
                            for ky in range(k):
                                for kx in range(k):
                                    y, x = oy * s + ky - p, ox * s + kx - p
                                    if 0 <= y < h and 0 <= x < w:
                                        acc += weights[oc, ic, ky, kx] * data[ic, y, x]
                        out[oc, oy, ox] = acc
            return out

        def maxpool_oracle(data, k, s, p):
            c, h, w = data.shape
            oh, ow = conv_output_size(h, k, s, p), conv_output_size(w, k, s, p)
            out = np.zeros((c, oh, ow))
            for ci in range(c):
                for oy in range(oh):
                    for ox in range(ow):
                        best = None
                        for ky in range(k):
                            for kx in range(k):
                                y, x = oy * s + ky - p, ox * s + kx - p
                                v = data[ci, y, x] if 0 <= y < h and 0 <= x < w else 0.0
                                best = v if best is None or v > best else best
                        out[ci, oy, ox] = best
            return out

        for case in range(50):
            h = int(rng.integers(4, 10))
            w = int(rng.integers(4, 10))
            k = int(rng.integers(1, 4))
            s = int(rng.integers(1, 3))
            p = int(rng.integers(0, 2))
            if h + 2 * p < k or w + 2 * p < k:
                continue
            if case % 2 == 0:
                in_c, out_c = int(rng.integers(1, 4)), int(rng.integers(1, 5))
                weights = rng.standard_normal((out_c, in_c, k, k))
                bias = rng.standard_normal(out_c)
                layer = LayerSpec(name="c", kind="conv", kernel_size=k, stride=s, padding=p,
                                  out_channels=out_c, weights=weights, bias=bias)
                data = rng.standard_normal((in_c, h, w))
                got = conv2d(FeatureMap(data), layer).data
                np.testing.assert_allclose(got, conv_oracle(data, weights, bias, s, p),
                                           rtol=1e-9, atol=1e-12)
            else:
                c = int(rng.integers(1, 6))
                data = rng.standard_normal((c, h, w))
                layer = LayerSpec(name="p", kind="maxpool", kernel_size=k, stride=s, padding=p)
                got = maxpool2d(FeatureMap(data), layer).data
                np.testing.assert_allclose(got, maxpool_oracle(data, k, s, p), rtol=1e-12)

        for _ in range(20):
            n = int(rng.integers(3, 200))
            k = int(rng.integers(1, 6))
            s = int(rng.integers(1, 4))
            p = int(rng.integers(0, 3))
            if n + 2 * p < k:
                continue
            # Count valid window positions directly.
            positions = len(range(0, n + 2 * p - k + 1, s))
            assert conv_output_size(n, k, s, p) == positions


def test_resize_protocol():
    with criterion("resize: dataset long sides 1024/640/1024; 800x600 @ (400, 0.75) -> 300x225"):
        holidays = [(900, 700), (1148, 836)]          # means 1024 x 768
        ukbench = [(640, 480), (640, 480), (640, 480)]  # means 640 x 480
        oxford = [(1000, 700), (1048, 792)]            # means 1024 x 746
        assert compute_scale1(holidays).scale1_long_side == 1024
        assert compute_scale1(ukbench).scale1_long_side == 640
        assert compute_scale1(oxford).scale1_long_side == 1024
        assert target_dims((800, 600), ScalePlan(400, 0.75)) == (300, 225)
        assert target_dims((800, 600), ScalePlan(400, 1.0)) == (400, 300)


def test_retrieval_metrics():
    with criterion("retrieval: AP hand value 0.7222; N-S oracle x100; search == full sort"):
        # AP with hits at ranks 1, 3, 6 of a 10-long list.
        ranked = RankedList("q", tuple((f"i{n}", 1.0 - 0.05 * n) for n in range(10)))
        ap = average_precision(ranked, {"i0", "i2", "i5"})
        assert abs(ap - 0.7222) <= 1e-4

        rng = np.random.default_rng(31)
        for _ in range(100):
            n_groups = int(rng.integers(2, 6))
            ids = [f"i{n}" for n in range(4 * n_groups)]
            groups = tuple(tuple(ids[g * 4:(g + 1) * 4]) for g in range(n_groups))
            manifest = RelevanceManifest(groups=groups, self_match="include")
            lists = {}
            counts = []
            for g in groups:
                for q in g:
                    order = list(rng.permutation(ids))
                    lists[q] = RankedList(q, tuple((i, float(len(ids) - r)) for r, i in enumerate(order)))
                    counts.append(len(set(g) & set(order[:4])))
            got = ns_score(manifest, lists)
            assert 0.0 <= got <= 4.0
            assert got == pytest.approx(float(np.mean(counts)), abs=1e-12)

        for n in (10, 100, 1000):
            matrix = rng.standard_normal((n, 16))
            matrix /= np.linalg.norm(matrix, axis=1, keepdims=True)
            ids = [f"v{i:04d}" for i in range(n)]
            index = build_index(matrix, ids)
            q = rng.standard_normal(16)
            q /= np.linalg.norm(q)
            got = search(DescriptorVector(q), index, k=n).ranked_ids()
            scores = matrix @ q
            expected = [ids[i] for i in sorted(range(n), key=lambda i: (-scores[i], ids[i]))]
            assert got == expected


def test_end_to_end_synthetic_retrieval():
    with criterion("end to end: fused mAP >= worst layer; conv taps shift-invariant", limit_s=30.0):
        rng = np.random.default_rng(404)
        net = build_toy_net(seed=0)
        n_groups, members = 5, 4
        images, ids, groups = [], [], []
        for g in range(n_groups):
            base = rng.random((3, 24, 24))
            group = []
            for m in range(members):
                img = np.roll(base, shift=3 * m, axis=2)
                img = np.clip(img + 0.10 * rng.standard_normal(img.shape), 0.0, 1.0)
                iid = f"g{g}m{m}"
                images.append(ImageRaster(img))
                ids.append(iid)
                group.append(iid)
            groups.append(tuple(group))
        manifest = RelevanceManifest(groups=tuple(groups), self_match="include")

        def map_for(layers):
            cfg = PipelineConfig(layers=layers, pooling_mode="avg", fuse=len(layers) > 1)
            matrix = np.stack([describe(img, net, cfg).values for img in images])
            index = build_index(matrix, ids)
            by_id = dict(zip(ids, matrix))
            aps = []
            for q in manifest.query_ids():
                ranked = search(DescriptorVector(by_id[q]), index, k=len(ids), query_id=q)
                aps.append(average_precision(ranked, manifest.relevant_for(q)))
            return float(np.mean(aps))

        single = {tap: map_for((tap,)) for tap in net.tap_points}
        fused = map_for(net.tap_points)
        worst = min(single.values())
        assert fused >= worst, f"fused mAP {fused:.4f} under worst single layer {worst:.4f} {single}"

        # Injected feature maps: pure cyclic spatial shifts leave the pooled
        # descriptor identical down to the last bit, avg and max alike.
        data = rng.standard_normal((16, 9, 7))
        for mode in ("avg", "max"):
            base_bytes = layer_descriptor(FeatureMap(data), mode).values.tobytes()
            for dy, dx in ((0, 1), (1, 0), (4, 3), (8, 6)):
                rolled = np.roll(np.roll(data, dy, axis=1), dx, axis=2)
                got = layer_descriptor(FeatureMap(rolled), mode).values.tobytes()
                assert got == base_bytes


def test_classification_protocol():
    with criterion("classification: separable 1.0; shuffled 0.10 +/- 0.03; topk monotone"):
        rng = np.random.default_rng(52)
        centers = rng.standard_normal((4, 16)) * 3.0
        descs, labels = [], []
        for c in range(4):
            for _ in range(12):
                descs.append(centers[c] + 0.01 * rng.standard_normal(16))
                labels.append(c)
        data = LabeledSet(np.array(descs), np.array(labels), 4)
        report = run_protocol(data, SplitSpec(train_per_class=6, repeats=10, seed=0))
        assert report.mean_accuracy == 1.0
        assert len(report.per_repeat_accuracy) == 10

        centers10 = rng.standard_normal((10, 16))
        descs, labels = [], []
        for c in range(10):
            for _ in range(30):
                descs.append(centers10[c] + 0.05 * rng.standard_normal(16))
                labels.append(c)
        shuffled = LabeledSet(np.array(descs), rng.permutation(np.array(labels)), 10)
        chance = run_protocol(shuffled, SplitSpec(train_per_class=15, repeats=10, seed=1), k=1)
        assert abs(chance.mean_accuracy - 0.10) <= 0.03, chance.mean_accuracy

        for _ in range(100):
            scores = rng.standard_normal((25, 8))
            truth = rng.integers(0, 8, size=25)
            errors = [topk_error(scores, truth, k) for k in range(1, 9)]
            assert all(a >= b - 1e-12 for a, b in zip(errors, errors[1:]))
            assert errors[-1] == 0.0


def test_tensor_format_round_trip(tmp_path):
    with criterion("tensor format: 100 byte-identical round trips; malformed headers rejected"):
        rng = np.random.default_rng(64)
        for case in range(100):
            ndim = int(rng.integers(1, 5))
            shape = tuple(int(rng.integers(1, 7)) for _ in range(ndim))
            arr = rng.standard_normal(shape).astype(np.float32)
            path = tmp_path / f"t{case}.npy"
            write_tensor(arr, path)
            back = read_tensor(path)
            assert back.shape == arr.shape
            assert back.tobytes() == arr.tobytes()

        bad_magic = tmp_path / "bad_magic.npy"
        bad_magic.write_bytes(b"JUNKJUNKJUNK")
        with pytest.raises(BadMagicError):
            read_tensor(bad_magic)

        good = tmp_path / "good.npy"
        write_tensor(np.ones(3, dtype=np.float32), good)
        raw = bytearray(good.read_bytes())
        raw[6] = 9
        versioned = tmp_path / "version.npy"
        versioned.write_bytes(bytes(raw))
        with pytest.raises(UnsupportedHeaderError):
            read_tensor(versioned)

        truncated = tmp_path / "trunc.npy"
        truncated.write_bytes(good.read_bytes()[:-4])
        with pytest.raises(TruncatedPayloadError):
            read_tensor(truncated)
