"""Shared fixtures: synthetic grouped image datasets written to disk."""

import json

import numpy as np
import pytest

from layerpool import ImageRaster, write_image


def make_group_dataset(root, n_groups=4, members=4, size=(32, 24), seed=7,
                       noise=0.02, shift=2):
    """Write a tiny retrieval/classification dataset under `root`.

    Each group holds `members` noisy cyclic translations of one random base
    pattern, so same-group images are near-duplicates up to a shift.  Returns
    the manifest path.  Group index doubles as the class label.
    """
    w, h = size
    (root / "imgs").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    entries, groups = [], []
    for g in range(n_groups):
        base = rng.random((3, h, w))
        group = []
        for m in range(members):
            img = np.roll(base, shift=m * shift, axis=2)
            img = np.clip(img + noise * rng.standard_normal((3, h, w)), 0.0, 1.0)
            iid = f"g{g:02d}m{m}"
            write_image(ImageRaster(img), root / "imgs" / f"{iid}.ppm")
            entries.append({"id": iid, "path": f"imgs/{iid}.ppm",
                            "width": w, "height": h, "label": g})
            group.append(iid)
        groups.append(group)
    doc = {"images": entries, "groups": groups, "class_count": n_groups}
    path = root / "manifest.json"
    path.write_text(json.dumps(doc))
    return path


@pytest.fixture
def group_dataset(tmp_path):
    """Manifest path of a 4-group, 16-image dataset in tmp_path."""
    return make_group_dataset(tmp_path)
