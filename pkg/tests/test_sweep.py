"""Grid expansion, the worker pool cap, and sweep outputs."""

import json

import pytest

from layerpool import InvalidInputError
from layerpool.sweep import SweepCell, grid_cells, load_network, run_sweep, worker_count

from conftest import make_group_dataset


def test_grid_cells_cardinality():
    grid = {"layers": ["c1", "c2", ["c1", "c2"]], "scales": [1.0, 0.5], "pooling": ["avg", "max"]}
    cells = grid_cells(grid)
    assert len(cells) == 3 * 2 * 2


def test_grid_cells_single_cell():
    cells = grid_cells({"layers": ["c1"]})
    assert cells == [SweepCell(layers=("c1",), scale=None, pooling="avg")]


def test_grid_cells_empty_layers_rejected():
    with pytest.raises(InvalidInputError):
        grid_cells({"layers": []})


def test_cell_labels():
    cell = SweepCell(layers=("c1", "c2"), scale=0.75, pooling="max")
    assert cell.layer_label == "c1+c2"
    assert "max" in cell.slug and "c1" in cell.slug


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("LAYERPOOL_THREADS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("LAYERPOOL_THREADS", "not-a-number")
    with pytest.raises(InvalidInputError):
        worker_count()
    monkeypatch.delenv("LAYERPOOL_THREADS")
    assert worker_count() >= 1


def test_load_network_shorthand_and_json(tmp_path):
    net = load_network("toy:5")
    assert net.tap_points == ("conv1", "conv2", "conv3", "fc4")
    path = tmp_path / "net.json"
    net.to_json(path)
    clone = load_network(path)
    assert clone.tap_points == net.tap_points


def test_sweep_writes_summary_reports_figures(tmp_path, monkeypatch):
    monkeypatch.setenv("LAYERPOOL_THREADS", "2")
    manifest = make_group_dataset(tmp_path / "data", n_groups=3, members=4, size=(20, 16))
    grid = {
        "task": "retrieval",
        "manifest": str(manifest),
        "net": "toy:0",
        "layers": ["conv1", "conv2"],
        "scales": [1.0],
        "pooling": ["avg", "max"],
    }
    out = tmp_path / "out"
    failed = run_sweep(grid, out)
    assert failed == 0
    rows = (out / "summary.csv").read_text().strip().splitlines()
    # header + 2 layers x 1 scale x 2 pooling x 2 metrics (mAP + N-S)
    assert rows[0] == "layer,scale,pooling,metric,value,fingerprint"
    assert len(rows) == 1 + 8
    assert (out / "reports").is_dir()
    assert len(list((out / "reports").glob("*.json"))) == 4
    assert not (out / "failures.json").exists()
    figures = list((out / "figures").glob("*.png"))
    assert figures, "sweep must render figures next to the CSV"


def test_sweep_csv_deterministic(tmp_path, monkeypatch):
    monkeypatch.setenv("LAYERPOOL_THREADS", "4")
    manifest = make_group_dataset(tmp_path / "data", n_groups=2, members=4, size=(16, 12))
    grid = {
        "task": "retrieval",
        "manifest": str(manifest),
        "net": "toy:0",
        "layers": ["conv1", "conv3"],
        "scales": [1.0, 0.5],
        "pooling": ["avg"],
    }
    run_sweep(grid, tmp_path / "a")
    run_sweep(grid, tmp_path / "b")
    assert (tmp_path / "a/summary.csv").read_bytes() == (tmp_path / "b/summary.csv").read_bytes()


def test_sweep_classification_task(tmp_path):
    manifest = make_group_dataset(tmp_path / "data", n_groups=3, members=6, size=(16, 12))
    grid = {
        "task": "classification",
        "manifest": str(manifest),
        "net": "toy:0",
        "layers": ["conv2"],
        "pooling": ["avg"],
        "train_per_class": 3,
        "repeats": 3,
    }
    out = tmp_path / "out"
    assert run_sweep(grid, out) == 0
    rows = (out / "summary.csv").read_text().strip().splitlines()
    assert len(rows) == 2
    assert "accuracy" in rows[1]


def test_sweep_cell_failure_recorded_not_fatal(tmp_path):
    manifest = make_group_dataset(tmp_path / "data", n_groups=2, members=4, size=(16, 12))
    grid = {
        "task": "retrieval",
        "manifest": str(manifest),
        "net": "toy:0",
        "layers": ["conv1", "no-such-tap"],
        "pooling": ["avg"],
    }
    out = tmp_path / "out"
    failed = run_sweep(grid, out)
    assert failed == 1
    sidecar = json.loads((out / "failures.json").read_text())
    assert len(sidecar) == 1
    rows = (out / "summary.csv").read_text().strip().splitlines()
    assert len(rows) == 1 + 2  # the surviving cell's mAP and N-S rows
