import pytest

from layerpool import ClassificationReport, FingerprintMismatchError, RetrievalReport, load_report
from layerpool.errors import InvalidInputError


def test_retrieval_report_aggregates():
    r = RetrievalReport(label="x", fingerprint="f",
                        per_query_ap={"q1": 1.0, "q2": 0.5},
                        per_query_ns={"q1": 4, "q2": 2})
    assert r.map_score == pytest.approx(0.75)
    assert r.ns == pytest.approx(3.0)
    assert r.metrics() == {"mAP": 0.75, "N-S": 3.0}


def test_retrieval_report_merge_same_fingerprint():
    a = RetrievalReport(label="x", fingerprint="f", per_query_ap={"q1": 1.0})
    b = RetrievalReport(label="x", fingerprint="f", per_query_ap={"q2": 0.0})
    merged = a.merge(b)
    assert merged.map_score == pytest.approx(0.5)


def test_retrieval_report_merge_refuses_mismatch():
    a = RetrievalReport(label="x", fingerprint="f1", per_query_ap={"q1": 1.0})
    b = RetrievalReport(label="x", fingerprint="f2", per_query_ap={"q2": 0.0})
    with pytest.raises(FingerprintMismatchError):
        a.merge(b)


def test_retrieval_report_merge_refuses_overlap():
    a = RetrievalReport(label="x", fingerprint="f", per_query_ap={"q1": 1.0})
    b = RetrievalReport(label="x", fingerprint="f", per_query_ap={"q1": 0.0})
    with pytest.raises(InvalidInputError):
        a.merge(b)


def test_retrieval_report_json_round_trip(tmp_path):
    r = RetrievalReport(label="run", fingerprint="abc", per_query_ap={"q": 0.25})
    path = tmp_path / "r.json"
    r.to_json(path)
    back = load_report(path)
    assert back == r


def test_classification_report_json_round_trip(tmp_path):
    r = ClassificationReport(label="run", fingerprint="abc", classifier="cosine-knn-k5",
                             per_repeat_accuracy=(0.9, 1.0), topk_errors={1: 0.05})
    path = tmp_path / "c.json"
    r.to_json(path)
    back = load_report(path)
    assert back == r
    assert back.mean_accuracy == pytest.approx(0.95)


def test_classification_report_merge():
    a = ClassificationReport(label="x", fingerprint="f", classifier="c", per_repeat_accuracy=(1.0,))
    b = ClassificationReport(label="x", fingerprint="f", classifier="c", per_repeat_accuracy=(0.0,))
    assert a.merge(b).mean_accuracy == pytest.approx(0.5)
    c = ClassificationReport(label="x", fingerprint="other", classifier="c", per_repeat_accuracy=(0.0,))
    with pytest.raises(FingerprintMismatchError):
        a.merge(c)


def test_text_tables_contain_metrics():
    r = RetrievalReport(label="runA", fingerprint="f", per_query_ap={"q": 0.5})
    table = r.text_table()
    assert "runA" in table and "0.5000" in table and "mAP" in table
    c = ClassificationReport(label="runB", fingerprint="f", classifier="cosine-knn-k5",
                             per_repeat_accuracy=(0.75,), topk_errors={5: 0.1})
    table = c.text_table()
    assert "runB" in table and "cosine-knn-k5" in table and "top-5" in table


def test_load_report_unknown_kind(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"kind": "mystery"}')
    with pytest.raises(InvalidInputError):
        load_report(path)
