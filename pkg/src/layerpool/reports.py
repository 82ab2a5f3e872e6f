"""Evaluation reports: JSON documents plus plain-text tables.

Every report carries the config fingerprint of the run that produced it;
reports with different fingerprints refuse to merge.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidInputError


class FingerprintMismatchError(InvalidInputError):
    """Attempted to merge reports from different configurations."""


@dataclass(frozen=True)
class RetrievalReport:
    """Per-query APs and/or N-S contributions plus aggregates."""

    label: str
    fingerprint: str
    per_query_ap: dict[str, float] = field(default_factory=dict)
    per_query_ns: dict[str, int] = field(default_factory=dict)

    @property
    def map_score(self) -> float | None:
        if not self.per_query_ap:
            return None
        return float(np.mean(list(self.per_query_ap.values())))

    @property
    def ns(self) -> float | None:
        if not self.per_query_ns:
            return None
        return float(np.mean(list(self.per_query_ns.values())))

    def metrics(self) -> dict[str, float]:
        out = {}
        if self.map_score is not None:
            out["mAP"] = self.map_score
        if self.ns is not None:
            out["N-S"] = self.ns
        return out

    def merge(self, other: "RetrievalReport") -> "RetrievalReport":
        """Combine per-query results from a sharded run of the same config."""
        if other.fingerprint != self.fingerprint:
            raise FingerprintMismatchError(
                f"cannot merge reports: fingerprint {other.fingerprint[:12]} != {self.fingerprint[:12]}"
            )
        overlap = set(self.per_query_ap) & set(other.per_query_ap)
        overlap |= set(self.per_query_ns) & set(other.per_query_ns)
        if overlap:
            raise InvalidInputError(f"reports overlap on queries: {sorted(overlap)[:5]}")
        return RetrievalReport(
            label=self.label,
            fingerprint=self.fingerprint,
            per_query_ap={**self.per_query_ap, **other.per_query_ap},
            per_query_ns={**self.per_query_ns, **other.per_query_ns},
        )

    def to_json(self, path: str | Path | None = None) -> dict:
        doc = {
            "kind": "retrieval",
            "label": self.label,
            "fingerprint": self.fingerprint,
            "metrics": self.metrics(),
            "per_query_ap": self.per_query_ap,
            "per_query_ns": self.per_query_ns,
        }
        if path is not None:
            Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True))
        return doc

    def text_table(self) -> str:
        metrics = self.metrics()
        header = f"{'Run':<32}" + "".join(f"{name:>10}" for name in metrics)
        row = f"{self.label:<32}" + "".join(f"{value:>10.4f}" for value in metrics.values())
        return "\n".join([header, "-" * len(header), row])


@dataclass(frozen=True)
class ClassificationReport:
    """Accuracy over repeated random splits, with the classifier named."""

    label: str
    fingerprint: str
    classifier: str
    per_repeat_accuracy: tuple[float, ...] = ()
    topk_errors: dict[int, float] = field(default_factory=dict)

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.per_repeat_accuracy))

    @property
    def std_accuracy(self) -> float:
        return float(np.std(self.per_repeat_accuracy))

    def merge(self, other: "ClassificationReport") -> "ClassificationReport":
        if other.fingerprint != self.fingerprint:
            raise FingerprintMismatchError(
                f"cannot merge reports: fingerprint {other.fingerprint[:12]} != {self.fingerprint[:12]}"
            )
        return ClassificationReport(
            label=self.label,
            fingerprint=self.fingerprint,
            classifier=self.classifier,
            per_repeat_accuracy=self.per_repeat_accuracy + other.per_repeat_accuracy,
            topk_errors={**self.topk_errors, **other.topk_errors},
        )

    def to_json(self, path: str | Path | None = None) -> dict:
        doc = {
            "kind": "classification",
            "label": self.label,
            "fingerprint": self.fingerprint,
            "classifier": self.classifier,
            "mean_accuracy": self.mean_accuracy,
            "std_accuracy": self.std_accuracy,
            "per_repeat_accuracy": list(self.per_repeat_accuracy),
            "topk_errors": {str(k): v for k, v in self.topk_errors.items()},
        }
        if path is not None:
            Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True))
        return doc

    def text_table(self) -> str:
        header = f"{'Run':<32}{'classifier':>16}{'accuracy':>12}{'std':>8}"
        row = (
            f"{self.label:<32}{self.classifier:>16}"
            f"{self.mean_accuracy:>12.4f}{self.std_accuracy:>8.4f}"
        )
        lines = [header, "-" * len(header), row]
        for k in sorted(self.topk_errors):
            lines.append(f"{'  top-%d error' % k:<32}{self.topk_errors[k]:>16.4f}")
        return "\n".join(lines)


def load_report(path: str | Path) -> RetrievalReport | ClassificationReport:
    doc = json.loads(Path(path).read_text())
    if doc.get("kind") == "retrieval":
        return RetrievalReport(
            label=doc["label"],
            fingerprint=doc["fingerprint"],
            per_query_ap=doc.get("per_query_ap", {}),
            per_query_ns={k: int(v) for k, v in doc.get("per_query_ns", {}).items()},
        )
    if doc.get("kind") == "classification":
        return ClassificationReport(
            label=doc["label"],
            fingerprint=doc["fingerprint"],
            classifier=doc["classifier"],
            per_repeat_accuracy=tuple(doc.get("per_repeat_accuracy", ())),
            topk_errors={int(k): v for k, v in doc.get("topk_errors", {}).items()},
        )
    raise InvalidInputError(f"{path}: unknown report kind {doc.get('kind')!r}")
