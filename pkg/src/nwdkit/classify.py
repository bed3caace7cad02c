"""Set-based NWD classification and its evaluation.

An item goes to the class whose term set grows least in NWD when the item
is added to it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Mapping, Sequence

from .core import nwd_delta
from .errors import NwdError, UnclassifiableError, UndefinedDeltaError
from .snapshot import FrequencySnapshot, TermSet

UNCLASSIFIED = "(unclassified)"


@dataclass(frozen=True)
class LabeledClasses:
    classes: Mapping[str, TermSet]

    def __post_init__(self):
        classes = {str(k): v if isinstance(v, TermSet) else TermSet(v) for k, v in dict(self.classes).items()}
        if len(classes) < 2:
            raise ValueError("need at least two classes")
        for label, ts in classes.items():
            if len(ts) < 2:
                raise ValueError(f"class {label!r} has {len(ts)} term(s); at least two are required")
            if label == UNCLASSIFIED:
                raise ValueError(f"{UNCLASSIFIED!r} is reserved")
        sets = list(classes.values())
        if len(set(sets)) != len(sets):
            raise ValueError("class term sets must be pairwise distinct")
        object.__setattr__(self, "classes", dict(sorted(classes.items())))

    @property
    def labels(self) -> list[str]:
        return list(self.classes)

    def termsets_for(self, items: Sequence[str]) -> list[TermSet]:
        """Every set a snapshot must hold to classify ``items``."""
        out = list(self.classes.values())
        for x in items:
            out.extend(ts.union(x) for ts in self.classes.values())
        return out


def class_deltas(snapshot: FrequencySnapshot, classes: LabeledClasses, x: str,
                 clamp: bool = False) -> dict[str, float | None]:
    """NWD growth per class for item ``x``; ``None`` where undefined."""
    deltas = {}
    for label, ts in classes.classes.items():
        try:
            deltas[label] = nwd_delta(snapshot, ts, x, clamp=clamp)
        except UndefinedDeltaError:
            deltas[label] = None
    return deltas


def _pick(deltas: Mapping[str, float | None], x) -> str:
    defined = [(d, label) for label, d in deltas.items() if d is not None]
    if not defined:
        raise UnclassifiableError(x)
    # tuples compare delta first, then label, so ties go to the smaller label
    return min(defined)[1]


def classify(snapshot: FrequencySnapshot, classes: LabeledClasses, x: str, clamp: bool = False) -> str:
    return _pick(class_deltas(snapshot, classes, x, clamp), x)


@dataclass(frozen=True)
class ConfidenceInterval:
    lower: float
    upper: float
    confidence: float = 0.95
    method: str = "wilson"

    def to_dict(self) -> dict:
        return {"lower": self.lower, "upper": self.upper,
                "confidence": self.confidence, "method": self.method}


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> ConfidenceInterval:
    """Wilson score interval for a binomial proportion.

    >>> ci = wilson_interval(12, 12)
    >>> round(ci.lower, 3), ci.upper
    (0.758, 1.0)
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not 0 <= successes <= trials:
        raise ValueError(f"successes must lie in [0, {trials}], got {successes}")
    if not 0 < confidence < 1:
        raise ValueError("confidence must lie in (0, 1)")
    z = NormalDist().inv_cdf((1 + confidence) / 2)
    n = trials
    p = successes / n
    z2 = z * z
    denom = 1 + z2 / n
    center = (p + z2 / (2 * n)) / denom
    spread = z * math.sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / denom
    lower = max(0.0, min(p, center - spread))
    upper = min(1.0, max(p, center + spread))
    return ConfidenceInterval(lower, upper, confidence, "wilson")


@dataclass(frozen=True)
class ItemResult:
    item: str
    true_label: str
    predicted: str
    deltas: dict[str, float | None]
    error: str | None = None


@dataclass(frozen=True)
class ClassificationReport:
    labels: list[str]
    confusion: list[list[int]]
    accuracy: float
    interval: ConfidenceInterval
    per_item: list[ItemResult] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "labels": self.labels,
            "confusion": self.confusion,
            "accuracy": self.accuracy,
            "interval": self.interval.to_dict(),
            "items": [
                {"item": r.item, "true": r.true_label, "predicted": r.predicted,
                 "deltas": r.deltas, "error": r.error}
                for r in self.per_item
            ],
        }

    def to_text(self) -> str:
        width = max(len(label) for label in self.labels + ["true \\ predicted"])
        cell = max(5, *(len(label) for label in self.labels))
        lines = ["true \\ predicted".ljust(width) + "  " + "  ".join(l.rjust(cell) for l in self.labels)]
        for label, row in zip(self.labels, self.confusion):
            lines.append(label.ljust(width) + "  " + "  ".join(str(v).rjust(cell) for v in row))
        ci = self.interval
        lines.append("")
        lines.append(f"accuracy: {self.accuracy:.3f} ({ci.lower:.2f}, {ci.upper:.2f}) "
                     f"{ci.confidence:.0%} {ci.method} interval, n={len(self.per_item)}")
        for r in self.per_item:
            if r.predicted != r.true_label:
                why = f" [{r.error}]" if r.error else ""
                lines.append(f"  miss: {r.item} true={r.true_label} predicted={r.predicted}{why}")
        return "\n".join(lines) + "\n"


def evaluate(snapshot: FrequencySnapshot, classes: LabeledClasses,
             items: Sequence[tuple[str, str]], confidence: float = 0.95,
             clamp: bool = False) -> ClassificationReport:
    """Classify every item and tabulate the outcome.

    Items that cannot be classified, including those whose counts are
    missing, are recorded under ``(unclassified)`` and count as errors.
    """
    if not items:
        raise ValueError("no items to evaluate")
    labels = classes.labels
    for item, true_label in items:
        if true_label not in classes.classes:
            raise ValueError(f"item {item!r} has unknown label {true_label!r}")

    results = []
    for item, true_label in items:
        deltas, error = {}, None
        try:
            deltas = class_deltas(snapshot, classes, item, clamp)
            predicted = _pick(deltas, item)
        except NwdError as exc:
            predicted, error = UNCLASSIFIED, str(exc)
        results.append(ItemResult(item, true_label, predicted, deltas, error))

    if any(r.predicted == UNCLASSIFIED for r in results):
        labels = labels + [UNCLASSIFIED]
    pos = {label: i for i, label in enumerate(labels)}
    confusion = [[0] * len(labels) for _ in labels]
    for r in results:
        confusion[pos[r.true_label]][pos[r.predicted]] += 1
    correct = sum(r.predicted == r.true_label for r in results)
    return ClassificationReport(
        labels=labels,
        confusion=confusion,
        accuracy=correct / len(results),
        interval=wilson_interval(correct, len(results), confidence),
        per_item=results,
    )
