"""Accuracy, the majority baseline, and the sampled-subset protocol.

All functions are generic over two-valued label domains (entailment
labels and analogy labels alike); the canonical label order used for
tie-breaking is the enum declaration order.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Sequence

from analex.errors import DataError, FormatError
from analex.kv import read_kv, write_kv

REPORT_VERSION = 1

# Seed derivation for the sampled protocol: set i draws with this
# generator seeded seed+i. Fixed so external reimplementations can mirror
# the sampling exactly; recorded in every sampled report.
SAMPLER_RNG = "python-random-mt19937 seed+i"


def _token(label: Any) -> str:
    if isinstance(label, Enum):
        return str(label.value)
    return str(label)


def _canonical_labels(values: Sequence[Any]) -> list[Any]:
    """Distinct labels in canonical order: enum declaration order when the
    labels are enum members, string order otherwise."""
    distinct = set(values)
    first = next(iter(distinct))
    if isinstance(first, Enum):
        return [member for member in type(first) if member in distinct]
    return sorted(distinct, key=str)


@dataclass(frozen=True)
class EvalReport:
    n: int
    correct: int
    accuracy: float
    confusion: dict[tuple[str, str], int]  # (gold, predicted) -> count

    def __post_init__(self):
        assert self.n >= 1
        assert sum(self.confusion.values()) == self.n


@dataclass(frozen=True)
class SampledEvalReport:
    m: int
    size: int
    seed: int
    per_set: tuple[float, ...]
    mean: float
    std: float
    rng: str = SAMPLER_RNG


def accuracy(pairs: Sequence[tuple[Any, Any]]) -> EvalReport:
    """Exact accuracy and confusion counts over (predicted, gold) pairs."""
    if not pairs:
        raise DataError("cannot evaluate an empty prediction list")
    labels = _canonical_labels([g for _, g in pairs] + [p for p, _ in pairs])
    confusion = {(_token(g), _token(p)): 0 for g in labels for p in labels}
    correct = 0
    for predicted, gold in pairs:
        confusion[(_token(gold), _token(predicted))] += 1
        if predicted == gold:
            correct += 1
    return EvalReport(
        n=len(pairs), correct=correct, accuracy=correct / len(pairs), confusion=confusion
    )


def majority_baseline(golds: Sequence[Any]) -> EvalReport:
    """Accuracy of constantly predicting the most frequent gold label.

    Ties go to the first label in canonical order, which makes the
    baseline exactly 0.5 on balanced input.
    """
    if not golds:
        raise DataError("cannot compute a baseline over an empty gold list")
    labels = _canonical_labels(golds)
    counts = {label: 0 for label in labels}
    for gold in golds:
        counts[gold] += 1
    majority = max(labels, key=lambda label: (counts[label], -labels.index(label)))
    return accuracy([(majority, gold) for gold in golds])


def sample_indices(n: int, size: int, seed: int, set_index: int) -> list[int]:
    """Without-replacement index sample for one evaluation set.

    Set i uses the named generator seeded with seed+i; see SAMPLER_RNG.
    """
    return random.Random(seed + set_index).sample(range(n), size)


def sampled_accuracy(
    pairs: Sequence[tuple[Any, Any]], m: int = 5, size: int = 100, seed: int = 0
) -> SampledEvalReport:
    """m seeded without-replacement subsets of the predictions, each of the
    given size; reports per-set accuracies with their mean and population
    standard deviation (mean = sum/m, std = sqrt(sum((a-mean)^2)/m)).
    """
    if not pairs:
        raise DataError("cannot evaluate an empty prediction list")
    if size > len(pairs):
        raise DataError(f"sample size {size} exceeds prediction count {len(pairs)}")
    if m < 1:
        raise DataError(f"need at least one set, got m={m}")
    per_set = []
    for i in range(m):
        chosen = sample_indices(len(pairs), size, seed, i)
        correct = sum(1 for idx in chosen if pairs[idx][0] == pairs[idx][1])
        per_set.append(correct / size)
    mean = sum(per_set) / m
    std = math.sqrt(sum((a - mean) ** 2 for a in per_set) / m)
    return SampledEvalReport(m=m, size=size, seed=seed, per_set=tuple(per_set), mean=mean, std=std)


def save_report(report: EvalReport | SampledEvalReport, path: str | Path) -> None:
    items: dict[str, object] = {"report_version": REPORT_VERSION}
    if isinstance(report, EvalReport):
        items["kind"] = "eval"
        items["n"] = report.n
        items["correct"] = report.correct
        items["accuracy"] = repr(report.accuracy)
        for (gold, predicted), count in sorted(report.confusion.items()):
            items[f"confusion {gold} {predicted}"] = count
    else:
        items["kind"] = "sampled"
        items["m"] = report.m
        items["size"] = report.size
        items["seed"] = report.seed
        items["rng"] = report.rng
        for i, value in enumerate(report.per_set):
            items[f"set_{i}_accuracy"] = repr(value)
        items["mean"] = repr(report.mean)
        items["std"] = repr(report.std)
    write_kv(path, items)


def load_report(path: str | Path) -> EvalReport | SampledEvalReport:
    items = read_kv(path)
    try:
        if int(items["report_version"]) != REPORT_VERSION:
            raise FormatError("unsupported report version", path=str(path))
        if items["kind"] == "eval":
            confusion = {}
            for key, value in items.items():
                if key.startswith("confusion "):
                    _, gold, predicted = key.split(" ")
                    confusion[(gold, predicted)] = int(value)
            return EvalReport(
                n=int(items["n"]),
                correct=int(items["correct"]),
                accuracy=float(items["accuracy"]),
                confusion=confusion,
            )
        if items["kind"] == "sampled":
            m = int(items["m"])
            return SampledEvalReport(
                m=m,
                size=int(items["size"]),
                seed=int(items["seed"]),
                rng=items["rng"],
                per_set=tuple(float(items[f"set_{i}_accuracy"]) for i in range(m)),
                mean=float(items["mean"]),
                std=float(items["std"]),
            )
        raise FormatError(f"unknown report kind {items['kind']!r}", path=str(path))
    except (KeyError, ValueError) as exc:
        raise FormatError(f"malformed report: {exc}", path=str(path)) from None
