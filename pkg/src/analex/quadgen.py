"""Compile corpus splits into labeled analogy quadruples.

Every unordered pair of distinct statute-case pairs within a split
becomes one quadruple, labeled Analogy when the two cases carry the same
entailment label. A split of N cases therefore yields C(N,2) quadruples
unless same-statute exclusion is switched on.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations
from pathlib import Path

from analex import jsonl
from analex.corpus import Case, Corpus, EntailmentLabel
from analex.errors import FormatError, UsageError


class AnalogyLabel(Enum):
    ANALOGY = 1
    NOT_ANALOGY = 0

    @classmethod
    def from_int(cls, value: int) -> "AnalogyLabel":
        if value == 1:
            return cls.ANALOGY
        if value == 0:
            return cls.NOT_ANALOGY
        raise ValueError(f"unknown analogy label {value!r}; expected 0 or 1")

    def to_int(self) -> int:
        return self.value

    def opposite(self) -> "AnalogyLabel":
        return AnalogyLabel.NOT_ANALOGY if self is AnalogyLabel.ANALOGY else AnalogyLabel.ANALOGY


@dataclass(frozen=True)
class PairRef:
    """One statute-case pair; ordering is lexicographic on the serialized
    key, so sorted output matches what external tools see in the files."""

    statute_id: str
    case_id: str

    @property
    def key(self) -> str:
        return f"{self.statute_id}:{self.case_id}"

    def __lt__(self, other: "PairRef") -> bool:
        return self.key < other.key

    @classmethod
    def from_key(cls, key: str) -> "PairRef":
        statute_id, sep, case_id = key.partition(":")
        if not sep or not statute_id or not case_id:
            raise FormatError(f"malformed pair key {key!r}")
        return cls(statute_id=statute_id, case_id=case_id)

    @classmethod
    def for_case(cls, case: Case) -> "PairRef":
        return cls(statute_id=case.statute_id, case_id=case.id)


@dataclass(frozen=True)
class Quadruple:
    """Two statute-case pairs plus an optional analogy label.

    Generated datasets keep first < second under the canonical pair
    ordering; pipeline-built quadruples instead put the query pair first,
    so ordering is a dataset guarantee rather than a type constraint.
    """

    first: PairRef
    second: PairRef
    label: AnalogyLabel | None = None

    @property
    def quad_id(self) -> str:
        return f"{self.first.key}::{self.second.key}"

    @classmethod
    def parse_quad_id(cls, quad_id: str) -> tuple[PairRef, PairRef]:
        left, sep, right = quad_id.partition("::")
        if not sep:
            raise FormatError(f"malformed quadruple id {quad_id!r}")
        return PairRef.from_key(left), PairRef.from_key(right)

    def swapped(self) -> "Quadruple":
        return Quadruple(first=self.second, second=self.first, label=self.label)


@dataclass
class QuadDataset:
    split: str
    quadruples: list[Quadruple]
    options: dict = field(default_factory=dict)


def label_quadruple(a: EntailmentLabel, b: EntailmentLabel) -> AnalogyLabel:
    """Analogy iff the two pairs share the same entailment label; symmetric."""
    return AnalogyLabel.ANALOGY if a == b else AnalogyLabel.NOT_ANALOGY


def pair_gold(pair: PairRef, corpus: Corpus) -> EntailmentLabel:
    """A pair's gold label is its case's gold label."""
    return corpus.case(pair.case_id).gold


def generate(corpus: Corpus, split: str, *, exclude_same_statute: bool = False) -> QuadDataset:
    """Emit all unordered pairs of distinct statute-case pairs in a split.

    Pairs are canonically sorted, so output order is deterministic and
    first < second holds for every quadruple. With exclude_same_statute,
    quadruples whose two pairs reference the same statute are dropped.
    """
    cases = corpus.split_cases(split)
    if not cases:
        raise UsageError(f"split {split!r} is empty")
    pairs = sorted(PairRef.for_case(case) for case in cases)
    quadruples = []
    for first, second in combinations(pairs, 2):
        if exclude_same_statute and first.statute_id == second.statute_id:
            continue
        label = label_quadruple(pair_gold(first, corpus), pair_gold(second, corpus))
        quadruples.append(Quadruple(first=first, second=second, label=label))
    return QuadDataset(
        split=split,
        quadruples=quadruples,
        options={"exclude_same_statute": exclude_same_statute},
    )


def stats(dataset: QuadDataset) -> dict[str, int]:
    positives = sum(1 for q in dataset.quadruples if q.label is AnalogyLabel.ANALOGY)
    same_statute = sum(
        1 for q in dataset.quadruples if q.first.statute_id == q.second.statute_id
    )
    total = len(dataset.quadruples)
    return {
        "total": total,
        "positives": positives,
        "negatives": total - positives,
        "same_statute_count": same_statute,
    }


def write_dataset(dataset: QuadDataset, path: str | Path) -> int:
    """Write the id-level dataset file; byte-identical across reruns."""
    def records():
        for quad in dataset.quadruples:
            if quad.label is None:
                raise UsageError(f"quadruple {quad.quad_id} has no label to serialize")
            yield {
                "quad_id": quad.quad_id,
                "s1": quad.first.statute_id,
                "c1": quad.first.case_id,
                "s2": quad.second.statute_id,
                "c2": quad.second.case_id,
                "label": quad.label.to_int(),
            }

    return jsonl.write_records(path, records())


def read_dataset(path: str | Path, split: str = "") -> QuadDataset:
    """Read a dataset file back; rejects duplicate or inconsistent ids."""
    path = Path(path)
    quadruples: list[Quadruple] = []
    seen: set[str] = set()
    for lineno, record in jsonl.read_records(path):
        jsonl.require_fields(
            record, ("quad_id", "s1", "c1", "s2", "c2", "label"), path=str(path), line=lineno
        )
        first = PairRef(statute_id=str(record["s1"]), case_id=str(record["c1"]))
        second = PairRef(statute_id=str(record["s2"]), case_id=str(record["c2"]))
        try:
            label = AnalogyLabel.from_int(record["label"])
        except ValueError as exc:
            raise FormatError(str(exc), path=str(path), line=lineno) from None
        quad = Quadruple(first=first, second=second, label=label)
        if quad.quad_id != record["quad_id"]:
            raise FormatError(
                f"quad_id {record['quad_id']!r} does not match pair ids",
                path=str(path), line=lineno,
            )
        if quad.quad_id in seen:
            raise FormatError(f"duplicate quad_id {quad.quad_id!r}", path=str(path), line=lineno)
        seen.add(quad.quad_id)
        quadruples.append(quad)
    return QuadDataset(split=split, quadruples=quadruples)


def full_case_text(case: Case) -> str:
    """Context and hypothesis joined by one space; hypothesis alone if the
    context is empty."""
    if not case.context:
        return case.hypothesis
    return f"{case.context} {case.hypothesis}"


def write_expanded(dataset: QuadDataset, corpus: Corpus, path: str | Path) -> int:
    """Companion file inlining full texts: statute 1, case 1, statute 2,
    case 2, label."""
    def records():
        for quad in dataset.quadruples:
            if quad.label is None:
                raise UsageError(f"quadruple {quad.quad_id} has no label to serialize")
            yield {
                "quad_id": quad.quad_id,
                "statute1": corpus.statute(quad.first.statute_id).text,
                "case1": full_case_text(corpus.case(quad.first.case_id)),
                "statute2": corpus.statute(quad.second.statute_id).text,
                "case2": full_case_text(corpus.case(quad.second.case_id)),
                "label": quad.label.to_int(),
            }

    return jsonl.write_records(path, records())
