"""Canonical in-memory corpus model: statutes, cases, and named splits.

The canonical on-disk format is line-delimited JSON (one record per line,
statutes before the cases that reference them). A one-way converter from a
SARA-style file tree is provided for bootstrapping; hand-written corpora
can set every field directly.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from analex import jsonl
from analex.errors import DataError, FormatError, UsageError

SPLIT_NAMES = ("train", "dev", "test")

# Record ids compose into pair keys "<statute>:<case>" and quadruple ids
# "<pair>::<pair>", so the separator is reserved.
_RESERVED_ID_CHARS = ":"


class EntailmentLabel(Enum):
    ENTAILMENT = "entailment"
    CONTRADICTION = "contradiction"

    @classmethod
    def from_token(cls, token: str) -> "EntailmentLabel":
        for label in cls:
            if label.value == token:
                return label
        raise ValueError(f"unknown entailment label {token!r}")

    def opposite(self) -> "EntailmentLabel":
        if self is EntailmentLabel.ENTAILMENT:
            return EntailmentLabel.CONTRADICTION
        return EntailmentLabel.ENTAILMENT


@dataclass(frozen=True)
class Statute:
    id: str
    section_label: str
    text: str


@dataclass(frozen=True)
class Case:
    id: str
    statute_id: str
    context: str
    hypothesis: str
    gold: EntailmentLabel


@dataclass
class Corpus:
    """Immutable after construction; safe for concurrent reads."""

    statutes: dict[str, Statute] = field(default_factory=dict)
    cases: dict[str, Case] = field(default_factory=dict)
    splits: dict[str, list[str]] = field(default_factory=lambda: {name: [] for name in SPLIT_NAMES})

    def statute(self, statute_id: str) -> Statute:
        try:
            return self.statutes[statute_id]
        except KeyError:
            raise DataError(f"unknown statute id {statute_id!r}") from None

    def case(self, case_id: str) -> Case:
        try:
            return self.cases[case_id]
        except KeyError:
            raise DataError(f"unknown case id {case_id!r}") from None

    def split_cases(self, split: str) -> list[Case]:
        if split not in self.splits:
            raise UsageError(f"unknown split {split!r}; expected one of {SPLIT_NAMES}")
        return [self.case(cid) for cid in self.splits[split]]

    def split_of(self, case_id: str) -> str:
        for name, ids in self.splits.items():
            if case_id in ids:
                return name
        raise DataError(f"case {case_id!r} is not assigned to any split")


def _check_id(value: str, *, path: str | None, line: int | None) -> str:
    if not value:
        raise FormatError("empty id", path=path, line=line)
    if any(ch in value for ch in _RESERVED_ID_CHARS):
        raise FormatError(f"id {value!r} contains reserved character ':'", path=path, line=line)
    return value


def parse_corpus(path: str | Path) -> Corpus:
    """Parse and validate the canonical corpus file.

    Deterministic; record order is preserved in the statute/case maps and
    in the per-split case lists. Raises FormatError naming the offending
    line for malformed records, duplicate ids, dangling statute
    references, and unknown label or split tokens.
    """
    path = Path(path)
    corpus = Corpus()
    for lineno, record in jsonl.read_records(path):
        kind = record.get("kind")
        if kind == "statute":
            jsonl.require_fields(record, ("id", "text"), path=str(path), line=lineno)
            sid = _check_id(str(record["id"]), path=str(path), line=lineno)
            if sid in corpus.statutes:
                raise FormatError(f"duplicate statute id {sid!r}", path=str(path), line=lineno)
            text = str(record["text"])
            if not text:
                raise FormatError(f"statute {sid!r} has empty text", path=str(path), line=lineno)
            section_label = str(record.get("section_label", sid))
            corpus.statutes[sid] = Statute(id=sid, section_label=section_label, text=text)
        elif kind == "case":
            jsonl.require_fields(
                record, ("id", "statute_id", "hypothesis", "gold", "split"),
                path=str(path), line=lineno,
            )
            cid = _check_id(str(record["id"]), path=str(path), line=lineno)
            if cid in corpus.cases:
                raise FormatError(f"duplicate case id {cid!r}", path=str(path), line=lineno)
            statute_id = str(record["statute_id"])
            if statute_id not in corpus.statutes:
                raise FormatError(
                    f"case {cid!r} references unknown statute {statute_id!r} "
                    "(statutes must precede cases)",
                    path=str(path), line=lineno,
                )
            try:
                gold = EntailmentLabel.from_token(str(record["gold"]))
            except ValueError as exc:
                raise FormatError(f"case {cid!r}: {exc}", path=str(path), line=lineno) from None
            split = str(record["split"])
            if split not in SPLIT_NAMES:
                raise FormatError(
                    f"case {cid!r} has unknown split {split!r}", path=str(path), line=lineno
                )
            corpus.cases[cid] = Case(
                id=cid,
                statute_id=statute_id,
                context=str(record.get("context", "")),
                hypothesis=str(record["hypothesis"]),
                gold=gold,
            )
            corpus.splits[split].append(cid)
        else:
            raise FormatError(f"unknown record kind {kind!r}", path=str(path), line=lineno)

    violations = validate(corpus)
    if violations:
        raise FormatError("; ".join(violations), path=str(path))
    return corpus


def serialize_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write the canonical file: statutes in map order, then cases.

    parse_corpus(serialize_corpus(c)) reproduces c, and re-serializing a
    parsed file is byte-identical.
    """
    def records():
        for statute in corpus.statutes.values():
            yield {
                "kind": "statute",
                "id": statute.id,
                "section_label": statute.section_label,
                "text": statute.text,
            }
        for case in corpus.cases.values():
            yield {
                "kind": "case",
                "id": case.id,
                "statute_id": case.statute_id,
                "context": case.context,
                "hypothesis": case.hypothesis,
                "gold": case.gold.value,
                "split": corpus.split_of(case.id),
            }

    jsonl.write_records(path, records())


def validate(corpus: Corpus) -> list[str]:
    """Return invariant violations as strings; empty iff the corpus is valid.

    Violations are data, not failures: hand-built corpora may be checked
    without raising.
    """
    violations: list[str] = []
    for statute in corpus.statutes.values():
        if not statute.text:
            violations.append(f"statute {statute.id!r}: empty text")
    for case in corpus.cases.values():
        if not case.hypothesis:
            violations.append(f"case {case.id!r}: empty hypothesis")
        if case.statute_id not in corpus.statutes:
            violations.append(f"case {case.id!r}: unknown statute {case.statute_id!r}")

    seen: dict[str, str] = {}
    for name, ids in corpus.splits.items():
        if name not in SPLIT_NAMES:
            violations.append(f"split {name!r}: unknown split name")
        in_this_split: set[str] = set()
        for cid in ids:
            if cid not in corpus.cases:
                violations.append(f"split {name!r}: unknown case {cid!r}")
            if cid in in_this_split:
                violations.append(f"split {name!r}: duplicate case {cid!r}")
            in_this_split.add(cid)
            if cid in seen and seen[cid] != name:
                violations.append(f"case {cid!r}: present in splits {seen[cid]!r} and {name!r}")
            seen.setdefault(cid, name)
    return violations


def resplit_test_to_dev(corpus: Corpus, n: int, seed: int) -> Corpus:
    """Move n seeded-random test cases to the dev split; returns a new Corpus.

    Sampling is without replacement and a pure function of (corpus, n,
    seed); the input corpus is untouched. Moved cases keep their original
    test-split order when appended to dev.
    """
    if n < 0:
        raise UsageError(f"cannot move a negative number of cases ({n})")
    test_ids = corpus.splits["test"]
    if n > len(test_ids):
        raise UsageError(f"cannot move {n} cases out of a test split of {len(test_ids)}")
    moved = set(random.Random(seed).sample(test_ids, n))
    new_splits = {
        "train": list(corpus.splits["train"]),
        "dev": list(corpus.splits["dev"]) + [cid for cid in test_ids if cid in moved],
        "test": [cid for cid in test_ids if cid not in moved],
    }
    return Corpus(statutes=dict(corpus.statutes), cases=dict(corpus.cases), splits=new_splits)


_SENTENCE_BOUNDARY = re.compile(r"(?<=[.?!])\s+")


def split_final_sentence(text: str) -> tuple[str, str]:
    """Split case text into (context, final sentence).

    The final sentence is the hypothesis; everything before it is the
    context, which may be empty for single-sentence texts.
    """
    stripped = text.strip()
    parts = [p for p in _SENTENCE_BOUNDARY.split(stripped) if p]
    if len(parts) <= 1:
        return "", stripped
    hypothesis = parts[-1]
    context = stripped[: len(stripped) - len(hypothesis)].strip()
    return context, hypothesis


def convert_sara_tree(root: str | Path) -> Corpus:
    """One-way converter from a SARA-style file tree to the canonical model.

    Expected layout under root:
      statutes/<id>.txt          statute text, id taken from the filename
      cases/<id>.txt             header lines "Statute:", "Answer:" and
                                 optionally "Question:", then a "Text:"
                                 section running to end of file
      splits/train.txt|dev.txt|test.txt   one case id per line (dev optional)

    When a case file has a "Question:" line it becomes the hypothesis and
    the text is the context verbatim; otherwise the hypothesis is the
    final sentence of the text and the context is everything before it.
    """
    root = Path(root)
    corpus = Corpus()

    statute_dir = root / "statutes"
    if not statute_dir.is_dir():
        raise FormatError(f"missing statutes directory under {root}")
    for statute_path in sorted(statute_dir.glob("*.txt")):
        sid = _check_id(statute_path.stem, path=str(statute_path), line=None)
        text = statute_path.read_text(encoding="utf-8").strip()
        if not text:
            raise FormatError("statute file is empty", path=str(statute_path))
        corpus.statutes[sid] = Statute(id=sid, section_label=sid, text=text)

    case_dir = root / "cases"
    if not case_dir.is_dir():
        raise FormatError(f"missing cases directory under {root}")
    parsed_cases: dict[str, Case] = {}
    for case_path in sorted(case_dir.glob("*.txt")):
        cid = _check_id(case_path.stem, path=str(case_path), line=None)
        parsed_cases[cid] = _parse_sara_case(case_path, cid, corpus)

    split_dir = root / "splits"
    if not split_dir.is_dir():
        raise FormatError(f"missing splits directory under {root}")
    for name in SPLIT_NAMES:
        split_path = split_dir / f"{name}.txt"
        if not split_path.exists():
            if name == "dev":
                continue
            raise FormatError(f"missing split file {split_path}")
        for lineno, line in enumerate(split_path.read_text(encoding="utf-8").splitlines(), 1):
            cid = line.strip()
            if not cid:
                continue
            if cid not in parsed_cases:
                raise FormatError(f"unknown case id {cid!r}", path=str(split_path), line=lineno)
            corpus.cases[cid] = parsed_cases[cid]
            corpus.splits[name].append(cid)

    violations = validate(corpus)
    if violations:
        raise FormatError("; ".join(violations), path=str(root))
    return corpus


def _parse_sara_case(path: Path, cid: str, corpus: Corpus) -> Case:
    statute_id: str | None = None
    answer: str | None = None
    question: str | None = None
    text_lines: list[str] = []
    in_text = False
    for raw in path.read_text(encoding="utf-8").splitlines():
        if in_text:
            text_lines.append(raw)
            continue
        line = raw.strip()
        if line.startswith("Statute:"):
            statute_id = line[len("Statute:"):].strip()
        elif line.startswith("Answer:"):
            answer = line[len("Answer:"):].strip()
        elif line.startswith("Question:"):
            question = line[len("Question:"):].strip()
        elif line.startswith("Text:"):
            text_lines.append(line[len("Text:"):].strip())
            in_text = True
        elif line:
            raise FormatError(f"unrecognized header line {line!r}", path=str(path))
    if statute_id is None:
        raise FormatError("missing Statute: header", path=str(path))
    if statute_id not in corpus.statutes:
        raise FormatError(f"unknown statute {statute_id!r}", path=str(path))
    if answer is None:
        raise FormatError("missing Answer: header", path=str(path))
    try:
        gold = EntailmentLabel.from_token(answer)
    except ValueError as exc:
        raise FormatError(str(exc), path=str(path)) from None
    text = "\n".join(text_lines).strip()
    if question is not None:
        context, hypothesis = text, question
    else:
        if not text:
            raise FormatError("missing Text: section", path=str(path))
        context, hypothesis = split_final_sentence(text)
    if not hypothesis:
        raise FormatError("empty hypothesis", path=str(path))
    return Case(id=cid, statute_id=statute_id, context=context, hypothesis=hypothesis, gold=gold)
