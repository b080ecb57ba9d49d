"""Reader for the corpus file format this exporter consumes.

One JSON object per line; statute records must appear before any case
that references them. This is a deliberately independent implementation
of the format so the exporter has no code dependency on its consumer.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from embed_export.errors import DataError

_STATUTE_FIELDS = ("id", "section_label", "text")
_CASE_FIELDS = ("id", "statute_id", "context", "hypothesis", "gold", "split")


@dataclass(frozen=True)
class Statute:
    id: str
    section_label: str
    text: str


@dataclass(frozen=True)
class CaseRecord:
    id: str
    statute_id: str
    context: str
    hypothesis: str
    gold: str
    split: str


@dataclass
class CorpusView:
    """Just enough corpus to enumerate texts: no label semantics."""

    statutes: dict[str, Statute]
    cases: dict[str, CaseRecord]


def _require(record: dict, fields: tuple[str, ...], path: Path, lineno: int) -> None:
    for name in fields:
        if name not in record:
            raise DataError(f"{path}:{lineno}: record is missing field {name!r}")


def read_corpus(path: str | Path) -> CorpusView:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    statutes: dict[str, Statute] = {}
    cases: dict[str, CaseRecord] = {}
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except ValueError:
            raise DataError(f"{path}:{lineno}: not valid JSON") from None
        if not isinstance(record, dict):
            raise DataError(f"{path}:{lineno}: record is not an object")
        kind = record.get("kind")
        if kind == "statute":
            _require(record, _STATUTE_FIELDS, path, lineno)
            sid = str(record["id"])
            if sid in statutes:
                raise DataError(f"{path}:{lineno}: duplicate statute id {sid!r}")
            statutes[sid] = Statute(
                id=sid,
                section_label=str(record["section_label"]),
                text=str(record["text"]),
            )
        elif kind == "case":
            _require(record, _CASE_FIELDS, path, lineno)
            cid = str(record["id"])
            if cid in cases:
                raise DataError(f"{path}:{lineno}: duplicate case id {cid!r}")
            sid = str(record["statute_id"])
            if sid not in statutes:
                raise DataError(
                    f"{path}:{lineno}: case {cid!r} references unknown statute {sid!r}"
                )
            cases[cid] = CaseRecord(
                id=cid,
                statute_id=sid,
                context=str(record["context"]),
                hypothesis=str(record["hypothesis"]),
                gold=str(record["gold"]),
                split=str(record["split"]),
            )
        else:
            raise DataError(f"{path}:{lineno}: unknown record kind {kind!r}")
    if not statutes:
        raise DataError(f"{path}: corpus has no statute records")
    return CorpusView(statutes=statutes, cases=cases)
