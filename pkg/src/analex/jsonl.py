"""Line-delimited JSON helpers used by every file format in the package."""

from __future__ import annotations

import json
from collections.abc import Iterable, Iterator
from pathlib import Path
from typing import Any

from analex.errors import DataError, FormatError


def open_for_read(path: Path):
    try:
        return path.open("r", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}") from None


def read_records(path: str | Path) -> Iterator[tuple[int, dict[str, Any]]]:
    """Yield (line_number, record) for each non-blank line of a JSONL file.

    Line numbers are 1-based. Raises FormatError naming the line for
    anything that is not a JSON object.
    """
    path = Path(path)
    with open_for_read(path) as handle:
        for lineno, line in enumerate(handle, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            try:
                record = json.loads(stripped)
            except json.JSONDecodeError as exc:
                raise FormatError(f"invalid JSON ({exc.msg})", path=str(path), line=lineno) from exc
            if not isinstance(record, dict):
                raise FormatError("record is not an object", path=str(path), line=lineno)
            yield lineno, record


def write_records(path: str | Path, records: Iterable[dict[str, Any]]) -> int:
    """Write records one JSON object per line; returns the row count.

    Key order is preserved as given, so writers control the byte layout.
    """
    path = Path(path)
    count = 0
    try:
        handle = path.open("w", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc.strerror or exc}") from None
    with handle:
        for record in records:
            handle.write(json.dumps(record, ensure_ascii=False))
            handle.write("\n")
            count += 1
    return count


def require_fields(record: dict[str, Any], fields: Iterable[str], *, path: str | None = None,
                   line: int | None = None) -> None:
    """Raise FormatError naming the first missing field, if any."""
    for field in fields:
        if field not in record:
            raise FormatError(f"missing field {field!r}", path=path, line=line)
