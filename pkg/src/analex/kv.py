"""Flat key-value text files ("key = value" per line) used for reports and
threshold models."""

from __future__ import annotations

from pathlib import Path

from analex.errors import DataError, FormatError


def write_kv(path: str | Path, items: dict[str, object]) -> None:
    path = Path(path)
    try:
        handle = path.open("w", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc.strerror or exc}") from None
    with handle:
        for key, value in items.items():
            handle.write(f"{key} = {value}\n")


def read_kv(path: str | Path) -> dict[str, str]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}") from None
    items: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        key, sep, value = line.partition(" = ")
        key = key.strip()
        if not sep or not key:
            raise FormatError("expected 'key = value'", path=str(path), line=lineno)
        if key in items:
            raise FormatError(f"duplicate key {key!r}", path=str(path), line=lineno)
        items[key] = value
    return items
