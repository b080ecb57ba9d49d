"""Fixed-dimension embedding store plus the vector arithmetic on top of it.

The store is encoder-agnostic: keys name precomputed text views
("statute:<sid>", "case:<cid>:h|ch|sch", "pair:<sid>:<cid>:concat") so this
component never runs an encoder. Vector components serialize with 9
significant digits, which round-trips 32-bit encoder outputs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from analex import jsonl
from analex.corpus import Corpus
from analex.errors import (
    DataError,
    DimMismatchError,
    FormatError,
    KeySchemeError,
    MissingKeyError,
    ZeroNormError,
)

FORMAT_VERSION = 1
CASE_VIEW_SCHEMES = ("h", "ch", "sch")


def statute_key(statute_id: str) -> str:
    return f"statute:{statute_id}"


def case_key(case_id: str, scheme: str) -> str:
    if scheme not in CASE_VIEW_SCHEMES:
        raise KeySchemeError(f"unknown case view scheme {scheme!r}; expected one of {CASE_VIEW_SCHEMES}")
    return f"case:{case_id}:{scheme}"


def pair_concat_key(statute_id: str, case_id: str) -> str:
    return f"pair:{statute_id}:{case_id}:concat"


def parse_key(key: str) -> tuple[str, ...]:
    """Validate a key against the five schemes; returns its segments.

    Raises KeySchemeError for anything else.
    """
    parts = key.split(":")
    if parts[0] == "statute" and len(parts) == 2 and parts[1]:
        return tuple(parts)
    if parts[0] == "case" and len(parts) == 3 and parts[1] and parts[2] in CASE_VIEW_SCHEMES:
        return tuple(parts)
    if parts[0] == "pair" and len(parts) == 4 and parts[1] and parts[2] and parts[3] == "concat":
        return tuple(parts)
    raise KeySchemeError(f"key {key!r} does not match any known scheme")


@dataclass
class EmbeddingStore:
    """Immutable after load; vectors are read-only float64 arrays."""

    dim: int
    encoder_name: str = ""
    entries: dict[str, np.ndarray] = field(default_factory=dict)

    def __contains__(self, key: str) -> bool:
        return key in self.entries

    def __len__(self) -> int:
        return len(self.entries)


def _as_vector(values, dim: int, *, key: str, path: str | None = None,
               line: int | None = None) -> np.ndarray:
    if not isinstance(values, list) or len(values) != dim:
        got = len(values) if isinstance(values, list) else "non-array"
        raise DimMismatchError(
            f"key {key!r}: vector length {got} does not match dim {dim}"
            + (f" ({path}:{line})" if path else "")
        )
    try:
        floats = [float(v) for v in values]
    except (TypeError, ValueError):
        raise FormatError(f"key {key!r}: non-numeric component", path=path, line=line) from None
    if not all(math.isfinite(v) for v in floats):
        raise DataError(f"key {key!r}: non-finite component" + (f" ({path}:{line})" if path else ""))
    vector = np.asarray(floats, dtype=np.float64)
    vector.setflags(write=False)
    return vector


def load_store(path: str | Path) -> EmbeddingStore:
    """Load and validate a store file.

    The first line is a header {format_version, dim, encoder_name}; each
    following line is {key, vector}. Rejects dim mismatches, non-finite
    components, duplicate keys, unknown key schemes, and a malformed
    header, naming the offending key or line.
    """
    path = Path(path)
    records = jsonl.read_records(path)
    try:
        lineno, header = next(records)
    except StopIteration:
        raise FormatError("empty store file (missing header)", path=str(path)) from None
    if header.get("format_version") != FORMAT_VERSION:
        raise FormatError(
            f"malformed header: format_version must be {FORMAT_VERSION}",
            path=str(path), line=lineno,
        )
    dim = header.get("dim")
    if not isinstance(dim, int) or dim < 1:
        raise FormatError("malformed header: dim must be a positive integer",
                          path=str(path), line=lineno)
    encoder_name = header.get("encoder_name")
    if not isinstance(encoder_name, str):
        raise FormatError("malformed header: encoder_name must be a string",
                          path=str(path), line=lineno)

    store = EmbeddingStore(dim=dim, encoder_name=encoder_name)
    for lineno, record in records:
        jsonl.require_fields(record, ("key", "vector"), path=str(path), line=lineno)
        key = str(record["key"])
        parse_key(key)
        if key in store.entries:
            raise FormatError(f"duplicate key {key!r}", path=str(path), line=lineno)
        store.entries[key] = _as_vector(
            record["vector"], dim, key=key, path=str(path), line=lineno
        )
    return store


def format_component(value: float) -> str:
    """Canonical decimal rendering: 9 significant digits."""
    return format(float(value), ".9g")


def save_store(store: EmbeddingStore, path: str | Path) -> None:
    """Write the canonical store file; save(load(f)) is byte-identical for
    canonically formatted f."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as handle:
        header = {
            "format_version": FORMAT_VERSION,
            "dim": store.dim,
            "encoder_name": store.encoder_name,
        }
        handle.write(json.dumps(header, ensure_ascii=False))
        handle.write("\n")
        for key, vector in store.entries.items():
            components = ", ".join(format_component(v) for v in vector)
            handle.write(f'{{"key": {json.dumps(key, ensure_ascii=False)}, "vector": [{components}]}}\n')


def get(store: EmbeddingStore, key: str) -> np.ndarray:
    """Vector for key, or MissingKeyError naming the key and its scheme."""
    scheme = parse_key(key)[0]
    try:
        return store.entries[key]
    except KeyError:
        raise MissingKeyError(f"store has no entry for {scheme} key {key!r}") from None


def offset(s: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Componentwise difference s - c; the relation vector of one pair."""
    s = np.asarray(s, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    if s.shape != c.shape:
        raise DimMismatchError(f"offset operands have shapes {s.shape} and {c.shape}")
    return s - c


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity in [-1, 1], clamped against rounding.

    Zero-norm operands are a hard error: a zero offset means two texts
    embedded identically, which the caller must handle explicitly.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DimMismatchError(f"cosine operands have shapes {u.shape} and {v.shape}")
    norm_u = float(np.linalg.norm(u))
    norm_v = float(np.linalg.norm(v))
    if norm_u == 0.0 or norm_v == 0.0:
        raise ZeroNormError("cosine of a zero-norm vector is undefined")
    value = float(np.dot(u, v)) / (norm_u * norm_v)
    return max(-1.0, min(1.0, value))


def cross_check(store: EmbeddingStore, corpus: Corpus) -> list[str]:
    """Findings for store keys whose referenced ids do not resolve in the
    corpus; empty iff all keys resolve."""
    findings: list[str] = []
    for key in store.entries:
        parts = parse_key(key)
        if parts[0] == "statute":
            if parts[1] not in corpus.statutes:
                findings.append(f"key {key!r}: unknown statute {parts[1]!r}")
        elif parts[0] == "case":
            if parts[1] not in corpus.cases:
                findings.append(f"key {key!r}: unknown case {parts[1]!r}")
        else:
            if parts[1] not in corpus.statutes:
                findings.append(f"key {key!r}: unknown statute {parts[1]!r}")
            if parts[2] not in corpus.cases:
                findings.append(f"key {key!r}: unknown case {parts[2]!r}")
    return findings
