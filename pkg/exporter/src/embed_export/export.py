"""Export and verify embedding store files for a corpus.

One row per (entity, scheme) pair, rows in canonical key order, vector
components rendered with 9 significant digits. A manifest records the
encoder, per-scheme row counts, the frozen concatenation separator, and
a checksum of the store bytes, so identical inputs are provably
identical outputs.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from embed_export.corpusfile import CorpusView, read_corpus
from embed_export.encoders import get_encoder
from embed_export.errors import DataError, EncoderError, UsageError

FORMAT_VERSION = 1
SCHEMES = ("statute", "h", "ch", "sch", "concat")
CONCAT_SEPARATOR = " "


def case_text(context: str, hypothesis: str) -> str:
    # hypothesis alone when there is no context, never a leading space
    if not context:
        return hypothesis
    return f"{context}{CONCAT_SEPARATOR}{hypothesis}"


def view_text(statute_text: str, context: str, hypothesis: str, scheme: str) -> str:
    """Text for one case view: selected parts joined by newlines, empty
    parts dropped."""
    if scheme == "h":
        parts = [hypothesis]
    elif scheme == "ch":
        parts = [context, hypothesis]
    elif scheme == "sch":
        parts = [statute_text, context, hypothesis]
    else:
        raise UsageError(f"unknown case view scheme {scheme!r}")
    return "\n".join(p for p in parts if p)


@dataclass(frozen=True)
class ExportJob:
    corpus_path: str
    out_path: str
    encoder_id: str = "hash"
    schemes: tuple[str, ...] = SCHEMES
    batch_size: int = 32
    device: str | None = None

    def __post_init__(self):
        if not self.schemes:
            raise UsageError("at least one key scheme must be selected")
        for scheme in self.schemes:
            if scheme not in SCHEMES:
                raise UsageError(
                    f"unknown scheme {scheme!r}; expected a subset of {', '.join(SCHEMES)}"
                )
        if self.batch_size < 1:
            raise UsageError(f"batch size must be positive, got {self.batch_size}")


def required_entries(corpus: CorpusView, schemes: tuple[str, ...]) -> list[tuple[str, str, str]]:
    """(key, scheme, text) for everything the selected schemes demand,
    sorted by key so batch order and output order are canonical."""
    entries: list[tuple[str, str, str]] = []
    if "statute" in schemes:
        for statute in corpus.statutes.values():
            entries.append((f"statute:{statute.id}", "statute", statute.text))
    for case in corpus.cases.values():
        statute = corpus.statutes[case.statute_id]
        for scheme in ("h", "ch", "sch"):
            if scheme in schemes:
                entries.append((
                    f"case:{case.id}:{scheme}",
                    scheme,
                    view_text(statute.text, case.context, case.hypothesis, scheme),
                ))
        if "concat" in schemes:
            entries.append((
                f"pair:{case.statute_id}:{case.id}:concat",
                "concat",
                f"{statute.text}{CONCAT_SEPARATOR}{case_text(case.context, case.hypothesis)}",
            ))
    entries.sort(key=lambda entry: entry[0])
    return entries


def format_component(value: float) -> str:
    return format(float(value), ".9g")


@dataclass
class ExportResult:
    out_path: Path
    manifest_path: Path
    encoder_name: str
    dim: int
    rows_per_scheme: dict[str, int]
    checksum: str


def write_manifest(path: Path, pairs: dict[str, object]) -> None:
    lines = [f"{key} = {value}" for key, value in pairs.items()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def export(job: ExportJob) -> ExportResult:
    corpus = read_corpus(job.corpus_path)
    encoder = get_encoder(job.encoder_id, device=job.device)
    entries = required_entries(corpus, job.schemes)

    rows: list[tuple[str, list[float]]] = []
    rows_per_scheme = {scheme: 0 for scheme in job.schemes}
    for start in range(0, len(entries), job.batch_size):
        batch = entries[start:start + job.batch_size]
        vectors = encoder.encode_batch([text for _, _, text in batch])
        if len(vectors) != len(batch):
            raise EncoderError(
                f"encoder returned {len(vectors)} vectors for a batch of {len(batch)}"
            )
        for (key, scheme, _), vector in zip(batch, vectors):
            if len(vector) != encoder.dim:
                raise EncoderError(
                    f"dim drift across batches: key {key!r} got {len(vector)}, "
                    f"expected {encoder.dim}"
                )
            if not all(math.isfinite(v) for v in vector):
                raise EncoderError(f"encoder produced a non-finite component for key {key!r}")
            rows.append((key, vector))
            rows_per_scheme[scheme] += 1

    out_path = Path(job.out_path)
    header = {"format_version": FORMAT_VERSION, "dim": encoder.dim, "encoder_name": encoder.name}
    try:
        with out_path.open("w", encoding="utf-8") as handle:
            handle.write(json.dumps(header, ensure_ascii=False) + "\n")
            for key, vector in rows:
                components = ", ".join(format_component(v) for v in vector)
                handle.write(
                    f'{{"key": {json.dumps(key, ensure_ascii=False)}, "vector": [{components}]}}\n'
                )
    except OSError as exc:
        raise DataError(f"cannot write {out_path}: {exc}") from None

    checksum = hashlib.sha256(out_path.read_bytes()).hexdigest()
    manifest_path = out_path.with_name(out_path.name + ".manifest")
    manifest: dict[str, object] = {
        "store": out_path.name,
        "encoder_name": encoder.name,
        "dim": encoder.dim,
        "schemes": ",".join(job.schemes),
        "concat_separator": json.dumps(CONCAT_SEPARATOR),
    }
    for scheme in job.schemes:
        manifest[f"rows {scheme}"] = rows_per_scheme[scheme]
    manifest["rows_total"] = len(rows)
    manifest["checksum_sha256"] = checksum
    write_manifest(manifest_path, manifest)
    return ExportResult(
        out_path=out_path,
        manifest_path=manifest_path,
        encoder_name=encoder.name,
        dim=encoder.dim,
        rows_per_scheme=rows_per_scheme,
        checksum=checksum,
    )


@dataclass
class VerifyReport:
    findings: list[str] = field(default_factory=list)
    rows_checked: int = 0

    @property
    def ok(self) -> bool:
        return not self.findings


def _parse_store_key(key: str) -> tuple[str, ...] | None:
    parts = key.split(":")
    if parts[0] == "statute" and len(parts) == 2 and parts[1]:
        return tuple(parts)
    if parts[0] == "case" and len(parts) == 3 and parts[1] and parts[2] in ("h", "ch", "sch"):
        return tuple(parts)
    if parts[0] == "pair" and len(parts) == 4 and parts[1] and parts[2] and parts[3] == "concat":
        return tuple(parts)
    return None


def verify(store_path: str | Path, corpus_path: str | Path,
           schemes: tuple[str, ...] = SCHEMES) -> VerifyReport:
    """Check a store file against a corpus; problems become findings, not
    exceptions, so a report always comes back from readable inputs."""
    store_path = Path(store_path)
    corpus = read_corpus(corpus_path)
    try:
        lines = store_path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read {store_path}: {exc}") from None

    report = VerifyReport()
    dim: int | None = None
    if not lines:
        report.findings.append("row 1: missing header")
        lines = []
    else:
        try:
            header = json.loads(lines[0])
        except ValueError:
            header = None
        if (
            not isinstance(header, dict)
            or header.get("format_version") != FORMAT_VERSION
            or not isinstance(header.get("dim"), int)
            or header["dim"] < 1
            or not isinstance(header.get("encoder_name"), str)
        ):
            report.findings.append("row 1: malformed header")
        else:
            dim = header["dim"]

    seen: dict[str, tuple[str, ...]] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        report.rows_checked += 1
        try:
            record = json.loads(line)
        except ValueError:
            report.findings.append(f"row {lineno}: not valid JSON")
            continue
        if not isinstance(record, dict) or "key" not in record or "vector" not in record:
            report.findings.append(f"row {lineno}: record needs 'key' and 'vector'")
            continue
        key = str(record["key"])
        parts = _parse_store_key(key)
        if parts is None:
            report.findings.append(f"row {lineno}: key {key!r} matches no known scheme")
            continue
        if key in seen:
            report.findings.append(f"row {lineno}: duplicate key {key!r}")
            continue
        seen[key] = parts
        vector = record["vector"]
        if not isinstance(vector, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in vector
        ):
            report.findings.append(f"row {lineno}: key {key!r} has a non-numeric vector")
            continue
        values = [float(v) for v in vector]
        if dim is not None and len(values) != dim:
            report.findings.append(
                f"row {lineno}: key {key!r} has length {len(values)}, header dim is {dim}"
            )
            continue
        if not all(math.isfinite(v) for v in values):
            report.findings.append(f"row {lineno}: key {key!r} has a non-finite component")
            continue
        norm_sq = sum(v * v for v in values)
        if norm_sq == 0.0:
            report.findings.append(f"row {lineno}: key {key!r} is the zero vector")
            continue
        self_cosine = norm_sq / (math.sqrt(norm_sq) * math.sqrt(norm_sq))
        if abs(self_cosine - 1.0) > 1e-6:
            report.findings.append(
                f"row {lineno}: key {key!r} fails the self-cosine identity"
            )

    # resolve stored keys against the corpus
    for key, parts in seen.items():
        if parts[0] == "statute" and parts[1] not in corpus.statutes:
            report.findings.append(f"key {key!r} references unknown statute {parts[1]!r}")
        elif parts[0] == "case" and parts[1] not in corpus.cases:
            report.findings.append(f"key {key!r} references unknown case {parts[1]!r}")
        elif parts[0] == "pair":
            if parts[1] not in corpus.statutes:
                report.findings.append(f"key {key!r} references unknown statute {parts[1]!r}")
            if parts[2] not in corpus.cases:
                report.findings.append(f"key {key!r} references unknown case {parts[2]!r}")

    for key, _, _ in required_entries(corpus, schemes):
        if key not in seen:
            report.findings.append(f"missing key {key!r}")
    return report
