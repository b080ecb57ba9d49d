"""Command-line front end mirroring ExportJob.

Exit codes: 0 success (and a clean verify), 1 usage problems, 2 data or
encoder problems, 3 verify findings.
"""

from __future__ import annotations

import argparse
import sys

from embed_export.errors import DataError, EncoderError, UsageError
from embed_export.export import SCHEMES, ExportJob, export, verify


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> Parser:
    parser = Parser(prog="embed-export",
                    description="compute embeddings for a corpus and emit a store file")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=Parser)

    exp = sub.add_parser("export", help="encode a corpus into a store file + manifest")
    exp.add_argument("--corpus", required=True, help="corpus file to read")
    exp.add_argument("--out", required=True, help="store file to write")
    exp.add_argument("--encoder", default="hash",
                     help="encoder id: 'hash', 'hash:<dim>', or a sentence-transformers name")
    exp.add_argument("--schemes", default=",".join(SCHEMES),
                     help=f"comma-separated subset of: {', '.join(SCHEMES)}")
    exp.add_argument("--batch-size", type=int, default=32)
    exp.add_argument("--device", default=None, help="device hint for model encoders")

    ver = sub.add_parser("verify", help="check a store file against a corpus")
    ver.add_argument("--store", required=True)
    ver.add_argument("--corpus", required=True)
    ver.add_argument("--schemes", default=",".join(SCHEMES))
    return parser


def _cmd_export(ns) -> int:
    job = ExportJob(
        corpus_path=ns.corpus,
        out_path=ns.out,
        encoder_id=ns.encoder,
        schemes=tuple(token for token in ns.schemes.split(",") if token),
        batch_size=ns.batch_size,
        device=ns.device,
    )
    result = export(job)
    print(f"encoder_name = {result.encoder_name}")
    print(f"dim = {result.dim}")
    for scheme, count in result.rows_per_scheme.items():
        print(f"rows {scheme} = {count}")
    print(f"checksum_sha256 = {result.checksum}")
    print(f"manifest = {result.manifest_path}")
    return 0


def _cmd_verify(ns) -> int:
    schemes = tuple(token for token in ns.schemes.split(",") if token)
    for scheme in schemes:
        if scheme not in SCHEMES:
            raise UsageError(f"unknown scheme {scheme!r}")
    report = verify(ns.store, ns.corpus, schemes)
    print(f"rows_checked = {report.rows_checked}")
    print(f"findings = {len(report.findings)}")
    for finding in report.findings:
        print(f"finding: {finding}")
    return 0 if report.ok else 3


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        if ns.command is None:
            parser.print_usage(sys.stderr)
            raise UsageError("a subcommand is required")
        if ns.command == "export":
            return _cmd_export(ns)
        return _cmd_verify(ns)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DataError, EncoderError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
