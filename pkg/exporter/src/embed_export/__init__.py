"""Embedding exporter: reads a statute/case corpus file, encodes every
text view with a pluggable sentence encoder, and writes an embedding
store file plus a manifest."""

from embed_export.export import SCHEMES, ExportJob, export, verify

__all__ = ["SCHEMES", "ExportJob", "export", "verify"]
