import json

from embed_export.cli import main

from helpers_export import write_sample_corpus


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def kv(out):
    pairs = {}
    for line in out.splitlines():
        key, sep, value = line.partition(" = ")
        if sep:
            pairs[key] = value
    return pairs


class TestExportCommand:
    def test_export_writes_store_and_manifest(self, tmp_path, capsys):
        corpus = tmp_path / "corpus.jsonl"
        write_sample_corpus(corpus)
        out = tmp_path / "store.jsonl"
        code, stdout, _ = run(
            capsys, "export", "--corpus", str(corpus), "--out", str(out),
            "--encoder", "hash:16",
        )
        assert code == 0
        pairs = kv(stdout)
        assert pairs["encoder_name"] == "hash-sha256-d16"
        assert pairs["dim"] == "16"
        assert pairs["rows statute"] == "2"
        assert pairs["rows concat"] == "4"
        assert len(pairs["checksum_sha256"]) == 64
        assert out.exists()
        assert (tmp_path / "store.jsonl.manifest").exists()

    def test_scheme_subset(self, tmp_path, capsys):
        corpus = tmp_path / "corpus.jsonl"
        write_sample_corpus(corpus)
        out = tmp_path / "store.jsonl"
        code, stdout, _ = run(
            capsys, "export", "--corpus", str(corpus), "--out", str(out),
            "--schemes", "h,sch",
        )
        assert code == 0
        pairs = kv(stdout)
        assert pairs["rows h"] == "4"
        assert pairs["rows sch"] == "4"
        assert "rows statute" not in pairs


class TestVerifyCommand:
    def test_clean_store_verifies(self, tmp_path, capsys):
        corpus = tmp_path / "corpus.jsonl"
        write_sample_corpus(corpus)
        out = tmp_path / "store.jsonl"
        assert run(capsys, "export", "--corpus", str(corpus), "--out", str(out))[0] == 0
        code, stdout, _ = run(
            capsys, "verify", "--store", str(out), "--corpus", str(corpus)
        )
        assert code == 0
        pairs = kv(stdout)
        assert pairs["rows_checked"] == "18"
        assert pairs["findings"] == "0"

    def test_missing_row_exits_three(self, tmp_path, capsys):
        corpus = tmp_path / "corpus.jsonl"
        write_sample_corpus(corpus)
        out = tmp_path / "store.jsonl"
        run(capsys, "export", "--corpus", str(corpus), "--out", str(out))
        lines = out.read_text().splitlines()
        victim = json.loads(lines[1])["key"]
        out.write_text("\n".join(lines[:1] + lines[2:]) + "\n")
        code, stdout, _ = run(
            capsys, "verify", "--store", str(out), "--corpus", str(corpus)
        )
        assert code == 3
        assert kv(stdout)["findings"] == "1"
        assert f"finding: missing key {victim!r}" in stdout


class TestExitCodes:
    def test_no_subcommand(self, capsys):
        code, _, err = run(capsys)
        assert code == 1
        assert "subcommand is required" in err

    def test_unknown_scheme_token(self, tmp_path, capsys):
        corpus = tmp_path / "corpus.jsonl"
        write_sample_corpus(corpus)
        code, _, err = run(
            capsys, "verify", "--store", "x", "--corpus", str(corpus),
            "--schemes", "h,nope",
        )
        assert code == 1
        assert "unknown scheme 'nope'" in err

    def test_export_unknown_scheme_token(self, tmp_path, capsys):
        code, _, err = run(
            capsys, "export", "--corpus", "c", "--out", "o", "--schemes", "pairs",
        )
        assert code == 1
        assert "unknown scheme 'pairs'" in err

    def test_missing_required_flag(self, capsys):
        code, _, err = run(capsys, "export", "--corpus", "c")
        assert code == 1
        assert "--out" in err

    def test_absent_corpus_file(self, tmp_path, capsys):
        code, _, err = run(
            capsys, "export", "--corpus", str(tmp_path / "absent.jsonl"),
            "--out", str(tmp_path / "store.jsonl"),
        )
        assert code == 2
        assert "cannot read" in err

    def test_malformed_corpus_file(self, tmp_path, capsys):
        corpus = tmp_path / "corpus.jsonl"
        corpus.write_text("not json\n")
        code, _, err = run(
            capsys, "export", "--corpus", str(corpus),
            "--out", str(tmp_path / "store.jsonl"),
        )
        assert code == 2
        assert "not valid JSON" in err
