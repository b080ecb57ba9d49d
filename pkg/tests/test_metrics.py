import random

import pytest

from analex.corpus import EntailmentLabel
from analex.errors import DataError
from analex.metrics import (
    EvalReport,
    SampledEvalReport,
    accuracy,
    load_report,
    majority_baseline,
    sampled_accuracy,
    save_report,
)
from analex.quadgen import AnalogyLabel

from oracles import sampled_stats

E = EntailmentLabel.ENTAILMENT
C = EntailmentLabel.CONTRADICTION


class TestAccuracy:
    def test_exact_fraction_and_confusion(self):
        pairs = [(E, E), (E, C), (C, C), (C, C), (E, E)]
        report = accuracy(pairs)
        assert report.n == 5
        assert report.correct == 4
        assert report.accuracy == 4 / 5
        assert report.confusion[("entailment", "entailment")] == 2
        assert report.confusion[("contradiction", "entailment")] == 1
        assert report.confusion[("contradiction", "contradiction")] == 2
        assert report.confusion[("entailment", "contradiction")] == 0

    def test_works_for_analogy_labels(self):
        pairs = [(AnalogyLabel.ANALOGY, AnalogyLabel.ANALOGY),
                 (AnalogyLabel.NOT_ANALOGY, AnalogyLabel.ANALOGY)]
        report = accuracy(pairs)
        assert report.accuracy == 0.5
        assert report.confusion[("1", "0")] == 1

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            accuracy([])


class TestMajorityBaseline:
    def test_balanced_golds_give_exactly_half(self):
        golds = [E, C] * 17
        assert majority_baseline(golds).accuracy == 0.5

    def test_unbalanced_golds_give_majority_share(self):
        golds = [E] * 7 + [C] * 3
        assert majority_baseline(golds).accuracy == 0.7
        assert majority_baseline([C] * 4 + [E]).accuracy == 0.8

    def test_tie_goes_to_first_declared_label(self):
        report = majority_baseline([E, C])
        # ENTAILMENT is declared first, so the tied baseline predicts it
        assert report.confusion[("entailment", "entailment")] == 1
        assert report.confusion[("contradiction", "entailment")] == 1


class TestSampledAccuracy:
    def test_matches_dual_oracle_exactly(self):
        rng = random.Random(4)
        pairs = [(E, E) if rng.random() < 0.7 else (E, C) for _ in range(400)]
        report = sampled_accuracy(pairs, m=5, size=100, seed=20)
        flags = [p == g for p, g in pairs]
        per_set, mean, std = sampled_stats(flags, m=5, size=100, seed=20)
        assert list(report.per_set) == per_set
        assert report.mean == mean
        assert report.std == std

    def test_seed_offsets_differ_per_set(self):
        pairs = [(E, E), (E, C)] * 100
        report = sampled_accuracy(pairs, m=4, size=50, seed=9)
        assert len(set(report.per_set)) > 1 or report.std == 0.0

    def test_same_seed_reproduces(self):
        pairs = [(E, E), (E, C)] * 100
        a = sampled_accuracy(pairs, m=3, size=40, seed=1)
        b = sampled_accuracy(pairs, m=3, size=40, seed=1)
        assert a == b

    def test_oversized_sample_rejected(self):
        with pytest.raises(DataError):
            sampled_accuracy([(E, E)] * 5, m=2, size=6, seed=0)


class TestReportFiles:
    def test_eval_report_round_trip(self, tmp_path):
        report = accuracy([(E, E), (C, E), (C, C)])
        path = tmp_path / "report.kv"
        save_report(report, path)
        loaded = load_report(path)
        assert isinstance(loaded, EvalReport)
        assert loaded == report

    def test_sampled_report_round_trip(self, tmp_path):
        pairs = [(E, E), (E, C)] * 60
        report = sampled_accuracy(pairs, m=3, size=30, seed=5)
        path = tmp_path / "report.kv"
        save_report(report, path)
        loaded = load_report(path)
        assert isinstance(loaded, SampledEvalReport)
        assert loaded == report

    def test_sampled_report_records_rng_identity(self, tmp_path):
        pairs = [(E, E), (E, C)] * 60
        save_report(sampled_accuracy(pairs, m=2, size=10, seed=0), tmp_path / "r.kv")
        text = (tmp_path / "r.kv").read_text()
        assert "rng = " in text
        assert "seed+i" in text
