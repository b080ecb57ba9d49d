"""Score analogy quadruples, calibrate a decision threshold, and classify.

Two cosine scorers are provided: the offset method compares the relation
vectors f(S)-f(C) of the two pairs, and the pair method compares the
embeddings of the concatenated texts directly. A third, file-backed path
imports binary verdicts produced by external models.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from analex import jsonl
from analex.embeddings import (
    EmbeddingStore,
    case_key,
    cosine,
    get,
    offset,
    pair_concat_key,
    statute_key,
)
from analex.errors import DataError, FormatError, MissingKeyError, UsageError
from analex.kv import read_kv, write_kv
from analex.quadgen import AnalogyLabel, Quadruple

DEFAULT_CASE_SCHEME = "ch"
THRESHOLD_MODEL_VERSION = 1


class ScoreMethod(Enum):
    QUADRUPLE_OFFSET = "quadruple_offset"
    PAIR_CONCAT = "pair_concat"
    EXTERNAL = "external"

    @classmethod
    def from_token(cls, token: str) -> "ScoreMethod":
        for method in cls:
            if method.value == token:
                return method
        raise ValueError(f"unknown score method {token!r}")


@dataclass(frozen=True)
class AnalogyScore:
    quad_id: str
    method: ScoreMethod
    value: float


@dataclass(frozen=True)
class ThresholdModel:
    method: ScoreMethod
    threshold: float
    dev_accuracy: float


def score_quadruple_offset(
    store: EmbeddingStore, quad: Quadruple, *, case_scheme: str = DEFAULT_CASE_SCHEME
) -> AnalogyScore:
    """Cosine between the two pairs' offset vectors f(S) - f(C).

    case_scheme picks which case view embedding stands in for f(C);
    the full case ("ch") is the default.
    """
    g1 = offset(
        get(store, statute_key(quad.first.statute_id)),
        get(store, case_key(quad.first.case_id, case_scheme)),
    )
    g2 = offset(
        get(store, statute_key(quad.second.statute_id)),
        get(store, case_key(quad.second.case_id, case_scheme)),
    )
    return AnalogyScore(
        quad_id=quad.quad_id, method=ScoreMethod.QUADRUPLE_OFFSET, value=cosine(g1, g2)
    )


def score_pair_concat(store: EmbeddingStore, quad: Quadruple) -> AnalogyScore:
    """Cosine between the embeddings of the two concatenated statute+case
    strings."""
    v1 = get(store, pair_concat_key(quad.first.statute_id, quad.first.case_id))
    v2 = get(store, pair_concat_key(quad.second.statute_id, quad.second.case_id))
    return AnalogyScore(quad_id=quad.quad_id, method=ScoreMethod.PAIR_CONCAT, value=cosine(v1, v2))


def calibrate_threshold(scores: list[tuple[AnalogyScore, AnalogyLabel]]) -> ThresholdModel:
    """Pick the threshold maximizing accuracy under "value > threshold =>
    Analogy".

    Candidates are the midpoints between consecutive distinct sorted score
    values plus one sentinel below the minimum and one at the maximum,
    which together cover every achievable decision rule exactly. Ties go
    to the smallest candidate. Requires both gold labels to be present.
    """
    if not scores:
        raise DataError("cannot calibrate on an empty score list")
    methods = {score.method for score, _ in scores}
    if len(methods) > 1:
        raise UsageError(f"mixed score methods in calibration input: {sorted(m.value for m in methods)}")
    golds = {gold for _, gold in scores}
    if len(golds) < 2:
        raise DataError("calibration requires at least one score of each gold label")

    values = sorted({score.value for score, _ in scores})
    candidates = [values[0] - 1.0]
    candidates.extend((a + b) / 2.0 for a, b in zip(values, values[1:]))
    candidates.append(values[-1])

    pairs = [(score.value, gold) for score, gold in scores]
    n = len(pairs)
    best_threshold = candidates[0]
    best_correct = -1
    for threshold in candidates:
        correct = sum(
            1
            for value, gold in pairs
            if (value > threshold) == (gold is AnalogyLabel.ANALOGY)
        )
        if correct > best_correct:
            best_correct = correct
            best_threshold = threshold
    return ThresholdModel(
        method=methods.pop(), threshold=best_threshold, dev_accuracy=best_correct / n
    )


class AnalogyClassifier:
    """Interchangeable quadruple -> Analogy/NotAnalogy backends.

    classify is strict and raises on unmet prerequisites;
    classify_or_abstain exists for the voting pipeline, where external
    verdict files may simply lack an id (an abstention).
    """

    def classify(self, quad: Quadruple) -> AnalogyLabel:
        raise NotImplementedError

    def classify_or_abstain(self, quad: Quadruple) -> AnalogyLabel | None:
        return self.classify(quad)


class OffsetThresholdClassifier(AnalogyClassifier):
    def __init__(self, store: EmbeddingStore, model: ThresholdModel,
                 *, case_scheme: str = DEFAULT_CASE_SCHEME):
        if model.method is not ScoreMethod.QUADRUPLE_OFFSET:
            raise UsageError(f"threshold model was calibrated for {model.method.value}")
        self.store = store
        self.model = model
        self.case_scheme = case_scheme

    def classify(self, quad: Quadruple) -> AnalogyLabel:
        score = score_quadruple_offset(self.store, quad, case_scheme=self.case_scheme)
        return apply_threshold(score.value, self.model.threshold)


class PairThresholdClassifier(AnalogyClassifier):
    def __init__(self, store: EmbeddingStore, model: ThresholdModel):
        if model.method is not ScoreMethod.PAIR_CONCAT:
            raise UsageError(f"threshold model was calibrated for {model.method.value}")
        self.store = store
        self.model = model

    def classify(self, quad: Quadruple) -> AnalogyLabel:
        score = score_pair_concat(self.store, quad)
        return apply_threshold(score.value, self.model.threshold)


class ExternalPredictionsClassifier(AnalogyClassifier):
    """Verdicts keyed by quad_id, typically produced by a fine-tuned model
    or an LLM run."""

    def __init__(self, predictions: dict[str, AnalogyLabel]):
        self.predictions = dict(predictions)

    def classify(self, quad: Quadruple) -> AnalogyLabel:
        try:
            return self.predictions[quad.quad_id]
        except KeyError:
            raise MissingKeyError(f"no external prediction for quad_id {quad.quad_id!r}") from None

    def classify_or_abstain(self, quad: Quadruple) -> AnalogyLabel | None:
        return self.predictions.get(quad.quad_id)


def apply_threshold(value: float, threshold: float) -> AnalogyLabel:
    """Analogy iff the score is strictly greater than the threshold."""
    return AnalogyLabel.ANALOGY if value > threshold else AnalogyLabel.NOT_ANALOGY


def classify(classifier: AnalogyClassifier, quad: Quadruple) -> AnalogyLabel:
    return classifier.classify(quad)


def import_external_predictions(path: str | Path) -> ExternalPredictionsClassifier:
    """Read a predictions file ({quad_id, label: 0|1} per line).

    Duplicate ids and label tokens other than integer 0/1 are rejected.
    """
    path = Path(path)
    predictions: dict[str, AnalogyLabel] = {}
    for lineno, record in jsonl.read_records(path):
        jsonl.require_fields(record, ("quad_id", "label"), path=str(path), line=lineno)
        quad_id = str(record["quad_id"])
        if quad_id in predictions:
            raise FormatError(f"duplicate quad_id {quad_id!r}", path=str(path), line=lineno)
        label = record["label"]
        if not isinstance(label, int) or isinstance(label, bool) or label not in (0, 1):
            raise FormatError(
                f"unknown label {label!r} for quad_id {quad_id!r}; expected 0 or 1",
                path=str(path), line=lineno,
            )
        predictions[quad_id] = AnalogyLabel.from_int(label)
    return ExternalPredictionsClassifier(predictions)


def write_predictions(predictions: dict[str, AnalogyLabel], path: str | Path) -> int:
    return jsonl.write_records(
        path,
        ({"quad_id": quad_id, "label": label.to_int()} for quad_id, label in predictions.items()),
    )


def write_scores(scores: list[AnalogyScore], path: str | Path) -> int:
    return jsonl.write_records(
        path,
        (
            {"quad_id": s.quad_id, "method": s.method.value, "value": repr(s.value)}
            for s in scores
        ),
    )


def read_scores(path: str | Path) -> list[AnalogyScore]:
    path = Path(path)
    scores: list[AnalogyScore] = []
    for lineno, record in jsonl.read_records(path):
        jsonl.require_fields(record, ("quad_id", "method", "value"), path=str(path), line=lineno)
        try:
            method = ScoreMethod.from_token(str(record["method"]))
        except ValueError as exc:
            raise FormatError(str(exc), path=str(path), line=lineno) from None
        try:
            value = float(record["value"])
        except (TypeError, ValueError):
            raise FormatError(
                f"non-numeric score value {record['value']!r}", path=str(path), line=lineno
            ) from None
        scores.append(AnalogyScore(quad_id=str(record["quad_id"]), method=method, value=value))
    return scores


def save_threshold_model(model: ThresholdModel, path: str | Path) -> None:
    write_kv(path, {
        "threshold_model_version": THRESHOLD_MODEL_VERSION,
        "method": model.method.value,
        "threshold": repr(model.threshold),
        "dev_accuracy": repr(model.dev_accuracy),
    })


def load_threshold_model(path: str | Path) -> ThresholdModel:
    items = read_kv(path)
    try:
        if int(items["threshold_model_version"]) != THRESHOLD_MODEL_VERSION:
            raise FormatError("unsupported threshold model version", path=str(path))
        return ThresholdModel(
            method=ScoreMethod.from_token(items["method"]),
            threshold=float(items["threshold"]),
            dev_accuracy=float(items["dev_accuracy"]),
        )
    except (KeyError, ValueError) as exc:
        raise FormatError(f"malformed threshold model: {exc}", path=str(path)) from None
