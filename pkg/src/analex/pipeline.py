"""Entailment by analogy: retrieve similar labeled pairs, judge each
retrieved pair's analogy to the query pair, transfer labels, vote.

The query case's gold label must never influence the outcome. That is
enforced structurally: retrieval sees a RetrievalQuery (ids and texts
only) and the classifier sees an unlabeled quadruple, so the gold enters
only the recorded prediction for later scoring.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from analex import jsonl
from analex.analogy import AnalogyClassifier
from analex.corpus import Corpus, EntailmentLabel
from analex.embeddings import EmbeddingStore
from analex.errors import DataError, FormatError, UsageError
from analex.metrics import EvalReport, accuracy
from analex.quadgen import AnalogyLabel, PairRef, Quadruple
from analex.retrieval import (
    Bm25Index,
    DenseIndex,
    FieldView,
    build_bm25,
    build_dense,
    query_from_case,
    retrieve,
)

BACKENDS = ("bm25", "dense")


@dataclass(frozen=True)
class PipelineConfig:
    backend: str
    k: int
    view: FieldView

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise UsageError(f"unknown retrieval backend {self.backend!r}")
        if self.k < 1 or self.k % 2 == 0:
            raise UsageError(f"k must be a positive odd number, got {self.k}")
        if not isinstance(self.view, FieldView):
            raise UsageError(f"view must be a FieldView, got {self.view!r}")


@dataclass(frozen=True)
class Vote:
    """One neighbor's contribution to the decision."""

    rank: int  # 1-based retrieval rank
    neighbor: PairRef
    score: float
    verdict: AnalogyLabel | None  # None records an abstention
    transferred: EntailmentLabel | None


@dataclass(frozen=True)
class EntailmentPrediction:
    case_id: str
    predicted: EntailmentLabel
    gold: EntailmentLabel | None
    k: int
    backend: str
    view: FieldView
    votes: tuple[Vote, ...]
    abstentions: int


def transfer_label(neighbor_gold: EntailmentLabel, verdict: AnalogyLabel) -> EntailmentLabel:
    """Analogy copies the neighbor's label, NotAnalogy flips it."""
    if verdict is AnalogyLabel.ANALOGY:
        return neighbor_gold
    return neighbor_gold.opposite()


def pool_pairs(corpus: Corpus, split: str) -> list[PairRef]:
    return [PairRef.for_case(case) for case in corpus.split_cases(split)]


def build_index(
    config: PipelineConfig,
    pairs: list[PairRef],
    corpus: Corpus,
    store: EmbeddingStore | None = None,
) -> Bm25Index | DenseIndex:
    if config.backend == "bm25":
        return build_bm25(pairs, corpus, config.view)
    if store is None:
        raise UsageError("the dense backend requires an embedding store")
    return build_dense(pairs, store, config.view)


def decide(votes: Iterable[Vote], case_id: str) -> EntailmentLabel:
    """Majority over the transferred labels of non-abstaining votes.

    A tie (possible only once abstentions thin an odd k to an even count)
    resolves to the highest-ranked non-abstaining vote's transferred
    label; every vote abstaining is an error, not a prediction.
    """
    counted = [vote for vote in votes if vote.transferred is not None]
    if not counted:
        raise DataError(f"every vote abstained for case {case_id!r}")
    tally: dict[EntailmentLabel, int] = {}
    for vote in counted:
        tally[vote.transferred] = tally.get(vote.transferred, 0) + 1
    best = max(tally.values())
    leaders = [label for label, count in tally.items() if count == best]
    if len(leaders) == 1:
        return leaders[0]
    return min(counted, key=lambda vote: vote.rank).transferred


def predict(
    config: PipelineConfig,
    corpus: Corpus,
    case_id: str,
    classifier: AnalogyClassifier,
    index: Bm25Index | DenseIndex,
) -> EntailmentPrediction:
    """Solve one case against a prebuilt pool index."""
    case = corpus.case(case_id)
    query_pair = PairRef.for_case(case)
    hits = retrieve(index, query_from_case(corpus, case_id), config.k)
    votes = []
    for rank, (neighbor, score) in enumerate(hits, start=1):
        quad = Quadruple(first=query_pair, second=neighbor)
        verdict = classifier.classify_or_abstain(quad)
        transferred = None
        if verdict is not None:
            transferred = transfer_label(corpus.case(neighbor.case_id).gold, verdict)
        votes.append(
            Vote(rank=rank, neighbor=neighbor, score=score, verdict=verdict, transferred=transferred)
        )
    predicted = decide(votes, case_id)
    return EntailmentPrediction(
        case_id=case_id,
        predicted=predicted,
        gold=case.gold,
        k=config.k,
        backend=config.backend,
        view=config.view,
        votes=tuple(votes),
        abstentions=sum(1 for vote in votes if vote.verdict is None),
    )


def run_all(
    config: PipelineConfig,
    corpus: Corpus,
    query_split: str,
    pool_split: str,
    classifier: AnalogyClassifier,
    store: EmbeddingStore | None = None,
) -> tuple[list[EntailmentPrediction], EvalReport]:
    """Solve every case in query_split against pool_split and score the
    predictions against the corpus golds."""
    if query_split == pool_split:
        raise UsageError("query split and pool split must differ")
    pool = pool_pairs(corpus, pool_split)
    index = build_index(config, pool, corpus, store)
    predictions = [
        predict(config, corpus, case.id, classifier, index)
        for case in corpus.split_cases(query_split)
    ]
    report = accuracy([(p.predicted, p.gold) for p in predictions])
    return predictions, report


def write_prediction_dump(path: str | Path, predictions: list[EntailmentPrediction]) -> None:
    def row(p: EntailmentPrediction) -> dict:
        return {
            "case_id": p.case_id,
            "predicted": p.predicted.value,
            "gold": p.gold.value if p.gold is not None else None,
            "k": p.k,
            "backend": p.backend,
            "view": p.view.value,
            "abstentions": p.abstentions,
            "votes": [
                {
                    "rank": vote.rank,
                    "neighbor": vote.neighbor.key,
                    "score": vote.score,
                    "verdict": vote.verdict.to_int() if vote.verdict is not None else None,
                    "transferred": (
                        vote.transferred.value if vote.transferred is not None else None
                    ),
                }
                for vote in p.votes
            ],
        }

    jsonl.write_records(path, (row(p) for p in predictions))


def read_prediction_dump(path: str | Path) -> list[EntailmentPrediction]:
    path = Path(path)
    predictions = []
    for lineno, record in jsonl.read_records(path):
        jsonl.require_fields(
            record,
            ("case_id", "predicted", "gold", "k", "backend", "view", "abstentions", "votes"),
            path=str(path),
            line=lineno,
        )
        try:
            votes = tuple(
                Vote(
                    rank=int(v["rank"]),
                    neighbor=PairRef.from_key(v["neighbor"]),
                    score=float(v["score"]),
                    verdict=(
                        AnalogyLabel.from_int(v["verdict"]) if v["verdict"] is not None else None
                    ),
                    transferred=(
                        EntailmentLabel.from_token(v["transferred"])
                        if v["transferred"] is not None
                        else None
                    ),
                )
                for v in record["votes"]
            )
            predictions.append(
                EntailmentPrediction(
                    case_id=str(record["case_id"]),
                    predicted=EntailmentLabel.from_token(record["predicted"]),
                    gold=(
                        EntailmentLabel.from_token(record["gold"])
                        if record["gold"] is not None
                        else None
                    ),
                    k=int(record["k"]),
                    backend=str(record["backend"]),
                    view=FieldView.from_token(record["view"]),
                    votes=votes,
                    abstentions=int(record["abstentions"]),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed prediction row: {exc}", path=str(path), line=lineno) from None
    return predictions
