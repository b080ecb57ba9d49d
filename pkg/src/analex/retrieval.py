"""Retrieve the most similar prototype pairs for a query pair.

Two backends: a from-scratch Okapi BM25 over tokenized field views, and
dense dot-product search over precomputed view embeddings. Field views
select how much of a pair is rendered for matching: hypothesis only,
context+hypothesis, or statute+context+hypothesis.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from analex.corpus import Corpus
from analex.embeddings import EmbeddingStore, case_key, get
from analex.errors import DataError, UsageError
from analex.quadgen import PairRef

_TOKEN = re.compile(r"[^\W_]+", re.UNICODE)

# Minimal English function-word list for the optional stopword filter.
STOPWORDS = frozenset(
    "a an and are as at be by for from has have in is it its of on or that the this to was with".split()
)


class FieldView(Enum):
    H = "h"
    CH = "ch"
    SCH = "sch"

    @classmethod
    def from_token(cls, token: str) -> "FieldView":
        for view in cls:
            if view.value == token:
                return view
        raise ValueError(f"unknown field view {token!r}; expected h, ch or sch")


def render_view_text(statute_text: str, context: str, hypothesis: str, view: FieldView) -> str:
    """Selected parts in the order statute, context, hypothesis, one
    newline between non-empty parts."""
    if view is FieldView.H:
        parts = [hypothesis]
    elif view is FieldView.CH:
        parts = [context, hypothesis]
    else:
        parts = [statute_text, context, hypothesis]
    return "\n".join(p for p in parts if p)


def render_pair_view(pair: PairRef, corpus: Corpus, view: FieldView) -> str:
    case = corpus.case(pair.case_id)
    statute_text = corpus.statute(pair.statute_id).text if view is FieldView.SCH else ""
    return render_view_text(statute_text, case.context, case.hypothesis, view)


def tokenize(text: str) -> list[str]:
    """Lowercase tokens split on maximal runs of non-alphanumerics.

    Digits are retained, underscores split, empty tokens dropped.
    """
    return _TOKEN.findall(text.lower())


def s_stem(token: str) -> str:
    """Plural-stripping S-stemmer (Harman's rules).

    Each suffix rule is terminal: a word matching a rule's suffix is
    either rewritten or, when an exception suffix applies, left alone;
    it never falls through to a shorter-suffix rule.
    """
    if token.endswith("ies"):
        if token.endswith(("eies", "aies")):
            return token
        return token[:-3] + "y"
    if token.endswith("es"):
        if token.endswith(("aes", "ees", "oes")):
            return token
        return token[:-1]
    if token.endswith("s") and not token.endswith(("us", "ss")):
        return token[:-1]
    return token


def _prepare_tokens(text: str, *, stem: bool, remove_stopwords: bool) -> list[str]:
    tokens = tokenize(text)
    if remove_stopwords:
        tokens = [t for t in tokens if t not in STOPWORDS]
    if stem:
        tokens = [s_stem(t) for t in tokens]
    return tokens


@dataclass
class Bm25Index:
    """Immutable BM25 statistics over a pool's rendered view texts."""

    pairs: list[PairRef]
    view: FieldView
    k1: float
    b: float
    doc_terms: list[Counter]
    doc_len: list[int]
    df: dict[str, int]
    avgdl: float
    stem: bool = False
    remove_stopwords: bool = False
    _positions: dict[PairRef, int] = field(default_factory=dict, repr=False)

    @property
    def n_docs(self) -> int:
        return len(self.pairs)

    def prepare_query(self, text: str) -> list[str]:
        """Tokenize a query with the same options the index was built with."""
        return _prepare_tokens(text, stem=self.stem, remove_stopwords=self.remove_stopwords)

    def idf(self, term: str) -> float:
        df = self.df.get(term, 0)
        return math.log(1.0 + (self.n_docs - df + 0.5) / (df + 0.5))


def build_bm25(
    pairs: list[PairRef],
    corpus: Corpus,
    view: FieldView,
    *,
    k1: float = 1.2,
    b: float = 0.75,
    stem: bool = False,
    remove_stopwords: bool = False,
) -> Bm25Index:
    """Deterministic index construction over the pool's rendered views."""
    if not pairs:
        raise UsageError("cannot build a BM25 index over an empty pool")
    if k1 <= 0:
        raise UsageError(f"k1 must be positive, got {k1}")
    if not 0.0 <= b <= 1.0:
        raise UsageError(f"b must lie in [0, 1], got {b}")
    doc_terms: list[Counter] = []
    doc_len: list[int] = []
    df: dict[str, int] = {}
    for pair in pairs:
        tokens = _prepare_tokens(
            render_pair_view(pair, corpus, view), stem=stem, remove_stopwords=remove_stopwords
        )
        counts = Counter(tokens)
        doc_terms.append(counts)
        doc_len.append(len(tokens))
        for term in counts:
            df[term] = df.get(term, 0) + 1
    index = Bm25Index(
        pairs=list(pairs),
        view=view,
        k1=k1,
        b=b,
        doc_terms=doc_terms,
        doc_len=doc_len,
        df=df,
        avgdl=sum(doc_len) / len(doc_len),
        stem=stem,
        remove_stopwords=remove_stopwords,
    )
    index._positions.update({pair: i for i, pair in enumerate(pairs)})
    return index


def bm25_score(index: Bm25Index, query_tokens: list[str], doc: PairRef) -> float:
    """Okapi BM25 with non-negative idf ln(1 + (N-df+0.5)/(df+0.5)).

    Each distinct query term contributes once; terms absent from the
    document contribute 0, so scores are non-negative.
    """
    try:
        position = index._positions[doc]
    except KeyError:
        raise DataError(f"pair {doc.key!r} is not in the index") from None
    counts = index.doc_terms[position]
    length_norm = 1.0 - index.b + index.b * index.doc_len[position] / index.avgdl
    score = 0.0
    for term in dict.fromkeys(query_tokens):
        tf = counts.get(term, 0)
        if tf == 0:
            continue
        score += index.idf(term) * tf * (index.k1 + 1.0) / (tf + index.k1 * length_norm)
    return score


@dataclass
class DenseIndex:
    """Pool view-vectors drawn from an embedding store, in pool order."""

    pairs: list[PairRef]
    view: FieldView
    store: EmbeddingStore
    matrix: np.ndarray


def build_dense(pairs: list[PairRef], store: EmbeddingStore, view: FieldView) -> DenseIndex:
    if not pairs:
        raise UsageError("cannot build a dense index over an empty pool")
    rows = [get(store, case_key(pair.case_id, view.value)) for pair in pairs]
    return DenseIndex(pairs=list(pairs), view=view, store=store, matrix=np.vstack(rows))


@dataclass(frozen=True)
class RetrievalQuery:
    """What retrieval may see of a query pair: ids and texts, never a gold
    label."""

    case_id: str
    statute_text: str
    context: str
    hypothesis: str


def query_from_case(corpus: Corpus, case_id: str) -> RetrievalQuery:
    case = corpus.case(case_id)
    return RetrievalQuery(
        case_id=case.id,
        statute_text=corpus.statute(case.statute_id).text,
        context=case.context,
        hypothesis=case.hypothesis,
    )


def retrieve(
    index: Bm25Index | DenseIndex, query: RetrievalQuery, k: int
) -> list[tuple[PairRef, float]]:
    """Top-k pool pairs by score, descending; ties broken by canonical
    pair key ascending. Deterministic."""
    if k < 1:
        raise UsageError(f"k must be positive, got {k}")
    if k > len(index.pairs):
        raise UsageError(f"k={k} exceeds pool size {len(index.pairs)}")
    if isinstance(index, Bm25Index):
        tokens = index.prepare_query(
            render_view_text(query.statute_text, query.context, query.hypothesis, index.view)
        )
        scored = [(pair, bm25_score(index, tokens, pair)) for pair in index.pairs]
    else:
        query_vector = get(index.store, case_key(query.case_id, index.view.value))
        scores = index.matrix @ query_vector
        scored = [(pair, float(score)) for pair, score in zip(index.pairs, scores)]
    scored.sort(key=lambda item: (-item[1], item[0]))
    return scored[:k]
