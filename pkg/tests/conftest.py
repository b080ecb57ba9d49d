"""Shared builders: synthetic corpora, deterministic encoders, and
embedding stores covering every key scheme."""

from __future__ import annotations

import hashlib
import random

import numpy as np
import pytest

from analex.corpus import Case, Corpus, EntailmentLabel, Statute
from analex.embeddings import (
    CASE_VIEW_SCHEMES,
    EmbeddingStore,
    case_key,
    pair_concat_key,
    statute_key,
)
from analex.quadgen import full_case_text
from analex.retrieval import FieldView, render_view_text


def hash_vec(text: str, dim: int = 16) -> np.ndarray:
    """Deterministic unit vector derived from the text alone."""
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    rng = random.Random(int.from_bytes(digest[:8], "big"))
    vec = np.array([rng.gauss(0.0, 1.0) for _ in range(dim)], dtype=np.float64)
    return vec / np.linalg.norm(vec)


def make_corpus(per_split: dict[str, int], n_statutes: int = 5, seed: int = 0) -> Corpus:
    """Synthetic corpus with alternating gold labels per split.

    Case texts are distinct but share enough vocabulary that lexical
    retrieval has something to rank.
    """
    rng = random.Random(seed)
    statutes = {}
    for i in range(n_statutes):
        sid = f"s{i + 1}"
        statutes[sid] = Statute(
            id=sid,
            section_label=f"Section {i + 1}",
            text=f"Rule {i + 1} requires filing form F{i + 1} within {i + 3} days of notice.",
        )
    cases: dict[str, Case] = {}
    splits: dict[str, list[str]] = {"train": [], "dev": [], "test": []}
    counter = 0
    for split, count in per_split.items():
        for j in range(count):
            counter += 1
            cid = f"{split[:2]}{j + 1}"
            sid = f"s{(counter % n_statutes) + 1}"
            gold = EntailmentLabel.ENTAILMENT if j % 2 == 0 else EntailmentLabel.CONTRADICTION
            cases[cid] = Case(
                id=cid,
                statute_id=sid,
                context=(
                    f"Party P{counter} received notice N{counter} and filed form "
                    f"F{(counter % n_statutes) + 1} on day {rng.randint(1, 9)}."
                ),
                hypothesis=f"Party P{counter} satisfied rule {(counter % n_statutes) + 1}.",
                gold=gold,
            )
            splits[split].append(cid)
    return Corpus(statutes=statutes, cases=cases, splits=splits)


def corpus_with_label_counts(entail: int, contra: int, split: str = "train") -> Corpus:
    """One split holding exactly the requested gold label counts."""
    corpus = make_corpus({split: entail + contra}, n_statutes=3)
    for i, cid in enumerate(corpus.splits[split]):
        case = corpus.cases[cid]
        gold = EntailmentLabel.ENTAILMENT if i < entail else EntailmentLabel.CONTRADICTION
        corpus.cases[cid] = Case(
            id=case.id, statute_id=case.statute_id, context=case.context,
            hypothesis=case.hypothesis, gold=gold,
        )
    return corpus


def make_store(corpus: Corpus, dim: int = 16, encoder=hash_vec, name: str = "test-hash") -> EmbeddingStore:
    """Store holding every key scheme for every statute and case, with
    vectors encoding the same texts retrieval and scoring would see."""
    entries: dict[str, np.ndarray] = {}

    def put(key: str, text: str) -> None:
        vec = np.asarray(encoder(text, dim), dtype=np.float64)
        vec.setflags(write=False)
        entries[key] = vec

    for statute in corpus.statutes.values():
        put(statute_key(statute.id), statute.text)
    for case in corpus.cases.values():
        statute = corpus.statute(case.statute_id)
        for scheme in CASE_VIEW_SCHEMES:
            text = render_view_text(
                statute.text, case.context, case.hypothesis, FieldView(scheme)
            )
            put(case_key(case.id, scheme), text)
        put(
            pair_concat_key(case.statute_id, case.id),
            statute.text + " " + full_case_text(case),
        )
    return EmbeddingStore(dim=dim, encoder_name=name, entries=entries)


@pytest.fixture
def toy_corpus() -> Corpus:
    return make_corpus({"train": 6, "dev": 4, "test": 4}, n_statutes=3, seed=7)


@pytest.fixture
def toy_store(toy_corpus) -> EmbeddingStore:
    return make_store(toy_corpus)
