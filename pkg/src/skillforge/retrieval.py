"""BM25 retrieval over the skill library.

Documents are the concatenated name, description, and body of each skill.
The tokenizer lowercases and splits on non-alphanumeric characters. IDF uses
the always-nonnegative variant ln(1 + (N - df + 0.5) / (df + 0.5)), which
avoids negative weights on tiny corpora.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass

from skillforge.errors import InputError
from skillforge.model import SkillLibrary

_TOKEN_RE = re.compile(r"[a-z0-9]+")

DEFAULT_K1 = 1.2
DEFAULT_B = 0.75


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class Bm25Index:
    documents: dict[str, Counter]
    doc_lengths: dict[str, int]
    df: dict[str, int]
    avgdl: float
    k1: float = DEFAULT_K1
    b: float = DEFAULT_B

    @property
    def size(self) -> int:
        return len(self.documents)


def build_index(library: SkillLibrary, k1: float = DEFAULT_K1, b: float = DEFAULT_B) -> Bm25Index:
    documents: dict[str, Counter] = {}
    doc_lengths: dict[str, int] = {}
    df: Counter = Counter()
    for skill in library:
        tokens = tokenize(f"{skill.name} {skill.description} {skill.body}")
        counts = Counter(tokens)
        documents[skill.id] = counts
        doc_lengths[skill.id] = len(tokens)
        for term in counts:
            df[term] += 1
    avgdl = sum(doc_lengths.values()) / len(doc_lengths) if doc_lengths else 0.0
    return Bm25Index(documents=documents, doc_lengths=doc_lengths, df=dict(df), avgdl=avgdl, k1=k1, b=b)


def retrieve(index: Bm25Index, query: str, k: int) -> list[tuple[str, float]]:
    """Top-k skill ids by BM25 score, descending, ties by id; zero scores dropped."""
    if k < 1:
        raise InputError("k must be at least 1")
    terms = tokenize(query)
    if not terms or not index.documents:
        return []
    n_docs = index.size
    scored: list[tuple[str, float]] = []
    for doc_id in sorted(index.documents):
        counts = index.documents[doc_id]
        dl = index.doc_lengths[doc_id]
        norm = index.k1 * (1 - index.b + index.b * dl / index.avgdl)
        score = 0.0
        for term in terms:
            tf = counts.get(term, 0)
            if tf == 0:
                continue
            df = index.df[term]
            idf = math.log(1 + (n_docs - df + 0.5) / (df + 0.5))
            score += idf * tf * (index.k1 + 1) / (tf + norm)
        if score > 0.0:
            scored.append((doc_id, score))
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored[:k]
