"""Text-overlap metrics: unigram ROUGE-1 and sentence-multiset F1."""

from __future__ import annotations

import re
from collections import Counter
from typing import Iterable

_TOKEN = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    """Lowercase unigrams; whitespace and punctuation both separate."""
    return _TOKEN.findall(text.lower())


def rouge1(reference: str, candidate: str) -> float:
    """Unigram F-measure with clipped counts.

    rouge1("mark is smart", "mark is kind") == 2/3.
    """
    ref = Counter(tokenize(reference))
    cand = Counter(tokenize(candidate))
    overlap = sum((ref & cand).values())
    if not ref or not cand or overlap == 0:
        return 0.0
    precision = overlap / sum(cand.values())
    recall = overlap / sum(ref.values())
    return 2 * precision * recall / (precision + recall)


def f1_sentence_overlap(original: Iterable[str], perturbed: Iterable[str]) -> float:
    """Multiset F1 between two sentence collections (query included by callers).

    Identical collections score 1.0; removing one of four sentences
    (plus the query, so 5 vs 4) scores 8/9.
    """
    a = Counter(original)
    b = Counter(perturbed)
    overlap = sum((a & b).values())
    if overlap == 0 or not a or not b:
        return 0.0
    precision = overlap / sum(b.values())
    recall = overlap / sum(a.values())
    return 2 * precision * recall / (precision + recall)
