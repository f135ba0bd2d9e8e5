"""
RAKE 关键词抽取

候选短语是停用词或标点之间的最长非停用词串；
词分数 = 度 / 频次，度为该词所在各短语长度之和（含自身）；
短语分数为成员词分数之和。
"""

import math
from collections import Counter
from typing import Dict, Iterable, List, Optional, Tuple

from ..models.records import ScoredKeyword
from ..models.vocabulary import tokenize_words
from .stoplist import load_stoplist


def candidate_phrases(text: str, stoplist: Iterable[str]) -> List[Tuple[str, ...]]:
    stop = set(stoplist)
    phrases, current = [], []
    for token in tokenize_words(text, lowercase=True):
        if token.isalnum() and token not in stop:
            current.append(token)
            continue
        if current:
            phrases.append(tuple(current))
            current = []
    if current:
        phrases.append(tuple(current))
    return phrases


def word_scores(phrases: List[Tuple[str, ...]]) -> Dict[str, float]:
    freq, degree = Counter(), Counter()
    for phrase in phrases:
        for word in phrase:
            freq[word] += 1
            degree[word] += len(phrase)
    return {word: degree[word] / freq[word] for word in freq}


def rake_scores(text: str, stoplist: Optional[Iterable[str]] = None) -> List[ScoredKeyword]:
    """全部候选短语及分数，按首次出现排序"""
    stoplist = load_stoplist() if stoplist is None else stoplist
    phrases = candidate_phrases(text, stoplist)
    scores = word_scores(phrases)
    seen, result = set(), []
    for phrase in phrases:
        if phrase in seen:
            continue
        seen.add(phrase)
        result.append(ScoredKeyword(phrase, float(sum(scores[w] for w in phrase))))
    return result


def rake_extract(text: str, stoplist: Optional[Iterable[str]] = None,
                 top: Optional[int] = None) -> List[ScoredKeyword]:
    """取前 ⌈候选词数/3⌉ 个短语，分数降序，同分按首次出现"""
    candidates = rake_scores(text, stoplist)
    if not candidates:
        return []
    if top is None:
        distinct_words = {w for kw in candidates for w in kw.phrase}
        top = math.ceil(len(distinct_words) / 3)
    ranked = sorted(enumerate(candidates), key=lambda item: (-item[1].score, item[0]))
    return [kw for _, kw in ranked[:top]]
