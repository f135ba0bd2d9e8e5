"""
语料级 BLEU-4 与 METEOR-lite

两种指标共用同一归一化: 小写后按词与标点切分。
METEOR-lite 只有精确匹配与 Porter 词干匹配两个阶段，不使用同义词库，
输出中始终以 meteor_lite 命名。
"""

import logging
import math
from collections import Counter
from functools import lru_cache
from typing import Iterable, List, Sequence, Tuple

from nltk.stem.porter import PorterStemmer

from ..errors import InputError
from ..models.records import PredictionRecord, ScorePair
from ..models.vocabulary import tokenize_words

logger = logging.getLogger(__name__)

NGRAM_ORDER = 4
METEOR_ALPHA = 0.9
METEOR_BETA = 3.0
METEOR_GAMMA = 0.5

_stemmer = PorterStemmer()


def normalize(text: str) -> List[str]:
    return tokenize_words(' '.join(text.split()), lowercase=True)


@lru_cache(maxsize=65536)
def _stem(word: str) -> str:
    return _stemmer.stem(word)


def _check_corpus(hypotheses: Sequence[str], references: Sequence[str]):
    if len(hypotheses) != len(references):
        raise InputError(f"{len(hypotheses)} hypotheses but {len(references)} references")
    if not hypotheses:
        raise InputError("cannot score an empty corpus")


def extract_ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu_stats(hyp: Sequence[str], ref: Sequence[str]) -> Tuple[List[int], List[int]]:
    """各阶 n-gram 的截断匹配数与总数"""
    correct, total = [], []
    for n in range(1, NGRAM_ORDER + 1):
        hyp_ngrams, ref_ngrams = extract_ngrams(hyp, n), extract_ngrams(ref, n)
        correct.append(sum(min(c, ref_ngrams[g]) for g, c in hyp_ngrams.items()))
        total.append(max(len(hyp) - n + 1, 0))
    return correct, total


def compute_bleu(correct: Sequence[int], total: Sequence[int], sys_len: int, ref_len: int) -> float:
    """由充分统计量计算 BLEU；2 阶及以上匹配数为 0 时分子分母各加 1"""
    if sys_len == 0 or correct[0] == 0:
        return 0.0
    log_sum = 0.0
    for n in range(NGRAM_ORDER):
        hits, count = correct[n], total[n]
        if n > 0 and hits == 0:
            hits, count = hits + 1, count + 1
        log_sum += math.log(hits / count)
    brevity = 1.0 if sys_len >= ref_len else math.exp(1.0 - ref_len / sys_len)
    return 100.0 * brevity * math.exp(log_sum / NGRAM_ORDER)


def bleu4(hypotheses: Sequence[str], references: Sequence[str]) -> float:
    _check_corpus(hypotheses, references)
    correct, total = [0] * NGRAM_ORDER, [0] * NGRAM_ORDER
    sys_len = ref_len = 0
    for hyp_text, ref_text in zip(hypotheses, references):
        hyp, ref = normalize(hyp_text), normalize(ref_text)
        c, t = bleu_stats(hyp, ref)
        correct = [a + b for a, b in zip(correct, c)]
        total = [a + b for a, b in zip(total, t)]
        sys_len += len(hyp)
        ref_len += len(ref)
    return compute_bleu(correct, total, sys_len, ref_len)


def align(hyp: Sequence[str], ref: Sequence[str]) -> List[Tuple[int, int]]:
    """贪心一对一对齐，先精确匹配再词干匹配，返回按假设位置排序的 (i, j)"""
    used_h, used_r, pairs = set(), set(), []
    for key in (lambda w: w, _stem):
        ref_keys = [key(w) for w in ref]
        for i, word in enumerate(hyp):
            if i in used_h:
                continue
            k = key(word)
            for j, rk in enumerate(ref_keys):
                if j not in used_r and rk == k:
                    used_h.add(i)
                    used_r.add(j)
                    pairs.append((i, j))
                    break
    return sorted(pairs)


def count_chunks(pairs: Sequence[Tuple[int, int]]) -> int:
    chunks, previous = 0, None
    for i, j in pairs:
        if previous is None or (i, j) != (previous[0] + 1, previous[1] + 1):
            chunks += 1
        previous = (i, j)
    return chunks


def meteor_sentence(hyp: Sequence[str], ref: Sequence[str]) -> float:
    if not hyp or not ref:
        return 0.0
    pairs = align(hyp, ref)
    matches = len(pairs)
    if matches == 0:
        return 0.0
    precision, recall = matches / len(hyp), matches / len(ref)
    fmean = precision * recall / (METEOR_ALPHA * precision + (1 - METEOR_ALPHA) * recall)
    penalty = METEOR_GAMMA * (count_chunks(pairs) / matches) ** METEOR_BETA
    return 100.0 * fmean * (1.0 - penalty)


def meteor_lite(hypotheses: Sequence[str], references: Sequence[str]) -> float:
    """句子分数的平均"""
    _check_corpus(hypotheses, references)
    scores = [meteor_sentence(normalize(h), normalize(r)) for h, r in zip(hypotheses, references)]
    return sum(scores) / len(scores)


def score_corpus(hypotheses: Sequence[str], references: Sequence[str]) -> ScorePair:
    return ScorePair(bleu4(hypotheses, references), meteor_lite(hypotheses, references), len(hypotheses))


def score_records(records: Iterable[PredictionRecord]) -> ScorePair:
    records = list(records)
    missing = sum(1 for r in records if r.ref is None)
    if missing:
        raise InputError(f"{missing} prediction records carry no reference text")
    return score_corpus([r.pred for r in records], [r.ref for r in records])


def mean_scores(pairs: Sequence[ScorePair]) -> ScorePair:
    """多次运行取平均"""
    if not pairs:
        raise InputError("no runs to average")
    return ScorePair(sum(p.bleu4 for p in pairs) / len(pairs),
                     sum(p.meteor_lite for p in pairs) / len(pairs),
                     sum(p.n_samples for p in pairs) // len(pairs))
