"""
统计工具: Wilson 区间、Wilcoxon 秩和检验、最小二乘直线
"""

import itertools
import logging
import math
from typing import Sequence, Tuple

import numpy as np
from scipy.stats import norm, rankdata

from ..errors import InputError
from ..models.records import ProbabilityWithCI, RankSumResult, TrendFit

logger = logging.getLogger(__name__)

EXACT_LIMIT = 12
_TIE_TOLERANCE = 1e-9
# p 值下限：最小正浮点数，p 始终落在 (0, 1]
MIN_P_VALUE = float(np.nextafter(0.0, 1.0))


def wilson_interval(hits: int, n: int, confidence: float = 0.95) -> ProbabilityWithCI:
    if n < 0 or hits < 0 or hits > n:
        raise InputError(f"invalid proportion {hits}/{n}")
    if n == 0:
        return ProbabilityWithCI(0.0, 0.0, 1.0, 0, 0)
    z = float(norm.ppf(0.5 + confidence / 2.0))
    p = hits / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    lower, upper = max(0.0, center - half), min(1.0, center + half)
    # 浮点误差下保证 lower <= p <= upper
    return ProbabilityWithCI(p, min(lower, p), max(upper, p), n, hits)


def _exact_p(ranks: np.ndarray, n1: int, observed: float) -> float:
    expected = n1 * (ranks.size + 1) / 2.0
    deviation = abs(observed - expected)
    extreme = total = 0
    for combo in itertools.combinations(range(ranks.size), n1):
        total += 1
        if abs(ranks[list(combo)].sum() - expected) >= deviation - _TIE_TOLERANCE:
            extreme += 1
    return extreme / total


def _normal_p(ranks: np.ndarray, n1: int, n2: int, observed: float) -> float:
    n = n1 + n2
    expected = n1 * (n + 1) / 2.0
    _, counts = np.unique(ranks, return_counts=True)
    ties = float((counts ** 3 - counts).sum())
    variance = n1 * n2 / 12.0 * ((n + 1) - ties / (n * (n - 1)))
    if variance <= 0:
        return 1.0
    z = max(abs(observed - expected) - 0.5, 0.0) / math.sqrt(variance)
    # 对数尾概率，极端 z 下不会下溢成 0
    log_p = math.log(2.0) + float(norm.logsf(z))
    return min(1.0, max(math.exp(log_p), MIN_P_VALUE))


def wilcoxon_rank_sum(sample_a: Sequence[float], sample_b: Sequence[float],
                      method: str = 'auto') -> RankSumResult:
    """双侧秩和检验，统计量为 sample_a 的秩和

    n1 + n2 <= 12 时精确枚举，否则正态近似（并列校正与 0.5 连续性校正）。
    """
    a = np.asarray(sample_a, dtype=np.float64).reshape(-1)
    b = np.asarray(sample_b, dtype=np.float64).reshape(-1)
    if a.size == 0 or b.size == 0:
        raise InputError("rank-sum test needs two non-empty samples")
    if method not in ('auto', 'exact', 'normal'):
        raise InputError(f"unknown rank-sum method {method!r}")
    ranks = rankdata(np.concatenate([a, b]))
    statistic = float(ranks[:a.size].sum())
    if method == 'exact' or (method == 'auto' and a.size + b.size <= EXACT_LIMIT):
        return RankSumResult(statistic, _exact_p(ranks, a.size, statistic), 'exact')
    return RankSumResult(statistic, _normal_p(ranks, a.size, b.size, statistic), 'normal')


def ols_fit(xs: Sequence[float], ys: Sequence[float]) -> Tuple[float, float, bool]:
    """返回 (slope, intercept, defined)；x 只有一个取值时斜率记为 0 且 defined=False"""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.size != ys.size or xs.size == 0:
        raise InputError("ols_fit needs equally sized non-empty inputs")
    if np.unique(xs).size < 2:
        return 0.0, float(ys.mean()), False
    slope, intercept = np.polyfit(xs, ys, 1)
    return float(slope), float(intercept), True


def trend_fit(xs: Sequence[float], means: Sequence[float], sizes: Sequence[int] = ()) -> TrendFit:
    slope, intercept, defined = ols_fit(xs, means)
    return TrendFit([float(x) for x in xs], [float(m) for m in means], slope, intercept, defined, list(sizes))
