"""
工作记忆内容分析

在预测导出 (PredictionRecord) 上统计记忆多样性、关键词与实词命中概率、
词性分布，并对标注过的语料两两做秩和检验。所有函数都是输入的纯函数。
"""

import itertools
import logging
from collections import Counter
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from ..errors import InputError
from ..models.records import DiversityStats, PosDistribution, PredictionRecord, ProbabilityWithCI, TrendFit
from ..models.vocabulary import merge_subword_pieces, tokenize_words
from ..utils.data_formatter import DataFormatter
from ..utils.pos_tagger import TAG_SET, pos_tag
from ..utils.rake import rake_extract
from ..utils.stats import trend_fit, wilcoxon_rank_sum, wilson_interval
from ..utils.stoplist import load_stoplist
from .corpus_service import corpus_stats

logger = logging.getLogger(__name__)

PREDICTIONS, REFERENCES = 'predictions', 'references'
DEFAULT_BUCKET_WIDTH = 5
REPORT_POS_TAGS = ('DET', 'NOUN', 'PROPN', 'VERB', 'PRON', 'CCONJ', 'PUNCT')
DEFAULT_METRICS = ('diversity', 'keyword_pred', 'keyword_ref', 'content') + tuple(
    f"pos:{tag}" for tag in REPORT_POS_TAGS)

REPORT_FILES = {
    'diversity_hist': ('corpus', 'unique_tokens', 'records'),
    'diversity_trend': ('corpus', 'axis', 'x', 'mean', 'records', 'slope', 'intercept', 'defined'),
    'keyword_prob': ('corpus', 'source', 'hits', 'n', 'estimate', 'lower', 'upper'),
    'content_prob': ('corpus', 'hits', 'n', 'estimate', 'lower', 'upper'),
    'pos_dist': ('corpus', 'tag', 'occurrences', 'records'),
    'pairwise_pvalues': ('metric', 'corpus_a', 'corpus_b', 'n_a', 'n_b', 'statistic', 'p_value', 'method'),
    'corpus_stats': ('corpus', 'side', 'samples', 'min_len', 'max_len', 'avg_len'),
}


def normalize_memory_token(token: str) -> str:
    return token.strip().lower()


def unique_memory_tokens(record: PredictionRecord) -> int:
    return len({normalize_memory_token(t) for t in record.mem if t.strip()})


def memory_words(record: PredictionRecord) -> List[Tuple[str, bool]]:
    """子词片段合并后的 (词, 是否完整)，按首次出现去重"""
    seen, words = set(), []
    for word, complete in merge_subword_pieces([t.strip() for t in record.mem if t.strip()]):
        if (word, complete) in seen:
            continue
        seen.add((word, complete))
        words.append((word, complete))
    return words


def diversity_histogram(records: Sequence[PredictionRecord], mem_size: Optional[int] = None) -> DiversityStats:
    """bin 0..M 全部列出，空记忆计入 bin 0"""
    counts = [unique_memory_tokens(r) for r in records]
    top = max(counts, default=0) if mem_size is None else mem_size
    if counts and max(counts) > top:
        raise InputError(f"a record holds {max(counts)} unique memory tokens, more than M={top}")
    histogram = {k: 0 for k in range(top + 1)}
    for count in counts:
        histogram[count] += 1
    mean = sum(counts) / len(counts) if counts else 0.0
    return DiversityStats(counts, histogram, mean)


def epoch_diversity_trend(dumps_by_epoch: Mapping[int, Sequence[PredictionRecord]]) -> TrendFit:
    """每个 epoch 的平均多样性及其最小二乘直线"""
    if len(dumps_by_epoch) < 2:
        raise InputError("an epoch trend needs at least 2 epochs")
    epochs = sorted(dumps_by_epoch)
    stats = [diversity_histogram(dumps_by_epoch[e]) for e in epochs]
    fit = trend_fit(epochs, [s.mean for s in stats], [len(s.counts) for s in stats])
    logger.debug(f"Epoch diversity slope {fit.slope:.4f} over {len(epochs)} epochs")
    return fit


def prediction_length(record: PredictionRecord) -> int:
    return len(tokenize_words(record.pred))


def diversity_by_length(records: Sequence[PredictionRecord], width: int = DEFAULT_BUCKET_WIDTH) -> TrendFit:
    """按预测长度分桶（桶宽 width，以桶起点为 x）求平均多样性"""
    if not records:
        raise InputError("diversity_by_length needs at least one record")
    if width < 1:
        raise InputError(f"bucket width must be positive, got {width}")
    buckets: Dict[int, List[int]] = {}
    for record in records:
        start = prediction_length(record) // width * width
        buckets.setdefault(start, []).append(unique_memory_tokens(record))
    xs = sorted(buckets)
    return trend_fit(xs, [sum(buckets[x]) / len(buckets[x]) for x in xs], [len(buckets[x]) for x in xs])


def keyword_hit(record: PredictionRecord, source: str = PREDICTIONS, stoplist=None) -> bool:
    """任一关键词的任一成员词与某个记忆词（小写）完全相同即命中"""
    if source == PREDICTIONS:
        text = record.pred
    elif source == REFERENCES:
        if record.ref is None:
            raise InputError("record carries no reference text")
        text = record.ref
    else:
        raise InputError(f"unknown keyword source {source!r}")
    memory = {word.lower() for word, complete in memory_words(record) if complete}
    if not memory:
        return False
    return any(word in memory for keyword in rake_extract(text, stoplist) for word in keyword.phrase)


def keyword_in_memory_probability(records: Sequence[PredictionRecord], source: str = PREDICTIONS,
                                  stoplist=None) -> ProbabilityWithCI:
    stoplist = load_stoplist() if stoplist is None else stoplist
    hits = sum(keyword_hit(r, source, stoplist) for r in records)
    return wilson_interval(hits, len(records))


def content_hit(record: PredictionRecord, stoplist=None) -> bool:
    """记忆中存在长度 ≥ 2、全字母且不在停用词表中的词"""
    stoplist = load_stoplist() if stoplist is None else stoplist
    return any(complete and word.isalpha() and len(word) >= 2 and word.lower() not in stoplist
               for word, complete in memory_words(record))


def content_word_probability(records: Sequence[PredictionRecord], stoplist=None) -> ProbabilityWithCI:
    stoplist = load_stoplist() if stoplist is None else stoplist
    return wilson_interval(sum(content_hit(r, stoplist) for r in records), len(records))


def memory_pos_counts(record: PredictionRecord) -> Counter:
    """单条记录中各词性的唯一记忆词个数；不完整的子词记为 OTHER"""
    return Counter(pos_tag(word) if complete else 'OTHER' for word, complete in memory_words(record))


def pos_distribution(records: Sequence[PredictionRecord], mem_size: int) -> PosDistribution:
    """tag -> {出现次数 k: 恰有 k 个该词性唯一记忆词的记录数}，k 取 1..M"""
    counts = {tag: {k: 0 for k in range(1, mem_size + 1)} for tag in TAG_SET}
    for record in records:
        for tag, occurrences in memory_pos_counts(record).items():
            counts[tag][min(occurrences, mem_size)] += 1
    return PosDistribution(counts)


def metric_samples(records: Sequence[PredictionRecord], metric: str, stoplist=None) -> List[float]:
    """秩和检验用的逐记录样本"""
    if metric == 'diversity':
        return [float(unique_memory_tokens(r)) for r in records]
    if metric == 'keyword_pred':
        return [float(keyword_hit(r, PREDICTIONS, stoplist)) for r in records]
    if metric == 'keyword_ref':
        return [float(keyword_hit(r, REFERENCES, stoplist)) for r in records]
    if metric == 'content':
        return [float(content_hit(r, stoplist)) for r in records]
    if metric.startswith('pos:') and metric[4:] in TAG_SET:
        tag = metric[4:]
        return [float(memory_pos_counts(r)[tag]) for r in records]
    raise InputError(f"unknown metric {metric!r}")


def _has_references(records: Sequence[PredictionRecord]) -> bool:
    return all(r.ref is not None for r in records)


def pairwise_tests(corpora: Mapping[str, Sequence[PredictionRecord]],
                   comparisons: Optional[Sequence[Tuple[str, str]]] = None,
                   metrics: Sequence[str] = DEFAULT_METRICS, stoplist=None) -> List[list]:
    """comparisons 为空时比较全部语料对（按给定顺序）"""
    stoplist = load_stoplist() if stoplist is None else stoplist
    labels = list(corpora)
    pairs = list(itertools.combinations(labels, 2)) if comparisons is None else list(comparisons)
    for a, b in pairs:
        for label in (a, b):
            if label not in corpora:
                raise InputError(f"comparison names unknown corpus {label!r}")
    rows = []
    for metric in metrics:
        if metric == 'keyword_ref' and not all(_has_references(corpora[l]) for pair in pairs for l in pair):
            logger.warning("Skipping keyword_ref tests: some dumps carry no reference text")
            continue
        samples = {}
        for a, b in pairs:
            for label in (a, b):
                if label not in samples:
                    samples[label] = metric_samples(corpora[label], metric, stoplist)
            result = wilcoxon_rank_sum(samples[a], samples[b])
            rows.append([metric, a, b, len(samples[a]), len(samples[b]),
                         float(result.statistic), float(result.p_value), result.method])
    return rows


def _trend_rows(label: str, axis: str, fit: TrendFit) -> List[list]:
    return [[label, axis, x, mean, size, fit.slope, fit.intercept, fit.defined]
            for x, mean, size in zip(fit.xs, fit.means, fit.sizes)]


def build_report(corpora: Mapping[str, Sequence[PredictionRecord]], out_dir,
                 comparisons: Optional[Sequence[Tuple[str, str]]] = None, mem_size: int = 10,
                 epoch_dumps: Optional[Mapping[str, Mapping[int, Sequence[PredictionRecord]]]] = None,
                 metrics: Sequence[str] = DEFAULT_METRICS, bucket_width: int = DEFAULT_BUCKET_WIDTH,
                 stoplist=None) -> List[Path]:
    """写出全部分析 CSV，返回写出的文件；没有语料对时不写 p 值矩阵"""
    if not corpora:
        raise InputError("no corpora to analyze")
    for label, records in corpora.items():
        if not label:
            raise InputError("every corpus needs a tag")
        if not records:
            raise InputError(f"corpus {label!r} has no records")
    stoplist = load_stoplist() if stoplist is None else stoplist
    epoch_dumps = epoch_dumps or {}
    out_dir = Path(out_dir)
    rows = {name: [] for name in REPORT_FILES}

    for label, records in corpora.items():
        stats = diversity_histogram(records, mem_size)
        rows['diversity_hist'].extend([label, k, v] for k, v in stats.histogram.items())

        if len(epoch_dumps.get(label, {})) >= 2:
            rows['diversity_trend'].extend(_trend_rows(label, 'epoch', epoch_diversity_trend(epoch_dumps[label])))
        rows['diversity_trend'].extend(_trend_rows(label, 'length', diversity_by_length(records, bucket_width)))

        sources = (PREDICTIONS, REFERENCES) if _has_references(records) else (PREDICTIONS,)
        for source in sources:
            p = keyword_in_memory_probability(records, source, stoplist)
            rows['keyword_prob'].append([label, source, p.hits, p.n, p.estimate, p.lower, p.upper])
        p = content_word_probability(records, stoplist)
        rows['content_prob'].append([label, p.hits, p.n, p.estimate, p.lower, p.upper])

        distribution = pos_distribution(records, mem_size)
        for tag in TAG_SET:
            rows['pos_dist'].extend([label, tag, k, v] for k, v in distribution.counts[tag].items())

        sides = [('prediction', [r.pred for r in records])]
        if _has_references(records):
            sides.append(('reference', [r.ref for r in records]))
        for side, texts in sides:
            s = corpus_stats(texts)
            rows['corpus_stats'].append([label, side, s.samples, s.min_len, s.max_len, s.avg_len])

    rows['pairwise_pvalues'] = [row[:6] + [DataFormatter.format_pvalue(row[6]), row[7]]
                                for row in pairwise_tests(corpora, comparisons, metrics, stoplist)]

    written = []
    for name, header in REPORT_FILES.items():
        if name == 'pairwise_pvalues' and not rows[name]:
            continue
        written.append(DataFormatter.write_csv(out_dir / f"{name}.csv", header, rows[name]))
    logger.info(f"Wrote {len(written)} report files for {len(corpora)} corpora to {out_dir}")
    return written


def load_labelled_dumps(specs: Iterable[Tuple[str, Path]], loader) -> Tuple[
        Dict[str, List[PredictionRecord]], Dict[str, Dict[int, List[PredictionRecord]]]]:
    """LABEL=路径 输入；路径为目录时读取其中全部 .jsonl，按 epoch 分组，最后一个 epoch 作为该语料"""
    corpora, epoch_dumps = {}, {}
    for label, path in specs:
        if label in corpora:
            raise InputError(f"duplicate corpus label {label!r}")
        path = Path(path)
        if path.is_dir():
            records = [r for f in sorted(path.glob('*.jsonl')) for r in loader(f)]
            by_epoch: Dict[int, List[PredictionRecord]] = {}
            for record in records:
                by_epoch.setdefault(record.epoch, []).append(record)
            if not by_epoch:
                raise InputError(f"no prediction dumps under {path}")
            epoch_dumps[label] = by_epoch
            corpora[label] = by_epoch[max(by_epoch)]
        else:
            corpora[label] = loader(path)
    return corpora, epoch_dumps
