"""
平行语料读写、去重与长度统计
"""

import json
import logging
from pathlib import Path
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

from ..errors import InputError
from ..models.records import CorpusStats, ParallelPair, PredictionRecord
from ..models.vocabulary import tokenize_words

logger = logging.getLogger(__name__)

TSV, JSONL = 'tsv', 'jsonl'


def _infer_format(path: Path, fmt: Optional[str]) -> str:
    if fmt:
        if fmt not in (TSV, JSONL):
            raise InputError(f"unknown corpus format {fmt!r}")
        return fmt
    return JSONL if path.suffix.lower() in ('.jsonl', '.json') else TSV


def _pair_from_tsv(parts: List[str], path, lineno: int) -> ParallelPair:
    if len(parts) < 2 or len(parts) > 3 or not parts[0].strip() or not parts[1].strip():
        raise InputError(f"{path}:{lineno}: expected 'source<TAB>target', got {len(parts)} column(s)")
    tag = parts[2].strip() if len(parts) == 3 else ''
    return ParallelPair(parts[0].strip(), parts[1].strip(), tag)


def _pair_from_json(line: str, path, lineno: int) -> ParallelPair:
    try:
        data = json.loads(line)
    except json.JSONDecodeError as e:
        raise InputError(f"{path}:{lineno}: invalid JSON ({e.msg})")
    if not isinstance(data, dict) or not str(data.get('src', '')).strip() or not str(data.get('tgt', '')).strip():
        raise InputError(f"{path}:{lineno}: record needs non-empty 'src' and 'tgt'")
    pos = data.get('pos')
    return ParallelPair(str(data['src']).strip(), str(data['tgt']).strip(), str(data.get('tag', '')),
                        tuple(pos) if pos is not None else None)


def load_parallel(path, fmt: Optional[str] = None) -> List[ParallelPair]:
    """按文件顺序读取，跳过空行"""
    path = Path(path)
    fmt = _infer_format(path, fmt)
    pairs = []
    with open(path, 'r', encoding='utf-8') as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.rstrip('\n').rstrip('\r')
            if not line.strip():
                continue
            if fmt == TSV:
                pairs.append(_pair_from_tsv(line.split('\t'), path, lineno))
            else:
                pairs.append(_pair_from_json(line, path, lineno))
    logger.info(f"Loaded {len(pairs)} pairs from {path}")
    return pairs


def save_parallel(pairs: Iterable[ParallelPair], path, fmt: Optional[str] = None) -> Path:
    path = Path(path)
    fmt = _infer_format(path, fmt)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        for pair in pairs:
            if fmt == TSV:
                columns = [pair.source, pair.reference] + ([pair.tag] if pair.tag else [])
                f.write('\t'.join(columns) + '\n')
            else:
                data = {'src': pair.source, 'tgt': pair.reference}
                if pair.tag:
                    data['tag'] = pair.tag
                if pair.pos is not None:
                    data['pos'] = list(pair.pos)
                f.write(json.dumps(data, ensure_ascii=False, sort_keys=True) + '\n')
    return path


def dedup(pairs: Iterable[ParallelPair]) -> List[ParallelPair]:
    """按 (source, reference) 精确去重，保留首次出现"""
    seen, kept = set(), []
    for pair in pairs:
        if pair.key() in seen:
            continue
        seen.add(pair.key())
        kept.append(pair)
    return kept


def corpus_stats(texts: Sequence[str], tokenizer: Optional[Callable[[str], Sequence[str]]] = None) -> CorpusStats:
    tokenizer = tokenizer or tokenize_words
    lengths = [len(tokenizer(t)) for t in texts]
    if not lengths:
        return CorpusStats(0, 0, 0, 0.0)
    return CorpusStats(len(lengths), min(lengths), max(lengths), sum(lengths) / len(lengths))


def length_bounds_of(texts: Iterable[str], tokenizer=None) -> Tuple[int, int]:
    """以某个语料的最短与最长样本作为其他语料的截断界"""
    stats = corpus_stats(list(texts), tokenizer)
    if stats.samples == 0:
        raise InputError("cannot derive length bounds from an empty corpus")
    return stats.min_len, stats.max_len


def record_length_bounds(records: Sequence[PredictionRecord]) -> Tuple[int, int]:
    """预测与参考两侧共同的界"""
    texts = [r.pred for r in records] + [r.ref for r in records if r.ref is not None]
    return length_bounds_of(texts)
