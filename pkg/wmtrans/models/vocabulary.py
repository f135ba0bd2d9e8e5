"""
词表与分词
保留 id: pad=0, start=1, end=2, unk=3。
子词模式下非末尾片段带 '@@' 后缀，例如 set@@ up。
"""

import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple

from ..errors import InputError

logger = logging.getLogger(__name__)

PAD_ID, START_ID, END_ID, UNK_ID = 0, 1, 2, 3
RESERVED_TOKENS = ('<pad>', '<s>', '</s>', '<unk>')
SUBWORD_MARKER = '@@'
WORD_MODE, SUBWORD_MODE = 'word', 'subword'

_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)


def tokenize_words(text: str, lowercase: bool = False) -> List[str]:
    """按空白和标点切分"""
    if lowercase:
        text = text.lower()
    return _TOKEN_RE.findall(text)


@dataclass(frozen=True)
class Vocabulary:
    id_to_token: Tuple[str, ...]
    frequencies: Tuple[int, ...]
    mode: str = WORD_MODE
    merges: Tuple[Tuple[str, str], ...] = ()
    lowercase: bool = False
    token_to_id: Dict[str, int] = field(init=False, repr=False, compare=False)
    _segments: Dict[str, Tuple[str, ...]] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if tuple(self.id_to_token[:len(RESERVED_TOKENS)]) != RESERVED_TOKENS:
            raise InputError("vocabulary must start with the reserved tokens")
        table = {}
        for idx, token in enumerate(self.id_to_token):
            if token in table:
                raise InputError(f"duplicate vocabulary token {token!r}")
            table[token] = idx
        object.__setattr__(self, 'token_to_id', table)
        object.__setattr__(self, '_segments', {})

    @property
    def size(self) -> int:
        return len(self.id_to_token)

    def __len__(self):
        return self.size

    def token(self, idx: int) -> str:
        if not 0 <= idx < self.size:
            raise InputError(f"token id {idx} out of range [0, {self.size})")
        return self.id_to_token[idx]

    def tokenize(self, text: str) -> List[str]:
        """文本切成词表单位（词或子词片段）"""
        words = tokenize_words(text, self.lowercase)
        if self.mode != SUBWORD_MODE:
            return words
        pieces = []
        for word in words:
            pieces.extend(self._segment(word))
        return pieces

    def _segment(self, word: str) -> Tuple[str, ...]:
        cached = self._segments.get(word)
        if cached is None:
            symbols = _apply_merges(list(word), self.merges)
            cached = tuple(s + SUBWORD_MARKER for s in symbols[:-1]) + (symbols[-1],)
            self._segments[word] = cached
        return cached

    def save(self, path):
        """写成 id<TAB>token<TAB>frequency，头部注释记录模式与合并规则"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8', newline='\n') as f:
            f.write(f"#mode\t{self.mode}\n")
            f.write(f"#lowercase\t{int(self.lowercase)}\n")
            for left, right in self.merges:
                f.write(f"#merge\t{left}\t{right}\n")
            for idx, (token, freq) in enumerate(zip(self.id_to_token, self.frequencies)):
                f.write(f"{idx}\t{token}\t{freq}\n")
        return path

    @classmethod
    def load(cls, path) -> 'Vocabulary':
        mode, lowercase, merges, tokens, freqs = WORD_MODE, False, [], [], []
        with open(path, 'r', encoding='utf-8') as f:
            for lineno, raw in enumerate(f, start=1):
                line = raw.rstrip('\n')
                if not line:
                    continue
                parts = line.split('\t')
                if parts[0] == '#mode':
                    mode = parts[1]
                elif parts[0] == '#lowercase':
                    lowercase = parts[1] == '1'
                elif parts[0] == '#merge':
                    merges.append((parts[1], parts[2]))
                else:
                    if len(parts) != 3 or not parts[0].isdigit():
                        raise InputError(f"{path}:{lineno}: malformed vocabulary row")
                    if int(parts[0]) != len(tokens):
                        raise InputError(f"{path}:{lineno}: ids must be contiguous from 0")
                    tokens.append(parts[1])
                    freqs.append(int(parts[2]))
        return cls(tuple(tokens), tuple(freqs), mode, tuple(merges), lowercase)


def _apply_merges(symbols: List[str], merges: Sequence[Tuple[str, str]]) -> List[str]:
    for left, right in merges:
        if len(symbols) < 2:
            break
        merged, i = [], 0
        while i < len(symbols):
            if i + 1 < len(symbols) and symbols[i] == left and symbols[i + 1] == right:
                merged.append(left + right)
                i += 2
            else:
                merged.append(symbols[i])
                i += 1
        symbols = merged
    return symbols


def _learn_merges(word_counts: Counter, max_merges: int) -> List[Tuple[str, str]]:
    """贪心学习相邻对合并，频次相同取字典序最小的对"""
    segmented = {word: list(word) for word in word_counts}
    merges = []
    for _ in range(max_merges):
        pairs = Counter()
        for word, symbols in segmented.items():
            for pair in zip(symbols, symbols[1:]):
                pairs[pair] += word_counts[word]
        if not pairs:
            break
        best = min(pairs.items(), key=lambda item: (-item[1], item[0]))[0]
        merges.append(best)
        for word, symbols in segmented.items():
            segmented[word] = _apply_merges(symbols, [best])
    return merges


def build_vocab(lines: Iterable[str], mode: str = WORD_MODE, max_size: int = 8000,
                lowercase: bool = False) -> Vocabulary:
    """从语料构建词表

    word 模式按频次降序取前 max_size 个词；subword 模式学习至多 max_size 条合并规则。
    同频按字符串排序，结果确定。
    """
    lines = [line for line in lines if line is not None]
    words = Counter()
    for line in lines:
        words.update(tokenize_words(line, lowercase))
    if not words:
        raise InputError("cannot build a vocabulary from an empty corpus")
    if mode not in (WORD_MODE, SUBWORD_MODE):
        raise InputError(f"unknown tokenizer mode {mode!r}")

    merges: List[Tuple[str, str]] = []
    if mode == WORD_MODE:
        counts = words
    else:
        merges = _learn_merges(words, max_size)
        counts = Counter()
        for word, freq in words.items():
            symbols = _apply_merges(list(word), merges)
            for i, symbol in enumerate(symbols):
                counts[symbol + SUBWORD_MARKER if i < len(symbols) - 1 else symbol] += freq
            # 单字符兜底，未见过的词也能切出已知片段
            for ch in word:
                counts.setdefault(ch, 0)
                counts.setdefault(ch + SUBWORD_MARKER, 0)

    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    if mode == WORD_MODE:
        ranked = ranked[:max_size]
    ranked = [(tok, freq) for tok, freq in ranked if tok not in RESERVED_TOKENS]
    tokens = RESERVED_TOKENS + tuple(tok for tok, _ in ranked)
    freqs = (0,) * len(RESERVED_TOKENS) + tuple(freq for _, freq in ranked)
    vocab = Vocabulary(tokens, freqs, mode, tuple(merges), lowercase)
    logger.info(f"Built {mode} vocabulary with {vocab.size} entries and {len(merges)} merges")
    return vocab


def encode(text: str, vocab: Vocabulary) -> List[int]:
    """未登录单位映射为 unk，不产生其他保留 id"""
    return [vocab.token_to_id.get(piece, UNK_ID) for piece in vocab.tokenize(text)]


def decode(ids: Iterable[int], vocab: Vocabulary) -> str:
    """丢弃保留 id，按 '@@' 约定拼回子词"""
    pieces = []
    for idx in ids:
        token = vocab.token(int(idx))
        if int(idx) < len(RESERVED_TOKENS):
            continue
        pieces.append(token)
    return join_pieces(pieces)


def join_pieces(pieces: Sequence[str]) -> str:
    text = ' '.join(pieces)
    text = text.replace(SUBWORD_MARKER + ' ', '')
    if text.endswith(SUBWORD_MARKER):
        text = text[:-len(SUBWORD_MARKER)]
    return text


def merge_subword_pieces(pieces: Sequence[str]) -> List[Tuple[str, bool]]:
    """把记忆中的子词片段合成词，返回 (词, 是否完整)"""
    words, buffer = [], ''
    for piece in pieces:
        if piece.endswith(SUBWORD_MARKER):
            buffer += piece[:-len(SUBWORD_MARKER)]
            continue
        words.append((buffer + piece, True))
        buffer = ''
    if buffer:
        words.append((buffer, False))
    return words
