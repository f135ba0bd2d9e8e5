"""
领域数据结构
语料、路由序列、预测记录以及分析结果
"""

import json
from dataclasses import dataclass, field, asdict
from typing import Dict, List, Optional, Sequence, Tuple

from ..errors import ContractError, InputError

TARGET_FLAG = 1
MEMORY_FLAG = 0


@dataclass(frozen=True)
class ParallelPair:
    source: str
    reference: str
    tag: str = ''
    pos: Optional[Tuple[str, ...]] = None

    def key(self) -> Tuple[str, str]:
        return self.source, self.reference


@dataclass
class CorpusStats:
    samples: int
    min_len: int
    max_len: int
    avg_len: float


@dataclass
class RoutedSequence:
    tokens: List[int]
    flags: List[int]
    memory_count: int = field(init=False)

    def __post_init__(self):
        self.tokens = [int(t) for t in self.tokens]
        self.flags = [int(f) for f in self.flags]
        if len(self.tokens) != len(self.flags):
            raise ContractError(f"{len(self.tokens)} tokens but {len(self.flags)} flags")
        if any(f not in (MEMORY_FLAG, TARGET_FLAG) for f in self.flags):
            raise ContractError("flags must be 0 or 1")
        self.memory_count = self.flags.count(MEMORY_FLAG)

    def __len__(self):
        return len(self.tokens)

    def append(self, token: int, flag: int):
        if flag not in (MEMORY_FLAG, TARGET_FLAG):
            raise ContractError(f"invalid flag {flag}")
        self.tokens.append(int(token))
        self.flags.append(int(flag))
        if flag == MEMORY_FLAG:
            self.memory_count += 1

    def check(self, mem_size: int):
        """检查首位标记与每个前缀的记忆容量"""
        if self.flags and self.flags[0] != TARGET_FLAG:
            raise ContractError("first flag must mark a target token")
        seen = 0
        for flag in self.flags:
            seen += flag == MEMORY_FLAG
            if seen > mem_size:
                raise ContractError(f"memory count exceeds capacity {mem_size}")


@dataclass
class DecodeStep:
    token: int
    flag: int
    token_logits: Sequence[float]
    flag_logits: Tuple[float, float]
    forced: bool = False

    def to_json(self) -> str:
        return json.dumps({
            'token': int(self.token),
            'flag': int(self.flag),
            'flag_logits': [float(x) for x in self.flag_logits],
            'token_argmax': int(max(range(len(self.token_logits)), key=lambda i: (self.token_logits[i], -i))),
            'forced': bool(self.forced),
        }, sort_keys=True)


@dataclass
class PredictionRecord:
    src: str
    pred: str
    mem: List[str]
    flags: List[int]
    tag: str
    epoch: int
    seed: int
    ref: Optional[str] = None

    def __post_init__(self):
        if self.flags.count(MEMORY_FLAG) != len(self.mem):
            raise InputError(
                f"record has {len(self.mem)} memory tokens but {self.flags.count(MEMORY_FLAG)} zero flags")

    def to_json(self) -> str:
        payload = asdict(self)
        if payload['ref'] is None:
            payload.pop('ref')
        return json.dumps(payload, ensure_ascii=False, sort_keys=True)

    @classmethod
    def from_dict(cls, data: Dict) -> 'PredictionRecord':
        missing = [k for k in ('src', 'pred', 'mem', 'flags', 'tag', 'epoch', 'seed') if k not in data]
        if missing:
            raise InputError(f"prediction record missing fields: {', '.join(missing)}")
        return cls(
            src=str(data['src']),
            pred=str(data['pred']),
            mem=[str(m) for m in data['mem']],
            flags=[int(f) for f in data['flags']],
            tag=str(data['tag']),
            epoch=int(data['epoch']),
            seed=int(data['seed']),
            ref=data.get('ref'),
        )


@dataclass
class ScorePair:
    bleu4: float
    meteor_lite: float
    n_samples: int


@dataclass(frozen=True)
class ScoredKeyword:
    phrase: Tuple[str, ...]
    score: float

    @property
    def text(self) -> str:
        return ' '.join(self.phrase)


@dataclass
class ProbabilityWithCI:
    estimate: float
    lower: float
    upper: float
    n: int
    hits: int = 0


@dataclass
class RankSumResult:
    statistic: float
    p_value: float
    method: str


@dataclass
class DiversityStats:
    counts: List[int]
    histogram: Dict[int, int]
    mean: float
    slope: Optional[float] = None


@dataclass
class TrendFit:
    xs: List[float]
    means: List[float]
    slope: float
    intercept: float
    defined: bool = True
    sizes: List[int] = field(default_factory=list)


@dataclass
class PosDistribution:
    # tag -> {出现次数: 记录数}
    counts: Dict[str, Dict[int, int]]


@dataclass
class RunManifest:
    command: str
    config_path: Optional[str]
    seed: int
    inputs: Dict[str, str]
    outputs: List[str]
    tool_version: str
    input_hash: str
    settings: Dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True, ensure_ascii=False)
