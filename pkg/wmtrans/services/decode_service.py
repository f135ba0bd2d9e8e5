"""
工作记忆路由

训练时按记忆容量与目标序列进度在模型输出的标记上做两种覆盖:
记忆已满时标记 0 改为 1；目标已用完而记忆未满时标记 1 改为 0 并重新采样记忆 token。
推理时 token 与标记原样写回解码器输入。
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..autograd import Tensor, is_grad_enabled, no_grad
from ..errors import InputError
from ..models.masks import make_look_ahead_mask, make_memory_ablation_mask
from ..models.records import MEMORY_FLAG, TARGET_FLAG, DecodeStep, RoutedSequence
from ..models.vocabulary import END_ID, PAD_ID, START_ID

logger = logging.getLogger(__name__)

SUPPRESSED_IDS = (PAD_ID, START_ID)
TRAIN_MODE, INFER_MODE = 'train', 'infer'
_SUPPRESS_VALUE = -1e9
_MASS_TOLERANCE = 1e-12


def _probabilities(logits: np.ndarray) -> np.ndarray:
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max()
    e = np.exp(shifted)
    return e / e.sum()


def nucleus_support(token_logits: Sequence[float], p: float) -> Tuple[np.ndarray, np.ndarray]:
    """按概率降序（同概率取小 id）的最短前缀，累计质量 >= p，返回 (ids, 重新归一化后的概率)"""
    if not 0.0 < p <= 1.0:
        raise InputError(f"nucleus mass must be in (0, 1], got {p}")
    probs = _probabilities(token_logits)
    ids = np.arange(probs.size)
    order = np.lexsort((ids, -probs))
    cumulative = np.cumsum(probs[order])
    cut = int(np.searchsorted(cumulative, p - _MASS_TOLERANCE)) + 1
    support = order[:min(cut, probs.size)]
    kept = probs[support]
    return support, kept / kept.sum()


def nucleus_sample(token_logits: Sequence[float], p: float, rng: np.random.Generator) -> int:
    support, kept = nucleus_support(token_logits, p)
    if support.size == 1:
        # 退化情况同样消耗一次随机数
        rng.random()
        return int(support[0])
    index = int(np.searchsorted(np.cumsum(kept), rng.random(), side='right'))
    return int(support[min(index, support.size - 1)])


def _token_logits(row: np.ndarray, vocab_size: int) -> np.ndarray:
    tokens = np.array(row[:vocab_size], dtype=np.float64)
    for idx in SUPPRESSED_IDS:
        if idx < vocab_size:
            tokens[idx] = _SUPPRESS_VALUE
    return tokens


def best_path_token(row: Sequence[float]) -> int:
    row = np.asarray(row)
    return int(np.argmax(_token_logits(row, row.size - 2)))


def select_flag_and_token(logit_row: Sequence[float], mode: str, rng: np.random.Generator,
                          p_nucleus: float) -> DecodeStep:
    """标记取两列 argmax；标记 1 取最优 token，标记 0 做核采样，rng 只在标记 0 分支消耗"""
    if mode not in (TRAIN_MODE, INFER_MODE):
        raise InputError(f"unknown decoding mode {mode!r}")
    row = np.asarray(logit_row, dtype=np.float64).reshape(-1)
    if row.size < 3:
        raise InputError(f"logit row of width {row.size} has no token columns")
    vocab_size = row.size - 2
    flag_logits = (float(row[vocab_size]), float(row[vocab_size + 1]))
    flag = int(np.argmax(row[vocab_size:]))
    tokens = _token_logits(row, vocab_size)
    if flag == TARGET_FLAG:
        token = int(np.argmax(tokens))
    else:
        token = nucleus_sample(tokens, p_nucleus, rng)
    return DecodeStep(token, flag, row[:vocab_size], flag_logits, False)


@dataclass
class TrainingPass:
    routed: RoutedSequence
    logits: Tensor
    # 第 t 行参与损失当且仅当第 t+1 位是目标 token
    include: np.ndarray
    labels: np.ndarray
    steps: List[DecodeStep] = field(default_factory=list)


def _check_real_target(y_real: Sequence[int]):
    if len(y_real) < 2 or y_real[0] != START_ID or y_real[-1] != END_ID:
        raise InputError("real target must start with <s> and end with </s>")


def loss_alignment(routed: RoutedSequence) -> Tuple[np.ndarray, np.ndarray]:
    """由路由序列得到 (include, labels)，最后一行没有后继，恒不参与"""
    flags = np.asarray(routed.flags, dtype=np.int64)
    tokens = np.asarray(routed.tokens, dtype=np.int64)
    include = np.zeros(len(routed), dtype=bool)
    labels = np.full(len(routed), PAD_ID, dtype=np.int64)
    include[:-1] = flags[1:] == TARGET_FLAG
    labels[:-1] = tokens[1:]
    return include, labels


def training_forward_pass(model, enc, y_real: Sequence[int], rng: np.random.Generator,
                          mem_size: Optional[int] = None, p_nucleus: Optional[float] = None) -> TrainingPass:
    """教师强制下的路由前向

    路由在 no_grad 下逐步完成，随后对整条路由序列做一次带梯度的前向；
    由于因果掩码，整段前向第 t 行与逐步解码时的第 t 步 logits 相同。
    """
    y_real = [int(t) for t in y_real]
    _check_real_target(y_real)
    config = model.config
    mem_size = config.mem_size if mem_size is None else mem_size
    p_nucleus = config.p_nucleus if p_nucleus is None else p_nucleus
    total = len(y_real) + mem_size
    if total > config.max_len:
        raise InputError(f"routed length {total} exceeds max_len {config.max_len}")

    routed = RoutedSequence([START_ID], [TARGET_FLAG])
    steps, consumed = [], 0
    with no_grad():
        while len(routed) < total:
            row = model.decode(routed.tokens, routed.flags, enc).data[-1]
            step = select_flag_and_token(row, TRAIN_MODE, rng, p_nucleus)
            if step.flag == MEMORY_FLAG and routed.memory_count >= mem_size:
                step.flag, step.forced = TARGET_FLAG, True
            elif step.flag == TARGET_FLAG and consumed + 1 == len(y_real):
                step.flag, step.forced = MEMORY_FLAG, True
                step.token = nucleus_sample(_token_logits(np.asarray(row), len(row) - 2), p_nucleus, rng)
            if step.flag == MEMORY_FLAG:
                routed.append(step.token, MEMORY_FLAG)
            else:
                consumed += 1
                step.token = y_real[consumed]
                routed.append(step.token, TARGET_FLAG)
            steps.append(step)

    logits = model.decode(routed.tokens, routed.flags, enc, rng=rng if is_grad_enabled() else None)
    include, labels = loss_alignment(routed)
    return TrainingPass(routed, logits, include, labels, steps)


def generate(model, enc, rng: np.random.Generator, ablate_memory: bool = False,
             mem_size: Optional[int] = None, p_nucleus: Optional[float] = None,
             max_len: Optional[int] = None, trace: Optional[List[DecodeStep]] = None) -> RoutedSequence:
    """自回归生成，直到产生标记为 1 的 </s> 或达到 max_len"""
    config = model.config
    mem_size = config.mem_size if mem_size is None else mem_size
    p_nucleus = config.p_nucleus if p_nucleus is None else p_nucleus
    max_len = config.max_len if max_len is None else min(max_len, config.max_len)

    routed = RoutedSequence([START_ID], [TARGET_FLAG])
    with no_grad():
        while len(routed) < max_len:
            mask = make_memory_ablation_mask(routed.flags) if ablate_memory else make_look_ahead_mask(len(routed))
            row = model.decode(routed.tokens, routed.flags, enc, self_mask=mask).data[-1]
            step = select_flag_and_token(row, INFER_MODE, rng, p_nucleus)
            if step.flag == MEMORY_FLAG and routed.memory_count >= mem_size:
                step.flag, step.forced = TARGET_FLAG, True
                step.token = best_path_token(row)
            routed.append(step.token, step.flag)
            if trace is not None:
                trace.append(step)
            if step.flag == TARGET_FLAG and step.token == END_ID:
                break
    return routed


def split_routed(seq: RoutedSequence) -> Tuple[List[int], List[int]]:
    """按标记保序拆分为 (目标 token, 记忆 token)"""
    targets = [t for t, f in zip(seq.tokens, seq.flags) if f == TARGET_FLAG]
    memory = [t for t, f in zip(seq.tokens, seq.flags) if f == MEMORY_FLAG]
    return targets, memory


def merge_routed(targets: Sequence[int], memory: Sequence[int], flags: Sequence[int]) -> RoutedSequence:
    """split_routed 的逆操作"""
    t_iter, m_iter = iter(targets), iter(memory)
    tokens = [next(t_iter) if f == TARGET_FLAG else next(m_iter) for f in flags]
    return RoutedSequence(tokens, list(flags))
