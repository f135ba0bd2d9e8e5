"""
解码器自注意力掩码
True 表示允许注意，形状 [query, key]
"""

from typing import Sequence

import numpy as np

from ..errors import ContractError, InputError
from .records import MEMORY_FLAG, TARGET_FLAG


def make_look_ahead_mask(length: int) -> np.ndarray:
    """位置 t 只能看到 <= t 的位置"""
    if length < 1:
        raise InputError(f"mask length must be >= 1, got {length}")
    return np.tril(np.ones((length, length), dtype=bool))


def make_memory_ablation_mask(flags: Sequence[int]) -> np.ndarray:
    """在因果掩码基础上屏蔽所有记忆位置，记忆位置本身照常生成"""
    flags = np.asarray(flags, dtype=np.int64).reshape(-1)
    if flags.size == 0:
        raise InputError("flags must be non-empty")
    if np.any((flags != MEMORY_FLAG) & (flags != TARGET_FLAG)):
        raise ContractError("flags must be 0 or 1")
    return make_look_ahead_mask(flags.size) & (flags == TARGET_FLAG)[None, :]
