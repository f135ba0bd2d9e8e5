import logging
from dataclasses import dataclass
from typing import Dict, Mapping, Optional

import numpy as np

from ..errors import ContractError, DimensionError
from .tensor import Tensor

logger = logging.getLogger(__name__)


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.98
    eps: float = 1e-9

    @classmethod
    def for_param(cls, param: Tensor, lr=1e-3, beta1=0.9, beta2=0.98, eps=1e-9):
        return cls(np.zeros_like(param.data), np.zeros_like(param.data), 0, lr, beta1, beta2, eps)


def adam_step(param: Tensor, grad: Optional[np.ndarray], state: AdamState):
    """带偏差修正的 Adam 更新，原地修改参数"""
    if grad is None:
        raise ContractError(f"missing gradient for parameter {param.name or ''}".strip())
    grad = np.asarray(grad)
    if grad.shape != param.shape or state.m.shape != param.shape:
        raise DimensionError(f"adam shapes disagree: param {param.shape}, grad {grad.shape}, state {state.m.shape}")
    state.step += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = state.m / (1.0 - state.beta1 ** state.step)
    v_hat = state.v / (1.0 - state.beta2 ** state.step)
    update = state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    param.data -= update.astype(param.dtype)


class AdamOptimizer:
    """按参数名维护 Adam 状态"""

    def __init__(self, params: Mapping[str, Tensor], lr=1e-3, beta1=0.9, beta2=0.98, eps=1e-9):
        self.params = params
        self.states: Dict[str, AdamState] = {
            name: AdamState.for_param(p, lr, beta1, beta2, eps) for name, p in params.items()
        }

    def set_lr(self, lr: float):
        for state in self.states.values():
            state.lr = lr

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def clip_grad_norm(self, max_norm: float) -> float:
        """全局梯度范数裁剪，返回裁剪前的范数"""
        total = float(np.sqrt(sum(float((p.grad.astype(np.float64) ** 2).sum())
                                  for p in self.params.values() if p.grad is not None)))
        if max_norm > 0 and total > max_norm:
            scale = max_norm / (total + 1e-12)
            for p in self.params.values():
                if p.grad is not None:
                    p.grad = p.grad * scale
        return total

    def step(self):
        for name, p in self.params.items():
            adam_step(p, p.grad, self.states[name])

    def state_arrays(self) -> Dict[str, np.ndarray]:
        """导出为命名数组，写入检查点"""
        arrays = {}
        for name, state in self.states.items():
            arrays[f"adam.m.{name}"] = state.m
            arrays[f"adam.v.{name}"] = state.v
            arrays[f"adam.step.{name}"] = np.asarray([state.step], dtype=np.int64)
        return arrays

    def load_state_arrays(self, arrays: Mapping[str, np.ndarray]):
        for name, state in self.states.items():
            key = f"adam.m.{name}"
            if key not in arrays:
                logger.warning(f"No optimizer state for {name}, starting fresh")
                continue
            state.m = np.array(arrays[key], dtype=state.m.dtype)
            state.v = np.array(arrays[f"adam.v.{name}"], dtype=state.v.dtype)
            state.step = int(arrays[f"adam.step.{name}"][0])
