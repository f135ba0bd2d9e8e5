import logging
from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np

from ..errors import NumericError
from .tensor import Tensor, no_grad, reverse_pass

logger = logging.getLogger(__name__)


@dataclass
class GradCheckReport:
    max_rel_error: float
    worst_param: Optional[str]
    worst_index: Optional[int]
    checked: int
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tol


def _named(params) -> Mapping[str, Tensor]:
    if isinstance(params, Mapping):
        return params
    return {p.name or f"param{i}": p for i, p in enumerate(params)}


def _evaluate(build_loss) -> float:
    with no_grad():
        value = build_loss()
    value = float(np.asarray(value.data).reshape(-1)[0])
    if not np.isfinite(value):
        raise NumericError("loss is not finite during finite differences")
    return value


def grad_check(build_loss: Callable[[], Tensor],
               params: Union[Mapping[str, Tensor], Sequence[Tensor]],
               tol: float = 1e-4,
               h: float = 1e-5,
               floor: float = 1e-6,
               max_per_param: Optional[int] = None,
               seed: int = 0) -> GradCheckReport:
    """比较 reverse_pass 梯度与中心差分

    相对误差取 |a - n| / max(|a|, |n|, floor)，floor 避免两者都接近零时放大噪声。
    max_per_param 限制每个参数抽查的元素个数。
    """
    named = _named(params)
    for p in named.values():
        p.grad = None
    loss = build_loss()
    reverse_pass(loss)
    analytic = {name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
                for name, p in named.items()}

    rng = np.random.default_rng(seed)
    worst, worst_name, worst_idx, checked = 0.0, None, None, 0
    for name, p in named.items():
        flat = p.data.reshape(-1)
        indices = np.arange(flat.size)
        if max_per_param is not None and flat.size > max_per_param:
            indices = np.sort(rng.choice(flat.size, size=max_per_param, replace=False))
        a_flat = analytic[name].reshape(-1)
        for idx in indices:
            original = flat[idx]
            flat[idx] = original + h
            plus = _evaluate(build_loss)
            flat[idx] = original - h
            minus = _evaluate(build_loss)
            flat[idx] = original
            numeric = (plus - minus) / (2.0 * h)
            a = float(a_flat[idx])
            err = abs(a - numeric) / max(abs(a), abs(numeric), floor)
            checked += 1
            if err > worst:
                worst, worst_name, worst_idx = err, name, int(idx)
    report = GradCheckReport(worst, worst_name, worst_idx, checked, tol)
    if not report.passed:
        logger.warning(f"Gradient check failed: {worst:.3e} at {worst_name}[{worst_idx}]")
    return report
