import math
from typing import Callable, List, Optional, Sequence

from ..errors import InputError
from ..models.records import ParallelPair, PredictionRecord
from ..models.vocabulary import tokenize_words

Tokenizer = Callable[[str], Sequence[str]]


class LengthBoundsValidator:
    def __init__(self, lo: float = 0, hi: float = math.inf, tokenizer: Optional[Tokenizer] = None):
        if lo > hi:
            raise InputError(f"length bounds reversed: [{lo}, {hi}]")
        self.lo = lo
        self.hi = hi
        self.tokenizer = tokenizer or tokenize_words

    def length(self, text: str) -> int:
        return len(self.tokenizer(text))

    def validate(self, text: str, label: str = 'text'):
        """检查分词后长度是否落在 [lo, hi]"""
        errors = []
        length = self.length(text)
        if length < self.lo:
            errors.append(f"{label} 长度 {length} 小于下界 {self.lo}")
        if length > self.hi:
            errors.append(f"{label} 长度 {length} 超过上界 {self.hi}")
        return {
            "valid": len(errors) == 0,
            "errors": errors
        }


def filter_by_length_bounds(pairs: Sequence[ParallelPair], lo: float, hi: float,
                            tokenizer: Optional[Tokenizer] = None) -> List[ParallelPair]:
    """保留参考译文长度在 [lo, hi] 内的样本"""
    validator = LengthBoundsValidator(lo, hi, tokenizer)
    return [p for p in pairs if validator.validate(p.reference, 'reference')["valid"]]


def filter_records_by_length_bounds(records: Sequence[PredictionRecord], lo: float, hi: float,
                                    tokenizer: Optional[Tokenizer] = None) -> List[PredictionRecord]:
    """预测与参考都要落在界内；没有参考的记录只看预测"""
    validator = LengthBoundsValidator(lo, hi, tokenizer)
    kept = []
    for record in records:
        if not validator.validate(record.pred, 'prediction')["valid"]:
            continue
        if record.ref is not None and not validator.validate(record.ref, 'reference')["valid"]:
            continue
        kept.append(record)
    return kept
