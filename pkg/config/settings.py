import os
from dataclasses import dataclass, field, fields, asdict
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

from wmtrans.errors import InputError

BASE_DIR = Path(__file__).parent.parent


class AppConfig:
    # 数据目录，可由环境变量覆盖
    DATA_DIR = Path(os.getenv('WMT_DATA_DIR', str(BASE_DIR / 'data')))

    # 运行日志
    LOG_DIR = Path(os.getenv('WMT_LOG_DIR', str(BASE_DIR / 'logs')))
    RUN_LOG = LOG_DIR / 'run.log'

    # 默认运行配置
    DEFAULT_SETTINGS = BASE_DIR / 'settings.cfg'

    TOOL_VERSION = '0.3.0'


def _coerce(value: Any, target: type, key: str):
    if isinstance(value, target) and not (target is int and isinstance(value, bool)):
        return value
    text = str(value).strip()
    try:
        if target is bool:
            lowered = text.lower()
            if lowered in ('1', 'true', 'yes', 'on'):
                return True
            if lowered in ('0', 'false', 'no', 'off'):
                return False
            raise ValueError(text)
        if target is int:
            return int(text)
        if target is float:
            return float(text)
    except ValueError:
        raise InputError(f"配置项 {key} 的值不合法: {text!r}")
    return text


class _MappingMixin:
    """从键值映射构建 dataclass，键中的连字符等价于下划线"""

    @classmethod
    def keys(cls):
        return {f.name for f in fields(cls)}

    @classmethod
    def from_mapping(cls, mapping: Optional[Mapping[str, Any]] = None, **overrides):
        merged = {}
        for key, value in {**(mapping or {}), **overrides}.items():
            if value is None:
                continue
            name = key.replace('-', '_')
            if name in cls.keys():
                merged[name] = value
        types = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for name, value in merged.items():
            target = types[name]
            if not isinstance(target, type):
                target = {'int': int, 'float': float, 'bool': bool}.get(str(target), str)
            kwargs[name] = _coerce(value, target, name)
        return cls(**kwargs)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class ModelConfig(_MappingMixin):
    d_model: int = 64
    n_layers: int = 2
    n_heads: int = 4
    d_ff: int = 128
    src_vocab_size: int = 0
    tgt_vocab_size: int = 0
    mem_size: int = 10
    p_nucleus: float = 0.9
    max_len: int = 64
    dropout: float = 0.0
    seed: int = 13
    dtype: str = 'float32'

    @property
    def output_size(self) -> int:
        """输出层宽度 V+2，多出的两列是标记 logits"""
        return self.tgt_vocab_size + 2


@dataclass
class TrainConfig(_MappingMixin):
    epochs: int = 20
    warm: int = 5
    batch_size: int = 16
    lr_peak: float = 1e-3
    warmup_steps: int = 200
    beta1: float = 0.9
    beta2: float = 0.98
    adam_eps: float = 1e-9
    clip_norm: float = 1.0
    seed: int = 13
    dump_every: int = 1
    eval_limit: int = 200


@dataclass
class TokenizerConfig(_MappingMixin):
    mode: str = 'word'
    max_size: int = 8000
    lowercase: bool = False


@dataclass
class RunSettings:
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    tokenizer: TokenizerConfig = field(default_factory=TokenizerConfig)
    source: Optional[str] = None

    @classmethod
    def load(cls, path=None, **overrides):
        """读取键值配置文件，命令行参数优先"""
        mapping = load_settings(path) if path else {}
        clean = {k.replace('-', '_'): v for k, v in overrides.items() if v is not None}
        # seed 同时作用于模型和训练
        return cls(
            model=ModelConfig.from_mapping(mapping, **clean),
            train=TrainConfig.from_mapping(mapping, **clean),
            tokenizer=TokenizerConfig.from_mapping(
                {k[len('tokenizer_'):]: v for k, v in {**mapping, **clean}.items()
                 if k.startswith('tokenizer_')}),
            source=str(path) if path else None,
        )

    def to_dict(self):
        return {
            'model': self.model.to_dict(),
            'train': self.train.to_dict(),
            'tokenizer': self.tokenizer.to_dict(),
        }


def parse_key_values(path, known=None) -> Dict[str, str]:
    """解析 key = value 格式的文本，# 之后为注释"""
    settings = {}
    with open(path, 'r', encoding='utf-8') as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split('#', 1)[0].strip()
            if not line:
                continue
            if '=' not in line:
                raise InputError(f"{path}:{lineno}: 缺少 '=': {raw.rstrip()!r}")
            key, value = (part.strip() for part in line.split('=', 1))
            key = key.replace('-', '_')
            if known is not None and key not in known:
                raise InputError(f"{path}:{lineno}: 未知配置项 {key!r}")
            settings[key] = value
    return settings


def load_settings(path) -> Dict[str, str]:
    """读取运行配置文件"""
    known = ModelConfig.keys() | TrainConfig.keys() | {
        'tokenizer_' + k for k in TokenizerConfig.keys()}
    return parse_key_values(path, known)
