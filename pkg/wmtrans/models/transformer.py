"""
编码器与带工作记忆的解码器

解码器输入是 token 嵌入加上标记嵌入 (0=记忆, 1=目标) 与正弦位置编码，
每层依次为带掩码自注意力、交叉注意力、前馈网络，均为残差加 LN。
输出层宽度 V+2，第 V 列是标记 0 的 logit，第 V+1 列是标记 1 的 logit。
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from config.settings import ModelConfig
from ..autograd import (
    Tensor,
    add,
    dropout,
    embedding,
    layer_norm,
    masked_fill,
    matmul,
    mul,
    relu,
    reshape,
    softmax,
    transpose,
)
from ..errors import ContractError, DimensionError, InputError
from .masks import make_look_ahead_mask
from .records import MEMORY_FLAG, TARGET_FLAG
from .vocabulary import PAD_ID

logger = logging.getLogger(__name__)


def positional_encoding(length: int, d_model: int) -> np.ndarray:
    """PE[pos, 2i] = sin(pos / 10000^(2i/d)), PE[pos, 2i+1] = cos(同一角度)"""
    positions = np.arange(length, dtype=np.float64)[:, None]
    even = np.arange(0, d_model, 2, dtype=np.float64)
    angles = positions / np.power(10000.0, even / d_model)
    table = np.zeros((length, d_model), dtype=np.float64)
    table[:, 0::2] = np.sin(angles)
    table[:, 1::2] = np.cos(angles[:, :d_model // 2])
    return table


@dataclass
class EncoderOutput:
    activation: Tensor
    # 源端非 pad 位置
    key_mask: np.ndarray

    @property
    def length(self) -> int:
        return self.activation.shape[0]


@dataclass
class LayerActivation:
    a_self: np.ndarray
    a_cross: np.ndarray
    d_out: np.ndarray


@dataclass
class ActivationTrace:
    layers: List[LayerActivation] = field(default_factory=list)


def _affine(x: Tensor, params: Mapping[str, Tensor], prefix: str) -> Tensor:
    return add(matmul(x, params[f"{prefix}.w"]), params[f"{prefix}.b"])


def _split_heads(x: Tensor, n_heads: int) -> Tensor:
    length, width = x.shape
    return transpose(reshape(x, (length, n_heads, width // n_heads)), (1, 0, 2))


def multi_head_attention(query: Tensor, memory: Tensor, allowed: np.ndarray,
                         params: Mapping[str, Tensor], prefix: str, n_heads: int) -> Tensor:
    """MHA(Q, K=V=memory)，allowed 形状 [len_q, len_k]"""
    len_q, width = query.shape
    len_k = memory.shape[0]
    if width % n_heads:
        raise DimensionError(f"d_model {width} not divisible by {n_heads} heads")
    allowed = np.asarray(allowed, dtype=bool)
    if allowed.shape != (len_q, len_k):
        raise ContractError(f"attention mask {allowed.shape} does not match ({len_q}, {len_k})")
    head_dim = width // n_heads
    q = _split_heads(_affine(query, params, f"{prefix}.q"), n_heads)
    k = transpose(reshape(_affine(memory, params, f"{prefix}.k"), (len_k, n_heads, head_dim)), (1, 2, 0))
    v = _split_heads(_affine(memory, params, f"{prefix}.v"), n_heads)
    scores = mul(matmul(q, k), 1.0 / math.sqrt(head_dim))
    weights = softmax(masked_fill(scores, np.broadcast_to(allowed, scores.shape)), axis=-1)
    context = reshape(transpose(matmul(weights, v), (1, 0, 2)), (len_q, width))
    return _affine(context, params, f"{prefix}.o")


def feed_forward(x: Tensor, params: Mapping[str, Tensor], prefix: str) -> Tensor:
    return _affine(relu(_affine(x, params, f"{prefix}.ff1")), params, f"{prefix}.ff2")


def _norm(x: Tensor, params: Mapping[str, Tensor], prefix: str) -> Tensor:
    return layer_norm(x, params[f"{prefix}.gamma"], params[f"{prefix}.beta"])


def embed_tokens_with_flags(ids: Sequence[int], flags: Sequence[int], token_table: Tensor,
                            flag_table: Tensor, pos_table: np.ndarray) -> Tensor:
    """out[t] = emb[ids[t]]·√d + flag_emb[flags[t]] + pos[t]"""
    ids = np.asarray(ids, dtype=np.int64).reshape(-1)
    flags = np.asarray(flags, dtype=np.int64).reshape(-1)
    if ids.shape != flags.shape:
        raise ContractError(f"{ids.size} ids but {flags.size} flags")
    if np.any((flags != MEMORY_FLAG) & (flags != TARGET_FLAG)):
        raise ContractError("flags must be 0 or 1")
    if flag_table.shape[0] != 2:
        raise ContractError(f"flag table must have exactly two rows, got {flag_table.shape[0]}")
    if ids.size > pos_table.shape[0]:
        raise InputError(f"sequence length {ids.size} exceeds max_len {pos_table.shape[0]}")
    scale = math.sqrt(token_table.shape[1])
    tokens = mul(embedding(token_table, ids), scale)
    positions = pos_table[:ids.size].astype(token_table.dtype)
    return add(add(tokens, embedding(flag_table, flags)), positions)


def encoder_forward(src_ids: Sequence[int], config: ModelConfig, params: Mapping[str, Tensor],
                    pos_table: np.ndarray, rng: Optional[np.random.Generator] = None) -> EncoderOutput:
    """N 层标准编码器，pad 位置不被注意"""
    ids = np.asarray(src_ids, dtype=np.int64).reshape(-1)
    if ids.size == 0:
        raise InputError("source sequence is empty")
    if ids.size > config.max_len:
        raise InputError(f"source length {ids.size} exceeds max_len {config.max_len}")
    table = params['src_embed']
    x = add(mul(embedding(table, ids), math.sqrt(config.d_model)),
            pos_table[:ids.size].astype(table.dtype))
    x = dropout(x, config.dropout, rng)
    key_mask = ids != PAD_ID
    allowed = np.broadcast_to(key_mask[None, :], (ids.size, ids.size))
    for i in range(config.n_layers):
        prefix = f"enc.{i}"
        attended = multi_head_attention(x, x, allowed, params, f"{prefix}.self", config.n_heads)
        x = _norm(add(x, dropout(attended, config.dropout, rng)), params, f"{prefix}.ln1")
        x = _norm(add(x, dropout(feed_forward(x, params, prefix), config.dropout, rng)), params, f"{prefix}.ln2")
    return EncoderOutput(x, key_mask)


def decoder_layer_forward(y: Tensor, enc: EncoderOutput, mask_self: np.ndarray, mask_cross: np.ndarray,
                          params: Mapping[str, Tensor], prefix: str, n_heads: int,
                          rate: float = 0.0, rng: Optional[np.random.Generator] = None):
    """A_self = LN(Y + MHA(Y,Y,Y)), A_cross = LN(A_self + MHA(A_self,E,E)), D_out = LN(A_cross + FFN(A_cross))"""
    if y.shape[1] != enc.activation.shape[1]:
        raise DimensionError(f"decoder width {y.shape[1]} != encoder width {enc.activation.shape[1]}")
    a_self = _norm(add(y, dropout(multi_head_attention(y, y, mask_self, params, f"{prefix}.self", n_heads),
                                  rate, rng)), params, f"{prefix}.ln1")
    a_cross = _norm(add(a_self, dropout(multi_head_attention(a_self, enc.activation, mask_cross, params,
                                                             f"{prefix}.cross", n_heads), rate, rng)),
                    params, f"{prefix}.ln2")
    d_out = _norm(add(a_cross, dropout(feed_forward(a_cross, params, prefix), rate, rng)), params, f"{prefix}.ln3")
    return d_out, LayerActivation(a_self.data, a_cross.data, d_out.data)


def project_output(d_out: Tensor, params: Mapping[str, Tensor]) -> Tensor:
    """仿射映射到 V+2 列"""
    return _affine(d_out, params, 'out')


def _attention_param_shapes(prefix: str, d: int) -> Dict[str, tuple]:
    shapes = {}
    for part in ('q', 'k', 'v', 'o'):
        shapes[f"{prefix}.{part}.w"] = (d, d)
        shapes[f"{prefix}.{part}.b"] = (d,)
    return shapes


def param_shapes(config: ModelConfig) -> Dict[str, tuple]:
    """参数名到形状，顺序固定"""
    d, ff = config.d_model, config.d_ff
    shapes = {
        'src_embed': (config.src_vocab_size, d),
        'tgt_embed': (config.tgt_vocab_size, d),
        'flag_embed': (2, d),
    }

    def block(prefix, with_cross):
        shapes.update(_attention_param_shapes(f"{prefix}.self", d))
        norms = ['ln1', 'ln2']
        if with_cross:
            shapes.update(_attention_param_shapes(f"{prefix}.cross", d))
            norms.append('ln3')
        shapes.update({f"{prefix}.ff1.w": (d, ff), f"{prefix}.ff1.b": (ff,),
                       f"{prefix}.ff2.w": (ff, d), f"{prefix}.ff2.b": (d,)})
        for norm in norms:
            shapes[f"{prefix}.{norm}.gamma"] = (d,)
            shapes[f"{prefix}.{norm}.beta"] = (d,)

    for i in range(config.n_layers):
        block(f"enc.{i}", False)
    for i in range(config.n_layers):
        block(f"dec.{i}", True)
    shapes['out.w'] = (d, config.output_size)
    shapes['out.b'] = (config.output_size,)
    return shapes


def init_params(config: ModelConfig, rng: np.random.Generator) -> Dict[str, Tensor]:
    params = {}
    for name, shape in param_shapes(config).items():
        if name.endswith('.gamma'):
            data = np.ones(shape)
        elif name.endswith('.b') or name.endswith('.beta'):
            data = np.zeros(shape)
        elif name.endswith('_embed'):
            data = rng.normal(0.0, config.d_model ** -0.5, size=shape)
        else:
            data = rng.normal(0.0, shape[0] ** -0.5, size=shape)
        params[name] = Tensor(data, requires_grad=True, name=name, dtype=config.dtype)
    return params


class WorkingMemoryTransformer:
    """编码器-解码器模型，解码器每步消费 (token, 标记) 对"""

    def __init__(self, config: ModelConfig, params: Optional[Dict[str, Tensor]] = None,
                 rng: Optional[np.random.Generator] = None):
        if config.src_vocab_size <= 0 or config.tgt_vocab_size <= 0:
            raise InputError("vocabulary sizes must be set before building the model")
        self.config = config
        if params is None:
            params = init_params(config, rng if rng is not None else np.random.default_rng(config.seed))
        expected = param_shapes(config)
        for name, shape in expected.items():
            if name not in params:
                raise ContractError(f"missing parameter {name}")
            if params[name].shape != tuple(shape):
                raise DimensionError(f"parameter {name} has shape {params[name].shape}, expected {shape}")
        self.params = params
        self.pos_table = positional_encoding(config.max_len, config.d_model)

    @property
    def vocab_size(self) -> int:
        return self.config.tgt_vocab_size

    def parameters(self) -> Dict[str, Tensor]:
        return self.params

    def num_parameters(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    def encode(self, src_ids: Sequence[int], rng: Optional[np.random.Generator] = None) -> EncoderOutput:
        return encoder_forward(src_ids, self.config, self.params, self.pos_table, rng)

    def decode(self, ids: Sequence[int], flags: Sequence[int], enc: EncoderOutput,
               self_mask: Optional[np.ndarray] = None, trace: Optional[ActivationTrace] = None,
               rng: Optional[np.random.Generator] = None) -> Tensor:
        """返回每个位置的 V+2 维 logits，第 t 行预测第 t+1 个位置"""
        length = len(ids)
        if length > self.config.max_len:
            raise InputError(f"decoder length {length} exceeds max_len {self.config.max_len}")
        mask_self = make_look_ahead_mask(length) if self_mask is None else np.asarray(self_mask, dtype=bool)
        mask_cross = np.broadcast_to(enc.key_mask[None, :], (length, enc.length))
        y = embed_tokens_with_flags(ids, flags, self.params['tgt_embed'], self.params['flag_embed'], self.pos_table)
        y = dropout(y, self.config.dropout, rng)
        for i in range(self.config.n_layers):
            y, activation = decoder_layer_forward(y, enc, mask_self, mask_cross, self.params, f"dec.{i}",
                                                  self.config.n_heads, self.config.dropout, rng)
            if trace is not None:
                trace.layers.append(activation)
        return project_output(y, self.params)
