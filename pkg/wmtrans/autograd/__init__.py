from .tensor import (
    Tensor,
    add,
    as_tensor,
    cross_entropy,
    dropout,
    embedding,
    is_grad_enabled,
    layer_norm,
    make_node,
    masked_fill,
    matmul,
    mean,
    mul,
    neg,
    no_grad,
    relu,
    reshape,
    reverse_pass,
    softmax,
    sub,
    tanh,
    tensor_sum,
    transpose,
)
from .optim import AdamOptimizer, AdamState, adam_step
from .gradcheck import GradCheckReport, grad_check

__all__ = [
    'Tensor', 'add', 'as_tensor', 'cross_entropy', 'dropout', 'embedding',
    'is_grad_enabled', 'layer_norm', 'make_node', 'masked_fill', 'matmul', 'mean',
    'mul', 'neg', 'no_grad', 'relu', 'reshape', 'reverse_pass', 'softmax', 'sub',
    'tanh', 'tensor_sum', 'transpose',
    'AdamOptimizer', 'AdamState', 'adam_step',
    'GradCheckReport', 'grad_check',
]
