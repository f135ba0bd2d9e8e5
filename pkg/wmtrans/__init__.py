"""
wmtrans 带符号工作记忆的 Transformer 翻译模型
子包: autograd, models, services, validators, utils
"""

__version__ = "0.3.0"
