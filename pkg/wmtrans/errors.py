"""
wmtrans 错误类型
全部继承内置异常，调用方可以按内置类型捕获
"""


class InputError(ValueError):
    """输入数据或配置不合法"""


class DimensionError(ValueError):
    """张量形状不匹配"""


class ContractError(RuntimeError):
    """调用前置条件被违反"""


class NumericError(ArithmeticError):
    """出现 NaN/Inf"""
