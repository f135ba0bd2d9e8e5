"""
config 包初始化文件
包含运行配置、模型/训练超参数与内容摘要的导出
"""

from dotenv import load_dotenv

# 必须先于 settings 导入，环境变量才会生效
load_dotenv()

from .digest import ContentDigest, bytes_digest, file_digest, tree_digest  # noqa: E402
from .settings import (  # noqa: E402
    AppConfig,
    ModelConfig,
    TrainConfig,
    TokenizerConfig,
    RunSettings,
    load_settings,
    parse_key_values,
)

# 版本信息
__version__ = AppConfig.TOOL_VERSION

__all__ = [
    'ContentDigest',
    'bytes_digest',
    'file_digest',
    'tree_digest',
    'AppConfig',
    'ModelConfig',
    'TrainConfig',
    'TokenizerConfig',
    'RunSettings',
    'load_settings',
    'parse_key_values',
]
