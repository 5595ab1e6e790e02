"""
工具模块
提供配置管理、大模型配置、结果文件管理、日志与异常定义
"""

from .config_manager import ConfigManager, RunConfig, get_config_manager
from .errors import ClaverError
from .llm_config_manager import LLMConfig, LLMConfigManager
from .logging_setup import setup_logging

__all__ = [
    'ConfigManager',
    'RunConfig',
    'get_config_manager',
    'ClaverError',
    'LLMConfig',
    'LLMConfigManager',
    'setup_logging',
]
