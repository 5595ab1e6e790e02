"""
大模型配置管理器
统一管理解释性提示词生成所用的 OpenAI 兼容端点、模型与采样参数；
环境变量 CLAVER_LLM_ENDPOINT / CLAVER_LLM_KEY / CLAVER_LLM_MODEL 覆盖配置文件
"""

import os
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import yaml
from dotenv import load_dotenv

logger = logging.getLogger(__name__)

ENV_ENDPOINT = "CLAVER_LLM_ENDPOINT"
ENV_KEY = "CLAVER_LLM_KEY"
ENV_MODEL = "CLAVER_LLM_MODEL"


@dataclass
class LLMConfig:
    """大模型配置数据类"""
    endpoint: str = "http://localhost:8000/v1"
    model: str = "llama-3-8b-instruct"
    api_key: Optional[str] = None
    temperature: float = 0.90
    top_p: float = 0.95
    max_tokens: int = 160
    timeout: float = 30.0
    retry_attempts: int = 3
    retry_delays: Tuple[float, ...] = field(default_factory=lambda: (1.0, 2.0, 4.0))
    max_in_flight: int = 4
    offline: bool = True
    cache_path: str = "outputs/prompt_cache.jsonl"

    def to_dict(self, redact: bool = True) -> Dict[str, Any]:
        """报告回显用；默认隐藏 API 密钥"""
        return {
            "endpoint": self.endpoint,
            "model": self.model,
            "api_key": ("***" if self.api_key else None) if redact else self.api_key,
            "temperature": self.temperature,
            "top_p": self.top_p,
            "max_tokens": self.max_tokens,
            "timeout": self.timeout,
            "retry_attempts": self.retry_attempts,
            "retry_delays": list(self.retry_delays),
            "max_in_flight": self.max_in_flight,
            "offline": self.offline,
            "cache_path": self.cache_path,
        }


class LLMConfigManager:
    """大模型配置管理器"""

    def __init__(self, config_path: str = "config/config.yaml", config: Optional[Dict[str, Any]] = None,
                 load_env_file: bool = True):
        """
        初始化配置管理器

        Args:
            config_path: 配置文件路径
            config: 直接给定的完整配置字典（优先于文件）
            load_env_file: 是否读取 .env
        """
        if load_env_file:
            load_dotenv(override=False)
        self.config_path = config_path
        self.config = config if config is not None else self._load_config()
        self.llm_config = self.config.get('llm', {}) or {}
        logger.info("🔧 大模型配置管理器初始化完成")

    def _load_config(self) -> Dict[str, Any]:
        """加载配置文件"""
        try:
            with open(self.config_path, 'r', encoding='utf-8') as f:
                config = yaml.safe_load(f) or {}
            logger.info(f"✅ 配置文件加载成功: {self.config_path}")
            return config
        except FileNotFoundError:
            logger.warning(f"⚠️ 配置文件不存在: {self.config_path}，使用默认大模型配置")
            return {}

    def get_llm_config(self) -> LLMConfig:
        """
        获取大模型配置

        Returns:
            LLMConfig: 配置文件 <- 环境变量 合并后的配置
        """
        section = dict(self.llm_config)
        defaults = LLMConfig()

        endpoint = os.getenv(ENV_ENDPOINT) or section.get('endpoint', defaults.endpoint)
        model = os.getenv(ENV_MODEL) or section.get('model', defaults.model)
        api_key = os.getenv(ENV_KEY) or section.get('api_key')
        if not api_key:
            logger.debug(f"环境变量 {ENV_KEY} 未设置，请求将不携带鉴权头")

        return LLMConfig(
            endpoint=endpoint,
            model=model,
            api_key=api_key,
            temperature=float(section.get('temperature', defaults.temperature)),
            top_p=float(section.get('top_p', defaults.top_p)),
            max_tokens=int(section.get('max_tokens', defaults.max_tokens)),
            timeout=float(section.get('timeout', defaults.timeout)),
            retry_attempts=int(section.get('retry_attempts', defaults.retry_attempts)),
            retry_delays=tuple(float(d) for d in section.get('retry_delays', defaults.retry_delays)),
            max_in_flight=int(section.get('max_in_flight', defaults.max_in_flight)),
            offline=bool(section.get('offline', defaults.offline)),
            cache_path=section.get('cache_path', defaults.cache_path),
        )
