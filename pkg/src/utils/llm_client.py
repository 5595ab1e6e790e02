"""
OpenAI 兼容 chat/completions 客户端
aiohttp 发送预先序列化的请求体，指数退避重试；传输层可注入以便离线测试
"""

import asyncio
import json
import logging
from typing import Awaitable, Callable, Dict, List, Optional, Tuple

import aiohttp

from .errors import ProtocolError, TransportError
from .llm_config_manager import LLMConfig

logger = logging.getLogger(__name__)

# (url, body, headers, timeout) -> (status, payload)
Transport = Callable[[str, bytes, Dict[str, str], float], Awaitable[Tuple[int, bytes]]]

RETRYABLE_STATUS = {408, 429, 500, 502, 503, 504}


class ChatCompletionClient:
    """chat/completions 客户端"""

    def __init__(self, config: LLMConfig, transport: Optional[Transport] = None,
                 sleep: Callable[[float], Awaitable[None]] = asyncio.sleep):
        """
        初始化客户端

        Args:
            config: 大模型配置
            transport: 自定义传输函数，None 时使用 aiohttp
            sleep: 退避等待函数
        """
        self.config = config
        self._transport = transport
        self._sleep = sleep
        self.session: Optional[aiohttp.ClientSession] = None
        self.calls = 0

    async def __aenter__(self):
        """异步上下文管理器入口"""
        return self

    async def __aexit__(self, exc_type, exc_val, exc_tb):
        """异步上下文管理器出口"""
        await self.close()

    async def close(self):
        if self.session:
            await self.session.close()
            self.session = None

    async def _aiohttp_transport(self, url: str, body: bytes, headers: Dict[str, str],
                                 timeout: float) -> Tuple[int, bytes]:
        if not self.session:
            self.session = aiohttp.ClientSession()
        async with self.session.post(url, data=body, headers=headers,
                                     timeout=aiohttp.ClientTimeout(total=timeout)) as response:
            return response.status, await response.read()

    def _headers(self) -> Dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.config.api_key:
            headers["Authorization"] = f"Bearer {self.config.api_key}"
        return headers

    async def post(self, url: str, body: bytes) -> bytes:
        """
        发送请求，首次失败后按 retry_delays 退避重试 retry_attempts 次

        Raises:
            TransportError: 重试耗尽或不可重试的 HTTP 状态
        """
        transport = self._transport or self._aiohttp_transport
        attempts = self.config.retry_attempts + 1
        last_error = "unknown"

        for attempt in range(attempts):
            self.calls += 1
            try:
                status, payload = await transport(url, body, self._headers(), self.config.timeout)
            except (aiohttp.ClientError, asyncio.TimeoutError, ConnectionError, OSError) as e:
                last_error = f"{type(e).__name__}: {e}"
                logger.warning(f"⚠️ 请求失败 (第 {attempt + 1}/{attempts} 次): {last_error}")
            else:
                if status == 200:
                    return payload
                last_error = f"HTTP {status}"
                if status not in RETRYABLE_STATUS:
                    logger.error(f"❌ 补全接口返回不可重试状态: {status}")
                    raise TransportError(f"补全接口错误: {status} - {payload[:200]!r}")
                logger.warning(f"⚠️ 补全接口返回 {status} (第 {attempt + 1}/{attempts} 次)")

            if attempt + 1 < attempts:
                delays = self.config.retry_delays
                await self._sleep(delays[min(attempt, len(delays) - 1)])

        logger.error(f"❌ 补全请求重试耗尽: {last_error}")
        raise TransportError(f"补全请求在 {attempts} 次尝试后失败: {last_error}")

    @staticmethod
    def parse_choices(payload: bytes) -> List[str]:
        """提取 choices[*].message.content"""
        try:
            data = json.loads(payload)
            return [str(choice["message"]["content"]) for choice in data["choices"]]
        except (ValueError, KeyError, TypeError) as e:
            raise ProtocolError(f"补全响应格式错误: {e}") from e

    async def complete(self, url: str, body: bytes) -> List[str]:
        return self.parse_choices(await self.post(url, body))
