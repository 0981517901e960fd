"""Optional client for OpenAI-compatible completion endpoints."""
from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence

import httpx

from ..errors import ConfigError, GraphREError

logger = logging.getLogger(__name__)


class EndpointError(GraphREError):
    pass


@dataclass
class EndpointConfig:
    base_url: str
    model: str
    token_env: str = "GRAPHRE_API_TOKEN"
    api: str = "completions"  # "completions" | "chat"
    max_concurrent: int = 4
    timeout: float = 60.0
    max_retries: int = 5
    backoff: float = 1.0
    max_tokens: int = 1024
    temperature: float = 0.0

    def __post_init__(self):
        if self.api not in ("completions", "chat"):
            raise ConfigError(f"api must be 'completions' or 'chat', got {self.api!r}")
        if self.max_concurrent < 1 or self.timeout <= 0 or self.max_retries < 0:
            raise ConfigError("max_concurrent >= 1, timeout > 0 and max_retries >= 0 required")


class CompletionClient:
    """Sends prompts with bounded concurrency, retrying on HTTP 429.

    Results come back in input order regardless of completion order.
    """

    def __init__(self, cfg: EndpointConfig, transport: Optional[httpx.BaseTransport] = None,
                 sleep=time.sleep):
        self.cfg = cfg
        headers = {}
        token = os.environ.get(cfg.token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        self._client = httpx.Client(base_url=cfg.base_url, headers=headers, timeout=cfg.timeout,
                                    transport=transport)
        self._sleep = sleep

    def close(self) -> None:
        self._client.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _payload(self, prompt: str) -> tuple:
        cfg = self.cfg
        body = {"model": cfg.model, "max_tokens": cfg.max_tokens, "temperature": cfg.temperature}
        if cfg.api == "chat":
            body["messages"] = [{"role": "user", "content": prompt}]
            return "/chat/completions", body
        body["prompt"] = prompt
        return "/completions", body

    def complete(self, prompt: str) -> str:
        url, body = self._payload(prompt)
        for attempt in range(self.cfg.max_retries + 1):
            resp = self._client.post(url, json=body)
            if resp.status_code == 429 and attempt < self.cfg.max_retries:
                wait = resp.headers.get("retry-after")
                delay = float(wait) if wait else self.cfg.backoff * 2 ** attempt
                logger.info("rate limited; retrying in %.1fs", delay)
                self._sleep(delay)
                continue
            if resp.status_code >= 400:
                raise EndpointError(f"endpoint returned HTTP {resp.status_code}: {resp.text[:200]}")
            choice = resp.json()["choices"][0]
            return choice["message"]["content"] if self.cfg.api == "chat" else choice["text"]
        raise EndpointError("still rate limited after retries")

    def complete_all(self, prompts: Sequence[str]) -> List[str]:
        with ThreadPoolExecutor(max_workers=self.cfg.max_concurrent) as pool:
            return list(pool.map(self.complete, prompts))
