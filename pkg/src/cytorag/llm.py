"""Client adapter for the external interpretation endpoint.

The engine never hosts a model; it sends the rendered prompt to a
chat-completions-style JSON endpoint and returns the text verbatim.
A stub client with the same interface echoes a digest of the prompt so
the whole pipeline runs offline and deterministically in tests.

Transient failures (connection errors, timeouts, 5xx) are retried with
exponential backoff up to ``max_retries``; a request is never re-sent
after a success.
"""

from __future__ import annotations

import hashlib
import threading
import time
from dataclasses import dataclass, replace

import httpx

from .errors import EndpointError, EndpointUnreachableError, LlmTimeoutError
from .prompting import PromptBundle


@dataclass(frozen=True)
class LlmClientConfig:
    """Endpoint coordinates and retry policy.

    ``temperature`` defaults to 0 so repeated runs of the same prompt are
    as reproducible as the endpoint allows.
    """

    endpoint: str = ""
    model: str = ""
    timeout_s: float = 30.0
    max_retries: int = 2
    temperature: float = 0.0
    backoff_base_s: float = 0.25
    max_in_flight: int = 4
    stub: bool = True

    def __post_init__(self) -> None:
        if self.timeout_s <= 0:
            raise ValueError(f"timeout must be positive, got {self.timeout_s}")
        if self.max_retries < 0:
            raise ValueError(f"max retries must be >= 0, got {self.max_retries}")
        if self.max_in_flight < 1:
            raise ValueError(f"in-flight limit must be >= 1, got {self.max_in_flight}")


@dataclass(frozen=True)
class LlmResponse:
    text: str
    latency_s: float
    status: int
    attempts: int


class StubLlmClient:
    """Offline stand-in: deterministic echo of the bundle's identity."""

    def __init__(self, config: LlmClientConfig | None = None):
        self.config = config or LlmClientConfig(stub=True)

    def interpret(self, bundle: PromptBundle) -> LlmResponse:
        digest = hashlib.sha256(bundle.rendered_text.encode("utf-8")).hexdigest()[:16]
        text = (
            f"[stub interpretation] case={bundle.query_case_id} "
            f"examples={bundle.example_count} template={bundle.template_hash} "
            f"prompt_digest={digest}"
        )
        return LlmResponse(text=text, latency_s=0.0, status=200, attempts=1)

    def close(self) -> None:
        pass


class HttpLlmClient:
    """Adapter for a chat-completions-style JSON endpoint.

    Sends ``{model, temperature, messages:[{role: user, content: <prompt>}]}``
    and reads ``choices[0].message.content`` back. Concurrent calls are
    bounded by the configured in-flight limit.
    """

    def __init__(self, config: LlmClientConfig, transport: httpx.BaseTransport | None = None):
        if not config.endpoint:
            raise ValueError("http llm client requires an endpoint URL")
        self.config = config
        self._gate = threading.BoundedSemaphore(config.max_in_flight)
        self._client = httpx.Client(timeout=config.timeout_s, transport=transport)

    def close(self) -> None:
        self._client.close()

    def _request_body(self, bundle: PromptBundle) -> dict:
        return {
            "model": self.config.model,
            "temperature": self.config.temperature,
            "messages": [{"role": "user", "content": bundle.rendered_text}],
        }

    def interpret(self, bundle: PromptBundle) -> LlmResponse:
        body = self._request_body(bundle)
        attempts = self.config.max_retries + 1
        started = time.monotonic()
        last_error: Exception | None = None
        with self._gate:
            for attempt in range(1, attempts + 1):
                try:
                    response = self._client.post(self.config.endpoint, json=body)
                except httpx.TimeoutException as exc:
                    last_error = LlmTimeoutError(
                        f"endpoint did not answer within {self.config.timeout_s}s "
                        f"({attempt} attempt(s))",
                        attempts=attempt,
                    )
                    last_error.__cause__ = exc
                except httpx.TransportError as exc:
                    last_error = EndpointUnreachableError(
                        f"cannot reach {self.config.endpoint}: {exc}", attempts=attempt
                    )
                    last_error.__cause__ = exc
                else:
                    if response.status_code >= 500:
                        last_error = EndpointError(
                            f"endpoint returned status {response.status_code}",
                            status=response.status_code,
                            body=response.text[:2000],
                            attempts=attempt,
                        )
                    elif response.status_code >= 400:
                        raise EndpointError(
                            f"endpoint rejected the request with status {response.status_code}",
                            status=response.status_code,
                            body=response.text[:2000],
                            attempts=attempt,
                        )
                    else:
                        return LlmResponse(
                            text=self._extract_text(response),
                            latency_s=time.monotonic() - started,
                            status=response.status_code,
                            attempts=attempt,
                        )
                if attempt < attempts:
                    time.sleep(self.config.backoff_base_s * (2 ** (attempt - 1)))
        assert last_error is not None
        raise last_error

    @staticmethod
    def _extract_text(response: httpx.Response) -> str:
        try:
            payload = response.json()
            return str(payload["choices"][0]["message"]["content"])
        except (ValueError, KeyError, IndexError, TypeError):
            # Non-conforming but successful response: pass the body through.
            return response.text


def make_client(
    config: LlmClientConfig, transport: httpx.BaseTransport | None = None
) -> StubLlmClient | HttpLlmClient:
    if config.stub:
        return StubLlmClient(config)
    return HttpLlmClient(config, transport=transport)


def llm_interpret(
    bundle: PromptBundle,
    config: LlmClientConfig,
    transport: httpx.BaseTransport | None = None,
) -> LlmResponse:
    """One-shot convenience wrapper around :func:`make_client`."""
    client = make_client(config, transport=transport)
    try:
        return client.interpret(bundle)
    finally:
        client.close()


def config_with_overrides(config: LlmClientConfig, **overrides) -> LlmClientConfig:
    return replace(config, **{k: v for k, v in overrides.items() if v is not None})
