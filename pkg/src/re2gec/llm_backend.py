"""Completion backends: an OpenAI-style HTTP endpoint and a scripted mock.

The HTTP backend POSTs the prompt as a single user message to
``{endpoint}/chat/completions`` with the decoding parameters attached
(``beam_size``/``top_k``/``top_p``/``sample`` ride along verbatim as
extension fields) and reads ``choices[0].message.content`` back.  A bearer
token is taken from the ``RE2_API_KEY`` environment variable when set.
Transport errors, 429 and 5xx responses are retried with exponential
backoff; other failures raise immediately.

The mock backend resolves prompts through a JSON script file mapping
``sha256(prompt)`` hex digests to response strings.  The reserved
``__fallback__`` key selects behaviour for unscripted prompts:
``"echo_last_line"`` (default) answers with the prompt's last line, which
for the bundled correction templates is the input sentence; ``"none"``
raises instead.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import requests

from .errors import BackendError

API_KEY_ENV = "RE2_API_KEY"
BACKEND_KINDS = ("http", "mock")
FALLBACK_MODES = ("echo_last_line", "none")
FALLBACK_KEY = "__fallback__"


@dataclass(frozen=True)
class DecodingParams:
    sample: bool = False
    temperature: float = 1.0
    beam_size: int = 8
    top_k: int | None = None
    top_p: float | None = None

    def __post_init__(self):
        if self.beam_size < 1:
            raise ValueError(f"beam_size must be >= 1, got {self.beam_size}")
        if self.temperature <= 0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")
        if self.top_k is not None and self.top_k < 1:
            raise ValueError(f"top_k must be >= 1, got {self.top_k}")
        if self.top_p is not None and not (0.0 < self.top_p <= 1.0):
            raise ValueError(f"top_p must lie in (0, 1], got {self.top_p}")


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 3
    base_delay: float = 1.0
    factor: float = 2.0

    def __post_init__(self):
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        if self.base_delay < 0 or self.factor <= 0:
            raise ValueError("base_delay must be >= 0 and factor > 0")


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "mock"
    endpoint: str | None = None
    model: str | None = None
    script_path: str | None = None
    timeout: float = 30.0
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    max_in_flight: int = 4

    def __post_init__(self):
        if self.kind not in BACKEND_KINDS:
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.kind == "http" and not self.endpoint:
            raise ValueError("http backend requires an endpoint")
        if self.kind == "mock" and not self.script_path:
            raise ValueError("mock backend requires a script_path")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")


def prompt_key(text: str) -> str:
    """Stable content hash used as the mock script lookup key."""
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def script_from_pairs(pairs: dict[str, str], fallback: str = "echo_last_line") -> dict:
    """Build a mock script dict from literal prompt -> response pairs."""
    if fallback not in FALLBACK_MODES:
        raise ValueError(f"unknown fallback mode {fallback!r}")
    script = {prompt_key(prompt): response for prompt, response in pairs.items()}
    script[FALLBACK_KEY] = fallback
    return script


_script_cache: dict[tuple[str, float], dict] = {}
_script_lock = threading.Lock()


def _load_script(path: str) -> dict:
    try:
        mtime = os.path.getmtime(path)
    except OSError as exc:
        raise BackendError(f"cannot read mock script {path!r}: {exc}") from None
    key = (str(Path(path).resolve()), mtime)
    with _script_lock:
        script = _script_cache.get(key)
    if script is None:
        try:
            script = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise BackendError(f"cannot read mock script {path!r}: {exc}") from None
        if not isinstance(script, dict):
            raise BackendError(f"mock script {path!r} must be a JSON object")
        with _script_lock:
            _script_cache[key] = script
    return script


def _mock_complete(prompt: str, config: BackendConfig) -> str:
    script = _load_script(config.script_path)
    key = prompt_key(prompt)
    if key in script:
        return script[key]
    fallback = script.get(FALLBACK_KEY, "echo_last_line")
    if fallback == "echo_last_line":
        return prompt.rstrip("\n").rsplit("\n", 1)[-1]
    if fallback == "none":
        raise BackendError(f"mock backend: no scripted response for prompt (key {key[:12]}…)")
    raise BackendError(f"mock script {config.script_path!r}: unknown fallback {fallback!r}")


def _headers() -> dict:
    headers = {"Content-Type": "application/json"}
    api_key = os.environ.get(API_KEY_ENV)
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    return headers


def _post_with_retries(url: str, payload: dict, config: BackendConfig) -> dict:
    policy = config.retry
    last_error = None
    for attempt in range(1, policy.max_attempts + 1):
        try:
            response = requests.post(
                url, json=payload, headers=_headers(), timeout=config.timeout
            )
        except requests.RequestException as exc:
            last_error = f"transport error: {exc}"
        else:
            if 200 <= response.status_code < 300:
                try:
                    return response.json()
                except ValueError as exc:
                    raise BackendError(f"non-JSON response from {url}: {exc}") from None
            body = response.text[:200]
            if response.status_code == 429 or 500 <= response.status_code < 600:
                last_error = f"HTTP {response.status_code}: {body}"
            else:
                raise BackendError(f"HTTP {response.status_code} from {url}: {body}")
        if attempt < policy.max_attempts:
            time.sleep(policy.base_delay * policy.factor ** (attempt - 1))
    raise BackendError(
        f"request to {url} failed after {policy.max_attempts} attempts: {last_error}"
    )


def _http_complete(prompt: str, params: DecodingParams, config: BackendConfig) -> str:
    payload = {
        "model": config.model,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": params.temperature,
        "sample": params.sample,
        "beam_size": params.beam_size,
    }
    if params.top_k is not None:
        payload["top_k"] = params.top_k
    if params.top_p is not None:
        payload["top_p"] = params.top_p
    url = config.endpoint.rstrip("/") + "/chat/completions"
    data = _post_with_retries(url, payload, config)
    try:
        content = data["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError):
        raise BackendError(f"malformed completion response from {url}") from None
    if not isinstance(content, str):
        raise BackendError(f"malformed completion response from {url}")
    return content


def complete(prompt: str, params: DecodingParams, config: BackendConfig) -> str:
    """One completion for one prompt."""
    if config.kind == "mock":
        return _mock_complete(prompt, config)
    return _http_complete(prompt, params, config)


def complete_many(
    prompts: Sequence[str],
    params: DecodingParams,
    config: BackendConfig,
    jobs: int = 1,
) -> list[str]:
    """Completions for many prompts, in input order.

    Runs up to min(jobs, config.max_in_flight) requests concurrently; with
    jobs == 1 this is a plain sequential loop.
    """
    workers = max(1, min(jobs, config.max_in_flight))
    if workers == 1 or len(prompts) <= 1:
        return [complete(p, params, config) for p in prompts]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda p: complete(p, params, config), prompts))


def embed(texts: Sequence[str], config: BackendConfig) -> list[list[float]]:
    """Dense vectors for texts, in input order.

    HTTP backends POST to ``{endpoint}/embeddings``; mock backends resolve
    each text's hash against the script, whose values must be number lists.
    """
    if config.kind == "mock":
        script = _load_script(config.script_path)
        vectors = []
        for text in texts:
            key = prompt_key(text)
            vec = script.get(key)
            if not isinstance(vec, list):
                raise BackendError(
                    f"mock backend: no scripted embedding for text (key {key[:12]}…)"
                )
            vectors.append([float(v) for v in vec])
        return vectors
    url = config.endpoint.rstrip("/") + "/embeddings"
    data = _post_with_retries(url, {"model": config.model, "input": list(texts)}, config)
    try:
        rows = sorted(data["data"], key=lambda row: row["index"])
        vectors = [[float(v) for v in row["embedding"]] for row in rows]
    except (KeyError, TypeError) as exc:
        raise BackendError(f"malformed embedding response from {url}: {exc}") from None
    if len(vectors) != len(texts):
        raise BackendError(
            f"embedding endpoint returned {len(vectors)} vectors for {len(texts)} texts"
        )
    return vectors
