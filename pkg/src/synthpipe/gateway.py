"""Uniform access to instructor/base/embedding backends.

Two backend kinds: OpenAI-compatible HTTP endpoints, and scripted backends
that replay deterministic tables or registered functions for offline runs.
All concurrency in the pipeline lives here, behind a bounded worker pool.
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import httpx

from .config import resolve_credential

log = logging.getLogger(__name__)


class GatewayError(Exception):
    pass


class TransportError(GatewayError):
    pass


class AuthenticationError(GatewayError):
    pass


class MalformedResponseError(GatewayError):
    pass


class ScriptMissError(GatewayError):
    """A scripted backend has no entry for the requested prompt."""


@dataclass
class CompletionRequest:
    request_index: int
    prompt: str
    temperature: float
    n_samples: int = 1
    max_tokens: int | None = None
    seed: int | None = None


@dataclass
class CompletionResult:
    request_index: int
    completions: list[str]
    usage: dict | None = None


@dataclass
class BatchResult:
    results: list[CompletionResult]
    errors: list[tuple[int, Exception]] = field(default_factory=list)


def prompt_hash(prompt):
    """Stable content hash; whitespace runs collapse so cosmetic template
    tweaks do not silently miss script tables."""
    canonical = " ".join(prompt.split())
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:24]


# In-process scripted backends: name -> fn(prompt, sample_index, greedy) -> str
_SCRIPTS = {}
# name -> fn(text) -> list[float]
_EMBED_SCRIPTS = {}
_FILE_TABLES = {}
_tables_lock = threading.Lock()


def register_script(name, fn):
    _SCRIPTS[name] = fn


def unregister_script(name):
    _SCRIPTS.pop(name, None)


def register_embedding_script(name, fn):
    _EMBED_SCRIPTS[name] = fn


def unregister_embedding_script(name):
    _EMBED_SCRIPTS.pop(name, None)


def load_script_table(path):
    """Line-delimited records: {"prompt_hash":…, "sample_index":…,
    "completion":…}. Cached per path."""
    with _tables_lock:
        if path in _FILE_TABLES:
            return _FILE_TABLES[path]
        table = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                table[(rec["prompt_hash"], int(rec["sample_index"]))] = \
                    rec["completion"]
        _FILE_TABLES[path] = table
        return table


def write_script_table(path, entries):
    """entries: iterable of (prompt, sample_index, completion)."""
    with open(path, "w", encoding="utf-8") as fh:
        for prompt, idx, completion in entries:
            fh.write(json.dumps({
                "prompt_hash": prompt_hash(prompt),
                "sample_index": idx,
                "completion": completion,
            }, sort_keys=True) + "\n")
    with _tables_lock:
        _FILE_TABLES.pop(path, None)


def _scripted_completion(backend, prompt, sample_index, greedy):
    if backend.script_name:
        fn = _SCRIPTS.get(backend.script_name)
        if fn is None:
            raise ScriptMissError(
                f"no script registered under {backend.script_name!r}")
        return fn(prompt, sample_index, greedy)
    if backend.script_path:
        table = load_script_table(backend.script_path)
        key = (prompt_hash(prompt), 0 if greedy else sample_index)
        if key not in table:
            raise ScriptMissError(
                f"script table {backend.script_path} has no entry for "
                f"hash={key[0]} index={key[1]}")
        return table[key]
    raise ScriptMissError(
        "scripted backend needs script_name or script_path")


def _http_post(url, headers, payload, timeout=60.0):
    # Separated out so tests can monkeypatch the wire.
    with httpx.Client(timeout=timeout) as client:
        return client.post(url, headers=headers, json=payload)


def _http_chat(backend, prompt, temperature, n, max_tokens, seed):
    url = backend.endpoint_url.rstrip("/") + "/chat/completions"
    headers = {"Content-Type": "application/json"}
    token = resolve_credential(backend)
    if token:
        headers["Authorization"] = f"Bearer {token}"
    payload = {
        "model": backend.model_name,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": temperature,
        "n": n,
    }
    if max_tokens is not None:
        payload["max_tokens"] = max_tokens
    if seed is not None:
        payload["seed"] = seed

    last_err = None
    for attempt in range(backend.retry_limit):
        try:
            resp = _http_post(url, headers, payload)
        except (httpx.TransportError, OSError) as exc:
            last_err = TransportError(f"request to {url} failed: {exc}")
        else:
            if resp.status_code in (401, 403):
                raise AuthenticationError(
                    f"auth failure ({resp.status_code}) from {url}")
            if resp.status_code >= 400:
                last_err = TransportError(
                    f"HTTP {resp.status_code} from {url}: {resp.text[:200]}")
            else:
                try:
                    body = resp.json()
                    texts = [c["message"]["content"]
                             for c in body["choices"]]
                except (ValueError, KeyError, TypeError) as exc:
                    raise MalformedResponseError(
                        f"unexpected response body from {url}: {exc}")
                usage = body.get("usage")
                return texts, usage
        if attempt + 1 < backend.retry_limit:
            time.sleep(backend.retry_backoff * (2 ** attempt))
    raise last_err


def complete(req, backend):
    """Run one completion request; returns exactly n_samples completions."""
    if req.n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    greedy = req.temperature == 0
    # Greedy decoding is deterministic: fetch once, replicate.
    n_fetch = 1 if greedy else req.n_samples

    if backend.kind == "scripted":
        completions = [
            _scripted_completion(backend, req.prompt, i, greedy)
            for i in range(n_fetch)
        ]
        usage = None
    elif backend.kind == "http_openai_compatible":
        if backend.supports_n:
            completions, usage = _http_chat(
                backend, req.prompt, req.temperature, n_fetch,
                req.max_tokens, req.seed)
            if len(completions) != n_fetch:
                raise MalformedResponseError(
                    f"asked for {n_fetch} choices, got {len(completions)}")
        else:
            completions = []
            usage = None
            for i in range(n_fetch):
                seed = None if req.seed is None else req.seed + i
                texts, usage = _http_chat(
                    backend, req.prompt, req.temperature, 1,
                    req.max_tokens, seed)
                completions.append(texts[0])
    else:
        raise GatewayError(f"unknown backend kind {backend.kind!r}")

    if greedy and req.n_samples > 1:
        completions = completions * req.n_samples
    return CompletionResult(request_index=req.request_index,
                            completions=completions, usage=usage)


def complete_many(reqs, backend):
    """Run a batch with at most backend.max_in_flight outstanding requests.

    Results come back sorted by request_index; failures are collected
    per-request rather than aborting the batch.
    """
    indices = [r.request_index for r in reqs]
    if len(set(indices)) != len(indices):
        raise ValueError("request_index values must be unique")
    if not reqs:
        return BatchResult(results=[])

    results = []
    errors = []
    workers = max(1, backend.max_in_flight)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {pool.submit(complete, r, backend): r for r in reqs}
        for fut, req in futures.items():
            try:
                results.append(fut.result())
            except Exception as exc:  # noqa: BLE001 - reported per request
                errors.append((req.request_index, exc))
    results.sort(key=lambda r: r.request_index)
    errors.sort(key=lambda e: e[0])
    return BatchResult(results=results, errors=errors)


def embed(texts, backend):
    """Embed texts; one fixed-dimension vector per input."""
    if backend.role != "embedding":
        raise GatewayError("embed requires a backend with role=embedding")
    if not texts:
        return []
    if backend.kind == "scripted":
        fn = _EMBED_SCRIPTS.get(backend.script_name)
        if fn is None:
            raise ScriptMissError(
                f"no embedding script registered under "
                f"{backend.script_name!r}")
        return [fn(t) for t in texts]
    if backend.kind == "http_openai_compatible":
        url = backend.endpoint_url.rstrip("/") + "/embeddings"
        headers = {"Content-Type": "application/json"}
        token = resolve_credential(backend)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        payload = {"model": backend.model_name, "input": list(texts)}
        last_err = None
        for attempt in range(backend.retry_limit):
            try:
                resp = _http_post(url, headers, payload)
            except (httpx.TransportError, OSError) as exc:
                last_err = TransportError(f"request to {url} failed: {exc}")
            else:
                if resp.status_code in (401, 403):
                    raise AuthenticationError(
                        f"auth failure ({resp.status_code}) from {url}")
                if resp.status_code >= 400:
                    last_err = TransportError(
                        f"HTTP {resp.status_code} from {url}")
                else:
                    try:
                        body = resp.json()
                        data = sorted(body["data"], key=lambda d: d["index"])
                        return [d["embedding"] for d in data]
                    except (ValueError, KeyError, TypeError) as exc:
                        raise MalformedResponseError(
                            f"unexpected embeddings body from {url}: {exc}")
            if attempt + 1 < backend.retry_limit:
                time.sleep(backend.retry_backoff * (2 ** attempt))
        raise last_err
    raise GatewayError(f"unknown backend kind {backend.kind!r}")
