from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

import httpx

from .errors import BackendError, BatchError

TOKEN_ENV = "STATEFULREC_API_TOKEN"

T = TypeVar("T")
R = TypeVar("R")


def headers() -> dict[str, str]:
    h = {"Content-Type": "application/json", "Accept": "application/json"}
    token = os.environ.get(TOKEN_ENV)
    if token:
        h["Authorization"] = f"Bearer {token}"
    return h


def post_json(client: httpx.Client, url: str, payload: dict, timeout_ms: int) -> dict:
    try:
        resp = client.post(url, json=payload, headers=headers(), timeout=timeout_ms / 1000.0)
    except httpx.TimeoutException:
        raise BackendError(f"request to {url} timed out after {timeout_ms} ms") from None
    except httpx.HTTPError as exc:
        raise BackendError(f"request to {url} failed: {exc}") from None
    if not 200 <= resp.status_code < 300:
        raise BackendError(f"{url} answered {resp.reason_phrase}", status=resp.status_code)
    try:
        body = resp.json()
    except ValueError:
        raise BackendError(f"{url} returned a non-JSON body", status=resp.status_code) from None
    if not isinstance(body, dict):
        raise BackendError(f"{url} returned JSON that is not an object", status=resp.status_code)
    return body


def bounded_map(fn: Callable[[T], R], items: Sequence[T], max_parallel: int) -> list[R]:
    """Apply ``fn`` to every item with at most ``max_parallel`` in flight.

    Results come back in input order. Failures are collected rather than
    short-circuiting, then raised together as a BatchError.
    """
    results: list = [None] * len(items)
    failures: dict[int, Exception] = {}

    def run(i: int) -> None:
        try:
            results[i] = fn(items[i])
        except Exception as exc:  # collected per index, re-raised below
            failures[i] = exc

    if max_parallel <= 1 or len(items) <= 1:
        for i in range(len(items)):
            run(i)
    else:
        with ThreadPoolExecutor(max_workers=max_parallel) as pool:
            list(pool.map(run, range(len(items))))
    if failures:
        raise BatchError(failures, results)
    return results
