"""Small retrying JSON-over-HTTP helper shared by the backend clients.

Retries transport errors and 5xx responses with exponential backoff;
4xx responses are treated as permanent and fail immediately.
"""

from __future__ import annotations

import time
from typing import Any, Mapping

import httpx

from .errors import BackendError


def post_json(
    client: httpx.Client,
    url: str,
    payload: Mapping[str, Any],
    *,
    headers: Mapping[str, str] | None = None,
    timeout: float = 30.0,
    max_retries: int = 3,
    backoff_base: float = 0.1,
) -> dict[str, Any]:
    """POST a JSON payload, returning the decoded JSON body.

    ``max_retries`` counts retries after the first attempt, so the request
    is sent at most ``max_retries + 1`` times.
    """
    last_status: int | None = None
    last_error: Exception | None = None
    for attempt in range(max_retries + 1):
        if attempt:
            time.sleep(backoff_base * (2 ** (attempt - 1)))
        try:
            resp = client.post(url, json=dict(payload), headers=headers, timeout=timeout)
        except httpx.TransportError as e:
            last_error = e
            continue
        last_status = resp.status_code
        if resp.status_code >= 500:
            last_error = None
            continue
        if resp.status_code != 200:
            raise BackendError(
                f"backend returned HTTP {resp.status_code}",
                attempts=attempt + 1,
                last_status=resp.status_code,
            )
        try:
            body = resp.json()
        except ValueError:
            raise BackendError(
                "backend returned a non-JSON body",
                attempts=attempt + 1,
                last_status=resp.status_code,
            ) from None
        if not isinstance(body, dict):
            raise BackendError(
                "backend returned a non-object JSON body",
                attempts=attempt + 1,
                last_status=resp.status_code,
            )
        return body
    detail = f": {last_error}" if last_error is not None else ""
    raise BackendError(
        f"backend kept failing after {max_retries + 1} attempts{detail}",
        attempts=max_retries + 1,
        last_status=last_status,
    )
