"""Minimal JSON-over-HTTP POST helper shared by the service clients."""

from __future__ import annotations

import json
import urllib.error
import urllib.request

from .errors import ServiceError


def http_post_json(url: str, payload: dict, headers: dict | None = None, timeout_s: float = 60.0) -> dict:
    """POST `payload` as JSON and decode the JSON response.

    HTTP error statuses raise ServiceError; transport failures surface as the
    underlying OSError for the caller to classify.
    """
    body = json.dumps(payload).encode("utf-8")
    request = urllib.request.Request(url, data=body, method="POST")
    request.add_header("Content-Type", "application/json")
    for key, value in (headers or {}).items():
        request.add_header(key, value)
    try:
        with urllib.request.urlopen(request, timeout=timeout_s) as response:
            return json.loads(response.read().decode("utf-8"))
    except urllib.error.HTTPError as exc:
        raise ServiceError(exc.code, exc.read().decode("utf-8", "replace")) from None
