"""Prompt assembly and the chat-completion client.

All three generation modes share one template skeleton so that their only
differences are content: the zero-shot prompt carries the target program
alone, the naive prompt adds exactly one retrieved example pair, and the
context prompt additionally includes that example's structural change summary
and its stored optimization rationale.

The client runs in one of three modes: `live` (straight HTTP), `record` (HTTP
plus cassette capture), and `replay` (cassette only, zero network activity).
Cassette keys hash (model, system_text, user_text), so recordings are portable
across runs and machines.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable

from ._http import http_post_json
from .cfg_diff import CfgDiff, render_diff
from .corpus import CodePair
from .errors import ModeArgumentMismatch, NoCodeBlockInResponse, ReplayMiss, ServiceError

logger = logging.getLogger(__name__)

LLM_BASE_ENV = "AUTOPATCH_LLM_BASE"
LLM_KEY_ENV = "AUTOPATCH_LLM_KEY"
LLM_MODEL_ENV = "AUTOPATCH_LLM_MODEL"

EMPTY_DIFF_RATIONALE = "no structural changes detected"


class PromptMode(Enum):
    ZERO_SHOT = "zero_shot"
    NAIVE = "naive"
    CONTEXT = "context"


@dataclass(frozen=True)
class PromptParts:
    target_code: str
    diff_text: str | None = None
    rationale: str | None = None
    example: CodePair | None = None


@dataclass(frozen=True)
class Prompt:
    mode: PromptMode
    system_text: str
    user_text: str
    parts: PromptParts
    target_id: str


@dataclass(frozen=True)
class GeneratedPatch:
    code: str
    raw_response: str
    mode: PromptMode
    target_id: str


OPTIMIZER_SYSTEM_TEXT = (
    "You are an expert C++ performance engineer. Rewrite the target program so it "
    "runs faster while preserving its exact input/output behavior. Reply with the "
    "complete rewritten program in a single fenced code block."
)

RATIONALE_SYSTEM_TEXT = (
    "You are an expert C++ performance engineer. Explain concisely why the optimized "
    "version of the program below is faster than the original, grounding the "
    "explanation in the listed control-flow changes."
)


def _fence(code: str) -> str:
    return f"```cpp\n{code.rstrip()}\n```"


def build_prompt(
    mode: PromptMode,
    target: CodePair,
    diff: CfgDiff | str | None = None,
    rationale: str | None = None,
    example: CodePair | None = None,
) -> Prompt:
    """Assemble the prompt for one target. Optional arguments must agree with
    the mode: zero-shot takes none of them, naive exactly one example, context
    exactly one example plus diff text and rationale."""
    if mode is PromptMode.ZERO_SHOT and not (diff is None and rationale is None and example is None):
        raise ModeArgumentMismatch("zero-shot prompts take no context arguments")
    if mode is PromptMode.NAIVE and (diff is not None or rationale is not None):
        raise ModeArgumentMismatch("naive prompts take only an example pair")
    if mode is PromptMode.NAIVE and example is None:
        raise ModeArgumentMismatch("naive prompts require exactly one example pair")
    if mode is PromptMode.CONTEXT and (diff is None or rationale is None or example is None):
        raise ModeArgumentMismatch("context prompts require diff, rationale, and example")

    diff_text = render_diff(diff) if isinstance(diff, CfgDiff) else diff

    sections = ["## Target program", "", _fence(target.original_code)]
    if example is not None:
        sections += [
            "",
            "## Reference example: original",
            "",
            _fence(example.original_code),
            "",
            "## Reference example: optimized",
            "",
            _fence(example.optimized_code),
        ]
    if diff_text is not None:
        sections += ["", "## Control-flow changes in the reference example", "", diff_text.rstrip()]
    if rationale is not None:
        sections += ["", "## Why the reference optimization works", "", rationale.rstrip()]
    sections += [
        "",
        "## Task",
        "",
        "Produce an optimized version of the target program.",
    ]

    return Prompt(
        mode=mode,
        system_text=OPTIMIZER_SYSTEM_TEXT,
        user_text="\n".join(sections),
        parts=PromptParts(
            target_code=target.original_code,
            diff_text=diff_text,
            rationale=rationale,
            example=example,
        ),
        target_id=target.id,
    )


def request_hash(model: str, system_text: str, user_text: str) -> str:
    canonical = json.dumps(
        {"model": model, "system": system_text, "user": user_text},
        sort_keys=True,
        ensure_ascii=False,
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class Cassette:
    """Persisted request -> response map for offline replay.

    Writes are serialized under a lock; the file is rewritten atomically.
    """

    def __init__(self, path: Path | str):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._data: dict[str, dict] = {}
        if self.path.exists():
            self._data = json.loads(self.path.read_text(encoding="utf-8"))

    def lookup(self, key: str) -> dict | None:
        return self._data.get(key)

    def store(self, key: str, request: dict, response: dict) -> None:
        with self._lock:
            self._data[key] = {
                "request": request,
                "response": response,
                "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            }
            self._save()

    def _save(self) -> None:
        tmp = self.path.with_suffix(self.path.suffix + ".tmp")
        tmp.write_text(
            json.dumps(self._data, sort_keys=True, ensure_ascii=False, indent=1),
            encoding="utf-8",
        )
        tmp.replace(self.path)

    def __len__(self) -> int:
        return len(self._data)


@dataclass
class LlmConfig:
    base_url: str = ""
    api_key: str = ""
    model: str = "default-model"
    temperature: float = 0.0
    timeout_s: float = 120.0

    @classmethod
    def from_env(cls) -> "LlmConfig":
        return cls(
            base_url=os.environ.get(LLM_BASE_ENV, ""),
            api_key=os.environ.get(LLM_KEY_ENV, ""),
            model=os.environ.get(LLM_MODEL_ENV, "default-model"),
        )


Transport = Callable[[dict], dict]


class LlmClient:
    """Chat-completion client with record/replay support.

    `transport` maps a request body to a decoded response body; the default
    posts to the configured HTTP service. Replay mode never touches the
    transport, so a replayed pipeline performs zero network operations.
    """

    def __init__(
        self,
        config: LlmConfig | None = None,
        cassette: Cassette | None = None,
        mode: str = "live",
        transport: Transport | None = None,
        max_in_flight: int = 4,
    ):
        if mode not in ("live", "record", "replay"):
            raise ValueError(f"unknown client mode {mode!r}")
        if mode in ("record", "replay") and cassette is None:
            raise ValueError(f"{mode} mode requires a cassette")
        self.config = config or LlmConfig.from_env()
        self.cassette = cassette
        self.mode = mode
        self._transport = transport or self._http_transport
        self._in_flight = threading.BoundedSemaphore(max_in_flight)

    def _http_transport(self, request: dict) -> dict:
        headers = {}
        if self.config.api_key:
            headers["Authorization"] = f"Bearer {self.config.api_key}"
        if not self.config.base_url:
            raise ServiceError(0, "no chat service URL configured")
        return http_post_json(self.config.base_url, request, headers, self.config.timeout_s)

    def complete(self, system_text: str, user_text: str) -> str:
        """Send one system+user exchange at temperature 0, return the text."""
        key = request_hash(self.config.model, system_text, user_text)

        if self.mode == "replay":
            hit = self.cassette.lookup(key)
            if hit is None:
                raise ReplayMiss(key)
            return hit["response"]["choices"][0]["message"]["content"]

        request = {
            "model": self.config.model,
            "messages": [
                {"role": "system", "content": system_text},
                {"role": "user", "content": user_text},
            ],
            "temperature": self.config.temperature,
        }
        with self._in_flight:  # bound concurrent service calls
            response = self._transport(request)
        try:
            content = response["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise ServiceError(0, f"malformed chat response: {json.dumps(response)[:300]}") from None
        if self.mode == "record":
            self.cassette.store(key, request, response)
        return content


_FENCED_BLOCK = re.compile(r"```[^\n`]*\n(.*?)```", re.DOTALL)


def extract_code_block(text: str) -> str:
    """First fenced code block of the response; extra blocks are ignored."""
    matches = _FENCED_BLOCK.findall(text)
    if not matches:
        raise NoCodeBlockInResponse("response contains no fenced code block")
    if len(matches) > 1:
        logger.info("response contained %d fenced blocks; using the first", len(matches))
    code = matches[0]
    if not code.strip():
        raise NoCodeBlockInResponse("first fenced code block is empty")
    return code


def generate_patch(prompt: Prompt, llm: LlmClient) -> GeneratedPatch:
    raw = llm.complete(prompt.system_text, prompt.user_text)
    return GeneratedPatch(
        code=extract_code_block(raw),
        raw_response=raw,
        mode=prompt.mode,
        target_id=prompt.target_id,
    )


def generate_rationale(diff: CfgDiff, pair: CodePair, llm: LlmClient) -> str:
    """Explain why the pair's optimized side improves on the original, in
    terms of the structural diff. An empty diff short-circuits to a fixed
    string without any service call."""
    if diff.is_empty():
        return EMPTY_DIFF_RATIONALE
    user_text = "\n".join(
        [
            "## Original program",
            "",
            _fence(pair.original_code),
            "",
            "## Optimized program",
            "",
            _fence(pair.optimized_code),
            "",
            "## Control-flow changes",
            "",
            render_diff(diff).rstrip(),
            "",
            "## Task",
            "",
            "Explain briefly why the optimized program is faster, referencing the blocks above.",
        ]
    )
    return llm.complete(RATIONALE_SYSTEM_TEXT, user_text).strip()
