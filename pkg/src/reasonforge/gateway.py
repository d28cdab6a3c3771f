"""Analyzer/Generator client contracts, response parsing, mock and live clients.

The Analyzer evaluates images, diagnoses failures, plans sub-tasks, and
scores text validity; the Generator produces and revises images. Both are
external services behind narrow typed contracts, so the pipeline never sees
raw wire payloads.
"""

from __future__ import annotations

import base64
import enum
import hashlib
import json
import os
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Protocol, Sequence

import httpx

from .trajectory import (
    SCORE_MAX,
    SCORE_MIN,
    EvaluationResult,
    FailureCause,
    ImageRef,
    InstructionText,
    ReflectionText,
)


class ClientError(Exception):
    """Transport or protocol failure that survived the retry budget."""


class MalformedResponse(Exception):
    """The remote replied, but not in the shape the contract requires."""


class TextRole(str, enum.Enum):
    FAILURE_ANALYSIS = "failure_analysis"
    REFLECTION_PROMPT = "reflection_prompt"
    STEP_DECOMPOSITION = "step_decomposition"


class AnalyzerClient(Protocol):
    def evaluate(
        self, instruction: str, references: Sequence[ImageRef], image: ImageRef
    ) -> EvaluationResult: ...

    def reflect(
        self,
        instruction: str,
        references: Sequence[ImageRef],
        image: ImageRef,
        evaluation: EvaluationResult,
    ) -> ReflectionText: ...

    def diagnose(self, instruction: str, history: Sequence[str]) -> FailureCause: ...

    def plan(
        self, instruction: str, references: Sequence[ImageRef], history: Sequence[str]
    ) -> list[InstructionText]: ...

    def validate_text(self, text: str, role: TextRole) -> float: ...


class GeneratorClient(Protocol):
    def generate(
        self, instruction: str, references: Sequence[ImageRef]
    ) -> ImageRef: ...

    def revise(
        self,
        reflection: ReflectionText,
        previous_image: ImageRef,
        references: Sequence[ImageRef],
    ) -> ImageRef: ...

    def execute_step(
        self,
        sub_instruction: InstructionText,
        previous_image: ImageRef | None,
        references: Sequence[ImageRef] = (),
    ) -> ImageRef: ...


# ---------------------------------------------------------------------------
# Response parsing


def extract_json_object(text: str) -> dict[str, Any]:
    """Locate the outermost JSON object embedded in free-form prose.

    Tries every ``{`` as a decode start and returns the first that parses to
    an object, which is the outermost one for well-nested replies.
    """
    decoder = json.JSONDecoder()
    for pos, char in enumerate(text):
        if char != "{":
            continue
        try:
            obj, _ = decoder.raw_decode(text, pos)
        except (json.JSONDecodeError, ValueError):
            continue
        if isinstance(obj, dict):
            return obj
    raise MalformedResponse("no JSON object found in response")


_CRITERIA = ("instruction", "consistency", "quality", "knowledge")


def parse_evaluation(raw_response: str, pass_threshold: int = 4) -> EvaluationResult:
    """Parse an Analyzer evaluation reply into a typed result.

    Tolerates surrounding prose; rejects missing, non-integer, or
    out-of-range scores with ``MalformedResponse``.
    """
    obj = extract_json_object(raw_response)
    scores: dict[str, int] = {}
    source = obj.get("scores") if isinstance(obj.get("scores"), dict) else obj
    for name in _CRITERIA:
        value = source.get(name)
        if not isinstance(value, int) or isinstance(value, bool):
            raise MalformedResponse(f"score {name!r} missing or not an integer")
        if not SCORE_MIN <= value <= SCORE_MAX:
            raise MalformedResponse(f"score {name!r}={value} outside [1,5]")
        scores[name] = value
    passed = all(v >= pass_threshold for v in scores.values())
    cause_raw = obj.get("failure_cause") or obj.get("cause")
    cause: FailureCause | None = None
    if not passed and isinstance(cause_raw, str):
        try:
            cause = FailureCause(cause_raw)
        except ValueError:
            cause = FailureCause.OTHER
    rationale = obj.get("rationale")
    return EvaluationResult(
        instruction_score=scores["instruction"],
        consistency_score=scores["consistency"],
        quality_score=scores["quality"],
        knowledge_score=scores["knowledge"],
        passed=passed,
        rationale=rationale if isinstance(rationale, str) else "",
        failure_cause=cause,
    )


def parse_reflection(raw_response: str) -> ReflectionText:
    obj = extract_json_object(raw_response)
    analysis = obj.get("failure_analysis")
    plan = obj.get("improvement_plan")
    if not isinstance(analysis, str) or not analysis:
        raise MalformedResponse("missing failure_analysis")
    if not isinstance(plan, str) or not plan:
        raise MalformedResponse("missing improvement_plan")
    return ReflectionText(failure_analysis=analysis, improvement_plan=plan)


def parse_diagnosis(raw_response: str) -> FailureCause:
    obj = extract_json_object(raw_response)
    cause = obj.get("cause")
    if cause == "prompt_complexity":
        return FailureCause.PROMPT_COMPLEXITY
    if cause == "knowledge_gap":
        return FailureCause.KNOWLEDGE_GAP
    if cause == "other":
        return FailureCause.OTHER
    raise MalformedResponse(f"unknown diagnosis cause {cause!r}")


def parse_plan(raw_response: str) -> list[InstructionText]:
    obj = extract_json_object(raw_response)
    steps = obj.get("steps")
    if not isinstance(steps, list) or not steps:
        raise MalformedResponse("plan reply must contain a non-empty 'steps' array")
    out = []
    for step in steps:
        if not isinstance(step, str) or not step:
            raise MalformedResponse("plan steps must be non-empty strings")
        out.append(InstructionText(text=step))
    return out


def parse_validity(raw_response: str) -> float:
    obj = extract_json_object(raw_response)
    value = obj.get("validity")
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise MalformedResponse("validity reply must contain a numeric 'validity'")
    return min(1.0, max(0.0, float(value)))


# ---------------------------------------------------------------------------
# Content-addressed image persistence


def store_image_bytes(image_dir: str | Path, data: bytes, suffix: str = "") -> ImageRef:
    digest = hashlib.sha256(data).hexdigest()
    directory = Path(image_dir)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / (digest + suffix)
    if not path.exists():
        path.write_bytes(data)
    return ImageRef(uri=str(path), content_hash=digest)


# ---------------------------------------------------------------------------
# Deterministic scripted mock

_FAIL_RE = re.compile(r"\[\[fail:(\d+)\]\]")
_COMPLEX_RE = re.compile(r"\[\[complex:(\d+)\]\]")
_KNOWLEDGE_MARK = "[[knowledge]]"
_ERROR_MARK = "[[error]]"

_PASS_EVAL = dict(instruction_score=5, consistency_score=5, quality_score=5, knowledge_score=5)
_FAIL_EVAL = dict(instruction_score=5, consistency_score=3, quality_score=4, knowledge_score=5)


@dataclass
class _MockState:
    """Per-instruction counters so scripted sequences stay ordered."""

    eval_calls: dict[str, int] = field(default_factory=dict)
    gen_calls: dict[str, int] = field(default_factory=dict)


class ScriptedMockAnalyzer:
    """Offline Analyzer driven by instruction markers.

    ``[[fail:n]]`` fails the first n evaluations of that instruction then
    passes; ``[[complex:m]]`` never passes, diagnoses prompt complexity, and
    plans m sub-steps; ``[[knowledge]]`` never passes and diagnoses a
    knowledge gap; ``[[error]]`` raises ClientError. Unmarked instructions
    pass immediately.
    """

    def __init__(self, state: _MockState, seed: int = 0) -> None:
        self._state = state
        self._seed = seed
        self.analyzer_id = f"mock-analyzer-{seed}"
        self.call_count = 0

    def _check_error(self, instruction: str) -> None:
        if _ERROR_MARK in instruction:
            raise ClientError("scripted transport failure")

    def evaluate(
        self, instruction: str, references: Sequence[ImageRef], image: ImageRef
    ) -> EvaluationResult:
        self._check_error(instruction)
        self.call_count += 1
        n = self._state.eval_calls.get(instruction, 0)
        self._state.eval_calls[instruction] = n + 1

        fail = _FAIL_RE.search(instruction)
        if fail is not None and n < int(fail.group(1)):
            return EvaluationResult(**_FAIL_EVAL, passed=False, rationale="scripted failure")
        if _COMPLEX_RE.search(instruction) or _KNOWLEDGE_MARK in instruction:
            return EvaluationResult(**_FAIL_EVAL, passed=False, rationale="scripted failure")
        return EvaluationResult(**_PASS_EVAL, passed=True, rationale="scripted pass")

    def reflect(
        self,
        instruction: str,
        references: Sequence[ImageRef],
        image: ImageRef,
        evaluation: EvaluationResult,
    ) -> ReflectionText:
        self._check_error(instruction)
        self.call_count += 1
        attempt = self._state.eval_calls.get(instruction, 1)
        return ReflectionText(
            failure_analysis=f"scripted analysis after attempt {attempt}",
            improvement_plan=f"scripted plan for attempt {attempt + 1}",
        )

    def diagnose(self, instruction: str, history: Sequence[str]) -> FailureCause:
        self._check_error(instruction)
        self.call_count += 1
        if _COMPLEX_RE.search(instruction):
            return FailureCause.PROMPT_COMPLEXITY
        if _KNOWLEDGE_MARK in instruction:
            return FailureCause.KNOWLEDGE_GAP
        return FailureCause.OTHER

    def plan(
        self, instruction: str, references: Sequence[ImageRef], history: Sequence[str]
    ) -> list[InstructionText]:
        self._check_error(instruction)
        self.call_count += 1
        match = _COMPLEX_RE.search(instruction)
        steps = int(match.group(1)) if match else 1
        # Sub-instructions carry no markers, so their evaluations default to pass.
        base = re.sub(r"\[\[[^\]]*\]\]", "", instruction).strip()
        return [
            InstructionText(text=f"sub-step {i} of {steps}: {base}")
            for i in range(1, steps + 1)
        ]

    def validate_text(self, text: str, role: TextRole) -> float:
        self.call_count += 1
        return 1.0


class ScriptedMockGenerator:
    """Offline Generator writing deterministic stub image files."""

    def __init__(self, state: _MockState, image_dir: str | Path, seed: int = 0) -> None:
        self._state = state
        self._image_dir = image_dir
        self._seed = seed
        self.generator_id = f"mock-generator-{seed}"
        self.call_count = 0

    def _emit(self, key: str) -> ImageRef:
        self.call_count += 1
        n = self._state.gen_calls.get(key, 0)
        self._state.gen_calls[key] = n + 1
        data = f"stub-image|seed={self._seed}|{key}|{n}".encode()
        return store_image_bytes(self._image_dir, data, suffix=".stub")

    def generate(self, instruction: str, references: Sequence[ImageRef]) -> ImageRef:
        if _ERROR_MARK in instruction:
            raise ClientError("scripted transport failure")
        return self._emit(f"generate|{instruction}")

    def revise(
        self,
        reflection: ReflectionText,
        previous_image: ImageRef,
        references: Sequence[ImageRef],
    ) -> ImageRef:
        return self._emit(f"revise|{reflection.improvement_plan}")

    def execute_step(
        self,
        sub_instruction: InstructionText,
        previous_image: ImageRef | None,
        references: Sequence[ImageRef] = (),
    ) -> ImageRef:
        return self._emit(f"step|{sub_instruction.text}")


def scripted_mock(
    image_dir: str | Path, seed: int = 0
) -> tuple[ScriptedMockAnalyzer, ScriptedMockGenerator]:
    """Build a paired deterministic Analyzer/Generator mock."""
    state = _MockState()
    return (
        ScriptedMockAnalyzer(state, seed=seed),
        ScriptedMockGenerator(state, image_dir, seed=seed),
    )


# ---------------------------------------------------------------------------
# Live HTTP clients

ANALYZER_URL_ENV = "FORGE_ANALYZER_URL"
ANALYZER_KEY_ENV = "FORGE_ANALYZER_KEY"
GENERATOR_URL_ENV = "FORGE_GENERATOR_URL"
GENERATOR_KEY_ENV = "FORGE_GENERATOR_KEY"

_TEMPLATE_OPS = ("evaluate", "reflect", "diagnose", "plan", "validate_text")
_DEFAULT_TEMPLATE_DIR = Path(__file__).parent / "templates"


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    api_key: str = ""
    model: str = ""
    timeout: float = 120.0
    max_retries: int = 3
    backoff_base: float = 1.0


class PromptTemplates:
    """One template per Analyzer operation, loaded from a directory.

    Missing files fall back to the editable placeholders shipped with the
    package.
    """

    def __init__(self, directory: str | Path | None = None) -> None:
        self._templates: dict[str, str] = {}
        for op in _TEMPLATE_OPS:
            path = None
            if directory is not None:
                candidate = Path(directory) / f"{op}.txt"
                if candidate.exists():
                    path = candidate
            if path is None:
                path = _DEFAULT_TEMPLATE_DIR / f"{op}.txt"
            self._templates[op] = path.read_text(encoding="utf-8")

    def render(self, op: str, **values: str) -> str:
        return self._templates[op].format(**values)


_RETRY_STATUSES = {429, 500, 502, 503, 504}


def _post_with_retry(
    client: httpx.Client,
    url: str,
    payload: dict[str, Any],
    config: EndpointConfig,
    sleep: Callable[[float], None] = time.sleep,
) -> dict[str, Any]:
    headers = {}
    if config.api_key:
        headers["Authorization"] = f"Bearer {config.api_key}"
    last_error: Exception | None = None
    for attempt in range(config.max_retries + 1):
        try:
            response = client.post(
                url, json=payload, headers=headers, timeout=config.timeout
            )
        except httpx.HTTPError as exc:
            last_error = exc
        else:
            if response.status_code == 200:
                try:
                    return response.json()
                except ValueError as exc:
                    raise MalformedResponse(f"non-JSON reply from {url}") from exc
            if response.status_code not in _RETRY_STATUSES:
                raise ClientError(f"{url} returned HTTP {response.status_code}")
            last_error = ClientError(f"{url} returned HTTP {response.status_code}")
        if attempt < config.max_retries:
            sleep(config.backoff_base * (2**attempt))
    raise ClientError(f"retry budget exhausted for {url}") from last_error


def _image_part(ref: ImageRef) -> dict[str, Any]:
    if ref.uri.startswith(("http://", "https://")):
        url = ref.uri
    else:
        data = Path(ref.uri).read_bytes()
        url = "data:image/png;base64," + base64.b64encode(data).decode()
    return {"type": "image_url", "image_url": {"url": url}}


class LiveAnalyzer:
    """Chat-completions Analyzer over HTTPS."""

    def __init__(
        self,
        config: EndpointConfig,
        templates: PromptTemplates | None = None,
        pass_threshold: int = 4,
        client: httpx.Client | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        self._config = config
        self._templates = templates or PromptTemplates()
        self._pass_threshold = pass_threshold
        self._client = client or httpx.Client()
        self._sleep = sleep
        self.analyzer_id = config.model or config.base_url

    def _chat(self, prompt: str, images: Sequence[ImageRef]) -> str:
        content: list[dict[str, Any]] = [{"type": "text", "text": prompt}]
        content += [_image_part(ref) for ref in images]
        payload = {
            "model": self._config.model,
            "messages": [{"role": "user", "content": content}],
        }
        url = self._config.base_url.rstrip("/") + "/v1/chat/completions"
        reply = _post_with_retry(self._client, url, payload, self._config, self._sleep)
        try:
            text = reply["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise MalformedResponse("chat reply missing choices[0].message.content") from exc
        if not isinstance(text, str):
            raise MalformedResponse("chat reply content is not text")
        return text

    def evaluate(self, instruction, references, image):
        prompt = self._templates.render("evaluate", instruction=instruction)
        raw = self._chat(prompt, [*references, image])
        return parse_evaluation(raw, self._pass_threshold)

    def reflect(self, instruction, references, image, evaluation):
        prompt = self._templates.render(
            "reflect",
            instruction=instruction,
            scores=json.dumps(dict(zip(_CRITERIA, evaluation.scores))),
            rationale=evaluation.rationale,
        )
        return parse_reflection(self._chat(prompt, [*references, image]))

    def diagnose(self, instruction, history):
        prompt = self._templates.render(
            "diagnose", instruction=instruction, history="\n".join(history)
        )
        return parse_diagnosis(self._chat(prompt, []))

    def plan(self, instruction, references, history):
        prompt = self._templates.render(
            "plan", instruction=instruction, history="\n".join(history)
        )
        return parse_plan(self._chat(prompt, list(references)))

    def validate_text(self, text, role):
        prompt = self._templates.render("validate_text", text=text, role=role.value)
        return parse_validity(self._chat(prompt, []))


class LiveGenerator:
    """Image-generation/edit endpoint client with content-addressed storage."""

    def __init__(
        self,
        config: EndpointConfig,
        image_dir: str | Path,
        client: httpx.Client | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        self._config = config
        self._image_dir = image_dir
        self._client = client or httpx.Client()
        self._sleep = sleep
        self.generator_id = config.model or config.base_url

    def _images_call(self, prompt: str, images: Sequence[ImageRef]) -> ImageRef:
        base = self._config.base_url.rstrip("/")
        payload: dict[str, Any] = {"model": self._config.model, "prompt": prompt}
        if images:
            url = base + "/v1/images/edits"
            payload["image"] = [
                base64.b64encode(Path(ref.uri).read_bytes()).decode()
                if not ref.uri.startswith(("http://", "https://"))
                else ref.uri
                for ref in images
            ]
        else:
            url = base + "/v1/images/generations"
        reply = _post_with_retry(self._client, url, payload, self._config, self._sleep)
        try:
            item = reply["data"][0]
        except (KeyError, IndexError, TypeError) as exc:
            raise MalformedResponse("image reply missing data[0]") from exc
        if isinstance(item.get("b64_json"), str):
            data = base64.b64decode(item["b64_json"])
        elif isinstance(item.get("url"), str):
            fetched = self._client.get(item["url"], timeout=self._config.timeout)
            if fetched.status_code != 200:
                raise ClientError(f"image download failed: HTTP {fetched.status_code}")
            data = fetched.content
        else:
            raise MalformedResponse("image reply carries neither url nor b64_json")
        return store_image_bytes(self._image_dir, data, suffix=".png")

    def generate(self, instruction, references):
        return self._images_call(instruction, references)

    def revise(self, reflection, previous_image, references):
        prompt = (
            f"Failure analysis: {reflection.failure_analysis}\n"
            f"Improvement plan: {reflection.improvement_plan}"
        )
        return self._images_call(prompt, [*references, previous_image])

    def execute_step(self, sub_instruction, previous_image, references=()):
        images = [previous_image] if previous_image is not None else list(references)
        return self._images_call(sub_instruction.text, images)


def live_clients(
    analyzer_config: EndpointConfig | None = None,
    generator_config: EndpointConfig | None = None,
    image_dir: str | Path = "images",
    templates_dir: str | Path | None = None,
    pass_threshold: int = 4,
) -> tuple[LiveAnalyzer, LiveGenerator]:
    """Build live clients, filling endpoint settings from the environment."""
    if analyzer_config is None:
        analyzer_config = EndpointConfig(
            base_url=os.environ.get(ANALYZER_URL_ENV, ""),
            api_key=os.environ.get(ANALYZER_KEY_ENV, ""),
        )
    if generator_config is None:
        generator_config = EndpointConfig(
            base_url=os.environ.get(GENERATOR_URL_ENV, ""),
            api_key=os.environ.get(GENERATOR_KEY_ENV, ""),
        )
    if not analyzer_config.base_url or not generator_config.base_url:
        raise ClientError(
            "live mode requires analyzer and generator base URLs "
            f"({ANALYZER_URL_ENV} / {GENERATOR_URL_ENV})"
        )
    templates = PromptTemplates(templates_dir)
    return (
        LiveAnalyzer(analyzer_config, templates, pass_threshold),
        LiveGenerator(generator_config, image_dir),
    )
