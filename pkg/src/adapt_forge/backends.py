"""Text-transformation backends and the structured response envelope.

Every backend answers in one envelope format so the rest of the pipeline
never cares which model produced the text::

    ```
    plain: Take Ibuprofen 400mg. ...
    steps:
    1. Take Ibuprofen 400mg.
    2. Take it every 8 hours.
    picto:
    1|take|pill
    ```

The mock backend is a pure function of its inputs and exists so the whole
pipeline runs offline and deterministically. The remote backend speaks a
chat-completion HTTP API with bounded retries.
"""

from __future__ import annotations

import json
import os
import re
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol, Sequence

import requests

from .errors import (
    AuthError,
    BackendUnavailableError,
    MalformedResponseError,
    ValidationError,
)
from .model import (
    BackendDescriptor,
    DomainInput,
    PictogramAnnotation,
    TransformationKind,
    TransformResult,
)
from .pictograms import PictogramMap, load_default_pictograms
from .prompts import InstantiatedPrompt
from .rules import ActiveRuleSet

# ---------------------------------------------------------------------------
# Envelope codec

_FENCE_RE = re.compile(r"```[a-zA-Z0-9_-]*\n(.*?)```", re.DOTALL)
_STEP_LINE_RE = re.compile(r"^\s*(\d+)[.)]\s*(.*\S)\s*$")


def serialize_envelope(
    plain: str,
    steps: Sequence[str],
    annotations: Sequence[PictogramAnnotation],
) -> str:
    lines = ["```", f"plain: {plain}", "steps:"]
    for i, step in enumerate(steps, start=1):
        lines.append(f"{i}. {step}")
    lines.append("picto:")
    for a in annotations:
        lines.append(f"{a.step_index}|{a.keyword}|{a.pictogram_id}")
    lines.append("```")
    return "\n".join(lines)


def _parse_envelope_body(body: str) -> TransformResult:
    plain: Optional[str] = None
    steps: list[str] = []
    annotations: list[PictogramAnnotation] = []
    section = None
    for raw in body.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.lower().startswith("plain:"):
            plain = line[len("plain:"):].strip()
            section = "plain"
            continue
        if line.lower() == "steps:":
            section = "steps"
            continue
        if line.lower() == "picto:":
            section = "picto"
            continue
        if section == "steps":
            m = _STEP_LINE_RE.match(line)
            if m is None:
                raise MalformedResponseError(f"bad step line: {line!r}")
            number = int(m.group(1))
            if number != len(steps) + 1:
                raise MalformedResponseError(
                    f"step numbering jumps to {number} after {len(steps)} steps"
                )
            steps.append(m.group(2))
        elif section == "picto":
            parts = [p.strip() for p in line.split("|")]
            if len(parts) != 3:
                raise MalformedResponseError(f"bad picto line: {line!r}")
            try:
                idx = int(parts[0])
            except ValueError:
                raise MalformedResponseError(
                    f"picto step index not a number: {line!r}"
                ) from None
            annotations.append(
                PictogramAnnotation(
                    step_index=idx, keyword=parts[1], pictogram_id=parts[2]
                )
            )
        elif section == "plain":
            # tolerated: multi-line plain text folds into one
            plain = f"{plain} {line}" if plain else line
        else:
            raise MalformedResponseError(
                f"content before the plain: header: {line!r}"
            )
    if plain is None or not plain.strip():
        raise MalformedResponseError("envelope has no plain: section")
    try:
        return TransformResult(
            plain_text=plain,
            steps=tuple(steps),
            pictogram_annotations=tuple(annotations),
            raw_response=body,
        )
    except ValidationError as exc:
        # annotation step index out of range and friends
        raise MalformedResponseError(str(exc)) from None


def parse_backend_response(raw: str) -> TransformResult:
    """Extract and parse the first well-formed envelope inside ``raw``.

    Remote models wrap answers in prose; any fenced block is tried in order,
    and a fence-less response is parsed as a bare envelope body.
    """
    if not raw or not raw.strip():
        raise MalformedResponseError("empty backend response")
    first_error: Optional[MalformedResponseError] = None
    candidates = [m.group(1) for m in _FENCE_RE.finditer(raw)]
    if not candidates:
        candidates = [raw]
    for body in candidates:
        try:
            parsed = _parse_envelope_body(body)
        except MalformedResponseError as exc:
            if first_error is None:
                first_error = exc
            continue
        return TransformResult(
            plain_text=parsed.plain_text,
            steps=parsed.steps,
            pictogram_annotations=parsed.pictogram_annotations,
            raw_response=raw,
        )
    assert first_error is not None
    raise first_error


def normalize_envelope(raw: str) -> str:
    """Canonical form: parse then re-serialize."""
    r = parse_backend_response(raw)
    return serialize_envelope(r.plain_text, r.steps, r.pictogram_annotations)


# ---------------------------------------------------------------------------
# Backend protocol and implementations


class Backend(Protocol):
    descriptor: BackendDescriptor

    def transform(
        self,
        prompt: InstantiatedPrompt,
        active_rules: ActiveRuleSet,
        input: DomainInput,
    ) -> TransformResult: ...


def transform(
    backend: Backend,
    prompt: InstantiatedPrompt,
    active_rules: ActiveRuleSet,
    input: DomainInput,
) -> TransformResult:
    return backend.transform(prompt, active_rules, input)


# Rewrite table applied by the mock before clause splitting. Order matters:
# the "mg every" entry introduces the "; " split point.
MOCK_SUBSTITUTIONS: tuple[tuple[str, str], ...] = (
    (r"gastric discomfort", "stomach pain"),
    (r"\bexperience\b", "have"),
    (r"mg every", "mg; take it every"),
)

_CLAUSE_SPLIT_RE = re.compile(r"(; |, and | unless | if )")
_REWRITE_KINDS = frozenset(
    {
        TransformationKind.SIMPLIFY_TEXT,
        TransformationKind.SIMPLIFY_STRUCTURE,
        TransformationKind.STRUCTURE_AS_STEPS,
    }
)


class MockBackend:
    """Deterministic rule-based rewriter; the offline stand-in for a model.

    Output depends only on the input text and which transformations are
    active. Raw response is a well-formed envelope so the parse path is
    exercised on every call.
    """

    def __init__(self, pictograms: Optional[PictogramMap] = None) -> None:
        self.descriptor = BackendDescriptor(
            backend_id="mock", kind="Mock", model_version="mock-1"
        )
        self._pictograms = pictograms or load_default_pictograms()

    def transform(
        self,
        prompt: InstantiatedPrompt,
        active_rules: ActiveRuleSet,
        input: DomainInput,
    ) -> TransformResult:
        rewrite = any(active_rules.has(k) for k in _REWRITE_KINDS)
        if rewrite:
            clauses = self._rewrite_clauses(input.text)
            plain = " ".join(clauses)
            if active_rules.has(TransformationKind.STRUCTURE_AS_STEPS):
                steps = clauses
            else:
                steps = [plain]
        else:
            plain = input.text
            steps = [input.text]
        if active_rules.has(TransformationKind.ATTACH_PICTOGRAMS):
            annotations = self._pictograms.annotate_steps(steps)
        else:
            annotations = ()
        raw = serialize_envelope(plain, steps, annotations)
        return parse_backend_response(raw)

    @staticmethod
    def _rewrite_clauses(text: str) -> list[str]:
        if text.startswith("You should "):
            text = text[len("You should "):]
        for pattern, replacement in MOCK_SUBSTITUTIONS:
            text = re.sub(pattern, replacement, text)
        parts = _CLAUSE_SPLIT_RE.split(text)
        rendered: list[str] = []
        conditional = False
        for i, part in enumerate(parts):
            if i % 2 == 1:
                marker = part.strip().strip(",;")
                conditional = marker in ("unless", "if")
                continue
            clause = part.strip().rstrip(".").strip()
            if not clause:
                continue
            if conditional:
                rendered.append(f"Stop if {clause}. Ask your doctor.")
            else:
                rendered.append(f"{clause[0].upper()}{clause[1:]}.")
        return rendered


class RemoteBackend:
    """Chat-completion HTTP client with exponential backoff.

    Transport failures and 5xx retry up to three times, then raise
    BackendUnavailable. 401/403 raise AuthError immediately. The reply text
    must contain the response envelope.
    """

    MAX_RETRIES = 3

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key: Optional[str] = None,
        timeout: float = 30.0,
        session: Optional[requests.Session] = None,
        sleep: Callable[[float], None] = time.sleep,
        temperature: float = 0.0,
    ) -> None:
        if not endpoint:
            raise ValidationError("remote backend requires an endpoint URL")
        if not model:
            raise ValidationError("remote backend requires a model name")
        self.descriptor = BackendDescriptor(
            backend_id="remote",
            kind="RemoteChatAPI",
            model_version=model,
            endpoint=endpoint,
        )
        self._endpoint = endpoint
        self._model = model
        self._api_key = api_key
        self._timeout = timeout
        self._session = session or requests.Session()
        self._sleep = sleep
        self._temperature = temperature

    def transform(
        self,
        prompt: InstantiatedPrompt,
        active_rules: ActiveRuleSet,
        input: DomainInput,
    ) -> TransformResult:
        payload = {
            "model": self._model,
            "messages": [{"role": "user", "content": prompt.rendered_text}],
            "temperature": self._temperature,
        }
        headers = {"Content-Type": "application/json"}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"

        delay = 0.5
        last_error: Optional[Exception] = None
        for attempt in range(1, self.MAX_RETRIES + 1):
            try:
                response = self._session.post(
                    self._endpoint,
                    data=json.dumps(payload),
                    headers=headers,
                    timeout=self._timeout,
                )
            except (requests.ConnectionError, requests.Timeout) as exc:
                last_error = exc
            else:
                if response.status_code in (401, 403):
                    raise AuthError(
                        f"backend rejected credentials (HTTP {response.status_code})"
                    )
                if response.status_code >= 500:
                    last_error = BackendUnavailableError(
                        f"backend returned HTTP {response.status_code}"
                    )
                elif response.status_code >= 400:
                    raise MalformedResponseError(
                        f"backend rejected the request: HTTP {response.status_code} "
                        f"{response.text[:200]}"
                    )
                else:
                    return parse_backend_response(self._extract_text(response))
            if attempt < self.MAX_RETRIES:
                self._sleep(delay)
                delay *= 2
        raise BackendUnavailableError(
            f"backend unreachable after {self.MAX_RETRIES} attempts: {last_error}"
        )

    @staticmethod
    def _extract_text(response: requests.Response) -> str:
        try:
            doc = response.json()
        except ValueError:
            return response.text
        if isinstance(doc, dict):
            choices = doc.get("choices")
            if isinstance(choices, list) and choices:
                msg = choices[0].get("message", {})
                if isinstance(msg, dict) and "content" in msg:
                    return str(msg["content"])
                if "text" in choices[0]:
                    return str(choices[0]["text"])
            for key in ("content", "text", "output"):
                if key in doc:
                    return str(doc[key])
        raise MalformedResponseError("backend response carries no text field")


@dataclass
class ScriptedBackend:
    """Replays a fixed sequence of outcomes; for fault-injection tests.

    Each script entry is a TransformResult, a raw envelope string, or an
    Exception to raise. The last entry repeats once the script runs out.
    """

    script: Sequence = ()
    descriptor: BackendDescriptor = field(
        default_factory=lambda: BackendDescriptor(
            backend_id="scripted", kind="Mock", model_version="scripted-1"
        )
    )
    calls: int = 0

    def transform(
        self,
        prompt: InstantiatedPrompt,
        active_rules: ActiveRuleSet,
        input: DomainInput,
    ) -> TransformResult:
        if not self.script:
            raise BackendUnavailableError("scripted backend has no script")
        index = min(self.calls, len(self.script) - 1)
        self.calls += 1
        entry = self.script[index]
        if isinstance(entry, Exception):
            raise entry
        if isinstance(entry, str):
            return parse_backend_response(entry)
        return entry


def make_backend(
    name: Optional[str] = None,
    env: Optional[dict] = None,
    pictograms: Optional[PictogramMap] = None,
    **remote_kwargs,
) -> Backend:
    """Build a backend from an explicit name or the ADAPT_BACKEND env var."""
    env = os.environ if env is None else env
    chosen = (name or env.get("ADAPT_BACKEND", "mock")).lower()
    if chosen == "mock":
        return MockBackend(pictograms=pictograms)
    if chosen == "remote":
        endpoint = remote_kwargs.pop("endpoint", None) or env.get("ADAPT_REMOTE_URL")
        model = remote_kwargs.pop("model", None) or env.get("ADAPT_REMOTE_MODEL")
        api_key = remote_kwargs.pop("api_key", None) or env.get("ADAPT_REMOTE_KEY")
        if not endpoint:
            raise ValidationError(
                "remote backend selected but ADAPT_REMOTE_URL is not set"
            )
        if not model:
            raise ValidationError(
                "remote backend selected but ADAPT_REMOTE_MODEL is not set"
            )
        return RemoteBackend(
            endpoint=endpoint, model=model, api_key=api_key, **remote_kwargs
        )
    raise ValidationError(f"unknown backend {chosen!r}; use mock or remote")
