"""Versioned prompt templates and deterministic instantiation.

A template body carries square-bracket placeholders ([Instruction],
[UserProfile], [InputText], [ActiveRules]). Instantiation substitutes all of
them in a single pass, records the bindings, and is fully deterministic so a
trace can reconstruct exactly what a backend was asked.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from threading import Lock
from typing import Optional

from .errors import (
    DuplicateVersionError,
    UnknownTemplateError,
    UnresolvedPlaceholderError,
    ValidationError,
)
from .model import DomainInput, UserProfile
from .rules import ActiveRuleSet

PLACEHOLDERS = ("Instruction", "UserProfile", "InputText", "ActiveRules")

_MARKER_RE = re.compile(r"\[(Instruction|UserProfile|InputText|ActiveRules)\]")


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    version: int
    instruction: str
    body: str

    def __post_init__(self) -> None:
        if not self.template_id:
            raise ValidationError("templateId must be non-empty")
        if not isinstance(self.version, int) or self.version < 1:
            raise ValidationError(
                f"template {self.template_id}: version must be an integer >= 1"
            )
        if not self.instruction.strip():
            raise ValidationError(f"template {self.template_id}: instruction is empty")
        counts: dict[str, int] = {}
        for m in _MARKER_RE.finditer(self.body):
            counts[m.group(1)] = counts.get(m.group(1), 0) + 1
        for marker, n in counts.items():
            if n != 1:
                raise ValidationError(
                    f"template {self.template_id}: placeholder [{marker}] "
                    f"appears {n} times; each may appear exactly once"
                )

    @property
    def required_placeholders(self) -> frozenset[str]:
        return frozenset(m.group(1) for m in _MARKER_RE.finditer(self.body))

    def to_file_text(self) -> str:
        return (
            f"id: {self.template_id}\n"
            f"version: {self.version}\n"
            f"instruction: {self.instruction}\n"
            f"---\n"
            f"{self.body}"
        )


def parse_template_text(text: str) -> PromptTemplate:
    """Parse the on-disk template format: key-value header, `---`, body."""
    header, sep, body = text.partition("\n---\n")
    if not sep:
        raise ValidationError("template file has no '---' header separator")
    fields: dict[str, str] = {}
    for raw in header.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, colon, value = line.partition(":")
        if not colon:
            raise ValidationError(f"bad template header line: {raw!r}")
        fields[key.strip()] = value.strip()
    missing = {"id", "version", "instruction"} - fields.keys()
    if missing:
        raise ValidationError(f"template header missing: {sorted(missing)}")
    try:
        version = int(fields["version"])
    except ValueError:
        raise ValidationError(
            f"template version must be an integer, got {fields['version']!r}"
        ) from None
    return PromptTemplate(
        template_id=fields["id"],
        version=version,
        instruction=fields["instruction"],
        body=body,
    )


@dataclass(frozen=True)
class InstantiatedPrompt:
    template_id: str
    version: int
    rendered_text: str
    bindings: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "templateId": self.template_id,
            "version": self.version,
            "renderedText": self.rendered_text,
            "bindings": dict(self.bindings),
        }


def render_profile_flags(profile: UserProfile) -> str:
    """Canonical flag rendering: sorted keys, lowercase booleans."""
    inner = ", ".join(
        f"{k}: {'true' if profile.flags[k] else 'false'}"
        for k in sorted(profile.flags)
    )
    return "{" + inner + "}"


def render_active_rules(active: ActiveRuleSet) -> str:
    if not len(active):
        return "none"
    return ", ".join(
        f"{e.rule.rule_id}:{e.rule.transformation.value}" for e in active
    )


def render_template(template: PromptTemplate, bindings: dict) -> str:
    """Single-pass substitution. Values are inserted verbatim and never
    re-scanned, so a value containing a marker cannot trigger a second
    substitution."""
    unresolved: list[str] = []

    def sub(m: re.Match) -> str:
        name = m.group(1)
        if name not in bindings:
            unresolved.append(name)
            return m.group(0)
        return str(bindings[name])

    rendered = _MARKER_RE.sub(sub, template.body)
    if unresolved:
        raise UnresolvedPlaceholderError(
            f"template {template.template_id} v{template.version}: "
            f"no binding for {sorted(set(unresolved))}"
        )
    return rendered


class PromptStore:
    """Holds every registered (templateId, version); old versions stay
    retrievable for audit."""

    def __init__(self) -> None:
        self._templates: dict[tuple[str, int], PromptTemplate] = {}
        self._lock = Lock()

    def register(self, template: PromptTemplate) -> tuple[str, int]:
        with self._lock:
            key = (template.template_id, template.version)
            if key in self._templates:
                raise DuplicateVersionError(
                    f"template {template.template_id} v{template.version} "
                    "already registered"
                )
            latest = self._latest_version(template.template_id)
            if latest is not None and template.version < latest:
                raise ValidationError(
                    f"template {template.template_id}: version {template.version} "
                    f"is below the latest registered version {latest}"
                )
            self._templates[key] = template
            return key

    def _latest_version(self, template_id: str) -> Optional[int]:
        versions = [v for (tid, v) in self._templates if tid == template_id]
        return max(versions) if versions else None

    def get(self, template_id: str, version: Optional[int] = None) -> PromptTemplate:
        if version is None:
            version = self._latest_version(template_id)
            if version is None:
                raise UnknownTemplateError(f"unknown template: {template_id}")
        try:
            return self._templates[(template_id, version)]
        except KeyError:
            raise UnknownTemplateError(
                f"unknown template: {template_id} v{version}"
            ) from None

    def template_ids(self) -> list[str]:
        return sorted({tid for (tid, _) in self._templates})

    def versions(self, template_id: str) -> list[int]:
        found = sorted(v for (tid, v) in self._templates if tid == template_id)
        if not found:
            raise UnknownTemplateError(f"unknown template: {template_id}")
        return found

    def load_directory(self, path) -> int:
        """Register every *.prompt file under path. Returns how many loaded."""
        count = 0
        for file in sorted(Path(path).glob("*.prompt")):
            self.register(parse_template_text(file.read_text(encoding="utf-8")))
            count += 1
        return count

    def save(self, template: PromptTemplate, directory) -> Path:
        target = Path(directory) / f"{template.template_id}.v{template.version}.prompt"
        target.write_text(template.to_file_text(), encoding="utf-8")
        return target


def load_default_store() -> PromptStore:
    from importlib.resources import files

    store = PromptStore()
    root = files("adapt_forge").joinpath("data/templates")
    for entry in sorted(root.iterdir(), key=lambda e: e.name):
        if entry.name.endswith(".prompt"):
            store.register(parse_template_text(entry.read_text(encoding="utf-8")))
    return store


def instantiate(
    store: PromptStore,
    template_id: str,
    profile: UserProfile,
    input: DomainInput,
    active_rules: ActiveRuleSet,
    version: Optional[int] = None,
) -> InstantiatedPrompt:
    """Fill a template with the current job's values.

    Bindings cover exactly the placeholders the body uses; the result is
    byte-identical for identical inputs.
    """
    template = store.get(template_id, version)
    candidates = {
        "Instruction": template.instruction,
        "UserProfile": render_profile_flags(profile),
        "InputText": input.text,
        "ActiveRules": render_active_rules(active_rules),
    }
    bindings = {
        name: candidates[name] for name in PLACEHOLDERS
        if name in template.required_placeholders
    }
    rendered = render_template(template, bindings)
    return InstantiatedPrompt(
        template_id=template.template_id,
        version=template.version,
        rendered_text=rendered,
        bindings=bindings,
    )
