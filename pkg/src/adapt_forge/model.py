"""Core domain types shared across the adaptation pipeline.

Everything here is an immutable value object. Enum members serialize to
their string value so that documents written by one module parse back
identically in another.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .errors import ValidationError


class UserNeed(str, Enum):
    """Accessibility needs a profile may declare. Closed enumeration."""

    COGNITIVE_DISABILITY = "CognitiveDisability"
    HEARING_IMPAIRMENT = "HearingImpairment"
    VISUAL_IMPAIRMENT = "VisualImpairment"
    MOTOR_COGNITIVE_LOAD = "MotorCognitiveLoad"
    GENERAL_CLARITY = "GeneralClarity"


class TransformationKind(str, Enum):
    """Transformations a rule may request. One rule binds exactly one."""

    SIMPLIFY_TEXT = "simplifyText"
    STRUCTURE_AS_STEPS = "structureAsSteps"
    ATTACH_PICTOGRAMS = "attachPictograms"
    DISABLE_AUDIO = "disableAudio"
    ENABLE_VISUAL_ALERTS = "enableVisualAlerts"
    APPLY_HIGH_CONTRAST = "applyHighContrast"
    RENDER_LARGE_TARGETS = "renderLargeTargets"
    SIMPLIFY_STRUCTURE = "simplifyStructure"


#: Transformations that rewrite content and therefore need a prompt template.
TEXT_TRANSFORMATIONS = frozenset(
    {
        TransformationKind.SIMPLIFY_TEXT,
        TransformationKind.STRUCTURE_AS_STEPS,
        TransformationKind.ATTACH_PICTOGRAMS,
        TransformationKind.SIMPLIFY_STRUCTURE,
    }
)

#: Transformations that only shape layout; they carry no prompt template.
LAYOUT_TRANSFORMATIONS = frozenset(TransformationKind) - TEXT_TRANSFORMATIONS


class OutputModality(str, Enum):
    """Delivery channel of adapted content."""

    TEXT = "Text"
    AUDIO = "Audio"
    PICTOGRAM = "Pictogram"
    VIDEO = "Video"


class Standard(str, Enum):
    """Normative standards the catalog may cite."""

    WCAG22 = "WCAG22"
    EN301549 = "EN301549"
    ISO24495_1 = "ISO24495_1"
    COGA = "COGA"
    TRUSTWORTHY_AI = "TRUSTWORTHY_AI"


@dataclass(frozen=True)
class NormativeRef:
    """One clause of one standard, e.g. WCAG22 1.4.3."""

    standard: Standard
    clause: str
    title: str = ""

    def __post_init__(self):
        if not self.clause.strip():
            raise ValidationError("normative ref clause must be non-empty")

    @property
    def key(self) -> str:
        """Canonical ``STANDARD:clause`` form used in documents and traces."""
        return f"{self.standard.value}:{self.clause}"

    @classmethod
    def parse_key(cls, key: str, title: str = "") -> "NormativeRef":
        standard, sep, clause = key.partition(":")
        if not sep or not clause.strip():
            raise ValidationError(f"normative ref key must look like STANDARD:clause, got {key!r}")
        try:
            std = Standard(standard.strip())
        except ValueError:
            raise ValidationError(f"unknown standard {standard!r} in ref {key!r}") from None
        return cls(standard=std, clause=clause.strip(), title=title)


@dataclass(frozen=True)
class UserProfile:
    """Accessibility needs and presentation preferences of one user.

    ``profile_id`` is an opaque token; the profile carries no personal
    data. Two flags are forced by the declared needs so downstream
    consumers can rely on them:

    * ``cognitiveSupport`` is true whenever CognitiveDisability is declared
    * ``auditoryExclusion`` is true whenever HearingImpairment is declared
    """

    profile_id: str
    needs: frozenset = frozenset()
    flags: dict = field(default_factory=dict)
    preferred_modalities: tuple = ()
    locale: str = "en"

    def __post_init__(self):
        if not self.profile_id.strip():
            raise ValidationError("profileId must be non-empty")
        needs = frozenset(UserNeed(n) for n in self.needs)
        flags = {"cognitiveSupport": False, "auditoryExclusion": False}
        flags.update(self.flags)
        for name, value in flags.items():
            if not isinstance(value, bool):
                raise ValidationError(f"profile flag {name!r} must be boolean, got {value!r}")
        if UserNeed.COGNITIVE_DISABILITY in needs:
            flags["cognitiveSupport"] = True
        if UserNeed.HEARING_IMPAIRMENT in needs:
            flags["auditoryExclusion"] = True
        modalities = tuple(OutputModality(m) for m in self.preferred_modalities)
        object.__setattr__(self, "needs", needs)
        object.__setattr__(self, "flags", flags)
        object.__setattr__(self, "preferred_modalities", modalities)

    def flag(self, name: str) -> bool:
        return bool(self.flags.get(name, False))

    def to_dict(self) -> dict:
        return {
            "profileId": self.profile_id,
            "needs": sorted(n.value for n in self.needs),
            "flags": dict(sorted(self.flags.items())),
            "preferredModalities": [m.value for m in self.preferred_modalities],
            "locale": self.locale,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "UserProfile":
        if not isinstance(data, dict):
            raise ValidationError("profile must be an object")
        try:
            return cls(
                profile_id=str(data["profileId"]),
                needs=frozenset(data.get("needs", ())),
                flags=dict(data.get("flags", {})),
                preferred_modalities=tuple(data.get("preferredModalities", ())),
                locale=str(data.get("locale", "en")),
            )
        except KeyError as exc:
            raise ValidationError(f"profile is missing field {exc.args[0]!r}") from None
        except ValueError as exc:
            raise ValidationError(f"invalid profile: {exc}") from None


@dataclass(frozen=True)
class DomainInput:
    """Source content to adapt, e.g. one post-consultation note."""

    input_id: str
    text: str
    protected_terms: tuple = ()
    locale: str = "en"

    def __post_init__(self):
        if not self.text.strip():
            raise ValidationError("input text must be non-empty")
        terms = tuple(str(t) for t in self.protected_terms)
        for term in terms:
            if term not in self.text:
                raise ValidationError(f"protected term {term!r} does not occur verbatim in the text")
        object.__setattr__(self, "protected_terms", terms)

    def to_dict(self) -> dict:
        return {
            "inputId": self.input_id,
            "text": self.text,
            "protectedTerms": list(self.protected_terms),
            "locale": self.locale,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DomainInput":
        if not isinstance(data, dict):
            raise ValidationError("input must be an object")
        try:
            return cls(
                input_id=str(data["inputId"]),
                text=str(data["text"]),
                protected_terms=tuple(data.get("protectedTerms", ())),
                locale=str(data.get("locale", "en")),
            )
        except KeyError as exc:
            raise ValidationError(f"input is missing field {exc.args[0]!r}") from None


@dataclass(frozen=True)
class PictogramAnnotation:
    """Binds one pictogram to one step via the keyword that triggered it."""

    step_index: int  # 1-based
    keyword: str
    pictogram_id: str

    def to_dict(self) -> dict:
        return {
            "stepIndex": self.step_index,
            "keyword": self.keyword,
            "pictogramId": self.pictogram_id,
        }


@dataclass(frozen=True)
class TransformResult:
    """Structured output of one backend transformation."""

    plain_text: str
    steps: tuple = ()
    pictogram_annotations: tuple = ()
    raw_response: str = ""

    def __post_init__(self):
        steps = tuple(str(s) for s in self.steps)
        annotations = tuple(self.pictogram_annotations)
        for ann in annotations:
            if not 1 <= ann.step_index <= len(steps):
                raise ValidationError(
                    f"pictogram annotation step index {ann.step_index} out of range 1..{len(steps)}"
                )
        object.__setattr__(self, "steps", steps)
        object.__setattr__(self, "pictogram_annotations", annotations)

    def presented_text(self) -> str:
        """The exact text a renderer would present; hashed into the trace."""
        parts = [self.plain_text]
        parts.extend(self.steps)
        return "\n".join(parts)

    def to_dict(self) -> dict:
        return {
            "plainText": self.plain_text,
            "steps": list(self.steps),
            "pictogramAnnotations": [a.to_dict() for a in self.pictogram_annotations],
        }


@dataclass(frozen=True)
class BackendDescriptor:
    """Identity of the transformation backend, recorded in every trace."""

    backend_id: str
    kind: str  # "Mock" | "RemoteChatAPI"
    model_version: str
    endpoint: Optional[str] = None

    def __post_init__(self):
        if self.kind not in ("Mock", "RemoteChatAPI"):
            raise ValidationError(f"unknown backend kind {self.kind!r}")
        if not self.model_version:
            raise ValidationError("modelVersion must be non-empty")
        if self.kind == "RemoteChatAPI" and not self.endpoint:
            raise ValidationError("remote backends require an endpoint")
