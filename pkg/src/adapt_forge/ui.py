"""Schema construction: transformed content to a renderer-agnostic UI tree.

The schema is server-driven: components, colors, target sizes, modalities,
interaction states, and per-component requirement references all live here,
so any renderer can show the adapted content without re-deciding anything.
Component ids are content hashes; the same inputs always produce the same
serialized schema, byte for byte.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Optional, Sequence

from .errors import EmptyResultError, UnmappedPictogramError, ValidationError
from .model import OutputModality, TransformationKind, TransformResult, UserProfile
from .pictograms import PictogramMap
from .rules import ActiveRuleSet

SCHEMA_VERSION = 1

# ---------------------------------------------------------------------------
# Contrast math (WCAG relative luminance)


def _linearize(channel: int) -> float:
    v = channel / 255.0
    return v / 12.92 if v <= 0.04045 else ((v + 0.055) / 1.055) ** 2.4


def relative_luminance(rgb: tuple[int, int, int]) -> float:
    r, g, b = rgb
    return 0.2126 * _linearize(r) + 0.7152 * _linearize(g) + 0.0722 * _linearize(b)


def _parse_hex(value: str) -> tuple[int, int, int]:
    s = value.lstrip("#")
    if len(s) != 6:
        raise ValidationError(f"expected a 6-digit hex color, got {value!r}")
    try:
        return tuple(int(s[i : i + 2], 16) for i in (0, 2, 4))  # type: ignore[return-value]
    except ValueError:
        raise ValidationError(f"bad hex color: {value!r}") from None


def _to_hex(rgb: tuple[int, int, int]) -> str:
    return "#%02X%02X%02X" % rgb


@dataclass(frozen=True)
class ColorPair:
    foreground: tuple[int, int, int]
    background: tuple[int, int, int]

    def __post_init__(self) -> None:
        for channel in (*self.foreground, *self.background):
            if not isinstance(channel, int) or not 0 <= channel <= 255:
                raise ValidationError(f"color channel out of range: {channel!r}")

    @classmethod
    def from_hex(cls, foreground: str, background: str) -> "ColorPair":
        return cls(_parse_hex(foreground), _parse_hex(background))

    def to_dict(self) -> dict:
        return {
            "foreground": _to_hex(self.foreground),
            "background": _to_hex(self.background),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ColorPair":
        return cls.from_hex(doc["foreground"], doc["background"])


def contrast_ratio(pair: ColorPair) -> float:
    la = relative_luminance(pair.foreground)
    lb = relative_luminance(pair.background)
    lighter, darker = max(la, lb), min(la, lb)
    return (lighter + 0.05) / (darker + 0.05)


# ---------------------------------------------------------------------------
# Themes


class ThemeName(str, Enum):
    DEFAULT = "Default"
    HIGH_CONTRAST = "HighContrast"


@dataclass(frozen=True)
class Theme:
    name: ThemeName
    body: ColorPair
    button: ColorPair
    banner: ColorPair


DEFAULT_THEME = Theme(
    name=ThemeName.DEFAULT,
    body=ColorPair.from_hex("#333333", "#FFFFFF"),
    button=ColorPair.from_hex("#FFFFFF", "#3B6E8F"),
    banner=ColorPair.from_hex("#1A1A1A", "#F5C518"),
)

# near-black on white body, inverted buttons; both sides clear 4.5 by a wide margin
HIGH_CONTRAST_THEME = Theme(
    name=ThemeName.HIGH_CONTRAST,
    body=ColorPair.from_hex("#1A1A1A", "#FFFFFF"),
    button=ColorPair.from_hex("#FFFFFF", "#1A1A1A"),
    banner=ColorPair.from_hex("#FFFFFF", "#1A1A1A"),
)

MIN_TEXT_CONTRAST = 4.5

# ---------------------------------------------------------------------------
# Interaction state machine


class InteractionState(str, Enum):
    READING = "Reading"
    NAVIGATING_STEPS = "NavigatingSteps"
    REQUESTING_HELP = "RequestingHelp"
    COMPLETING_TASK = "CompletingTask"


# Reading→CompletingTask is deliberately absent: the reader must pass
# through the steps before finishing.
STATE_TRANSITIONS: tuple[tuple[InteractionState, InteractionState], ...] = (
    (InteractionState.READING, InteractionState.NAVIGATING_STEPS),
    (InteractionState.NAVIGATING_STEPS, InteractionState.NAVIGATING_STEPS),
    (InteractionState.NAVIGATING_STEPS, InteractionState.REQUESTING_HELP),
    (InteractionState.REQUESTING_HELP, InteractionState.NAVIGATING_STEPS),
    (InteractionState.NAVIGATING_STEPS, InteractionState.COMPLETING_TASK),
)


@dataclass(frozen=True)
class StateMachine:
    states: tuple[InteractionState, ...]
    transitions: tuple[tuple[InteractionState, InteractionState], ...]

    def __post_init__(self) -> None:
        declared = set(self.states)
        for src, dst in self.transitions:
            if src not in declared or dst not in declared:
                raise ValidationError(
                    f"transition {src.value}->{dst.value} uses an undeclared state"
                )

    def allows(self, src: str, dst: str) -> bool:
        try:
            edge = (InteractionState(src), InteractionState(dst))
        except ValueError:
            return False
        return edge in self.transitions

    def to_dict(self) -> dict:
        return {
            "states": [s.value for s in self.states],
            "transitions": [[a.value, b.value] for a, b in self.transitions],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "StateMachine":
        return cls(
            states=tuple(InteractionState(s) for s in doc["states"]),
            transitions=tuple(
                (InteractionState(a), InteractionState(b))
                for a, b in doc["transitions"]
            ),
        )


DEFAULT_STATE_MACHINE = StateMachine(
    states=tuple(InteractionState), transitions=STATE_TRANSITIONS
)

# ---------------------------------------------------------------------------
# Components


class ComponentKind(str, Enum):
    STEP_BLOCK = "StepBlock"
    PICTOGRAM_LABEL = "PictogramLabel"
    BUTTON = "Button"
    ALERT_BANNER = "AlertBanner"
    FEEDBACK_SCALE = "FeedbackScale"
    CONTAINER = "Container"


# kinds whose content is rendered as text, and therefore contrast-checked
TEXT_KINDS = frozenset(
    {
        ComponentKind.STEP_BLOCK,
        ComponentKind.BUTTON,
        ComponentKind.ALERT_BANNER,
        ComponentKind.FEEDBACK_SCALE,
        ComponentKind.CONTAINER,
    }
)


@dataclass(frozen=True)
class UIComponentNode:
    component_id: str
    kind: ComponentKind
    content: str
    colors: ColorPair
    target_size: tuple[int, int]
    requirement_refs: tuple[str, ...]
    children: tuple["UIComponentNode", ...] = ()
    step_number: Optional[int] = None
    alt_text: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.component_id:
            raise ValidationError("componentId must be non-empty")
        if self.kind is ComponentKind.STEP_BLOCK:
            if self.step_number is None or self.step_number < 1:
                raise ValidationError("StepBlock requires a 1-based step number")
        if not self.children and not self.requirement_refs:
            raise ValidationError(
                f"leaf component {self.component_id} ({self.kind.value}) "
                "must carry at least one requirement reference"
            )
        w, h = self.target_size
        if w < 0 or h < 0:
            raise ValidationError("targetSize must be non-negative")

    def is_leaf(self) -> bool:
        return not self.children

    def to_dict(self) -> dict:
        doc = {
            "componentId": self.component_id,
            "kind": self.kind.value,
            "content": self.content,
            "colors": self.colors.to_dict(),
            "targetSize": list(self.target_size),
            "requirementRefs": list(self.requirement_refs),
            "children": [c.to_dict() for c in self.children],
        }
        if self.step_number is not None:
            doc["stepNumber"] = self.step_number
        if self.alt_text is not None:
            doc["alt"] = self.alt_text
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "UIComponentNode":
        return cls(
            component_id=doc["componentId"],
            kind=ComponentKind(doc["kind"]),
            content=doc.get("content", ""),
            colors=ColorPair.from_dict(doc["colors"]),
            target_size=tuple(doc["targetSize"]),  # type: ignore[arg-type]
            requirement_refs=tuple(doc.get("requirementRefs", ())),
            children=tuple(cls.from_dict(c) for c in doc.get("children", ())),
            step_number=doc.get("stepNumber"),
            alt_text=doc.get("alt"),
        )


@dataclass(frozen=True)
class UISchema:
    root: UIComponentNode
    modalities: frozenset[OutputModality]
    interaction_states: StateMachine
    theme: ThemeName
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for node in self.walk():
            if node.component_id in seen:
                raise ValidationError(
                    f"duplicate componentId in schema: {node.component_id}"
                )
            seen.add(node.component_id)
        if self.theme is ThemeName.HIGH_CONTRAST:
            for node in self.walk():
                if node.kind in TEXT_KINDS and node.content:
                    ratio = contrast_ratio(node.colors)
                    if ratio < MIN_TEXT_CONTRAST:
                        raise ValidationError(
                            f"high-contrast schema has a text node at ratio "
                            f"{ratio:.2f} (< {MIN_TEXT_CONTRAST})"
                        )

    def walk(self) -> Iterator[UIComponentNode]:
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def leaf_component_ids(self) -> tuple[str, ...]:
        return tuple(n.component_id for n in self.walk() if n.is_leaf())

    def component_ids(self) -> tuple[str, ...]:
        return tuple(n.component_id for n in self.walk())

    def nodes_of_kind(self, kind: ComponentKind) -> tuple[UIComponentNode, ...]:
        return tuple(n for n in self.walk() if n.kind is kind)

    def min_text_contrast(self) -> float:
        ratios = [
            contrast_ratio(n.colors)
            for n in self.walk()
            if n.kind in TEXT_KINDS and n.content
        ]
        return min(ratios) if ratios else 21.0

    def all_requirement_refs(self) -> frozenset[str]:
        refs: set[str] = set()
        for node in self.walk():
            refs |= set(node.requirement_refs)
        return frozenset(refs)

    def to_dict(self) -> dict:
        return {
            "schemaVersion": self.schema_version,
            "theme": self.theme.value,
            "modalities": sorted(m.value for m in self.modalities),
            "interactionStates": self.interaction_states.to_dict(),
            "root": self.root.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "UISchema":
        version = doc.get("schemaVersion")
        if version != SCHEMA_VERSION:
            raise ValidationError(
                f"unsupported schemaVersion {version!r}; this build reads "
                f"version {SCHEMA_VERSION}"
            )
        return cls(
            root=UIComponentNode.from_dict(doc["root"]),
            modalities=frozenset(OutputModality(m) for m in doc["modalities"]),
            interaction_states=StateMachine.from_dict(doc["interactionStates"]),
            theme=ThemeName(doc["theme"]),
            schema_version=version,
        )


def serialize_schema(schema: UISchema) -> str:
    """Canonical serialization: sorted keys, fixed indent. Determinism is
    load-bearing — golden files and the trace contentHash depend on it."""
    return json.dumps(schema.to_dict(), sort_keys=True, indent=2) + "\n"


def parse_schema(text: str) -> UISchema:
    return UISchema.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# Schema construction

# structural components always exist, so they carry fixed baseline refs
# rather than rule-derived ones
FEEDBACK_REFS = ("REQ-FB-01",)
STRUCTURAL_REFS = ("ISO24495_1:Principles",)
BASELINE_REFS = frozenset(FEEDBACK_REFS) | frozenset(STRUCTURAL_REFS)

LARGE_TARGET_SIZE = (48, 48)
REGULAR_TARGET_SIZE = (32, 32)
TEXT_TARGET_SIZE = (0, 0)  # non-interactive

FEEDBACK_PROMPT = "How clear are these instructions? (1 = unclear, 5 = very clear)"
ALERT_TEXT = "Visual alerts are enabled. Watch this banner for important changes."


def select_modalities(
    profile: UserProfile, active_rules: ActiveRuleSet
) -> frozenset[OutputModality]:
    chosen = set(profile.preferred_modalities) | {OutputModality.TEXT}
    if active_rules.has(TransformationKind.DISABLE_AUDIO):
        chosen.discard(OutputModality.AUDIO)
    if active_rules.has(TransformationKind.ATTACH_PICTOGRAMS):
        chosen.add(OutputModality.PICTOGRAM)
    return frozenset(chosen)


def _component_id(path: str, kind: ComponentKind, content: str, extra: str = "") -> str:
    digest = hashlib.sha256(
        f"{path}|{kind.value}|{content}|{extra}".encode("utf-8")
    ).hexdigest()
    return f"c-{digest[:16]}"


def _rule_refs(active_rules: ActiveRuleSet, kind: TransformationKind) -> tuple[str, ...]:
    for entry in active_rules:
        if entry.rule.transformation is kind:
            refs = [r.key for r in entry.rule.refs]
            refs.extend(d for d in entry.dar_ids if d not in refs)
            return tuple(refs)
    return ()


def build_schema(
    result: TransformResult,
    active_rules: ActiveRuleSet,
    profile: UserProfile,
    pictos: PictogramMap,
) -> UISchema:
    """Assemble the component tree the reviewer and end user will see.

    Layout follows the active rules only: steps appear when the step rule
    fired, pictograms when the pictogram rule fired, and so on. Inactive
    rules leave no trace in the schema.
    """
    if result is None or not result.plain_text.strip():
        raise EmptyResultError("cannot build a schema from an empty result")

    high_contrast = active_rules.has(TransformationKind.APPLY_HIGH_CONTRAST)
    theme = HIGH_CONTRAST_THEME if high_contrast else DEFAULT_THEME
    large = active_rules.has(TransformationKind.RENDER_LARGE_TARGETS)
    button_size = LARGE_TARGET_SIZE if large else REGULAR_TARGET_SIZE
    with_steps = active_rules.has(TransformationKind.STRUCTURE_AS_STEPS)
    with_pictos = active_rules.has(TransformationKind.ATTACH_PICTOGRAMS)

    step_refs = _rule_refs(active_rules, TransformationKind.STRUCTURE_AS_STEPS)
    picto_refs = _rule_refs(active_rules, TransformationKind.ATTACH_PICTOGRAMS)
    alert_refs = _rule_refs(active_rules, TransformationKind.ENABLE_VISUAL_ALERTS)
    button_refs = _rule_refs(active_rules, TransformationKind.RENDER_LARGE_TARGETS)
    root_refs = _rule_refs(active_rules, TransformationKind.SIMPLIFY_TEXT)
    contrast_refs = _rule_refs(active_rules, TransformationKind.APPLY_HIGH_CONTRAST)
    # leaves untouched by any rule still trace back to the active DARs, so
    # the schema ref union stays inside ruleRefs + darIds; the structural
    # ref only covers the bare passthrough schema with nothing active
    fallback_refs = tuple(sorted(active_rules.all_dar_ids())) or STRUCTURAL_REFS

    children: list[UIComponentNode] = []

    if active_rules.has(TransformationKind.ENABLE_VISUAL_ALERTS):
        children.append(
            UIComponentNode(
                component_id=_component_id("alert", ComponentKind.ALERT_BANNER, ALERT_TEXT),
                kind=ComponentKind.ALERT_BANNER,
                content=ALERT_TEXT,
                colors=theme.banner,
                target_size=TEXT_TARGET_SIZE,
                requirement_refs=alert_refs or fallback_refs,
            )
        )

    if with_steps:
        annotations_by_step: dict[int, list] = {}
        for a in result.pictogram_annotations:
            annotations_by_step.setdefault(a.step_index, []).append(a)
        for number, step_text in enumerate(result.steps, start=1):
            picto_children: list[UIComponentNode] = []
            if with_pictos:
                for a in annotations_by_step.get(number, []):
                    if pictos.lookup(a.keyword) is None and not pictos.has_id(
                        a.pictogram_id
                    ):
                        raise UnmappedPictogramError(
                            f"annotation keyword {a.keyword!r} is not in the "
                            "pictogram map"
                        )
                    asset = pictos.asset(a.pictogram_id)  # raises on unknown id
                    picto_children.append(
                        UIComponentNode(
                            component_id=_component_id(
                                f"step{number}/picto",
                                ComponentKind.PICTOGRAM_LABEL,
                                a.pictogram_id,
                                extra=a.keyword,
                            ),
                            kind=ComponentKind.PICTOGRAM_LABEL,
                            content=a.pictogram_id,
                            colors=theme.body,
                            target_size=TEXT_TARGET_SIZE,
                            requirement_refs=picto_refs or fallback_refs,
                            alt_text=asset.alt_text,
                        )
                    )
            children.append(
                UIComponentNode(
                    component_id=_component_id(
                        f"step{number}", ComponentKind.STEP_BLOCK, step_text
                    ),
                    kind=ComponentKind.STEP_BLOCK,
                    content=step_text,
                    colors=theme.body,
                    target_size=TEXT_TARGET_SIZE,
                    requirement_refs=step_refs or fallback_refs,
                    children=tuple(picto_children),
                    step_number=number,
                )
            )
        for label in ("Previous step", "Next step", "Help", "Finish"):
            children.append(
                UIComponentNode(
                    component_id=_component_id("nav", ComponentKind.BUTTON, label),
                    kind=ComponentKind.BUTTON,
                    content=label,
                    colors=theme.button,
                    target_size=button_size,
                    requirement_refs=button_refs or fallback_refs,
                )
            )

    children.append(
        UIComponentNode(
            component_id=_component_id("feedback", ComponentKind.FEEDBACK_SCALE, FEEDBACK_PROMPT),
            kind=ComponentKind.FEEDBACK_SCALE,
            content=FEEDBACK_PROMPT,
            colors=theme.body,
            target_size=button_size,
            requirement_refs=FEEDBACK_REFS,
        )
    )

    root_ref_list = list(root_refs)
    for extra in contrast_refs:
        if extra not in root_ref_list:
            root_ref_list.append(extra)
    if not root_ref_list:
        root_ref_list = list(fallback_refs)

    root = UIComponentNode(
        component_id=_component_id("root", ComponentKind.CONTAINER, result.plain_text),
        kind=ComponentKind.CONTAINER,
        content=result.plain_text,
        colors=theme.body,
        target_size=TEXT_TARGET_SIZE,
        requirement_refs=tuple(root_ref_list),
        children=tuple(children),
    )

    return UISchema(
        root=root,
        modalities=select_modalities(profile, active_rules),
        interaction_states=DEFAULT_STATE_MACHINE,
        theme=theme.name,
    )
