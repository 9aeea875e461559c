"""Requirement catalog: normative clauses, derived requirements, REQ nodes.

The catalog is loaded from a YAML document with three top-level sections
(``normative_refs``, ``dars``, ``requirements``) and is immutable after
load, so it can be shared freely across threads. Deriving requirements
for a profile is a pure lookup: a DAR applies exactly when its user need
is declared by the profile.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass
from typing import Iterable, Optional

import yaml

from .errors import DanglingRefError, DuplicateIdError, ParseError, ValidationError
from .model import NormativeRef, TransformationKind, UserNeed, UserProfile

DEFAULT_CATALOG_RESOURCE = "catalog.yaml"


@dataclass(frozen=True)
class DerivedRequirement:
    """One user need bound to its transformations and normative clauses."""

    dar_id: str
    need: UserNeed
    statement: str
    transformations: tuple
    refs: tuple

    def __post_init__(self):
        if not self.transformations:
            raise ValidationError(f"{self.dar_id}: transformations must be non-empty")
        if not self.refs:
            raise ValidationError(f"{self.dar_id}: refs must be non-empty")

    def to_dict(self) -> dict:
        return {
            "darId": self.dar_id,
            "need": self.need.value,
            "statement": self.statement,
            "transformations": [t.value for t in self.transformations],
            "refs": [r.key for r in self.refs],
        }


@dataclass(frozen=True)
class RequirementNode:
    """A requirement with satisfy/trace links to concrete components."""

    req_id: str
    title: str
    refs: tuple
    satisfied_by: tuple
    traced_by: tuple

    def __post_init__(self):
        if not self.satisfied_by:
            raise ValidationError(f"{self.req_id}: satisfiedBy must be non-empty")

    def to_dict(self) -> dict:
        return {
            "reqId": self.req_id,
            "title": self.title,
            "refs": [r.key for r in self.refs],
            "satisfiedBy": list(self.satisfied_by),
            "tracedBy": list(self.traced_by),
        }


@dataclass(frozen=True)
class Catalog:
    version: int
    normative_refs: tuple
    dars: tuple
    requirements: tuple

    def ref(self, key: str) -> NormativeRef:
        return self._refs_by_key[key]

    @property
    def _refs_by_key(self) -> dict:
        return {r.key: r for r in self.normative_refs}

    def dar(self, dar_id: str) -> Optional[DerivedRequirement]:
        for dar in self.dars:
            if dar.dar_id == dar_id:
                return dar
        return None

    def requirement(self, req_id: str) -> Optional[RequirementNode]:
        for node in self.requirements:
            if node.req_id == req_id:
                return node
        return None

    def dar_ids(self) -> list:
        return [d.dar_id for d in self.dars]

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "normative_refs": [
                {"standard": r.standard.value, "clause": r.clause, "title": r.title}
                for r in self.normative_refs
            ],
            "dars": [d.to_dict() for d in self.dars],
            "requirements": [n.to_dict() for n in self.requirements],
        }


def _require(mapping: dict, key: str, context: str):
    if key not in mapping:
        raise ParseError(f"{context}: missing field {key!r}")
    return mapping[key]


def load_catalog(source: str) -> Catalog:
    """Parse and validate a catalog document.

    Raises ParseError on malformed YAML or missing sections, DuplicateIdError
    on repeated identifiers and DanglingRefError when a DAR or requirement
    cites a clause the document does not declare.
    """
    try:
        doc = yaml.safe_load(source)
    except yaml.YAMLError as exc:
        raise ParseError(f"catalog is not valid YAML: {exc}") from None
    if not isinstance(doc, dict):
        raise ParseError("catalog document must be a mapping with sections "
                         "normative_refs, dars, requirements")

    refs_by_key = {}
    for raw in _require(doc, "normative_refs", "catalog"):
        try:
            ref = NormativeRef(
                standard=_coerce_standard(_require(raw, "standard", "normative ref")),
                clause=str(_require(raw, "clause", "normative ref")),
                title=str(raw.get("title", "")),
            )
        except ValidationError as exc:
            raise ParseError(str(exc)) from None
        if ref.key in refs_by_key:
            raise DuplicateIdError(f"normative ref {ref.key!r} declared twice")
        refs_by_key[ref.key] = ref

    def resolve(keys: Iterable, owner: str) -> tuple:
        resolved = []
        for key in keys:
            if key not in refs_by_key:
                raise DanglingRefError(f"{owner} cites undeclared normative ref {key!r}")
            resolved.append(refs_by_key[key])
        return tuple(resolved)

    dars = []
    seen_dars = set()
    for raw in _require(doc, "dars", "catalog"):
        dar_id = str(_require(raw, "id", "dar"))
        if dar_id in seen_dars:
            raise DuplicateIdError(f"DAR id {dar_id!r} declared twice")
        seen_dars.add(dar_id)
        try:
            need = UserNeed(str(_require(raw, "need", dar_id)))
        except ValueError:
            raise ParseError(f"{dar_id}: unknown user need {raw.get('need')!r}") from None
        try:
            transformations = tuple(
                TransformationKind(t) for t in _require(raw, "transformations", dar_id)
            )
        except ValueError as exc:
            raise ParseError(f"{dar_id}: {exc}") from None
        dars.append(
            DerivedRequirement(
                dar_id=dar_id,
                need=need,
                statement=str(raw.get("statement", "")),
                transformations=transformations,
                refs=resolve(_require(raw, "refs", dar_id), dar_id),
            )
        )

    requirements = []
    seen_reqs = set()
    for raw in _require(doc, "requirements", "catalog"):
        req_id = str(_require(raw, "id", "requirement"))
        if req_id in seen_reqs:
            raise DuplicateIdError(f"requirement id {req_id!r} declared twice")
        seen_reqs.add(req_id)
        requirements.append(
            RequirementNode(
                req_id=req_id,
                title=str(raw.get("title", "")),
                refs=resolve(raw.get("refs", ()), req_id),
                satisfied_by=tuple(str(s) for s in raw.get("satisfied_by", ())),
                traced_by=tuple(str(t) for t in raw.get("traced_by", ())),
            )
        )

    return Catalog(
        version=int(doc.get("version", 1)),
        normative_refs=tuple(refs_by_key.values()),
        dars=tuple(sorted(dars, key=lambda d: d.dar_id)),
        requirements=tuple(requirements),
    )


def _coerce_standard(value) -> "Standard":
    from .model import Standard

    try:
        return Standard(str(value))
    except ValueError:
        raise ParseError(f"unknown standard {value!r}") from None


def load_default_catalog() -> Catalog:
    """Load the catalog bundled with the package."""
    text = (
        importlib.resources.files("adapt_forge")
        .joinpath("data", DEFAULT_CATALOG_RESOURCE)
        .read_text(encoding="utf-8")
    )
    return load_catalog(text)


def load_catalog_file(path) -> Catalog:
    with open(path, "r", encoding="utf-8") as fh:
        return load_catalog(fh.read())


def serialize_catalog(catalog: Catalog) -> str:
    """Stable YAML rendering; ``load_catalog`` parses it back to an equal catalog."""
    doc = {
        "version": catalog.version,
        "normative_refs": [
            {"standard": r.standard.value, "clause": r.clause, "title": r.title}
            for r in catalog.normative_refs
        ],
        "dars": [
            {
                "id": d.dar_id,
                "need": d.need.value,
                "statement": d.statement,
                "transformations": [t.value for t in d.transformations],
                "refs": [r.key for r in d.refs],
            }
            for d in catalog.dars
        ],
        "requirements": [
            {
                "id": n.req_id,
                "title": n.title,
                "refs": [r.key for r in n.refs],
                "satisfied_by": list(n.satisfied_by),
                "traced_by": list(n.traced_by),
            }
            for n in catalog.requirements
        ],
    }
    return yaml.safe_dump(doc, sort_keys=False, allow_unicode=True)


def derive_requirements(profile: UserProfile, catalog: Catalog) -> list:
    """Return the DARs matching the profile's needs, ordered by DAR id.

    The result depends on (needs, catalog) only; flags and modality
    preferences never change the derived set.
    """
    return [d for d in catalog.dars if d.need in profile.needs]
