"""Append-only trace ledger and compliance reporting.

Every adaptation leaves one record linking needs, derived requirements,
rules, normative references, gate reports, and the produced component ids.
Records are newline-delimited JSON with an offset index sidecar; there is no
update or delete API. Profile data never enters the ledger — only need enum
values and derived ids.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from threading import Lock
from typing import Iterable, Mapping, Optional, Sequence

from .catalog import Catalog
from .errors import PrivacyViolationError, StorageError, ValidationError
from .gates import GateName, GateReport
from .model import TransformationKind
from .rules import RuleSet
from .ui import ComponentKind, MIN_TEXT_CONTRAST, ThemeName, UISchema

PRIVACY_FORBIDDEN_KEYS = frozenset(
    {"name", "email", "address", "diagnosis", "rawProfile"}
)

PIPELINE_STEPS = (
    "derive_requirements",
    "activate_rules",
    "instantiate_prompt",
    "transform_and_gate",
    "build_schema",
)


def scan_for_privacy_violations(obj, path: str = "") -> list[str]:
    """Recursive key scan; returns the paths of forbidden keys."""
    found: list[str] = []
    if isinstance(obj, Mapping):
        for key, value in obj.items():
            where = f"{path}.{key}" if path else str(key)
            if key in PRIVACY_FORBIDDEN_KEYS:
                found.append(where)
            found.extend(scan_for_privacy_violations(value, where))
    elif isinstance(obj, (list, tuple)):
        for i, item in enumerate(obj):
            found.extend(scan_for_privacy_violations(item, f"{path}[{i}]"))
    return found


@dataclass(frozen=True)
class TraceRecord:
    job_id: str
    profile_need_ids: tuple[str, ...]
    dar_ids: tuple[str, ...]
    rule_ids: tuple[str, ...]
    normative_refs: tuple[str, ...]
    template_id: Optional[str]
    template_version: Optional[int]
    backend_id: str
    model_version: str
    attempts: int
    gate_reports: tuple[GateReport, ...]
    escalated: bool
    output_component_ids: tuple[str, ...]
    content_hash: str
    pipeline_steps: tuple[str, ...] = PIPELINE_STEPS
    review_action: Optional[str] = None
    record_id: Optional[int] = None
    timestamp: Optional[float] = None

    def __post_init__(self) -> None:
        if len(self.gate_reports) != self.attempts:
            raise ValidationError(
                f"record must hold one gate report per attempt: "
                f"{len(self.gate_reports)} reports, {self.attempts} attempts"
            )
        if not self.model_version:
            raise ValidationError("modelVersion must be recorded in every record")

    def final_report(self) -> Optional[GateReport]:
        return self.gate_reports[-1] if self.gate_reports else None

    def to_dict(self) -> dict:
        return {
            "recordId": self.record_id,
            "timestamp": self.timestamp,
            "jobId": self.job_id,
            "profileNeedIds": list(self.profile_need_ids),
            "darIds": list(self.dar_ids),
            "ruleIds": list(self.rule_ids),
            "normativeRefs": list(self.normative_refs),
            "templateId": self.template_id,
            "templateVersion": self.template_version,
            "backendId": self.backend_id,
            "modelVersion": self.model_version,
            "attempts": self.attempts,
            "gateReports": [r.to_dict() for r in self.gate_reports],
            "escalated": self.escalated,
            "reviewAction": self.review_action,
            "outputComponentIds": list(self.output_component_ids),
            "contentHash": self.content_hash,
            "pipelineSteps": list(self.pipeline_steps),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TraceRecord":
        return cls(
            job_id=doc["jobId"],
            profile_need_ids=tuple(doc["profileNeedIds"]),
            dar_ids=tuple(doc["darIds"]),
            rule_ids=tuple(doc["ruleIds"]),
            normative_refs=tuple(doc["normativeRefs"]),
            template_id=doc.get("templateId"),
            template_version=doc.get("templateVersion"),
            backend_id=doc["backendId"],
            model_version=doc["modelVersion"],
            attempts=doc["attempts"],
            gate_reports=tuple(GateReport.from_dict(g) for g in doc["gateReports"]),
            escalated=doc["escalated"],
            output_component_ids=tuple(doc["outputComponentIds"]),
            content_hash=doc["contentHash"],
            pipeline_steps=tuple(doc.get("pipelineSteps", PIPELINE_STEPS)),
            review_action=doc.get("reviewAction"),
            record_id=doc.get("recordId"),
            timestamp=doc.get("timestamp"),
        )


class TraceLedger:
    """Durable append-only store. One JSON object per line, offsets in a
    sidecar index, fsync before an append returns."""

    def __init__(self, path) -> None:
        self._path = Path(path)
        self._index_path = self._path.with_suffix(self._path.suffix + ".idx")
        self._lock = Lock()
        self._path.parent.mkdir(parents=True, exist_ok=True)
        self._next_id = self._recover_next_id()

    def _recover_next_id(self) -> int:
        last = 0
        if self._path.exists():
            for record in self.records():
                if record.record_id and record.record_id > last:
                    last = record.record_id
        return last + 1

    def append(self, record: TraceRecord) -> int:
        with self._lock:
            doc = record.to_dict()
            violations = scan_for_privacy_violations(doc)
            if violations:
                raise PrivacyViolationError(
                    f"record contains forbidden keys: {', '.join(violations)}"
                )
            record_id = self._next_id
            doc["recordId"] = record_id
            if doc.get("timestamp") is None:
                doc["timestamp"] = time.time()
            line = json.dumps(doc, sort_keys=True)
            try:
                offset = self._path.stat().st_size if self._path.exists() else 0
                with open(self._path, "a", encoding="utf-8") as fh:
                    fh.write(line + "\n")
                    fh.flush()
                    os.fsync(fh.fileno())
                with open(self._index_path, "a", encoding="utf-8") as fh:
                    fh.write(f"{record_id}\t{offset}\n")
                    fh.flush()
                    os.fsync(fh.fileno())
            except OSError as exc:
                raise StorageError(f"ledger append failed: {exc}") from exc
            self._next_id = record_id + 1
            return record_id

    def records(self) -> list[TraceRecord]:
        if not self._path.exists():
            return []
        out: list[TraceRecord] = []
        with open(self._path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    out.append(TraceRecord.from_dict(json.loads(line)))
        return out

    def by_job(self, job_id: str) -> list[TraceRecord]:
        return [r for r in self.records() if r.job_id == job_id]

    def count(self) -> int:
        return len(self.records())

    def serialized_text(self) -> str:
        if not self._path.exists():
            return ""
        return self._path.read_text(encoding="utf-8")


# ---------------------------------------------------------------------------
# Compliance


class ComplianceStatus(str, Enum):
    SATISFIED = "Satisfied"
    UNSATISFIED = "Unsatisfied"
    NOT_APPLICABLE = "NotApplicable"


@dataclass(frozen=True)
class ComplianceEntry:
    req_id: str
    title: str
    status: ComplianceStatus
    evidence: tuple[tuple[int, str], ...] = ()

    def __post_init__(self) -> None:
        if self.status is ComplianceStatus.SATISFIED and not self.evidence:
            raise ValidationError(
                f"{self.req_id}: Satisfied status requires evidence"
            )

    def to_dict(self) -> dict:
        return {
            "reqId": self.req_id,
            "title": self.title,
            "status": self.status.value,
            "evidence": [
                {"recordId": rid, "componentId": cid} for rid, cid in self.evidence
            ],
        }


@dataclass(frozen=True)
class ComplianceReport:
    entries: tuple[ComplianceEntry, ...]
    generated_at: float = field(default_factory=time.time)

    def entry(self, req_id: str) -> ComplianceEntry:
        for e in self.entries:
            if e.req_id == req_id:
                return e
        raise KeyError(req_id)

    def to_dict(self) -> dict:
        return {
            "generatedAt": self.generated_at,
            "requirements": [e.to_dict() for e in self.entries],
        }


def _rules_of_kind(rule_set: RuleSet, kind: TransformationKind) -> frozenset[str]:
    return frozenset(
        r.rule_id for r in rule_set.rules if r.transformation is kind
    )


def verify_satisfy_links(
    catalog: Catalog,
    ledger: TraceLedger,
    rule_set: RuleSet,
    schemas: Optional[Mapping[str, UISchema]] = None,
    feedback_component_ids: Iterable[tuple[str, str]] = (),
) -> ComplianceReport:
    """Evaluate each catalog requirement against the recorded evidence.

    schemas maps jobId to the served UISchema (needed to re-verify contrast
    and pictogram presence); feedback_component_ids are (jobId, componentId)
    pairs from persisted feedback.
    """
    schemas = schemas or {}
    records = ledger.records()
    feedback_pairs = list(feedback_component_ids)

    simplify_rules = _rules_of_kind(rule_set, TransformationKind.SIMPLIFY_TEXT)
    contrast_rules = _rules_of_kind(rule_set, TransformationKind.APPLY_HIGH_CONTRAST)
    picto_rules = _rules_of_kind(rule_set, TransformationKind.ATTACH_PICTOGRAMS)

    entries: list[ComplianceEntry] = []
    for req in catalog.requirements:
        if req.req_id == "REQ-PL-01":
            entries.append(
                _check_req(
                    req,
                    records,
                    applies=lambda r: bool(simplify_rules & set(r.rule_ids)),
                    satisfied=lambda r: (
                        (report := r.final_report()) is not None
                        and report.gate(GateName.READABILITY).passed
                    ),
                    evidence_component=lambda r: _first_component(r),
                )
            )
        elif req.req_id == "REQ-WCAG-01":
            entries.append(
                _check_req(
                    req,
                    records,
                    applies=lambda r: bool(contrast_rules & set(r.rule_ids)),
                    satisfied=lambda r: _schema_high_contrast(schemas.get(r.job_id)),
                    evidence_component=lambda r: _first_component(r),
                )
            )
        elif req.req_id == "REQ-MOD-02":
            entries.append(
                _check_req(
                    req,
                    records,
                    applies=lambda r: bool(picto_rules & set(r.rule_ids)),
                    satisfied=lambda r: _schema_has_pictogram_text(
                        schemas.get(r.job_id)
                    ),
                    evidence_component=lambda r: _first_pictogram(
                        schemas.get(r.job_id)
                    )
                    or _first_component(r),
                )
            )
        elif req.req_id == "REQ-FB-01":
            entries.append(_check_feedback_req(req, records, feedback_pairs))
        else:
            # catalog extension point: unknown REQ ids have no predicate yet
            entries.append(
                ComplianceEntry(
                    req_id=req.req_id,
                    title=req.title,
                    status=ComplianceStatus.NOT_APPLICABLE,
                )
            )
    return ComplianceReport(entries=tuple(entries))


def _first_component(record: TraceRecord) -> Optional[str]:
    return record.output_component_ids[0] if record.output_component_ids else None


def _first_pictogram(schema: Optional[UISchema]) -> Optional[str]:
    if schema is None:
        return None
    labels = schema.nodes_of_kind(ComponentKind.PICTOGRAM_LABEL)
    return labels[0].component_id if labels else None


def _schema_high_contrast(schema: Optional[UISchema]) -> bool:
    return (
        schema is not None
        and schema.theme is ThemeName.HIGH_CONTRAST
        and schema.min_text_contrast() >= MIN_TEXT_CONTRAST
    )


def _schema_has_pictogram_text(schema: Optional[UISchema]) -> bool:
    if schema is None:
        return False
    has_picto = bool(schema.nodes_of_kind(ComponentKind.PICTOGRAM_LABEL))
    has_text = bool(schema.root.content.strip()) or any(
        n.content.strip() for n in schema.nodes_of_kind(ComponentKind.STEP_BLOCK)
    )
    return has_picto and has_text


def _check_req(req, records, applies, satisfied, evidence_component) -> ComplianceEntry:
    applicable = [r for r in records if applies(r)]
    if not applicable:
        return ComplianceEntry(
            req_id=req.req_id, title=req.title, status=ComplianceStatus.NOT_APPLICABLE
        )
    evidence: list[tuple[int, str]] = []
    for record in applicable:
        if satisfied(record):
            component = evidence_component(record)
            if component and record.record_id is not None:
                evidence.append((record.record_id, component))
    if evidence:
        return ComplianceEntry(
            req_id=req.req_id,
            title=req.title,
            status=ComplianceStatus.SATISFIED,
            evidence=tuple(evidence),
        )
    return ComplianceEntry(
        req_id=req.req_id, title=req.title, status=ComplianceStatus.UNSATISFIED
    )


def _check_feedback_req(req, records, feedback_pairs) -> ComplianceEntry:
    if not records:
        return ComplianceEntry(
            req_id=req.req_id, title=req.title, status=ComplianceStatus.NOT_APPLICABLE
        )
    evidence: list[tuple[int, str]] = []
    for job_id, component_id in feedback_pairs:
        for record in records:
            if (
                record.job_id == job_id
                and component_id in record.output_component_ids
                and record.record_id is not None
            ):
                evidence.append((record.record_id, component_id))
                break
    if evidence:
        return ComplianceEntry(
            req_id=req.req_id,
            title=req.title,
            status=ComplianceStatus.SATISFIED,
            evidence=tuple(evidence),
        )
    return ComplianceEntry(
        req_id=req.req_id, title=req.title, status=ComplianceStatus.UNSATISFIED
    )


def verify_chain_integrity(
    ledger: TraceLedger, catalog: Catalog, rule_set: RuleSet
) -> list[str]:
    """Dangling-reference check: every id a record cites must resolve."""
    problems: list[str] = []
    known_rules = set(rule_set.rule_ids())
    known_dars = set(catalog.dar_ids())
    known_refs = {r.key for r in catalog.normative_refs}
    for record in ledger.records():
        rid = record.record_id
        for rule_id in record.rule_ids:
            if rule_id not in known_rules:
                problems.append(f"record {rid}: unknown rule {rule_id}")
        for dar_id in record.dar_ids:
            if dar_id not in known_dars:
                problems.append(f"record {rid}: unknown DAR {dar_id}")
        for ref in record.normative_refs:
            if ref not in known_refs:
                problems.append(f"record {rid}: unknown normative ref {ref}")
    return problems


def export_report(
    catalog: Catalog,
    ledger: TraceLedger,
    rule_set: RuleSet,
    schemas: Optional[Mapping[str, UISchema]] = None,
    feedback_component_ids: Iterable[tuple[str, str]] = (),
    format: str = "full",
) -> dict:
    if format not in ("full", "summary"):
        raise ValidationError(f"unknown report format: {format!r}")
    compliance = verify_satisfy_links(
        catalog, ledger, rule_set, schemas, feedback_component_ids
    )
    doc = {
        "complianceReport": compliance.to_dict(),
        "recordCount": ledger.count(),
    }
    if format == "full":
        doc["traceRecords"] = [r.to_dict() for r in ledger.records()]
        doc["integrityProblems"] = verify_chain_integrity(ledger, catalog, rule_set)
    return doc
