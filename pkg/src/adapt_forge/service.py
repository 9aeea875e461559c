"""End-to-end orchestration: jobs, the HoTL review queue, and feedback.

The pipeline runs derive -> activate -> prompt -> transform+gate -> schema
-> trace, in that order, and the order is visible in every record. Jobs are
file-persisted; submission is asynchronous (clients poll), while run_sync
serves the CLI. A schema is only served when its job was accepted by the
gates or explicitly approved by a human.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from threading import Lock
from typing import Optional, Sequence

from .backends import Backend, make_backend
from .catalog import Catalog, derive_requirements, load_catalog_file, load_default_catalog
from .config import AppConfig
from .errors import (
    BackendUnavailableError,
    IllegalTransitionError,
    JobFailedError,
    UnknownComponentError,
    UnknownJobError,
    ValidationError,
)
from .gates import GateReport, LoopStatus, regeneration_loop, run_gates
from .ledger import PIPELINE_STEPS, TraceLedger, TraceRecord, export_report
from .model import DomainInput, PictogramAnnotation, TransformResult, UserProfile
from .pictograms import PictogramMap, load_default_pictograms, load_pictogram_file
from .prompts import PromptStore, instantiate, load_default_store
from .rules import ActiveRuleSet, RuleSet, activate_rules, explain_activation, load_default_rules, load_rules_file, validate_rules
from .ui import UISchema, build_schema

logger = logging.getLogger(__name__)

PASSTHROUGH_TEMPLATE = "T-PASSTHROUGH"

_SENTENCE_SPLIT_RE = re.compile(r"(?<=[.!?])\s+")


class JobStatus(str, Enum):
    PENDING = "Pending"
    RUNNING = "Running"
    ACCEPTED = "Accepted"
    ESCALATED = "Escalated"
    FAILED = "Failed"
    APPROVED = "Approved"
    REJECTED = "Rejected"


REVIEWABLE_STATUSES = frozenset({JobStatus.ESCALATED, JobStatus.ACCEPTED})
REVIEW_ACTIONS = ("Approve", "Reject", "Edit")


@dataclass
class AdaptationJob:
    job_id: str
    profile: UserProfile
    input: DomainInput
    status: JobStatus = JobStatus.PENDING
    schema: Optional[UISchema] = None
    trace_record_ids: list[int] = field(default_factory=list)
    candidate: Optional[TransformResult] = None
    reports: tuple[GateReport, ...] = ()
    error: Optional[str] = None
    human_approved: bool = False
    sequence: int = 0

    def latest_report(self) -> Optional[GateReport]:
        return self.reports[-1] if self.reports else None

    def servable_schema(self) -> Optional[UISchema]:
        """The override rule: content is shown when it passed the gates, or
        when a human explicitly approved it despite them."""
        if self.status not in (JobStatus.ACCEPTED, JobStatus.APPROVED):
            return None
        if self.schema is None:
            return None
        report = self.latest_report()
        gates_ok = report is not None and report.overall_passed
        if gates_ok or self.human_approved:
            return self.schema
        return None

    def to_dict(self) -> dict:
        return {
            "jobId": self.job_id,
            "profile": self.profile.to_dict(),
            "input": self.input.to_dict(),
            "status": self.status.value,
            "schema": self.schema.to_dict() if self.schema else None,
            "traceRecordIds": list(self.trace_record_ids),
            "candidate": self.candidate.to_dict() if self.candidate else None,
            "candidateRaw": self.candidate.raw_response if self.candidate else None,
            "reports": [r.to_dict() for r in self.reports],
            "error": self.error,
            "humanApproved": self.human_approved,
            "sequence": self.sequence,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "AdaptationJob":
        candidate = None
        if doc.get("candidate"):
            c = doc["candidate"]
            candidate = TransformResult(
                plain_text=c["plainText"],
                steps=tuple(c["steps"]),
                pictogram_annotations=tuple(
                    PictogramAnnotation(
                        step_index=a["stepIndex"],
                        keyword=a["keyword"],
                        pictogram_id=a["pictogramId"],
                    )
                    for a in c.get("pictogramAnnotations", ())
                ),
                raw_response=doc.get("candidateRaw") or "",
            )
        return cls(
            job_id=doc["jobId"],
            profile=UserProfile.from_dict(doc["profile"]),
            input=DomainInput.from_dict(doc["input"]),
            status=JobStatus(doc["status"]),
            schema=UISchema.from_dict(doc["schema"]) if doc.get("schema") else None,
            trace_record_ids=list(doc.get("traceRecordIds", ())),
            candidate=candidate,
            reports=tuple(GateReport.from_dict(r) for r in doc.get("reports", ())),
            error=doc.get("error"),
            human_approved=doc.get("humanApproved", False),
            sequence=doc.get("sequence", 0),
        )


@dataclass(frozen=True)
class FeedbackEntry:
    feedback_id: str
    job_id: str
    component_id: str
    comprehension_rating: int
    navigation_events: tuple[tuple[str, str, float], ...] = ()
    comment: str = ""

    def to_dict(self) -> dict:
        return {
            "feedbackId": self.feedback_id,
            "jobId": self.job_id,
            "componentId": self.component_id,
            "comprehensionRating": self.comprehension_rating,
            "navigationEvents": [list(e) for e in self.navigation_events],
            "comment": self.comment,
        }


def _content_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class AdaptationService:
    def __init__(
        self,
        config: Optional[AppConfig] = None,
        *,
        catalog: Optional[Catalog] = None,
        rule_set: Optional[RuleSet] = None,
        prompt_store: Optional[PromptStore] = None,
        backend: Optional[Backend] = None,
        pictograms: Optional[PictogramMap] = None,
        data_dir: Optional[str] = None,
    ) -> None:
        self.config = config or AppConfig()
        self.catalog = catalog or self._load_catalog()
        self.rule_set = rule_set or self._load_rules()
        # co-activation conflicts are a load-time error, not a runtime one
        for warning in validate_rules(self.rule_set, self.catalog):
            logger.warning("rule validation: %s", warning)
        self.pictograms = pictograms or self._load_pictograms()
        self.prompt_store = prompt_store or self._load_templates()
        self.backend = backend or self._make_backend()

        self.data_dir = Path(data_dir or self.config.data_dir)
        self.jobs_dir = self.data_dir / "jobs"
        self.jobs_dir.mkdir(parents=True, exist_ok=True)
        self.ledger = TraceLedger(self.data_dir / "trace.ndjson")
        self._feedback_path = self.data_dir / "feedback.ndjson"

        self._jobs: dict[str, AdaptationJob] = {}
        self._lock = Lock()
        self._job_locks: dict[str, Lock] = {}
        self._sequence = 0
        self._executor = ThreadPoolExecutor(max_workers=4)
        self._load_persisted_jobs()

    # -- wiring -------------------------------------------------------------

    def _load_catalog(self) -> Catalog:
        if self.config.catalog_path:
            return load_catalog_file(self.config.catalog_path)
        return load_default_catalog()

    def _load_rules(self) -> RuleSet:
        if self.config.rules_path:
            return load_rules_file(self.config.rules_path)
        return load_default_rules()

    def _load_pictograms(self) -> PictogramMap:
        if self.config.pictograms_path:
            return load_pictogram_file(self.config.pictograms_path)
        return load_default_pictograms()

    def _load_templates(self) -> PromptStore:
        if self.config.templates_dir:
            store = PromptStore()
            store.load_directory(self.config.templates_dir)
            return store
        return load_default_store()

    def _make_backend(self) -> Backend:
        return make_backend(
            self.config.backend,
            env={},
            pictograms=self.pictograms,
            endpoint=self.config.remote_url,
            model=self.config.remote_model,
            api_key=self.config.remote_key,
            timeout=self.config.remote_timeout,
        )

    def _load_persisted_jobs(self) -> None:
        for file in sorted(self.jobs_dir.glob("*.json")):
            try:
                job = AdaptationJob.from_dict(
                    json.loads(file.read_text(encoding="utf-8"))
                )
            except (ValueError, KeyError, ValidationError) as exc:
                logger.warning("skipping unreadable job file %s: %s", file, exc)
                continue
            self._jobs[job.job_id] = job
            self._sequence = max(self._sequence, job.sequence)

    def _persist_job(self, job: AdaptationJob) -> None:
        target = self.jobs_dir / f"{job.job_id}.json"
        target.write_text(
            json.dumps(job.to_dict(), sort_keys=True, indent=2), encoding="utf-8"
        )

    def _job_lock(self, job_id: str) -> Lock:
        with self._lock:
            return self._job_locks.setdefault(job_id, Lock())

    # -- pipeline -----------------------------------------------------------

    def submit(self, profile: UserProfile, input: DomainInput) -> str:
        job = self._create_job(profile, input)
        self._executor.submit(self._run_job, job.job_id)
        return job.job_id

    def run_sync(
        self,
        profile: UserProfile,
        input: DomainInput,
        raise_on_failure: bool = False,
    ) -> AdaptationJob:
        job = self._create_job(profile, input)
        self._run_job(job.job_id)
        job = self.get_job(job.job_id)
        if raise_on_failure and job.status is JobStatus.FAILED:
            raise JobFailedError(job.error or "adaptation job failed")
        return job

    def _create_job(self, profile: UserProfile, input: DomainInput) -> AdaptationJob:
        if not isinstance(profile, UserProfile):
            raise ValidationError("profile must be a UserProfile")
        if not isinstance(input, DomainInput):
            raise ValidationError("input must be a DomainInput")
        with self._lock:
            self._sequence += 1
            job = AdaptationJob(
                job_id=f"J-{uuid.uuid4().hex[:12]}",
                profile=profile,
                input=input,
                sequence=self._sequence,
            )
            self._jobs[job.job_id] = job
        self._persist_job(job)
        return job

    def _run_job(self, job_id: str) -> None:
        job = self._jobs[job_id]
        with self._job_lock(job_id):
            job.status = JobStatus.RUNNING
            self._persist_job(job)
            try:
                self._execute_pipeline(job)
            except BackendUnavailableError as exc:
                job.status = JobStatus.FAILED
                job.error = f"backend unavailable: {exc}"
            except Exception as exc:  # noqa: BLE001 - job must never wedge in Running
                logger.exception("pipeline failed for %s", job_id)
                job.status = JobStatus.FAILED
                job.error = str(exc)
            self._persist_job(job)

    def _execute_pipeline(self, job: AdaptationJob) -> None:
        dars = derive_requirements(job.profile, self.catalog)
        active = activate_rules(self.rule_set, dars, job.profile)
        template_id = active.primary_template_id() or PASSTHROUGH_TEMPLATE
        prompt = instantiate(
            self.prompt_store, template_id, job.profile, job.input, active
        )
        outcome = regeneration_loop(
            self.backend,
            prompt,
            active,
            job.input,
            thresholds=self.config.thresholds(),
            policy=self.config.policy(),
        )
        job.reports = outcome.reports
        job.candidate = outcome.result

        if outcome.status is LoopStatus.ACCEPTED:
            schema = build_schema(outcome.result, active, job.profile, self.pictograms)
            job.schema = schema
            job.status = JobStatus.ACCEPTED
            record = self._make_record(
                job,
                active,
                prompt,
                attempts=outcome.attempts,
                reports=outcome.reports,
                escalated=False,
                component_ids=schema.component_ids(),
                content=outcome.result.presented_text(),
                pipeline_steps=PIPELINE_STEPS,
            )
        else:
            if self.config.policy().escalate_on_exhaustion:
                job.status = JobStatus.ESCALATED
            else:
                job.status = JobStatus.FAILED
                job.error = "gates failed on every attempt"
            content = (
                outcome.result.presented_text() if outcome.result is not None else ""
            )
            record = self._make_record(
                job,
                active,
                prompt,
                attempts=outcome.attempts,
                reports=outcome.reports,
                escalated=True,
                component_ids=(),
                content=content,
                pipeline_steps=PIPELINE_STEPS[:4],
            )
        job.trace_record_ids.append(self.ledger.append(record))

    def _make_record(
        self,
        job: AdaptationJob,
        active: ActiveRuleSet,
        prompt,
        *,
        attempts: int,
        reports: Sequence[GateReport],
        escalated: bool,
        component_ids: Sequence[str],
        content: str,
        pipeline_steps: Sequence[str],
        review_action: Optional[str] = None,
    ) -> TraceRecord:
        return TraceRecord(
            job_id=job.job_id,
            profile_need_ids=tuple(sorted(n.value for n in job.profile.needs)),
            dar_ids=tuple(sorted(active.all_dar_ids())),
            rule_ids=active.rule_ids(),
            normative_refs=tuple(sorted(active.all_refs())),
            template_id=getattr(prompt, "template_id", None),
            template_version=getattr(prompt, "version", None),
            backend_id=self.backend.descriptor.backend_id,
            model_version=self.backend.descriptor.model_version,
            attempts=attempts,
            gate_reports=tuple(reports),
            escalated=escalated,
            output_component_ids=tuple(component_ids),
            content_hash=_content_hash(content),
            pipeline_steps=tuple(pipeline_steps),
            review_action=review_action,
        )

    # -- reads --------------------------------------------------------------

    def get_job(self, job_id: str) -> AdaptationJob:
        try:
            return self._jobs[job_id]
        except KeyError:
            raise UnknownJobError(f"unknown job: {job_id}") from None

    def jobs(self) -> list[AdaptationJob]:
        return sorted(self._jobs.values(), key=lambda j: j.sequence)

    def review_queue(self) -> list[AdaptationJob]:
        return [j for j in self.jobs() if j.status is JobStatus.ESCALATED]

    def trace_for_job(self, job_id: str) -> list[TraceRecord]:
        self.get_job(job_id)
        return self.ledger.by_job(job_id)

    def activation_explanation(self, job_id: str) -> list[dict]:
        job = self.get_job(job_id)
        dars = derive_requirements(job.profile, self.catalog)
        active = activate_rules(self.rule_set, dars, job.profile)
        return explain_activation(active)

    # -- review -------------------------------------------------------------

    def apply_review(
        self,
        job_id: str,
        action: str,
        reviewer: str = "reviewer",
        edited_text: Optional[str] = None,
        rationale: str = "",
    ) -> AdaptationJob:
        if action not in REVIEW_ACTIONS:
            raise ValidationError(
                f"unknown review action {action!r}; expected one of {REVIEW_ACTIONS}"
            )
        job = self.get_job(job_id)
        with self._job_lock(job_id):
            if job.status not in REVIEWABLE_STATUSES:
                raise IllegalTransitionError(
                    f"cannot review a job in status {job.status.value}"
                )
            dars = derive_requirements(job.profile, self.catalog)
            active = activate_rules(self.rule_set, dars, job.profile)

            if action == "Approve":
                self._review_approve(job, active)
            elif action == "Reject":
                self._review_reject(job, active)
            else:
                if not edited_text or not edited_text.strip():
                    raise ValidationError("Edit review requires editedText")
                self._review_edit(job, active, edited_text.strip())
            self._persist_job(job)
            return job

    def _review_approve(self, job: AdaptationJob, active: ActiveRuleSet) -> None:
        if job.candidate is None:
            raise IllegalTransitionError("job has no candidate content to approve")
        new_ids: tuple[str, ...] = ()
        if job.schema is None:
            job.schema = build_schema(
                job.candidate, active, job.profile, self.pictograms
            )
            new_ids = job.schema.component_ids()
        job.status = JobStatus.APPROVED
        job.human_approved = True
        record = self._make_record(
            job,
            active,
            prompt=None,
            attempts=0,
            reports=(),
            escalated=False,
            component_ids=new_ids,
            content=job.candidate.presented_text(),
            pipeline_steps=("apply_review",),
            review_action="Approve",
        )
        job.trace_record_ids.append(self.ledger.append(record))

    def _review_reject(self, job: AdaptationJob, active: ActiveRuleSet) -> None:
        job.status = JobStatus.REJECTED
        job.schema = None
        content = job.candidate.presented_text() if job.candidate else ""
        record = self._make_record(
            job,
            active,
            prompt=None,
            attempts=0,
            reports=(),
            escalated=False,
            component_ids=(),
            content=content,
            pipeline_steps=("apply_review",),
            review_action="Reject",
        )
        job.trace_record_ids.append(self.ledger.append(record))

    def _review_edit(
        self, job: AdaptationJob, active: ActiveRuleSet, edited_text: str
    ) -> None:
        had_steps = job.candidate is not None and len(job.candidate.steps) > 1
        if had_steps:
            steps = tuple(
                s.strip() for s in _SENTENCE_SPLIT_RE.split(edited_text) if s.strip()
            )
        else:
            steps = (edited_text,)
        annotations = ()
        if any(e.rule.transformation.value == "attachPictograms" for e in active):
            annotations = self.pictograms.annotate_steps(steps)
        result = TransformResult(
            plain_text=edited_text,
            steps=steps,
            pictogram_annotations=annotations,
            raw_response="(human edit)",
        )
        report = run_gates(job.input, result, self.config.thresholds(), attempt=1)
        job.candidate = result
        job.reports = job.reports + (report,)
        new_ids: tuple[str, ...] = ()
        if report.overall_passed:
            job.schema = build_schema(result, active, job.profile, self.pictograms)
            job.status = JobStatus.ACCEPTED
            job.human_approved = False
            new_ids = job.schema.component_ids()
        else:
            job.schema = None
            job.status = JobStatus.ESCALATED
        record = self._make_record(
            job,
            active,
            prompt=None,
            attempts=1,
            reports=(report,),
            escalated=not report.overall_passed,
            component_ids=new_ids,
            content=result.presented_text(),
            pipeline_steps=("apply_review",),
            review_action="Edit",
        )
        job.trace_record_ids.append(self.ledger.append(record))

    # -- feedback -----------------------------------------------------------

    def record_feedback(
        self,
        job_id: str,
        component_id: str,
        comprehension_rating: int,
        navigation_events: Sequence[Sequence] = (),
        comment: str = "",
    ) -> str:
        job = self.get_job(job_id)
        schema = job.servable_schema()
        if schema is None:
            raise ValidationError(
                f"job {job_id} has no served schema to rate (status "
                f"{job.status.value})"
            )
        if component_id not in schema.component_ids():
            raise UnknownComponentError(
                f"component {component_id} is not part of job {job_id}'s schema"
            )
        if (
            isinstance(comprehension_rating, bool)
            or not isinstance(comprehension_rating, int)
            or not (1 <= comprehension_rating <= 5)
        ):
            raise ValidationError("comprehensionRating must be an integer in 1..5")
        events: list[tuple[str, str, float]] = []
        for event in navigation_events:
            if len(event) != 3:
                raise ValidationError(
                    "navigation events are (fromState, toState, timestamp) triples"
                )
            src, dst, ts = event
            if not schema.interaction_states.allows(str(src), str(dst)):
                raise IllegalTransitionError(
                    f"navigation {src}->{dst} is not an edge of the schema's "
                    "state machine"
                )
            events.append((str(src), str(dst), float(ts)))
        with self._lock:
            feedback_id = f"F-{self._feedback_count() + 1:04d}"
            entry = FeedbackEntry(
                feedback_id=feedback_id,
                job_id=job_id,
                component_id=component_id,
                comprehension_rating=comprehension_rating,
                navigation_events=tuple(events),
                comment=comment,
            )
            with open(self._feedback_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry.to_dict(), sort_keys=True) + "\n")
        return feedback_id

    def _feedback_count(self) -> int:
        if not self._feedback_path.exists():
            return 0
        with open(self._feedback_path, "r", encoding="utf-8") as fh:
            return sum(1 for line in fh if line.strip())

    def feedback_entries(self) -> list[FeedbackEntry]:
        if not self._feedback_path.exists():
            return []
        out = []
        with open(self._feedback_path, "r", encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                doc = json.loads(line)
                out.append(
                    FeedbackEntry(
                        feedback_id=doc["feedbackId"],
                        job_id=doc["jobId"],
                        component_id=doc["componentId"],
                        comprehension_rating=doc["comprehensionRating"],
                        navigation_events=tuple(
                            tuple(e) for e in doc.get("navigationEvents", ())
                        ),
                        comment=doc.get("comment", ""),
                    )
                )
        return out

    # -- compliance ---------------------------------------------------------

    def served_schemas(self) -> dict[str, UISchema]:
        out = {}
        for job in self.jobs():
            schema = job.servable_schema()
            if schema is not None:
                out[job.job_id] = schema
        return out

    def compliance_report(self, format: str = "full") -> dict:
        pairs = [
            (f.job_id, f.component_id) for f in self.feedback_entries()
        ]
        return export_report(
            self.catalog,
            self.ledger,
            self.rule_set,
            schemas=self.served_schemas(),
            feedback_component_ids=pairs,
            format=format,
        )

    def shutdown(self) -> None:
        self._executor.shutdown(wait=True)
