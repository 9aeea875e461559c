"""Adaptive accessible UI generation for medication instructions.

Turns a clinician note plus a user ability profile into a server-driven,
standards-traceable UI schema: needs derive requirements, requirements
activate adaptation rules, rules drive a generative backend, quality gates
accept or escalate the output, and every decision lands in an append-only
trace ledger.
"""

from .catalog import derive_requirements, load_default_catalog
from .errors import AdaptForgeError, ValidationError
from .gates import GateReport, GateThresholds, RegenerationPolicy, readability_score, run_gates
from .ledger import TraceLedger, TraceRecord, verify_satisfy_links
from .model import DomainInput, TransformResult, UserNeed, UserProfile
from .pictograms import load_default_pictograms
from .prompts import PromptStore, instantiate, load_default_store
from .rules import activate_rules, load_default_rules, parse_rules
from .service import AdaptationService, JobStatus
from .ui import UISchema, build_schema, contrast_ratio, parse_schema, serialize_schema

__version__ = "0.1.0"

__all__ = [
    "AdaptForgeError",
    "AdaptationService",
    "DomainInput",
    "GateReport",
    "GateThresholds",
    "JobStatus",
    "PromptStore",
    "RegenerationPolicy",
    "TraceLedger",
    "TraceRecord",
    "TransformResult",
    "UISchema",
    "UserNeed",
    "UserProfile",
    "ValidationError",
    "activate_rules",
    "build_schema",
    "contrast_ratio",
    "derive_requirements",
    "instantiate",
    "load_default_catalog",
    "load_default_pictograms",
    "load_default_rules",
    "load_default_store",
    "parse_rules",
    "parse_schema",
    "readability_score",
    "run_gates",
    "serialize_schema",
    "verify_satisfy_links",
    "__version__",
]
