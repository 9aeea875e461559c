"""Quality gates: readability, semantic fidelity, factual consistency.

Gates run on the exact text that would be presented (plainText plus every
step) and are pure: same inputs, same report. The regeneration controller
retries a failing transform a bounded number of times and signals escalation
when the budget is spent.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

from .errors import EmptyTextError, MalformedResponseError
from .model import DomainInput, TransformResult

_WORD_RE = re.compile(r"[^\W_]+", re.UNICODE)
_TERMINATOR_RE = re.compile(r"[.!?]+")
_DIGIT_RUN_RE = re.compile(r"\d+")
_NUM_UNIT_RE = re.compile(r"\d+\s*([^\W\d_]+)", re.UNICODE)
_OUT_TOKEN_RE = re.compile(r"\d+|[^\W\d_]+", re.UNICODE)

LONG_WORD_LEN = 6  # strictly more characters than this counts as long

# metric stand-in for attempts whose response never parsed; anything > the
# readability threshold works, this is just recognizable in traces
MALFORMED_METRIC = 999.0


def readability_score(text: str) -> float:
    """LIX: words/sentences + 100 * (longWords/words).

    A word is a maximal letter-or-digit run, a sentence ends at a run of
    {. ! ?}, and text with no terminator counts as one sentence.
    """
    if not text or not text.strip():
        raise EmptyTextError("cannot score empty text")
    words = _WORD_RE.findall(text)
    if not words:
        raise EmptyTextError("text contains no words")
    sentences = max(1, len(_TERMINATOR_RE.findall(text)))
    long_words = sum(1 for w in words if len(w) > LONG_WORD_LEN)
    return len(words) / sentences + 100.0 * long_words / len(words)


class GateName(str, Enum):
    READABILITY = "Readability"
    SEMANTIC_FIDELITY = "SemanticFidelity"
    FACTUAL_CONSISTENCY = "FactualConsistency"


@dataclass(frozen=True)
class GateResult:
    gate: GateName
    passed: bool
    metric_value: float
    threshold: float
    details: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.passed and self.details:
            raise ValueError("passing gate must carry no violation details")
        if not self.passed and not self.details:
            raise ValueError("failing gate must explain itself in details")

    def to_dict(self) -> dict:
        return {
            "gate": self.gate.value,
            "passed": self.passed,
            "metricValue": round(self.metric_value, 6),
            "threshold": self.threshold,
            "details": list(self.details),
        }


@dataclass(frozen=True)
class GateReport:
    per_gate: tuple[GateResult, ...]
    overall_passed: bool
    attempt: int

    def __post_init__(self) -> None:
        if self.attempt < 1:
            raise ValueError("attempt starts at 1")
        if self.overall_passed != all(g.passed for g in self.per_gate):
            raise ValueError("overallPassed must mirror the per-gate results")

    def gate(self, name: GateName) -> GateResult:
        for g in self.per_gate:
            if g.gate is name:
                return g
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "perGate": [g.to_dict() for g in self.per_gate],
            "overallPassed": self.overall_passed,
            "attempt": self.attempt,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "GateReport":
        return cls(
            per_gate=tuple(
                GateResult(
                    gate=GateName(g["gate"]),
                    passed=g["passed"],
                    metric_value=g["metricValue"],
                    threshold=g["threshold"],
                    details=tuple(g.get("details", ())),
                )
                for g in doc["perGate"]
            ),
            overall_passed=doc["overallPassed"],
            attempt=doc["attempt"],
        )


@dataclass(frozen=True)
class GateThresholds:
    readability_max: float = 38.0
    fidelity_min: float = 1.0
    consistency_min: float = 1.0


@dataclass(frozen=True)
class RegenerationPolicy:
    max_attempts: int = 3
    escalate_on_exhaustion: bool = True

    def __post_init__(self) -> None:
        if self.max_attempts < 1:
            raise ValueError("maxAttempts must be >= 1")


def _presented_units(result: TransformResult) -> list[tuple[str, str]]:
    units = [("plainText", result.plain_text)]
    units.extend((f"step {i}", s) for i, s in enumerate(result.steps, start=1))
    return units


def check_readability(
    result: TransformResult, threshold: float = 38.0
) -> GateResult:
    """metricValue is the worst LIX over plainText and every step, so
    passed ⇔ metric ≤ threshold even with multi-unit evaluation."""
    worst = 0.0
    details: list[str] = []
    for label, text in _presented_units(result):
        try:
            score = readability_score(text)
        except EmptyTextError:
            continue
        worst = max(worst, score)
        if score > threshold:
            details.append(f"{label} LIX {score:.2f} > {threshold:g}")
    return GateResult(
        gate=GateName.READABILITY,
        passed=worst <= threshold,
        metric_value=worst,
        threshold=threshold,
        details=tuple(details),
    )


def _numeric_tokens(text: str) -> list[str]:
    # normalized so "08" and "8" compare equal
    return [str(int(run)) for run in _DIGIT_RUN_RE.findall(text)]


def protected_tokens(input: DomainInput) -> tuple[str, ...]:
    """protectedTerms plus numeric tokens plus unit words adjacent to them."""
    seen: list[str] = []
    for term in input.protected_terms:
        if term not in seen:
            seen.append(term)
    for num in _numeric_tokens(input.text):
        if num not in seen:
            seen.append(num)
    for unit in _NUM_UNIT_RE.findall(input.text):
        if unit not in seen:
            seen.append(unit)
    return tuple(seen)


def check_semantic_fidelity(
    input: DomainInput, result: TransformResult, threshold: float = 1.0
) -> GateResult:
    presented = result.presented_text()
    presented_lower = presented.lower()
    out_tokens = {t.lower() for t in _OUT_TOKEN_RE.findall(presented)}
    out_tokens |= set(_numeric_tokens(presented))

    protected = protected_tokens(input)
    missing: list[str] = []
    for token in protected:
        if token.isdigit():
            present = str(int(token)) in out_tokens
        elif token.isalnum():
            present = token.lower() in out_tokens
        else:
            # multi-word or punctuated protected terms: substring check
            present = token.lower() in presented_lower
        if not present:
            missing.append(f"missing: {token}")
    total = len(protected)
    metric = 1.0 if total == 0 else (total - len(missing)) / total
    return GateResult(
        gate=GateName.SEMANTIC_FIDELITY,
        passed=metric >= threshold,
        metric_value=metric,
        threshold=threshold,
        details=tuple(missing),
    )


def check_factual_consistency(
    input: DomainInput, result: TransformResult, threshold: float = 1.0
) -> GateResult:
    """Every numeral in the output must exist in the input; step numerals
    1..N get a pass so numbered lists do not count as hallucinations."""
    allowed = set(_numeric_tokens(input.text))
    allowed |= {str(i) for i in range(1, len(result.steps) + 1)}
    output_nums: list[str] = []
    for num in _numeric_tokens(result.presented_text()):
        if num not in output_nums:
            output_nums.append(num)
    violations = [n for n in output_nums if n not in allowed]
    metric = 1.0 - len(violations) / max(1, len(output_nums))
    return GateResult(
        gate=GateName.FACTUAL_CONSISTENCY,
        passed=not violations,
        metric_value=metric,
        threshold=threshold,
        details=tuple(f"unsupported numeric: {n}" for n in violations),
    )


def run_gates(
    input: DomainInput,
    result: TransformResult,
    thresholds: Optional[GateThresholds] = None,
    attempt: int = 1,
) -> GateReport:
    t = thresholds or GateThresholds()
    per_gate = (
        check_readability(result, t.readability_max),
        check_semantic_fidelity(input, result, t.fidelity_min),
        check_factual_consistency(input, result, t.consistency_min),
    )
    return GateReport(
        per_gate=per_gate,
        overall_passed=all(g.passed for g in per_gate),
        attempt=attempt,
    )


def malformed_report(reason: str, thresholds: GateThresholds, attempt: int) -> GateReport:
    """A response that never parsed fails every gate; the readability metric
    uses a sentinel above any threshold so pass ⇔ metric stays coherent."""
    note = f"malformed backend response: {reason}"
    per_gate = (
        GateResult(
            gate=GateName.READABILITY,
            passed=False,
            metric_value=MALFORMED_METRIC,
            threshold=thresholds.readability_max,
            details=(note,),
        ),
        GateResult(
            gate=GateName.SEMANTIC_FIDELITY,
            passed=False,
            metric_value=0.0,
            threshold=thresholds.fidelity_min,
            details=(note,),
        ),
        GateResult(
            gate=GateName.FACTUAL_CONSISTENCY,
            passed=False,
            metric_value=0.0,
            threshold=thresholds.consistency_min,
            details=(note,),
        ),
    )
    return GateReport(per_gate=per_gate, overall_passed=False, attempt=attempt)


class LoopStatus(str, Enum):
    ACCEPTED = "Accepted"
    ESCALATED = "Escalated"


@dataclass(frozen=True)
class LoopOutcome:
    status: LoopStatus
    attempts: int
    reports: tuple[GateReport, ...]
    result: Optional[TransformResult]

    def latest_report(self) -> GateReport:
        return self.reports[-1]


def regeneration_loop(
    backend,
    prompt,
    active_rules,
    input: DomainInput,
    thresholds: Optional[GateThresholds] = None,
    policy: Optional[RegenerationPolicy] = None,
) -> LoopOutcome:
    """Transform then gate, up to policy.max_attempts times.

    First passing report wins. A malformed response consumes an attempt and
    records a synthetic failing report. Transport-level BackendUnavailable
    propagates to the caller; it is a job failure, not an escalation.
    """
    thresholds = thresholds or GateThresholds()
    policy = policy or RegenerationPolicy()
    reports: list[GateReport] = []
    last_result: Optional[TransformResult] = None
    for attempt in range(1, policy.max_attempts + 1):
        try:
            result = backend.transform(prompt, active_rules, input)
        except MalformedResponseError as exc:
            reports.append(malformed_report(str(exc), thresholds, attempt))
            continue
        last_result = result
        report = run_gates(input, result, thresholds, attempt=attempt)
        reports.append(report)
        if report.overall_passed:
            return LoopOutcome(
                status=LoopStatus.ACCEPTED,
                attempts=attempt,
                reports=tuple(reports),
                result=result,
            )
    return LoopOutcome(
        status=LoopStatus.ESCALATED,
        attempts=policy.max_attempts,
        reports=tuple(reports),
        result=last_result,
    )
