from __future__ import annotations

import pytest

from adapt_forge.backends import MockBackend, ScriptedBackend
from adapt_forge.catalog import derive_requirements, load_default_catalog
from adapt_forge.errors import BackendUnavailableError, EmptyTextError, MalformedResponseError
from adapt_forge.gates import (
    MALFORMED_METRIC,
    GateName,
    GateResult,
    GateThresholds,
    LoopStatus,
    RegenerationPolicy,
    check_factual_consistency,
    check_semantic_fidelity,
    malformed_report,
    protected_tokens,
    readability_score,
    regeneration_loop,
    run_gates,
)
from adapt_forge.model import DomainInput, TransformResult, UserNeed, UserProfile
from adapt_forge.pictograms import load_default_pictograms
from adapt_forge.prompts import instantiate, load_default_store
from adapt_forge.rules import activate_rules, load_default_rules

from conftest import FIXTURE_PLAIN, FIXTURE_STEPS, FIXTURE_TEXT

# hand-derived oracle values (independent computation, frozen)
LIX_SIMPLE_SENTENCE = 21.285714285714285  # "Take one pill every morning with water."
LIX_FIXTURE_INPUT = 43.769230769230774
LIX_FIXTURE_PLAIN = 16.014705882352942


def _fixture_input() -> DomainInput:
    return DomainInput(input_id="i", text=FIXTURE_TEXT, protected_terms=("Ibuprofen",))


def _fixture_result() -> TransformResult:
    return TransformResult(
        plain_text=FIXTURE_PLAIN, steps=FIXTURE_STEPS, raw_response="fixture"
    )


# -- readability --------------------------------------------------------------


def test_lix_oracle_simple_sentence():
    got = readability_score("Take one pill every morning with water.")
    assert got == pytest.approx(LIX_SIMPLE_SENTENCE, abs=1e-4)


def test_lix_oracle_single_word_sentence():
    # 1 word / 1 sentence + 100 * 0/1
    assert readability_score("Stop.") == 1.0


def test_lix_without_terminator_still_counts_one_sentence():
    assert readability_score("Stop") == 1.0


def test_lix_frozen_fixture_values():
    assert readability_score(FIXTURE_TEXT) == pytest.approx(LIX_FIXTURE_INPUT, abs=1e-9)
    assert readability_score(FIXTURE_PLAIN) == pytest.approx(
        LIX_FIXTURE_PLAIN, abs=1e-9
    )


def test_mock_output_reads_easier_than_the_input():
    assert readability_score(FIXTURE_PLAIN) < readability_score(FIXTURE_TEXT)
    assert readability_score(FIXTURE_PLAIN) <= 38.0


def test_lix_rejects_empty_text():
    with pytest.raises(EmptyTextError):
        readability_score("   ")


def test_terminator_runs_collapse_to_one_sentence_break():
    # "Wait..." is one sentence, not three
    assert readability_score("Wait...") == 1.0


# -- protected tokens ---------------------------------------------------------


def test_protected_tokens_for_the_fixture():
    tokens = protected_tokens(_fixture_input())
    assert list(tokens) == ["Ibuprofen", "400", "8", "mg", "hours"]


# -- fidelity -----------------------------------------------------------------


def test_fidelity_passes_untouched_fixture():
    result = check_semantic_fidelity(_fixture_input(), _fixture_result(), 1.0)
    assert result.passed
    assert result.metric_value == 1.0
    assert result.details == ()


def test_fidelity_fails_when_the_dose_disappears():
    dropped = TransformResult(
        plain_text="Take Ibuprofen. Take it every 8 hours.",
        steps=("Take Ibuprofen.", "Take it every 8 hours."),
        raw_response="x",
    )
    result = check_semantic_fidelity(_fixture_input(), dropped, 1.0)
    assert not result.passed
    assert "missing: 400" in result.details
    assert result.metric_value < 1.0


def test_fidelity_matches_numerals_after_normalization():
    # "400" appearing inside "400mg" counts; so does a spaced variant
    spaced = TransformResult(
        plain_text="Take Ibuprofen 400 mg. Take it every 8 hours.",
        steps=("Take Ibuprofen 400 mg.", "Take it every 8 hours.",),
        raw_response="x",
    )
    result = check_semantic_fidelity(_fixture_input(), spaced, 1.0)
    assert result.passed, result.details


def test_fidelity_checks_multiword_protected_terms_as_substrings():
    input = DomainInput(
        input_id="i",
        text="Inject insulin glargine 10 units at bedtime.",
        protected_terms=("insulin glargine",),
    )
    kept = TransformResult(
        plain_text="Use insulin glargine 10 units before sleep.",
        steps=("Use insulin glargine 10 units before sleep.",),
        raw_response="x",
    )
    assert check_semantic_fidelity(input, kept, 1.0).passed
    lost = TransformResult(
        plain_text="Use insulin 10 units before sleep.",
        steps=("Use insulin 10 units before sleep.",),
        raw_response="x",
    )
    result = check_semantic_fidelity(input, lost, 1.0)
    assert not result.passed
    assert "missing: insulin glargine" in result.details


# -- consistency --------------------------------------------------------------


def test_consistency_passes_untouched_fixture():
    result = check_factual_consistency(_fixture_input(), _fixture_result(), 1.0)
    assert result.passed
    assert result.metric_value == 1.0


def test_consistency_fails_on_injected_numeral():
    injected = TransformResult(
        plain_text="Take Ibuprofen 600mg. Take it every 8 hours.",
        steps=("Take Ibuprofen 600mg.", "Take it every 8 hours."),
        raw_response="x",
    )
    result = check_factual_consistency(_fixture_input(), injected, 1.0)
    assert not result.passed
    assert "unsupported numeric: 600" in result.details


def test_consistency_allows_step_numerals_up_to_step_count():
    numbered = TransformResult(
        plain_text="Do step 1 then step 2.",
        steps=("Do step 1 then step 2.", "Rest."),
        raw_response="x",
    )
    input = DomainInput(input_id="i", text="Do everything twice.")
    assert check_factual_consistency(input, numbered, 1.0).passed
    # numeral 3 exceeds both the input numerics and the step count
    overreach = TransformResult(
        plain_text="Do step 3.", steps=("Do step 3.", "Rest."), raw_response="x"
    )
    result = check_factual_consistency(input, overreach, 1.0)
    assert not result.passed
    assert "unsupported numeric: 3" in result.details


def test_consistency_metric_is_violation_share():
    # output numerics {400 ok, 600 bad, 900 bad} -> 1 - 2/3
    mixed = TransformResult(
        plain_text="Take 400mg then 600mg then 900mg.",
        steps=("Take 400mg then 600mg then 900mg.",),
        raw_response="x",
    )
    result = check_factual_consistency(_fixture_input(), mixed, 1.0)
    assert result.metric_value == pytest.approx(1.0 - 2.0 / 3.0)


# -- report mechanics ---------------------------------------------------------


def test_gate_result_details_only_when_failed():
    with pytest.raises(ValueError):
        GateResult(
            gate=GateName.READABILITY,
            passed=True,
            metric_value=1.0,
            threshold=38.0,
            details="should not be here",
        )
    with pytest.raises(ValueError):
        GateResult(
            gate=GateName.READABILITY,
            passed=False,
            metric_value=99.0,
            threshold=38.0,
            details="",
        )


def test_run_gates_on_the_fixture_passes_everything():
    report = run_gates(_fixture_input(), _fixture_result(), GateThresholds())
    assert report.overall_passed
    assert report.attempt == 1
    assert [g.gate for g in report.per_gate] == [
        GateName.READABILITY,
        GateName.SEMANTIC_FIDELITY,
        GateName.FACTUAL_CONSISTENCY,
    ]


def test_readability_gate_checks_every_step_not_just_the_plain_text():
    wordy_step = (
        "Administer the aforementioned pharmaceutical compound notwithstanding "
        "contraindicated gastrointestinal circumstances whatsoever."
    )
    result = TransformResult(
        plain_text="Take the pill.",
        steps=("Take the pill.", wordy_step),
        raw_response="x",
    )
    input = DomainInput(input_id="i", text="Take the pill.")
    report = run_gates(input, result, GateThresholds())
    readability = report.gate(GateName.READABILITY)
    assert not readability.passed
    assert any("step 2" in d for d in readability.details)


def test_malformed_report_fails_all_gates():
    report = malformed_report("unparseable", GateThresholds(), attempt=2)
    assert not report.overall_passed
    assert report.attempt == 2
    assert all(not g.passed for g in report.per_gate)
    # the lower-is-better gate gets the high sentinel, the ratio gates get 0
    assert report.gate(GateName.READABILITY).metric_value == MALFORMED_METRIC
    assert report.gate(GateName.SEMANTIC_FIDELITY).metric_value == 0.0
    assert report.gate(GateName.FACTUAL_CONSISTENCY).metric_value == 0.0


def test_report_round_trips_through_dict():
    report = run_gates(_fixture_input(), _fixture_result(), GateThresholds())
    from adapt_forge.gates import GateReport

    again = GateReport.from_dict(report.to_dict())
    assert again.to_dict() == report.to_dict()


# -- regeneration loop --------------------------------------------------------


def _loop_pieces():
    catalog = load_default_catalog()
    rules = load_default_rules()
    profile = UserProfile(
        profile_id="p", needs=frozenset({UserNeed.COGNITIVE_DISABILITY})
    )
    active = activate_rules(rules, derive_requirements(profile, catalog), profile)
    input = _fixture_input()
    prompt = instantiate(
        load_default_store(), active.primary_template_id(), profile, input, active
    )
    return prompt, active, input


BAD = TransformResult(plain_text="Take the pill whenever.", steps=("Take the pill whenever.",), raw_response="bad")
GOOD = TransformResult(plain_text=FIXTURE_PLAIN, steps=FIXTURE_STEPS, raw_response="good")


def test_loop_accepts_first_pass():
    prompt, active, input = _loop_pieces()
    outcome = regeneration_loop(
        ScriptedBackend(script=(GOOD,)), prompt, active, input,
        GateThresholds(), RegenerationPolicy(),
    )
    assert outcome.status is LoopStatus.ACCEPTED
    assert outcome.attempts == 1
    assert len(outcome.reports) == 1


def test_loop_recovers_after_two_failures():
    prompt, active, input = _loop_pieces()
    backend = ScriptedBackend(script=(BAD, BAD, GOOD))
    outcome = regeneration_loop(
        backend, prompt, active, input, GateThresholds(), RegenerationPolicy()
    )
    assert outcome.status is LoopStatus.ACCEPTED
    assert outcome.attempts == 3
    assert [r.attempt for r in outcome.reports] == [1, 2, 3]
    assert [r.overall_passed for r in outcome.reports] == [False, False, True]
    assert backend.calls == 3


def test_loop_escalates_at_exactly_max_attempts():
    prompt, active, input = _loop_pieces()
    backend = ScriptedBackend(script=(BAD,))
    outcome = regeneration_loop(
        backend, prompt, active, input, GateThresholds(), RegenerationPolicy()
    )
    assert outcome.status is LoopStatus.ESCALATED
    assert outcome.attempts == 3
    assert backend.calls == 3
    assert len(outcome.reports) == 3


def test_loop_counts_malformed_responses_as_attempts():
    prompt, active, input = _loop_pieces()
    backend = ScriptedBackend(script=("%%% not an envelope", GOOD))
    outcome = regeneration_loop(
        backend, prompt, active, input, GateThresholds(), RegenerationPolicy()
    )
    assert outcome.status is LoopStatus.ACCEPTED
    assert outcome.attempts == 2
    assert not outcome.reports[0].overall_passed
    assert outcome.reports[0].per_gate[0].metric_value == MALFORMED_METRIC


def test_loop_propagates_backend_unavailable():
    prompt, active, input = _loop_pieces()
    backend = ScriptedBackend(script=(BackendUnavailableError("down"),))
    with pytest.raises(BackendUnavailableError):
        regeneration_loop(
            backend, prompt, active, input, GateThresholds(), RegenerationPolicy()
        )


def test_loop_respects_custom_max_attempts():
    prompt, active, input = _loop_pieces()
    backend = ScriptedBackend(script=(BAD,))
    outcome = regeneration_loop(
        backend, prompt, active, input,
        GateThresholds(), RegenerationPolicy(max_attempts=5),
    )
    assert outcome.attempts == 5
    assert backend.calls == 5
