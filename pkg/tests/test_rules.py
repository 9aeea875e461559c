from __future__ import annotations

import pytest

from adapt_forge.catalog import derive_requirements, load_default_catalog
from adapt_forge.errors import (
    DuplicateRuleIdError,
    RuleConflictError,
    RuleSyntaxError,
    UnknownTransformationError,
)
from adapt_forge.model import TransformationKind, UserNeed, UserProfile
from adapt_forge.rules import (
    activate_rules,
    check_coactivation_conflicts,
    load_default_rules,
    parse_rules,
    validate_rules,
)

ALL_KINDS = {k.value for k in TransformationKind}

# frozen activation order for needs={CognitiveDisability, HearingImpairment}:
# priority ascending, ruleId as tie-break within priority 50
SIX_RULE_ORDER = [
    "R-SIMPLIFY-TEXT",
    "R-STEPWISE",
    "R-PICTOGRAMS",
    "R-DISABLE-AUDIO",
    "R-HIGH-CONTRAST",
    "R-VISUAL-ALERTS",
]


def _activate(needs):
    catalog = load_default_catalog()
    rules = load_default_rules()
    profile = UserProfile(profile_id="p", needs=frozenset(needs))
    dars = derive_requirements(profile, catalog)
    return activate_rules(rules, dars, profile)


def test_bundled_rules_cover_every_transformation_exactly_once():
    rules = load_default_rules()
    assert len(rules.rules) == 8
    assert {r.transformation.value for r in rules.rules} == ALL_KINDS


def test_activation_for_cognitive_and_hearing_is_frozen():
    active = _activate({UserNeed.COGNITIVE_DISABILITY, UserNeed.HEARING_IMPAIRMENT})
    assert list(active.rule_ids()) == SIX_RULE_ORDER


def test_activation_for_cognitive_only():
    active = _activate({UserNeed.COGNITIVE_DISABILITY})
    assert list(active.rule_ids()) == ["R-SIMPLIFY-TEXT", "R-STEPWISE", "R-PICTOGRAMS"]


def test_empty_profile_activates_nothing():
    active = _activate(set())
    assert len(active) == 0
    assert active.primary_template_id() is None


def test_full_profile_activates_all_eight():
    active = _activate(set(UserNeed) - {UserNeed.VISUAL_IMPAIRMENT})
    assert len(active) == 8
    refs = active.all_refs()
    catalog_keys = {r.key for r in load_default_catalog().normative_refs}
    assert refs <= catalog_keys


def test_priority_ordering_is_stable_over_every_profile():
    rules = load_default_rules()
    catalog = load_default_catalog()
    needs = sorted(UserNeed, key=lambda n: n.value)
    for mask in range(2 ** len(needs)):
        chosen = {n for i, n in enumerate(needs) if mask >> i & 1}
        profile = UserProfile(profile_id="p", needs=frozenset(chosen))
        active = activate_rules(rules, derive_requirements(profile, catalog), profile)
        keyed = [(e.rule.priority, e.rule.rule_id) for e in active]
        assert keyed == sorted(keyed)


def test_activated_entries_expose_satisfied_predicates():
    active = _activate({UserNeed.COGNITIVE_DISABILITY})
    first = active.entries[0]
    assert first.rule.rule_id == "R-SIMPLIFY-TEXT"
    assert any("DAR-01" in p for p in first.satisfied_predicates)


def test_parse_error_carries_line_and_column():
    source = (
        "rule R-X {\n"
        "  when: dar(DAR-01) &&& flag(x);\n"
        "  do: simplifyText;\n"
        "  priority: 1;\n"
        "  prompt: T-SIMPLIFY;\n"
        "  refs: [WCAG22:1.4.3];\n"
        "}\n"
    )
    with pytest.raises(RuleSyntaxError) as err:
        parse_rules(source)
    assert err.value.line == 2
    assert err.value.column > 0
    assert "line 2" in str(err.value)


def test_unknown_transformation_is_rejected_with_the_known_kinds():
    source = (
        "rule R-X { when: dar(DAR-01); do: explodeText; priority: 1; "
        'prompt: none; refs: [WCAG22:1.4.3]; }'
    )
    with pytest.raises(UnknownTransformationError) as err:
        parse_rules(source)
    assert "simplifyText" in str(err.value)


def test_duplicate_rule_ids_are_rejected():
    block = (
        "rule R-X { when: dar(DAR-01); do: disableAudio; priority: 1; "
        "prompt: none; refs: [WCAG22:1.2.1]; }\n"
    )
    with pytest.raises(DuplicateRuleIdError):
        parse_rules(block + block)


def test_source_round_trip_preserves_semantics():
    rules = load_default_rules()
    again = parse_rules(rules.to_source())
    assert again.rule_ids() == rules.rule_ids()
    for a, b in zip(again.rules, rules.rules):
        assert a.priority == b.priority
        assert a.transformation is b.transformation
        assert [r.key for r in a.refs] == [r.key for r in b.refs]
        assert a.prompt_template == b.prompt_template


def test_coactivation_conflict_detected_by_enumeration():
    # two rules owning disableAudio, triggered by the same DAR
    source = (
        "rule R-A { when: dar(DAR-04); do: disableAudio; priority: 1; "
        "prompt: none; refs: [WCAG22:1.2.1]; }\n"
        "rule R-B { when: dar(DAR-04); do: disableAudio; priority: 2; "
        "prompt: none; refs: [WCAG22:1.2.1]; }\n"
    )
    rules = parse_rules(source)
    with pytest.raises(RuleConflictError) as err:
        check_coactivation_conflicts(rules, load_default_catalog())
    assert "disableAudio" in str(err.value)


def test_disjoint_conditions_for_the_same_kind_are_fine():
    source = (
        "rule R-A { when: dar(DAR-04) and not flag(quiet); do: disableAudio; "
        "priority: 1; prompt: none; refs: [WCAG22:1.2.1]; }\n"
        "rule R-B { when: dar(DAR-04) and flag(quiet); do: disableAudio; "
        "priority: 2; prompt: none; refs: [WCAG22:1.2.1]; }\n"
    )
    rules = parse_rules(source)
    check_coactivation_conflicts(rules, load_default_catalog())


def test_bundled_rules_validate_cleanly():
    warnings = validate_rules(load_default_rules(), load_default_catalog())
    assert warnings == []


def test_condition_grammar_supports_nesting():
    source = (
        "rule R-N { when: (dar(DAR-01) or dar(DAR-07)) and not flag(off); "
        "do: simplifyStructure; priority: 5; prompt: T-STRUCTURE; "
        "refs: [COGA:Reduce Cognitive Load]; }"
    )
    rules = parse_rules(source)
    catalog = load_default_catalog()
    profile = UserProfile(profile_id="p", needs=frozenset({UserNeed.GENERAL_CLARITY}))
    active = activate_rules(
        rules, derive_requirements(profile, catalog), profile
    )
    assert list(active.rule_ids()) == ["R-N"]
    off = UserProfile(
        profile_id="p",
        needs=frozenset({UserNeed.GENERAL_CLARITY}),
        flags={"off": True},
    )
    assert len(activate_rules(rules, derive_requirements(off, catalog), off)) == 0
