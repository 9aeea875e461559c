"""Declarative adaptation rules: parsing, validation, and activation.

Rules are written in a small block-structured language::

    rule R-SIMPLIFY-TEXT {
      when: dar(DAR-01);
      do: simplifyText;
      priority: 10;
      prompt: T-SIMPLIFY;
      refs: [COGA:Language & Structure, WCAG22:Guideline 3.1 Readable];
    }

Conditions combine ``need(...)``, ``flag(...)`` and ``dar(...)`` predicates
with ``and``, ``or``, ``not`` and parentheses. Activation is deterministic:
matching rules are ordered by (priority, ruleId) and each carries the set of
predicates that made its condition true, so the decision can be replayed.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from .catalog import Catalog, DerivedRequirement
from .errors import (
    DuplicateRuleIdError,
    RuleConflictError,
    RuleSyntaxError,
    UnknownTransformationError,
    ValidationError,
)
from .model import (
    TEXT_TRANSFORMATIONS,
    NormativeRef,
    TransformationKind,
    UserNeed,
    UserProfile,
)

_ID_RE = re.compile(r"[A-Za-z][A-Za-z0-9_-]*")

NO_PROMPT = "none"


def _line_col(source: str, offset: int) -> tuple[int, int]:
    # 1-based line and column for error reporting
    prefix = source[:offset]
    line = prefix.count("\n") + 1
    last_nl = prefix.rfind("\n")
    column = offset - last_nl if last_nl >= 0 else offset + 1
    return line, column


class EvalContext:
    """What a condition can see: needs, flags, and derived requirement ids."""

    __slots__ = ("needs", "flags", "dar_ids")

    def __init__(
        self,
        needs: Iterable[str],
        flags: Mapping[str, bool],
        dar_ids: Iterable[str],
    ) -> None:
        self.needs = frozenset(str(n) for n in needs)
        self.flags = dict(flags)
        self.dar_ids = frozenset(str(d) for d in dar_ids)

    @classmethod
    def for_profile(
        cls, profile: UserProfile, dars: Sequence[DerivedRequirement]
    ) -> "EvalContext":
        return cls(
            needs=(n.value for n in profile.needs),
            flags=profile.flags,
            dar_ids=(d.dar_id for d in dars),
        )


@dataclass(frozen=True)
class Condition:
    def evaluate(self, ctx: EvalContext) -> bool:
        raise NotImplementedError

    def collect_literals(
        self, ctx: EvalContext, negated: bool, out: list[tuple[str, bool, bool]]
    ) -> None:
        """Append (rendered_literal, literal_is_true, is_positive_dar) tuples."""
        raise NotImplementedError

    def to_source(self) -> str:
        raise NotImplementedError

    def satisfied_predicates(self, ctx: EvalContext) -> tuple[str, ...]:
        collected: list[tuple[str, bool, bool]] = []
        self.collect_literals(ctx, False, collected)
        seen: list[str] = []
        for rendered, truthy, _ in collected:
            if truthy and rendered not in seen:
                seen.append(rendered)
        return tuple(seen)

    def satisfied_dar_ids(self, ctx: EvalContext) -> tuple[str, ...]:
        collected: list[tuple[str, bool, bool]] = []
        self.collect_literals(ctx, False, collected)
        seen: list[str] = []
        for rendered, truthy, positive_dar in collected:
            if truthy and positive_dar:
                dar_id = rendered[len("dar(") : -1]
                if dar_id not in seen:
                    seen.append(dar_id)
        return tuple(seen)


@dataclass(frozen=True)
class NeedPred(Condition):
    name: str

    def evaluate(self, ctx: EvalContext) -> bool:
        return self.name in ctx.needs

    def collect_literals(self, ctx, negated, out):
        value = self.evaluate(ctx)
        literal = not value if negated else value
        rendered = f"not need({self.name})" if negated else f"need({self.name})"
        out.append((rendered, literal, False))

    def to_source(self) -> str:
        return f"need({self.name})"


@dataclass(frozen=True)
class FlagPred(Condition):
    name: str

    def evaluate(self, ctx: EvalContext) -> bool:
        return bool(ctx.flags.get(self.name, False))

    def collect_literals(self, ctx, negated, out):
        value = self.evaluate(ctx)
        literal = not value if negated else value
        rendered = f"not flag({self.name})" if negated else f"flag({self.name})"
        out.append((rendered, literal, False))

    def to_source(self) -> str:
        return f"flag({self.name})"


@dataclass(frozen=True)
class DarPred(Condition):
    dar_id: str

    def evaluate(self, ctx: EvalContext) -> bool:
        return self.dar_id in ctx.dar_ids

    def collect_literals(self, ctx, negated, out):
        value = self.evaluate(ctx)
        literal = not value if negated else value
        rendered = f"not dar({self.dar_id})" if negated else f"dar({self.dar_id})"
        out.append((rendered, literal, not negated))

    def to_source(self) -> str:
        return f"dar({self.dar_id})"


@dataclass(frozen=True)
class Not(Condition):
    operand: Condition

    def evaluate(self, ctx: EvalContext) -> bool:
        return not self.operand.evaluate(ctx)

    def collect_literals(self, ctx, negated, out):
        self.operand.collect_literals(ctx, not negated, out)

    def to_source(self) -> str:
        inner = self.operand.to_source()
        if isinstance(self.operand, (And, Or)):
            inner = f"({inner})"
        return f"not {inner}"


@dataclass(frozen=True)
class And(Condition):
    left: Condition
    right: Condition

    def evaluate(self, ctx: EvalContext) -> bool:
        return self.left.evaluate(ctx) and self.right.evaluate(ctx)

    def collect_literals(self, ctx, negated, out):
        self.left.collect_literals(ctx, negated, out)
        self.right.collect_literals(ctx, negated, out)

    def to_source(self) -> str:
        def wrap(c: Condition) -> str:
            return f"({c.to_source()})" if isinstance(c, Or) else c.to_source()

        return f"{wrap(self.left)} and {wrap(self.right)}"


@dataclass(frozen=True)
class Or(Condition):
    left: Condition
    right: Condition

    def evaluate(self, ctx: EvalContext) -> bool:
        return self.left.evaluate(ctx) or self.right.evaluate(ctx)

    def collect_literals(self, ctx, negated, out):
        self.left.collect_literals(ctx, negated, out)
        self.right.collect_literals(ctx, negated, out)

    def to_source(self) -> str:
        return f"{self.left.to_source()} or {self.right.to_source()}"


def _condition_flags(cond: Condition) -> set[str]:
    found: set[str] = set()

    def walk(c: Condition) -> None:
        if isinstance(c, FlagPred):
            found.add(c.name)
        elif isinstance(c, Not):
            walk(c.operand)
        elif isinstance(c, (And, Or)):
            walk(c.left)
            walk(c.right)

    walk(cond)
    return found


class _ConditionParser:
    """Recursive descent over the `when:` expression.

    Offsets are absolute into the full document so errors carry real
    line/column positions.
    """

    _TOKEN_RE = re.compile(r"\s*(?:(\()|(\))|([A-Za-z][A-Za-z0-9_.-]*))")

    def __init__(self, source: str, start: int, end: int) -> None:
        self.source = source
        self.pos = start
        self.end = end

    def _error(self, message: str, offset: int) -> RuleSyntaxError:
        line, col = _line_col(self.source, offset)
        return RuleSyntaxError(message, line=line, column=col)

    def _peek(self) -> Optional[tuple[str, int]]:
        m = self._TOKEN_RE.match(self.source, self.pos, self.end)
        if m is None:
            rest = self.source[self.pos : self.end].strip()
            if rest:
                raise self._error(f"unexpected character {rest[0]!r} in condition", self.pos)
            return None
        token = m.group(1) or m.group(2) or m.group(3)
        return token, m.start(m.lastindex)

    def _advance(self) -> Optional[tuple[str, int]]:
        tok = self._peek()
        if tok is not None:
            m = self._TOKEN_RE.match(self.source, self.pos, self.end)
            assert m is not None
            self.pos = m.end()
        return tok

    def parse(self) -> Condition:
        expr = self._or()
        trailing = self._peek()
        if trailing is not None:
            raise self._error(f"unexpected token {trailing[0]!r} after condition", trailing[1])
        return expr

    def _or(self) -> Condition:
        left = self._and()
        while True:
            tok = self._peek()
            if tok is None or tok[0] != "or":
                return left
            self._advance()
            left = Or(left, self._and())

    def _and(self) -> Condition:
        left = self._unary()
        while True:
            tok = self._peek()
            if tok is None or tok[0] != "and":
                return left
            self._advance()
            left = And(left, self._unary())

    def _unary(self) -> Condition:
        tok = self._peek()
        if tok is not None and tok[0] == "not":
            self._advance()
            return Not(self._unary())
        return self._atom()

    def _atom(self) -> Condition:
        tok = self._advance()
        if tok is None:
            raise self._error("condition ended unexpectedly", self.pos)
        word, offset = tok
        if word == "(":
            inner = self._or()
            closing = self._advance()
            if closing is None or closing[0] != ")":
                raise self._error("missing closing parenthesis", self.pos)
            return inner
        if word in ("need", "flag", "dar"):
            opening = self._advance()
            if opening is None or opening[0] != "(":
                raise self._error(f"expected '(' after {word}", self.pos)
            arg = self._advance()
            if arg is None or arg[0] in ("(", ")"):
                raise self._error(f"expected an identifier inside {word}(...)", self.pos)
            closing = self._advance()
            if closing is None or closing[0] != ")":
                raise self._error(f"missing ')' after {word}({arg[0]}", self.pos)
            if word == "need":
                return NeedPred(arg[0])
            if word == "flag":
                return FlagPred(arg[0])
            return DarPred(arg[0])
        if word in ("and", "or", ")"):
            raise self._error(f"unexpected {word!r} in condition", offset)
        raise self._error(
            f"unknown predicate {word!r}; expected need(...), flag(...) or dar(...)", offset
        )


@dataclass(frozen=True)
class AdaptationRule:
    rule_id: str
    condition: Condition
    transformation: TransformationKind
    priority: int
    prompt_template: Optional[str]
    refs: tuple[NormativeRef, ...]
    source_text: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        if self.priority < 0:
            raise ValidationError(f"rule {self.rule_id}: priority must be >= 0")
        needs_prompt = self.transformation in TEXT_TRANSFORMATIONS
        if needs_prompt and not self.prompt_template:
            raise ValidationError(
                f"rule {self.rule_id}: transformation {self.transformation.value} "
                "rewrites text and must name a prompt template"
            )
        if not needs_prompt and self.prompt_template:
            raise ValidationError(
                f"rule {self.rule_id}: layout transformation "
                f"{self.transformation.value} must use prompt: none"
            )
        if not self.refs:
            raise ValidationError(f"rule {self.rule_id}: refs must not be empty")

    def to_source(self) -> str:
        refs = ", ".join(r.key for r in self.refs)
        prompt = self.prompt_template or NO_PROMPT
        return (
            f"rule {self.rule_id} {{\n"
            f"  when: {self.condition.to_source()};\n"
            f"  do: {self.transformation.value};\n"
            f"  priority: {self.priority};\n"
            f"  prompt: {prompt};\n"
            f"  refs: [{refs}];\n"
            f"}}"
        )

    def to_dict(self) -> dict:
        return {
            "ruleId": self.rule_id,
            "when": self.condition.to_source(),
            "do": self.transformation.value,
            "priority": self.priority,
            "prompt": self.prompt_template,
            "refs": [r.key for r in self.refs],
        }


@dataclass(frozen=True)
class RuleSet:
    rules: tuple[AdaptationRule, ...]

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for r in self.rules:
            if r.rule_id in seen:
                raise DuplicateRuleIdError(f"duplicate rule id: {r.rule_id}")
            seen.add(r.rule_id)

    def rule(self, rule_id: str) -> AdaptationRule:
        for r in self.rules:
            if r.rule_id == rule_id:
                return r
        raise KeyError(rule_id)

    def rule_ids(self) -> tuple[str, ...]:
        return tuple(r.rule_id for r in self.rules)

    def flag_names(self) -> tuple[str, ...]:
        names: set[str] = set()
        for r in self.rules:
            names |= _condition_flags(r.condition)
        return tuple(sorted(names))

    def to_source(self) -> str:
        return "\n\n".join(r.to_source() for r in self.rules) + "\n"


@dataclass(frozen=True)
class ActiveRule:
    rule: AdaptationRule
    satisfied_predicates: tuple[str, ...]
    dar_ids: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "ruleId": self.rule.rule_id,
            "transformation": self.rule.transformation.value,
            "priority": self.rule.priority,
            "promptTemplate": self.rule.prompt_template,
            "satisfiedPredicates": list(self.satisfied_predicates),
            "darIds": list(self.dar_ids),
            "refs": [r.key for r in self.rule.refs],
        }


@dataclass(frozen=True)
class ActiveRuleSet:
    entries: tuple[ActiveRule, ...]

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def has(self, kind: TransformationKind) -> bool:
        return any(e.rule.transformation is kind for e in self.entries)

    def transformations(self) -> tuple[TransformationKind, ...]:
        return tuple(e.rule.transformation for e in self.entries)

    def rule_ids(self) -> tuple[str, ...]:
        return tuple(e.rule.rule_id for e in self.entries)

    def primary_template_id(self) -> Optional[str]:
        # entries are already in application order
        for e in self.entries:
            if e.rule.prompt_template:
                return e.rule.prompt_template
        return None

    def all_refs(self) -> frozenset[str]:
        keys: set[str] = set()
        for e in self.entries:
            keys |= {r.key for r in e.rule.refs}
        return frozenset(keys)

    def all_dar_ids(self) -> frozenset[str]:
        ids: set[str] = set()
        for e in self.entries:
            ids |= set(e.dar_ids)
        return frozenset(ids)

    def to_dict(self) -> list[dict]:
        return [e.to_dict() for e in self.entries]


class _RuleDocParser:
    _KEYS = ("when", "do", "priority", "prompt", "refs")

    def __init__(self, source: str) -> None:
        self.source = source
        self.pos = 0

    def _error(self, message: str, offset: Optional[int] = None) -> RuleSyntaxError:
        at = self.pos if offset is None else offset
        line, col = _line_col(self.source, at)
        return RuleSyntaxError(message, line=line, column=col)

    def _skip_trivia(self) -> None:
        while self.pos < len(self.source):
            ch = self.source[self.pos]
            if ch in " \t\r\n":
                self.pos += 1
            elif ch == "#":
                nl = self.source.find("\n", self.pos)
                self.pos = len(self.source) if nl < 0 else nl + 1
            else:
                return

    def _expect_word(self, word: str) -> None:
        self._skip_trivia()
        if not self.source.startswith(word, self.pos):
            actual = self.source[self.pos : self.pos + len(word)] or "end of file"
            raise self._error(f"expected {word!r}, found {actual!r}")
        self.pos += len(word)

    def _expect_char(self, ch: str) -> None:
        self._skip_trivia()
        if self.pos >= len(self.source) or self.source[self.pos] != ch:
            found = self.source[self.pos] if self.pos < len(self.source) else "end of file"
            raise self._error(f"expected {ch!r}, found {found!r}")
        self.pos += 1

    def _identifier(self, what: str) -> str:
        self._skip_trivia()
        m = _ID_RE.match(self.source, self.pos)
        if m is None:
            raise self._error(f"expected {what}")
        self.pos = m.end()
        return m.group(0)

    def parse(self) -> RuleSet:
        rules: list[AdaptationRule] = []
        ids: set[str] = set()
        while True:
            self._skip_trivia()
            if self.pos >= len(self.source):
                break
            id_offset = self.pos
            self._expect_word("rule")
            rule_id = self._identifier("a rule id after 'rule'")
            if rule_id in ids:
                line, col = _line_col(self.source, id_offset)
                raise DuplicateRuleIdError(
                    f"duplicate rule id {rule_id!r} (line {line}, column {col})"
                )
            ids.add(rule_id)
            rules.append(self._rule_body(rule_id, id_offset))
        if not rules:
            raise RuleSyntaxError("rule document contains no rules")
        return RuleSet(rules=tuple(rules))

    def _rule_body(self, rule_id: str, start_offset: int) -> AdaptationRule:
        self._expect_char("{")
        values: dict[str, tuple[str, int]] = {}
        while True:
            self._skip_trivia()
            if self.pos < len(self.source) and self.source[self.pos] == "}":
                self.pos += 1
                break
            key_offset = self.pos
            key = self._identifier("a field name (when/do/priority/prompt/refs)")
            if key not in self._KEYS:
                raise self._error(f"unknown field {key!r} in rule {rule_id}", key_offset)
            if key in values:
                raise self._error(f"field {key!r} given twice in rule {rule_id}", key_offset)
            self._expect_char(":")
            self._skip_trivia()
            value_start = self.pos
            semi = self.source.find(";", self.pos)
            if semi < 0:
                raise self._error(f"missing ';' after {key} in rule {rule_id}", value_start)
            self.pos = semi + 1
            values[key] = (self.source[value_start:semi], value_start)

        for key in self._KEYS:
            if key not in values:
                line, col = _line_col(self.source, start_offset)
                raise RuleSyntaxError(
                    f"rule {rule_id} is missing the {key!r} field", line=line, column=col
                )

        when_text, when_off = values["when"]
        condition = _ConditionParser(
            self.source, when_off, when_off + len(when_text)
        ).parse()

        do_text, do_off = values["do"]
        do_name = do_text.strip()
        if do_name.endswith("()"):
            do_name = do_name[:-2]
        try:
            transformation = TransformationKind(do_name)
        except ValueError:
            line, col = _line_col(self.source, do_off)
            known = ", ".join(t.value for t in TransformationKind)
            raise UnknownTransformationError(
                f"rule {rule_id}: unknown transformation {do_name!r} "
                f"(line {line}, column {col}); known: {known}"
            ) from None

        prio_text, prio_off = values["priority"]
        try:
            priority = int(prio_text.strip())
        except ValueError:
            raise self._error(
                f"rule {rule_id}: priority must be an integer, got {prio_text.strip()!r}",
                prio_off,
            ) from None

        prompt_text = values["prompt"][0].strip()
        prompt: Optional[str] = None if prompt_text == NO_PROMPT else prompt_text

        refs_text, refs_off = values["refs"]
        refs = self._parse_refs(rule_id, refs_text, refs_off)

        try:
            return AdaptationRule(
                rule_id=rule_id,
                condition=condition,
                transformation=transformation,
                priority=priority,
                prompt_template=prompt,
                refs=refs,
                source_text=self.source[start_offset : self.pos],
            )
        except ValidationError as exc:
            line, col = _line_col(self.source, start_offset)
            raise RuleSyntaxError(str(exc), line=line, column=col) from None

    def _parse_refs(
        self, rule_id: str, text: str, offset: int
    ) -> tuple[NormativeRef, ...]:
        stripped = text.strip()
        if not (stripped.startswith("[") and stripped.endswith("]")):
            raise self._error(
                f"rule {rule_id}: refs must be a [STANDARD:clause, ...] list", offset
            )
        inner = stripped[1:-1].strip()
        if not inner:
            raise self._error(f"rule {rule_id}: refs must not be empty", offset)
        refs: list[NormativeRef] = []
        for item in inner.split(","):
            item = item.strip()
            try:
                refs.append(NormativeRef.parse_key(item))
            except ValidationError as exc:
                raise self._error(f"rule {rule_id}: {exc}", offset) from None
        return tuple(refs)


def parse_rules(source: str) -> RuleSet:
    """Parse a rule document. Errors carry line and column."""
    return _RuleDocParser(source).parse()


def load_rules_file(path) -> RuleSet:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_rules(fh.read())


def load_default_rules() -> RuleSet:
    from importlib.resources import files

    return parse_rules(
        files("adapt_forge").joinpath("data/rules.adapt").read_text(encoding="utf-8")
    )


def activate_rules(
    rule_set: RuleSet,
    dars: Sequence[DerivedRequirement],
    profile: UserProfile,
) -> ActiveRuleSet:
    """Evaluate every rule against the profile and its derived requirements.

    Returns matches ordered by (priority, ruleId) with an activation trace
    per rule: the literals that were satisfied and the requirement ids that
    triggered it.
    """
    ctx = EvalContext.for_profile(profile, dars)
    matched: list[ActiveRule] = []
    for rule in rule_set.rules:
        if rule.condition.evaluate(ctx):
            matched.append(
                ActiveRule(
                    rule=rule,
                    satisfied_predicates=rule.condition.satisfied_predicates(ctx),
                    dar_ids=rule.condition.satisfied_dar_ids(ctx),
                )
            )
    matched.sort(key=lambda a: (a.rule.priority, a.rule.rule_id))
    return ActiveRuleSet(entries=tuple(matched))


def explain_activation(active: ActiveRuleSet) -> list[dict]:
    """Activation trace in application order, one entry per active rule."""
    return [
        {
            "ruleId": e.rule.rule_id,
            "satisfiedPredicates": list(e.satisfied_predicates),
            "darIds": list(e.dar_ids),
            "normativeRefs": [r.key for r in e.rule.refs],
        }
        for e in active.entries
    ]


def check_coactivation_conflicts(rule_set: RuleSet, catalog: Catalog) -> None:
    """Reject rule sets where one profile would trigger the same
    transformation through two different rules.

    Exhaustive over every needs subset crossed with every combination of the
    flags the rules mention, so the guarantee holds for all profiles, not
    just the ones seen so far.
    """
    all_needs = sorted(n.value for n in UserNeed)
    flag_names = rule_set.flag_names()
    need_to_dars: dict[str, list[str]] = {}
    for dar in catalog.dars:
        need_to_dars.setdefault(dar.need.value, []).append(dar.dar_id)

    for needs_mask in range(2 ** len(all_needs)):
        needs = {all_needs[i] for i in range(len(all_needs)) if needs_mask >> i & 1}
        dar_ids = {d for n in needs for d in need_to_dars.get(n, [])}
        for flags_mask in range(2 ** len(flag_names)):
            flags = {
                flag_names[i]: bool(flags_mask >> i & 1)
                for i in range(len(flag_names))
            }
            ctx = EvalContext(needs=needs, flags=flags, dar_ids=dar_ids)
            owners: dict[TransformationKind, str] = {}
            for rule in rule_set.rules:
                if not rule.condition.evaluate(ctx):
                    continue
                prior = owners.get(rule.transformation)
                if prior is not None:
                    raise RuleConflictError(
                        f"rules {prior} and {rule.rule_id} both apply "
                        f"{rule.transformation.value} for needs="
                        f"{sorted(needs) or ['<none>']}, flags={flags or '{}'}"
                    )
                owners[rule.transformation] = rule.rule_id


def validate_rules(rule_set: RuleSet, catalog: Catalog) -> list[str]:
    """Static checks beyond syntax. Returns human-readable warnings; raises
    RuleConflictError on duplicate-transformation co-activation."""
    warnings: list[str] = []
    known_dars = set(catalog.dar_ids())
    known_refs = {r.key for r in catalog.normative_refs}
    for rule in rule_set.rules:

        def walk(c: Condition) -> None:
            if isinstance(c, DarPred) and c.dar_id not in known_dars:
                warnings.append(
                    f"rule {rule.rule_id}: condition references unknown "
                    f"requirement {c.dar_id}"
                )
            elif isinstance(c, Not):
                walk(c.operand)
            elif isinstance(c, (And, Or)):
                walk(c.left)
                walk(c.right)

        walk(rule.condition)
        for ref in rule.refs:
            if ref.key not in known_refs:
                warnings.append(
                    f"rule {rule.rule_id}: ref {ref.key} is not in the catalog"
                )
    check_coactivation_conflicts(rule_set, catalog)
    return warnings
