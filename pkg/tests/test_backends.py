from __future__ import annotations

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from adapt_forge.backends import (
    MockBackend,
    RemoteBackend,
    ScriptedBackend,
    make_backend,
    normalize_envelope,
    parse_backend_response,
    serialize_envelope,
    transform,
)
from adapt_forge.catalog import derive_requirements, load_default_catalog
from adapt_forge.errors import (
    AuthError,
    BackendUnavailableError,
    MalformedResponseError,
    ValidationError,
)
from adapt_forge.model import (
    DomainInput,
    PictogramAnnotation,
    TransformResult,
    UserNeed,
    UserProfile,
)
from adapt_forge.pictograms import load_default_pictograms
from adapt_forge.prompts import instantiate, load_default_store
from adapt_forge.rules import activate_rules, load_default_rules

from conftest import FIXTURE_PLAIN, FIXTURE_STEPS, FIXTURE_TEXT


def _pipeline_pieces(needs):
    catalog = load_default_catalog()
    rules = load_default_rules()
    profile = UserProfile(profile_id="p", needs=frozenset(needs))
    active = activate_rules(rules, derive_requirements(profile, catalog), profile)
    input = DomainInput(input_id="i", text=FIXTURE_TEXT, protected_terms=("Ibuprofen",))
    prompt = instantiate(
        load_default_store(),
        active.primary_template_id() or "T-PASSTHROUGH",
        profile,
        input,
        active,
    )
    return prompt, active, input


# -- envelope grammar ---------------------------------------------------------


def test_envelope_round_trip_on_the_fixture():
    annotations = (
        PictogramAnnotation(step_index=1, keyword="take", pictogram_id="pill"),
        PictogramAnnotation(step_index=3, keyword="doctor", pictogram_id="doctor"),
    )
    raw = serialize_envelope(FIXTURE_PLAIN, FIXTURE_STEPS, annotations)
    result = parse_backend_response(raw)
    assert result.plain_text == FIXTURE_PLAIN
    assert result.steps == FIXTURE_STEPS
    assert result.pictogram_annotations == annotations
    assert result.raw_response == raw


def test_parse_accepts_bare_body_without_fence():
    raw = "plain: Take the pill.\nsteps:\n1. Take the pill.\n"
    result = parse_backend_response(raw)
    assert result.plain_text == "Take the pill."
    assert result.steps == ("Take the pill.",)


def test_parse_tries_each_fenced_block_until_one_parses():
    raw = (
        "Some chatter.\n"
        "```\nnot an envelope\n```\n"
        "More chatter.\n"
        "```\nplain: Take the pill.\nsteps:\n1. Take the pill.\n```\n"
    )
    result = parse_backend_response(raw)
    assert result.plain_text == "Take the pill."


@pytest.mark.parametrize(
    "raw",
    [
        "",
        "   \n  ",
        "steps:\n1. no plain line\n",
        "plain: p\nsteps:\n2. starts at two\n",
        "plain: p\nsteps:\n1. a\n3. skipped two\n",
        "plain: p\nsteps:\n1. a\npicto: 5|take|pill\n",  # annotation index out of range
        "plain: p\nsteps:\n1. a\npicto: 1|take\n",  # malformed picto line
    ],
)
def test_malformed_envelopes_raise(raw):
    with pytest.raises(MalformedResponseError):
        parse_backend_response(raw)


def test_normalize_envelope_is_idempotent():
    raw = serialize_envelope("p", ("a", "b"), ())
    assert normalize_envelope(normalize_envelope(raw)) == normalize_envelope(raw)


_STEP_TEXT = st.text(
    alphabet=st.characters(
        whitelist_categories=("Lu", "Ll", "Nd"), whitelist_characters=" ,"
    ),
    min_size=1,
    max_size=40,
).map(lambda s: s.strip() or "x")


@given(
    plain=_STEP_TEXT,
    steps=st.lists(_STEP_TEXT, min_size=1, max_size=6),
)
def test_envelope_round_trip_property(plain, steps):
    raw = serialize_envelope(plain, steps, ())
    result = parse_backend_response(raw)
    assert result.plain_text == plain
    assert list(result.steps) == steps


# -- mock backend -------------------------------------------------------------


def test_mock_reproduces_the_worked_example():
    prompt, active, input = _pipeline_pieces(
        {UserNeed.COGNITIVE_DISABILITY, UserNeed.HEARING_IMPAIRMENT}
    )
    backend = MockBackend(pictograms=load_default_pictograms())
    result = transform(backend, prompt, active, input)
    assert result.steps == FIXTURE_STEPS
    assert result.plain_text == FIXTURE_PLAIN
    assert {(a.step_index, a.pictogram_id) for a in result.pictogram_annotations} == {
        (1, "pill"),
        (2, "pill"),
        (2, "clock"),
        (3, "stomach-pain"),
        (3, "doctor"),
    }


def test_mock_without_step_rule_keeps_single_block():
    # GeneralClarity activates simplifyStructure only: rewrite happens,
    # but the steps list stays a single block
    prompt, active, input = _pipeline_pieces({UserNeed.GENERAL_CLARITY})
    backend = MockBackend(pictograms=load_default_pictograms())
    result = transform(backend, prompt, active, input)
    assert len(result.steps) == 1
    assert result.plain_text == FIXTURE_PLAIN


def test_mock_passthrough_when_nothing_is_active():
    prompt, active, input = _pipeline_pieces(set())
    backend = MockBackend(pictograms=load_default_pictograms())
    result = transform(backend, prompt, active, input)
    assert result.plain_text == FIXTURE_TEXT
    assert result.steps == (FIXTURE_TEXT,)
    assert result.pictogram_annotations == ()


def test_mock_is_deterministic():
    prompt, active, input = _pipeline_pieces({UserNeed.COGNITIVE_DISABILITY})
    backend = MockBackend(pictograms=load_default_pictograms())
    a = transform(backend, prompt, active, input)
    b = transform(backend, prompt, active, input)
    assert a == b


# -- scripted backend ---------------------------------------------------------


def test_scripted_backend_replays_and_repeats_last():
    ok = TransformResult(plain_text="p", steps=("p",), raw_response="r")
    backend = ScriptedBackend(script=(ok,))
    prompt, active, input = _pipeline_pieces(set())
    for _ in range(3):
        assert transform(backend, prompt, active, input).plain_text == "p"
    assert backend.calls == 3


def test_scripted_backend_raises_scripted_exceptions():
    backend = ScriptedBackend(
        script=(MalformedResponseError("bad"), BackendUnavailableError("down"))
    )
    prompt, active, input = _pipeline_pieces(set())
    with pytest.raises(MalformedResponseError):
        transform(backend, prompt, active, input)
    with pytest.raises(BackendUnavailableError):
        transform(backend, prompt, active, input)


# -- remote backend -----------------------------------------------------------


class _FakeResponse:
    def __init__(self, status_code: int, body):
        self.status_code = status_code
        self._body = body
        self.text = body if isinstance(body, str) else json.dumps(body)

    def json(self):
        if isinstance(self._body, str):
            raise ValueError("not json")
        return self._body


class _FakeSession:
    def __init__(self, responses):
        self.responses = list(responses)
        self.requests = []

    def post(self, url, data=None, headers=None, timeout=None):
        self.requests.append({"url": url, "data": data, "headers": headers})
        item = self.responses.pop(0)
        if isinstance(item, Exception):
            raise item
        return item


def _envelope_payload():
    content = serialize_envelope("Take the pill.", ("Take the pill.",), ())
    return {"choices": [{"message": {"content": content}}]}


def test_remote_retries_server_errors_with_doubling_backoff():
    session = _FakeSession(
        [
            _FakeResponse(503, "down"),
            _FakeResponse(502, "down"),
            _FakeResponse(200, _envelope_payload()),
        ]
    )
    delays = []
    backend = RemoteBackend(
        endpoint="https://api.example/v1/chat",
        model="m-1",
        api_key="k",
        session=session,
        sleep=delays.append,
    )
    prompt, active, input = _pipeline_pieces(set())
    result = transform(backend, prompt, active, input)
    assert result.plain_text == "Take the pill."
    assert delays == [0.5, 1.0]
    assert session.requests[0]["headers"]["Authorization"] == "Bearer k"
    assert json.loads(session.requests[0]["data"])["temperature"] == 0.0


def test_remote_gives_up_after_three_attempts():
    session = _FakeSession([_FakeResponse(500, "x")] * 3)
    backend = RemoteBackend(
        endpoint="https://api.example/v1/chat",
        model="m-1",
        session=session,
        sleep=lambda _: None,
    )
    prompt, active, input = _pipeline_pieces(set())
    with pytest.raises(BackendUnavailableError):
        transform(backend, prompt, active, input)
    assert len(session.requests) == 3


def test_remote_auth_failure_is_not_retried():
    session = _FakeSession([_FakeResponse(401, "no")])
    backend = RemoteBackend(
        endpoint="https://api.example/v1/chat",
        model="m-1",
        session=session,
        sleep=lambda _: None,
    )
    prompt, active, input = _pipeline_pieces(set())
    with pytest.raises(AuthError):
        transform(backend, prompt, active, input)
    assert len(session.requests) == 1


def test_remote_other_4xx_is_malformed_not_retried():
    session = _FakeSession([_FakeResponse(422, "bad request")])
    backend = RemoteBackend(
        endpoint="https://api.example/v1/chat",
        model="m-1",
        session=session,
        sleep=lambda _: None,
    )
    prompt, active, input = _pipeline_pieces(set())
    with pytest.raises(MalformedResponseError):
        transform(backend, prompt, active, input)
    assert len(session.requests) == 1


def test_remote_tolerates_alternate_response_shapes():
    content = serialize_envelope("Take the pill.", ("Take the pill.",), ())
    for body in ({"choices": [{"text": content}]}, {"content": content}, {"output": content}):
        session = _FakeSession([_FakeResponse(200, body)])
        backend = RemoteBackend(
            endpoint="https://api.example/v1/chat", model="m-1", session=session
        )
        prompt, active, input = _pipeline_pieces(set())
        assert transform(backend, prompt, active, input).plain_text == "Take the pill."


# -- factory ------------------------------------------------------------------


def test_make_backend_selects_by_name_and_env():
    backend = make_backend("mock", env={}, pictograms=load_default_pictograms())
    assert backend.descriptor.backend_id == "mock"
    backend = make_backend(
        "remote",
        env={},
        endpoint="https://api.example/v1",
        model="m-9",
    )
    assert backend.descriptor.model_version == "m-9"
    env = {
        "ADAPT_BACKEND": "remote",
        "ADAPT_REMOTE_URL": "https://env.example/v1",
        "ADAPT_REMOTE_MODEL": "m-env",
    }
    backend = make_backend(None, env=env)
    assert backend.descriptor.endpoint == "https://env.example/v1"


def test_make_backend_remote_without_url_fails():
    with pytest.raises(ValidationError):
        make_backend("remote", env={})
