from __future__ import annotations

import pytest

from adapt_forge.model import DomainInput, UserNeed, UserProfile
from adapt_forge.service import AdaptationService

# the worked clinician-note example used across the suite
FIXTURE_TEXT = (
    "You should take Ibuprofen 400mg every 8 hours unless you experience "
    "gastric discomfort."
)

FIXTURE_STEPS = (
    "Take Ibuprofen 400mg.",
    "Take it every 8 hours.",
    "Stop if you have stomach pain. Ask your doctor.",
)

FIXTURE_PLAIN = " ".join(FIXTURE_STEPS)


@pytest.fixture
def fixture_input() -> DomainInput:
    return DomainInput(
        input_id="rx-001",
        text=FIXTURE_TEXT,
        protected_terms=("Ibuprofen",),
    )


@pytest.fixture
def fixture_profile() -> UserProfile:
    return UserProfile(
        profile_id="u-casestudy",
        needs=frozenset(
            {
                UserNeed.COGNITIVE_DISABILITY,
                UserNeed.HEARING_IMPAIRMENT,
                UserNeed.MOTOR_COGNITIVE_LOAD,
                UserNeed.GENERAL_CLARITY,
            }
        ),
    )


@pytest.fixture
def cognitive_profile() -> UserProfile:
    return UserProfile(
        profile_id="u-cog", needs=frozenset({UserNeed.COGNITIVE_DISABILITY})
    )


@pytest.fixture
def service(tmp_path) -> AdaptationService:
    svc = AdaptationService(data_dir=tmp_path / "adapt-data")
    yield svc
    svc.shutdown()


def make_service(tmp_path, **kwargs) -> AdaptationService:
    return AdaptationService(data_dir=tmp_path / "adapt-data", **kwargs)
