from pathlib import Path

import pytest

from make_fixture import write_fixture

FIXTURE = Path(__file__).parent / "fixtures" / "hand_wave.avi"


@pytest.fixture(scope="session")
def fixture_video() -> Path:
    if not FIXTURE.exists():
        FIXTURE.parent.mkdir(parents=True, exist_ok=True)
        write_fixture(FIXTURE)
    return FIXTURE
