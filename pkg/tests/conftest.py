import pytest

from helpers import build_system


@pytest.fixture
def store(tmp_path):
    from roadwatch.store import EventStore

    s = EventStore(tmp_path / "events.db")
    yield s
    s.close()


@pytest.fixture
def system(tmp_path):
    harness = build_system(tmp_path)
    yield harness
    harness.stop()
