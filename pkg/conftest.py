"""
Shared pytest setup: the ``slow`` marker, ``--runslow``, and small fixtures.
"""

import sys

import pytest

sys.path.insert(0, '.')


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow reproduction tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running reproduction test (needs --runslow)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def synthetic_family():
    from corpus.synthetic import make_synthetic_family
    return make_synthetic_family(seed=0, n_lemmata=60)


@pytest.fixture
def runs_dir(tmp_path, monkeypatch):
    """Point TRANSFLEX_RUNS_DIR at a temp directory and reset cached settings."""
    from config import get_settings
    monkeypatch.setenv("TRANSFLEX_RUNS_DIR", str(tmp_path / "runs"))
    get_settings.cache_clear()
    yield tmp_path / "runs"
    get_settings.cache_clear()
