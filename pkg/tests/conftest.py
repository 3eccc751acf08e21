"""Shared fixtures.

Synthetic sessions and the offline engine runs over them are expensive enough
that several test modules share one cached copy, rendered lazily on first use.
"""

from __future__ import annotations

import pytest

from classgauge.service import run_offline
from classgauge.synth import write_scenario_session


@pytest.fixture(scope="session")
def scenario_factory(tmp_path_factory):
    """scenario name -> (session directory, manifest), rendered once."""
    cache: dict = {}

    def get(scenario: str, seed: int = 0):
        key = (scenario, seed)
        if key not in cache:
            root = tmp_path_factory.mktemp(f"session-{scenario}-{seed}")
            manifest = write_scenario_session(root, scenario=scenario, seed=seed)
            cache[key] = (root, manifest)
        return cache[key]

    return get


@pytest.fixture(scope="session")
def scorecard_factory(scenario_factory):
    """scenario name -> scorecards from one offline engine run, computed once."""
    cache: dict = {}

    def get(scenario: str, seed: int = 0):
        key = (scenario, seed)
        if key not in cache:
            root, _manifest = scenario_factory(scenario, seed)
            cache[key] = run_offline(root)
        return cache[key]

    return get


@pytest.fixture(scope="session")
def mixed_session(scenario_factory):
    return scenario_factory("mixed")


@pytest.fixture(scope="session")
def auto_session(scenario_factory):
    return scenario_factory("auto")


@pytest.fixture(scope="session")
def engaged_session(scenario_factory):
    return scenario_factory("engaged")


@pytest.fixture(scope="session")
def reading_session(scenario_factory):
    return scenario_factory("reading")


@pytest.fixture(scope="session")
def empty_session(scenario_factory):
    return scenario_factory("empty")


@pytest.fixture(scope="session")
def mixed_scorecards(scorecard_factory):
    return scorecard_factory("mixed")


@pytest.fixture(scope="session")
def auto_scorecards(scorecard_factory):
    return scorecard_factory("auto")
