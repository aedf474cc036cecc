import json

import pytest

from permesh.errors import ScenarioParseError, UnscriptedPromptError
from permesh.scenario import (
    HEADLESS_SCENARIOS,
    bundled_scenario_path,
    load_scenario,
    parse_scenario,
    run_scenario,
)


def test_bundled_weather_app_loads_and_passes():
    scenario = load_scenario(bundled_scenario_path("weather-app"))
    report = run_scenario(scenario)
    assert report.passed, report.failures


def test_unknown_action_verb_named_in_error():
    data = {
        "apps": [{"manifest": {"package": "com.x"}, "script": [{"do": "teleport"}]}]
    }
    with pytest.raises(ScenarioParseError, match="teleport"):
        parse_scenario(data)


def test_unknown_top_level_field():
    with pytest.raises(ScenarioParseError):
        parse_scenario({"bogus": 1})


def test_empty_scenario_is_a_noop_pass():
    report = run_scenario(parse_scenario({}))
    assert report.passed
    assert report.app_statuses == {}


def test_missing_file():
    with pytest.raises(ScenarioParseError):
        load_scenario("/nonexistent/scenario.json")


def test_failing_assertion_reported():
    data = {
        "fixtures": {"dns": {"h.example.com": "1.1.1.1"}},
        "apps": [
            {
                "manifest": {
                    "package": "com.x",
                    "permissions": [{"id": "android.permission.INTERNET"}],
                    "legacy": True,
                },
                # wrong expectation: this request will be delivered
                "script": [{"do": "http", "url": "http://h.example.com/", "expect": "refused"}],
            }
        ],
    }
    report = run_scenario(parse_scenario(data))
    assert not report.passed
    assert "expected 'refused'" in report.failures[0]


def test_unscripted_prompt_raises():
    data = {
        "fixtures": {"dns": {"evil.example.com": "6.6.6.6"}},
        "apps": [
            {
                "manifest": {
                    "package": "com.x",
                    "permissions": [{"id": "android.permission.INTERNET"}],
                    "legacy": True,
                },
                "script": [{"do": "http", "url": "http://evil.example.com/"}],
            }
        ],
        "operator": [{"op": "policy", "app": "com.x", "allowed": [], "default": "prompt", "at": 0}],
    }
    with pytest.raises(UnscriptedPromptError):
        run_scenario(parse_scenario(data))


@pytest.mark.parametrize("name", HEADLESS_SCENARIOS)
def test_all_bundled_scenarios_pass(name):
    report = run_scenario(load_scenario(bundled_scenario_path(name)))
    assert report.passed, (name, report.failures)


@pytest.mark.parametrize("name", HEADLESS_SCENARIOS)
def test_determinism_byte_identical_logs(name):
    path = bundled_scenario_path(name)
    a = run_scenario(load_scenario(path)).log_ndjson
    b = run_scenario(load_scenario(path)).log_ndjson
    assert a.encode() == b.encode()


def test_suspension_parks_one_app_while_others_proceed():
    report = run_scenario(load_scenario(bundled_scenario_path("slicing-prompt")))
    assert report.passed, report.failures
    entries = [json.loads(line) for line in report.log_ndjson.splitlines()]
    prompt_seq = next(e["seq"] for e in entries if e["action"] == "firewall-prompt")
    resolution_seq = next(e["seq"] for e in entries if e["action"] == "firewall-decision")
    other_app_between = [
        e
        for e in entries
        if prompt_seq < e["seq"] < resolution_seq and e["actor"] == "com.example.notes"
    ]
    assert other_app_between, "the other app should act while the prompt is pending"


def test_event_log_seq_and_immutability():
    report = run_scenario(load_scenario(bundled_scenario_path("phone-call")))
    seqs = [json.loads(line)["seq"] for line in report.log_ndjson.splitlines()]
    assert seqs == sorted(seqs)
    assert len(set(seqs)) == len(seqs)
