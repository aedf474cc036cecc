import json
import socket

import pytest
from click.testing import CliRunner

from permesh.cli import main
from permesh.scenario import bundled_scenario_path

WEATHER_MANIFEST = {
    "package": "com.example.weather",
    "permissions": [
        {"id": "org.proxy.net.DOMAIN_SELECTIVE_INTERNET", "params": ["*.bbc.co.uk"]},
        {"id": "org.proxy.fs.SELECTIVE_SD_CARD"},
    ],
}

LEGACY_MANIFEST = {
    "package": "com.example.weather",
    "legacy": True,
    "permissions": [
        {"id": "android.permission.INTERNET"},
        {"id": "android.permission.WRITE_EXTERNAL_STORAGE"},
    ],
}


@pytest.fixture
def runner():
    return CliRunner()


def write_json(tmp_path, name, data):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


class TestAnalyze:
    def test_text_output(self, runner, tmp_path):
        path = write_json(tmp_path, "m.json", WEATHER_MANIFEST)
        result = runner.invoke(main, ["analyze", path])
        assert result.exit_code == 0
        assert "install prompt:" in result.output
        assert "*.bbc.co.uk" in result.output
        assert "android.permission.INTERNET restricted to *.bbc.co.uk" in result.output

    def test_json_output(self, runner, tmp_path):
        path = write_json(tmp_path, "m.json", WEATHER_MANIFEST)
        result = runner.invoke(main, ["analyze", path, "--format", "json"])
        assert result.exit_code == 0
        data = json.loads(result.output)
        assert data["package"] == "com.example.weather"
        ids = {e["id"] for e in data["footprint"]}
        assert ids == {
            "android.permission.INTERNET",
            "android.permission.WRITE_EXTERNAL_STORAGE",
        }

    def test_compare_diff(self, runner, tmp_path):
        legacy = write_json(tmp_path, "legacy.json", LEGACY_MANIFEST)
        proxied = write_json(tmp_path, "proxied.json", WEATHER_MANIFEST)
        result = runner.invoke(main, ["analyze", legacy, "--compare", proxied])
        assert result.exit_code == 0
        assert "- android.permission.INTERNET\n" in result.output
        assert "+ android.permission.INTERNET restricted to *.bbc.co.uk" in result.output

    def test_missing_manifest_exit_2(self, runner, tmp_path):
        result = runner.invoke(main, ["analyze", str(tmp_path / "nope.json")])
        assert result.exit_code == 2
        assert "error:" in result.output

    def test_unknown_permission_exit_2(self, runner, tmp_path):
        path = write_json(tmp_path, "m.json", {
            "package": "com.x",
            "permissions": [{"id": "android.permission.NO_SUCH"}],
        })
        result = runner.invoke(main, ["analyze", path])
        assert result.exit_code == 2


class TestRun:
    def test_pass_exit_0(self, runner):
        result = runner.invoke(main, ["run", bundled_scenario_path("weather-app")])
        assert result.exit_code == 0
        assert "PASS" in result.output

    def test_fail_exit_1(self, runner, tmp_path):
        path = write_json(tmp_path, "s.json", {
            "fixtures": {"dns": {"h.example.com": "1.1.1.1"}},
            "apps": [{
                "manifest": {
                    "package": "com.x",
                    "permissions": [{"id": "android.permission.INTERNET"}],
                    "legacy": True,
                },
                "script": [{"do": "http", "url": "http://h.example.com/", "expect": "refused"}],
            }],
        })
        result = runner.invoke(main, ["run", path])
        assert result.exit_code == 1
        assert "FAIL" in result.output

    def test_bad_scenario_exit_2(self, runner, tmp_path):
        path = write_json(tmp_path, "s.json", {"bogus": True})
        result = runner.invoke(main, ["run", path])
        assert result.exit_code == 2

    def test_log_written_as_ndjson(self, runner, tmp_path):
        log = tmp_path / "out.ndjson"
        result = runner.invoke(main, [
            "run", bundled_scenario_path("weather-app"), "--log", str(log),
        ])
        assert result.exit_code == 0
        lines = log.read_text().splitlines()
        assert lines
        for line in lines:
            event = json.loads(line)
            assert {"seq", "t", "actor", "action", "verdict"} <= event.keys()

    def test_json_report(self, runner):
        result = runner.invoke(main, [
            "run", bundled_scenario_path("weather-app"), "--format", "json",
        ])
        data = json.loads(result.output)
        assert data["passed"] is True
        assert "appStatuses" in data

    def test_tick_ms_env_changes_timestamps(self, runner, monkeypatch, tmp_path):
        path = bundled_scenario_path("weather-app")
        logs = {}
        for tick in ("5", "7"):
            monkeypatch.setenv("PERMESH_SEED", tick)
            log = tmp_path / f"log-{tick}.ndjson"
            result = runner.invoke(main, ["run", path, "--log", str(log)])
            assert result.exit_code == 0
            logs[tick] = log.read_text()
        assert logs["5"] != logs["7"]
        last = json.loads(logs["5"].splitlines()[-1])
        assert last["t"] % 5 == 0


class TestBench:
    def test_table(self, runner):
        result = runner.invoke(main, ["bench", "--n", "4"])
        assert result.exit_code == 0
        assert "median" in result.output

    def test_report_files(self, runner, tmp_path):
        out = tmp_path / "report"
        result = runner.invoke(main, [
            "bench", "--n", "4", "--report", str(out),
        ])
        assert result.exit_code == 0
        assert (out / "bench.csv").exists()
        assert (out / "bench.png").exists()
        header = (out / "bench.csv").read_text().splitlines()[0]
        assert "direct_ms" in header and "proxy_ms" in header


def test_serve_port_in_use_exit_2(runner):
    blocker = socket.socket()
    blocker.bind(("127.0.0.1", 0))
    port = blocker.getsockname()[1]
    try:
        result = runner.invoke(main, ["serve", "--port", str(port)])
    finally:
        blocker.close()
    assert result.exit_code == 2
    assert "cannot bind" in result.output
