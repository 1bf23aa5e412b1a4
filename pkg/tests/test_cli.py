from __future__ import annotations

import csv
import json

import pytest

from nudgesim.cli import EXIT_OK, EXIT_SCENARIO, EXIT_USAGE, main
from nudgesim.events import EventLog
from nudgesim.wire import replay_frames

SCENARIO = {
    "run": {"seed": 2, "duration": 1.5, "ee_start": [0.2, 0.0, 0.3]},
    "scene": [
        {"id": "pot", "label": "cooking pot", "category": "A", "pose": [0.3, -0.1, 0.1]},
        {"id": "stove", "label": "on the stove", "category": "B", "pose": [0.5, 0.2, 0.1]},
    ],
    "human": {"mode": "none"},
    "llm": {"kind": "mock", "policy": {"kind": "sequence", "responses": ["# Move ; on the stove &"]}},
}


@pytest.fixture()
def scenario_file(tmp_path):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(SCENARIO))
    return path


class TestRun:
    def test_headless_run_writes_log(self, tmp_path, scenario_file, capsys):
        log_path = tmp_path / "run.jsonl"
        code = main(["run", "--scenario", str(scenario_file), "--headless", "--log", str(log_path)])
        assert code == EXIT_OK
        log = EventLog.read(log_path)
        assert len(log.by_kind("confidence_sample")) == 30

    def test_missing_scenario_is_usage_error(self, tmp_path):
        code = main(["run", "--scenario", str(tmp_path / "nope.json"), "--headless"])
        assert code == EXIT_USAGE

    def test_invalid_scenario_is_scenario_error(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"scene": []}))
        code = main(["run", "--scenario", str(bad), "--headless"])
        assert code == EXIT_SCENARIO

    def test_seed_override_changes_log(self, tmp_path, scenario_file):
        a, b, c = (tmp_path / n for n in ("a.jsonl", "b.jsonl", "c.jsonl"))
        main(["run", "--scenario", str(scenario_file), "--headless", "--log", str(a)])
        main(["run", "--scenario", str(scenario_file), "--headless", "--log", str(b), "--seed", "99"])
        main(["run", "--scenario", str(scenario_file), "--headless", "--log", str(c), "--seed", "99"])
        assert a.read_text() != b.read_text()
        assert b.read_text() == c.read_text()

    def test_unknown_subcommand_is_usage_error(self):
        assert main(["frobnicate"]) == EXIT_USAGE


class TestReplay:
    def test_empty_log_exits_zero_with_no_frames(self, tmp_path, capsys):
        empty = tmp_path / "empty.jsonl"
        empty.write_text("")
        code = main(["replay", "--log", str(empty)])
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert out.strip() == ""

    def test_replay_prints_reconstructed_frames(self, tmp_path, scenario_file, capsys):
        log_path = tmp_path / "run.jsonl"
        main(["run", "--scenario", str(scenario_file), "--headless", "--log", str(log_path)])
        capsys.readouterr()
        code = main(["replay", "--log", str(log_path)])
        assert code == EXIT_OK
        lines = [l for l in capsys.readouterr().out.splitlines() if l.strip()]
        assert lines == replay_frames(EventLog.read(log_path))

    def test_missing_log_is_usage_error(self, tmp_path):
        assert main(["replay", "--log", str(tmp_path / "nope.jsonl")]) == EXIT_USAGE


class TestRecallExp:
    def read_rows(self, path):
        with open(path, newline="") as fh:
            return list(csv.reader(fh))

    def test_perfect_recall_mock_scores_100(self, tmp_path):
        out = tmp_path / "recall.csv"
        code = main(
            ["recall-exp", "--n", "0,5,10,15", "--trials", "20", "--client", "mock", "--out", str(out)]
        )
        assert code == EXIT_OK
        rows = self.read_rows(out)
        assert rows[0] == ["n", "success_rate", "trials", "errors"]
        assert [(r[0], r[1]) for r in rows[1:]] == [
            ("0", "1.0000"),
            ("5", "1.0000"),
            ("10", "1.0000"),
            ("15", "1.0000"),
        ]

    def test_forgetful_mock_only_recalls_immediately(self, tmp_path):
        out = tmp_path / "recall.csv"
        code = main(
            [
                "recall-exp",
                "--n",
                "0,5,10,15",
                "--trials",
                "20",
                "--client",
                "mock",
                "--mock-behavior",
                "forget:5",
                "--out",
                str(out),
            ]
        )
        assert code == EXIT_OK
        rows = self.read_rows(out)
        assert [(r[0], r[1]) for r in rows[1:]] == [
            ("0", "1.0000"),
            ("5", "0.0000"),
            ("10", "0.0000"),
            ("15", "0.0000"),
        ]

    def test_bad_n_list_is_usage_error(self):
        assert main(["recall-exp", "--n", "zero,five"]) == EXIT_USAGE

    def test_live_without_endpoint_is_usage_error(self):
        assert main(["recall-exp", "--client", "live"]) == EXIT_USAGE


class TestPlot:
    def test_plot_writes_series_files(self, tmp_path, scenario_file):
        log_path = tmp_path / "run.jsonl"
        main(["run", "--scenario", str(scenario_file), "--headless", "--log", str(log_path)])
        out_dir = tmp_path / "series"
        code = main(["plot", "--log", str(log_path), "--out", str(out_dir)])
        assert code == EXIT_OK
        for name in ("confidence.csv", "resample_rate.csv", "estimate.csv", "wrench.csv"):
            path = out_dir / name
            assert path.exists()
            with open(path, newline="") as fh:
                rows = list(csv.reader(fh))
            assert len(rows) > 1

    def test_plot_missing_log_is_usage_error(self, tmp_path):
        assert main(["plot", "--log", str(tmp_path / "no.jsonl"), "--out", str(tmp_path)]) == EXIT_USAGE


class TestReplayServe:
    def test_replay_over_websocket_streams_frames(self, tmp_path, scenario_file):
        import asyncio
        import subprocess
        import sys
        import time as time_mod

        import websockets

        from nudgesim.wire import decode

        log_path = tmp_path / "run.jsonl"
        main(["run", "--scenario", str(scenario_file), "--headless", "--log", str(log_path)])
        expected = replay_frames(EventLog.read(log_path))
        port = 8700 + (hash(str(tmp_path)) % 500)
        proc = subprocess.Popen(
            [
                sys.executable,
                "-m",
                "nudgesim.cli",
                "replay",
                "--log",
                str(log_path),
                "--speed",
                "50",
                "--bind",
                f"127.0.0.1:{port}",
            ],
            stdout=subprocess.DEVNULL,
            stderr=subprocess.DEVNULL,
        )
        try:
            async def collect():
                for _ in range(50):
                    try:
                        ws = await websockets.connect(f"ws://127.0.0.1:{port}")
                        break
                    except OSError:
                        await asyncio.sleep(0.1)
                else:
                    raise RuntimeError("replay server never came up")
                frames = []
                async with ws:
                    while True:
                        try:
                            frames.append(await asyncio.wait_for(ws.recv(), timeout=5.0))
                        except websockets.ConnectionClosed:
                            break
                return frames

            frames = asyncio.run(collect())
        finally:
            proc.kill()
            proc.wait()
        assert frames == expected
        assert all(decode(f)["type"] == "state_snapshot" for f in frames)
