import hashlib
import json
from pathlib import Path

from navmix.cli import run_main, suite_main

from conftest import SCENARIO_DIR

SUITE_DIR = Path(__file__).resolve().parent.parent / "suites"


class TestRunnerCli:
    def test_headless_run_writes_log(self, tmp_path, capsys):
        out = tmp_path / "log.jsonl"
        code = run_main(["--scenario", str(SCENARIO_DIR / "single_goal.json"),
                         "--out", str(out), "--headless"])
        assert code == 0
        assert out.exists()
        summary = json.loads(capsys.readouterr().out.strip())
        assert summary["reached"] is True
        assert "log_sha256" in summary

    def test_fixed_seed_is_bit_reproducible(self, tmp_path, capsys):
        hashes = []
        for name in ("a.jsonl", "b.jsonl"):
            out = tmp_path / name
            run_main(["--scenario", str(SCENARIO_DIR / "crowd_arbitration.json"),
                      "--seed", "21", "--out", str(out)])
            hashes.append(hashlib.sha256(out.read_bytes()).hexdigest())
            capsys.readouterr()
        assert hashes[0] == hashes[1]

    def test_overrides_apply(self, tmp_path, capsys):
        run_main(["--scenario", str(SCENARIO_DIR / "single_goal.json"),
                  "--ticks", "3", "--samples", "50", "--method", "mh"])
        summary = json.loads(capsys.readouterr().out.strip())
        assert summary["ticks"] == 3
        assert summary["method"] == "mh"
        assert summary["reached"] is False


class TestSuiteCli:
    def test_suite_runs_and_writes_csv(self, tmp_path, capsys):
        code = suite_main(["--suite", str(SUITE_DIR / "smoke.json"),
                           "--out", str(tmp_path / "out")])
        assert code == 0
        csv_text = (tmp_path / "out" / "runs.csv").read_text()
        assert len(csv_text.splitlines()) == 5  # header + 4 cells
        assert "1 runs" not in capsys.readouterr().out
