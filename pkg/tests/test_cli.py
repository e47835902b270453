from pathlib import Path

import pytest
from click.testing import CliRunner

from relzk.cli import main
from relzk.config import get_settings
from relzk.graph import read_graph_file, validate_colouring
from relzk.manifest import read_manifest
from relzk.randomness import read_shared_randomness

INSTANCES = Path(__file__).resolve().parent.parent / "instances"
DEMO = str(INSTANCES / "demo.col")
K4_FILE = str(INSTANCES / "k4.col")


@pytest.fixture
def runner():
    return CliRunner()


def lines_of(result):
    return result.stdout.splitlines()


class TestGen:
    def test_writes_coloured_instance(self, runner, tmp_path):
        out = tmp_path / "g.col"
        result = runner.invoke(main, ["gen", "--vertices", "12", "--seed", "3", "--out", str(out)])
        assert result.exit_code == 0, result.output
        graph, colouring = read_graph_file(out)
        assert validate_colouring(graph, colouring)
        assert f"|V|={graph.num_vertices} |E|={graph.num_edges}" in result.output
        assert read_manifest(out).params == {"vertices": 12}

    def test_same_seed_same_bytes(self, runner, tmp_path):
        paths = [tmp_path / "a.col", tmp_path / "b.col"]
        for path in paths:
            assert runner.invoke(main, ["gen", "--vertices", "12", "--seed", "9", "--out", str(path)]).exit_code == 0
        body = [p.read_text().splitlines()[1:] for p in paths]
        assert body[0] == body[1]

    def test_hits_requested_vertex_count(self, runner, tmp_path):
        out = tmp_path / "g.col"
        result = runner.invoke(main, ["gen", "--vertices", "588", "--seed", "7", "--out", str(out)])
        assert result.exit_code == 0, result.output
        assert any(line.startswith("p edge 588 ") for line in out.read_text().splitlines())
        assert "|V|=588 " in result.output

    def test_stdout(self, runner):
        result = runner.invoke(main, ["gen", "--vertices", "5", "--seed", "1"])
        assert result.exit_code == 0
        assert "p edge " in result.output

    def test_missing_vertices_is_usage_error(self, runner):
        assert runner.invoke(main, ["gen"]).exit_code == 2


class TestRun:
    def test_demo_session(self, runner):
        result = runner.invoke(main, ["run", "--graph", DEMO, "--k", "10", "--seed", "1"])
        assert result.exit_code == 0, result.output
        output = lines_of(result)
        assert "rounds=810" in output
        assert "failures=0" in output
        assert output[-1] == "summary rounds=810 violations=0 worst_margin_ns=8.138"

    def test_transcript_then_audit(self, runner, tmp_path):
        out = tmp_path / "t.tsv"
        assert runner.invoke(main, ["run", "--graph", DEMO, "--rounds", "300", "--out", str(out)]).exit_code == 0
        assert len([line for line in out.read_text().splitlines() if not line.startswith("#")]) == 300

        passed = runner.invoke(main, ["audit", str(out)])
        assert passed.exit_code == 0
        assert lines_of(passed)[-1].startswith("summary rounds=300 violations=0")

        failed = runner.invoke(main, ["audit", str(out), "--separation", "57"])
        assert failed.exit_code == 4
        assert "violations=600" in failed.output

    @pytest.mark.parametrize("body", ["", "# relzk run seed=0\n"])
    def test_audit_of_empty_transcript(self, runner, tmp_path, body):
        empty = tmp_path / "empty.tsv"
        empty.write_text(body)
        result = runner.invoke(main, ["audit", str(empty)])
        assert result.exit_code == 0, result.output
        assert lines_of(result)[-1] == "summary rounds=0 violations=0 worst_margin_ns=none"

    def test_same_seed_same_transcript(self, runner, tmp_path):
        out = tmp_path / "t.tsv"
        bodies = []
        for _ in range(2):
            assert runner.invoke(main, ["run", "--graph", DEMO, "--k", "3", "--seed", "11", "--out", str(out)]).exit_code == 0
            bodies.append(out.read_bytes())
        assert bodies[0] == bodies[1]

    def test_strict_with_close_separation(self, runner, tmp_path):
        config = tmp_path / "close.env"
        config.write_text("separation_m = 57\n")
        result = runner.invoke(main, ["run", "--graph", DEMO, "--rounds", "50", "--config", str(config), "--strict"])
        assert result.exit_code == 4

    def test_no_certificate(self, runner):
        result = runner.invoke(main, ["run", "--graph", K4_FILE])
        assert result.exit_code == 3
        assert "no certificate" in result.output

    def test_bad_graph_file(self, runner, tmp_path):
        bad = tmp_path / "bad.col"
        bad.write_text("p edge 2 1\ne 1 3\n")
        assert runner.invoke(main, ["run", "--graph", str(bad)]).exit_code == 3


class TestAttack:
    def test_fake_colouring_on_k4(self, runner):
        result = runner.invoke(main, ["attack", "--graph", K4_FILE, "--rounds", "3000", "--seed", "2"])
        assert result.exit_code == 0, result.output
        assert "exact=29/30" in lines_of(result)

    def test_sweep_report_file(self, runner, tmp_path):
        out = tmp_path / "report.txt"
        args = ["attack", "--graph", K4_FILE, "--profile", "constant", "--rounds", "2000", "--sweep", "3", "--out", str(out)]
        result = runner.invoke(main, args)
        assert result.exit_code == 0
        assert any(line.startswith("coverage=") and line.endswith("/3") for line in lines_of(result))
        assert read_manifest(out).params["sweep"] == 3

    def test_unknown_profile(self, runner):
        assert runner.invoke(main, ["attack", "--graph", K4_FILE, "--profile", "psychic"]).exit_code == 3


class TestUtilities:
    def test_bench(self, runner):
        result = runner.invoke(main, ["bench", "--rounds", "2000"])
        assert result.exit_code == 0
        names = {line.split("=")[0] for line in lines_of(result)}
        assert {"answer_rounds_per_second", "session_rounds_per_second", "projected_seconds_per_million_rounds"} <= names

    def test_share(self, runner, tmp_path):
        out = tmp_path / "shared.rzk"
        result = runner.invoke(main, ["share", "--graph", DEMO, "--k", "2", "--seed", "7", "--out", str(out)])
        assert result.exit_code == 0
        shared = read_shared_randomness(out)
        assert shared.seed == 7
        assert shared.rounds.common_vectors.shape[0] == 162
        assert f"bytes={out.stat().st_size}" in result.output

    def test_version(self, runner):
        assert runner.invoke(main, ["--version"]).exit_code == 0


class TestReplay:
    def test_replay_reproduces_transcript(self, runner, tmp_path):
        out = tmp_path / "t.tsv"
        assert runner.invoke(main, ["run", "--graph", DEMO, "--rounds", "200", "--seed", "4", "--out", str(out)]).exit_code == 0
        first = out.read_bytes()
        result = runner.invoke(main, ["replay", str(out)])
        assert result.exit_code == 0, result.output
        assert out.read_bytes() == first

    def test_replay_reproduces_instance(self, runner, tmp_path):
        out = tmp_path / "g.col"
        assert runner.invoke(main, ["gen", "--vertices", "12", "--seed", "6", "--out", str(out)]).exit_code == 0
        first = out.read_bytes()
        assert runner.invoke(main, ["replay", str(out)]).exit_code == 0
        assert out.read_bytes() == first

    def test_artefact_without_manifest(self, runner):
        assert runner.invoke(main, ["replay", DEMO]).exit_code == 3


class TestHistory:
    def test_disabled(self, runner):
        result = runner.invoke(main, ["history"])
        assert "run ledger disabled" in result.output

    def test_records_runs(self, runner, tmp_path, monkeypatch):
        monkeypatch.setenv("RELZK_LEDGER_URL", f"sqlite:///{tmp_path / 'runs.db'}")
        get_settings.cache_clear()
        runner.invoke(main, ["run", "--graph", DEMO, "--rounds", "20"])
        runner.invoke(main, ["run", "--graph", K4_FILE])

        rows = [line.split("\t") for line in lines_of(runner.invoke(main, ["history"]))]
        assert [row[1] for row in rows] == ["run", "run"]
        assert rows[0][3:5] == ["failed", "exit=3"]
        assert rows[1][3:5] == ["completed", "exit=0"]

    def test_failing_replay_is_finished_in_ledger(self, runner, tmp_path, monkeypatch):
        monkeypatch.setenv("RELZK_LEDGER_URL", f"sqlite:///{tmp_path / 'runs.db'}")
        get_settings.cache_clear()
        config = tmp_path / "close.env"
        config.write_text("separation_m = 57\n")
        out = tmp_path / "t.tsv"
        args = ["run", "--graph", DEMO, "--rounds", "30", "--config", str(config), "--strict", "--out", str(out)]
        assert runner.invoke(main, args).exit_code == 4

        assert runner.invoke(main, ["replay", str(out)]).exit_code == 4
        config.unlink()
        assert runner.invoke(main, ["replay", str(out)]).exit_code == 2

        rows = [line.split("\t") for line in lines_of(runner.invoke(main, ["history"]))]
        replays = [row for row in rows if row[1] == "replay"]
        assert [row[3:5] for row in replays] == [["failed", "exit=2"], ["failed", "exit=4"]]
        assert all(row[3] != "running" for row in rows)
