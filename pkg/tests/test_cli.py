"""CLI surface: subcommands, flags, exit codes."""

import json

import pytest
from click.testing import CliRunner

from modshap import StubServer, SyntheticEndpoint, SyntheticModelSpec
from modshap.cli import main


@pytest.fixture
def runner():
    return CliRunner()


def run_cli(runner, args):
    return runner.invoke(main, args, catch_exceptions=False)


class TestRunCommand:
    def test_synthetic_run_writes_artifacts_and_progress(self, runner, tiny_corpus, tmp_path):
        out = tmp_path / "run"
        result = run_cli(
            runner,
            [
                "run",
                "--dataset", str(tiny_corpus),
                "--endpoint", "synthetic:additive",
                "--out", str(out),
                "--seed", "3",
            ],
        )
        assert result.exit_code == 0, result.output
        assert "[done]" in result.output
        assert len(list(out.glob("question-*.json"))) == 3

    def test_bad_endpoint_spec_exits_2(self, runner, tiny_corpus, tmp_path):
        result = runner.invoke(
            main,
            ["run", "--dataset", str(tiny_corpus), "--endpoint", "carrier-pigeon",
             "--out", str(tmp_path / "x")],
        )
        assert result.exit_code == 2

    def test_schema_error_exits_2(self, runner, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{}")
        result = runner.invoke(
            main,
            ["run", "--dataset", str(bad), "--endpoint", "synthetic:additive",
             "--out", str(tmp_path / "x")],
        )
        assert result.exit_code == 2

    def test_unreachable_endpoint_exits_3(self, runner, tiny_corpus, tmp_path):
        result = runner.invoke(
            main,
            ["run", "--dataset", str(tiny_corpus), "--endpoint", "http://127.0.0.1:9",
             "--out", str(tmp_path / "x")],
        )
        assert result.exit_code == 3

    def test_partial_failure_exits_4(self, runner, tiny_corpus, tmp_path):
        payload = json.loads(tiny_corpus.read_text())
        payload["questions"][0]["audio"] = "audio/clip0.wav"
        # Corrupt one WAV so loading fails mid-run.
        wav = tiny_corpus.parent / "audio" / "clip1.wav"
        wav.write_bytes(b"RIFFgarbage")
        tiny_corpus.write_text(json.dumps(payload))
        result = runner.invoke(
            main,
            ["run", "--dataset", str(tiny_corpus), "--endpoint", "synthetic:additive",
             "--out", str(tmp_path / "x")],
        )
        assert result.exit_code == 4
        assert "[fail]" in result.output

    def test_filters_and_limit(self, runner, tiny_corpus, tmp_path):
        out = tmp_path / "run"
        result = run_cli(
            runner,
            ["run", "--dataset", str(tiny_corpus), "--endpoint", "synthetic:additive",
             "--out", str(out), "--filter-source", "MusicCaps", "--grep", "melody",
             "--limit", "1"],
        )
        assert result.exit_code == 0
        assert len(list(out.glob("question-*.json"))) == 1

    def test_mc_pi_mode(self, runner, tiny_corpus, tmp_path):
        out = tmp_path / "run"
        result = run_cli(
            runner,
            ["run", "--dataset", str(tiny_corpus), "--endpoint", "synthetic:additive",
             "--out", str(out), "--mode", "mc-pi", "--limit", "1"],
        )
        assert result.exit_code == 0
        artifact = json.loads(next(out.glob("question-*.json")).read_text())
        assert artifact["mode"] == "mc-pi"


class TestReportCommand:
    def make_run(self, runner, corpus, out):
        run_cli(
            runner,
            ["run", "--dataset", str(corpus), "--endpoint", "synthetic:additive", "--out", str(out)],
        )

    def test_md_report_to_stdout(self, runner, tiny_corpus, tmp_path):
        out = tmp_path / "run"
        self.make_run(runner, tiny_corpus, out)
        result = run_cli(runner, ["report", "--run-dir", str(out)])
        assert result.exit_code == 0
        assert "| Model | Accuracy MC-PI |" in result.output
        assert "synthetic-additive" in result.output

    def test_json_report_to_file(self, runner, tiny_corpus, tmp_path):
        out = tmp_path / "run"
        self.make_run(runner, tiny_corpus, out)
        target = tmp_path / "report.json"
        result = run_cli(
            runner, ["report", "--run-dir", str(out), "--format", "json", "--out", str(target)]
        )
        assert result.exit_code == 0
        payload = json.loads(target.read_text())
        assert payload["cells"][0]["mode"] == "mc-npi"

    def test_missing_run_dir_exits_2(self, runner, tmp_path):
        result = runner.invoke(main, ["report", "--run-dir", str(tmp_path / "nope")])
        assert result.exit_code == 2


class TestPlotCommand:
    def test_plot_from_run_dir(self, runner, tiny_corpus, tmp_path):
        out = tmp_path / "run"
        run_cli(
            runner,
            ["run", "--dataset", str(tiny_corpus), "--endpoint", "synthetic:additive", "--out", str(out)],
        )
        fig = tmp_path / "fig.svg"
        result = run_cli(
            runner,
            ["plot", "--run-dir", str(out), "--question-id", "q000", "--out", str(fig)],
        )
        assert result.exit_code == 0, result.output
        assert fig.exists()
        assert (tmp_path / "fig.svg.json").exists()

    def test_unknown_question_exits_2(self, runner, tiny_corpus, tmp_path):
        out = tmp_path / "run"
        run_cli(
            runner,
            ["run", "--dataset", str(tiny_corpus), "--endpoint", "synthetic:additive", "--out", str(out)],
        )
        result = runner.invoke(
            main, ["plot", "--run-dir", str(out), "--question-id", "zz", "--out", str(tmp_path / "f.svg")]
        )
        assert result.exit_code == 2


class TestOtherCommands:
    def test_selftest_passes(self, runner):
        result = run_cli(runner, ["selftest"])
        assert result.exit_code == 0
        assert "checks passed" in result.output
        assert "[FAIL]" not in result.output

    def test_conformance_against_stub(self, runner):
        with StubServer(SyntheticEndpoint(SyntheticModelSpec(kind="additive"))) as stub:
            result = run_cli(runner, ["conformance", "--endpoint", stub.base_url])
        assert result.exit_code == 0, result.output
        assert "all conformance checks passed" in result.output

    def test_conformance_failure_exit_code(self, runner):
        with StubServer(
            SyntheticEndpoint(SyntheticModelSpec(kind="additive")), corrupt_score_arity=True
        ) as stub:
            result = runner.invoke(main, ["conformance", "--endpoint", stub.base_url])
        assert result.exit_code == 1
        assert "[FAIL]" in result.output
