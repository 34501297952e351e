import json

import pytest
from click.testing import CliRunner

from qareuse import clone_engine
from qareuse.cli import EXIT_INCOMPLETE, EXIT_INPUT_ERROR, cli

from .conftest import requires_git

pytestmark = pytest.mark.usefixtures("restore_logging")


def invoke(*args):
    result = CliRunner().invoke(cli, [str(arg) for arg in args], catch_exceptions=False)
    return result


def run_corpus(manifest, workdir, out, *options):
    return invoke("--quiet", "--workdir", workdir, "run", manifest, "--out", out, *options)


@requires_git
class TestRun:
    def test_mini_corpus(self, mini_corpus, tmp_path):
        result = run_corpus(mini_corpus, tmp_path / "work", tmp_path / "out")
        assert result.exit_code == 0, result.output

        report = json.loads((tmp_path / "out" / "report.json").read_text(encoding="utf-8"))

        assert report["corpus"]["qa_snippets"] == 2
        assert report["clones"]["pair_count"] == 6
        assert report["clones"]["class_count"] == 2
        assert report["provenance"]["directions"] == {
            "REUSE_FROM_QA": 4, "REUSE_TO_QA": 2, "AMBIGUOUS": 0, "UNDATED": 0}
        assert report["provenance"]["resolutions"]["AUTO"] == 6

        counts = report["violation_counts"]
        assert (counts["app_side"], counts["post_side"], counts["total"]) == (4, 2, 6)
        assert counts["by_rule"] == {
            "APP_MISSING_SHAREALIKE_FILE": 4,
            "APP_MISSING_SHAREALIKE_PROJECT": 4,
            "APP_MISSING_ATTRIBUTION": 4,
            "POST_MISSING_SOURCE_LICENSE": 2,
        }
        post_side = [v for v in report["violations"] if v["direction"] == "REUSE_TO_QA"]
        assert {v["evidence"]["source_license"] for v in post_side} == {"Apache-2.0"}

        assert len(report["migrations"]) == 1
        migration = report["migrations"][0]
        assert (migration["source_app"], migration["destination_app"]) == ("beta", "gamma")
        assert migration["duration_days"] == 761
        assert migration["consistent"] is False

        assert report["overlap"] == {"count": 2, "positive": 2, "median_rate": 100.0}
        assert report["lifespan_summary"]["count"] == 3
        assert report["lifespan_summary"]["single_release"] == 3
        assert report["lifespan_summary"]["still_present"] == 3

        assert [(a["owner_display_name"], a["contributors"]) for a in report["author_review"]] \
            == [("Bob", ["Bob"]), ("Bob", ["Bob"])]
        assert report["incomplete_units"] == []

    def test_report_does_not_depend_on_workers(self, mini_corpus, tmp_path):
        shards = ("--shard-size-qa", 1, "--shard-size-app", 1)
        outputs = []
        for name, workers in (("one", 1), ("eight", 8), ("again", 8)):
            result = run_corpus(mini_corpus, tmp_path / f"work-{name}", tmp_path / name,
                                "--workers", workers, *shards)
            assert result.exit_code == 0, result.output
            outputs.append((tmp_path / name / "report.json").read_bytes())
        assert outputs[0] == outputs[1] == outputs[2]

    def test_stages_match_one_command_run(self, mini_corpus, tmp_path):
        corpus = mini_corpus.parent
        work = tmp_path / "stages"
        steps = [
            ("ingest-qa", corpus / "posts.xml"),
            ("ingest-app", corpus / "releases.csv", "--inconsistencies",
             corpus / "inconsistencies.csv"),
            ("detect",),
            ("attribute",),
            ("analyze",),
            ("report", "--out", tmp_path / "staged"),
        ]
        for step in steps:
            result = invoke("--quiet", "--workdir", work, *step)
            assert result.exit_code == 0, result.output

        assert run_corpus(mini_corpus, tmp_path / "work", tmp_path / "whole").exit_code == 0
        assert (tmp_path / "staged" / "report.json").read_bytes() == \
            (tmp_path / "whole" / "report.json").read_bytes()

    def test_csv_bundle(self, mini_corpus, tmp_path):
        work = tmp_path / "work"
        assert run_corpus(mini_corpus, work, tmp_path / "out").exit_code == 0
        result = invoke("--quiet", "--workdir", work, "report", "--out", tmp_path / "csv",
                        "--format", "csv_bundle")
        assert result.exit_code == 0
        assert (tmp_path / "csv" / "violations.csv").exists()
        assert str(tmp_path / "csv" / "summary.csv") in result.output

    def test_summary_is_printed(self, mini_corpus, tmp_path):
        result = invoke("--workdir", tmp_path / "work", "run", mini_corpus,
                        "--out", tmp_path / "out")
        assert result.exit_code == 0
        assert "Run summary" in result.output
        assert "APP_MISSING_ATTRIBUTION" in result.output

    def test_failing_units_exit_with_partial_report(self, mini_corpus, tmp_path, monkeypatch):
        def broken(plan, unit):
            raise RuntimeError("worker lost")

        monkeypatch.setattr(clone_engine, "_execute_unit", broken)
        result = run_corpus(mini_corpus, tmp_path / "work", tmp_path / "out", "--workers", 1)

        assert result.exit_code == EXIT_INCOMPLETE
        report = json.loads((tmp_path / "out" / "report.json").read_text(encoding="utf-8"))
        assert report["incomplete_units"] == ["u0000-0000"]
        assert report["clones"]["pair_count"] == 0


def test_missing_stage_input(tmp_path):
    result = invoke("--workdir", tmp_path / "empty", "detect")
    assert result.exit_code == EXIT_INPUT_ERROR
    assert "run the ingest-qa stage first" in result.output


def test_unreadable_dump(tmp_path):
    result = invoke("--quiet", "--workdir", tmp_path / "work", "ingest-qa",
                    tmp_path / "missing" / "Posts.xml")
    assert result.exit_code == EXIT_INPUT_ERROR
    assert "Cannot read dump" in result.output


def test_invalid_threshold(tmp_path):
    manifest = tmp_path / "pipeline.json"
    manifest.write_text('{"dump": "posts.xml", "releases": "releases.csv"}', encoding="utf-8")
    result = invoke("--workdir", tmp_path / "work", "run", manifest, "--threshold", 1.5)
    assert result.exit_code == EXIT_INPUT_ERROR
    assert "Similarity threshold" in result.output


def test_invalid_manifest(tmp_path):
    manifest = tmp_path / "pipeline.json"
    manifest.write_text('{"dump": "posts.xml"}', encoding="utf-8")
    result = invoke("--workdir", tmp_path / "work", "run", manifest)
    assert result.exit_code == EXIT_INPUT_ERROR


def test_bad_config_value(tmp_path, monkeypatch):
    monkeypatch.setenv("QAREUSE_MIN_LINES", "many")
    result = invoke("--workdir", tmp_path / "work", "detect")
    assert result.exit_code == EXIT_INPUT_ERROR
    assert "min_lines" in result.output
