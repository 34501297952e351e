import csv
import json

import pytest

from qareuse.exceptions import DomainError, PipelineError
from qareuse.models import (
    ClonePair, CloneClass, Direction, FileRecord, LicenseFinding, LicenseScope, LifespanRecord,
    MigrationChain, PassRecord, PassStatus, Post, ProvenanceRecord, Resolution, Rule,
    ViolationReport
)
from qareuse.report import (
    CSV_SECTIONS, ReportFormat, RunReport, check_app_side, check_post_side, emit_report,
    find_attributions, print_summary, scan_attribution
)

from .conftest import app_snippet, qa_snippet, statements, utc

DOMAINS = ("stackoverflow.com", "stackexchange.com")


def finding(license_id, scope=LicenseScope.FILE_HEADER):
    return LicenseFinding(license_id, 1.0, (), scope)


def pair_record(direction=Direction.REUSE_FROM_QA, overlap=None):
    return ProvenanceRecord("app/a/r1/src/A.java#L1-L10", "c1", utc(2015, 1, 1),
                            Resolution.AUTO, direction, overlap, "qa/1/0")


FILE = FileRecord("a", "src/A.java", "class A {}\n")


class TestAttribution:
    def test_comment_links_are_found(self):
        text = ("// from https://stackoverflow.com/a/309718\n"
                "String url = \"https://stackoverflow.com\";\n"
                "/* see StackOverflow.com/questions/1 */\n")
        assert find_attributions(text, DOMAINS) == [
            (1, "// from https://stackoverflow.com/a/309718"),
            (3, "/* see StackOverflow.com/questions/1 */"),
        ]

    def test_string_literals_do_not_count(self):
        assert not scan_attribution('String s = "stackoverflow.com";\n', DOMAINS)

    def test_no_domains(self):
        assert find_attributions("// stackoverflow.com\n", ()) == []


class TestAppSide:
    def test_copyleft_app_without_link(self):
        violation = check_app_side(FILE, [finding("GPL-3.0", LicenseScope.PROJECT_ROOT)],
                                   [finding("GPL-3.0")], False, pair_record())
        assert violation.rules_violated == {Rule.APP_MISSING_SHAREALIKE_FILE,
                                            Rule.APP_MISSING_SHAREALIKE_PROJECT,
                                            Rule.APP_MISSING_ATTRIBUTION}
        assert violation.label == "potential"
        assert violation.evidence["pair"] == ["app/a/r1/src/A.java#L1-L10", "qa/1/0"]

    def test_compliant_app(self):
        assert check_app_side(FILE, [finding("CC-BY-SA-4.0", LicenseScope.PROJECT_ROOT)],
                              [finding("CC-BY-SA-4.0")], True, pair_record()) is None

    def test_attribution_alone_is_not_enough(self):
        violation = check_app_side(FILE, [finding("MIT", LicenseScope.PROJECT_ROOT)],
                                   [finding("MIT")], True, pair_record())
        assert violation.rules_violated == {Rule.APP_MISSING_SHAREALIKE_FILE,
                                            Rule.APP_MISSING_SHAREALIKE_PROJECT}

    def test_older_sharealike_version(self):
        violation = check_app_side(FILE, [finding("CC-BY-SA-3.0", LicenseScope.PROJECT_ROOT)],
                                   [finding("CC-BY-SA-2.5")], True, pair_record())
        assert violation.rules_violated == {Rule.APP_MISSING_SHAREALIKE_FILE}

    @pytest.mark.parametrize("direction", [Direction.REUSE_TO_QA, Direction.AMBIGUOUS, None])
    def test_requires_reuse_from_qa(self, direction):
        with pytest.raises(DomainError):
            check_app_side(FILE, [], [], False, pair_record(direction))


class TestPostSide:
    post = Post(1, utc(2014, 3, 1), frozenset({"java"}), "<p>code</p>")

    def test_missing_source_license(self):
        violation = check_post_side(self.post, "Apache-2.0", [],
                                    pair_record(Direction.REUSE_TO_QA))
        assert violation.rules_violated == {Rule.POST_MISSING_SOURCE_LICENSE}
        assert violation.subject == "qa/1/0"
        assert violation.evidence["source_license"] == "Apache-2.0"

    def test_declared_license(self):
        findings = [finding("Apache-2.0", LicenseScope.POST_BODY)]
        assert check_post_side(self.post, "Apache-2.0", findings) is None

    def test_other_license_does_not_satisfy(self):
        findings = [finding("MIT", LicenseScope.POST_BODY)]
        violation = check_post_side(self.post, "Apache-2.0", findings)
        assert violation.subject == "qa/1"

    def test_unknown_source_asserts_nothing(self):
        assert check_post_side(self.post, "UNKNOWN", []) is None

    def test_requires_reuse_to_qa(self):
        with pytest.raises(DomainError):
            check_post_side(self.post, "MIT", [], pair_record(Direction.REUSE_FROM_QA))


def test_violation_needs_a_rule():
    with pytest.raises(DomainError):
        ViolationReport("qa/1/0", frozenset(), Direction.REUSE_TO_QA)


def sample_report():
    post = qa_snippet("qa/1/0", statements(12), created_at=utc(2014, 1, 1))
    app = app_snippet("app/a/r1/src/A.java#L1-L12", statements(12), app_id="a")
    snippets = {post.snippet_id: post, app.snippet_id: app}
    record = ProvenanceRecord(app.snippet_id, "c1", utc(2015, 1, 1), Resolution.AUTO,
                              Direction.REUSE_FROM_QA, 31.25, post.snippet_id)
    violation = ViolationReport(app.snippet_id, frozenset({Rule.APP_MISSING_ATTRIBUTION}),
                                Direction.REUSE_FROM_QA,
                                {"pair": [app.snippet_id, post.snippet_id]})
    migration = MigrationChain(("app/a/x", utc(2013, 1, 1)), ("qa/1/0", utc(2014, 1, 1)),
                               ("app/b/x", utc(2015, 1, 1)), "a", "b", 730, "GPL-3.0", "MIT",
                               False)
    return RunReport.build(
        config={"similarity_threshold": 0.7},
        corpus={"qa_snippets": 1, "app_snippets": 1},
        pairs=[ClonePair.of(post.snippet_id, app.snippet_id, 1.0)],
        classes=[CloneClass("C00001", tuple(sorted(snippets)), post.snippet_id)],
        snippets=snippets,
        records=[record],
        violations=[violation],
        passes=[PassRecord("qa/2/0", Direction.REUSE_TO_QA, PassStatus.INDETERMINATE,
                           ("app/c", "qa/2/0"))],
        migrations=[migration],
        lifespans=[LifespanRecord("C00001", "a", "r1", "r3", 3, 60, True)],
        incomplete_units=["u0001-0000", "u0000-0003"],
    )


class TestRunReport:
    def test_empty_run(self):
        report = RunReport.build({}, {})
        assert report.clones["pair_count"] == 0
        assert report.provenance["directions"] == {"REUSE_FROM_QA": 0, "REUSE_TO_QA": 0,
                                                   "AMBIGUOUS": 0, "UNDATED": 0}
        assert report.violation_counts["total"] == 0
        assert report.migration_summary == {"count": 0, "median_days": None, "min_days": None,
                                            "max_days": None, "inconsistent": 0}
        assert report.overlap == {"count": 0, "positive": 0, "median_rate": None}

    def test_statistics(self):
        report = sample_report()
        assert report.clones["pair_count"] == 1
        assert report.clones["posts_reused"] == 1
        assert report.provenance["directions"]["REUSE_FROM_QA"] == 1
        assert report.provenance["resolutions"]["AUTO"] == 1
        assert report.overlap == {"count": 1, "positive": 1, "median_rate": 31.25}
        assert report.violation_counts["by_rule"]["APP_MISSING_ATTRIBUTION"] == 1
        assert report.violation_counts["app_side"] == 1
        assert report.violation_counts["passes"] == {"PASS": 0, "INDETERMINATE": 1}
        assert report.migration_summary["inconsistent"] == 1
        assert report.lifespan_summary["still_present"] == 1
        assert report.sizes["REUSE_FROM_QA"]["qa"]["count"] == 1
        assert report.incomplete_units == ["u0000-0003", "u0001-0000"]

    def test_output_is_deterministic(self, tmp_path):
        first = emit_report(sample_report(), tmp_path / "one")[0]
        second = emit_report(sample_report(), tmp_path / "two")[0]
        assert first.read_bytes() == second.read_bytes()
        assert RunReport.load(first).to_dict() == sample_report().to_dict()

    def test_csv_bundle(self, tmp_path):
        written = emit_report(sample_report(), tmp_path, ReportFormat.CSV_BUNDLE)
        assert sorted(p.name for p in written) == sorted(
            [f"{s}.csv" for s in CSV_SECTIONS] + ["summary.csv"])
        with open(tmp_path / "violations.csv", encoding="utf-8") as handle:
            rows = list(csv.DictReader(handle))
        assert json.loads(rows[0]["rules_violated"]) == ["APP_MISSING_ATTRIBUTION"]
        with open(tmp_path / "summary.csv", encoding="utf-8") as handle:
            summary = {(r["section"], r["key"]): r["value"] for r in csv.DictReader(handle)}
        assert summary[("clones", "pair_count")] == "1"

    def test_unwritable_destination(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x", encoding="utf-8")
        with pytest.raises(PipelineError):
            emit_report(sample_report(), blocker)

    def test_print_summary(self):
        lines = []
        print_summary(sample_report(), echo=lines.append)
        assert lines[0] == "Run summary"
        assert "Clone pairs" in lines[1]
        assert "APP_MISSING_ATTRIBUTION" in lines[3]
