"""
License violation rules and the run report.

Reuse candidates taken from the Q&A site must carry CC BY-SA 3.0 or later
on the file and in the app's main license, and cite the post; posts that
took code from an app must state the app's license. Every candidate with a
resolved direction ends up either as a potential violation or as an
explicit pass record. ``RunReport`` aggregates everything a run produced
into one deterministic document.
"""

import csv
import json
import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import (
    Any, Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union
)

from .clone_engine import extract_comments
from .exceptions import DomainError, PipelineError
from .license_id import satisfies_sharealike
from .models import (
    UNKNOWN_LICENSE, CloneClass, ClonePair, CodeSnippet, Direction, FileRecord,
    LicenseFinding, LicenseScope, LifespanRecord, MigrationChain, PassRecord, PassStatus, Post,
    ProvenanceRecord, Resolution, Rule, ViolationReport
)
from .utils import median, print_table, read_json, write_json

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0"
LONG_SNIPPET_LINES = 50


class ReportFormat(Enum):
    JSON = "JSON"
    CSV_BUNDLE = "CSV_BUNDLE"


def find_attributions(text: str, domains: Sequence[str]) -> List[Tuple[int, str]]:
    """Comments of a source text mentioning one of the Q&A site domains"""
    if not domains:
        return []
    pattern = re.compile("|".join(re.escape(d.lower()) for d in domains))
    return [(line, comment.strip()) for line, comment in extract_comments(text)
            if pattern.search(comment.lower())]


def scan_attribution(text: str, domains: Sequence[str]) -> bool:
    """True when a comment of the text links to the Q&A site"""
    return bool(find_attributions(text, domains))


def check_app_side(file: FileRecord, project_findings: Sequence[LicenseFinding],
                   file_findings: Sequence[LicenseFinding], attribution_found: bool,
                   record: ProvenanceRecord) -> Optional[ViolationReport]:
    """
    Check an app file that reused a post snippet

    Args:
        file: The app file holding the clone
        project_findings: Main licenses of the app (root license files)
        file_findings: Licenses of the file header
        attribution_found: Whether a comment of the file links to the Q&A site
        record: Pair record classified REUSE_FROM_QA

    Returns:
        Optional[ViolationReport]: Every failed condition, or ``None``
    """
    if record.direction is not Direction.REUSE_FROM_QA:
        raise DomainError(f"{record.snippet_id}: app-side check needs REUSE_FROM_QA")

    rules = set()
    if not satisfies_sharealike(file_findings):
        rules.add(Rule.APP_MISSING_SHAREALIKE_FILE)
    if not satisfies_sharealike(project_findings):
        rules.add(Rule.APP_MISSING_SHAREALIKE_PROJECT)
    if not attribution_found:
        rules.add(Rule.APP_MISSING_ATTRIBUTION)
    if not rules:
        return None

    return ViolationReport(
        subject=record.snippet_id,
        rules_violated=frozenset(rules),
        direction=record.direction,
        evidence={
            "path": file.path,
            "file_licenses": [f.to_dict() for f in file_findings],
            "project_licenses": [f.to_dict() for f in project_findings],
            "attribution_found": attribution_found,
            "pair": [record.snippet_id, record.post_snippet_id],
            "provenance": record.to_dict(),
        },
    )


def check_post_side(post: Post, source_license: str,
                    post_findings: Sequence[LicenseFinding],
                    record: Optional[ProvenanceRecord] = None) -> Optional[ViolationReport]:
    """
    Check a post that reused app code

    A violation needs a known source license: with UNKNOWN nothing is
    asserted and the caller records the candidate as INDETERMINATE.

    Returns:
        Optional[ViolationReport]: POST_MISSING_SOURCE_LICENSE, or ``None``
    """
    if record is not None and record.direction is not Direction.REUSE_TO_QA:
        raise DomainError(f"{record.snippet_id}: post-side check needs REUSE_TO_QA")
    if source_license == UNKNOWN_LICENSE:
        return None
    declared = [f for f in post_findings
                if f.scope is LicenseScope.POST_BODY and f.license_id == source_license]
    if declared:
        return None

    subject = record.post_snippet_id if record is not None and record.post_snippet_id \
        else f"qa/{post.id}"
    evidence: Dict[str, Any] = {
        "post_id": post.id,
        "source_license": source_license,
        "post_licenses": [f.to_dict() for f in post_findings],
    }
    if record is not None:
        evidence["pair"] = [record.snippet_id, record.post_snippet_id]
        evidence["provenance"] = record.to_dict()
    return ViolationReport(
        subject=subject,
        rules_violated=frozenset({Rule.POST_MISSING_SOURCE_LICENSE}),
        direction=Direction.REUSE_TO_QA,
        evidence=evidence,
    )


def _round(value: Optional[float]) -> Optional[float]:
    return None if value is None else round(value, 2)


def _size_summary(snippets: Iterable[CodeSnippet]) -> Dict[str, Any]:
    sizes = [s.raw_line_count for s in snippets]
    return {
        "count": len(sizes),
        "median_lines": _round(median(sizes)),
        "over_50_lines": sum(1 for size in sizes if size > LONG_SNIPPET_LINES),
    }


def _distribution(values: Iterable[int]) -> Dict[str, int]:
    counts: Dict[int, int] = {}
    for value in values:
        counts[value] = counts.get(value, 0) + 1
    return {str(key): counts[key] for key in sorted(counts)}


@dataclass
class RunReport:
    """
    The JSON-ready result of a run.

    Every list is sorted canonically, so the same inputs always serialize
    to the same bytes.
    """
    config: Dict[str, Any]
    corpus: Dict[str, Any]
    clones: Dict[str, Any]
    provenance: Dict[str, Any]
    overlap: Dict[str, Any]
    sizes: Dict[str, Any]
    violations: List[Dict[str, Any]] = field(default_factory=list)
    violation_counts: Dict[str, Any] = field(default_factory=dict)
    passes: List[Dict[str, Any]] = field(default_factory=list)
    migrations: List[Dict[str, Any]] = field(default_factory=list)
    migration_summary: Dict[str, Any] = field(default_factory=dict)
    lifespans: List[Dict[str, Any]] = field(default_factory=list)
    lifespan_summary: Dict[str, Any] = field(default_factory=dict)
    pairs: List[Dict[str, Any]] = field(default_factory=list)
    classes: List[Dict[str, Any]] = field(default_factory=list)
    records: List[Dict[str, Any]] = field(default_factory=list)
    author_review: List[Dict[str, Any]] = field(default_factory=list)
    incomplete_units: List[str] = field(default_factory=list)
    schema_version: str = SCHEMA_VERSION

    @classmethod
    def build(cls, config: Mapping[str, Any], corpus: Mapping[str, Any],
              pairs: Iterable[ClonePair] = (), classes: Iterable[CloneClass] = (),
              snippets: Optional[Mapping[str, CodeSnippet]] = None,
              records: Iterable[ProvenanceRecord] = (),
              violations: Iterable[ViolationReport] = (),
              passes: Iterable[PassRecord] = (),
              migrations: Iterable[MigrationChain] = (),
              lifespans: Iterable[LifespanRecord] = (),
              author_review: Iterable[Mapping[str, Any]] = (),
              incomplete_units: Iterable[str] = ()) -> 'RunReport':
        """Aggregate the results of every stage"""
        snippets = snippets or {}
        pairs = sorted(pairs)
        classes = sorted(classes, key=lambda c: c.class_id)
        records = sorted(records, key=lambda r: (r.snippet_id, r.post_snippet_id or ""))
        violations = list(violations)
        passes = list(passes)
        migrations = list(migrations)
        lifespans = sorted(lifespans, key=lambda l: (l.class_id, l.app_id))

        return cls(
            config=dict(config),
            corpus=dict(corpus),
            clones=cls._clone_stats(pairs, classes, snippets),
            provenance=cls._provenance_stats(records),
            overlap=cls._overlap_stats(records),
            sizes=cls._size_stats(records, snippets),
            violations=sorted((v.to_dict() for v in violations),
                              key=lambda d: (d["subject"], json.dumps(d["evidence"].get("pair")))),
            violation_counts=cls._violation_counts(violations, passes),
            passes=sorted((p.to_dict() for p in passes), key=lambda d: (d["subject"], d["pair"])),
            migrations=[m.to_dict() for m in migrations],
            migration_summary=cls._migration_stats(migrations),
            lifespans=[l.to_dict() for l in lifespans],
            lifespan_summary=cls._lifespan_stats(lifespans),
            pairs=[p.to_dict() for p in pairs],
            classes=[c.to_dict() for c in classes],
            records=[r.to_dict() for r in records],
            author_review=sorted((dict(a) for a in author_review),
                                 key=lambda d: json.dumps(d, sort_keys=True)),
            incomplete_units=sorted(incomplete_units),
        )

    @staticmethod
    def _clone_stats(pairs: List[ClonePair], classes: List[CloneClass],
                     snippets: Mapping[str, CodeSnippet]) -> Dict[str, Any]:
        apps_per_post: Dict[int, set] = {}
        for pair in pairs:
            for member in pair.members:
                snippet = snippets.get(member)
                if snippet is not None and snippet.is_qa:
                    apps_per_post.setdefault(snippet.origin.post_id, set()).add(pair.other(member))
        multiplicity = [len(apps) for apps in apps_per_post.values()]
        return {
            "pair_count": len(pairs),
            "class_count": len(classes),
            "class_sizes": _distribution(c.size for c in classes),
            "posts_reused": len(apps_per_post),
            "app_snippets_per_post": _distribution(multiplicity),
            "median_app_snippets_per_post": _round(median(multiplicity)),
        }

    @staticmethod
    def _provenance_stats(records: List[ProvenanceRecord]) -> Dict[str, Any]:
        resolutions: Dict[str, Resolution] = {}
        for record in records:
            resolutions.setdefault(record.snippet_id, record.resolution)
        directions = {d.value: 0 for d in Direction}
        directions["UNDATED"] = 0
        for record in records:
            directions[record.direction.value if record.direction else "UNDATED"] += 1
        return {
            "app_snippets": len(resolutions),
            "resolutions": {r.value: sum(1 for v in resolutions.values() if v is r)
                            for r in Resolution},
            "directions": directions,
        }

    @staticmethod
    def _overlap_stats(records: List[ProvenanceRecord]) -> Dict[str, Any]:
        rates = [r.overlap_rate for r in records if r.overlap_rate is not None]
        return {
            "count": len(rates),
            "positive": sum(1 for rate in rates if rate > 0),
            "median_rate": _round(median(rates)),
        }

    @staticmethod
    def _size_stats(records: List[ProvenanceRecord],
                    snippets: Mapping[str, CodeSnippet]) -> Dict[str, Any]:
        sizes = {}
        for direction in (Direction.REUSE_FROM_QA, Direction.REUSE_TO_QA):
            chosen = [r for r in records if r.direction is direction]
            app_ids = {r.snippet_id for r in chosen}
            qa_ids = {r.post_snippet_id for r in chosen if r.post_snippet_id}
            qa = [snippets[i] for i in sorted(qa_ids) if i in snippets]
            app = [snippets[i] for i in sorted(app_ids) if i in snippets]
            long_qa = [s for s in qa if s.raw_line_count > LONG_SNIPPET_LINES]
            from_questions = sum(1 for s in long_qa if s.origin.post_type == 1)
            sizes[direction.value] = {
                "qa": _size_summary(qa),
                "app": _size_summary(app),
                "long_qa_from_questions_pct":
                    _round(100 * from_questions / len(long_qa)) if long_qa else None,
            }
        return sizes

    @staticmethod
    def _violation_counts(violations: List[ViolationReport],
                          passes: List[PassRecord]) -> Dict[str, Any]:
        app_side = sum(1 for v in violations if v.direction is Direction.REUSE_FROM_QA)
        post_side = sum(1 for v in violations if v.direction is Direction.REUSE_TO_QA)
        return {
            "by_rule": {rule.value: sum(1 for v in violations if rule in v.rules_violated)
                        for rule in Rule},
            "app_side": app_side,
            "post_side": post_side,
            "total": app_side + post_side,
            "passes": {status.value: sum(1 for p in passes if p.status is status)
                       for status in PassStatus},
        }

    @staticmethod
    def _migration_stats(migrations: List[MigrationChain]) -> Dict[str, Any]:
        durations = [m.duration_days for m in migrations]
        return {
            "count": len(migrations),
            "median_days": _round(median(durations)),
            "min_days": min(durations) if durations else None,
            "max_days": max(durations) if durations else None,
            "inconsistent": sum(1 for m in migrations if not m.consistent),
        }

    @staticmethod
    def _lifespan_stats(lifespans: List[LifespanRecord]) -> Dict[str, Any]:
        found = [l for l in lifespans if l.release_count > 0]
        return {
            "count": len(lifespans),
            "median_days": _round(median([l.days for l in found])),
            "median_releases": _round(median([l.release_count for l in found])),
            "single_release": sum(1 for l in found if l.release_count == 1),
            "at_most_20_releases": sum(1 for l in found if l.release_count <= 20),
            "over_50_releases": sum(1 for l in found if l.release_count > 50),
            "still_present": sum(1 for l in found if l.still_present),
            "needs_review": sum(1 for l in lifespans if l.needs_review),
        }

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> 'RunReport':
        return cls(**data)

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'RunReport':
        return cls.from_dict(read_json(path))

    def summary_rows(self) -> List[List[Any]]:
        counts = self.violation_counts
        return [
            ["QA snippets", self.corpus.get("qa_snippets", 0)],
            ["App snippets", self.corpus.get("app_snippets", 0)],
            ["Clone pairs", self.clones["pair_count"]],
            ["Clone classes", self.clones["class_count"]],
            ["Reuse from Q&A", self.provenance["directions"][Direction.REUSE_FROM_QA.value]],
            ["Reuse to Q&A", self.provenance["directions"][Direction.REUSE_TO_QA.value]],
            ["Potential violations", counts.get("total", 0)],
            ["Migrations", self.migration_summary.get("count", 0)],
            ["Incomplete units", len(self.incomplete_units)],
        ]


# Report sections written as separate tables in a CSV bundle
CSV_SECTIONS = (
    "pairs", "classes", "records", "violations", "passes",
    "migrations", "lifespans", "author_review",
)


def _flatten(row: Mapping[str, Any]) -> Dict[str, Any]:
    flat = {}
    for key, value in row.items():
        if isinstance(value, (dict, list)):
            flat[key] = json.dumps(value, sort_keys=True)
        elif value is None:
            flat[key] = ""
        else:
            flat[key] = value
    return flat


def _write_csv(path: Path, rows: List[Mapping[str, Any]]) -> None:
    columns = sorted({key for row in rows for key in row})
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(_flatten(row))


def emit_report(report: RunReport, out_dir: Union[str, Path],
                fmt: ReportFormat = ReportFormat.JSON) -> List[Path]:
    """
    Write a report as ``report.json`` or as a bundle of CSV tables

    The CSV bundle has one file per list section and ``summary.csv`` with
    the flattened statistics.

    Returns:
        List[Path]: Files written

    Raises:
        PipelineError: The output location cannot be written
    """
    out_dir = Path(out_dir)
    document = report.to_dict()
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        if fmt is ReportFormat.JSON:
            path = out_dir / "report.json"
            write_json(path, document)
            return [path]

        written = []
        for section in CSV_SECTIONS:
            path = out_dir / f"{section}.csv"
            _write_csv(path, document[section])
            written.append(path)
        summary = []
        for section, value in sorted(document.items()):
            if section in CSV_SECTIONS or not isinstance(value, dict):
                continue
            for key, item in sorted(value.items()):
                summary.append({"section": section, "key": key, "value": item})
        summary.append({"section": "report", "key": "schema_version",
                        "value": report.schema_version})
        path = out_dir / "summary.csv"
        _write_csv(path, summary)
        written.append(path)
        return written
    except OSError as exc:
        raise PipelineError(f"Cannot write report to {out_dir}: {exc}") from exc


def print_summary(report: RunReport, echo: Callable[[str], Any] = print) -> None:
    print_table("Run summary", report.summary_rows(), ["Metric", "Value"], echo=echo)
    by_rule = report.violation_counts.get("by_rule", {})
    if by_rule:
        rows = [[rule, count] for rule, count in sorted(by_rule.items())]
        print_table("Potential violations by rule", rows, ["Rule", "Count"], echo=echo)
