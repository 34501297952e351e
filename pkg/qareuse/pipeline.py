"""
Stage orchestration over a work directory.

Each stage reads the files of the previous ones and writes its own
sub-directory, so stages can be run one at a time from the command line or
chained by ``Pipeline.run`` from a pipeline manifest:

- ``qa/``: snippet corpus, sidecar index and posts of the Q&A dump
- ``app/``: release inventory, app snippets, history indexes, project
  licenses and inconsistency ranges
- ``detect/``: clone pairs and the sharded run state
- ``attribute/``: dated app snippets, per-pair records and the review queue
- ``analyze/``: the assembled run report
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Set, Tuple, Union

from .client import DumpClient, is_url
from .clone_engine import group_classes, plan_shards, read_snippets, run_sharded, write_snippets
from .config import Config, config as default_config
from .exceptions import IncompleteShardsError, InputError, ManifestError, PipelineError
from .license_id import identify, identify_header, primary_license, scan_project_root
from .models import (
    UNKNOWN_LICENSE, AddedLineIndex, AppRelease, ClonePair, CodeSnippet, Direction,
    InconsistencyRange, LicenseFinding, PassRecord, PassStatus, ProvenanceRecord, LicenseScope
)
from .provenance import (
    apply_review, attribute_pair, date_snippet, detect_migrations, load_review_queue,
    overlap_for_snippet, track_lifespan, write_review_queue
)
from .qa_ingest import ParseStats, ingest_posts, read_corpus, read_posts, write_corpus
from .report import (
    ReportFormat, RunReport, check_app_side, check_post_side, emit_report, scan_attribution
)
from .repo_ingest import (
    ReleaseSpec, ScanStats, extract_app_snippets, load_inconsistencies, load_or_build_index,
    load_release_manifest, order_releases, scan_release
)
from .utils import parse_datetime, progress, read_json, read_jsonl, write_json, write_jsonl

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PipelineManifest:
    """Inputs of a one-command run"""
    dump: str
    releases: Path
    inconsistencies: Optional[Path] = None
    review: Optional[Path] = None
    out: Optional[Path] = None
    report_format: ReportFormat = ReportFormat.JSON
    overrides: Tuple[Tuple[str, Any], ...] = ()

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'PipelineManifest':
        """
        Read a JSON pipeline manifest

        Keys: ``dump`` (path or URL), ``releases``, optional
        ``inconsistencies``, ``review``, ``out``, ``format`` and a ``config``
        object of setting overrides. Relative paths are resolved against the
        manifest's directory.
        """
        path = Path(path)
        try:
            data = read_json(path)
        except (OSError, ValueError) as exc:
            raise ManifestError(f"Cannot read pipeline manifest {path}: {exc}") from exc
        if not isinstance(data, dict) or "dump" not in data or "releases" not in data:
            raise ManifestError(f"{path}: a pipeline manifest needs 'dump' and 'releases'")

        base = path.parent

        def local(key: str) -> Optional[Path]:
            value = data.get(key)
            return (base / value).resolve() if value else None

        dump = data["dump"] if is_url(data["dump"]) else str((base / data["dump"]).resolve())
        try:
            report_format = ReportFormat(str(data.get("format", "JSON")).upper())
        except ValueError as exc:
            raise ManifestError(f"{path}: unknown report format {data.get('format')}") from exc
        return cls(
            dump=dump,
            releases=local("releases"),
            inconsistencies=local("inconsistencies"),
            review=local("review"),
            out=local("out"),
            report_format=report_format,
            overrides=tuple(sorted((data.get("config") or {}).items())),
        )


class Pipeline:
    """
    Runs the analysis stages over a work directory.

    :ivar workdir: Root of the stage directories
    :ivar settings: Effective configuration
    """

    def __init__(self, workdir: Union[str, Path], settings: Optional[Config] = None):
        self.workdir = Path(workdir)
        self.settings = settings or default_config
        self.settings.validate()

    @property
    def qa_dir(self) -> Path:
        return self.workdir / "qa"

    @property
    def app_dir(self) -> Path:
        return self.workdir / "app"

    @property
    def detect_dir(self) -> Path:
        return self.workdir / "detect"

    @property
    def attribute_dir(self) -> Path:
        return self.workdir / "attribute"

    @property
    def analyze_dir(self) -> Path:
        return self.workdir / "analyze"

    def _require(self, path: Path, stage: str) -> Path:
        if not path.exists():
            raise PipelineError(f"{path} is missing: run the {stage} stage first")
        return path

    # Q&A side

    def ingest_qa(self, dump: Union[str, Path]) -> ParseStats:
        """Parse a dump (path or URL) into the Q&A snippet corpus"""
        settings = self.settings
        self.qa_dir.mkdir(parents=True, exist_ok=True)
        if is_url(dump):
            download_dir = self.qa_dir / "download"
            download_dir.mkdir(exist_ok=True)
            dump = DumpClient(settings).download(str(dump), download_dir)

        stats = ParseStats()
        try:
            stream = open(dump, "rb")
        except OSError as exc:
            raise InputError(f"Cannot read dump {dump}: {exc.strerror or exc}") from exc
        with stream:
            items = ingest_posts(
                stream, settings.required_tags, settings.date_ceiling, settings.min_lines,
                settings.normalization_level, settings.inherit_question_tags,
                settings.queue_size, stats,
            )
            items = progress(items, "posts", enabled=settings.show_progress, unit="post")
            write_corpus(self.qa_dir, items)

        write_json(self.qa_dir / "stats.json", stats.to_dict())
        logger.info("Q&A ingestion: %d rows, %d posts kept, %d snippets",
                    stats.rows, stats.kept, stats.snippets)
        return stats

    # App side

    def ingest_app(self, manifest: Union[str, Path],
                   inconsistencies: Optional[Union[str, Path]] = None) -> Dict[str, int]:
        """
        Inventory the latest release of every app and index its history

        The detection corpus holds the fragments of each app's latest
        release, optionally limited to the files named in the inconsistency
        table.
        """
        settings = self.settings
        clone_config = settings.clone_config()
        grouped = order_releases(load_release_manifest(manifest))
        self.app_dir.mkdir(parents=True, exist_ok=True)

        scan_stats = ScanStats()
        latest: Dict[str, AppRelease] = {}
        for app_id, specs in grouped.items():
            newest = specs[-1]
            latest[app_id] = scan_release(newest.tree, newest.release_id, newest.release_date,
                                          settings.source_extensions, app_id=app_id,
                                          header_lines=settings.header_lines, stats=scan_stats)

        ranges: List[InconsistencyRange] = []
        if inconsistencies is not None:
            known = {(r.app_id, f.path): f.line_count for r in latest.values() for f in r.files}
            ranges = load_inconsistencies(inconsistencies, known_files=known)

        snippets: List[CodeSnippet] = []
        for app_id, release in latest.items():
            paths = None
            if settings.inconsistent_files_only:
                paths = {r.path for r in ranges if r.app_id == app_id}
            snippets.extend(extract_app_snippets(release, clone_config, paths))

        floor = settings.license_confidence_floor
        projects = {
            app_id: [f.to_dict() for f in scan_project_root(specs[-1].tree, floor=floor)]
            for app_id, specs in grouped.items()
        }
        indexed = self._index_histories(grouped)

        write_snippets(self.app_dir / "snippets.jsonl", snippets)
        write_jsonl(self.app_dir / "inconsistencies.jsonl", (r.to_dict() for r in ranges))
        write_json(self.app_dir / "projects.json", projects)
        write_json(self.app_dir / "releases.json", {
            app_id: [{
                "app_id": s.app_id,
                "release_id": s.release_id,
                "release_date": s.release_date.isoformat(),
                "tree": str(s.tree),
                "repo": str(s.repo) if s.repo else None,
            } for s in specs]
            for app_id, specs in grouped.items()
        })

        summary = {
            "apps": len(grouped),
            "releases": sum(len(specs) for specs in grouped.values()),
            "files": scan_stats.files,
            "app_snippets": len(snippets),
            "inconsistency_ranges": len(ranges),
            "histories": indexed,
        }
        write_json(self.app_dir / "stats.json", summary)
        logger.info("App ingestion: %d apps, %d snippets", summary["apps"], len(snippets))
        return summary

    def _index_histories(self, grouped: Mapping[str, List[ReleaseSpec]]) -> int:
        history_dir = self.app_dir / "history"
        history_dir.mkdir(exist_ok=True)
        jobs = {}
        for app_id, specs in grouped.items():
            repos = [s.repo for s in specs if s.repo is not None]
            if repos:
                jobs[app_id] = repos[-1]
            else:
                logger.warning("No repository for %s, its snippets stay undated", app_id)

        def build(app_id: str) -> Tuple[str, AddedLineIndex]:
            return app_id, load_or_build_index(jobs[app_id], self.workdir / "cache",
                                               extensions=self.settings.source_extensions)

        with ThreadPoolExecutor(max_workers=self.settings.workers) as pool:
            for app_id, index in pool.map(build, sorted(jobs)):
                write_json(history_dir / f"{app_id}.json", index.to_dict())
        return len(jobs)

    def _release_specs(self) -> Dict[str, List[ReleaseSpec]]:
        document = read_json(self._require(self.app_dir / "releases.json", "ingest-app"))
        return {
            app_id: [ReleaseSpec(
                app_id=r["app_id"],
                release_id=r["release_id"],
                release_date=parse_datetime(r["release_date"]),
                tree=Path(r["tree"]),
                repo=Path(r["repo"]) if r.get("repo") else None,
            ) for r in rows]
            for app_id, rows in document.items()
        }

    def _history(self, app_id: str) -> Optional[AddedLineIndex]:
        path = self.app_dir / "history" / f"{app_id}.json"
        return AddedLineIndex.from_dict(read_json(path)) if path.exists() else None

    def _snippets(self) -> Dict[str, CodeSnippet]:
        qa = read_corpus(self._require(self.qa_dir, "ingest-qa"))
        app = read_snippets(self._require(self.app_dir / "snippets.jsonl", "ingest-app"))
        return {s.snippet_id: s for s in qa + app}

    # Detection

    def detect(self, workers: Optional[int] = None) -> Set[ClonePair]:
        """
        Detect clone pairs between the Q&A and app corpora

        Raises:
            IncompleteShardsError: Some work units kept failing; the partial
                pairs are written anyway
        """
        settings = self.settings
        qa = read_corpus(self._require(self.qa_dir, "ingest-qa"))
        app = read_snippets(self._require(self.app_dir / "snippets.jsonl", "ingest-app"))
        plan = plan_shards(qa, app, settings.clone_config())
        logger.info("Detecting clones: %d x %d snippets in %d work units",
                    len(qa), len(app), len(plan.units))
        self.detect_dir.mkdir(parents=True, exist_ok=True)

        incomplete: List[str] = []
        try:
            pairs = run_sharded(plan, workers=workers or settings.workers,
                                out_dir=self.detect_dir / "run", max_retries=settings.max_retries,
                                show_progress=settings.show_progress)
        except IncompleteShardsError as exc:
            pairs = exc.partial
            incomplete = exc.unit_ids
            self._write_pairs(pairs, incomplete)
            raise
        self._write_pairs(pairs, incomplete)
        return pairs

    def _write_pairs(self, pairs: Set[ClonePair], incomplete: List[str]) -> None:
        write_jsonl(self.detect_dir / "pairs.jsonl", (p.to_dict() for p in sorted(pairs)))
        write_json(self.detect_dir / "incomplete.json", sorted(incomplete))

    def _pairs(self) -> List[ClonePair]:
        path = self._require(self.detect_dir / "pairs.jsonl", "detect")
        return [ClonePair.from_dict(record) for record in read_jsonl(path)]

    # Attribution

    def attribute(self, review: Optional[Union[str, Path]] = None) -> List[ProvenanceRecord]:
        """
        Date every paired app snippet and classify each pair

        Args:
            review: Annotated review queue whose dates replace UNRESOLVED records

        Returns:
            List[ProvenanceRecord]: One record per clone pair
        """
        settings = self.settings
        snippets = self._snippets()
        pairs = self._pairs()
        ranges = [InconsistencyRange.from_dict(r)
                  for r in read_jsonl(self.app_dir / "inconsistencies.jsonl")]

        app_ids = sorted({m for p in pairs for m in p.members if snippets[m].is_app})
        histories: Dict[str, Optional[AddedLineIndex]] = {}
        dated: Dict[str, ProvenanceRecord] = {}
        for snippet_id in progress(app_ids, "dating", enabled=settings.show_progress):
            snippet = snippets[snippet_id]
            app_id = snippet.origin.app_id
            if app_id not in histories:
                histories[app_id] = self._history(app_id)
            index = histories[app_id]
            if index is None:
                dated[snippet_id] = ProvenanceRecord(snippet_id,
                                                     diagnostic=f"no history for {app_id}")
            else:
                dated[snippet_id] = date_snippet(snippet, index, settings.match_fraction)
        if review is not None:
            dated = apply_review(dated, load_review_queue(review))

        records = []
        for pair in pairs:
            app_id, qa_id = (pair.left, pair.right) if snippets[pair.left].is_app \
                else (pair.right, pair.left)
            overlap = overlap_for_snippet(snippets[app_id], ranges)
            records.append(attribute_pair(dated[app_id], snippets[qa_id], overlap,
                                          settings.ambiguity_window_days))

        self.attribute_dir.mkdir(parents=True, exist_ok=True)
        write_jsonl(self.attribute_dir / "dated.jsonl",
                    (dated[s].to_dict() for s in sorted(dated)))
        write_jsonl(self.attribute_dir / "records.jsonl", (r.to_dict() for r in records))
        queued = write_review_queue(self.attribute_dir / "review_queue.jsonl", dated.values())
        logger.info("Attribution: %d app snippets dated, %d queued for review",
                    len(dated) - queued, queued)
        return records

    # Analysis

    def analyze(self) -> RunReport:
        """Apply the license rules, find migrations and lifespans, build the report"""
        settings = self.settings
        clone_config = settings.clone_config()
        snippets = self._snippets()
        pairs = self._pairs()
        posts = read_posts(self.qa_dir)
        dated = {r["snippet_id"]: ProvenanceRecord.from_dict(r) for r in
                 read_jsonl(self._require(self.attribute_dir / "dated.jsonl", "attribute"))}
        records = [ProvenanceRecord.from_dict(r)
                   for r in read_jsonl(self.attribute_dir / "records.jsonl")]
        projects = {app_id: [LicenseFinding.from_dict(f) for f in findings]
                    for app_id, findings in read_json(self.app_dir / "projects.json").items()}
        specs = self._release_specs()

        releases: Dict[str, List[AppRelease]] = {}

        def app_releases(app_id: str) -> List[AppRelease]:
            if app_id not in releases:
                releases[app_id] = [
                    scan_release(s.tree, s.release_id, s.release_date,
                                 settings.source_extensions, app_id=app_id,
                                 header_lines=settings.header_lines)
                    for s in specs.get(app_id, [])
                ]
            return releases[app_id]

        def latest_file(snippet: CodeSnippet):
            for release in app_releases(snippet.origin.app_id):
                if release.release_id == snippet.origin.release_id:
                    return release.file(snippet.origin.path)
            return None

        licenses: Dict[str, str] = {}
        for snippet_id, snippet in snippets.items():
            if not snippet.is_app or snippet_id not in dated:
                continue
            license_id = primary_license(projects.get(snippet.origin.app_id, []))
            if license_id == UNKNOWN_LICENSE:
                record = latest_file(snippet)
                if record is not None:
                    license_id = primary_license(identify_header(
                        record, floor=settings.license_confidence_floor))
            licenses[snippet_id] = license_id

        violations, passes, author_review = [], [], []
        histories: Dict[str, Optional[AddedLineIndex]] = {}
        for record in records:
            if record.direction is Direction.REUSE_FROM_QA:
                file = latest_file(snippets[record.snippet_id])
                if file is None:
                    logger.warning("File of %s not found, rule check indeterminate",
                                   record.snippet_id)
                    passes.append(PassRecord(record.snippet_id, record.direction,
                                             PassStatus.INDETERMINATE,
                                             (record.snippet_id, record.post_snippet_id)))
                    continue
                report = check_app_side(
                    file,
                    projects.get(file.app_id, []),
                    identify_header(file, floor=settings.license_confidence_floor),
                    scan_attribution(file.text, settings.qa_domains),
                    record,
                )
                if report is not None:
                    violations.append(report)
                else:
                    passes.append(PassRecord(record.snippet_id, record.direction,
                                             PassStatus.PASS,
                                             (record.snippet_id, record.post_snippet_id)))
            elif record.direction is Direction.REUSE_TO_QA:
                qa = snippets[record.post_snippet_id]
                post = posts[qa.origin.post_id]
                source_license = licenses.get(record.snippet_id, UNKNOWN_LICENSE)
                findings = identify(post.body_html, LicenseScope.POST_BODY,
                                    floor=settings.license_confidence_floor)
                report = check_post_side(post, source_license, findings, record)
                if report is not None:
                    violations.append(report)
                else:
                    status = PassStatus.INDETERMINATE if source_license == UNKNOWN_LICENSE \
                        else PassStatus.PASS
                    passes.append(PassRecord(record.post_snippet_id, record.direction, status,
                                             (record.snippet_id, record.post_snippet_id)))
                app_id = snippets[record.snippet_id].origin.app_id
                if app_id not in histories:
                    histories[app_id] = self._history(app_id)
                history = histories[app_id]
                author_review.append({
                    "post_snippet_id": record.post_snippet_id,
                    "owner_display_name": qa.origin.owner_display_name,
                    "app_id": app_id,
                    "contributors": sorted(history.contributors) if history else [],
                })

        dates = {s: (snippets[s].created_at if snippets[s].is_qa else
                     (dated[s].created_at if s in dated else None))
                 for p in pairs for s in p.members}
        classes = group_classes(pairs, dates)
        migrations = detect_migrations(classes, dated, licenses, snippets)

        lifespans = []
        fragment_cache: Dict[Tuple[str, str], List[CodeSnippet]] = {}
        for clone_class in progress(classes, "lifespans", enabled=settings.show_progress):
            apps = sorted({snippets[m].origin.app_id for m in clone_class.members
                           if snippets[m].is_app})
            for app_id in apps:
                app_history = app_releases(app_id)
                if app_history:
                    lifespans.append(track_lifespan(clone_class, app_history, clone_config,
                                                    snippets, fragment_cache))

        corpus = dict(read_json(self.qa_dir / "stats.json"))
        corpus.update(read_json(self.app_dir / "stats.json"))
        corpus["qa_snippets"] = sum(1 for s in snippets.values() if s.is_qa)
        incomplete = read_json(self.detect_dir / "incomplete.json")

        report = RunReport.build(
            config=settings.snapshot(),
            corpus=corpus,
            pairs=pairs,
            classes=classes,
            snippets=snippets,
            records=records,
            violations=violations,
            passes=passes,
            migrations=migrations,
            lifespans=lifespans,
            author_review=author_review,
            incomplete_units=incomplete,
        )
        self.analyze_dir.mkdir(parents=True, exist_ok=True)
        write_json(self.analyze_dir / "report.json", report.to_dict())
        return report

    def report(self, out: Union[str, Path],
               fmt: ReportFormat = ReportFormat.JSON) -> List[Path]:
        """Write the analyzed report in the requested format"""
        report = RunReport.load(self._require(self.analyze_dir / "report.json", "analyze"))
        return emit_report(report, out, fmt)

    def run(self, manifest: PipelineManifest, workers: Optional[int] = None) -> RunReport:
        """
        Run every stage for a pipeline manifest

        Incomplete detection does not stop the run: the remaining stages use
        the partial pairs and ``IncompleteShardsError`` is raised at the end.
        """
        self.ingest_qa(manifest.dump)
        self.ingest_app(manifest.releases, manifest.inconsistencies)
        incomplete: Optional[IncompleteShardsError] = None
        try:
            self.detect(workers)
        except IncompleteShardsError as exc:
            logger.error("%s", exc)
            incomplete = exc
        self.attribute(manifest.review)
        report = self.analyze()
        self.report(manifest.out or self.workdir / "report", manifest.report_format)
        if incomplete is not None:
            raise incomplete
        return report
