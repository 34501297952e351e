"""
Provenance of reused code.

Dates app-side clone snippets from the history index, decides the reuse
direction of each clone pair from the two creation dates, measures how much
of a file's license-inconsistency lines a clone covers, finds code that
migrated from one app through a post into another app, and follows a clone
class through the releases of an app.
"""

import logging
import math
from dataclasses import replace
from datetime import datetime, timedelta
from fractions import Fraction
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from .clone_engine import detect_cross, normalize
from .exceptions import DomainError
from .license_id import same_license
from .models import (
    UNKNOWN_LICENSE, AddedLineIndex, AppRelease, CloneClass, CloneConfig,
    CodeSnippet, CommitCandidate, Direction, InconsistencyRange, LifespanRecord,
    MigrationChain, ProvenanceRecord, Resolution
)
from .repo_ingest import HISTORY_LEVEL, extract_app_snippets
from .utils import parse_datetime, read_jsonl, whole_days, write_jsonl

logger = logging.getLogger(__name__)

LineRange = Tuple[int, int]


def date_snippet(snippet: CodeSnippet, index: AddedLineIndex,
                 match_fraction: float = 0.9) -> ProvenanceRecord:
    """
    Find the commit that introduced an app snippet

    Commits touching the snippet's path are scanned in date order while the
    set of the snippet's distinct TYPE1 lines seen among added lines grows.
    The first commit that contributes at least one of them and brings the
    covered share to ``match_fraction`` or more dates the snippet.

    Args:
        snippet: Snippet of an application file
        index: History index of the application
        match_fraction: Share of distinct lines required

    Returns:
        ProvenanceRecord: AUTO with the matched commit, or UNRESOLVED with
        the candidates examined and a diagnostic
    """
    if not snippet.is_app:
        raise DomainError(f"{snippet.snippet_id} is not an application snippet")
    if not 0 < match_fraction <= 1:
        raise DomainError("Match fraction must be in (0, 1]")

    commits = index.commits_for(snippet.origin.path)
    if commits is None:
        return ProvenanceRecord(snippet.snippet_id,
                                diagnostic=f"path {snippet.origin.path} not in history index")

    target = set(normalize(snippet.raw_text, HISTORY_LEVEL))
    if not target:
        return ProvenanceRecord(snippet.snippet_id, diagnostic="snippet has no code lines")
    needed = math.ceil(Fraction(repr(match_fraction)) * len(target))

    covered: set = set()
    candidates: List[CommitCandidate] = []
    for position, commit in enumerate(commits):
        hit = target.intersection(commit.added_lines)
        if not hit:
            continue
        covered |= hit
        candidates.append(CommitCandidate(commit.commit_id, commit.commit_date,
                                          len(covered) / len(target)))
        if len(covered) >= needed:
            renamed_later = any(c.renamed_from for c in commits[position + 1:])
            return ProvenanceRecord(
                snippet_id=snippet.snippet_id,
                matched_commit=commit.commit_id,
                created_at=commit.commit_date,
                resolution=Resolution.AUTO,
                candidates=tuple(candidates),
                rename_followed=renamed_later,
            )

    share = len(covered) / len(target)
    return ProvenanceRecord(
        snippet_id=snippet.snippet_id,
        candidates=tuple(candidates),
        rename_followed=any(c.renamed_from for c in commits),
        diagnostic=f"best cumulative match {share:.2f} below {match_fraction:.2f}",
    )


def classify_direction(app_created_at: datetime, post_created_at: datetime,
                       ambiguity_window_days: int = 2) -> Direction:
    """
    Reuse direction of an app snippet and a post snippet

    The earlier side is the source when it precedes the other by more than
    the window; closer dates are AMBIGUOUS.
    """
    if ambiguity_window_days < 0:
        raise DomainError("Ambiguity window cannot be negative")
    window = timedelta(days=ambiguity_window_days)
    gap = app_created_at - post_created_at
    if gap > window:
        return Direction.REUSE_FROM_QA
    if -gap > window:
        return Direction.REUSE_TO_QA
    return Direction.AMBIGUOUS


def _check_range(line_range: LineRange) -> None:
    start, end = line_range
    if start < 1 or start > end:
        raise DomainError(f"Invalid line range {start}-{end}")


def merge_ranges(ranges: Iterable[LineRange]) -> List[LineRange]:
    """Union of inclusive line ranges as sorted disjoint ranges"""
    merged: List[List[int]] = []
    for start, end in sorted(ranges):
        if merged and start <= merged[-1][1] + 1:
            merged[-1][1] = max(merged[-1][1], end)
        else:
            merged.append([start, end])
    return [(start, end) for start, end in merged]


def compute_overlap(clone_range: LineRange,
                    inconsistency_ranges: Sequence[LineRange]) -> Optional[float]:
    """
    Percentage of the inconsistency lines covered by a clone

    Args:
        clone_range: 1-based inclusive lines of the clone
        inconsistency_ranges: 1-based inclusive ranges, unioned

    Returns:
        Optional[float]: Rate in [0, 100], ``None`` without inconsistency lines

    Raises:
        DomainError: A range is empty or starts before line 1
    """
    _check_range(clone_range)
    for line_range in inconsistency_ranges:
        _check_range(line_range)
    union = merge_ranges(inconsistency_ranges)
    if not union:
        return None

    clone_start, clone_end = clone_range
    total = sum(end - start + 1 for start, end in union)
    common = sum(max(0, min(end, clone_end) - max(start, clone_start) + 1)
                 for start, end in union)
    return 100 * common / total


def overlap_for_snippet(snippet: CodeSnippet,
                        inconsistencies: Iterable[InconsistencyRange]) -> Optional[float]:
    """Overlapped rate of an app snippet against the ranges of its own file"""
    origin = snippet.origin
    ranges = [r.line_range for r in inconsistencies
              if r.app_id == origin.app_id and r.path == origin.path]
    return compute_overlap(origin.line_range, ranges)


def attribute_pair(app_record: ProvenanceRecord, post_snippet: CodeSnippet,
                   overlap_rate: Optional[float],
                   ambiguity_window_days: int = 2) -> ProvenanceRecord:
    """Specialize a dated app snippet record to one clone pair"""
    direction = None
    if app_record.created_at is not None and post_snippet.created_at is not None:
        direction = classify_direction(app_record.created_at, post_snippet.created_at,
                                       ambiguity_window_days)
    return replace(app_record, post_snippet_id=post_snippet.snippet_id,
                   direction=direction, overlap_rate=overlap_rate)


def _snippet_date(snippet_id: str, snippets: Mapping[str, CodeSnippet],
                  records: Mapping[str, ProvenanceRecord]) -> Optional[datetime]:
    snippet = snippets.get(snippet_id)
    if snippet is not None and snippet.is_qa:
        return snippet.created_at
    record = records.get(snippet_id)
    return record.created_at if record is not None else None


def detect_migrations(classes: Iterable[CloneClass], records: Mapping[str, ProvenanceRecord],
                      licenses: Mapping[str, str],
                      snippets: Mapping[str, CodeSnippet]) -> List[MigrationChain]:
    """
    Find code that went from one app to a post and on to another app

    For every ordered pair of different apps in a class, the chain starts at
    the earliest source-app snippet from which a full chain exists, goes
    through the earliest later post that a destination snippet follows, and
    ends at the earliest destination-app snippet after that post. All three
    dates are strictly increasing.

    Args:
        classes: Clone classes
        records: Dated app snippets (post snippets carry their own date)
        licenses: Main license per app snippet id
        snippets: Every snippet of the classes

    Returns:
        List[MigrationChain]: Chains ordered by source app, destination app, source id
    """
    chains = []
    for clone_class in classes:
        posts: List[Tuple[datetime, str]] = []
        per_app: Dict[str, List[Tuple[datetime, str]]] = {}
        for member in clone_class.members:
            snippet = snippets.get(member)
            when = _snippet_date(member, snippets, records)
            if snippet is None or when is None:
                continue
            if snippet.is_qa:
                posts.append((when, member))
            else:
                per_app.setdefault(snippet.origin.app_id, []).append((when, member))
        if not posts or len(per_app) < 2:
            continue
        posts.sort()
        for dated in per_app.values():
            dated.sort()

        for source_app in sorted(per_app):
            for destination_app in sorted(per_app):
                if source_app == destination_app:
                    continue
                chain = _first_chain(per_app[source_app], posts, per_app[destination_app])
                if chain is None:
                    continue
                source, post, destination = chain
                source_license = licenses.get(source[1], UNKNOWN_LICENSE)
                destination_license = licenses.get(destination[1], UNKNOWN_LICENSE)
                chains.append(MigrationChain(
                    source=(source[1], source[0]),
                    via_post=(post[1], post[0]),
                    destination=(destination[1], destination[0]),
                    source_app=source_app,
                    destination_app=destination_app,
                    duration_days=whole_days(source[0], destination[0]),
                    source_license=source_license,
                    destination_license=destination_license,
                    consistent=same_license(source_license, destination_license),
                ))

    return sorted(chains, key=lambda c: (c.source_app, c.destination_app, c.source[0]))


def _first_chain(sources, posts, destinations):
    for source in sources:
        for post in posts:
            if post[0] <= source[0]:
                continue
            for destination in destinations:
                if destination[0] > post[0]:
                    return source, post, destination
            # later posts only leave fewer destinations
            break
    return None


def track_lifespan(clone_class: CloneClass, releases: Sequence[AppRelease],
                   config: CloneConfig, snippets: Mapping[str, CodeSnippet],
                   fragment_cache: Optional[Dict[Tuple[str, str], List[CodeSnippet]]] = None
                   ) -> LifespanRecord:
    """
    Follow a clone class through the releases of one app

    The class representative is searched in every file of every release, so a
    snippet moved to another file stays detected.

    Args:
        clone_class: Class whose representative is tracked
        releases: Releases of a single app, in release order
        config: Clone settings used for the search
        snippets: Snippets by id, holding the representative
        fragment_cache: Fragments per (app_id, release_id), filled on demand

    Returns:
        LifespanRecord: First and last release with a hit; ``needs_review``
        with a zero count when no release contains the snippet
    """
    if not releases:
        raise DomainError("At least one release is needed to track a lifespan")
    app_ids = {release.app_id for release in releases}
    if len(app_ids) != 1:
        raise DomainError(f"Releases of several apps given: {sorted(app_ids)}")
    app_id = releases[0].app_id
    representative = snippets[clone_class.representative]

    ordered = sorted(releases, key=lambda r: r.sort_key)
    hits = []
    for release in ordered:
        key = (release.app_id, release.release_id)
        if fragment_cache is not None and key in fragment_cache:
            fragments = fragment_cache[key]
        else:
            fragments = extract_app_snippets(release, config)
            if fragment_cache is not None:
                fragment_cache[key] = fragments
        if detect_cross([representative], fragments, config):
            hits.append(release)

    if not hits:
        logger.info("Class %s not found in any release of %s", clone_class.class_id, app_id)
        return LifespanRecord(clone_class.class_id, app_id, None, None, 0, 0, False,
                              needs_review=True)

    first, last = hits[0], hits[-1]
    return LifespanRecord(
        class_id=clone_class.class_id,
        app_id=app_id,
        first_release=first.release_id,
        last_release=last.release_id,
        release_count=len(hits),
        days=whole_days(first.release_date, last.release_date),
        still_present=last.release_id == ordered[-1].release_id,
    )


def write_review_queue(path: Union[str, Path], records: Iterable[ProvenanceRecord]) -> int:
    """
    Write UNRESOLVED records for manual review, one per snippet

    Each line carries the record plus an empty ``annotation`` object whose
    ``created_at`` and ``note`` a reviewer fills in.
    """
    pending: Dict[str, ProvenanceRecord] = {}
    for record in records:
        if record.resolution is Resolution.UNRESOLVED:
            pending.setdefault(record.snippet_id, record)

    def lines():
        for snippet_id in sorted(pending):
            document = pending[snippet_id].to_dict()
            for key in ("direction", "overlap_rate", "post_snippet_id"):
                document.pop(key, None)
            document["annotation"] = {"created_at": None, "note": ""}
            yield document

    return write_jsonl(path, lines())


def load_review_queue(path: Union[str, Path]) -> Dict[str, ProvenanceRecord]:
    """
    Read an annotated review queue

    Returns:
        Dict[str, ProvenanceRecord]: MANUAL records for the annotated
        snippets; lines without an annotation date are ignored
    """
    manual = {}
    for document in read_jsonl(path):
        annotation = document.get("annotation") or {}
        created_at = parse_datetime(annotation.get("created_at"))
        if created_at is None:
            continue
        manual[document["snippet_id"]] = ProvenanceRecord(
            snippet_id=document["snippet_id"],
            created_at=created_at,
            resolution=Resolution.MANUAL,
            diagnostic=annotation.get("note") or None,
        )
    return manual


def apply_review(records: Mapping[str, ProvenanceRecord],
                 manual: Mapping[str, ProvenanceRecord]) -> Dict[str, ProvenanceRecord]:
    """Replace UNRESOLVED records by their manual annotation"""
    merged = dict(records)
    for snippet_id, record in manual.items():
        current = merged.get(snippet_id)
        if current is None or current.resolution is Resolution.UNRESOLVED:
            merged[snippet_id] = record
    return merged
