"""
Application source trees and their version-control history.

This module reads release trees into ``AppRelease`` inventories, cuts their
files into clone fragments, mines the first-parent history of a git
repository into an ``AddedLineIndex`` (which lines each commit added to
each path), and loads the external tables the analysis needs: the release
manifest and the license-inconsistency ranges.
"""

import csv
import hashlib
import json
import logging
import os
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import (
    Dict, Iterable, Iterator, List, Mapping, Optional, Set, Tuple, Union
)

from git import Repo
from git.objects import Tree
from git.exc import GitCommandError, InvalidGitRepositoryError, NoSuchPathError

from .clone_engine import extract_fragments, normalize
from .exceptions import (
    DomainError, InconsistencyRowError, ManifestError, RepositoryError
)
from .models import (
    AddedLineIndex, AppFileOrigin, AppRelease, CloneConfig, CodeSnippet,
    CommitAdditions, FileRecord, InconsistencyRange, NormalizationLevel,
    app_snippet_id
)
from .utils import from_timestamp, parse_datetime, read_json, write_json

logger = logging.getLogger(__name__)

# Object id of the empty tree, the diff base of a root commit
EMPTY_TREE_SHA = "4b825dc642cb6eb9a060e54bf8d69288fbee4904"

HISTORY_LEVEL = NormalizationLevel.TYPE1

INCONSISTENCY_COLUMNS = ("app_id", "path", "line_start", "line_end")
MANIFEST_COLUMNS = ("app_id", "release_id", "release_date", "tree")


@dataclass
class ScanStats:
    files: int = 0
    skipped: int = 0
    lossy: int = 0


@dataclass(frozen=True)
class ReleaseSpec:
    """One row of the release manifest"""
    app_id: str
    release_id: str
    release_date: datetime
    tree: Path
    repo: Optional[Path] = None

    @property
    def sort_key(self) -> Tuple[datetime, str]:
        return self.release_date, self.release_id


def _iter_source_files(root: Path, extensions: Set[str]) -> Iterator[Path]:
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames[:] = sorted(d for d in dirnames if d != ".git")
        for name in sorted(filenames):
            if os.path.splitext(name)[1].lower() in extensions:
                yield Path(dirpath) / name


def scan_release(app_root: Union[str, Path], release_id: str, release_date: datetime,
                 extensions: Iterable[str] = (".java",), app_id: Optional[str] = None,
                 header_lines: int = 60, stats: Optional[ScanStats] = None) -> AppRelease:
    """
    Read the source files of one release tree

    Args:
        app_root: Root directory of the release
        release_id: Tag or label of the release
        release_date: Release instant
        extensions: File extensions to include (with the dot)
        app_id: Application id, the directory name by default
        header_lines: Size of each file's license header region
        stats: Counters to update

    Returns:
        AppRelease: The release with its files ordered by path

    Raises:
        RepositoryError: The directory does not exist or cannot be listed
    """
    root = Path(app_root)
    if not root.is_dir() or not os.access(root, os.R_OK | os.X_OK):
        raise RepositoryError(f"Cannot read application tree: {root}", path=str(root))
    stats = stats if stats is not None else ScanStats()
    wanted = {ext.lower() for ext in extensions}
    app_id = app_id or root.name

    files = []
    for path in _iter_source_files(root, wanted):
        relative = path.relative_to(root).as_posix()
        try:
            data = path.read_bytes()
        except OSError as exc:
            stats.skipped += 1
            logger.warning("Skipping unreadable file %s: %s", path, exc)
            continue
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError:
            stats.lossy += 1
            logger.warning("Invalid UTF-8 in %s, replacing undecodable bytes", path)
            text = data.decode("utf-8", errors="replace")
        stats.files += 1
        files.append(FileRecord(app_id, relative, text, (1, header_lines)))

    logger.debug("Scanned %s %s: %d files", app_id, release_id, len(files))
    return AppRelease(app_id, release_id, release_date, tuple(files), root=str(root))


def extract_app_snippets(release: AppRelease, config: CloneConfig,
                         paths: Optional[Set[str]] = None) -> List[CodeSnippet]:
    """
    Cut every file of a release into clone fragments

    Args:
        release: Scanned release
        config: Clone settings (normalization level and minimum size)
        paths: Restrict to these file paths

    Returns:
        List[CodeSnippet]: Fragments with 1-based line ranges, undated
    """
    snippets = []
    for record in release.files:
        if paths is not None and record.path not in paths:
            continue
        lines = record.text.replace("\r\n", "\n").replace("\r", "\n").split("\n")
        fragments = extract_fragments(record.text, config.normalization_level, config.min_lines)
        for fragment in fragments:
            origin = AppFileOrigin(release.app_id, record.path, fragment.start_line,
                                   fragment.end_line, release.release_id)
            snippets.append(CodeSnippet(
                snippet_id=app_snippet_id(release.app_id, release.release_id, record.path,
                                          fragment.start_line, fragment.end_line),
                origin=origin,
                raw_text="\n".join(lines[fragment.start_line - 1:fragment.end_line]),
                normalized_lines=fragment.normalized_lines,
            ))
    return snippets


def _open_repo(repo_path: Union[str, Path]) -> Repo:
    try:
        return Repo(str(repo_path))
    except (InvalidGitRepositoryError, NoSuchPathError) as exc:
        raise RepositoryError(f"Not a git repository: {repo_path}", path=str(repo_path)) from exc


def _resolve_branch(repo: Repo, branch: Optional[str]) -> str:
    if branch:
        return branch
    try:
        return repo.active_branch.name
    except TypeError:
        # detached HEAD
        return "HEAD"


def parse_added_lines(patch: str) -> List[List[str]]:
    """
    Added lines of a unified diff body, grouped into contiguous runs

    Everything before the first hunk header is ignored.
    """
    runs: List[List[str]] = []
    current: List[str] = []
    in_hunk = False
    for line in patch.split("\n"):
        if line.startswith("@@"):
            in_hunk = True
            if current:
                runs.append(current)
                current = []
            continue
        if not in_hunk:
            continue
        if line.startswith("+"):
            current.append(line[1:])
        elif current:
            runs.append(current)
            current = []
    if current:
        runs.append(current)
    return runs


def _normalize_runs(runs: List[List[str]]) -> Tuple[str, ...]:
    added: List[str] = []
    for run in runs:
        added.extend(normalize("\n".join(run), HISTORY_LEVEL))
    return tuple(added)


def index_history(repo_path: Union[str, Path], paths: Optional[Set[str]] = None,
                  branch: Optional[str] = None,
                  extensions: Iterable[str] = (".java",)) -> AddedLineIndex:
    """
    Mine the lines each commit added to each source path

    History is walked along the first parent of ``branch`` (the checked out
    branch by default), oldest first. Added lines come from git's own diff of
    each commit against its first parent (the empty tree for a root commit)
    and are normalized at TYPE1 level. When git reports a rename, the new
    path inherits the entries of the old one and the rename commit is marked
    with ``renamed_from``.

    Args:
        repo_path: Working tree or bare repository
        paths: Only keep these paths in the result
        branch: Branch or revision to walk
        extensions: Source file extensions to index

    Returns:
        AddedLineIndex: Entries per path, commits ordered by date ascending

    Raises:
        RepositoryError: The repository is missing or the branch cannot be resolved
    """
    repo = _open_repo(repo_path)
    rev = _resolve_branch(repo, branch)
    wanted = {ext.lower() for ext in extensions}
    try:
        head = repo.commit(rev).hexsha
        commits = list(repo.iter_commits(rev, first_parent=True, reverse=True))
    except (GitCommandError, ValueError) as exc:
        raise RepositoryError(f"Cannot walk history of {rev}: {exc}", path=str(repo_path)) from exc

    entries: Dict[str, List[CommitAdditions]] = {}
    contributors: Set[str] = set()
    empty_tree = Tree(repo, bytes.fromhex(EMPTY_TREE_SHA))

    for commit in commits:
        if commit.author is not None and commit.author.name:
            contributors.add(commit.author.name)
        base = commit.parents[0] if commit.parents else empty_tree
        try:
            diffs = base.diff(commit, create_patch=True)
        except GitCommandError as exc:
            logger.warning("Skipping commit %s: diff failed: %s", commit.hexsha, exc)
            continue

        commit_date = from_timestamp(commit.committed_date)
        for diff in diffs:
            path = diff.b_path
            if path is None or os.path.splitext(path)[1].lower() not in wanted:
                continue
            raw = diff.diff or b""
            patch = raw.decode("utf-8", errors="replace") if isinstance(raw, bytes) else raw
            renamed_from = None
            if diff.renamed_file and diff.rename_from and diff.rename_from != path:
                renamed_from = diff.rename_from
                entries[path] = list(entries.get(renamed_from, []))
            entries.setdefault(path, []).append(CommitAdditions(
                commit_id=commit.hexsha,
                commit_date=commit_date,
                added_lines=_normalize_runs(parse_added_lines(patch)),
                renamed_from=renamed_from,
            ))

    if paths is not None:
        entries = {path: value for path, value in entries.items() if path in paths}
    for path in entries:
        entries[path].sort(key=lambda c: c.commit_date)

    logger.info("Indexed %d commits, %d paths from %s", len(commits), len(entries), repo_path)
    return AddedLineIndex(entries=dict(sorted(entries.items())),
                          contributors=frozenset(contributors), head=head)


def index_cache_key(head: str, branch: str, paths: Optional[Set[str]],
                    extensions: Iterable[str]) -> str:
    payload = json.dumps({
        "head": head,
        "branch": branch,
        "paths": sorted(paths) if paths is not None else None,
        "extensions": sorted(extensions),
    }, sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def load_or_build_index(repo_path: Union[str, Path], cache_dir: Union[str, Path],
                        paths: Optional[Set[str]] = None, branch: Optional[str] = None,
                        extensions: Iterable[str] = (".java",)) -> AddedLineIndex:
    """Return the cached index of a repository state, building it on a miss"""
    repo = _open_repo(repo_path)
    rev = _resolve_branch(repo, branch)
    try:
        head = repo.commit(rev).hexsha
    except (GitCommandError, ValueError) as exc:
        raise RepositoryError(f"Cannot resolve {rev}: {exc}", path=str(repo_path)) from exc

    cache_dir = Path(cache_dir)
    cache_file = cache_dir / f"{index_cache_key(head, rev, paths, extensions)}.json"
    if cache_file.exists():
        logger.debug("Using cached history index %s", cache_file)
        return AddedLineIndex.from_dict(read_json(cache_file))

    index = index_history(repo_path, paths=paths, branch=rev, extensions=extensions)
    cache_dir.mkdir(parents=True, exist_ok=True)
    write_json(cache_file, index.to_dict())
    return index


def _row_int(row: Mapping[str, str], column: str, line_number: int) -> int:
    value = (row.get(column) or "").strip()
    try:
        return int(value)
    except ValueError:
        raise InconsistencyRowError(f"{column} is not an integer: {value!r}", line_number)


def load_inconsistencies(table: Union[str, Path],
                         known_files: Optional[Mapping[Tuple[str, str], int]] = None,
                         strict: bool = True) -> List[InconsistencyRange]:
    """
    Load license-inconsistency ranges from a CSV table

    Args:
        table: CSV file with columns app_id, path, line_start, line_end
        known_files: (app_id, path) -> line count of the referenced files;
            rows for other files, or past their last line, are dropped
        strict: Raise on a malformed row instead of skipping it

    Returns:
        List[InconsistencyRange]: Valid ranges in table order

    Raises:
        InconsistencyRowError: Malformed row (with its line number) in strict mode
    """
    ranges = []
    with open(table, "r", encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        missing = [c for c in INCONSISTENCY_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise InconsistencyRowError(f"missing columns: {', '.join(missing)}", 1)

        for row in reader:
            line_number = reader.line_num
            try:
                app_id = (row["app_id"] or "").strip()
                path = (row["path"] or "").strip()
                if not app_id or not path:
                    raise InconsistencyRowError("empty app_id or path", line_number)
                start = _row_int(row, "line_start", line_number)
                end = _row_int(row, "line_end", line_number)
                try:
                    entry = InconsistencyRange(app_id, path, start, end)
                except DomainError as exc:
                    raise InconsistencyRowError(str(exc), line_number) from exc
            except InconsistencyRowError as exc:
                if strict:
                    raise
                logger.warning("Skipping inconsistency row: %s", exc)
                continue

            if known_files is not None:
                length = known_files.get((app_id, path))
                if length is None:
                    logger.warning("line %d: unknown file %s/%s, row dropped",
                                   line_number, app_id, path)
                    continue
                if end > length:
                    logger.warning("line %d: range %d-%d beyond %s/%s (%d lines), row dropped",
                                   line_number, start, end, app_id, path, length)
                    continue
            ranges.append(entry)
    return ranges


def _manifest_rows(path: Path) -> List[Dict[str, str]]:
    if path.suffix.lower() == ".json":
        document = read_json(path)
        rows = document.get("releases") if isinstance(document, dict) else document
        if not isinstance(rows, list):
            raise ManifestError(f"{path}: expected a list of releases")
        return rows
    with open(path, "r", encoding="utf-8", newline="") as handle:
        return list(csv.DictReader(handle))


def load_release_manifest(path: Union[str, Path]) -> List[ReleaseSpec]:
    """
    Read the release manifest (CSV or JSON)

    Each release names ``app_id``, ``release_id``, ``release_date``, the
    ``tree`` directory and optionally the ``repo`` holding its history.
    Relative locations are resolved against the manifest's directory.

    Raises:
        ManifestError: Missing column, bad date or duplicate release
    """
    path = Path(path)
    try:
        rows = _manifest_rows(path)
    except (OSError, ValueError) as exc:
        raise ManifestError(f"Cannot read release manifest {path}: {exc}") from exc

    base = path.parent
    releases = []
    seen = set()
    for number, row in enumerate(rows, start=1):
        missing = [c for c in MANIFEST_COLUMNS if not row.get(c)]
        if missing:
            raise ManifestError(f"{path}: release {number} lacks {', '.join(missing)}")
        release_date = parse_datetime(str(row["release_date"]))
        if release_date is None:
            raise ManifestError(f"{path}: release {number} has an invalid date")
        key = (str(row["app_id"]), str(row["release_id"]))
        if key in seen:
            raise ManifestError(f"{path}: duplicate release {key[0]} {key[1]}")
        seen.add(key)
        repo = row.get("repo")
        releases.append(ReleaseSpec(
            app_id=key[0],
            release_id=key[1],
            release_date=release_date,
            tree=(base / str(row["tree"])).resolve(),
            repo=(base / str(repo)).resolve() if repo else None,
        ))
    return releases


def order_releases(releases: Iterable[Union[AppRelease, ReleaseSpec]]) -> Dict[str, list]:
    """Group releases per app, each list ordered by (release_date, release_id)"""
    grouped: Dict[str, list] = {}
    for release in releases:
        grouped.setdefault(release.app_id, []).append(release)
    return {app: sorted(items, key=lambda r: r.sort_key) for app, items in sorted(grouped.items())}
