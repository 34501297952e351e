"""
This module defines the data types shared by every pipeline stage: posts and
code snippets, application releases and their history index, clone pairs and
classes, license findings, and the analysis outputs (provenance records,
migration chains, lifespans and violation reports).

All types are immutable after construction and provide ``to_dict`` /
``from_dict`` helpers matching the JSON files written between stages.

Classes:
  - NormalizationLevel, Direction, Resolution, LicenseScope, Rule, PassStatus: enums.
  - Post, CodeSnippet, QAPostOrigin, AppFileOrigin: Q&A side records.
  - FileRecord, AppRelease, CommitAdditions, AddedLineIndex, InconsistencyRange: app side records.
  - CloneConfig, ClonePair, CloneClass: clone detection.
  - Evidence, LicenseFinding: license detection.
  - ProvenanceRecord, MigrationChain, LifespanRecord, ViolationReport, PassRecord: analysis outputs.
"""

from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Any, Dict, FrozenSet, List, Optional, Tuple, Union

from .exceptions import ConfigurationError, DomainError
from .utils import format_datetime, format_datetime_exact, parse_datetime

UNKNOWN_LICENSE = "UNKNOWN"


class NormalizationLevel(Enum):
    """
    How aggressively source text is normalized before comparison.

    TYPE1 removes comments and layout differences only; TYPE2 additionally
    replaces identifiers and literals with placeholders ("blind renaming").
    """
    TYPE1 = "TYPE1"
    TYPE2 = "TYPE2"


class Direction(Enum):
    """Reuse direction inferred from creation timestamps"""
    REUSE_FROM_QA = "REUSE_FROM_QA"
    REUSE_TO_QA = "REUSE_TO_QA"
    AMBIGUOUS = "AMBIGUOUS"

    def flipped(self) -> "Direction":
        if self is Direction.REUSE_FROM_QA:
            return Direction.REUSE_TO_QA
        if self is Direction.REUSE_TO_QA:
            return Direction.REUSE_FROM_QA
        return self


class Resolution(Enum):
    """How the creation date of an app snippet was established"""
    AUTO = "AUTO"
    UNRESOLVED = "UNRESOLVED"
    MANUAL = "MANUAL"


class LicenseScope(Enum):
    FILE_HEADER = "FILE_HEADER"
    PROJECT_ROOT = "PROJECT_ROOT"
    POST_BODY = "POST_BODY"


class Rule(Enum):
    """License obligations checked for a reuse candidate"""
    APP_MISSING_SHAREALIKE_FILE = "APP_MISSING_SHAREALIKE_FILE"
    APP_MISSING_SHAREALIKE_PROJECT = "APP_MISSING_SHAREALIKE_PROJECT"
    APP_MISSING_ATTRIBUTION = "APP_MISSING_ATTRIBUTION"
    POST_MISSING_SOURCE_LICENSE = "POST_MISSING_SOURCE_LICENSE"


class PassStatus(Enum):
    PASS = "PASS"
    INDETERMINATE = "INDETERMINATE"


def _dt(value: Optional[str]) -> Optional[datetime]:
    return parse_datetime(value) if value else None


def _dt_out(value: Optional[datetime]) -> Optional[str]:
    return format_datetime_exact(value) if value else None


@dataclass(frozen=True)
class Post:
    """
    One Q&A post from the dump.

    :ivar id: Post identifier, unique within a dump
    :ivar creation_date: Submission instant (UTC)
    :ivar tags: Lowercase tags of the post (answers carry none of their own)
    :ivar body_html: HTML body, XML entities already decoded
    :ivar post_type: ``PostTypeId`` (1 question, 2 answer) when present
    :ivar parent_id: Question id of an answer, when present
    :ivar owner_display_name: Poster name, when present
    """
    id: int
    creation_date: datetime
    tags: FrozenSet[str]
    body_html: str
    post_type: Optional[int] = None
    parent_id: Optional[int] = None
    owner_display_name: Optional[str] = None

    @property
    def is_question(self) -> bool:
        return self.post_type == 1

    @property
    def is_answer(self) -> bool:
        return self.post_type == 2

    def to_dict(self) -> Dict[str, Any]:
        return {
            "id": self.id,
            "creation_date": _dt_out(self.creation_date),
            "tags": sorted(self.tags),
            "body_html": self.body_html,
            "post_type": self.post_type,
            "parent_id": self.parent_id,
            "owner_display_name": self.owner_display_name,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Post':
        return cls(
            id=int(data["id"]),
            creation_date=_dt(data["creation_date"]),
            tags=frozenset(data.get("tags", [])),
            body_html=data["body_html"],
            post_type=data.get("post_type"),
            parent_id=data.get("parent_id"),
            owner_display_name=data.get("owner_display_name"),
        )


@dataclass(frozen=True)
class QAPostOrigin:
    """Locator of a code block inside a post"""
    post_id: int
    block_index: int
    post_type: Optional[int] = None
    owner_display_name: Optional[str] = None

    kind = "QA_POST"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "post_id": self.post_id,
            "block_index": self.block_index,
            "post_type": self.post_type,
            "owner_display_name": self.owner_display_name,
        }


@dataclass(frozen=True)
class AppFileOrigin:
    """Locator of a fragment inside an application file (1-based inclusive lines)"""
    app_id: str
    path: str
    start_line: int
    end_line: int
    release_id: Optional[str] = None

    kind = "APP_FILE"

    @property
    def line_range(self) -> Tuple[int, int]:
        return self.start_line, self.end_line

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "app_id": self.app_id,
            "path": self.path,
            "start_line": self.start_line,
            "end_line": self.end_line,
            "release_id": self.release_id,
        }


Origin = Union[QAPostOrigin, AppFileOrigin]


def origin_from_dict(data: Dict[str, Any]) -> Origin:
    if data["kind"] == QAPostOrigin.kind:
        return QAPostOrigin(
            post_id=int(data["post_id"]),
            block_index=int(data["block_index"]),
            post_type=data.get("post_type"),
            owner_display_name=data.get("owner_display_name"),
        )
    if data["kind"] == AppFileOrigin.kind:
        return AppFileOrigin(
            app_id=data["app_id"],
            path=data["path"],
            start_line=int(data["start_line"]),
            end_line=int(data["end_line"]),
            release_id=data.get("release_id"),
        )
    raise DomainError(f"Unknown snippet origin kind: {data['kind']}")


def qa_snippet_id(post_id: int, block_index: int) -> str:
    return f"qa/{post_id}/{block_index}"


def app_snippet_id(app_id: str, release_id: Optional[str], path: str,
                   start_line: int, end_line: int) -> str:
    return f"app/{app_id}/{release_id or '-'}/{path}#L{start_line}-L{end_line}"


@dataclass(frozen=True)
class CodeSnippet:
    """
    A normalized code unit taken from a post or an application file.

    :ivar snippet_id: Opaque unique identifier
    :ivar origin: Where the snippet comes from
    :ivar raw_text: Source text as extracted
    :ivar normalized_lines: Normalized lines at the corpus normalization level
    :ivar created_at: Creation instant; always set for post snippets
    """
    snippet_id: str
    origin: Origin
    raw_text: str
    normalized_lines: Tuple[str, ...]
    created_at: Optional[datetime] = None

    @property
    def is_qa(self) -> bool:
        return isinstance(self.origin, QAPostOrigin)

    @property
    def is_app(self) -> bool:
        return isinstance(self.origin, AppFileOrigin)

    @property
    def line_count(self) -> int:
        return len(self.normalized_lines)

    @property
    def raw_line_count(self) -> int:
        return sum(1 for line in self.raw_text.splitlines() if line.strip())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "snippet_id": self.snippet_id,
            "origin": self.origin.to_dict(),
            "raw_text": self.raw_text,
            "normalized_lines": list(self.normalized_lines),
            "created_at": _dt_out(self.created_at),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'CodeSnippet':
        return cls(
            snippet_id=data["snippet_id"],
            origin=origin_from_dict(data["origin"]),
            raw_text=data["raw_text"],
            normalized_lines=tuple(data["normalized_lines"]),
            created_at=_dt(data.get("created_at")),
        )


@dataclass(frozen=True)
class FileRecord:
    """One source file of a release; ``header_region`` is a 1-based inclusive line range"""
    app_id: str
    path: str
    text: str
    header_region: Tuple[int, int] = (1, 60)

    @property
    def lines(self) -> List[str]:
        return self.text.splitlines()

    @property
    def line_count(self) -> int:
        return len(self.lines)

    @property
    def header_text(self) -> str:
        start, end = self.header_region
        return "\n".join(self.lines[start - 1:end])


@dataclass(frozen=True)
class AppRelease:
    """A release of an application and the files it ships"""
    app_id: str
    release_id: str
    release_date: datetime
    files: Tuple[FileRecord, ...] = ()
    root: Optional[str] = None

    @property
    def sort_key(self) -> Tuple[datetime, str]:
        return self.release_date, self.release_id

    def file(self, path: str) -> Optional[FileRecord]:
        for record in self.files:
            if record.path == path:
                return record
        return None


@dataclass(frozen=True)
class CommitAdditions:
    """Normalized lines a single commit added to one path"""
    commit_id: str
    commit_date: datetime
    added_lines: Tuple[str, ...]
    renamed_from: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "commit_id": self.commit_id,
            "commit_date": _dt_out(self.commit_date),
            "added_lines": list(self.added_lines),
            "renamed_from": self.renamed_from,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'CommitAdditions':
        return cls(
            commit_id=data["commit_id"],
            commit_date=_dt(data["commit_date"]),
            added_lines=tuple(data["added_lines"]),
            renamed_from=data.get("renamed_from"),
        )


@dataclass
class AddedLineIndex:
    """
    Per-path history of added lines, commits ordered by date ascending.

    :ivar entries: path -> commits that added lines to it
    :ivar contributors: Author names seen in the indexed history
    :ivar head: Commit id the index was built from
    """
    entries: Dict[str, List[CommitAdditions]] = field(default_factory=dict)
    contributors: FrozenSet[str] = frozenset()
    head: Optional[str] = None

    def commits_for(self, path: str) -> Optional[List[CommitAdditions]]:
        return self.entries.get(path)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "head": self.head,
            "contributors": sorted(self.contributors),
            "entries": {
                path: [commit.to_dict() for commit in commits]
                for path, commits in sorted(self.entries.items())
            },
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'AddedLineIndex':
        return cls(
            entries={
                path: [CommitAdditions.from_dict(c) for c in commits]
                for path, commits in data.get("entries", {}).items()
            },
            contributors=frozenset(data.get("contributors", [])),
            head=data.get("head"),
        )


@dataclass(frozen=True)
class InconsistencyRange:
    """Lines of a file concerned by a license inconsistency (1-based, inclusive)"""
    app_id: str
    path: str
    line_start: int
    line_end: int

    def __post_init__(self):
        if self.line_start < 1 or self.line_start > self.line_end:
            raise DomainError(
                f"Invalid line range {self.line_start}-{self.line_end} for {self.path}"
            )

    @property
    def line_range(self) -> Tuple[int, int]:
        return self.line_start, self.line_end

    @property
    def line_count(self) -> int:
        return self.line_end - self.line_start + 1

    def to_dict(self) -> Dict[str, Any]:
        return {
            "app_id": self.app_id,
            "path": self.path,
            "line_start": self.line_start,
            "line_end": self.line_end,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'InconsistencyRange':
        return cls(data["app_id"], data["path"], int(data["line_start"]), int(data["line_end"]))


@dataclass(frozen=True)
class CloneConfig:
    """
    Clone detection settings.

    Defaults follow the detector's defaults: at least 10 lines and at least
    70% similarity, inclusive.
    """
    min_lines: int = 10
    similarity_threshold: float = 0.70
    normalization_level: NormalizationLevel = NormalizationLevel.TYPE2
    shard_size_a: int = 2000
    shard_size_b: int = 800

    def __post_init__(self):
        if not 0 < self.similarity_threshold <= 1:
            raise ConfigurationError("Similarity threshold must be in (0, 1]")
        if self.min_lines < 1:
            raise ConfigurationError("Minimum lines must be at least 1")
        if self.shard_size_a < 1 or self.shard_size_b < 1:
            raise ConfigurationError("Shard sizes must be at least 1")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "min_lines": self.min_lines,
            "similarity_threshold": self.similarity_threshold,
            "normalization_level": self.normalization_level.value,
            "shard_size_a": self.shard_size_a,
            "shard_size_b": self.shard_size_b,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'CloneConfig':
        return cls(
            min_lines=int(data["min_lines"]),
            similarity_threshold=float(data["similarity_threshold"]),
            normalization_level=NormalizationLevel(data["normalization_level"]),
            shard_size_a=int(data["shard_size_a"]),
            shard_size_b=int(data["shard_size_b"]),
        )


@dataclass(frozen=True, order=True)
class ClonePair:
    """Two snippets from different corpora, stored in canonical id order"""
    left: str
    right: str
    similarity: float

    @classmethod
    def of(cls, a: str, b: str, similarity: float) -> 'ClonePair':
        left, right = (a, b) if a <= b else (b, a)
        return cls(left, right, similarity)

    @property
    def members(self) -> Tuple[str, str]:
        return self.left, self.right

    def other(self, snippet_id: str) -> str:
        return self.right if snippet_id == self.left else self.left

    def to_dict(self) -> Dict[str, Any]:
        return {"left": self.left, "right": self.right,
                "similarity": format(self.similarity, ".6f")}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ClonePair':
        return cls(data["left"], data["right"], float(data["similarity"]))


@dataclass(frozen=True)
class CloneClass:
    """A connected component of the clone pair graph"""
    class_id: str
    members: Tuple[str, ...]
    representative: str

    @property
    def size(self) -> int:
        return len(self.members)

    def to_dict(self) -> Dict[str, Any]:
        return {"class_id": self.class_id, "members": list(self.members),
                "representative": self.representative}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'CloneClass':
        return cls(data["class_id"], tuple(data["members"]), data["representative"])


@dataclass(frozen=True)
class Evidence:
    """A catalog phrase found in a text, with its 1-based line range"""
    line_start: int
    line_end: int
    phrase: str

    def to_dict(self) -> Dict[str, Any]:
        return {"line_start": self.line_start, "line_end": self.line_end, "phrase": self.phrase}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Evidence':
        return cls(int(data["line_start"]), int(data["line_end"]), data["phrase"])


@dataclass(frozen=True)
class LicenseFinding:
    """A license detected in a text"""
    license_id: str
    confidence: float
    evidence: Tuple[Evidence, ...]
    scope: LicenseScope

    @property
    def is_unknown(self) -> bool:
        return self.license_id == UNKNOWN_LICENSE

    def to_dict(self) -> Dict[str, Any]:
        return {
            "license_id": self.license_id,
            "confidence": round(self.confidence, 6),
            "evidence": [e.to_dict() for e in self.evidence],
            "scope": self.scope.value,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'LicenseFinding':
        return cls(
            license_id=data["license_id"],
            confidence=float(data["confidence"]),
            evidence=tuple(Evidence.from_dict(e) for e in data.get("evidence", [])),
            scope=LicenseScope(data["scope"]),
        )


@dataclass(frozen=True)
class CommitCandidate:
    """A commit examined while dating a snippet, with the cumulative matched fraction"""
    commit_id: str
    commit_date: datetime
    fraction: float

    def to_dict(self) -> Dict[str, Any]:
        return {"commit_id": self.commit_id, "commit_date": _dt_out(self.commit_date),
                "fraction": round(self.fraction, 6)}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'CommitCandidate':
        return cls(data["commit_id"], _dt(data["commit_date"]), float(data["fraction"]))


@dataclass(frozen=True)
class ProvenanceRecord:
    """
    Creation date of an app snippet and, in the context of one clone pair, the
    reuse direction and overlapped rate.

    ``resolution`` is AUTO exactly when ``matched_commit`` is set; MANUAL
    records come from an annotated review queue and carry only ``created_at``.
    """
    snippet_id: str
    matched_commit: Optional[str] = None
    created_at: Optional[datetime] = None
    resolution: Resolution = Resolution.UNRESOLVED
    direction: Optional[Direction] = None
    overlap_rate: Optional[float] = None
    post_snippet_id: Optional[str] = None
    candidates: Tuple[CommitCandidate, ...] = ()
    rename_followed: bool = False
    diagnostic: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "snippet_id": self.snippet_id,
            "matched_commit": self.matched_commit,
            "created_at": _dt_out(self.created_at),
            "resolution": self.resolution.value,
            "direction": self.direction.value if self.direction else None,
            "overlap_rate": None if self.overlap_rate is None else round(self.overlap_rate, 2),
            "post_snippet_id": self.post_snippet_id,
            "candidates": [c.to_dict() for c in self.candidates],
            "rename_followed": self.rename_followed,
            "diagnostic": self.diagnostic,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ProvenanceRecord':
        direction = data.get("direction")
        return cls(
            snippet_id=data["snippet_id"],
            matched_commit=data.get("matched_commit"),
            created_at=_dt(data.get("created_at")),
            resolution=Resolution(data.get("resolution", "UNRESOLVED")),
            direction=Direction(direction) if direction else None,
            overlap_rate=data.get("overlap_rate"),
            post_snippet_id=data.get("post_snippet_id"),
            candidates=tuple(CommitCandidate.from_dict(c) for c in data.get("candidates", [])),
            rename_followed=bool(data.get("rename_followed", False)),
            diagnostic=data.get("diagnostic"),
        )


@dataclass(frozen=True)
class MigrationChain:
    """Code that went from one app to a post and then to a different app"""
    source: Tuple[str, datetime]
    via_post: Tuple[str, datetime]
    destination: Tuple[str, datetime]
    source_app: str
    destination_app: str
    duration_days: int
    source_license: str
    destination_license: str
    consistent: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            "source": {"snippet_id": self.source[0], "date": format_datetime(self.source[1])},
            "via_post": {"snippet_id": self.via_post[0], "date": format_datetime(self.via_post[1])},
            "destination": {"snippet_id": self.destination[0],
                            "date": format_datetime(self.destination[1])},
            "source_app": self.source_app,
            "destination_app": self.destination_app,
            "duration_days": self.duration_days,
            "source_license": self.source_license,
            "destination_license": self.destination_license,
            "consistent": self.consistent,
        }


@dataclass(frozen=True)
class LifespanRecord:
    """Releases of one app in which a clone class representative is detected"""
    class_id: str
    app_id: str
    first_release: Optional[str]
    last_release: Optional[str]
    release_count: int
    days: int
    still_present: bool
    needs_review: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return {
            "class_id": self.class_id,
            "app_id": self.app_id,
            "first_release": self.first_release,
            "last_release": self.last_release,
            "release_count": self.release_count,
            "days": self.days,
            "still_present": self.still_present,
            "needs_review": self.needs_review,
        }


@dataclass(frozen=True)
class ViolationReport:
    """A potential license violation for one reuse candidate"""
    subject: str
    rules_violated: FrozenSet[Rule]
    direction: Direction
    evidence: Dict[str, Any] = field(default_factory=dict, hash=False, compare=False)

    label = "potential"

    def __post_init__(self):
        if not self.rules_violated:
            raise DomainError("A violation report needs at least one violated rule")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "label": self.label,
            "subject": self.subject,
            "rules_violated": sorted(rule.value for rule in self.rules_violated),
            "direction": self.direction.value,
            "evidence": self.evidence,
        }


@dataclass(frozen=True)
class PassRecord:
    """A reuse candidate for which no violation is asserted"""
    subject: str
    direction: Direction
    status: PassStatus
    pair: Tuple[str, str]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "subject": self.subject,
            "direction": self.direction.value,
            "status": self.status.value,
            "pair": list(self.pair),
        }
