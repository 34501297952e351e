"""
License identification by phrase fingerprints.

A catalog lists, for every known license, a few phrases taken from its
canonical text. A text is tokenized (lowercase words and numbers, all
punctuation and layout dropped) and each phrase is searched as a token
sequence; the confidence of a license is the share of its phrases found.

The default catalog ships with the package under ``data/licenses`` and is
loaded on first use. New licenses only need a new JSON file.
"""

import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from .exceptions import ConfigurationError
from .models import (
    UNKNOWN_LICENSE, Evidence, FileRecord, LicenseFinding, LicenseScope
)
from .utils import read_json

logger = logging.getLogger(__name__)

DEFAULT_CATALOG_DIR = Path(__file__).parent / "data" / "licenses"

SHAREALIKE_FAMILY = "CC-BY-SA"
SHAREALIKE_MIN_VERSION = (3, 0)

ROOT_LICENSE_PREFIXES = ("LICENSE", "LICENCE", "COPYING", "README")

_WORD = re.compile(r"[^\W_]+")

_default_catalog: Optional["LicenseCatalog"] = None


def tokenize(text: str) -> List[Tuple[str, int]]:
    """Lowercase word tokens of a text with their 1-based line numbers"""
    tokens = []
    for number, line in enumerate(text.splitlines(), start=1):
        tokens.extend((word.lower(), number) for word in _WORD.findall(line))
    return tokens


def phrase_tokens(phrase: str) -> Tuple[str, ...]:
    return tuple(word.lower() for word in _WORD.findall(phrase))


def _parse_version(value: Optional[str]) -> Tuple[int, ...]:
    if value is None or value == "":
        return ()
    return tuple(int(part) for part in str(value).split("."))


@dataclass(frozen=True)
class LicenseEntry:
    """
    One catalog license.

    :ivar license_id: Catalog identifier (SPDX-like)
    :ivar family: Family name shared by the versions of a license
    :ivar kind: ``restrictive``, ``permissive`` or ``share-alike``
    :ivar version: Version as a comparable tuple, empty when unversioned
    :ivar phrases: Fingerprint phrases as token sequences
    :ivar canonical_url: Where the license text lives
    :ivar notice: A short canonical notice containing every phrase
    """
    license_id: str
    family: str
    kind: str
    version: Tuple[int, ...]
    phrases: Tuple[Tuple[str, ...], ...]
    canonical_url: str = ""
    notice: str = ""

    @classmethod
    def from_dict(cls, data: Dict) -> 'LicenseEntry':
        phrases = tuple(phrase_tokens(p) for p in data.get("phrases", []))
        if not phrases or any(not p for p in phrases):
            raise ConfigurationError(f"License {data.get('license_id')} has an empty phrase")
        if len(set(phrases)) != len(phrases):
            raise ConfigurationError(f"License {data['license_id']} repeats a phrase")
        return cls(
            license_id=data["license_id"],
            family=data.get("family") or data["license_id"],
            kind=data.get("kind", "permissive"),
            version=_parse_version(data.get("version")),
            phrases=phrases,
            canonical_url=data.get("canonical_url", ""),
            notice=data.get("notice", ""),
        )


class LicenseCatalog:
    """Fingerprint catalog, immutable once loaded"""

    def __init__(self, entries: Iterable[LicenseEntry]):
        self._entries: Dict[str, LicenseEntry] = {}
        versions: Dict[Tuple[str, Tuple[int, ...]], str] = {}
        for entry in entries:
            if entry.license_id in self._entries or entry.license_id == UNKNOWN_LICENSE:
                raise ConfigurationError(f"Duplicate license id: {entry.license_id}")
            key = (entry.family, entry.version)
            if key in versions:
                raise ConfigurationError(
                    f"{entry.license_id} and {versions[key]} share family version {key}"
                )
            versions[key] = entry.license_id
            self._entries[entry.license_id] = entry

    @classmethod
    def load(cls, directory: Union[str, Path]) -> 'LicenseCatalog':
        """Load every ``*.json`` entry of a directory"""
        directory = Path(directory)
        files = sorted(directory.glob("*.json"))
        if not files:
            raise ConfigurationError(f"No license catalog entries in {directory}")
        catalog = cls(LicenseEntry.from_dict(read_json(path)) for path in files)
        logger.debug("Loaded %d licenses from %s", len(catalog), directory)
        return catalog

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, license_id: str) -> bool:
        return license_id in self._entries

    def get(self, license_id: str) -> Optional[LicenseEntry]:
        return self._entries.get(license_id)

    @property
    def entries(self) -> List[LicenseEntry]:
        return [self._entries[key] for key in sorted(self._entries)]


def default_catalog() -> LicenseCatalog:
    """The catalog shipped with the package"""
    global _default_catalog
    if _default_catalog is None:
        _default_catalog = LicenseCatalog.load(DEFAULT_CATALOG_DIR)
    return _default_catalog


def _find(tokens: Sequence[Tuple[str, int]], positions: Dict[str, List[int]],
          phrase: Tuple[str, ...]) -> Optional[Tuple[int, int]]:
    size = len(phrase)
    for start in positions.get(phrase[0], ()):
        end = start + size
        if end <= len(tokens) and all(tokens[start + k][0] == phrase[k] for k in range(size)):
            return tokens[start][1], tokens[end - 1][1]
    return None


def unknown_finding(scope: LicenseScope) -> LicenseFinding:
    return LicenseFinding(UNKNOWN_LICENSE, 0.0, (), scope)


def identify(text: str, scope: LicenseScope, catalog: Optional[LicenseCatalog] = None,
             floor: float = 0.5) -> List[LicenseFinding]:
    """
    Identify the licenses declared in a text

    Args:
        text: Text to scan (a header, a license file, a post body)
        scope: Where the text comes from
        catalog: Fingerprint catalog, the bundled one by default
        floor: Minimum confidence reported

    Returns:
        List[LicenseFinding]: Findings by confidence descending then id; a
        single UNKNOWN finding when nothing reaches the floor
    """
    catalog = catalog or default_catalog()
    tokens = tokenize(text or "")
    positions: Dict[str, List[int]] = {}
    for index, (word, _) in enumerate(tokens):
        positions.setdefault(word, []).append(index)

    findings = []
    for entry in catalog.entries:
        evidence = []
        for phrase in entry.phrases:
            span = _find(tokens, positions, phrase)
            if span is not None:
                evidence.append(Evidence(span[0], span[1], " ".join(phrase)))
        confidence = len(evidence) / len(entry.phrases)
        if evidence and confidence >= floor:
            findings.append(LicenseFinding(entry.license_id, confidence, tuple(evidence), scope))

    if not findings:
        return [unknown_finding(scope)]
    return sorted(findings, key=lambda f: (-f.confidence, f.license_id))


def identify_header(record: FileRecord, catalog: Optional[LicenseCatalog] = None,
                    floor: float = 0.5) -> List[LicenseFinding]:
    """Identify licenses in the header region of a source file"""
    return identify(record.header_text, LicenseScope.FILE_HEADER, catalog, floor)


def scan_project_root(root: Union[str, Path], catalog: Optional[LicenseCatalog] = None,
                      floor: float = 0.5) -> List[LicenseFinding]:
    """
    Identify the main licenses of a project from the license and readme
    files at its root

    When several files name the same license, the most confident finding
    is kept.
    """
    root = Path(root)
    best: Dict[str, LicenseFinding] = {}
    candidates = sorted(p for p in root.iterdir()
                        if p.is_file() and p.name.upper().startswith(ROOT_LICENSE_PREFIXES))
    for path in candidates:
        try:
            text = path.read_text(encoding="utf-8", errors="replace")
        except OSError as exc:
            logger.warning("Skipping unreadable license file %s: %s", path, exc)
            continue
        for finding in identify(text, LicenseScope.PROJECT_ROOT, catalog, floor):
            if finding.is_unknown:
                continue
            current = best.get(finding.license_id)
            if current is None or finding.confidence > current.confidence:
                best[finding.license_id] = finding

    if not best:
        return [unknown_finding(LicenseScope.PROJECT_ROOT)]
    return sorted(best.values(), key=lambda f: (-f.confidence, f.license_id))


def primary_license(findings: Sequence[LicenseFinding]) -> str:
    """Identifier of the most confident finding, UNKNOWN when there is none"""
    for finding in findings:
        if not finding.is_unknown:
            return finding.license_id
    return UNKNOWN_LICENSE


def satisfies_sharealike(findings: Iterable[LicenseFinding],
                         catalog: Optional[LicenseCatalog] = None) -> bool:
    """True when a finding is CC BY-SA at version 3.0 or later"""
    catalog = catalog or default_catalog()
    for finding in findings:
        entry = catalog.get(finding.license_id)
        if entry is not None and entry.family == SHAREALIKE_FAMILY \
                and entry.version >= SHAREALIKE_MIN_VERSION:
            return True
    return False


def same_license(a: str, b: str) -> bool:
    """Identifier equality; UNKNOWN never matches, not even itself"""
    return a == b and a != UNKNOWN_LICENSE
