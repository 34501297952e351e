"""
Near-miss clone detection between two snippet corpora.

Source text is first normalized into lines (comments and layout removed,
statements split at braces, optionally identifiers and literals blinded).
Two snippets are clones when the longest common subsequence of their
normalized lines covers at least ``similarity_threshold`` of the longer one.

Cross-corpus detection prunes candidate pairs losslessly before computing the
LCS: a pair can only reach the threshold when the snippets share enough
lines, which is checked first through a prefix filter over rare lines and then
through length and bag-of-lines bounds. Large corpora are split into shards
whose pairwise work units run on a process pool, with per-unit result files,
a run manifest and bounded retries.
"""

import collections
import hashlib
import logging
import multiprocessing
import re
from dataclasses import dataclass, field
from datetime import datetime
from fractions import Fraction
from pathlib import Path
from typing import (
    Dict, Generic, Hashable, Iterable, List, Mapping, Optional, Sequence, Set, Tuple, TypeVar
)

from .exceptions import DomainError, IncompleteShardsError
from .models import CloneClass, CloneConfig, ClonePair, CodeSnippet, NormalizationLevel
from .utils import chunk_list, progress, read_json, read_jsonl, write_json, write_jsonl

logger = logging.getLogger(__name__)

T = TypeVar("T")

# (snippet id, normalized lines)
Item = Tuple[str, Tuple[str, ...]]

IDENTIFIER_PLACEHOLDER = "ID"
NUMBER_PLACEHOLDER = "0"
STRING_PLACEHOLDER = '""'
CHAR_PLACEHOLDER = "''"

KEYWORDS = frozenset("""
    abstract assert boolean break byte case catch char class const continue default do
    double else enum extends final finally float for goto if implements import instanceof
    int interface long native new package private protected public return short static
    strictfp super switch synchronized this throw throws transient try void volatile while
    true false null var record yield sealed permits non-sealed
    auto delete friend inline namespace operator signed sizeof struct template typedef
    typename union unsigned using virtual
""".split())

_TOKEN = re.compile(
    r"""
      (?P<block>/\*.*?\*/)
    | (?P<open_block>/\*.*)
    | (?P<comment>//[^\n]*)
    | (?P<string>"(?:\\.|[^"\\\n])*")
    | (?P<char>'(?:\\.|[^'\\\n])*')
    | (?P<bad>["'])
    | (?P<newline>\n)
    | (?P<space>[ \t\r\f\v]+)
    | (?P<number>\.?\d[\w.]*)
    | (?P<ident>(?:[^\W\d]|\$)[\w$]*)
    | (?P<op>.)
    """,
    re.VERBOSE | re.DOTALL,
)

_COMMENT_KINDS = ("block", "open_block", "comment")


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    spaced: bool  # preceded by whitespace or a comment on the same line


@dataclass
class _LexedText:
    lines: List[str]
    tokens_by_line: Dict[int, List[Token]]
    degraded: Set[int]
    comments: List[Tuple[int, str]]


def _lex(raw_text: str) -> _LexedText:
    text = raw_text.replace("\r\n", "\n").replace("\r", "\n")
    tokens_by_line: Dict[int, List[Token]] = collections.defaultdict(list)
    degraded: Set[int] = set()
    comments: List[Tuple[int, str]] = []
    line = 1
    spaced = False
    for match in _TOKEN.finditer(text):
        kind = match.lastgroup
        value = match.group()
        if kind == "newline":
            line += 1
            spaced = False
            continue
        if kind == "space":
            spaced = True
            continue
        if kind in _COMMENT_KINDS:
            comments.append((line, value))
            line += value.count("\n")
            spaced = True
            continue
        if kind == "bad":
            degraded.add(line)
        tokens_by_line[line].append(Token(kind, value, line, spaced))
        spaced = False
    return _LexedText(text.split("\n"), tokens_by_line, degraded, comments)


def _blind(token: Token, level: NormalizationLevel) -> str:
    if level is NormalizationLevel.TYPE1:
        return token.text
    if token.kind == "ident":
        return token.text if token.text in KEYWORDS else IDENTIFIER_PLACEHOLDER
    if token.kind == "number":
        return NUMBER_PLACEHOLDER
    if token.kind == "string":
        return STRING_PLACEHOLDER
    if token.kind == "char":
        return CHAR_PLACEHOLDER
    return token.text


def _join(tokens: List[Token], level: NormalizationLevel) -> str:
    parts = []
    for position, token in enumerate(tokens):
        if position and token.spaced:
            parts.append(" ")
        parts.append(_blind(token, level))
    return "".join(parts).strip()


def _split_statements(tokens: List[Token], level: NormalizationLevel,
                      depth: List[int]) -> List[str]:
    """Split one source line into pieces ending at braces and top-level semicolons"""
    pieces: List[str] = []
    current: List[Token] = []

    def flush() -> None:
        if current:
            piece = _join(current, level)
            if piece:
                pieces.append(piece)
            current.clear()

    def track(token: Token) -> None:
        if token.text == "(":
            depth[0] += 1
        elif token.text == ")":
            depth[0] = max(0, depth[0] - 1)

    position = 0
    while position < len(tokens):
        token = tokens[position]
        track(token)
        if token.text == "}":
            flush()
            current.append(token)
            while position + 1 < len(tokens) and tokens[position + 1].text in (")", ";", ","):
                position += 1
                track(tokens[position])
                current.append(tokens[position])
            flush()
        else:
            current.append(token)
            if token.text == "{" or (token.text == ";" and depth[0] == 0):
                flush()
        position += 1
    flush()
    return pieces


def normalize(raw_text: str, level: NormalizationLevel = NormalizationLevel.TYPE2) -> List[str]:
    """
    Normalize source text into comparable lines

    TYPE1 strips line and block comments, collapses whitespace runs, drops
    empty lines and splits statements so that every brace ends its own line.
    TYPE2 also replaces identifiers with one placeholder and literals with a
    placeholder per literal type. A line that cannot be lexed (an unbalanced
    quote) only gets its whitespace collapsed.

    Args:
        raw_text: Source text
        level: Normalization level

    Returns:
        List[str]: Normalized lines, deterministic for a given input
    """
    lexed = _lex(raw_text)
    depth = [0]
    output: List[str] = []
    for number in range(1, len(lexed.lines) + 1):
        if number in lexed.degraded:
            collapsed = " ".join(lexed.lines[number - 1].split())
            if collapsed:
                output.append(collapsed)
            continue
        tokens = lexed.tokens_by_line.get(number)
        if tokens:
            output.extend(_split_statements(tokens, level, depth))
    return output


def extract_comments(raw_text: str) -> List[Tuple[int, str]]:
    """Comments of a source text as (1-based start line, comment text)"""
    return list(_lex(raw_text).comments)


@dataclass(frozen=True)
class Fragment:
    """A brace-delimited block of a source file with its normalized lines"""
    start_line: int
    end_line: int
    depth: int
    normalized_lines: Tuple[str, ...]


def extract_fragments(raw_text: str, level: NormalizationLevel = NormalizationLevel.TYPE2,
                      min_lines: int = 10, max_depth: int = 1) -> List[Fragment]:
    """
    Cut a source file into clone fragments

    Type-level blocks (brace depth 0) and member-level blocks (depth 1) are
    kept, each starting at the first token after the preceding statement or
    block boundary, so that annotations and signatures belong to the block.

    Args:
        raw_text: File content
        level: Normalization level of the fragments
        min_lines: Minimum normalized line count of a kept fragment
        max_depth: Deepest brace depth cut into fragments

    Returns:
        List[Fragment]: Fragments ordered by start line, then end line
    """
    lexed = _lex(raw_text)
    stack: List[Tuple[int, int]] = []
    header_start: Optional[int] = None
    spans: List[Tuple[int, int, int]] = []
    for number in sorted(lexed.tokens_by_line):
        for token in lexed.tokens_by_line[number]:
            if header_start is None:
                header_start = token.line
            if token.text == "{":
                stack.append((len(stack), header_start))
                header_start = None
            elif token.text == "}":
                if stack:
                    depth, start = stack.pop()
                    if depth <= max_depth:
                        spans.append((start, token.line, depth))
                header_start = None
            elif token.text == ";":
                header_start = None

    fragments = []
    for start, end, depth in sorted(spans):
        text = "\n".join(lexed.lines[start - 1:end])
        lines = tuple(normalize(text, level))
        if len(lines) >= min_lines:
            fragments.append(Fragment(start, end, depth, lines))
    return fragments


def lcs_length(a: Sequence[Hashable], b: Sequence[Hashable]) -> int:
    """
    Length of the longest common subsequence of two sequences

    Bit-parallel formulation: one machine word per 64 elements of ``a``,
    one pass over ``b``.
    """
    if not a or not b:
        return 0
    masks: Dict[Hashable, int] = {}
    for position, item in enumerate(a):
        masks[item] = masks.get(item, 0) | (1 << position)
    full = (1 << len(a)) - 1
    row = full
    for item in b:
        matches = row & masks.get(item, 0)
        row = ((row + matches) | (row - matches)) & full
    return len(a) - bin(row).count("1")


def similarity(a: Sequence[str], b: Sequence[str]) -> float:
    """
    Line similarity of two normalized snippets

    Args:
        a: Normalized lines
        b: Normalized lines

    Returns:
        float: |LCS(a, b)| / max(|a|, |b|)
    """
    if not a or not b:
        raise DomainError("Similarity is undefined for an empty snippet")
    return lcs_length(a, b) / max(len(a), len(b))


def _threshold_fraction(threshold: float) -> Fraction:
    return Fraction(repr(threshold))


def _required_overlap(length: int, threshold: Fraction) -> int:
    # ceil(threshold * length) with exact arithmetic
    return -(-threshold.numerator * length // threshold.denominator)


def _occurrence_tokens(lines: Sequence[str]) -> List[Tuple[str, int]]:
    seen: Dict[str, int] = {}
    tokens = []
    for line in lines:
        count = seen.get(line, 0)
        seen[line] = count + 1
        tokens.append((line, count))
    return tokens


@dataclass(frozen=True)
class PairMatch:
    """A detected pair with its exact LCS length and the longer length"""
    a_id: str
    b_id: str
    lcs: int
    length: int

    def to_pair(self) -> ClonePair:
        return ClonePair.of(self.a_id, self.b_id, self.lcs / self.length)


def _detect_items(items_a: Sequence[Item], items_b: Sequence[Item],
                  threshold: Fraction) -> List[PairMatch]:
    """All cross pairs reaching ``threshold``; pruning never drops a qualifying pair"""
    if not items_a or not items_b:
        return []

    tokens_a = [_occurrence_tokens(lines) for _, lines in items_a]
    tokens_b = [_occurrence_tokens(lines) for _, lines in items_b]
    frequency: collections.Counter = collections.Counter()
    for tokens in tokens_a + tokens_b:
        frequency.update(tokens)

    def prefix(tokens: List[Tuple[str, int]]) -> List[Tuple[str, int]]:
        keep = len(tokens) - _required_overlap(len(tokens), threshold) + 1
        if keep <= 0:
            return []
        return sorted(tokens, key=lambda t: (frequency[t], t))[:keep]

    index: Dict[Tuple[str, int], List[int]] = collections.defaultdict(list)
    for position, tokens in enumerate(tokens_b):
        for token in prefix(tokens):
            index[token].append(position)

    bags_b = [collections.Counter(lines) for _, lines in items_b]
    matches = []
    for position_a, (a_id, lines_a) in enumerate(items_a):
        if not lines_a:
            continue
        candidates: Set[int] = set()
        for token in prefix(tokens_a[position_a]):
            candidates.update(index.get(token, ()))
        if not candidates:
            continue
        bag_a = collections.Counter(lines_a)
        for position_b in sorted(candidates):
            b_id, lines_b = items_b[position_b]
            longest = max(len(lines_a), len(lines_b))
            needed = _required_overlap(longest, threshold)
            if min(len(lines_a), len(lines_b)) < needed:
                continue
            if sum((bag_a & bags_b[position_b]).values()) < needed:
                continue
            common = lcs_length(lines_a, lines_b)
            if common >= needed:
                matches.append(PairMatch(a_id, b_id, common, longest))
    return matches


def _items(corpus: Iterable[CodeSnippet]) -> List[Item]:
    return sorted((s.snippet_id, tuple(s.normalized_lines)) for s in corpus)


def detect_cross(corpus_a: Iterable[CodeSnippet], corpus_b: Iterable[CodeSnippet],
                 config: CloneConfig) -> Set[ClonePair]:
    """
    Detect clone pairs between two corpora

    Only pairs with one snippet from each corpus are considered. The
    threshold comparison is inclusive.

    Args:
        corpus_a: Snippets normalized at ``config.normalization_level``
        corpus_b: Snippets normalized at the same level
        config: Clone settings

    Returns:
        Set[ClonePair]: Every pair whose similarity reaches the threshold
    """
    threshold = _threshold_fraction(config.similarity_threshold)
    matches = _detect_items(_items(corpus_a), _items(corpus_b), threshold)
    return {match.to_pair() for match in matches}


@dataclass(frozen=True)
class WorkUnit:
    """One (shard of A, shard of B) combination"""
    unit_id: str
    shard_a: int
    shard_b: int


@dataclass
class ShardPlan:
    """Shards of both corpora and the work units covering every cross pair once"""
    config: CloneConfig
    shards_a: List[List[Item]]
    shards_b: List[List[Item]]
    units: List[WorkUnit] = field(default_factory=list)

    @property
    def signature(self) -> str:
        digest = hashlib.sha256()
        digest.update(repr(sorted(self.config.to_dict().items())).encode("utf-8"))
        for label, shards in (("a", self.shards_a), ("b", self.shards_b)):
            for number, shard in enumerate(shards):
                digest.update(f"{label}{number}:".encode("utf-8"))
                for snippet_id, lines in shard:
                    digest.update(snippet_id.encode("utf-8"))
                    digest.update(hashlib.sha256("\n".join(lines).encode("utf-8")).digest())
        return digest.hexdigest()

    def describe(self) -> Dict[str, object]:
        return {
            "signature": self.signature,
            "shard_sizes_a": [len(shard) for shard in self.shards_a],
            "shard_sizes_b": [len(shard) for shard in self.shards_b],
            "units": [unit.unit_id for unit in self.units],
        }


def plan_shards(corpus_a: Iterable[CodeSnippet], corpus_b: Iterable[CodeSnippet],
                config: CloneConfig) -> ShardPlan:
    """
    Split both corpora into shards and pair every shard of A with every shard of B

    Snippets are sorted by id before chunking, so plans are deterministic.
    """
    shards_a = chunk_list(_items(corpus_a), config.shard_size_a)
    shards_b = chunk_list(_items(corpus_b), config.shard_size_b)
    width_a = max(4, len(str(len(shards_a))))
    width_b = max(4, len(str(len(shards_b))))
    units = [
        WorkUnit(f"u{i:0{width_a}d}-{j:0{width_b}d}", i, j)
        for i in range(len(shards_a))
        for j in range(len(shards_b))
    ]
    return ShardPlan(config, shards_a, shards_b, units)


_worker_plan: Optional[ShardPlan] = None


def _init_worker(plan: ShardPlan) -> None:
    global _worker_plan
    _worker_plan = plan


def _execute_unit(plan: ShardPlan, unit: WorkUnit) -> List[PairMatch]:
    threshold = _threshold_fraction(plan.config.similarity_threshold)
    return _detect_items(plan.shards_a[unit.shard_a], plan.shards_b[unit.shard_b], threshold)


def _run_unit(unit: WorkUnit) -> Tuple[WorkUnit, List[PairMatch], Optional[str]]:
    try:
        return unit, _execute_unit(_worker_plan, unit), None
    except Exception as exc:  # reported back and retried by the parent
        return unit, [], f"{type(exc).__name__}: {exc}"


def _write_unit(path: Path, matches: List[PairMatch]) -> None:
    records = []
    for match in sorted(matches, key=lambda m: m.to_pair()):
        pair = match.to_pair()
        record = pair.to_dict()
        record.update({"lcs": match.lcs, "length": match.length})
        records.append(record)
    write_jsonl(path, records)


def _read_unit(path: Path) -> Set[ClonePair]:
    pairs = set()
    for record in read_jsonl(path):
        if "lcs" in record:
            pairs.add(ClonePair(record["left"], record["right"],
                                int(record["lcs"]) / int(record["length"])))
        else:
            pairs.add(ClonePair.from_dict(record))
    return pairs


def run_sharded(plan: ShardPlan, workers: int = 1, out_dir: Optional[Path] = None,
                max_retries: int = 2, show_progress: bool = False) -> Set[ClonePair]:
    """
    Execute every work unit of a plan and merge their results

    With ``out_dir`` each unit writes ``units/<unit_id>.jsonl`` and the run
    state is kept in ``run_manifest.json``; a later call with the same plan
    skips the units already done. Failed units are re-queued up to
    ``max_retries`` times.

    Args:
        plan: Output of ``plan_shards``
        workers: Process pool width (1 runs in-process)
        out_dir: Directory for unit files and the manifest
        max_retries: Retries per failed unit
        show_progress: Display a progress bar

    Returns:
        Set[ClonePair]: Union of all unit results

    Raises:
        IncompleteShardsError: Units still failing after the retries; the
            merged result of the completed units is attached as ``partial``
    """
    unit_dir = None
    manifest_path = None
    status: Dict[str, Dict[str, object]] = {}
    if out_dir is not None:
        out_dir = Path(out_dir)
        unit_dir = out_dir / "units"
        unit_dir.mkdir(parents=True, exist_ok=True)
        manifest_path = out_dir / "run_manifest.json"
        status = _resumable_status(manifest_path, plan, unit_dir)

    results: Dict[str, Set[ClonePair]] = {}
    attempts: Dict[str, int] = collections.Counter()
    errors: Dict[str, str] = {}
    pending = [unit for unit in plan.units if status.get(unit.unit_id, {}).get("status") != "done"]
    skipped = len(plan.units) - len(pending)
    if skipped:
        logger.info("Resuming run: %d of %d units already done", skipped, len(plan.units))

    pool = None
    if workers > 1 and len(pending) > 1:
        pool = multiprocessing.Pool(processes=workers, initializer=_init_worker, initargs=(plan,))
    else:
        _init_worker(plan)

    try:
        while pending:
            failed = []
            outcomes = pool.imap_unordered(_run_unit, pending) if pool else map(_run_unit, pending)
            for unit, matches, error in progress(outcomes, "clone units", show_progress,
                                                 total=len(pending), unit="unit"):
                attempts[unit.unit_id] += 1
                if error is not None:
                    errors[unit.unit_id] = error
                    logger.warning("Work unit %s failed (attempt %d): %s",
                                   unit.unit_id, attempts[unit.unit_id], error)
                    if attempts[unit.unit_id] <= max_retries:
                        failed.append(unit)
                    status[unit.unit_id] = {"status": "failed",
                                            "attempts": attempts[unit.unit_id], "error": error}
                    continue
                errors.pop(unit.unit_id, None)
                if unit_dir is not None:
                    _write_unit(unit_dir / f"{unit.unit_id}.jsonl", matches)
                results[unit.unit_id] = {match.to_pair() for match in matches}
                status[unit.unit_id] = {"status": "done", "attempts": attempts[unit.unit_id],
                                        "pairs": len(matches)}
            pending = sorted(failed, key=lambda u: u.unit_id)
    finally:
        if pool is not None:
            pool.close()
            pool.join()

    if manifest_path is not None:
        write_json(manifest_path, {
            "config": plan.config.to_dict(),
            "plan": plan.describe(),
            "units": {unit.unit_id: status.get(unit.unit_id, {"status": "pending"})
                      for unit in plan.units},
        })

    merged: Set[ClonePair] = set()
    incomplete = []
    for unit in sorted(plan.units, key=lambda u: u.unit_id):
        if status.get(unit.unit_id, {}).get("status") != "done":
            incomplete.append(unit.unit_id)
            continue
        if unit_dir is not None:
            merged |= _read_unit(unit_dir / f"{unit.unit_id}.jsonl")
        else:
            merged |= results[unit.unit_id]

    if incomplete:
        raise IncompleteShardsError(incomplete, [errors[u] for u in incomplete if u in errors],
                                    partial=merged)
    return merged


def _resumable_status(manifest_path: Path, plan: ShardPlan,
                      unit_dir: Path) -> Dict[str, Dict[str, object]]:
    if not manifest_path.exists():
        return {}
    manifest = read_json(manifest_path)
    if manifest.get("plan", {}).get("signature") != plan.signature:
        logger.info("Existing run manifest belongs to another plan; starting over")
        return {}
    status = {}
    for unit_id, entry in manifest.get("units", {}).items():
        if entry.get("status") == "done" and (unit_dir / f"{unit_id}.jsonl").exists():
            status[unit_id] = entry
    return status


class DisjointSet(Generic[T]):
    """Union-find with path compression and union by rank"""

    def __init__(self):
        self.parent: Dict[T, T] = {}
        self.rank: Dict[T, int] = {}

    def make_set(self, e: T) -> None:
        if e in self.parent:
            return
        self.parent[e] = e
        self.rank[e] = 0

    def find(self, e: T) -> T:
        self.make_set(e)
        root = e
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[e] != root:
            self.parent[e], e = root, self.parent[e]
        return root

    def union(self, x: T, y: T) -> None:
        x_root = self.find(x)
        y_root = self.find(y)
        if x_root == y_root:
            return
        if self.rank[x_root] < self.rank[y_root]:
            x_root, y_root = y_root, x_root
        self.parent[y_root] = x_root
        if self.rank[x_root] == self.rank[y_root]:
            self.rank[x_root] += 1

    def sets(self) -> List[List[T]]:
        groups: Dict[T, List[T]] = collections.defaultdict(list)
        for e in self.parent:
            groups[self.find(e)].append(e)
        return list(groups.values())


def group_classes(pairs: Iterable[ClonePair],
                  dates: Mapping[str, Optional[datetime]]) -> List[CloneClass]:
    """
    Group clone pairs into clone classes

    Args:
        pairs: Clone pairs
        dates: Creation instant per snippet id, ``None`` when unknown

    Returns:
        List[CloneClass]: Connected components of the pair graph, ordered by
        their smallest member; the representative is the earliest dated
        member (ties and undated classes fall back to id order)
    """
    components: DisjointSet[str] = DisjointSet()
    for pair in pairs:
        components.union(pair.left, pair.right)

    groups = sorted(sorted(group) for group in components.sets())
    classes = []
    for ordinal, members in enumerate(groups, start=1):
        dated = [(dates[m], m) for m in members if dates.get(m) is not None]
        representative = min(dated)[1] if dated else members[0]
        classes.append(CloneClass(f"C{ordinal:05d}", tuple(members), representative))
    return classes


def write_snippets(path: Path, snippets: Iterable[CodeSnippet]) -> int:
    """Write a snippet corpus as JSON lines, ordered by snippet id"""
    return write_jsonl(path, (s.to_dict() for s in sorted(snippets, key=lambda s: s.snippet_id)))


def read_snippets(path: Path) -> List[CodeSnippet]:
    return [CodeSnippet.from_dict(record) for record in read_jsonl(path)]
