"""
Q&A dump ingestion.

Stream-parses a Stack Exchange ``Posts.xml`` dump, keeps the posts carrying
the studied tags, and extracts the code blocks of their bodies into a
snippet corpus. The parser runs in one forward pass and clears every row
element once it has been read, so memory does not grow with the dump.
"""

import html
import logging
import re
from dataclasses import dataclass, replace
from datetime import datetime
from pathlib import Path
from typing import (
    IO, Any, Dict, Iterable, Iterator, List, Optional, Set, Tuple, Union
)

from lxml import etree

from .clone_engine import normalize, read_snippets
from .exceptions import ConfigurationError, DumpParseError
from .models import CodeSnippet, NormalizationLevel, Post, QAPostOrigin, qa_snippet_id
from .utils import (
    JsonlWriter, format_datetime_exact, parse_datetime, prefetch, read_jsonl
)

logger = logging.getLogger(__name__)

CODE_BLOCK = re.compile(
    r"<pre\b[^>]*>\s*<code\b[^>]*>(.+?)</code>\s*</pre>", re.DOTALL | re.IGNORECASE
)
_ANGLE_TAGS = re.compile(r"<([^<>]+)>")

SNIPPETS_FILE = "snippets.jsonl"
INDEX_FILE = "index.jsonl"
POSTS_FILE = "posts.jsonl"


@dataclass
class ParseStats:
    """Counters collected while ingesting a dump"""
    rows: int = 0
    posts: int = 0
    skipped_missing: int = 0
    skipped_bad_date: int = 0
    filtered_out: int = 0
    kept: int = 0
    blocks: int = 0
    snippets: int = 0

    def to_dict(self) -> Dict[str, int]:
        return dict(self.__dict__)


class _CountingReader:
    """File-like wrapper tracking how many bytes the parser consumed"""

    def __init__(self, stream: IO[bytes]):
        self.stream = stream
        self.offset = 0

    def read(self, size: int = -1) -> bytes:
        data = self.stream.read(size)
        self.offset += len(data)
        return data


def parse_tags(value: Optional[str]) -> frozenset:
    """Parse ``<java><android>`` or ``|java|android|`` into lowercase tags"""
    if not value:
        return frozenset()
    if "<" in value:
        tags = _ANGLE_TAGS.findall(value)
    else:
        tags = value.split("|")
    return frozenset(tag.strip().lower() for tag in tags if tag.strip())


def _optional_int(value: Optional[str]) -> Optional[int]:
    if value is None or value == "":
        return None
    try:
        return int(value)
    except ValueError:
        return None


def _row_to_post(attrib: Any, stats: ParseStats) -> Optional[Post]:
    post_id = _optional_int(attrib.get("Id"))
    body = attrib.get("Body")
    created = attrib.get("CreationDate")
    if post_id is None or body is None or not created:
        stats.skipped_missing += 1
        return None

    creation_date = parse_datetime(created)
    if creation_date is None:
        stats.skipped_bad_date += 1
        logger.warning("Skipping post %s: unparseable CreationDate %r", post_id, created)
        return None

    return Post(
        id=post_id,
        creation_date=creation_date,
        tags=parse_tags(attrib.get("Tags")),
        body_html=body,
        post_type=_optional_int(attrib.get("PostTypeId")),
        parent_id=_optional_int(attrib.get("ParentId")),
        owner_display_name=attrib.get("OwnerDisplayName"),
    )


def parse_dump(dump_stream: IO[bytes], stats: Optional[ParseStats] = None) -> Iterator[Post]:
    """
    Stream the posts of a dump

    Args:
        dump_stream: Binary stream of the posts XML file
        stats: Counters to update (rows, posts, skipped rows)

    Yields:
        Post: One post per row carrying Id, CreationDate and Body

    Raises:
        DumpParseError: The stream is not well-formed XML
    """
    stats = stats if stats is not None else ParseStats()
    reader = _CountingReader(dump_stream)
    context = etree.iterparse(reader, events=("end",), tag="row", huge_tree=True)
    try:
        for _, element in context:
            stats.rows += 1
            post = _row_to_post(element.attrib, stats)
            element.clear()
            while element.getprevious() is not None:
                del element.getparent()[0]
            if post is not None:
                stats.posts += 1
                yield post
    except etree.XMLSyntaxError as exc:
        line, column = exc.position
        raise DumpParseError(f"Malformed dump XML: {exc.msg}", byte_offset=reader.offset,
                             line=line, column=column) from exc


def _post_attributes(post: Post) -> Dict[str, str]:
    attributes = {"Id": str(post.id)}
    if post.post_type is not None:
        attributes["PostTypeId"] = str(post.post_type)
    if post.parent_id is not None:
        attributes["ParentId"] = str(post.parent_id)
    attributes["CreationDate"] = format_datetime_exact(post.creation_date)
    if post.tags:
        attributes["Tags"] = "".join(f"<{tag}>" for tag in sorted(post.tags))
    attributes["Body"] = post.body_html
    if post.owner_display_name is not None:
        attributes["OwnerDisplayName"] = post.owner_display_name
    return attributes


def write_dump(posts: Iterable[Post], stream: IO[bytes]) -> int:
    """
    Serialize posts as a dump file

    Returns:
        int: Number of rows written
    """
    count = 0
    with etree.xmlfile(stream, encoding="utf-8") as xf:
        xf.write_declaration()
        with xf.element("posts"):
            for post in posts:
                xf.write("\n  ")
                xf.write(etree.Element("row", attrib=_post_attributes(post)))
                count += 1
            xf.write("\n")
    return count


def filter_posts(posts: Iterable[Post], required_tags: Set[str],
                 date_ceiling: Optional[datetime] = None,
                 inherit_question_tags: bool = False,
                 stats: Optional[ParseStats] = None) -> Iterator[Post]:
    """
    Keep posts carrying one of the required tags, created no later than the ceiling

    Answers have no tags of their own in the dumps. With
    ``inherit_question_tags`` they take the tags of their question, provided
    the question was seen earlier in the stream; otherwise they are matched
    on their own (usually empty) tag set. Only then does the filter keep
    state, one entry per kept question; otherwise it holds nothing between
    posts.

    Args:
        posts: Posts in dump order
        required_tags: Tags of interest (at least one)
        date_ceiling: Latest creation instant kept, or ``None``
        inherit_question_tags: Let answers inherit question tags
        stats: Counters to update

    Yields:
        Post: The accepted posts, with inherited tags applied
    """
    required = {tag.lower() for tag in required_tags}
    if not required:
        raise ConfigurationError("At least one required tag is needed")
    stats = stats if stats is not None else ParseStats()
    # kept question id -> its tag set, shared between questions with equal tags
    question_tags: Dict[int, frozenset] = {}
    tag_sets: Dict[frozenset, frozenset] = {}

    for post in posts:
        if (inherit_question_tags and post.is_answer and not post.tags
                and post.parent_id in question_tags):
            post = replace(post, tags=question_tags[post.parent_id])

        if date_ceiling is not None and post.creation_date > date_ceiling:
            stats.filtered_out += 1
            continue
        if not post.tags & required:
            stats.filtered_out += 1
            continue

        if inherit_question_tags and post.is_question:
            question_tags[post.id] = tag_sets.setdefault(post.tags, post.tags)
        stats.kept += 1
        yield post


def count_code_lines(text: str) -> int:
    """Lines that are not empty once trailing whitespace is trimmed"""
    return sum(1 for line in text.splitlines() if line.rstrip())


def extract_snippets(post: Post, min_lines: int = 10,
                     level: NormalizationLevel = NormalizationLevel.TYPE2,
                     stats: Optional[ParseStats] = None) -> List[CodeSnippet]:
    """
    Extract the code blocks of a post

    Only ``<pre><code>`` blocks are considered; inline code spans are not.
    ``block_index`` counts every block of the body in document order,
    including the ones discarded for being too short.

    Args:
        post: Post whose body has had its XML entities decoded
        min_lines: Minimum number of non-empty lines, raw and normalized
        level: Normalization level of the snippet lines
        stats: Counters to update

    Returns:
        List[CodeSnippet]: Admitted snippets in document order
    """
    if min_lines < 1:
        raise ConfigurationError("Minimum lines must be at least 1")
    snippets = []
    for block_index, match in enumerate(CODE_BLOCK.finditer(post.body_html)):
        if stats is not None:
            stats.blocks += 1
        text = html.unescape(match.group(1))
        if count_code_lines(text) < min_lines:
            continue
        lines = tuple(normalize(text, level))
        if len(lines) < min_lines:
            continue
        snippets.append(CodeSnippet(
            snippet_id=qa_snippet_id(post.id, block_index),
            origin=QAPostOrigin(post.id, block_index, post.post_type, post.owner_display_name),
            raw_text=text,
            normalized_lines=lines,
            created_at=post.creation_date,
        ))
    if stats is not None:
        stats.snippets += len(snippets)
    return snippets


def ingest_posts(dump_stream: IO[bytes], required_tags: Set[str],
                 date_ceiling: Optional[datetime] = None, min_lines: int = 10,
                 level: NormalizationLevel = NormalizationLevel.TYPE2,
                 inherit_question_tags: bool = False, queue_size: int = 1024,
                 stats: Optional[ParseStats] = None
                 ) -> Iterator[Tuple[Post, List[CodeSnippet]]]:
    """
    Parse, filter and extract in one pass

    The XML parser runs on a background thread feeding a bounded queue.

    Yields:
        Tuple[Post, List[CodeSnippet]]: Posts that produced at least one snippet
    """
    stats = stats if stats is not None else ParseStats()
    posts = prefetch(parse_dump(dump_stream, stats), maxsize=queue_size)
    accepted = filter_posts(posts, required_tags, date_ceiling, inherit_question_tags, stats)
    for post in accepted:
        snippets = extract_snippets(post, min_lines, level, stats)
        if snippets:
            yield post, snippets


def write_corpus(out_dir: Union[str, Path],
                 items: Iterable[Tuple[Post, List[CodeSnippet]]]) -> int:
    """
    Write a Q&A snippet corpus as the items stream in

    ``snippets.jsonl`` holds one record per snippet, ``index.jsonl`` the
    sidecar metadata (snippet_id, post_id, block_index, creation_date,
    line_count, post_type) and ``posts.jsonl`` the posts that yielded
    snippets. Records keep the order of ``items``, which is dump order when
    they come from ``ingest_posts``.

    Returns:
        int: Number of snippets written
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with JsonlWriter(out_dir / SNIPPETS_FILE) as snippets, \
            JsonlWriter(out_dir / INDEX_FILE) as index, \
            JsonlWriter(out_dir / POSTS_FILE) as posts:
        for post, post_snippets in items:
            posts.write(post.to_dict())
            for snippet in post_snippets:
                snippets.write(snippet.to_dict())
                index.write({
                    "snippet_id": snippet.snippet_id,
                    "post_id": snippet.origin.post_id,
                    "block_index": snippet.origin.block_index,
                    "creation_date": format_datetime_exact(snippet.created_at),
                    "line_count": snippet.line_count,
                    "post_type": snippet.origin.post_type,
                })
    return snippets.count


def read_corpus(corpus_dir: Union[str, Path]) -> List[CodeSnippet]:
    return read_snippets(Path(corpus_dir) / SNIPPETS_FILE)


def read_posts(corpus_dir: Union[str, Path]) -> Dict[int, Post]:
    posts = (Post.from_dict(record) for record in read_jsonl(Path(corpus_dir) / POSTS_FILE))
    return {post.id: post for post in posts}
