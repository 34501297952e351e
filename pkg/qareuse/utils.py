"""
A collection of utility functions shared by the pipeline stages.

This module provides tools to split corpora into fixed-size chunks, parse and
format UTC timestamps, read and write JSON lines files deterministically,
run a producer on a background thread behind a bounded queue, and print
summary tables.
"""

import json
import math
import queue
import re
import statistics
import threading
from datetime import datetime, timezone
from pathlib import Path
from typing import (
    IO, Any, Callable, Dict, Iterable, Iterator, List, Optional, Sequence, TypeVar, Union
)

from tabulate import tabulate
from tqdm import tqdm

T = TypeVar('T')

PathLike = Union[str, Path]

_FRACTION = re.compile(r"\.(\d+)(?=$|[+-])")

# how often a producer blocked on a full queue checks for a stopped consumer
_PUT_POLL_SECONDS = 0.1


def chunk_list(items: Sequence[T], chunk_size: int) -> List[List[T]]:
    """
    Split list into fixed-size chunks

    Args:
        items: List to split
        chunk_size: Size of each chunk

    Returns:
        List[List[T]]: List of chunks, the last one possibly shorter
    """
    if chunk_size <= 0:
        raise ValueError("Chunk size must be greater than 0")

    return [list(items[i:i + chunk_size]) for i in range(0, len(items), chunk_size)]


def count_chunks(total_items: int, chunk_size: int) -> int:
    """Number of chunks ``chunk_list`` produces for ``total_items`` items"""
    if total_items <= 0:
        return 0
    return math.ceil(total_items / chunk_size)


def prefetch(items: Iterable[T], maxsize: int = 1024) -> Iterator[T]:
    """
    Iterate ``items`` on a background thread behind a bounded queue

    The producer blocks when ``maxsize`` values are waiting, so memory stays
    bounded whatever the length of ``items``. Exceptions raised by the
    producer are re-raised in the consumer. When the consumer stops early the
    producer is released and ``items`` is closed before this generator exits.

    Args:
        items: Iterable to drain on the producer thread
        maxsize: Queue capacity

    Yields:
        T: The values of ``items``, in order
    """
    buffer: "queue.Queue[Any]" = queue.Queue(maxsize=max(1, maxsize))
    done = object()
    stop = threading.Event()

    def offer(entry: Any) -> bool:
        while not stop.is_set():
            try:
                buffer.put(entry, timeout=_PUT_POLL_SECONDS)
                return True
            except queue.Full:
                continue
        return False

    def produce() -> None:
        iterator = iter(items)
        try:
            for item in iterator:
                if not offer(("item", item)):
                    return
            offer(("done", done))
        except BaseException as exc:  # re-raised on the consumer side
            offer(("error", exc))
        finally:
            close = getattr(iterator, "close", None)
            if close is not None:
                close()

    worker = threading.Thread(target=produce, name="qareuse-prefetch", daemon=True)
    worker.start()
    try:
        while True:
            kind, value = buffer.get()
            if kind == "done":
                break
            if kind == "error":
                raise value
            yield value
    finally:
        stop.set()
        worker.join()


def parse_datetime(dt_str: Optional[str]) -> Optional[datetime]:
    """
    Parse an ISO 8601 date-time string into an aware UTC ``datetime``.

    A trailing ``Z`` is accepted, and values without an offset are taken to be
    UTC, which is how the Stack Exchange dumps write them. Invalid or empty
    input returns ``None``.

    :param dt_str: The date-time string to be parsed
    :type dt_str: Optional[str]
    :return: The parsed instant, or ``None``
    :rtype: Optional[datetime]
    """
    if not dt_str:
        return None
    try:
        text = _FRACTION.sub(_pad_fraction, dt_str.strip().replace('Z', '+00:00'))
        value = datetime.fromisoformat(text)
    except (ValueError, AttributeError):
        return None
    if value.tzinfo is None:
        return value.replace(tzinfo=timezone.utc)
    return value.astimezone(timezone.utc)


def _pad_fraction(match: "re.Match") -> str:
    # fromisoformat only takes 3 or 6 fractional digits before Python 3.11
    return "." + match.group(1)[:6].ljust(6, "0")


def format_datetime(value: Optional[datetime]) -> Optional[str]:
    """Format an instant as ``YYYY-MM-DDTHH:MM:SSZ`` (UTC, second precision)"""
    if value is None:
        return None
    if value.tzinfo is not None:
        value = value.astimezone(timezone.utc)
    return value.strftime("%Y-%m-%dT%H:%M:%SZ")


def format_datetime_exact(value: datetime) -> str:
    """Format an instant keeping sub-second precision, as the dumps do"""
    value = value.astimezone(timezone.utc).replace(tzinfo=None)
    return value.isoformat()


def from_timestamp(seconds: float) -> datetime:
    """Aware UTC datetime from a POSIX timestamp"""
    return datetime.fromtimestamp(seconds, tz=timezone.utc)


def whole_days(start: datetime, end: datetime) -> int:
    """Floor of ``end - start`` in days"""
    return math.floor((end - start).total_seconds() / 86400)


def median(values: Sequence[float]) -> Optional[float]:
    """Median of ``values``, or ``None`` for an empty sequence"""
    if not values:
        return None
    return statistics.median(values)


class JsonlWriter:
    """
    Append records to a JSON lines file one at a time, with sorted keys

    :ivar path: File being written
    :ivar count: Records written so far
    """

    def __init__(self, path: PathLike):
        self.path = Path(path)
        self.count = 0
        self._handle: Optional[IO[str]] = None

    def __enter__(self) -> 'JsonlWriter':
        self._handle = open(self.path, "w", encoding="utf-8", newline="\n")
        return self

    def __exit__(self, *exc_info: Any) -> None:
        if self._handle is not None:
            self._handle.close()
            self._handle = None

    def write(self, record: Dict[str, Any]) -> None:
        if self._handle is None:
            raise ValueError(f"{self.path} is not open for writing")
        self._handle.write(json.dumps(record, sort_keys=True, ensure_ascii=False))
        self._handle.write("\n")
        self.count += 1


def write_jsonl(path: PathLike, records: Iterable[Dict[str, Any]]) -> int:
    """
    Write records as JSON lines with sorted keys

    Returns:
        int: Number of records written
    """
    with JsonlWriter(path) as writer:
        for record in records:
            writer.write(record)
    return writer.count


def read_jsonl(path: PathLike) -> Iterator[Dict[str, Any]]:
    """Yield the records of a JSON lines file, skipping blank lines"""
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                yield json.loads(line)


def write_json(path: PathLike, document: Any) -> None:
    """Write a JSON document deterministically (sorted keys, 2-space indent)"""
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(dumps_json(document))


def dumps_json(document: Any) -> str:
    return json.dumps(document, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def read_json(path: PathLike) -> Any:
    with open(path, "r", encoding="utf-8") as handle:
        return json.load(handle)


def progress(items: Iterable[T], desc: str, enabled: bool = True,
             total: Optional[int] = None, unit: str = "it") -> Iterable[T]:
    """Wrap ``items`` in a tqdm progress bar when ``enabled``"""
    if not enabled:
        return items
    return tqdm(items, desc=desc, total=total, unit=unit, leave=False)


def format_table(rows: List[List[Any]], headers: List[str]) -> str:
    """Render rows as a grid table"""
    return tabulate(rows, headers=headers, tablefmt="grid")


def print_table(title: str, rows: List[List[Any]], headers: List[str],
                echo: Callable[[str], Any] = print) -> None:
    """Print a titled grid table, as the stage summaries do"""
    echo(title)
    echo(format_table(rows, headers))
