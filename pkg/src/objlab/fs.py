"""Paths, the committer's temporary-name grammar, and the connector contract.

Temporary names produced by the Hadoop output committer look like::

    <dataset>/_temporary/0/_temporary/attempt_<ts>_0000_m_<task>_<n>/part-00002

and a rename-free connector stores that part under::

    <dataset>/part-00002_attempt_<ts>_0000_m_<task>_<n>

The job counter ``0000``, the ``m`` marker and the application attempt
``0`` are fixed literals; anything else does not match.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Iterable, Optional, Protocol, runtime_checkable

from objlab.errors import MissingPartError

TEMP_DIR = "_temporary"
APP_ATTEMPT = "0"
SUCCESS_NAME = "_SUCCESS"

_DIGITS = re.compile(r"\d+")
_ATTEMPT_RE = re.compile(r"attempt_(\d+)_0000_m_(\d+)_(0|[1-9]\d*)")
_TASK_RE = re.compile(r"task_(\d+)_0000_m_(\d+)")
_FINAL_RE = re.compile(r"(?P<part>.+)_(?P<attempt>attempt_\d+_0000_m_\d+_(?:0|[1-9]\d*))")


@dataclass(frozen=True)
class FsPath:
    scheme: str
    container: str
    segments: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        if not self.container or "/" in self.container:
            raise ValueError(f"bad container {self.container!r}")
        if any(not s or "/" in s for s in self.segments):
            raise ValueError(f"empty or nested segment in {self.segments!r}")

    @classmethod
    def parse(cls, text: str) -> "FsPath":
        """Accepts ``scheme://container/a/b`` and ``/container/a/b``."""
        if "://" in text:
            scheme, rest = text.split("://", 1)
        elif text.startswith("/"):
            scheme, rest = "", text[1:]
        else:
            raise ValueError(f"not an absolute path: {text!r}")
        if rest.endswith("/"):
            rest = rest[:-1]
        parts = rest.split("/")
        return cls(scheme, parts[0], tuple(parts[1:]))

    def __str__(self) -> str:
        tail = "".join("/" + s for s in self.segments)
        if self.scheme:
            return f"{self.scheme}://{self.container}{tail}"
        return f"/{self.container}{tail}"

    @property
    def key(self) -> str:
        """Object name inside the container ("" for the container root)."""
        return "/".join(self.segments)

    @property
    def name(self) -> str:
        return self.segments[-1] if self.segments else ""

    @property
    def parent(self) -> "FsPath":
        if not self.segments:
            raise ValueError("container root has no parent")
        return FsPath(self.scheme, self.container, self.segments[:-1])

    def child(self, *names: str) -> "FsPath":
        return FsPath(self.scheme, self.container, self.segments + tuple(names))

    def with_key(self, key: str) -> "FsPath":
        return FsPath(self.scheme, self.container, tuple(key.split("/")) if key else ())


@dataclass(frozen=True, order=True)
class TaskId:
    job_timestamp: str
    task_number: str

    def __post_init__(self):
        if not _DIGITS.fullmatch(self.job_timestamp) or not _DIGITS.fullmatch(self.task_number):
            raise ValueError(f"non-numeric task id fields {self!r}")

    def render(self) -> str:
        return f"task_{self.job_timestamp}_0000_m_{self.task_number}"

    def attempt(self, n: int) -> "AttemptId":
        return AttemptId(self.job_timestamp, self.task_number, n)


@dataclass(frozen=True, order=True)
class AttemptId:
    job_timestamp: str
    task_number: str
    attempt_number: int

    def __post_init__(self):
        if not _DIGITS.fullmatch(self.job_timestamp) or not _DIGITS.fullmatch(self.task_number):
            raise ValueError(f"non-numeric attempt id fields {self!r}")
        if self.attempt_number < 0:
            raise ValueError("attempt number must be >= 0")

    @property
    def task(self) -> TaskId:
        return TaskId(self.job_timestamp, self.task_number)

    def render(self) -> str:
        return f"attempt_{self.job_timestamp}_0000_m_{self.task_number}_{self.attempt_number}"

    @classmethod
    def parse(cls, text: str) -> Optional["AttemptId"]:
        m = _ATTEMPT_RE.fullmatch(text)
        if m is None:
            return None
        return cls(m.group(1), m.group(2), int(m.group(3)))


class TempDepth(enum.Enum):
    TEMP_ROOT = "temp-root"          # <ds>/_temporary
    JOB_TEMP = "job-temp"            # <ds>/_temporary/0
    ATTEMPT_ROOT = "attempt-root"    # <ds>/_temporary/0/_temporary
    ATTEMPT_DIR = "attempt-dir"      # .../_temporary/attempt_...
    ATTEMPT_PART = "attempt-part"    # .../_temporary/attempt_.../<part>
    TASK_DIR = "task-dir"            # <ds>/_temporary/0/task_...
    TASK_PART = "task-part"          # <ds>/_temporary/0/task_.../<part>


_PART_DEPTHS = (TempDepth.ATTEMPT_PART, TempDepth.TASK_PART)


@dataclass(frozen=True)
class TempPathMatch:
    dataset: FsPath
    depth: TempDepth
    task: Optional[TaskId] = None
    attempt: Optional[AttemptId] = None
    part: Optional[str] = None

    def __post_init__(self):
        if (self.part is not None) != (self.depth in _PART_DEPTHS):
            raise ValueError(f"part must be set exactly at part depth, got {self!r}")
        needs_attempt = self.depth in (TempDepth.ATTEMPT_DIR, TempDepth.ATTEMPT_PART)
        if needs_attempt != (self.attempt is not None):
            raise ValueError(f"attempt must be set exactly at attempt depth, got {self!r}")
        if self.attempt is not None and self.task is None:
            object.__setattr__(self, "task", self.attempt.task)

    @property
    def is_part(self) -> bool:
        return self.part is not None

    def render(self) -> FsPath:
        tail = [TEMP_DIR]
        if self.depth is not TempDepth.TEMP_ROOT:
            tail.append(APP_ATTEMPT)
        if self.depth in (TempDepth.ATTEMPT_ROOT, TempDepth.ATTEMPT_DIR, TempDepth.ATTEMPT_PART):
            tail.append(TEMP_DIR)
        if self.attempt is not None:
            tail.append(self.attempt.render())
        elif self.depth in (TempDepth.TASK_DIR, TempDepth.TASK_PART):
            tail.append(self.task.render())
        if self.part is not None:
            tail.append(self.part)
        return self.dataset.child(*tail)


def match_temp_pattern(path: FsPath) -> Optional[TempPathMatch]:
    segs = path.segments
    try:
        i = segs.index(TEMP_DIR)
    except ValueError:
        return None
    dataset = FsPath(path.scheme, path.container, segs[:i])
    rest = segs[i + 1:]
    if not rest:
        return TempPathMatch(dataset, TempDepth.TEMP_ROOT)
    if rest[0] != APP_ATTEMPT:
        return None
    rest = rest[1:]
    if not rest:
        return TempPathMatch(dataset, TempDepth.JOB_TEMP)
    if rest[0] == TEMP_DIR:
        if len(rest) == 1:
            return TempPathMatch(dataset, TempDepth.ATTEMPT_ROOT)
        attempt = AttemptId.parse(rest[1])
        if attempt is None or len(rest) > 3:
            return None
        if len(rest) == 2:
            return TempPathMatch(dataset, TempDepth.ATTEMPT_DIR, attempt=attempt)
        return TempPathMatch(dataset, TempDepth.ATTEMPT_PART, attempt=attempt, part=rest[2])
    m = _TASK_RE.fullmatch(rest[0])
    if m is None or len(rest) > 2:
        return None
    task = TaskId(m.group(1), m.group(2))
    if len(rest) == 1:
        return TempPathMatch(dataset, TempDepth.TASK_DIR, task=task)
    return TempPathMatch(dataset, TempDepth.TASK_PART, task=task, part=rest[1])


def final_name_for(match: TempPathMatch) -> FsPath:
    if match.part is None or match.attempt is None:
        raise MissingPartError(f"no part/attempt at depth {match.depth.value}")
    return match.dataset.child(f"{match.part}_{match.attempt.render()}")


@dataclass(frozen=True)
class PartName:
    part: str
    attempt: Optional[AttemptId]


def is_hidden(name: str) -> bool:
    return name.startswith("_") or name.startswith(".")


def is_success_marker(name: str) -> bool:
    return name == SUCCESS_NAME


def parse_final_name(name: str) -> Optional[PartName]:
    """Split ``part-00002_attempt_..._1`` into its part and attempt.

    Hidden names (``_SUCCESS``, ``.crc`` files) are not parts and yield None;
    names without an attempt suffix come back whole with ``attempt=None``.
    """
    if is_hidden(name):
        return None
    m = _FINAL_RE.fullmatch(name)
    if m is None:
        return PartName(name, None)
    return PartName(m.group("part"), AttemptId.parse(m.group("attempt")))


def part_index(part: str) -> Optional[int]:
    """``part-00002`` -> 2."""
    if part.startswith("part-") and part[5:].isdigit():
        return int(part[5:])
    return None


def part_name(index: int) -> str:
    return f"part-{index:05d}"


@dataclass(frozen=True)
class FileStatus:
    path: FsPath
    length: int
    is_directory: bool
    modification_tick: int = 0

    def __post_init__(self):
        if self.is_directory and self.length != 0:
            raise ValueError("directories have length 0")


class OutputStream(Protocol):
    def write(self, data: bytes) -> int: ...
    def close(self) -> None: ...
    def abort(self) -> None: ...


@runtime_checkable
class FsContract(Protocol):
    """The subset of the Hadoop FileSystem API the engine drives."""

    rename_free: bool

    def exists(self, path: FsPath) -> bool: ...
    def open(self, path: FsPath) -> "InputStream": ...
    def create(self, path: FsPath, overwrite: bool = False, permission=None,
               buffer_size=None, replication=None, block_size=None,
               progress=None) -> OutputStream: ...
    def rename(self, src: FsPath, dst: FsPath) -> bool: ...
    def delete(self, path: FsPath, recursive: bool = False) -> bool: ...
    def list_status(self, path: FsPath) -> list[FileStatus]: ...
    def mkdirs(self, path: FsPath) -> bool: ...
    def get_file_status(self, path: FsPath) -> FileStatus: ...


class InputStream:
    """Bytes already fetched by a GET, exposed as a readable stream."""

    def __init__(self, path: FsPath, data: bytes, metadata=None):
        self.path = path
        self._data = data
        self._pos = 0
        self.metadata = dict(metadata or {})

    def __len__(self) -> int:
        return len(self._data)

    def read(self, n: int = -1) -> bytes:
        if n is None or n < 0:
            n = len(self._data) - self._pos
        out = self._data[self._pos:self._pos + n]
        self._pos += len(out)
        return out

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def ancestors(path: FsPath) -> Iterable[FsPath]:
    """path, its parent, ... down to (excluding) the container root."""
    p = path
    while p.segments:
        yield p
        p = p.parent
