"""In-memory object store with metered REST-style operations.

The store keeps a logical clock. Container listings lag behind creates and
deletes by a configurable number of ticks; GET/HEAD on a key are strongly
consistent unless ``read_after_write_strong`` is switched off, in which case
fresh creates become readable only once they are listing-visible.
"""

from __future__ import annotations

import dataclasses
import enum
import json
from collections import Counter
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import IO, Iterable, Iterator, Mapping, Optional

from objlab.errors import NotFoundError, StoreClosedError, UsageError


class RestOp(str, enum.Enum):
    PUT_OBJECT = "PutObject"
    GET_OBJECT = "GetObject"
    HEAD_OBJECT = "HeadObject"
    GET_CONTAINER = "GetContainer"
    HEAD_CONTAINER = "HeadContainer"
    DELETE_OBJECT = "DeleteObject"
    COPY_OBJECT = "CopyObject"

    @property
    def verb(self) -> str:
        return _VERBS[self]


_VERBS = {
    RestOp.PUT_OBJECT: "PUT",
    RestOp.GET_OBJECT: "GET",
    RestOp.HEAD_OBJECT: "HEAD",
    RestOp.GET_CONTAINER: "GET",
    RestOp.HEAD_CONTAINER: "HEAD",
    RestOp.DELETE_OBJECT: "DELETE",
    RestOp.COPY_OBJECT: "COPY",
}


@dataclass(frozen=True, order=True)
class ObjectKey:
    container: str
    name: str

    def __post_init__(self):
        if not self.container:
            raise ValueError("container must be non-empty")
        if not self.name:
            raise ValueError("object name must be non-empty")

    def __str__(self) -> str:
        return f"/{self.container}/{self.name}"


@dataclass(frozen=True)
class StoredObject:
    key: ObjectKey
    data: bytes
    metadata: Mapping[str, str]
    created_at: int
    deleted_at: Optional[int] = None

    def __post_init__(self):
        if not isinstance(self.metadata, MappingProxyType):
            object.__setattr__(self, "metadata", MappingProxyType(dict(self.metadata)))
        if self.deleted_at is not None and self.deleted_at < self.created_at:
            raise ValueError("deleted_at precedes created_at")

    @property
    def length(self) -> int:
        return len(self.data)


@dataclass(frozen=True)
class ConsistencyPolicy:
    create_listing_lag: int = 0
    delete_listing_lag: int = 0
    read_after_write_strong: bool = True

    def __post_init__(self):
        if self.create_listing_lag < 0 or self.delete_listing_lag < 0:
            raise ValueError("listing lags must be >= 0")


@dataclass
class OpTally:
    counts: Counter = field(default_factory=Counter)
    bytes_put: int = 0
    bytes_got: int = 0
    bytes_copied: int = 0
    peak_staged: int = 0

    def __getitem__(self, op: RestOp) -> int:
        return self.counts.get(op, 0)

    def total(self) -> int:
        return sum(self.counts.values())

    def copy(self) -> "OpTally":
        return dataclasses.replace(self, counts=Counter(self.counts))

    def __sub__(self, other: "OpTally") -> "OpTally":
        counts = Counter({op: self[op] - other[op] for op in RestOp})
        return OpTally(
            counts=+counts,
            bytes_put=self.bytes_put - other.bytes_put,
            bytes_got=self.bytes_got - other.bytes_got,
            bytes_copied=self.bytes_copied - other.bytes_copied,
            peak_staged=self.peak_staged,
        )

    def to_dict(self) -> dict:
        out = {op.value: self[op] for op in RestOp}
        out.update(
            bytes_put=self.bytes_put,
            bytes_got=self.bytes_got,
            bytes_copied=self.bytes_copied,
            peak_staged=self.peak_staged,
        )
        return out

    @classmethod
    def from_dict(cls, d: Mapping) -> "OpTally":
        counts = Counter({op: int(d.get(op.value, 0)) for op in RestOp})
        return cls(
            counts=+counts,
            bytes_put=int(d.get("bytes_put", 0)),
            bytes_got=int(d.get("bytes_got", 0)),
            bytes_copied=int(d.get("bytes_copied", 0)),
            peak_staged=int(d.get("peak_staged", 0)),
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, OpTally):
            return NotImplemented
        return self.to_dict() == other.to_dict()


@dataclass(frozen=True)
class ListingEntry:
    name: str
    length: int
    created_at: int
    is_prefix: bool = False


@dataclass(frozen=True)
class ContainerInfo:
    name: str
    object_count: int


@dataclass(frozen=True)
class TraceEvent:
    tick: int
    kind: RestOp
    container: str
    name: str
    length: int = 0
    src: Optional[str] = None
    ok: bool = True

    def label(self) -> str:
        """Request line such as ``PUT /res/data.txt/_SUCCESS``."""
        path = f"/{self.container}/{self.name}" if self.name else f"/{self.container}"
        return f"{self.kind.verb} {path}"

    def to_json(self) -> dict:
        return {
            "tick": self.tick,
            "kind": self.kind.value,
            "container": self.container,
            "name": self.name,
            "length": self.length,
            "src": self.src,
            "ok": self.ok,
        }

    @classmethod
    def from_json(cls, d: Mapping) -> "TraceEvent":
        return cls(
            tick=int(d["tick"]),
            kind=RestOp(d["kind"]),
            container=d["container"],
            name=d["name"],
            length=int(d.get("length", 0)),
            src=d.get("src"),
            ok=bool(d.get("ok", True)),
        )


def replay_tally(events: Iterable[TraceEvent]) -> OpTally:
    """Rebuild counts and byte counters from a trace (peak_staged is not traced)."""
    tally = OpTally()
    for ev in events:
        tally.counts[ev.kind] += 1
        if not ev.ok:
            continue
        if ev.kind is RestOp.PUT_OBJECT:
            tally.bytes_put += ev.length
        elif ev.kind is RestOp.GET_OBJECT:
            tally.bytes_got += ev.length
        elif ev.kind is RestOp.COPY_OBJECT:
            tally.bytes_copied += ev.length
    return tally


def write_trace_jsonl(events: Iterable[TraceEvent], fp: IO[str], **extra) -> None:
    for ev in events:
        rec = dict(extra)
        rec.update(ev.to_json())
        fp.write(json.dumps(rec, sort_keys=True) + "\n")


def read_trace_jsonl(lines: Iterable[str]) -> list[TraceEvent]:
    return [TraceEvent.from_json(json.loads(line)) for line in lines if line.strip()]


class PutStream:
    """A chunked (transfer-encoded) PUT in flight.

    Nothing is visible until :meth:`finish`; :meth:`abort` drops the body.
    """

    def __init__(self, store: "ObjectStore", key: ObjectKey, metadata: Mapping[str, str]):
        self._store = store
        self.key = key
        self._metadata = dict(metadata)
        self._chunks: list[bytes] = []
        self._state = "open"

    def send(self, chunk: bytes) -> None:
        if self._state != "open":
            raise UsageError(f"chunk sent on {self._state} upload to {self.key}")
        self._store._check_open()
        self._chunks.append(bytes(chunk))

    def finish(self) -> StoredObject:
        if self._state != "open":
            raise UsageError(f"upload to {self.key} already {self._state}")
        self._state = "finished"
        return self._store._complete_put(self.key, b"".join(self._chunks), self._metadata)

    def abort(self) -> None:
        if self._state == "open":
            self._state = "aborted"
            self._chunks.clear()


class MultipartUpload:
    """S3-style multipart upload: each part is a metered PutObject.

    Completing the upload publishes the object atomically and is folded into
    the part accounting, so a body uploaded in k parts costs k PUTs.
    """

    def __init__(self, store: "ObjectStore", key: ObjectKey, metadata: Mapping[str, str]):
        self._store = store
        self.key = key
        self._metadata = dict(metadata)
        self._parts: list[bytes] = []
        self._state = "open"

    @property
    def part_count(self) -> int:
        return len(self._parts)

    def upload_part(self, data: bytes) -> None:
        if self._state != "open":
            raise UsageError(f"part sent on {self._state} upload to {self.key}")
        self._store._check_open()
        data = bytes(data)
        self._parts.append(data)
        self._store._meter(RestOp.PUT_OBJECT, self.key.container, self.key.name, len(data))
        self._store.tally.bytes_put += len(data)

    def complete(self) -> StoredObject:
        if self._state != "open":
            raise UsageError(f"upload to {self.key} already {self._state}")
        self._state = "completed"
        return self._store._publish(self.key, b"".join(self._parts), self._metadata)

    def abort(self) -> None:
        if self._state == "open":
            self._state = "aborted"
            self._parts.clear()


class ObjectStore:
    """Single-process object store simulator.

    All calls are metered in :attr:`tally`; with ``trace=True`` every call is
    also appended to :attr:`events`.
    """

    def __init__(self, policy: Optional[ConsistencyPolicy] = None, trace: bool = True):
        self.policy = policy or ConsistencyPolicy()
        self.tally = OpTally()
        self.events: list[TraceEvent] = []
        self._trace = trace
        self._now = 0
        self._closed = False
        # container -> name -> version history (oldest first)
        self._objects: dict[str, dict[str, list[StoredObject]]] = {}

    # -- clock ---------------------------------------------------------

    @property
    def now(self) -> int:
        return self._now

    def advance(self, ticks: int = 1) -> int:
        if ticks < 0:
            raise ValueError("cannot move the clock backwards")
        self._now += ticks
        return self._now

    def close(self) -> None:
        self._closed = True

    # -- metering ------------------------------------------------------

    def snapshot_tally(self) -> OpTally:
        return self.tally.copy()

    def reset_tally(self) -> None:
        self.tally = OpTally()

    def observe_staged(self, nbytes: int) -> None:
        """Record a client-side staging high-water mark."""
        if nbytes > self.tally.peak_staged:
            self.tally.peak_staged = nbytes

    def _check_open(self) -> None:
        if self._closed:
            raise StoreClosedError("store has been finalized")

    def _meter(self, op: RestOp, container: str, name: str, length: int = 0,
               src: Optional[str] = None, ok: bool = True) -> None:
        self.tally.counts[op] += 1
        if self._trace:
            self.events.append(TraceEvent(self._now, op, container, name, length, src, ok))

    # -- internals -----------------------------------------------------

    def _history(self, key: ObjectKey) -> list[StoredObject]:
        return self._objects.get(key.container, {}).get(key.name, [])

    def _live(self, key: ObjectKey) -> Optional[StoredObject]:
        hist = self._history(key)
        if not hist or hist[-1].deleted_at is not None:
            return None
        obj = hist[-1]
        if not self.policy.read_after_write_strong:
            fresh = len(hist) == 1 or hist[-2].deleted_at is not None
            if fresh and obj.created_at + self.policy.create_listing_lag > self._now:
                return None
        return obj

    def _publish(self, key: ObjectKey, data: bytes, metadata: Mapping[str, str]) -> StoredObject:
        obj = StoredObject(key, data, metadata, self._now)
        self._objects.setdefault(key.container, {}).setdefault(key.name, []).append(obj)
        return obj

    def _complete_put(self, key: ObjectKey, data: bytes, metadata: Mapping[str, str]) -> StoredObject:
        self._check_open()
        self._meter(RestOp.PUT_OBJECT, key.container, key.name, len(data))
        self.tally.bytes_put += len(data)
        return self._publish(key, data, metadata)

    # -- REST operations -----------------------------------------------

    def open_put(self, key: ObjectKey, metadata: Optional[Mapping[str, str]] = None) -> PutStream:
        self._check_open()
        return PutStream(self, key, metadata or {})

    def open_multipart(self, key: ObjectKey, metadata: Optional[Mapping[str, str]] = None) -> MultipartUpload:
        self._check_open()
        return MultipartUpload(self, key, metadata or {})

    def put_object(self, key: ObjectKey, chunks: Iterable[bytes] = (),
                   metadata: Optional[Mapping[str, str]] = None) -> StoredObject:
        stream = self.open_put(key, metadata)
        for chunk in chunks:
            stream.send(chunk)
        return stream.finish()

    def get_object(self, key: ObjectKey) -> tuple[bytes, Mapping[str, str], int]:
        self._check_open()
        obj = self._live(key)
        if obj is None:
            self._meter(RestOp.GET_OBJECT, key.container, key.name, ok=False)
            raise NotFoundError(str(key))
        self._meter(RestOp.GET_OBJECT, key.container, key.name, obj.length)
        self.tally.bytes_got += obj.length
        return obj.data, obj.metadata, obj.length

    def head_object(self, key: ObjectKey) -> tuple[Mapping[str, str], int]:
        self._check_open()
        obj = self._live(key)
        self._meter(RestOp.HEAD_OBJECT, key.container, key.name, ok=obj is not None)
        if obj is None:
            raise NotFoundError(str(key))
        return obj.metadata, obj.length

    def delete_object(self, key: ObjectKey) -> None:
        self._check_open()
        hist = self._history(key)
        if not hist or hist[-1].deleted_at is not None:
            self._meter(RestOp.DELETE_OBJECT, key.container, key.name, ok=False)
            raise NotFoundError(str(key))
        self._meter(RestOp.DELETE_OBJECT, key.container, key.name)
        hist[-1] = dataclasses.replace(hist[-1], deleted_at=self._now)

    def copy_object(self, src: ObjectKey, dst: ObjectKey) -> StoredObject:
        self._check_open()
        obj = self._live(src)
        if obj is None:
            self._meter(RestOp.COPY_OBJECT, dst.container, dst.name, src=src.name, ok=False)
            raise NotFoundError(str(src))
        self._meter(RestOp.COPY_OBJECT, dst.container, dst.name, obj.length, src=src.name)
        self.tally.bytes_copied += obj.length
        return self._publish(dst, obj.data, obj.metadata)

    def head_container(self, container: str) -> ContainerInfo:
        self._check_open()
        names = self._objects.get(container)
        self._meter(RestOp.HEAD_CONTAINER, container, "", ok=names is not None)
        if names is None:
            raise NotFoundError(f"/{container}")
        count = sum(1 for hist in names.values() if hist[-1].deleted_at is None)
        return ContainerInfo(container, count)

    def list_container(self, container: str, prefix: str = "", delimiter: Optional[str] = None,
                       now: Optional[int] = None) -> list[ListingEntry]:
        """GET container: names visible at ``now`` under ``prefix``, sorted.

        With a delimiter, deeper names collapse into ``is_prefix`` entries
        ending in the delimiter.
        """
        self._check_open()
        self._meter(RestOp.GET_CONTAINER, container, prefix)
        at = self._now if now is None else now
        out: list[ListingEntry] = []
        seen_prefixes: set[str] = set()
        for name, obj in self._visible(container, prefix, at):
            if delimiter:
                cut = name.find(delimiter, len(prefix))
                if cut >= 0:
                    common = name[: cut + len(delimiter)]
                    if common not in seen_prefixes:
                        seen_prefixes.add(common)
                        out.append(ListingEntry(common, 0, 0, is_prefix=True))
                    continue
            out.append(ListingEntry(name, obj.length, obj.created_at))
        return out

    def _visible(self, container: str, prefix: str, at: int) -> Iterator[tuple[str, StoredObject]]:
        lag_c = self.policy.create_listing_lag
        lag_d = self.policy.delete_listing_lag
        for name in sorted(self._objects.get(container, {})):
            if not name.startswith(prefix):
                continue
            hist = self._objects[container][name]
            shown = None
            for obj in reversed(hist):
                if obj.created_at + lag_c <= at:
                    shown = obj
                    break
            if shown is None:
                continue
            if shown.deleted_at is not None and shown.deleted_at + lag_d <= at:
                continue
            yield name, shown

    def live_names(self, container: str, prefix: str = "") -> list[str]:
        """Unmetered view of the live key set, for oracles and verification."""
        return sorted(
            name for name, hist in self._objects.get(container, {}).items()
            if name.startswith(prefix) and hist[-1].deleted_at is None
        )
