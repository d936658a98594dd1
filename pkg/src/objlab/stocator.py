"""Rename-free connector.

Parts are written straight to attempt-qualified final names, so task and job
commit become no-ops. Which attempt of a part belongs to the dataset is
decided only when the dataset is read: either by listing and keeping the
largest attempt per part, or by reading the manifest stored in ``_SUCCESS``.
"""

from __future__ import annotations

import enum
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

from objlab.errors import AlreadyExistsError, CorruptManifestError, NotFoundError
from objlab.fs import (
    SUCCESS_NAME,
    AttemptId,
    FileStatus,
    FsPath,
    InputStream,
    TempDepth,
    TempPathMatch,
    final_name_for,
    match_temp_pattern,
    parse_final_name,
)
from objlab.store import ObjectKey, ObjectStore, StoredObject

WRITTEN_BY = "written-by"
STOCATOR = "stocator"
CONTENT_TYPE = "content-type"
DIRECTORY_TYPE = "application/directory"

DATASET_MARKER_METADATA = {WRITTEN_BY: STOCATOR, CONTENT_TYPE: DIRECTORY_TYPE}
DIRECTORY_METADATA = {CONTENT_TYPE: DIRECTORY_TYPE}

DEFAULT_CHUNK_SIZE = 8 * 1024
DEFAULT_CACHE_CAPACITY = 1024


class ReadOption(str, enum.Enum):
    LISTING = "listing"
    MANIFEST = "manifest"


@dataclass
class SuccessManifest:
    """Committed attempt per part, serialized as sorted text lines."""

    committed: dict[str, AttemptId] = field(default_factory=dict)

    def encode(self) -> bytes:
        lines = []
        for part in sorted(self.committed):
            a = self.committed[part]
            lines.append(f"{part} {a.job_timestamp} {a.task_number} {a.attempt_number}\n")
        return "".join(lines).encode("utf-8")

    @classmethod
    def decode(cls, body: bytes) -> "SuccessManifest":
        try:
            text = body.decode("utf-8")
        except UnicodeDecodeError as e:
            raise CorruptManifestError(f"manifest is not utf-8: {e}") from None
        committed: dict[str, AttemptId] = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            fields = line.split(" ")
            if len(fields) != 4 or not fields[3].isdigit():
                raise CorruptManifestError(f"line {lineno}: {line!r}")
            part, ts, task, n = fields
            if part in committed:
                raise CorruptManifestError(f"line {lineno}: duplicate part {part}")
            try:
                attempt = AttemptId(ts, task, int(n))
            except ValueError as e:
                raise CorruptManifestError(f"line {lineno}: {e}") from None
            if str(attempt.attempt_number) != n:
                raise CorruptManifestError(f"line {lineno}: non-canonical attempt {n!r}")
            committed[part] = attempt
        return cls(committed)


class HeadCache:
    """LRU of HEAD results. Inputs are immutable for the life of a job, so
    entries are only dropped on eviction or when this client deletes the key."""

    def __init__(self, capacity: int = DEFAULT_CACHE_CAPACITY):
        if capacity < 0:
            raise ValueError("capacity must be >= 0")
        self.capacity = capacity
        self._entries: OrderedDict[ObjectKey, tuple[Mapping[str, str], int, int]] = OrderedDict()

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key: ObjectKey) -> bool:
        return key in self._entries

    def get(self, key: ObjectKey):
        hit = self._entries.get(key)
        if hit is not None:
            self._entries.move_to_end(key)
        return hit

    def put(self, key: ObjectKey, metadata: Mapping[str, str], length: int, tick: int = 0) -> None:
        if self.capacity == 0:
            return
        self._entries[key] = (metadata, length, tick)
        self._entries.move_to_end(key)
        while len(self._entries) > self.capacity:
            self._entries.popitem(last=False)

    def discard(self, key: ObjectKey) -> None:
        self._entries.pop(key, None)


class StreamingOutput:
    """Chunked PUT: at most one chunk is ever held locally."""

    def __init__(self, store: ObjectStore, key: ObjectKey, metadata: Mapping[str, str],
                 chunk_size: int, on_commit: Optional[Callable[[StoredObject], None]] = None):
        if chunk_size <= 0:
            raise ValueError("chunk_size must be positive")
        self._store = store
        self._put = store.open_put(key, metadata)
        self._chunk_size = chunk_size
        self._buf = bytearray()
        self._on_commit = on_commit
        self._done = False
        self.key = key
        self.written = 0

    def write(self, data: bytes) -> int:
        view = memoryview(data)
        while len(view):
            room = self._chunk_size - len(self._buf)
            self._buf += view[:room]
            view = view[room:]
            self._store.observe_staged(len(self._buf))
            if len(self._buf) == self._chunk_size:
                self._put.send(bytes(self._buf))
                self._buf.clear()
        self.written += len(data)
        return len(data)

    def close(self) -> None:
        if self._done:
            return
        self._done = True
        if self._buf:
            self._put.send(bytes(self._buf))
            self._buf.clear()
        obj = self._put.finish()
        if self._on_commit is not None:
            self._on_commit(obj)

    def abort(self) -> None:
        if not self._done:
            self._done = True
            self._buf.clear()
            self._put.abort()

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            self.close()
        else:
            self.abort()


def _is_dir(metadata: Mapping[str, str]) -> bool:
    return metadata.get(CONTENT_TYPE) == DIRECTORY_TYPE


class StocatorConnector:
    rename_free = True
    scheme = "swift2d"

    def __init__(self, store: ObjectStore, read_option: ReadOption = ReadOption.LISTING,
                 chunk_size: int = DEFAULT_CHUNK_SIZE, cache_capacity: int = DEFAULT_CACHE_CAPACITY):
        self.store = store
        self.read_option = ReadOption(read_option)
        self.chunk_size = chunk_size
        self.cache = HeadCache(cache_capacity)

    @staticmethod
    def _key(path: FsPath) -> ObjectKey:
        return ObjectKey(path.container, path.key)

    def _head(self, key: ObjectKey):
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        try:
            metadata, length = self.store.head_object(key)
        except NotFoundError:
            return None
        hit = (metadata, length, self.store.now)
        self.cache.put(key, *hit)
        return hit

    def _remember(self, obj: StoredObject) -> None:
        self.cache.put(obj.key, obj.metadata, obj.length, obj.created_at)

    # -- write path ----------------------------------------------------

    def mkdirs(self, path: FsPath) -> bool:
        m = match_temp_pattern(path)
        if m is not None:
            target, metadata = m.dataset, DATASET_MARKER_METADATA
        else:
            target, metadata = path, DIRECTORY_METADATA
        if not target.segments:
            return True
        key = self._key(target)
        if self._head(key) is None:
            self._remember(self.store.put_object(key, (), metadata))
        return True

    def create(self, path: FsPath, overwrite: bool = False, permission=None, buffer_size=None,
               replication=None, block_size=None, progress=None) -> StreamingOutput:
        m = match_temp_pattern(path)
        target = final_name_for(m) if m is not None and m.depth is TempDepth.ATTEMPT_PART else path
        key = self._key(target)
        if not overwrite and self._head(key) is not None:
            raise AlreadyExistsError(str(target))
        self.cache.discard(key)
        return StreamingOutput(self.store, key, {}, self.chunk_size, on_commit=self._remember)

    def rename(self, src: FsPath, dst: FsPath) -> bool:
        if match_temp_pattern(src) is not None:
            return True
        skey, dkey = self._key(src), self._key(dst)
        self._remember(self.store.copy_object(skey, dkey))
        self.store.delete_object(skey)
        self.cache.discard(skey)
        return True

    def delete(self, path: FsPath, recursive: bool = False) -> bool:
        m = match_temp_pattern(path)
        if m is not None:
            if m.depth is not TempDepth.ATTEMPT_PART:
                return True
            return self._delete_key(self._key(final_name_for(m)))
        key = self._key(path)
        deleted = False
        if recursive and path.segments:
            for entry in self.store.list_container(path.container, key + "/"):
                deleted |= self._delete_key(ObjectKey(path.container, entry.name))
        if path.segments:
            deleted |= self._delete_key(key)
        return deleted

    def _delete_key(self, key: ObjectKey) -> bool:
        self.cache.discard(key)
        try:
            self.store.delete_object(key)
        except NotFoundError:
            return False
        return True

    def write_success(self, dataset: FsPath, manifest: Optional[SuccessManifest] = None) -> None:
        out = self.create(dataset.child(SUCCESS_NAME), overwrite=False)
        if manifest is not None:
            out.write(manifest.encode())
        out.close()

    # -- read path -----------------------------------------------------

    def exists(self, path: FsPath) -> bool:
        if match_temp_pattern(path) is not None:
            return False
        if not path.segments:
            return True
        return self._head(self._key(path)) is not None

    def get_file_status(self, path: FsPath) -> FileStatus:
        if match_temp_pattern(path) is not None:
            raise NotFoundError(str(path))
        if not path.segments:
            return FileStatus(path, 0, True)
        hit = self._head(self._key(path))
        if hit is None:
            raise NotFoundError(str(path))
        metadata, length, tick = hit
        if _is_dir(metadata):
            return FileStatus(path, 0, True, tick)
        return FileStatus(path, length, False, tick)

    def open(self, path: FsPath) -> InputStream:
        key = self._key(path)
        data, metadata, length = self.store.get_object(key)
        self.cache.put(key, metadata, length, self.store.now)
        return InputStream(path, data, metadata)

    def list_status(self, path: FsPath, path_filter: Optional[Callable[[FsPath], bool]] = None,
                    prefix_based: bool = False) -> list[FileStatus]:
        # prefix_based is accepted for interface parity; listing is always by prefix here
        if match_temp_pattern(path) is not None:
            return []
        marker = self._head(self._key(path)) if path.segments else None
        if marker is None or marker[0].get(WRITTEN_BY) != STOCATOR:
            if marker is not None and not _is_dir(marker[0]):
                out = [FileStatus(path, marker[1], False, marker[2])]
            else:
                out = self._plain_listing(path)
        elif self.read_option is ReadOption.MANIFEST:
            out = [self.get_file_status(path.with_key(k.name))
                   for k in self.resolve_parts_via_manifest(path)]
        else:
            if self._head(self._key(path.child(SUCCESS_NAME))) is None:
                return []
            out = self._resolve_by_listing(path)
        if path_filter is not None:
            out = [s for s in out if path_filter(s.path)]
        return out

    def _plain_listing(self, path: FsPath) -> list[FileStatus]:
        prefix = path.key + "/" if path.segments else ""
        out = []
        for e in self.store.list_container(path.container, prefix, "/"):
            if e.name == prefix:
                continue
            name = e.name[:-1] if e.is_prefix else e.name
            out.append(FileStatus(path.with_key(name), 0 if e.is_prefix else e.length,
                                  e.is_prefix, e.created_at))
        return out

    def _resolve_by_listing(self, dataset: FsPath) -> list[FileStatus]:
        prefix = dataset.key + "/"
        best: dict[str, tuple[tuple[int, int], FileStatus]] = {}
        for e in self.store.list_container(dataset.container, prefix, "/"):
            if e.is_prefix:
                continue
            parsed = parse_final_name(e.name[len(prefix):])
            if parsed is None:
                continue
            rank = (e.length, parsed.attempt.attempt_number if parsed.attempt else -1)
            current = best.get(parsed.part)
            if current is None or rank > current[0]:
                best[parsed.part] = (rank, FileStatus(dataset.with_key(e.name), e.length, False, e.created_at))
        return [best[part][1] for part in sorted(best)]

    def read_manifest(self, dataset: FsPath) -> Optional[SuccessManifest]:
        try:
            body, metadata, length = self.store.get_object(self._key(dataset.child(SUCCESS_NAME)))
        except NotFoundError:
            return None
        return SuccessManifest.decode(body)

    def resolve_parts_via_manifest(self, dataset: FsPath) -> list[ObjectKey]:
        """Compose part names from the ``_SUCCESS`` manifest; never lists."""
        manifest = self.read_manifest(dataset)
        if manifest is None:
            return []
        out = []
        for part in sorted(manifest.committed):
            match = TempPathMatch(dataset, TempDepth.ATTEMPT_PART,
                                  attempt=manifest.committed[part], part=part)
            out.append(self._key(final_name_for(match)))
        return out
