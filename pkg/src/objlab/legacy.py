"""Rename-based connector in the style of the stock Hadoop Swift/S3a clients.

Directories are zero-byte marker objects named ``<path>/``. Rename is COPY
followed by DELETE, directory operations walk listings, and output is staged
locally in full before a single PUT (or, with fast upload, sent as multipart
parts of at least 5 MiB).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from objlab.errors import AlreadyExistsError, NotFoundError, UsageError
from objlab.fs import SUCCESS_NAME, FileStatus, FsPath, InputStream, ancestors
from objlab.store import ListingEntry, ObjectKey, ObjectStore

MIN_PART_SIZE = 5 * 1024 * 1024
DIRECTORY_METADATA = {"content-type": "application/directory"}


@dataclass(frozen=True)
class LegacyProfile:
    name: str = "swift-like"
    dir_probe_heads: int = 1
    listing_per_level: bool = True
    status_list_fallback: bool = False
    fast_upload: bool = False
    fast_upload_part_size: int = MIN_PART_SIZE
    scheme: str = "swift"

    def __post_init__(self):
        if self.dir_probe_heads not in (1, 2):
            raise ValueError("dir_probe_heads must be 1 or 2")
        if self.fast_upload and self.fast_upload_part_size < MIN_PART_SIZE:
            raise ValueError(f"multipart parts must be >= {MIN_PART_SIZE} bytes")


SWIFT_LIKE = LegacyProfile()
S3A_LIKE = LegacyProfile(
    name="s3a-like",
    dir_probe_heads=2,
    listing_per_level=False,
    status_list_fallback=True,
    scheme="s3a",
)


class StagedOutput:
    """Buffers the whole body (the local temp file) and PUTs it on close."""

    def __init__(self, store: ObjectStore, key: ObjectKey):
        self._store = store
        self.key = key
        self._buf = bytearray()
        self._done = False

    def write(self, data: bytes) -> int:
        self._buf += data
        self._store.observe_staged(len(self._buf))
        return len(data)

    def close(self) -> None:
        if self._done:
            return
        self._done = True
        self._store.put_object(self.key, [bytes(self._buf)])
        self._buf.clear()

    def abort(self) -> None:
        self._done = True
        self._buf.clear()

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        self.abort() if exc_type else self.close()


class MultipartOutput:
    """Fast upload: holds at most one part, each part is its own PUT."""

    def __init__(self, store: ObjectStore, key: ObjectKey, part_size: int):
        self._store = store
        self._upload = store.open_multipart(key)
        self._part_size = part_size
        self._buf = bytearray()
        self._done = False
        self.key = key

    def write(self, data: bytes) -> int:
        view = memoryview(data)
        while len(view):
            # a full part is only shipped once more data shows it is not the last
            if len(self._buf) == self._part_size:
                self._upload.upload_part(bytes(self._buf))
                self._buf.clear()
            room = self._part_size - len(self._buf)
            self._buf += view[:room]
            view = view[room:]
            self._store.observe_staged(len(self._buf))
        return len(data)

    def close(self) -> None:
        if self._done:
            return
        self._done = True
        self._upload.upload_part(bytes(self._buf))
        self._buf.clear()
        self._upload.complete()

    def abort(self) -> None:
        if not self._done:
            self._done = True
            self._buf.clear()
            self._upload.abort()

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        self.abort() if exc_type else self.close()


class LegacyConnector:
    rename_free = False

    def __init__(self, store: ObjectStore, profile: LegacyProfile = SWIFT_LIKE):
        self.store = store
        self.profile = profile
        self.scheme = profile.scheme

    @staticmethod
    def _key(path: FsPath) -> ObjectKey:
        return ObjectKey(path.container, path.key)

    @staticmethod
    def _dir_key(path: FsPath) -> ObjectKey:
        return ObjectKey(path.container, path.key + "/")

    def _head(self, key: ObjectKey):
        try:
            return self.store.head_object(key)
        except NotFoundError:
            return None

    # -- status --------------------------------------------------------

    def get_file_status(self, path: FsPath) -> FileStatus:
        if not path.segments:
            return FileStatus(path, 0, True)
        hit = self._head(self._key(path))
        if hit is not None:
            return FileStatus(path, hit[1], False)
        if self._head(self._dir_key(path)) is not None:
            return FileStatus(path, 0, True)
        if self.profile.status_list_fallback:
            if self.store.list_container(path.container, path.key + "/"):
                return FileStatus(path, 0, True)
        raise NotFoundError(str(path))

    def exists(self, path: FsPath) -> bool:
        try:
            self.get_file_status(path)
        except NotFoundError:
            return False
        return True

    def _dir_exists(self, path: FsPath) -> bool:
        if self.profile.dir_probe_heads == 2 and self._head(self._key(path)) is not None:
            return True
        return self._head(self._dir_key(path)) is not None

    # -- directories ---------------------------------------------------

    def mkdirs(self, path: FsPath) -> bool:
        missing = []
        for level in ancestors(path):
            if self._dir_exists(level):
                break
            missing.append(level)
        for level in reversed(missing):
            self.store.put_object(self._dir_key(level), (), DIRECTORY_METADATA)
        return True

    def _tree(self, path: FsPath) -> list[ListingEntry]:
        """Every object under ``path/`` including its own marker, sorted."""
        prefix = path.key + "/"
        if not self.profile.listing_per_level:
            return self.store.list_container(path.container, prefix)
        out: list[ListingEntry] = []
        pending = [prefix]
        while pending:
            level = pending.pop(0)
            for e in self.store.list_container(path.container, level, "/"):
                if e.is_prefix:
                    pending.append(e.name)
                else:
                    out.append(e)
        return sorted(out, key=lambda e: e.name)

    def list_status(self, path: FsPath, path_filter: Optional[Callable[[FsPath], bool]] = None) -> list[FileStatus]:
        status = self.get_file_status(path)
        if not status.is_directory:
            return [status]
        prefix = path.key + "/" if path.segments else ""
        if self.profile.listing_per_level:
            entries = self.store.list_container(path.container, prefix, "/")
        else:
            entries = self.store.list_container(path.container, prefix)
        files: dict[str, FileStatus] = {}
        dirs: dict[str, FileStatus] = {}
        for e in entries:
            rel = e.name[len(prefix):]
            if not rel:
                continue
            head, sep, _ = rel.partition("/")
            if sep:
                dirs.setdefault(head, FileStatus(path.child(head), 0, True, e.created_at))
            else:
                files[head] = FileStatus(path.child(head), e.length, False, e.created_at)
        out = [files.get(n) or dirs[n] for n in sorted(set(files) | set(dirs))]
        if path_filter is not None:
            out = [s for s in out if path_filter(s.path)]
        return out

    # -- data ----------------------------------------------------------

    def create(self, path: FsPath, overwrite: bool = False, permission=None, buffer_size=None,
               replication=None, block_size=None, progress=None):
        if not overwrite and self.exists(path):
            raise AlreadyExistsError(str(path))
        self.mkdirs(path.parent)
        if self.profile.fast_upload:
            return MultipartOutput(self.store, self._key(path), self.profile.fast_upload_part_size)
        return StagedOutput(self.store, self._key(path))

    def open(self, path: FsPath) -> InputStream:
        status = self.get_file_status(path)
        if status.is_directory:
            raise UsageError(f"{path} is a directory")
        data, metadata, _ = self.store.get_object(self._key(path))
        return InputStream(path, data, metadata)

    def rename(self, src: FsPath, dst: FsPath) -> bool:
        status = self.get_file_status(src)
        self.mkdirs(dst.parent)
        if not status.is_directory:
            self.store.copy_object(self._key(src), self._key(dst))
            self.store.delete_object(self._key(src))
            return True
        src_prefix = src.key + "/"
        for e in self._tree(src):
            s = ObjectKey(src.container, e.name)
            d = ObjectKey(dst.container, dst.key + "/" + e.name[len(src_prefix):])
            try:
                self.store.copy_object(s, d)
                self.store.delete_object(s)
            except NotFoundError:
                # listed but already gone: listing lag
                continue
        return True

    def delete(self, path: FsPath, recursive: bool = False) -> bool:
        try:
            status = self.get_file_status(path)
        except NotFoundError:
            return False
        if not status.is_directory:
            self.store.delete_object(self._key(path))
            return True
        tree = self._tree(path)
        own = path.key + "/"
        if not recursive and any(e.name != own for e in tree):
            raise UsageError(f"{path} is a non-empty directory")
        names = [e.name for e in tree]
        if own not in names:
            names.append(own)
        for name in names:
            try:
                self.store.delete_object(ObjectKey(path.container, name))
            except NotFoundError:
                continue
        return True

    def write_success(self, dataset: FsPath, manifest=None) -> None:
        # stock committers always write an empty marker
        self.create(dataset.child(SUCCESS_NAME), overwrite=False).close()
