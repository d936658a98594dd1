import pytest
from hypothesis import given
from hypothesis import strategies as st

from objlab.errors import AlreadyExistsError, CorruptManifestError, NotFoundError
from objlab.fs import AttemptId, FsPath
from objlab.stocator import (
    DATASET_MARKER_METADATA, HeadCache, ReadOption, StocatorConnector, SuccessManifest,
)
from objlab.store import ConsistencyPolicy, ObjectKey, ObjectStore, RestOp

DS = FsPath.parse("swift2d://res/data.txt")
TS = "201512062056"


def temp_part(part: int, attempt: int) -> FsPath:
    return DS.child("_temporary", "0", "_temporary", f"attempt_{TS}_0000_m_000000_{attempt}", f"part-{part:05d}")


def final_key(part: int, attempt: int) -> ObjectKey:
    return ObjectKey("res", f"data.txt/part-{part:05d}_attempt_{TS}_0000_m_000000_{attempt}")


def ops(store, fn):
    before = store.snapshot_tally()
    fn()
    return store.snapshot_tally() - before


def write(conn, path, body):
    out = conn.create(path, overwrite=False)
    out.write(body)
    out.close()


def test_mkdirs_writes_dataset_marker_once():
    store = ObjectStore()
    conn = StocatorConnector(store)
    t = ops(store, lambda: conn.mkdirs(DS.child("_temporary", "0")))
    assert (t[RestOp.HEAD_OBJECT], t[RestOp.PUT_OBJECT]) == (1, 1)
    meta, length = store.head_object(ObjectKey("res", "data.txt"))
    assert length == 0 and dict(meta) == DATASET_MARKER_METADATA
    # a fresh client (another executor) finds it with one HEAD and no PUT
    other = StocatorConnector(store)
    t = ops(store, lambda: other.mkdirs(temp_part(0, 0).parent))
    assert (t[RestOp.HEAD_OBJECT], t[RestOp.PUT_OBJECT]) == (1, 0)
    assert other.mkdirs(DS.child("_temporary", "0")) is True


def test_create_writes_final_attempt_names():
    store = ObjectStore()
    conn = StocatorConnector(store)
    for attempt in range(3):
        write(conn, temp_part(2, attempt), b"x" * 10)
    assert store.live_names("res") == [final_key(2, a).name for a in range(3)]


def test_create_without_overwrite_refuses_existing():
    store = ObjectStore()
    conn = StocatorConnector(store)
    write(conn, temp_part(0, 0), b"a")
    with pytest.raises(AlreadyExistsError):
        StocatorConnector(store).create(temp_part(0, 0), overwrite=False)


def test_streaming_bounds_staging():
    store = ObjectStore()
    conn = StocatorConnector(store, chunk_size=1 << 20)
    body = bytes(range(256)) * (64 * 4096)  # 64 MiB
    out = conn.create(DS.child("big"), overwrite=True)
    for i in range(0, len(body), 3 << 20):
        out.write(body[i:i + (3 << 20)])
    out.close()
    assert store.snapshot_tally().peak_staged <= 1 << 20
    assert store.get_object(ObjectKey("res", "data.txt/big"))[0] == body


def test_temp_rename_is_free_and_plain_rename_copies():
    store = ObjectStore()
    conn = StocatorConnector(store)
    src = temp_part(0, 0)
    dst = DS.child("_temporary", "0", f"task_{TS}_0000_m_000000", "part-00000")
    t = ops(store, lambda: conn.rename(src, dst))
    assert t.total() == 0
    store.put_object(ObjectKey("res", "a"), [b"1"])
    t = ops(store, lambda: conn.rename(FsPath.parse("/res/a"), FsPath.parse("/res/b")))
    assert (t[RestOp.COPY_OBJECT], t[RestOp.DELETE_OBJECT], t.total()) == (1, 1, 2)
    with pytest.raises(NotFoundError):
        conn.rename(FsPath.parse("/res/missing"), FsPath.parse("/res/c"))


def test_abort_deletes_final_attempt_object():
    store = ObjectStore()
    conn = StocatorConnector(store)
    for a in (0, 2):
        write(conn, temp_part(2, a), b"z")
    t = ops(store, lambda: conn.delete(temp_part(2, 0)))
    assert store.events[-1].label() == f"DELETE /res/{final_key(2, 0).name}"
    t = ops(store, lambda: conn.delete(DS.child("_temporary", "0"), recursive=True))
    assert t.total() == 0
    assert conn.delete(temp_part(2, 2)) is True
    assert conn.delete(temp_part(2, 2)) is False


def test_temporary_paths_do_not_exist():
    store = ObjectStore()
    conn = StocatorConnector(store)
    t = ops(store, lambda: conn.exists(temp_part(0, 0).parent))
    assert t.total() == 0 and not conn.exists(temp_part(0, 0))
    with pytest.raises(NotFoundError):
        conn.get_file_status(temp_part(0, 0))
    assert conn.list_status(temp_part(0, 0).parent) == []


def test_status_is_cached():
    store = ObjectStore()
    store.put_object(ObjectKey("res", "obj"), [b"12345"])
    conn = StocatorConnector(store)
    p = FsPath.parse("/res/obj")
    t = ops(store, lambda: (conn.get_file_status(p), conn.get_file_status(p)))
    assert t[RestOp.HEAD_OBJECT] == 1
    assert conn.get_file_status(p).length == 5


def test_cold_open_is_a_single_get():
    store = ObjectStore()
    store.put_object(ObjectKey("res", "obj"), [b"abc"])
    conn = StocatorConnector(store)
    t = ops(store, lambda: conn.open(FsPath.parse("/res/obj")).read())
    assert (t[RestOp.GET_OBJECT], t[RestOp.HEAD_OBJECT]) == (1, 0)


def _speculated_dataset(sizes):
    store = ObjectStore()
    conn = StocatorConnector(store)
    conn.mkdirs(DS.child("_temporary", "0"))
    write(conn, temp_part(0, 0), b"a" * 10)
    write(conn, temp_part(1, 0), b"b" * 10)
    for attempt, size in sizes.items():
        write(conn, temp_part(2, attempt), b"c" * size)
    return store


def test_listing_resolution_prefers_most_data():
    store = _speculated_dataset({0: 10, 1: 40, 2: 25})
    conn = StocatorConnector(store)
    assert conn.list_status(DS) == []  # no _SUCCESS yet
    conn.write_success(DS)
    statuses = StocatorConnector(store).list_status(DS)
    assert [s.path.name for s in statuses] == [
        final_key(0, 0).name.split("/")[1], final_key(1, 0).name.split("/")[1], final_key(2, 1).name.split("/")[1],
    ]


def test_listing_tie_breaks_to_highest_attempt():
    store = _speculated_dataset({0: 20, 1: 20})
    StocatorConnector(store).write_success(DS)
    last = StocatorConnector(store).list_status(DS)[-1]
    assert last.path.name.endswith("_1")


def test_success_marker_is_empty_without_manifest():
    store = ObjectStore()
    conn = StocatorConnector(store)
    t = ops(store, lambda: conn.write_success(DS))
    assert t[RestOp.PUT_OBJECT] == 1
    assert store.get_object(ObjectKey("res", "data.txt/_SUCCESS"))[2] == 0


def test_manifest_resolution_needs_no_listing():
    store = _speculated_dataset({0: 10, 1: 40})
    manifest = SuccessManifest({
        "part-00000": AttemptId(TS, "000000", 0),
        "part-00001": AttemptId(TS, "000000", 0),
        "part-00002": AttemptId(TS, "000000", 1),
    })
    StocatorConnector(store).write_success(DS, manifest)
    conn = StocatorConnector(store, ReadOption.MANIFEST)
    before = store.snapshot_tally()
    keys = conn.resolve_parts_via_manifest(DS)
    assert keys == [final_key(0, 0), final_key(1, 0), final_key(2, 1)]
    assert (store.snapshot_tally() - before)[RestOp.GET_CONTAINER] == 0
    assert [s.path.name for s in conn.list_status(DS)] == [k.name.split("/")[1] for k in keys]


def test_empty_manifest_and_missing_success():
    store = ObjectStore()
    conn = StocatorConnector(store, ReadOption.MANIFEST)
    assert conn.resolve_parts_via_manifest(DS) == []
    conn.write_success(DS, SuccessManifest())
    assert conn.resolve_parts_via_manifest(DS) == []


def test_manifest_immune_to_listing_lag():
    store = ObjectStore(ConsistencyPolicy(create_listing_lag=5))
    conn = StocatorConnector(store)
    conn.mkdirs(DS.child("_temporary", "0"))
    committed = {}
    for part in range(3):
        write(conn, temp_part(part, 0), b"p" * 8)
        committed[f"part-{part:05d}"] = AttemptId(TS, "000000", 0)
    conn.write_success(DS, SuccessManifest(committed))
    listing = StocatorConnector(store).list_status(DS)
    manifest = StocatorConnector(store, ReadOption.MANIFEST).list_status(DS)
    assert len(manifest) == 3 and len(listing) < 3


@pytest.mark.parametrize("body", [
    b"part-00000 2015 000000\n",
    b"part-00000 2015 000000 x\n",
    b"part-00000 2015 000000 01\n",
    b"part-00000 2015 000000 1\npart-00000 2015 000000 2\n",
    b"\xff\xfe",
])
def test_corrupt_manifests(body):
    with pytest.raises(CorruptManifestError):
        SuccessManifest.decode(body)


def test_manifest_format_is_sorted_lines():
    m = SuccessManifest({"part-00002": AttemptId(TS, "000000", 1), "part-00000": AttemptId(TS, "000000", 0)})
    assert m.encode() == (
        b"part-00000 201512062056 000000 0\n"
        b"part-00002 201512062056 000000 1\n"
    )


@given(st.dictionaries(
    st.from_regex(r"part-[0-9]{5}", fullmatch=True),
    st.builds(AttemptId, st.from_regex(r"[0-9]{1,12}", fullmatch=True),
              st.from_regex(r"[0-9]{1,6}", fullmatch=True), st.integers(0, 999)),
    max_size=8,
))
def test_manifest_codec_roundtrip(committed):
    m = SuccessManifest(committed)
    assert SuccessManifest.decode(m.encode()) == m


def test_head_cache_lru():
    cache = HeadCache(2)
    a, b, c = (ObjectKey("c", n) for n in "abc")
    cache.put(a, {}, 1)
    cache.put(b, {}, 2)
    cache.get(a)
    cache.put(c, {}, 3)
    assert a in cache and c in cache and b not in cache
    zero = HeadCache(0)
    zero.put(a, {}, 1)
    assert len(zero) == 0
    with pytest.raises(ValueError):
        HeadCache(-1)


def test_zero_capacity_cache_still_works():
    store = ObjectStore()
    store.put_object(ObjectKey("res", "obj"), [b"12"])
    conn = StocatorConnector(store, cache_capacity=0)
    p = FsPath.parse("/res/obj")
    assert conn.get_file_status(p).length == 2
    assert conn.get_file_status(p).length == 2
    assert store.snapshot_tally()[RestOp.HEAD_OBJECT] == 2


@given(st.permutations(range(6)), st.lists(st.integers(0, 30), min_size=6, max_size=6))
def test_reader_is_a_function_of_the_visible_set(order, sizes):
    """Same object set written in any order resolves identically."""
    def resolve(sequence):
        store = ObjectStore()
        conn = StocatorConnector(store)
        conn.mkdirs(DS.child("_temporary", "0"))
        for i in sequence:
            write(conn, temp_part(i % 2, i // 2), b"q" * sizes[i])
        conn.write_success(DS)
        return [(s.path, s.length) for s in StocatorConnector(store).list_status(DS)]

    assert resolve(order) == resolve(range(6))
