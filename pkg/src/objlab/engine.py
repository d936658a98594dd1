"""Deterministic mini-Spark driving a connector through the output committer.

One logical tick per scheduler round. Each running attempt advances one
phase per tick:

    setup  -> mkdirs of the attempt directory
    write  -> create + write + close of the task temporary part
    finish -> ``Slow(k)`` attempts stall here for k ticks
    commit -> ask the driver for permission; the first attempt to ask wins,
              the task's other attempts are killed and aborted

The driver then relaunches failed tasks, starts speculative copies of tasks
whose every running attempt is older than the speculation threshold, and once
every task has committed runs job commit, cleanup and the ``_SUCCESS`` write.
"""

from __future__ import annotations

import enum
import functools
import random
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional

from objlab.errors import ConfigError, NotFoundError
from objlab.fs import (
    SUCCESS_NAME,
    TEMP_DIR,
    APP_ATTEMPT,
    AttemptId,
    FsContract,
    FsPath,
    TaskId,
    is_hidden,
    parse_final_name,
    part_index,
    part_name,
)
from objlab.stocator import ReadOption, SuccessManifest
from objlab.store import ConsistencyPolicy, ObjectStore, OpTally, TraceEvent

ConnectorFactory = Callable[[ObjectStore], FsContract]

MAX_TICKS = 100_000


class Committer(str, enum.Enum):
    V1 = "v1"
    V2 = "v2"
    NONE = "none"


@dataclass(frozen=True)
class PartSpec:
    index: int
    size: int
    seed: int


@functools.lru_cache(maxsize=256)
def part_body(size: int, seed: int) -> bytes:
    """Canonical body of a part; every attempt of a task produces exactly this."""
    return random.Random(seed).randbytes(size)


@dataclass
class JobSpec:
    dataset: FsPath
    parts: list[PartSpec]
    committer: Committer = Committer.V1
    read_option: ReadOption = ReadOption.LISTING
    job_timestamp: str = "201512062056"
    # one task number shared by every task (the HMRCC examples use 000000);
    # None numbers tasks by part index
    task_number: Optional[str] = None
    input: Optional[FsPath] = None
    read_delay: int = 0

    def __post_init__(self):
        self.committer = Committer(self.committer)
        self.read_option = ReadOption(self.read_option)
        if [p.index for p in self.parts] != list(range(len(self.parts))):
            raise ConfigError("part indices must be dense from 0")
        if any(p.size < 0 for p in self.parts):
            raise ConfigError("part sizes must be >= 0")
        if self.read_delay < 0:
            raise ConfigError("read_delay must be >= 0")

    def task_id(self, index: int) -> TaskId:
        return TaskId(self.job_timestamp, self.task_number or f"{index:06d}")

    def attempt_id(self, index: int, attempt: int) -> AttemptId:
        return self.task_id(index).attempt(attempt)

    @property
    def job_temp(self) -> FsPath:
        return self.dataset.child(TEMP_DIR, APP_ATTEMPT)

    def attempt_dir(self, index: int, attempt: int) -> FsPath:
        return self.job_temp.child(TEMP_DIR, self.attempt_id(index, attempt).render())

    def temp_part(self, index: int, attempt: int) -> FsPath:
        return self.attempt_dir(index, attempt).child(part_name(index))

    def task_dir(self, index: int) -> FsPath:
        return self.job_temp.child(self.task_id(index).render())


class OutcomeKind(str, enum.Enum):
    SUCCEED = "succeed"
    FAIL_BEFORE_CLOSE = "fail-before-close"
    FAIL_AFTER_CLOSE = "fail-after-close"
    SLOW = "slow"


@dataclass(frozen=True)
class Outcome:
    kind: OutcomeKind = OutcomeKind.SUCCEED
    ticks: int = 0

    @property
    def fails(self) -> bool:
        return self.kind in (OutcomeKind.FAIL_BEFORE_CLOSE, OutcomeKind.FAIL_AFTER_CLOSE)

    def __str__(self) -> str:
        return f"slow:{self.ticks}" if self.kind is OutcomeKind.SLOW else self.kind.value

    @classmethod
    def parse(cls, text: str) -> "Outcome":
        text = text.strip()
        if text.startswith("slow:"):
            ticks = int(text[5:])
            if ticks < 0:
                raise ConfigError("slow ticks must be >= 0")
            return cls(OutcomeKind.SLOW, ticks)
        try:
            return cls(OutcomeKind(text))
        except ValueError:
            raise ConfigError(f"unknown outcome {text!r}") from None


SUCCEED = Outcome()


@dataclass
class FaultPlan:
    """Scripted outcome per (task, attempt); unlisted attempts succeed.

    Fail-stop: a task is never given ``max_failures`` failing outcomes, so
    every task eventually commits.
    """

    outcomes: dict[tuple[int, int], Outcome] = field(default_factory=dict)
    speculation_threshold: Optional[int] = None
    seed: int = 0
    max_failures: int = 4
    max_speculative: int = 2

    def __post_init__(self):
        failing: dict[int, int] = {}
        for (task, attempt), outcome in self.outcomes.items():
            if task < 0 or attempt < 0:
                raise ConfigError(f"bad fault key {(task, attempt)}")
            if outcome.fails:
                failing[task] = failing.get(task, 0) + 1
        for task, n in failing.items():
            if n >= self.max_failures:
                raise ConfigError(f"task {task} can never succeed ({n} failing attempts)")
        if self.speculation_threshold is not None and self.speculation_threshold < 1:
            raise ConfigError("speculation_threshold must be >= 1")

    def outcome(self, task: int, attempt: int) -> Outcome:
        return self.outcomes.get((task, attempt), SUCCEED)

    def to_text(self) -> str:
        return ",".join(f"{t}/{a}={o}" for (t, a), o in sorted(self.outcomes.items()))

    @staticmethod
    def parse_outcomes(text: str) -> dict[tuple[int, int], Outcome]:
        out = {}
        for item in filter(None, (s.strip() for s in text.split(","))):
            try:
                key, value = item.split("=", 1)
                task, attempt = key.split("/", 1)
                out[(int(task), int(attempt))] = Outcome.parse(value)
            except ValueError:
                raise ConfigError(f"bad fault entry {item!r}") from None
        return out

    @classmethod
    def random(cls, seed: int, n_tasks: int, max_attempts: int = 4) -> "FaultPlan":
        rng = random.Random(seed)
        outcomes = {}
        threshold = rng.choice([None, 1, 2, 3, 5])
        for task in range(n_tasks):
            fails = 0
            for attempt in range(rng.randrange(max_attempts)):
                kind = rng.choice(list(OutcomeKind))
                if kind in (OutcomeKind.FAIL_BEFORE_CLOSE, OutcomeKind.FAIL_AFTER_CLOSE):
                    if fails >= 2:
                        kind = OutcomeKind.SUCCEED
                    else:
                        fails += 1
                ticks = rng.randrange(1, 8) if kind is OutcomeKind.SLOW else 0
                outcomes[(task, attempt)] = Outcome(kind, ticks)
        return cls(outcomes, speculation_threshold=threshold, seed=seed)


SPECULATION_PLAN = FaultPlan(
    outcomes={
        (2, 0): Outcome(OutcomeKind.SLOW, 20),
        (2, 1): Outcome(OutcomeKind.SLOW, 3),
        (2, 2): Outcome(OutcomeKind.SLOW, 20),
    },
    speculation_threshold=3,
)
"""Task 2 runs three attempts; attempt 1 commits, attempts 0 and 2 are aborted."""


@dataclass
class DatasetRead:
    resolution: dict[int, Optional[AttemptId]] = field(default_factory=dict)
    data: dict[int, bytes] = field(default_factory=dict)
    duplicates: int = 0


@dataclass
class RunReport:
    tally: OpTally
    trace: list[TraceEvent]
    wrote_success: bool
    parts_readable: int
    expected_parts: int
    complete: bool
    resolution: dict[int, Optional[AttemptId]]
    cost: float = 0.0
    scenario: str = ""
    workload: str = ""
    repeat: int = 0
    committed: dict[int, AttemptId] = field(default_factory=dict)
    read_tally: Optional[OpTally] = None
    notes: list[str] = field(default_factory=list)


@dataclass
class _Attempt:
    task: int
    number: int
    launched: int
    outcome: Outcome
    conn: FsContract
    phase: str = "setup"
    state: str = "running"
    stall: int = 0
    created: bool = False


class _JobRun:
    def __init__(self, spec: JobSpec, factory: ConnectorFactory, store: ObjectStore, faults: FaultPlan):
        self.spec = spec
        self.factory = factory
        self.store = store
        self.faults = faults
        self.driver = factory(store)
        n = len(spec.parts)
        self.attempts: list[list[_Attempt]] = [[] for _ in range(n)]
        self.failures = [0] * n
        self.speculative = [0] * n
        self.committed: dict[int, _Attempt] = {}
        self.inputs: dict[int, FsPath] = {}
        self.notes: list[str] = []
        self.failed = False

    # -- driver --------------------------------------------------------

    def run(self) -> bool:
        spec = self.spec
        self.driver.mkdirs(spec.job_temp)
        if spec.input is not None:
            self._plan_inputs()
        for task in range(len(spec.parts)):
            self._launch(task)
        self.store.advance(1)
        while True:
            for task_attempts in [list(a) for a in self.attempts]:
                for att in task_attempts:
                    if att.state == "running":
                        self._step(att)
            if not self._schedule():
                break
            if self.store.now > MAX_TICKS:
                raise RuntimeError("job did not converge")
            self.store.advance(1)
        if self.failed:
            self.driver.delete(spec.dataset.child(TEMP_DIR), recursive=True)
            return False
        self._commit_job()
        return True

    def _plan_inputs(self) -> None:
        listed = self.driver.list_status(self.spec.input)
        for st in listed:
            if st.is_directory or is_hidden(st.path.name):
                continue
            parsed = parse_final_name(st.path.name)
            idx = part_index(parsed.part) if parsed else None
            if idx is not None and idx < len(self.spec.parts):
                self.inputs.setdefault(idx, st.path)

    def _schedule(self) -> bool:
        """Relaunch and speculate; False once the job is finished or failed."""
        if len(self.committed) == len(self.spec.parts):
            return False
        now = self.store.now
        threshold = self.faults.speculation_threshold
        for task, attempts in enumerate(self.attempts):
            if task in self.committed:
                continue
            running = [a for a in attempts if a.state == "running"]
            if not running:
                if self.failures[task] >= self.faults.max_failures:
                    self.notes.append(f"task {task} exhausted {self.failures[task]} failures")
                    self.failed = True
                    return False
                self._launch(task)
            elif (threshold is not None
                  and self.speculative[task] < self.faults.max_speculative
                  and all(now - a.launched >= threshold for a in running)):
                self.speculative[task] += 1
                self._launch(task)
        return True

    def _launch(self, task: int) -> None:
        number = len(self.attempts[task])
        att = _Attempt(task, number, self.store.now, self.faults.outcome(task, number), self.factory(self.store))
        self.attempts[task].append(att)

    def _commit_job(self) -> None:
        spec, driver = self.spec, self.driver
        if spec.committer is not Committer.V2:
            # steps 6-7: list committed task dirs, rename their files to final names
            try:
                task_dirs = driver.list_status(spec.job_temp)
            except NotFoundError:
                task_dirs = []
            for d in task_dirs:
                if not d.is_directory or not d.path.name.startswith("task_"):
                    continue
                for st in driver.list_status(d.path):
                    if not st.is_directory:
                        self._rename(driver, st.path, spec.dataset.child(st.path.name))
        driver.delete(spec.dataset.child(TEMP_DIR), recursive=True)
        manifest = None
        if spec.read_option is ReadOption.MANIFEST:
            manifest = SuccessManifest({
                part_name(t): spec.attempt_id(t, a.number) for t, a in sorted(self.committed.items())
            })
        driver.write_success(spec.dataset, manifest)
        try:
            driver.list_status(spec.dataset)
        except NotFoundError:
            self.notes.append("output path missing at final status check")

    def _rename(self, conn: FsContract, src: FsPath, dst: FsPath) -> None:
        try:
            conn.rename(src, dst)
        except NotFoundError:
            self.notes.append(f"rename skipped, source missing: {src}")

    # -- executors -----------------------------------------------------

    def _step(self, att: _Attempt) -> None:
        spec = self.spec
        if att.phase == "setup":
            att.conn.mkdirs(spec.attempt_dir(att.task, att.number))
            att.phase = "write"
            return
        if att.phase == "write":
            body = self._body(att)
            out = att.conn.create(spec.temp_part(att.task, att.number), overwrite=False)
            att.created = True
            if att.outcome.kind is OutcomeKind.FAIL_BEFORE_CLOSE:
                out.write(body[: len(body) // 2])
                out.abort()
                self._abort(att, "failed")
                self.failures[att.task] += 1
                return
            out.write(body)
            out.close()
            att.phase = "finish"
            att.stall = att.outcome.ticks if att.outcome.kind is OutcomeKind.SLOW else 0
            return
        if att.stall > 0:
            att.stall -= 1
            return
        if att.outcome.kind is OutcomeKind.FAIL_AFTER_CLOSE:
            # executor lost after close: no abort runs, output stays behind
            att.state = "crashed"
            self.failures[att.task] += 1
            return
        if att.task in self.committed:
            self._abort(att, "denied")
            return
        self._commit_task(att)
        for other in self.attempts[att.task]:
            if other is not att and other.state == "running":
                self._abort(other, "killed")

    def _body(self, att: _Attempt) -> bytes:
        if self.spec.input is None:
            p = self.spec.parts[att.task]
            return part_body(p.size, p.seed)
        src = self.inputs.get(att.task)
        if src is None:
            return b""
        with att.conn.open(src) as stream:
            return stream.read()

    def _commit_task(self, att: _Attempt) -> None:
        spec = self.spec
        att.state = "committed"
        self.committed[att.task] = att
        attempt_dir = spec.attempt_dir(att.task, att.number)
        try:
            statuses = att.conn.list_status(attempt_dir)
        except NotFoundError:
            statuses = []
        for st in statuses:
            if st.is_directory:
                continue
            if spec.committer is Committer.V2:
                dst = spec.dataset.child(st.path.name)
            else:
                dst = spec.task_dir(att.task).child(st.path.name)
            self._rename(att.conn, st.path, dst)

    def _abort(self, att: _Attempt, state: str) -> None:
        att.state = state
        if att.phase == "setup":
            return
        if att.created:
            att.conn.delete(self.spec.temp_part(att.task, att.number), recursive=False)
        att.conn.delete(self.spec.attempt_dir(att.task, att.number), recursive=True)


def read_dataset(dataset: FsPath, conn: FsContract,
                 read_option: ReadOption = ReadOption.LISTING) -> DatasetRead:
    """Consumer-side read: which attempt backs each part, and its bytes."""
    read_option = ReadOption(read_option)
    out = DatasetRead()
    if read_option is ReadOption.MANIFEST:
        resolve = getattr(conn, "resolve_parts_via_manifest", None)
        if resolve is None:
            raise ConfigError("manifest reads need a rename-free connector")
        paths = [dataset.with_key(k.name) for k in resolve(dataset)]
    else:
        if not conn.exists(dataset.child(SUCCESS_NAME)):
            return out
        paths = [s.path for s in conn.list_status(dataset) if not s.is_directory]
    for path in paths:
        parsed = parse_final_name(path.name)
        idx = part_index(parsed.part) if parsed else None
        if idx is None:
            continue
        if idx in out.resolution:
            out.duplicates += 1
            continue
        try:
            with conn.open(path) as stream:
                data = stream.read()
        except NotFoundError:
            continue
        out.resolution[idx] = parsed.attempt
        out.data[idx] = data
    return out


def _verify(spec_parts: Iterable[PartSpec], read: DatasetRead) -> int:
    return sum(
        1 for p in spec_parts
        if read.data.get(p.index) == part_body(p.size, p.seed)
    )


def run_job(spec: JobSpec, connector: ConnectorFactory, policy: Optional[ConsistencyPolicy] = None,
            faults: Optional[FaultPlan] = None, *, store: Optional[ObjectStore] = None) -> RunReport:
    """Run one write job end to end, then read its output back as a consumer.

    The consumer read happens ``spec.read_delay`` ticks after the job and is
    metered separately in ``read_tally``.
    """
    store = store or ObjectStore(policy)
    faults = faults or FaultPlan()
    job = _JobRun(spec, connector, store, faults)
    if spec.committer is Committer.NONE and not job.driver.rename_free:
        raise ConfigError("committer 'none' needs a rename-free connector")
    if spec.read_option is ReadOption.MANIFEST and not job.driver.rename_free:
        raise ConfigError("manifest read option needs a rename-free connector")

    start_tally, start_events = store.snapshot_tally(), len(store.events)
    ok = job.run()
    end_tally = store.snapshot_tally()
    tally = end_tally - start_tally
    trace = store.events[start_events:]

    store.advance(spec.read_delay)
    before_read = store.snapshot_tally()
    read = read_dataset(spec.dataset, connector(store), spec.read_option)
    read_tally = store.snapshot_tally() - before_read

    wrote_success = ok and _success_exists(store, spec.dataset)
    readable = _verify(spec.parts, read)
    return RunReport(
        tally=tally,
        trace=list(trace),
        wrote_success=wrote_success,
        parts_readable=readable,
        expected_parts=len(spec.parts),
        complete=readable == len(spec.parts),
        resolution=dict(read.resolution) if wrote_success else {},
        committed={t: spec.attempt_id(t, a.number) for t, a in sorted(job.committed.items())},
        read_tally=read_tally,
        notes=job.notes,
    )


def run_read_job(dataset: FsPath, parts: list[PartSpec], connector: ConnectorFactory,
                 store: ObjectStore) -> RunReport:
    """Read-only job: the driver lists the input, one task per part reads it."""
    start_tally, start_events = store.snapshot_tally(), len(store.events)
    driver = connector(store)
    statuses = driver.list_status(dataset)
    store.advance(1)
    data: dict[int, bytes] = {}
    for st in statuses:
        if st.is_directory or is_hidden(st.path.name):
            continue
        parsed = parse_final_name(st.path.name)
        idx = part_index(parsed.part) if parsed else None
        if idx is None or idx in data:
            continue
        with connector(store).open(st.path) as stream:
            data[idx] = stream.read()
    store.advance(1)
    tally = store.snapshot_tally() - start_tally
    read = DatasetRead(data=data)
    readable = _verify(parts, read)
    return RunReport(
        tally=tally,
        trace=list(store.events[start_events:]),
        wrote_success=False,
        parts_readable=readable,
        expected_parts=len(parts),
        complete=readable == len(parts),
        resolution={},
    )


def _success_exists(store: ObjectStore, dataset: FsPath) -> bool:
    name = f"{dataset.key}/{SUCCESS_NAME}" if dataset.key else SUCCESS_NAME
    return name in store.live_names(dataset.container, name)


def write_plain_dataset(conn: FsContract, dataset: FsPath, parts: Iterable[PartSpec]) -> None:
    """Write a committed dataset (``part-NNNNN`` + ``_SUCCESS``) directly,
    bypassing the committer; used to set up read and copy inputs."""
    for p in parts:
        out = conn.create(dataset.child(part_name(p.index)), overwrite=True)
        out.write(part_body(p.size, p.seed))
        out.close()
    conn.create(dataset.child(SUCCESS_NAME), overwrite=True).close()


def canonical_bodies(parts: Iterable[PartSpec]) -> Mapping[int, bytes]:
    return {p.index: part_body(p.size, p.seed) for p in parts}
