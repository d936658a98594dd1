"""The six connector/committer scenarios and the workload catalog."""

from __future__ import annotations

import enum
import zlib
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional

from objlab.engine import (
    SPECULATION_PLAN,
    Committer,
    ConnectorFactory,
    FaultPlan,
    JobSpec,
    PartSpec,
    RunReport,
    run_job,
    run_read_job,
    write_plain_dataset,
)
from objlab.errors import ConfigError
from objlab.fs import FsPath
from objlab.harness.pricing import UNIFORM, PricingModel, compute_cost
from objlab.legacy import S3A_LIKE, SWIFT_LIKE, LegacyConnector, LegacyProfile
from objlab.stocator import ReadOption, StocatorConnector
from objlab.store import ConsistencyPolicy, ObjectStore


@dataclass(frozen=True)
class Scenario:
    name: str
    committer: Committer
    profile: Optional[LegacyProfile] = None  # None selects the rename-free connector
    read_option: ReadOption = ReadOption.LISTING

    def __post_init__(self):
        if self.profile is None and self.committer is not Committer.NONE:
            raise ConfigError(f"{self.name}: the rename-free connector runs without a committer")
        if self.profile is not None and self.committer is Committer.NONE:
            raise ConfigError(f"{self.name}: a rename-based connector needs committer v1 or v2")
        if self.profile is not None and self.read_option is ReadOption.MANIFEST:
            raise ConfigError(f"{self.name}: manifest reads need the rename-free connector")

    @property
    def rename_free(self) -> bool:
        return self.profile is None

    @property
    def scheme(self) -> str:
        return StocatorConnector.scheme if self.profile is None else self.profile.scheme

    def connector_factory(self) -> ConnectorFactory:
        if self.profile is None:
            option = self.read_option
            return lambda store: StocatorConnector(store, option)
        profile = self.profile
        return lambda store: LegacyConnector(store, profile)


SCENARIOS: dict[str, Scenario] = {
    s.name: s
    for s in (
        Scenario("HS-Base", Committer.V1, SWIFT_LIKE),
        Scenario("S3a-Base", Committer.V1, S3A_LIKE),
        Scenario("Stocator", Committer.NONE),
        Scenario("HS-Cv2", Committer.V2, SWIFT_LIKE),
        Scenario("S3a-Cv2", Committer.V2, S3A_LIKE),
        Scenario("S3a-Cv2-FU", Committer.V2, replace(S3A_LIKE, name="s3a-like-fu", fast_upload=True)),
    )
}


def get_scenario(name: str, read_option: Optional[ReadOption] = None) -> Scenario:
    try:
        scenario = SCENARIOS[name]
    except KeyError:
        raise ConfigError(f"unknown scenario {name!r}; known: {', '.join(SCENARIOS)}") from None
    if read_option is not None and scenario.rename_free:
        scenario = replace(scenario, read_option=ReadOption(read_option))
    return scenario


class WorkloadKind(str, enum.Enum):
    SINGLE_TASK = "single-task"
    THREE_TASK = "three-task"
    WRITE_ONLY = "write-only"
    COPY = "copy"
    READ_ONLY = "read-only"


_TITLES = {
    WorkloadKind.SINGLE_TASK: "SingleTask",
    WorkloadKind.THREE_TASK: "ThreeTask",
    WorkloadKind.WRITE_ONLY: "WriteOnly",
    WorkloadKind.COPY: "Copy",
    WorkloadKind.READ_ONLY: "ReadOnly",
}


@dataclass(frozen=True)
class Workload:
    kind: WorkloadKind
    parts: int = 1
    size: int = 1024
    consistency: ConsistencyPolicy = field(default_factory=ConsistencyPolicy)
    faults: FaultPlan = field(default_factory=FaultPlan)
    read_delay: int = 0
    job_timestamp: str = "201512062056"
    # one task number for every task, as in the speculation example
    shared_task_number: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", WorkloadKind(self.kind))
        if self.parts < 1 or self.size < 0:
            raise ConfigError("workloads need parts >= 1 and size >= 0")

    @property
    def label(self) -> str:
        title = _TITLES[self.kind]
        if self.kind in (WorkloadKind.SINGLE_TASK, WorkloadKind.THREE_TASK):
            return title
        return f"{title}({self.parts}x{self.size})"

    def part_specs(self, seed: int) -> list[PartSpec]:
        # body seeds depend only on (seed, index) so every scenario writes the same bytes
        return [PartSpec(i, self.size, zlib.crc32(f"{seed}:{i}".encode())) for i in range(self.parts)]


def single_task(size: int = 1024, **kw) -> Workload:
    return Workload(WorkloadKind.SINGLE_TASK, 1, size, job_timestamp="201702221313", **kw)


def three_task(size: int = 1024, **kw) -> Workload:
    kw.setdefault("faults", SPECULATION_PLAN)
    return Workload(WorkloadKind.THREE_TASK, 3, size, shared_task_number="000000", **kw)


def write_only(parts: int = 8, size: int = 1 << 20, **kw) -> Workload:
    return Workload(WorkloadKind.WRITE_ONLY, parts, size, **kw)


def copy(parts: int = 8, size: int = 1 << 20, **kw) -> Workload:
    return Workload(WorkloadKind.COPY, parts, size, **kw)


def read_only(parts: int = 8, size: int = 1 << 20, **kw) -> Workload:
    return Workload(WorkloadKind.READ_ONLY, parts, size, **kw)


def make_workload(kind: str, parts: int, size: int, **kw) -> Workload:
    """Build a catalog workload; the two fixed example programs ignore ``parts``."""
    kind = WorkloadKind(kind)
    if kind is WorkloadKind.SINGLE_TASK:
        return single_task(size, **kw)
    if kind is WorkloadKind.THREE_TASK:
        return three_task(size, **kw)
    return Workload(kind, parts, size, **kw)


_DATASETS = {
    WorkloadKind.SINGLE_TASK: "data.txt",
    WorkloadKind.THREE_TASK: "data.txt",
    WorkloadKind.WRITE_ONLY: "teragen",
    WorkloadKind.COPY: "copy",
    WorkloadKind.READ_ONLY: "input",
}
CONTAINER = "res"


def run_cell(workload: Workload, scenario: Scenario, repeat: int = 0, seed: int = 0,
             pricing: PricingModel = UNIFORM) -> RunReport:
    """One matrix cell on a private store. Input setup is excluded from the tally."""
    store = ObjectStore(workload.consistency)
    factory = scenario.connector_factory()
    parts = workload.part_specs(seed)
    dataset = FsPath(scenario.scheme, CONTAINER, (_DATASETS[workload.kind],))
    source = None
    if workload.kind in (WorkloadKind.COPY, WorkloadKind.READ_ONLY):
        source = FsPath(scenario.scheme, CONTAINER, ("input",))
        write_plain_dataset(factory(store), source, parts)
        c = workload.consistency
        store.advance(max(c.create_listing_lag, c.delete_listing_lag) + 1)

    if workload.kind is WorkloadKind.READ_ONLY:
        report = run_read_job(source, parts, factory, store)
    else:
        spec = JobSpec(
            dataset,
            parts,
            committer=scenario.committer,
            read_option=scenario.read_option,
            job_timestamp=workload.job_timestamp,
            # attempt dirs of a shared task number would collide under a rename-based committer
            task_number=workload.shared_task_number if scenario.rename_free else None,
            input=source,
            read_delay=workload.read_delay,
        )
        report = run_job(spec, factory, faults=workload.faults, store=store)
    report.scenario = scenario.name
    report.workload = workload.label
    report.repeat = repeat
    report.cost = compute_cost(report.tally, pricing)
    return report


def run_matrix(workloads: Iterable[Workload], scenarios: Iterable[Scenario], repeats: int = 1,
               seed: int = 0, pricing: PricingModel = UNIFORM) -> list[RunReport]:
    if repeats < 1:
        raise ConfigError("repeats must be >= 1")
    workloads, scenarios = list(workloads), list(scenarios)
    return [
        run_cell(w, s, r, seed, pricing)
        for w in workloads
        for s in scenarios
        for r in range(repeats)
    ]
