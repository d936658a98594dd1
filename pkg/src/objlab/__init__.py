"""Simulated object store, rename-free and rename-based connectors, and a
deterministic mini-Spark to drive them."""

from objlab.engine import Committer, FaultPlan, JobSpec, Outcome, PartSpec, RunReport, read_dataset, run_job
from objlab.fs import AttemptId, FsPath, match_temp_pattern, final_name_for, parse_final_name
from objlab.legacy import S3A_LIKE, SWIFT_LIKE, LegacyConnector, LegacyProfile
from objlab.stocator import ReadOption, StocatorConnector, SuccessManifest
from objlab.store import ConsistencyPolicy, ObjectKey, ObjectStore, OpTally, RestOp

__all__ = [
    "AttemptId", "Committer", "ConsistencyPolicy", "FaultPlan", "FsPath", "JobSpec",
    "LegacyConnector", "LegacyProfile", "ObjectKey", "ObjectStore", "OpTally", "Outcome",
    "PartSpec", "ReadOption", "RestOp", "RunReport", "S3A_LIKE", "SWIFT_LIKE",
    "StocatorConnector", "SuccessManifest", "final_name_for", "match_temp_pattern",
    "parse_final_name", "read_dataset", "run_job",
]
