from objlab.harness.catalog import SCENARIOS, Scenario, Workload, WorkloadKind, run_cell, run_matrix
from objlab.harness.pricing import PricingModel, compute_cost
from objlab.harness.report import COLUMNS, parse_csv, render_report, report_row

__all__ = [
    "COLUMNS", "PricingModel", "SCENARIOS", "Scenario", "Workload", "WorkloadKind",
    "compute_cost", "parse_csv", "render_report", "report_row", "run_cell", "run_matrix",
]
