"""Shared fixtures and the acceptance-suite summary lines."""

import re

import pytest

from ffep.ingest import ColumnSchema, bundled_synthetic_path, load_csv, preprocess


@pytest.fixture(scope="session")
def synthetic_dataset():
    schema = ColumnSchema(
        label="status",
        label_map={"1": 1, "2": -1},
        numeric=("age", "year", "nodes"),
    )
    return preprocess(load_csv(bundled_synthetic_path(), schema), name="synthetic")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One PASS/FAIL line per acceptance criterion, printed after the run."""
    results = {}
    for outcome in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(report, "nodeid", "")
            m = re.search(r"test_acceptance\.py::test_criterion_(\d+)", nodeid)
            if m:
                n = int(m.group(1))
                verdict = "PASS" if outcome == "passed" else "FAIL"
                if results.get(n) != "FAIL":
                    results[n] = verdict
    if results:
        terminalreporter.write_sep("-", "acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(f"[acceptance] criterion {n}: {results[n]}")
