from __future__ import annotations

from pathlib import Path

import pytest

from marstransfer.cli import load_run_config, run

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

# (criterion number, passed, detail) collected by the acceptance tests
CRITERIA: list[tuple[str, bool, str]] = []


@pytest.fixture
def record():
    def _record(label, passed: bool, detail: str) -> bool:
        line = f"criterion {label}: {'PASS' if passed else 'FAIL'}  {detail}"
        print(line)
        CRITERIA.append((str(label), bool(passed), detail))
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed, detail in CRITERIA:
        terminalreporter.write_line(f"criterion {label}: {'PASS' if passed else 'FAIL'}  {detail}")


def _sweep(tmp_path_factory, name: str):
    rc = load_run_config(CONFIGS / f"{name}.json")
    out = tmp_path_factory.mktemp(name)
    rows, solutions = run(rc, out)
    return {"rows": rows, "solutions": solutions, "out": out, "config": rc}


@pytest.fixture(scope="session")
def circular_sweep(tmp_path_factory):
    return _sweep(tmp_path_factory, "circular_sweep")


@pytest.fixture(scope="session")
def elliptic_sweep(tmp_path_factory):
    return _sweep(tmp_path_factory, "elliptic_sweep")


@pytest.fixture(scope="session")
def perturbed_case(tmp_path_factory):
    return _sweep(tmp_path_factory, "perturbed")


@pytest.fixture(scope="session")
def comparison_sweep(tmp_path_factory):
    return _sweep(tmp_path_factory, "comparison")
