import functools
import json

import pytest

from morawetz_lab.experiment import convergence_study, preset_config, run_experiment


@functools.lru_cache(maxsize=None)
def _cached_run(name, overrides_json):
    return run_experiment(preset_config(name, **json.loads(overrides_json)), write=False)


def cached_run(name, **overrides):
    """Run a preset once per session; later calls with the same arguments share the manifest."""
    return _cached_run(name, json.dumps(overrides, sort_keys=True))


@functools.lru_cache(maxsize=None)
def _cached_convergence(name, levels, overrides_json):
    return convergence_study(preset_config(name, **json.loads(overrides_json)), levels)


def cached_convergence(name, levels=3, **overrides):
    return _cached_convergence(name, levels, json.dumps(overrides, sort_keys=True))


@pytest.fixture
def run_preset():
    return cached_run


@pytest.fixture
def run_convergence():
    return cached_convergence


ACCEPTANCE = []


@pytest.fixture
def record_criterion():
    def record(number, title, ok, detail=""):
        ACCEPTANCE.append((number, title, bool(ok), detail))
        print(f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}  {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, ok, detail in sorted(ACCEPTANCE, key=lambda x: x[0]):
        terminalreporter.write_line(f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}  {detail}")
