import json
import os

import pytest

from forchlab.cli import snapshot_times
from forchlab.config import parse_config
from forchlab.grid import Grid
from forchlab.solver import FVSolver

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DEMO_CONFIGS = os.path.join(ROOT, "demos", "configs")


def demo_config(name, **overrides):
    """A demo configuration as a dict, with top-level sections shallow-merged from ``overrides``."""
    with open(os.path.join(DEMO_CONFIGS, f"{name}.json")) as fh:
        raw = json.load(fh)
    for k, v in overrides.items():
        if isinstance(v, dict) and isinstance(raw.get(k), dict):
            raw[k] = {**raw[k], **v}
        else:
            raw[k] = v
    return raw


def build(raw):
    return parse_config(json.dumps(raw))


def simulate(rc, n=None):
    shape = rc.grid_shape if n is None else (n,) * 3
    grid = Grid(shape, rc.spec.domain)
    times, t0s = snapshot_times(rc, grid)
    solver = rc.mms.solver(rc.spec, grid) if rc.mms else FVSolver(rc.spec, grid)
    return solver.run(times, dt=rc.cfg["time"].get("dt")), t0s


@pytest.fixture(scope="session")
def smooth_run():
    """16^3 smooth-data run with ten snapshots inside t0 and a few after it."""
    rc = build(demo_config("smooth", time={"horizon": 0.004, "snapshots": 5, "t0_snapshots": 10}))
    traj, t0s = simulate(rc)
    return rc, traj, t0s


@pytest.fixture(scope="session")
def spiked_run():
    rc = build(demo_config("spiked"))
    traj, t0s = simulate(rc)
    return rc, traj, t0s


# ---------------------------------------------------------------------------
# acceptance summary: one line per criterion at the end of the run

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is None or rep.when != "call":
        return
    n, title = m.args
    detail = "; ".join(f"{k}={v}" for k, v in item.user_properties)
    prev = _CRITERIA.get(n)
    ok = rep.passed and (prev is None or prev[1])
    _CRITERIA[n] = (title, ok, (prev[2] + "; " if prev and prev[2] else "") + detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, ok, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title}  [{detail}]")
