import os
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from fusetrack.config import load_config
from fusetrack.geometry import CameraModel
from fusetrack.scenario import generate_scenario

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ROOT = Path(__file__).resolve().parents[1]
FIXTURES = Path(__file__).resolve().parent / "fixtures"
CONFIGS = ROOT / "configs"


@pytest.fixture
def cam():
    """The worked-example camera: f=1500, vo=500, h=1.5, level."""
    return CameraModel(focal_length=1500.0, principal_row=500.0, principal_col=800.0,
                       mount_height=1.5, pitch=0.0, pitch_smoothing=1.0)


@pytest.fixture(scope="session")
def fixture_config():
    return load_config(CONFIGS / "fixture.yaml")


@pytest.fixture(scope="session")
def fixture_scenario(fixture_config):
    return generate_scenario(fixture_config)


# acceptance criteria: one pass/fail line each at the end of the run
_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when not in ("setup", "call"):
        return
    n, title = marker.args
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    if rep.failed or (rep.when == "call" and rep.passed) or rep.skipped:
        status = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")
        _CRITERIA[n] = (title, status, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, status, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d} {status}: {title}" + (f" ({detail})" if detail else ""))
