import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from freespace.scene import Plane, Pose, Scene, StereoRig, ValueNoise

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def wall(z, texture=None):
    return Plane((0.0, 0.0, -1.0), -z, texture or ValueNoise(scale=0.2, amplitude=90.0, octaves=3))


@pytest.fixture
def small_rig():
    # 160x120 keeps the full pipeline under a second per frame
    return StereoRig(focal_px=150.0, baseline_m=0.12, width=160, height=120)


@pytest.fixture
def wall_scene():
    return Scene([wall(4.0)])


@pytest.fixture
def origin():
    return Pose()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        title, ok, detail = results[n]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {n}. {title}: {detail}")
