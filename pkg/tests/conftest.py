import numpy as np
import pytest

from filagauge.measurement import calibrate_rig
from filagauge.synth import SynthScene, default_rig, render_frame, with_distance

CALIBRATION_DISTANCES = (47.0, 50.0, 53.0)

# criterion id -> (passed, detail); filled by test_acceptance, printed at the end
ACCEPTANCE = {}


def calibrate_on(scene, rig, diameter, distances=CALIBRATION_DISTANCES, frames=4):
    sets = []
    for L in distances:
        s = with_distance(scene, L)
        sets.append(([render_frame(s, 1000 + i)[0] for i in range(frames)], diameter, L))
    return calibrate_rig(sets, rig)


@pytest.fixture(scope="session")
def scene():
    return SynthScene()


@pytest.fixture(scope="session")
def rig(scene):
    return default_rig(scene)


@pytest.fixture(scope="session")
def calibration(scene, rig):
    return calibrate_on(scene, rig, 1.75)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k.split()[0])):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {key}: {detail}")
