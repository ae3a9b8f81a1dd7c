import math
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from bevboost.geometry import BevSpec, CameraRig  # noqa: E402


@pytest.fixture
def forward_rig():
    return CameraRig(fx=100, fy=100, cx=64, cy=48, width=128, height=96, cam_height=1.5, pitch=0.2)


@pytest.fixture
def default_spec():
    return BevSpec(x_min=4, x_max=24, y_half=10, mpp=0.05)


@pytest.fixture
def identity_pair():
    """Nadir rig and a raster chosen so the ground homography is the identity."""
    rig = CameraRig(fx=100, fy=100, cx=63.5, cy=47.5, width=128, height=48, cam_height=1.5, pitch=math.pi / 2)
    spec = BevSpec(x_min=0.0, x_max=0.72, y_half=0.96, mpp=0.015)
    return rig, spec


# A quarter-size rig, raster and generator so training tests run in seconds.
TINY_RIG = CameraRig(fx=45, fy=45, cx=31.5, cy=23.5, width=64, height=48, cam_height=1.5, pitch=0.25)
TINY_SPEC = BevSpec(x_min=4.0, x_max=16.0, y_half=8.0, mpp=0.25)
TINY_GEN = dict(base_channels=8, max_channels=32, loc_channels=8, in_width=64, in_height=48,
                out_width=64, out_height=48)


@pytest.fixture(scope="session")
def tiny_manifest(tmp_path_factory):
    from bevboost.datasetforge import make_dataset

    out = tmp_path_factory.mktemp("tiny_dataset")
    make_dataset(10, out, TINY_RIG, TINY_SPEC, seed=3, workers=1)
    return out / "manifest.jsonl"


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance is None or not acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(acceptance.RESULTS):
        terminalreporter.write_line(acceptance.RESULTS[n])
