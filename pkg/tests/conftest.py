import numpy as np
import pytest

from lanebench.geometry import CameraModel
from lanebench.scene import render_scene
from lanebench.simulator import Scenario, VehicleState
from lanebench.detectors import ClassicalDetector


@pytest.fixture(scope="session")
def camera():
    return CameraModel.forward_facing(320, 192, 280.0, 1.2)


@pytest.fixture(scope="session")
def scenario():
    return Scenario()


@pytest.fixture(scope="session")
def scene(scenario):
    return scenario.scene()


@pytest.fixture(scope="session")
def benign_frame(scene, camera):
    return render_scene(scene, camera, VehicleState(v=16.0))


@pytest.fixture(scope="session")
def classical(scenario, camera):
    size = (camera.image_width, camera.image_height)
    return ClassicalDetector(size, h_samples=scenario.h_samples(camera, size))


@pytest.fixture(scope="session")
def h_samples(scenario, camera):
    return scenario.h_samples(camera, (camera.image_width, camera.image_height))
