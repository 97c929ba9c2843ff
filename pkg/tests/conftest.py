import numpy as np
import pytest

from mflsm import forward
from mflsm.scene import ApertureSelection, SceneConfig


@pytest.fixture(scope="session")
def scene():
    return SceneConfig()


@pytest.fixture(scope="session")
def clean(scene):
    """Noiseless full-ring series dataset for the default scene."""
    return forward.synthesize(scene, "series")


@pytest.fixture(scope="session")
def scene_180(scene):
    return scene.with_aperture(ApertureSelection.preset("180"))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
