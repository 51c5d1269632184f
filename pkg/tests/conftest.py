import numpy as np
import pytest

from liplive.assets import load_background, load_motion_model
from liplive.carrier import draw_carriers
from liplive.demodulation import demodulate
from liplive.interference import eliminate_static
from liplive.simulator import SpeakerParams, make_genuine_scene, simulate


@pytest.fixture(scope="session")
def motion_model():
    return load_motion_model()


@pytest.fixture(scope="session")
def background():
    return load_background()


@pytest.fixture(scope="session")
def genuine_scene():
    return make_genuine_scene(4, SpeakerParams(), seed=1)


@pytest.fixture(scope="session")
def genuine_signal(genuine_scene):
    rec = simulate(genuine_scene)
    return eliminate_static(demodulate(rec, genuine_scene.carriers))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
