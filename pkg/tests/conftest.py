import numpy as np
import pytest

from mrclean.recording import ChannelInfo, Modality, Recording
from mrclean.synth import SessionConfig, generate_session


@pytest.fixture(scope="session")
def session():
    """Default simulated session, seed 0 (about two minutes of data)."""
    return generate_session(SessionConfig(), seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_recording(data, rate_hz=5000.0, names=None, modality=Modality.EEG, markers=()):
    data = np.atleast_2d(np.asarray(data, dtype=float))
    names = names or [f"ch{i}" for i in range(data.shape[0])]
    mods = modality if isinstance(modality, (list, tuple)) else [modality] * len(names)
    return Recording(rate_hz, [ChannelInfo(n, m) for n, m in zip(names, mods)], data, markers)
