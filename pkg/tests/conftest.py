"""Shared builders for the test suite."""
import numpy as np
import pytest

from nekhlab.hamcore import Envelope, Mode, Perturbation, PowerLaw, SlowSystem


def one_mode_perturbation(amplitude=0.5, k=(1, 0), phase=0.0, envelope=None):
    env = envelope if envelope is not None else Envelope()
    return Perturbation((Mode.simple(np.array(k), amplitude, phase, env),))


@pytest.fixture
def convex_system():
    """n=2 convex power-law system with one theta-only mode."""
    return SlowSystem(PowerLaw(2, 2, radius=1.0), one_mode_perturbation(), 1e-3, 0.5)
