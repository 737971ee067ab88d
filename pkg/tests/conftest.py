"""Shared fixtures. Thread pinning must happen before numpy loads."""
import os

for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
             "NUMEXPR_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import numpy as np
import pytest

from freqshield.data import SynthConfig, gen_synthetic


@pytest.fixture(scope="session")
def small_split():
    """64-example synthetic split shared by fast tests."""
    return gen_synthetic(SynthConfig(n_examples=64, seed=7))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
