import numpy as np
import pytest

from msalab import DisorderModel, SingleSiteMeasure


@pytest.fixture(scope="session")
def anderson_w4():
    """1D Anderson chain with uniform[0, 4] couplings (the band-edge workhorse)."""
    return DisorderModel.anderson(1, SingleSiteMeasure.uniform(0.0, 4.0))


@pytest.fixture(scope="session")
def anderson_2d():
    return DisorderModel.anderson(2, SingleSiteMeasure.uniform(0.0, 4.0))


@pytest.fixture(scope="session")
def free_model():
    """Deterministic zero-potential model (single atom at 0)."""
    return DisorderModel.anderson(1, SingleSiteMeasure.pointlist([(0.0, 1.0)]))


@pytest.fixture()
def rng():
    return np.random.Generator(np.random.Philox(seed=20260809))
