import logging

import numpy as np
import pytest

from ntk_convergence.interfaces import ActivationKind, ModelParams
from ntk_convergence.network import init_params
from ntk_convergence.pinn import make_instance, sample_dataset
from ntk_convergence.regression import RegressionDataset, make_regression_dataset

# Configure logging
logger = logging.getLogger(__name__)


@pytest.fixture
def rng():
    """Seeded generator for test-local random inputs."""
    return np.random.default_rng(20240611)


@pytest.fixture
def regression_data() -> RegressionDataset:
    """Small seeded regression dataset on the unit circle (d = 2, n = 6)."""
    return make_regression_dataset(6, 2, seed=3)


@pytest.fixture
def relu_params() -> ModelParams:
    return init_params(64, 3, ActivationKind.RELU, seed=5)


@pytest.fixture
def pinn_data():
    """poly-sine, d = 1, with 6 interior and 6 boundary points."""
    logger.debug("Sampling PINN fixture dataset")
    return sample_dataset(make_instance("poly-sine", 1), 6, 6, seed=7)


@pytest.fixture
def relu3_params() -> ModelParams:
    return init_params(16, 3, ActivationKind.RELU_CUBED, seed=11)


@pytest.fixture
def tanh_params() -> ModelParams:
    return init_params(16, 3, ActivationKind.SMOOTH_TANH, seed=13)


@pytest.fixture
def config_file(tmp_path):
    """Write a config document into a temporary file and return its path."""
    def write(text: str):
        path = tmp_path / "run.conf"
        path.write_text(text)
        return path
    return write
