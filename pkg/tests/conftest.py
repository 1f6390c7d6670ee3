import numpy as np
import pytest

from semcom_market.config import load_config


@pytest.fixture(scope="session")
def default_cfg():
    """Reference experiment configuration (all defaults)."""
    return load_config()


@pytest.fixture(scope="session")
def default_market(default_cfg):
    """Five-user reference market: c=2, fee=10, cap=200 MHz, p_max=20."""
    return default_cfg.market()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
