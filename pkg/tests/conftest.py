import numpy as np
import pytest

from latentgeom.cli import generate_network


@pytest.fixture(scope="session")
def curved_net():
    """8-layer leaky-ReLU(0.2) net, d = 32, variance-preserving init."""
    return generate_network([32] * 9, 0.2, 0)


@pytest.fixture(scope="session")
def acceptance_net():
    """The fixed-seed curved net for ordering experiments.

    slope 0.8 keeps the Jacobian spectrum away from full collapse so
    the k = 10 projection distances do not saturate at 1; gain 1.5
    scales the image (~155 radius) so intensity-12 traversals stay in
    the local regime.  Cell boundaries are unchanged by the gain.
    """
    return generate_network([32] * 9, 0.8, 0, gain=1.5)


@pytest.fixture(scope="session")
def small_curved_net():
    return generate_network([6, 6, 6], 0.2, 1)


@pytest.fixture(scope="session")
def affine_net():
    return generate_network([8] * 4, 1.0, 2)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
