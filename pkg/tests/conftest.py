import numpy as np
import pytest

from distributions import Normal
from euclidean import EuclideanFit
from model_core import Dataset, EuclideanParams, KnownComponent
from simulator import builtin_scenario, simulate

D0 = [(-1.0, 1.0), (0.0, 2.0), (1.0, 3.0), (2.0, 4.0)]


@pytest.fixture
def d0() -> Dataset:
    return Dataset.from_observations(D0)


@pytest.fixture
def standard_known() -> KnownComponent:
    return KnownComponent(0.0, 0.0, Normal(1.0))


@pytest.fixture(scope="session")
def won_sample():
    """Weak-overlap normal sample, π₀ = 0.7, n = 2000."""
    return simulate(builtin_scenario("WOn", 0.7, 2000, 11))


@pytest.fixture(scope="session")
def small_datasets():
    """50 random mixture-like datasets with n ≤ 200."""
    rng = np.random.default_rng(2024)
    out = []
    for _ in range(50):
        n = int(rng.integers(20, 201))
        x = rng.normal(0.5, 1.0, n)
        z = rng.random(n) < 0.6
        y = np.where(z, 1.0 + 0.8 * x + rng.normal(0, 0.5, n), rng.normal(0, 1, n))
        out.append(Dataset(x, y))
    return out


def make_fit(alpha: float, beta: float, pi: float, n: int = 1) -> EuclideanFit:
    """Bare EuclideanFit carrying only the parameters (no covariance)."""
    return EuclideanFit(
        params=EuclideanParams(alpha, beta, pi),
        sigma=np.zeros((3, 3)),
        std_errors=np.zeros(3),
        pi_valid=0 < pi <= 1,
        jacobian=np.zeros((3, 8)),
        gamma=None,
        n=n,
    )
