import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from thermokuramoto.model import EnsembleState, ModelParams

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def sym_matrix(rng, n, lo, hi):
    m = rng.uniform(lo, hi, size=(n, n))
    return np.triu(m) + np.triu(m, 1).T


def random_params(seed, n, *, nu_scale=1.0, psi_lo=0.1, zeta_lo=0.1, eta=None):
    rng = np.random.default_rng(seed)
    return ModelParams(
        kappa1=rng.uniform(0.2, 3.0),
        kappa2=rng.uniform(0.2, 3.0),
        eta=rng.uniform(0.0, 2.0) if eta is None else eta,
        t_star=rng.uniform(0.5, 2.0),
        nat_freq=nu_scale * rng.uniform(-1.0, 1.0, n),
        psi=sym_matrix(rng, n, psi_lo, 1.0),
        zeta=sym_matrix(rng, n, zeta_lo, 1.0),
    )


def random_state(seed, n, temp_range=(0.2, 5.0), phase_range=(-np.pi, np.pi)):
    rng = np.random.default_rng(seed + 10_000)
    return EnsembleState(0.0, rng.uniform(*phase_range, n), rng.uniform(*temp_range, n))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
