import numpy as np
import pytest

from qkalman import SystemSpec


def random_spec(rng: np.random.Generator, *, span: float = 2.0, eta_min: float = 0.0) -> SystemSpec:
    """One random system: G, Re C, Im C entries uniform in [-span, span],
    eta uniform in (eta_min, 1], phi uniform in [0, 2*pi)."""
    g11, g12, g22 = rng.uniform(-span, span, 3)
    c = rng.uniform(-span, span, 2) + 1j * rng.uniform(-span, span, 2)
    eta = 1.0 - rng.uniform(0.0, 1.0 - eta_min)
    phi = rng.uniform(0.0, 2.0 * np.pi)
    return SystemSpec(G=np.array([[g11, g12], [g12, g22]]), C=c, phi=phi, eta=eta)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(987654321)
