import numpy as np
import pytest

from lattice_drain import build_chain, build_hofstadter, build_ring_flux, build_step_chain


@pytest.fixture(scope="session")
def reference_lattices():
    return {
        "chain": build_chain(25, 1.0),
        "step": build_step_chain(25, 1.0, 2.0),
        "hofstadter": build_hofstadter(5, 5, 1.0, np.pi / 2),
    }


def random_hermitian(n, seed, scale=1.0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * (x + x.conj().T) / 2


def ci_models():
    """Small models used wherever a property must hold 'on every CI model'."""
    return [
        build_chain(2), build_chain(8), build_chain(12, potential=np.linspace(-1, 1, 12)),
        build_step_chain(9, 1.0, 1.5), build_ring_flux(10, 1.0, np.pi / 2),
        build_ring_flux(7, 1.0, 0.3), build_hofstadter(3, 4, 1.0, np.pi / 2),
    ]
