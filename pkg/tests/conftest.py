import numpy as np
import pytest

from abcflux.kernel import ModelParams


@pytest.fixture
def canonical_params():
    """E=(1,0,-1), uniform densities, gamma=1, weak asymmetric rates."""
    return ModelParams.from_asymmetry(
        1.0, 0.5, energies=(1.0, 0.0, -1.0), densities=(1 / 3, 1 / 3, 1 / 3),
        d1=1.0, kn_rule=(0.1, 0.0), n=2, lattice_size=16)


class ConstFn:
    """Test double with the analytic-test-function interface: constant value."""

    def __init__(self, value=1.0, center=0.0, radius=50.0):
        self._value = value
        self.center = center
        self.support_radius = radius
        self.family = "const"
        self.width = radius
        self.wavenumber = 0.0

    def value(self, u):
        return np.full_like(np.asarray(u, dtype=float), self._value)

    def grad(self, u):
        return np.zeros_like(np.asarray(u, dtype=float))

    def lap(self, u):
        return np.zeros_like(np.asarray(u, dtype=float))

    def l2_norm_sq_exact(self):
        return None


@pytest.fixture
def const_fn():
    return ConstFn
