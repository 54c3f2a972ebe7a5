import pytest

from src.calculus.exterior import ext_deriv, sample
from src.models.courant_models import TwistData
from src.models.fields import KForm, SymTensor2
from src.models.grid_models import FourierMode, FourierModeSpec, make_grid
from src.services.hodge_context import HodgeContext
from src.utils.random_fields import RandomFieldFactory


def mode_form(grid, degree, *modes):
    """Form built from (component, wavevector, amplitude) triples."""
    spec = FourierModeSpec(degree=degree, modes=[FourierMode(component=list(component), wavevector=list(k),
                                                             amplitude=amplitude)
                                                 for component, k, amplitude in modes])
    return sample(spec, grid)


@pytest.fixture(scope="session")
def grid2():
    return make_grid(2, 16)


@pytest.fixture(scope="session")
def grid3():
    return make_grid(3, 12)


@pytest.fixture(scope="session")
def matrix_grid2():
    return make_grid(2, 8)


@pytest.fixture
def factory2(grid2):
    return RandomFieldFactory(grid2, seed=11)


@pytest.fixture
def factory3(grid3):
    return RandomFieldFactory(grid3, seed=13)


@pytest.fixture(scope="session")
def flat_hodge2(grid2):
    return HodgeContext(SymTensor2.flat(grid2))


@pytest.fixture(scope="session")
def flat_hodge3(grid3):
    return HodgeContext(SymTensor2.flat(grid3))


@pytest.fixture(scope="session")
def exact_twist3(grid3):
    H = mode_form(grid3, 3, ((0, 1, 2), (0, 0, 0), 0.7), ((0, 1, 2), (0, 1, 0), 0.5))
    return TwistData.exact(grid3, H=H)


@pytest.fixture(scope="session")
def odd_twist3(grid3):
    H = mode_form(grid3, 3, ((0, 1, 2), (1, 0, 0), 0.4))
    constant = KForm.constant(grid3, 2, [0.5, 0.0, -0.25])
    exact = ext_deriv(mode_form(grid3, 1, ((2,), (1, 1, 0), 0.3)))
    return TwistData.odd(grid3, H=H, F=constant + exact)


@pytest.fixture(scope="session")
def exact_twist2(grid2):
    return TwistData.exact(grid2)


@pytest.fixture(scope="session")
def odd_twist2(grid2):
    F = mode_form(grid2, 2, ((0, 1), (0, 0), 0.5), ((0, 1), (1, 1), 0.25))
    return TwistData.odd(grid2, F=F)
