import numpy as np
import pytest

from liouville_lab.covariant_algebra import ModelEnsemble
from liouville_lab.lattice_model import (
    DisorderModel,
    FieldProfile,
    LatticeGeometry,
    TimeDependentHamiltonian,
    derive_seed,
)


@pytest.fixture(scope="session")
def chain8():
    return LatticeGeometry((8,))


@pytest.fixture(scope="session")
def disorder():
    return DisorderModel(v_plus_max=1.0)


@pytest.fixture(scope="session")
def profile():
    return FieldProfile([0.1], 1.0)


@pytest.fixture(scope="session")
def model8(chain8, disorder, profile):
    """One open L=8 chain with the reference disorder and field."""
    return TimeDependentHamiltonian(disorder.sample(chain8, derive_seed(0, 0)), profile)


@pytest.fixture(scope="session")
def still8(model8):
    """The same realization with the field switched off."""
    return TimeDependentHamiltonian(model8.realization, FieldProfile([0.0], 1.0))


@pytest.fixture(scope="session")
def ensemble8(chain8, disorder, profile):
    return ModelEnsemble.sample(chain8, disorder, profile, 4, master_seed=0)


@pytest.fixture(scope="session")
def volume8(ensemble8):
    return ModelEnsemble(ensemble8.models, "volume")


def opnorm(A):
    return float(np.linalg.norm(A, 2))
