import numpy as np
import pytest

from precondrisk import PreconditionerSpec, make_two_atom


def iso_prior(x):
    return np.ones_like(np.asarray(x, dtype=float))


def inv_prior(x):
    return 1.0 / np.asarray(x, dtype=float)


@pytest.fixture(scope="session")
def two_atom20():
    return make_two_atom(20.0)


@pytest.fixture(scope="session")
def gd():
    return PreconditionerSpec.identity()


@pytest.fixture(scope="session")
def ngd():
    return PreconditionerSpec.inverse_pop_fisher()


@pytest.fixture(scope="session")
def pow_half():
    return PreconditionerSpec.power(0.5)
