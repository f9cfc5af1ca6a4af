import pathlib

import numpy as np
import pytest

from hzcomplex import meshkit as mk

DATA = pathlib.Path(__file__).parent / "data"


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture(params=["unit_triangle", "crisscross", "square_annulus"])
def builtin_mesh(request):
    return request.param, mk.build_mesh(request.param)


@pytest.fixture
def l_shape_mixed():
    return mk.read_mesh(DATA / "l_shape_mixed.msh")


@pytest.fixture
def annulus_mixed():
    return mk.read_mesh(DATA / "annulus_mixed.msh")
