import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from vpwf.ddg import build_cache
from vpwf.generators import ellipsoid, icosphere, torus


@pytest.fixture(scope="session")
def sphere3():
    mesh = icosphere(3)
    return mesh, build_cache(mesh)


@pytest.fixture(scope="session")
def sphere4():
    mesh = icosphere(4)
    return mesh, build_cache(mesh)


@pytest.fixture(scope="session")
def sphere5():
    mesh = icosphere(5)
    return mesh, build_cache(mesh)


@pytest.fixture(scope="session")
def ellipsoid4():
    mesh = ellipsoid(1.2, 1.0, 0.85, 4)
    return mesh, build_cache(mesh)


@pytest.fixture(scope="session")
def torus_mesh():
    mesh = torus(2.0, 1.0, 64, 64)
    return mesh, build_cache(mesh)
