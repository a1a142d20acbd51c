"""
Shared fixtures and the `slow` marker for the lpcm test suite
"""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from lpcm import shapes
from lpcm.mesh import TriMesh
from lpcm.operators import MeshOperators


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run long-running acceptance tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running test, needs --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def octahedron():
    return shapes.octahedron()


@pytest.fixture
def small_sphere():
    """Icosphere with 162 vertices"""
    return shapes.icosphere(subdivisions=2)


@pytest.fixture
def torus():
    return shapes.torus()


@pytest.fixture
def grid3():
    """3 x 3 vertex grid, 8 triangles:
    t0 [0,1,4] t1 [0,4,3] t2 [1,2,5] t3 [1,5,4]
    t4 [3,4,7] t5 [3,7,6] t6 [4,5,8] t7 [4,8,7]
    """
    return shapes.grid(3, 3)


@pytest.fixture
def octahedron_ops(octahedron):
    return MeshOperators.from_mesh(octahedron)


@pytest.fixture
def sphere_ops(small_sphere):
    return MeshOperators.from_mesh(small_sphere)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def hexagon_fan() -> TriMesh:
    """Six unit equilateral triangles around vertex 0"""
    angles = np.pi / 3 * np.arange(6)
    ring = np.column_stack([np.cos(angles), np.sin(angles), np.zeros(6)])
    vertices = np.vstack([[0.0, 0.0, 0.0], ring])
    triangles = [[0, 1 + k, 1 + (k + 1) % 6] for k in range(6)]
    return TriMesh(vertices, np.array(triangles))


def two_equilateral() -> TriMesh:
    """Two unit equilateral triangles sharing edge (0, 1)"""
    h = np.sqrt(3.0) / 2
    vertices = np.array([[0.0, 0, 0], [1.0, 0, 0], [0.5, h, 0], [0.5, -h, 0]])
    return TriMesh(vertices, np.array([[0, 1, 2], [1, 0, 3]]))


def mobius_strip(segments: int = 12) -> tuple:
    """Vertex and triangle arrays of a twisted (non-orientable) band"""
    theta = 2 * np.pi * np.arange(segments) / segments
    vertices = []
    for th in theta:
        for s in (0.5, -0.5):
            r = 2.0 + s * np.cos(th / 2)
            vertices.append([r * np.cos(th), r * np.sin(th), s * np.sin(th / 2)])
    triangles = []
    for k in range(segments):
        top, bot = 2 * k, 2 * k + 1
        if k < segments - 1:
            ntop, nbot = 2 * k + 2, 2 * k + 3
        else:
            ntop, nbot = 1, 0
        triangles.append([top, bot, nbot])
        triangles.append([top, nbot, ntop])
    return np.array(vertices), np.array(triangles)


def two_tori() -> TriMesh:
    """Two disjoint tori stacked along z"""
    a = shapes.torus(n_major=16, n_minor=8)
    b = shapes.torus(n_major=16, n_minor=8)
    vertices = np.vstack([a.vertices, b.vertices + np.array([0.0, 0.0, 5.0])])
    triangles = np.vstack([a.triangles, b.triangles + a.n_vertices])
    return TriMesh(vertices, triangles)
