"""Shared fixtures for the test suite."""

import os

import numpy as np
import pytest

from tdbem.mesh import SurfaceMesh, icosahedron, load_mesh

MESH_DIR = os.path.join(os.path.dirname(__file__), os.pardir, "meshes")


@pytest.fixture(scope="session")
def ico():
    return icosahedron()


@pytest.fixture(scope="session")
def sphere80():
    return load_mesh(os.path.join(MESH_DIR, "sphere80.off"))


@pytest.fixture(scope="session")
def sphere320():
    return load_mesh(os.path.join(MESH_DIR, "sphere320.off"))


@pytest.fixture(scope="session")
def two_tri():
    """Two-triangle open fixture with one shared edge and a tilted second face."""
    verts = np.array([
        [0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [1.0, 1.0, 0.5],
    ])
    tris = np.array([[0, 1, 2], [1, 3, 2]])
    return SurfaceMesh(verts, tris)
