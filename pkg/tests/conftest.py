import numpy as np
import pytest

from tvfcgcg.mesh import TriMesh, generate_square_mesh


def strip_mesh(cols: int = 3, rows: int = 2) -> TriMesh:
    """Rectangle split into 2*cols*rows right triangles (small, for enumeration)."""
    xs = np.linspace(-1, 1, cols + 1)
    ys = np.linspace(-1, 1, rows + 1)
    verts = np.array([(x, y) for y in ys for x in xs])
    tris = []
    for j in range(rows):
        for i in range(cols):
            a = j * (cols + 1) + i
            b, c, d = a + 1, a + cols + 1, a + cols + 2
            tris += [(a, b, d), (a, d, c)]
    return TriMesh.from_arrays(verts, np.array(tris))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def tiny_meshes():
    """Meshes with at most 16 triangles."""
    return [
        generate_square_mesh(1, 0.0, 0),
        generate_square_mesh(2, 0.0, 0),
        generate_square_mesh(2, 0.25, 3),
        strip_mesh(3, 2),
        strip_mesh(4, 2),
    ]
