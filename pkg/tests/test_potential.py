"""Off-boundary double layer potential evaluation."""

import numpy as np
import pytest

from tdbem.mesh import SurfaceMesh
from tdbem.potential import FieldGrid, eval_double_layer, eval_total_field
from tdbem.quadrature import triangle_rule
from tdbem.reference import IncidentWave
from tdbem.temporal_basis import TimeGrid, basis_b, decode_flat, support_interval


@pytest.fixture(scope="module")
def single_tri():
    verts = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    return SurfaceMesh(verts, np.array([[0, 1, 2]]))


GRID = TimeGrid(T=2.0, N=4, p=1)


def oracle_single_triangle(mesh, grid, coeffs, point, t):
    """Dense quadrature reference: two 4-way subdivisions, degree-12 rule."""
    pts, w = triangle_rule(12)
    # barycentric coordinates of the rule points on the chart triangle
    # with corners (0,0), (1,0), (1,1)
    lam = np.column_stack([1 - pts[:, 0], pts[:, 0] - pts[:, 1], pts[:, 1]])
    tris = [np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]])]
    for _ in range(2):  # each pass splits every triangle into 4
        nxt = []
        for (a, b, c) in tris:
            ab, bc, ca = 0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)
            nxt += [np.array(s) for s in
                    ([a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca])]
        tris = nxt
    qpts = np.vstack([lam @ tri for tri in tris])
    qw = np.tile(w / 16.0, len(tris))
    corners = mesh.corners[0]
    X = corners[0] + np.outer(qpts[:, 0], corners[1] - corners[0]) + np.outer(
        qpts[:, 1], corners[2] - corners[1]
    )
    sh = np.column_stack([1 - qpts[:, 0], qpts[:, 0] - qpts[:, 1], qpts[:, 1]])
    wx = qw * 2.0 * mesh.areas[0]
    nrm = mesh.normals[0]
    alpha = coeffs.reshape(grid.L, mesh.num_vertices)
    d = point[None, :] - X
    r = np.linalg.norm(d, axis=1)
    ndotd = d @ nrm
    tret = t - r
    phi = np.zeros_like(r)
    phit = np.zeros_like(r)
    for i in range(1, grid.L + 1):
        idx = decode_flat(grid, i)
        lo, hi = support_interval(grid, idx.timestep)
        mask = (tret > lo) & (tret < hi)
        if not np.any(mask):
            continue
        dof = sh @ alpha[i - 1][mesh.triangles[0]]
        phi[mask] += basis_b(grid, i, tret[mask]) * dof[mask]
        phit[mask] += basis_b(grid, i, tret[mask], deriv=1) * dof[mask]
    kern = ndotd / r * (phi / r**2 + phit / r)
    return -np.sum(wx * kern) / (4.0 * np.pi)


class TestFieldGrid:
    def test_rejects_surface_points(self, single_tri):
        fg = FieldGrid(points=np.array([[0.2, 0.2, 0.0]]), times=np.array([0.5]))
        with pytest.raises(ValueError):
            fg.validate(single_tri)

    def test_accepts_offset_points(self, single_tri):
        fg = FieldGrid(points=np.array([[0.2, 0.2, 0.5]]), times=np.array([0.5]))
        fg.validate(single_tri)


class TestDoubleLayer:
    def test_single_triangle_oracle(self, single_tri):
        rng = np.random.default_rng(0)
        coeffs = rng.standard_normal(GRID.L * single_tri.num_vertices)
        point = np.array([0.3, 0.2, 0.8])
        t = 1.3
        got = eval_double_layer(single_tri, GRID, coeffs, point, t)
        want = oracle_single_triangle(single_tri, GRID, coeffs, point, t)
        assert got == pytest.approx(want, abs=1e-6 * max(1.0, abs(want)))

    def test_causality_exact_zero(self, single_tri):
        # the retarded argument t - r stays below every basis support
        coeffs = np.ones(GRID.L * single_tri.num_vertices)
        point = np.array([0.0, 0.0, 5.0])  # distance >= 4.9 to the triangle
        assert eval_double_layer(single_tri, GRID, coeffs, point, 1.0) == 0.0

    def test_linearity(self, single_tri):
        rng = np.random.default_rng(1)
        c1 = rng.standard_normal(GRID.L * single_tri.num_vertices)
        c2 = rng.standard_normal(GRID.L * single_tri.num_vertices)
        point = np.array([0.4, 0.1, 0.6])
        t = 1.1
        a = eval_double_layer(single_tri, GRID, c1, point, t)
        b = eval_double_layer(single_tri, GRID, c2, point, t)
        ab = eval_double_layer(single_tri, GRID, 2.0 * c1 + 3.0 * c2, point, t)
        assert ab == pytest.approx(2 * a + 3 * b, abs=1e-12 * max(1.0, abs(ab)))

    def test_zero_density(self, single_tri):
        coeffs = np.zeros(GRID.L * single_tri.num_vertices)
        assert eval_double_layer(single_tri, GRID, coeffs, np.array([0.3, 0.2, 1.0]), 1.5) == 0.0

    def test_near_and_far_rules_consistent(self, single_tri):
        # at moderate distance the near (q=12) and far (q=4) rules agree
        rng = np.random.default_rng(2)
        coeffs = rng.standard_normal(GRID.L * single_tri.num_vertices)
        point = np.array([0.3, 0.3, 2.5])  # beyond 2x triangle diameter
        a = eval_double_layer(single_tri, GRID, coeffs, point, 1.9, q_far=4)
        b = eval_double_layer(single_tri, GRID, coeffs, point, 1.9, q_far=12)
        assert a == pytest.approx(b, abs=1e-8 * max(1.0, abs(b)))


class TestTotalField:
    def test_shape_and_incident_only(self, single_tri):
        wave = IncidentWave()
        fg = FieldGrid(
            points=np.array([[0.0, 0.0, 2.0], [0.5, 0.5, 3.0]]),
            times=np.array([0.5, 1.0, 1.5]),
        )
        coeffs = np.zeros(GRID.L * single_tri.num_vertices)
        out = eval_total_field(wave, single_tri, GRID, coeffs, fg)
        assert out.shape == (3, 2)
        for a, t in enumerate(fg.times):
            inc = wave.field(fg.points, float(t))
            assert np.allclose(out[a], inc)

    def test_finite_with_density(self, single_tri):
        wave = IncidentWave()
        rng = np.random.default_rng(3)
        coeffs = rng.standard_normal(GRID.L * single_tri.num_vertices)
        fg = FieldGrid(points=np.array([[0.2, 0.2, 1.5]]), times=np.array([1.0, 1.8]))
        out = eval_total_field(wave, single_tri, GRID, coeffs, fg)
        assert np.all(np.isfinite(out))
