import numpy as np
import pytest

from vpwf.ddg import (
    build_cache,
    build_laplacian,
    gaussian_curvature,
    laplacian_of_scalar,
    lumped_mass,
    mean_curvature,
    tracefree_sq,
    vertex_normals,
)
from vpwf.errors import ZeroNormalError
from vpwf.generators import icosphere, torus
from vpwf.mesh import TriMesh

from oracles import octahedron, sphere_values, torus_curvatures


def flipped(mesh):
    return TriMesh(mesh.positions, mesh.faces[:, [0, 2, 1]])


class TestLumpedMass:
    def test_octahedron_thirds(self):
        # equilateral faces: the mixed cell is exactly the barycentric third
        mass = lumped_mass(octahedron())
        assert np.allclose(mass, 4 * np.sqrt(3) / 6, rtol=1e-14)
        assert mass.sum() == pytest.approx(4 * np.sqrt(3), rel=1e-14)

    def test_sums_to_total_area(self, sphere4):
        mesh, cache = sphere4
        assert cache.mass.sum() == pytest.approx(cache.total_area, rel=1e-13)
        assert cache.mass.sum() == pytest.approx(4 * np.pi, rel=2e-3)

    def test_positive(self, ellipsoid4):
        _, cache = ellipsoid4
        assert np.all(cache.mass > 0)

    def test_locality(self, sphere3):
        mesh, cache = sphere3
        positions = np.array(mesh.positions)
        positions[0] *= 1.01
        other = lumped_mass(TriMesh(positions, mesh.faces))
        ring = set(mesh.faces[np.any(mesh.faces == 0, axis=1)].reshape(-1))
        untouched = np.setdiff1d(np.arange(mesh.vertex_count), sorted(ring))
        assert np.array_equal(other[untouched], cache.mass[untouched])
        assert not np.allclose(other[0], cache.mass[0])

    def test_obtuse_fallback_tiles(self):
        # squashed octahedron has obtuse faces; tiling must stay exact
        mesh = octahedron()
        squashed = TriMesh(mesh.positions * [1.0, 1.0, 0.2], mesh.faces)
        from vpwf.mesh import face_areas_normals

        areas, _ = face_areas_normals(squashed)
        mass = lumped_mass(squashed)
        assert mass.sum() == pytest.approx(areas.sum(), rel=1e-14)
        assert np.all(mass > 0)


class TestVertexNormals:
    def test_icosphere_radial(self, sphere4):
        mesh, cache = sphere4
        radial = -mesh.positions / np.linalg.norm(
            mesh.positions, axis=1, keepdims=True
        )
        angle = np.arccos(
            np.clip(np.sum(cache.normals * radial, axis=1), -1, 1)
        )
        # symmetric (valence-5) vertices are exact; the worst asymmetric
        # stencils carry an O(h) tilt
        assert angle.max() < 1e-2

    def test_refinement_improves_normals(self):
        worst = []
        for level in (3, 4):
            mesh = icosphere(level)
            cache = build_cache(mesh)
            radial = -mesh.positions / np.linalg.norm(
                mesh.positions, axis=1, keepdims=True
            )
            angle = np.arccos(
                np.clip(np.sum(cache.normals * radial, axis=1), -1, 1)
            )
            worst.append(angle.max())
        assert worst[1] < worst[0]

    def test_octahedron_axis_vertex(self):
        normals = vertex_normals(octahedron())
        assert np.allclose(normals[0], [-1, 0, 0], atol=1e-15)

    def test_orientation_reversal_negates(self, sphere3):
        mesh, cache = sphere3
        assert np.allclose(
            vertex_normals(flipped(mesh)), -cache.normals, atol=1e-15
        )

    def test_fold_raises(self):
        # exactly flat double sheet: the per-vertex normal sums cancel
        mesh = octahedron()
        positions = np.array(mesh.positions)
        positions[:, 2] = 0.0
        squashed = TriMesh(positions, mesh.faces)
        with pytest.raises(ZeroNormalError):
            vertex_normals(squashed)


class TestCurvatures:
    def test_sphere_mean_curvature(self, sphere4):
        _, cache = sphere4
        assert np.max(np.abs(cache.H - 2.0) / 2.0) < 0.02  # actual ~1e-5

    def test_radius_scaling(self):
        mesh = icosphere(3, 2.0)
        cache = build_cache(mesh)
        assert np.max(np.abs(cache.H - 1.0)) < 0.01

    def test_orientation_reversal(self, sphere3):
        mesh, cache = sphere3
        other = build_cache(flipped(mesh))
        assert np.allclose(other.H, -cache.H, atol=1e-12)
        assert np.allclose(other.K, cache.K, atol=1e-12)
        assert np.allclose(other.mass, cache.mass, atol=1e-15)
        assert np.allclose(other.tracefree_sq, cache.tracefree_sq, atol=1e-12)

    @pytest.mark.parametrize("make,chi", [
        (lambda: icosphere(2), 2),
        (lambda: icosphere(3), 2),
        (lambda: torus(2.0, 1.0, 24, 16), 0),
        (lambda: octahedron(), 2),
    ])
    def test_discrete_gauss_bonnet_exact(self, make, chi):
        mesh = make()
        cache = build_cache(mesh)
        total = float(np.sum(cache.K * cache.mass))
        assert abs(total - 2.0 * np.pi * chi) < 1e-9

    def test_sphere_gaussian_curvature(self, sphere4):
        _, cache = sphere4
        assert np.max(np.abs(cache.K - 1.0)) < 0.05  # actual ~1.4e-3

    def test_torus_pointwise_oracle(self):
        mesh = torus(10.0, 1.0, 96, 24)
        cache = build_cache(mesh)
        # vertices at the outer equator have tube angle v = 0
        outer = np.isclose(
            np.linalg.norm(mesh.positions[:, :2], axis=1), 11.0
        ) & np.isclose(mesh.positions[:, 2], 0.0)
        assert outer.sum() == 96
        H_ref, K_ref = torus_curvatures(10.0, 1.0, 0.0)
        assert np.allclose(cache.H[outer], H_ref, rtol=0.02)
        assert np.allclose(cache.K[outer], K_ref, rtol=0.05, atol=5e-4)
        a0_ref = 0.5 * H_ref ** 2 - 2.0 * K_ref
        assert np.allclose(cache.tracefree_sq[outer], a0_ref, rtol=0.02)

    def test_sphere_is_umbilic(self, sphere4):
        _, cache = sphere4
        assert np.max(cache.tracefree_sq) <= 1e-3

    def test_tracefree_clamped_nonnegative(self, sphere4, ellipsoid4):
        for _, cache in (sphere4, ellipsoid4):
            assert np.all(cache.tracefree_sq >= 0)

    def test_tracefree_formula(self):
        H = np.array([1.0, 2.0, -1.0])
        K = np.array([0.0, 3.0, 0.6])
        assert np.allclose(tracefree_sq(H, K), [0.5, 0.0, 0.0])


class TestLaplaceOperator:
    def test_symmetry_exact(self, sphere3):
        _, cache = sphere3
        L = cache.laplacian.matrix
        assert abs(L - L.T).max() == 0.0

    def test_zero_row_sums(self, sphere3):
        mesh, cache = sphere3
        ones = np.ones(mesh.vertex_count)
        assert np.max(np.abs(cache.laplacian.apply(ones))) < 1e-12

    def test_constant_field(self, sphere3):
        mesh, cache = sphere3
        u = np.full(mesh.vertex_count, 7.3)
        lap = laplacian_of_scalar(cache.laplacian, cache.mass, u)
        assert np.max(np.abs(lap)) < 1e-10

    def test_linearity(self, sphere3):
        mesh, cache = sphere3
        rng = np.random.default_rng(7)
        u = rng.normal(size=mesh.vertex_count)
        v = rng.normal(size=mesh.vertex_count)
        left = laplacian_of_scalar(
            cache.laplacian, cache.mass, 2.0 * u - 3.0 * v
        )
        right = 2.0 * laplacian_of_scalar(
            cache.laplacian, cache.mass, u
        ) - 3.0 * laplacian_of_scalar(cache.laplacian, cache.mass, v)
        assert np.allclose(left, right, atol=1e-10)

    def test_coordinate_eigenfunction(self, sphere4):
        # z restricted to the unit sphere satisfies lap z = -2 z
        mesh, cache = sphere4
        z = mesh.positions[:, 2]
        lap = laplacian_of_scalar(cache.laplacian, cache.mass, z)
        mask = np.abs(z) > 0.3
        assert np.allclose(lap[mask], -2.0 * z[mask], rtol=0.03, atol=2e-3)

    def test_matches_mean_curvature_convention(self, sphere4):
        mesh, cache = sphere4
        H = mean_curvature(mesh, cache.laplacian, cache.mass, cache.normals)
        assert np.array_equal(H, cache.H)
        assert np.all(H > 0)  # inward sphere => positive


class TestRefinementConvergence:
    def test_mean_curvature_order(self, sphere3, sphere4, sphere5):
        errors = [
            np.max(np.abs(cache.H - 2.0) / 2.0)
            for _, cache in (sphere3, sphere4, sphere5)
        ]
        assert errors[0] > errors[1] > errors[2]
        assert errors[0] / errors[1] >= 1.8
        assert errors[1] / errors[2] >= 1.8

    def test_lumped_mass_total_converges(self, sphere3, sphere4, sphere5):
        errs = [
            abs(cache.mass.sum() - 4 * np.pi) / (4 * np.pi)
            for _, cache in (sphere3, sphere4, sphere5)
        ]
        assert errs[0] / errs[1] >= 1.8 and errs[1] / errs[2] >= 1.8
