# ============================================================
# tests.test_convex: convex bodies, sections, Gaussian entropy
# ============================================================

import itertools
import math

import numpy as np
import pytest

from soliton_lab.convex import (
    ConvexBody,
    GeneralizedCylinder,
    cross_section_quadratic,
    cross_section_sweep,
    diameter_trials,
    diameters,
    eccentricity,
    entropy_F,
    entropy_sup,
    entropy_table,
    fibonacci_sphere,
    tilt_rotation,
)
from soliton_lab.geometry import GridAxis, SurfacePatch

CUBE = np.array(list(itertools.product([0.0, 1.0], repeat=3)))


# ============================================================
# Convex bodies and diameters
# ============================================================

class TestConvexBody:
    def test_cube(self):
        body = ConvexBody(CUBE)
        assert body.dim == 3
        assert len(body.vertices) == 8
        assert len(body.facets) == 12

    def test_wrong_dimension(self):
        with pytest.raises(ValueError, match=r"\(N, 3\) or \(N, 4\)"):
            ConvexBody(np.zeros((5, 2)))

    def test_flat_cloud(self):
        flat = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]])
        with pytest.raises(ValueError, match="degenerate point cloud"):
            ConvexBody(flat)

    def test_ellipsoid_axes(self):
        with pytest.raises(ValueError, match="positive semi-axes"):
            ConvexBody.ellipsoid([1.0, 0.0, 1.0])

    def test_fibonacci_points_on_sphere(self):
        pts = fibonacci_sphere(50)
        np.testing.assert_allclose(np.linalg.norm(pts, axis=1), 1.0)
        with pytest.raises(ValueError, match="at least 4"):
            fibonacci_sphere(3)


class TestDiameters:
    """Intrinsic versus extrinsic diameter of the boundary."""

    def test_cube(self):
        report = diameters(ConvexBody(CUBE))
        assert report.d2 == pytest.approx(math.sqrt(3.0))
        # opposite corners are sqrt(5) apart along the surface
        assert report.d1 >= math.sqrt(5.0) - 1e-9
        assert report.ratio <= 3.0
        assert report.history[0][0] == 1

    def test_random_polytopes(self):
        rows = diameter_trials(3, seed=4, num=20)
        assert [r["trial"] for r in rows] == [0, 1, 2]
        for r in rows:
            assert r["d2"] * (1 - 1e-9) <= r["d1"] <= 3.0 * r["d2"]

    def test_random_trials_are_reproducible(self):
        a = diameter_trials(2, seed=9, num=15)
        b = diameter_trials(2, seed=9, num=15)
        assert a == b

    @pytest.mark.slow
    def test_thousand_random_polytopes(self):
        rows = diameter_trials(1000, seed=20240601, num=30)
        assert len(rows) == 1000
        assert all(r["d1"] >= r["d2"] * (1 - 1e-9) for r in rows)
        assert max(r["ratio"] for r in rows) <= 3.0

    @pytest.mark.slow
    def test_sphere_geodesic(self):
        report = diameters(ConvexBody.sphere(400))
        assert report.d1 == pytest.approx(math.pi, abs=0.03)
        assert report.d2 == pytest.approx(2.0, abs=0.01)


# ============================================================
# Cross sections
# ============================================================

class TestCrossSection:
    """Section {x3 = 0} of a tilted S^1 x R^2."""

    def test_identity(self):
        section = cross_section_quadratic(np.eye(4), 0.0)
        np.testing.assert_allclose(section.eigenvalues, [1.0, 1.0, 0.0], atol=1e-15)
        assert section.deviation == 0.0
        assert section.constant == 0.0

    @pytest.mark.parametrize("eta", [0.01, 0.05, 0.2])
    def test_tilt_gives_secant_axis(self, eta):
        section = cross_section_quadratic(tilt_rotation(eta), eta)
        assert section.semi_axes.max() == pytest.approx(1.0 / math.cos(eta), abs=1e-12)
        assert section.semi_axes.min() == pytest.approx(1.0, abs=1e-12)
        assert section.deviation <= eta
        assert section.trace_gap <= 1e-14

    def test_tilt_rotation_is_orthogonal(self):
        A = tilt_rotation(0.3, 1.1)
        np.testing.assert_allclose(A.T @ A, np.eye(4), atol=1e-14)

    def test_tilt_above_eta(self):
        with pytest.raises(ValueError, match="exceeds eta"):
            cross_section_quadratic(tilt_rotation(0.1), 0.01)

    def test_not_orthogonal(self):
        with pytest.raises(ValueError, match="orthogonal 4x4"):
            cross_section_quadratic(2.0 * np.eye(4), 0.1)

    def test_sweep_is_quadratic(self):
        sweep = cross_section_sweep([0.01, 0.02, 0.04], seed=0)
        assert sweep["slope"] == pytest.approx(2.0, abs=0.1)
        assert sweep["r2"] >= 0.99
        assert all(row[1] <= row[0] for row in sweep["rows"])


# ============================================================
# Gaussian entropy
# ============================================================

class TestEntropy:
    """lambda(S^k x R^{n-k}) at the shrinker scale."""

    @pytest.fixture(scope="class")
    def values(self):
        return dict(entropy_table(3))

    def test_known_values(self, values):
        assert values[0] == pytest.approx(1.0, abs=1e-12)
        assert values[1] == pytest.approx(math.sqrt(2.0 * math.pi / math.e), abs=1e-10)
        assert values[2] == pytest.approx(4.0 / math.e, abs=1e-10)

    def test_ordering(self, values):
        assert values[1] > values[2] > values[3] > values[0]

    def test_patch_quadrature(self, values):
        z = GridAxis(-12.0, 12.0, 97)
        th = GridAxis.angle(128)
        patch = SurfacePatch("polar", (th, z), np.full((th.num, z.num), math.sqrt(2.0)))
        assert entropy_F(patch, np.zeros(3), 1.0) == pytest.approx(values[1], abs=0.002)

    def test_patch_too_small(self):
        z = GridAxis(-1.0, 1.0, 9)
        th = GridAxis.angle(32)
        patch = SurfacePatch("polar", (th, z), np.full((th.num, z.num), math.sqrt(2.0)))
        with pytest.raises(ValueError, match="tail bound violated"):
            entropy_F(patch, np.zeros(3), 1.0)

    def test_sup_at_origin(self):
        best = entropy_sup(GeneralizedCylinder(1, 3), grid=9)
        assert best.x0 <= 1e-3
        assert best.t0 == pytest.approx(1.0, abs=1e-3)

    def test_invalid_arguments(self):
        with pytest.raises(ValueError, match="0 <= k <= n"):
            GeneralizedCylinder(4, 3)
        with pytest.raises(ValueError, match="t0 must be positive"):
            entropy_F(GeneralizedCylinder(1, 3), t0=0.0)
        with pytest.raises(TypeError, match="unsupported surface type"):
            entropy_F("cylinder")

    def test_eccentricity_of_round_section(self):
        z = GridAxis(-0.1, 0.1, 5)
        th = GridAxis.angle(64)
        patch = SurfacePatch("polar", (th, z), np.ones((64, 5)))
        assert eccentricity(patch) == pytest.approx(math.sqrt(4.04), abs=1e-9)
