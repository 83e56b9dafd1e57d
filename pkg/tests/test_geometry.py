# ============================================================
# tests.test_geometry: patches, curvature and neighborhoods
# ============================================================

import math

import numpy as np
import pytest

from soliton_lab.geometry import (
    GridAxis,
    SpacetimePoint,
    SurfacePatch,
    closeness_to_model,
    curvature_at,
    extract_parabolic_neighborhood,
    mean_curvature,
    translator_residual,
    validate_patch,
)
from soliton_lab.solitons import CylinderModel, grim_reaper_patch, shrinking_cylinder_flow


@pytest.fixture
def cylinder_patch():
    """S^1_{sqrt 2} x R^2 at t = -1 as a polar patch."""
    z = GridAxis(-1.0, 1.0, 9)
    return CylinderModel(1, np.eye(4), np.zeros(4)).as_polar_patch(32, z, z, t=-1.0)


# ============================================================
# Grid axes and patch validation
# ============================================================

class TestGridAxis:
    """Uniform and periodic axes."""

    def test_periodic_step_excludes_endpoint(self):
        ax = GridAxis.angle(8)
        assert ax.step == pytest.approx(math.pi / 4)
        assert len(ax.nodes()) == 8
        assert ax.nodes()[-1] < 2 * math.pi

    def test_open_axis_includes_endpoints(self):
        ax = GridAxis(-1.0, 1.0, 5)
        assert ax.step == pytest.approx(0.5)
        assert ax.nodes()[0] == -1.0 and ax.nodes()[-1] == 1.0


class TestPatchValidation:
    """Invalid patches are rejected with every problem listed."""

    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="Invalid surface patch"):
            SurfacePatch("sphere", (GridAxis(0, 1, 5),), np.zeros(5))

    def test_too_few_nodes(self):
        with pytest.raises(ValueError, match="need >= 4"):
            SurfacePatch("graph", (GridAxis(0, 1, 3),), np.zeros(3))

    def test_polar_radius_positive(self):
        axes = (GridAxis.angle(8), GridAxis(0, 1, 5))
        with pytest.raises(ValueError, match="strictly positive"):
            SurfacePatch("polar", axes, np.zeros((8, 5)))

    def test_revolution_needs_rho_positive(self):
        axes = (GridAxis(0.0, 1.0, 5), GridAxis.angle(8))
        with pytest.raises(ValueError, match="rho > 0"):
            SurfacePatch("revolution", axes, np.zeros((5, 8)))

    def test_valid_patch_has_no_errors(self, cylinder_patch):
        assert validate_patch(cylinder_patch) == []


# ============================================================
# Curvature
# ============================================================

class TestCylinderCurvature:
    """The round cylinder has exact FD curvature (constant radius)."""

    def test_mean_curvature(self, cylinder_patch):
        assert mean_curvature(cylinder_patch, (3, 4, 4)) == pytest.approx(1 / math.sqrt(2), abs=1e-12)

    def test_second_fundamental_form(self, cylinder_patch):
        sample = curvature_at(cylinder_patch, (0, 4, 4))
        assert sample.A2 == pytest.approx(0.5, abs=1e-12)
        assert sample.lambda12 == pytest.approx(0.0, abs=1e-12)

    def test_normal_points_to_axis(self, cylinder_patch):
        sample = curvature_at(cylinder_patch, (0, 4, 4))
        np.testing.assert_allclose(sample.normal, [-1.0, 0.0, 0.0, 0.0], atol=1e-12)

    def test_boundary_index_rejected(self, cylinder_patch):
        with pytest.raises(ValueError, match="interior stencil"):
            mean_curvature(cylinder_patch, (0, 0, 4))

    def test_dilation_scales_curvature(self, cylinder_patch):
        bigger = cylinder_patch.moved(dilation=2.0)
        assert mean_curvature(bigger, (5, 4, 4)) == pytest.approx(1 / (2 * math.sqrt(2)), abs=1e-12)

    def test_rigid_motion_keeps_curvature(self, cylinder_patch):
        c, s = math.cos(0.3), math.sin(0.3)
        Q = np.array([[c, 0, -s, 0], [0, 1, 0, 0], [s, 0, c, 0], [0, 0, 0, 1]])
        moved = cylinder_patch.moved(rotation=Q, translation=[1.0, 2.0, 3.0, 4.0])
        assert mean_curvature(moved, (7, 2, 6)) == pytest.approx(1 / math.sqrt(2), abs=1e-12)


class TestTranslatorResidual:
    """The grim reaper solves H = <e2, nu> up to O(h^2)."""

    def test_second_order_convergence(self):
        coarse = translator_residual(grim_reaper_patch(1.2, 201), [0.0, 1.0])
        fine = translator_residual(grim_reaper_patch(1.2, 401), [0.0, 1.0])
        assert fine < coarse
        assert coarse / fine > 3.0

    def test_wrong_direction_detected(self):
        assert translator_residual(grim_reaper_patch(1.2, 201), [1.0, 0.0]) > 0.5


class TestPatchContainer:
    """JSON container for patches."""

    def test_dict_preserves_curvature(self, cylinder_patch):
        again = SurfacePatch.from_dict(cylinder_patch.to_dict())
        assert again.shape == cylinder_patch.shape
        assert mean_curvature(again, (3, 4, 4)) == pytest.approx(1 / math.sqrt(2), abs=1e-12)

    def test_wrong_format_rejected(self, cylinder_patch):
        data = cylinder_patch.to_dict()
        data["format"] = "something-else"
        with pytest.raises(ValueError, match="Not a patch container"):
            SurfacePatch.from_dict(data)


# ============================================================
# Closeness to a model
# ============================================================

class TestClosenessToModel:
    """Normal-graph norms over a model cylinder."""

    def test_concentric_cylinder_offset(self):
        z_small = GridAxis(-1.0, 1.0, 9)
        z_model = GridAxis(-2.0, 2.0, 17)
        patch = CylinderModel(1, np.eye(4), np.zeros(4), radius=1.5).as_polar_patch(32, z_small, z_small)
        model = CylinderModel(1, np.eye(4), np.zeros(4)).as_polar_patch(32, z_model, z_model)
        report = closeness_to_model(patch, model)
        assert report.matched
        assert report.graph_norm_C0 == pytest.approx(1.5 - math.sqrt(2), abs=1e-6)
        assert report.graph_norm_C1 == pytest.approx(report.graph_norm_C0, abs=1e-6)

    def test_dimension_mismatch(self, cylinder_patch):
        curve = grim_reaper_patch(1.0, 21)
        with pytest.raises(ValueError, match="ambient dimensions"):
            closeness_to_model(curve, cylinder_patch)


# ============================================================
# Parabolic neighborhoods
# ============================================================

class TestParabolicNeighborhood:
    """Extraction from a sampled shrinking cylinder."""

    @pytest.fixture
    def flow(self):
        z = GridAxis(-3.0, 3.0, 13)
        return shrinking_cylinder_flow([-3.0, -2.0, -1.0], 32, z, z)

    def test_radius_and_depth(self, flow):
        center = SpacetimePoint([math.sqrt(2), 0, 0, 0], -1.0)
        nbhd, clipped = extract_parabolic_neighborhood(flow, center, 1.0, 1.0)
        assert nbhd.radius == pytest.approx(math.sqrt(2), abs=1e-12)
        assert nbhd.depth == pytest.approx(2.0, abs=1e-12)
        assert [c.time for c in clipped] == [-3.0, -2.0, -1.0]
        assert all(c.mask.any() for c in clipped)

    def test_short_history_reported(self, flow):
        center = SpacetimePoint([math.sqrt(2), 0, 0, 0], -1.0)
        with pytest.raises(ValueError, match="exceeds the stored grid"):
            extract_parabolic_neighborhood(flow, center, 1.0, 5.0)

    def test_small_grid_reported_per_axis(self, flow):
        center = SpacetimePoint([math.sqrt(2), 0, 0, 0], -1.0)
        with pytest.raises(ValueError, match="axis 1"):
            extract_parabolic_neighborhood(flow, center, 3.0, 1.0)

    def test_center_off_flow(self, flow):
        center = SpacetimePoint([1.0, 0, 0, 0], -1.0)
        with pytest.raises(ValueError, match="not on the flow"):
            extract_parabolic_neighborhood(flow, center, 1.0, 1.0)

    def test_time_not_stored(self, flow):
        center = SpacetimePoint([math.sqrt(2), 0, 0, 0], -1.5)
        with pytest.raises(ValueError, match="not a stored slice"):
            extract_parabolic_neighborhood(flow, center, 1.0, 1.0)
