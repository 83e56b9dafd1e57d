# ============================================================
# tests.test_solitons: Bowl profile, cylinders, translators
# ============================================================

import math

import numpy as np
import pytest

from soliton_lab.geometry import GridAxis, translator_residual
from soliton_lab.solitons import (
    OMEGA3,
    CylinderModel,
    blow_down_rescale,
    bowl_meridian_patch,
    bowl_times_line_graph,
    bowl_times_line_revolution,
    grim_reaper_patch,
    height_evolution_check,
    shrinking_cylinder_flow,
    solve_bowl_profile,
    tabulate_tip_ratio,
    translating_flow,
)


@pytest.fixture(scope="module")
def bowl2():
    return solve_bowl_profile(2, 30.0, 0.01)


# ============================================================
# Profile ODE
# ============================================================

class TestBowlProfile:
    """RK4 profile with series start."""

    def test_tip_normalization(self, bowl2):
        assert bowl2.mean_curvature()[0] == pytest.approx(1.0, abs=1e-12)
        assert bowl2.d2phi()[0] == pytest.approx(0.5)
        assert bowl2.second_fundamental_norm()[0] == pytest.approx(0.5, abs=1e-12)

    def test_bounds_hold(self, bowl2):
        assert np.all(bowl2.dphi >= bowl2.r / 2 - 1e-12)
        assert np.all(bowl2.phi >= bowl2.r**2 / 4 - 1e-12)

    def test_asymptotic_slope(self, bowl2):
        """phi' ~ r/(n-1) far from the tip."""
        assert bowl2.dphi[-1] / bowl2.r[-1] == pytest.approx(1.0, abs=1e-2)

    def test_translator_identity_on_profile(self, bowl2):
        H = bowl2.mean_curvature()
        assert np.all(H > 0) and np.all(H <= 1.0)
        assert np.all(np.diff(H) < 0)

    def test_inverse_profile(self, bowl2):
        r = bowl2.radius_at_height(bowl2.phi_at(7.5))
        assert float(r) == pytest.approx(7.5, abs=1e-6)

    def test_higher_dimension(self):
        bowl3 = solve_bowl_profile(3, 10.0, 0.01)
        assert bowl3.d2phi()[0] == pytest.approx(1 / 3)
        assert np.all(bowl3.dphi >= bowl3.r / 3 - 1e-12)

    def test_range_checked(self, bowl2):
        with pytest.raises(ValueError, match="beyond solved profile range"):
            bowl2.phi_at(31.0)

    @pytest.mark.parametrize("n,r_max,step,message", [
        (1, 10.0, 0.01, "n must be an integer >= 2"),
        (2.5, 10.0, 0.01, "n must be an integer >= 2"),
        (2, 0.0, 0.01, "r_max must lie in"),
        (2, 10.0, 2.0, "step must lie in"),
        (2, 1000.0, 1.0, "step too coarse"),
    ])
    def test_invalid_parameters(self, n, r_max, step, message):
        with pytest.raises(ValueError, match=message):
            solve_bowl_profile(n, r_max, step)


class TestTipRatio:
    """kappa/H = f(H d) along the profile."""

    def test_tail_ratio_tends_to_two(self):
        table = tabulate_tip_ratio(solve_bowl_profile(2, 100.0, 0.01))
        assert table.tail_ratios()[1] == pytest.approx(2.0, rel=0.02)

    def test_table_starts_at_tip(self, bowl2):
        table = tabulate_tip_ratio(bowl2, kappa=2.0)
        assert table.s[0] == 0.0
        assert table.f[0] == pytest.approx(2.0)
        assert np.all(np.diff(table.f) > 0)


# ============================================================
# Model surfaces
# ============================================================

class TestCylinderModel:
    """Shrinking cylinders S^k x R^{3-k}."""

    def test_shrinking_radius(self):
        assert CylinderModel(2, np.eye(4), np.zeros(4)).radius_at(-1.0) == pytest.approx(2.0)
        assert CylinderModel(1, np.eye(4), np.zeros(4)).radius_at(-2.0) == pytest.approx(2.0)

    def test_static_radius_overrides(self):
        assert CylinderModel(1, np.eye(4), np.zeros(4), radius=3.0).radius_at(-5.0) == 3.0

    def test_signed_distance(self):
        model = CylinderModel(1, np.eye(4), np.zeros(4))
        assert model.distance([0.0, 0.0, 5.0, 5.0]) == pytest.approx(-math.sqrt(2))
        assert model.distance([2.0, 0.0, 0.0, 0.0]) == pytest.approx(2.0 - math.sqrt(2))

    def test_invalid_k(self):
        with pytest.raises(ValueError, match="1, 2 or 3"):
            CylinderModel(0, np.eye(4), np.zeros(4))

    def test_rotation_must_be_orthogonal(self):
        with pytest.raises(ValueError, match="orthogonal"):
            CylinderModel(1, 2 * np.eye(4), np.zeros(4))

    def test_no_positive_times(self):
        with pytest.raises(ValueError, match="t < 0"):
            CylinderModel(1, np.eye(4), np.zeros(4)).radius_at(0.0)

    def test_only_k1_is_polar(self):
        z = GridAxis(-1.0, 1.0, 5)
        with pytest.raises(ValueError, match="polar graphs"):
            CylinderModel(2, np.eye(4), np.zeros(4)).as_polar_patch(8, z, z)


class TestTranslators:
    """Translator identity H = <omega, nu> on sampled solitons."""

    def test_bowl_times_line_converges(self, bowl2):
        residuals = [
            translator_residual(
                bowl_times_line_revolution(bowl2, GridAxis(0.2, 3.0, num), 64, GridAxis(-1.0, 1.0, 5)),
                OMEGA3)
            for num in (29, 57)
        ]
        assert residuals[0] / residuals[1] >= 3.0

    def test_bowl_times_line_needs_n2(self):
        bowl3 = solve_bowl_profile(3, 5.0, 0.01)
        with pytest.raises(ValueError, match="n = 2 profile"):
            bowl_times_line_graph(bowl3, 1.0, 11)
        with pytest.raises(ValueError, match="n = 2 profile"):
            bowl_times_line_revolution(bowl3, GridAxis(0.2, 1.0, 5), 8, GridAxis(-1.0, 1.0, 5))

    @pytest.mark.parametrize("half_width", [0.0, math.pi / 2, 2.0])
    def test_grim_reaper_width(self, half_width):
        with pytest.raises(ValueError, match="half_width"):
            grim_reaper_patch(half_width, 11)


# ============================================================
# Height function
# ============================================================

class TestHeightEvolution:
    """h = <x, omega> - t is non-increasing along translators."""

    def test_translating_grim_reaper(self):
        flow = translating_flow(grim_reaper_patch(1.0, 41), [0.0, 1.0], [0.0, 0.1, 0.2])
        report = height_evolution_check(flow, [0.0, 1.0])
        assert report.matched
        assert report.max_dhdt <= 1e-8
        assert report.translator_defect <= 1e-8
        # equality only at the tip, where nu = omega
        assert report.equality_nodes >= 1

    def test_wrong_direction_detected(self):
        flow = translating_flow(grim_reaper_patch(1.0, 41), [0.0, 1.0], [0.0, 0.1])
        tilted = np.array([0.1, 1.0]) / math.sqrt(1.01)
        assert not height_evolution_check(flow, tilted).matched

    def test_shrinking_cylinder_is_not_a_translator(self):
        z = GridAxis(-1.0, 1.0, 5)
        flow = shrinking_cylinder_flow([-2.0, -1.0], 16, z, z)
        assert not height_evolution_check(flow, OMEGA3).matched

    def test_single_slice_rejected(self):
        flow = translating_flow(grim_reaper_patch(1.0, 11), [0.0, 1.0], [0.0])
        with pytest.raises(ValueError, match="at least two time slices"):
            height_evolution_check(flow, [0.0, 1.0])


class TestBlowDown:
    """a^{-1}(M - a^2 omega) on the Bowl meridian."""

    def test_section_near_cylinder_radius(self, bowl2):
        patch = bowl_meridian_patch(bowl2, 30.0, 601)
        clipped = blow_down_rescale(patch, 10.0, 5.0)
        assert clipped.mask.any()
        x = np.abs(clipped.patch.positions()[clipped.mask][:, 0])
        assert np.all((x > 0.9) & (x < 2.0))

    def test_commutes_with_rotation_of_meridian(self, bowl2):
        patch = bowl_meridian_patch(bowl2, 30.0, 601)
        c, s = math.cos(0.7), math.sin(0.7)
        Q = np.array([[c, -s], [s, c]])
        plain = blow_down_rescale(patch, 10.0, 5.0)
        turned = blow_down_rescale(patch.moved(rotation=Q), 10.0, 5.0, omega=Q @ np.array([0.0, 1.0]))
        np.testing.assert_array_equal(turned.mask, plain.mask)
        np.testing.assert_allclose(turned.patch.positions(), plain.patch.positions() @ Q.T, atol=1e-12)

    def test_commutes_with_rotation_in_r4(self):
        patch = CylinderModel(1, np.eye(4), np.zeros(4)).as_polar_patch(
            32, GridAxis(0.0, 8.0, 33), GridAxis(-1.0, 1.0, 5))
        Q, _ = np.linalg.qr(np.arange(16.0).reshape(4, 4) + 5.0 * np.eye(4))
        if np.linalg.det(Q) < 0:
            Q[:, 0] = -Q[:, 0]
        omega = np.array([0.0, 0.0, 1.0, 0.0])
        plain = blow_down_rescale(patch, 2.0, 1.5)
        turned = blow_down_rescale(patch.moved(rotation=Q), 2.0, 1.5, omega=Q @ omega)
        assert plain.mask.any()
        np.testing.assert_array_equal(turned.mask, plain.mask)
        np.testing.assert_allclose(turned.patch.positions(), plain.patch.positions() @ Q.T, atol=1e-12)

    def test_small_a_rejected(self, bowl2):
        with pytest.raises(ValueError, match="a >= 1"):
            blow_down_rescale(bowl_meridian_patch(bowl2, 10.0, 101), 0.5, 1.0)

    def test_height_range_checked(self, bowl2):
        with pytest.raises(ValueError, match="insufficient height range"):
            blow_down_rescale(bowl_meridian_patch(bowl2, 10.0, 101), 10.0, 5.0)
