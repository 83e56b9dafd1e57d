# ============================================================
# tests.test_rotation: rotation fields, symmetry, rigidity, so(4)
# ============================================================

import math

import numpy as np
import pytest
from scipy.linalg import expm

from soliton_lab.geometry import GridAxis, SpacetimePoint
from soliton_lab.rotation import (
    J,
    J_PRIME,
    GeneratorPair,
    RotationField,
    SymmetryVerdict,
    affine_sup,
    affine_sup_ratio,
    alignment_experiment,
    antisymmetric,
    catalog_lower_bound,
    check_epsilon_symmetric,
    fit_cylinder,
    gauge_fix,
    is_cylindrical,
    rigidity_residual,
    so4_structure_checks,
    tilt_sweep,
)
from soliton_lab.solitons import CylinderModel, shrinking_cylinder_flow

SWAP = np.array([
    [0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0],
])


@pytest.fixture
def cylinder_patch():
    z = GridAxis(-1.0, 1.0, 9)
    return CylinderModel(1, np.eye(4), np.zeros(4)).as_polar_patch(32, z, z)


# ============================================================
# Rotation fields
# ============================================================

class TestRotationField:
    """K(x) = S J S^{-1} (x - q)."""

    def test_default_is_axis_rotation(self):
        K = RotationField()
        np.testing.assert_array_equal(K.matrix, J)
        np.testing.assert_allclose(K.evaluate([1.0, 0.0, 0.0, 0.0]), [0.0, 1.0, 0.0, 0.0])

    def test_plane_distance(self):
        assert RotationField().plane_distance([3.0, 4.0, 7.0, 8.0]) == pytest.approx(5.0)

    def test_swap_gives_split_rotation(self):
        np.testing.assert_allclose(RotationField(SWAP, np.zeros(4)).matrix, J_PRIME)

    def test_pushforward(self):
        rng = np.random.default_rng(3)
        Q = expm(antisymmetric(rng.normal(size=6)))
        b = rng.normal(size=4)
        K = RotationField(np.eye(4), rng.normal(size=4))
        x = rng.normal(size=4)
        np.testing.assert_allclose(K.moved(Q, b).evaluate(Q @ x + b), Q @ K.evaluate(x), atol=1e-12)

    def test_not_orthogonal(self):
        with pytest.raises(ValueError, match="not orthogonal"):
            RotationField(np.diag([1.0, 1.0, 1.0, 1.1]), np.zeros(4))

    def test_q_shape(self):
        with pytest.raises(ValueError, match="point of R\\^4"):
            RotationField(np.eye(4), np.zeros(3))


class TestGeneratorPair:
    def test_identities(self):
        residuals = GeneratorPair().check(samples=10, seed=1)
        assert set(residuals) == {"square", "bracket", "exp_commutes"}
        assert max(residuals.values()) <= 1e-12


# ============================================================
# epsilon-symmetry
# ============================================================

class TestEpsilonSymmetry:
    """The shrinking cylinder is exactly symmetric about its axis rotation."""

    @pytest.fixture
    def flow(self):
        z = GridAxis(-3.0, 3.0, 13)
        return shrinking_cylinder_flow([-3.0, -2.0, -1.0], 32, z, z)

    @pytest.fixture
    def center(self):
        return SpacetimePoint([math.sqrt(2), 0.0, 0.0, 0.0], -1.0)

    def test_axis_rotation(self, flow, center):
        verdict = check_epsilon_symmetric(flow, center, RotationField(), L=1.0, T=1.0)
        assert verdict.epsilon_measured <= 1e-12
        assert verdict.bound_KH == pytest.approx(1.0, abs=1e-12)
        assert verdict.passes(1e-6)

    def test_tilted_rotation_detected(self, flow, center):
        S = expm(antisymmetric([0.0, 1e-3, 0.0, 0.0, 0.0, 0.0]))
        verdict = check_epsilon_symmetric(flow, center, RotationField(S, np.zeros(4)), L=1.0, T=1.0)
        assert verdict.epsilon_measured > 1e-5
        assert not verdict.passes(1e-6)

    def test_extraction_errors_propagate(self, flow, center):
        with pytest.raises(ValueError, match="exceeds the stored grid"):
            check_epsilon_symmetric(flow, center, RotationField(), L=1.0, T=100.0)

    def test_parabolic_rescale_by_two(self, flow, center):
        K = RotationField(expm(antisymmetric([0.0, 0.01, 0.0, 0.02, 0.0, 0.0])), np.zeros(4))
        z = GridAxis(-6.0, 6.0, 13)
        scaled_flow = shrinking_cylinder_flow([-12.0, -8.0, -4.0], 32, z, z)
        scaled_center = SpacetimePoint([2.0 * math.sqrt(2), 0.0, 0.0, 0.0], -4.0)
        a = check_epsilon_symmetric(flow, center, K, L=1.0, T=1.0)
        b = check_epsilon_symmetric(scaled_flow, scaled_center, K, L=1.0, T=1.0)
        assert a.epsilon_measured > 1e-5
        assert b.epsilon_measured == pytest.approx(a.epsilon_measured, abs=1e-10)
        assert b.bound_KH == pytest.approx(a.bound_KH, abs=1e-10)
        assert b.nodes == a.nodes

    def test_ambient_rotation_equivariance(self, center):
        """Rotating the flow, the center and K together leaves the verdict unchanged."""
        z = GridAxis(-3.0, 3.0, 13)
        times = [-3.0, -2.0, -1.0]
        Q = expm(antisymmetric([0.3, -0.7, 0.2, 0.5, -0.4, 0.9]))
        K = RotationField(expm(antisymmetric([0.0, 0.01, 0.0, 0.02, 0.0, 0.0])), np.zeros(4))
        a = check_epsilon_symmetric(shrinking_cylinder_flow(times, 32, z, z), center, K, L=1.1, T=1.0)
        b = check_epsilon_symmetric(
            shrinking_cylinder_flow(times, 32, z, z, rotation=Q),
            SpacetimePoint(Q @ center.position, center.time),
            K.moved(Q), L=1.1, T=1.0,
        )
        assert a.epsilon_measured > 1e-5
        assert b.epsilon_measured == pytest.approx(a.epsilon_measured, abs=1e-10)
        assert b.bound_KH == pytest.approx(a.bound_KH, abs=1e-10)
        assert b.nodes == a.nodes


class TestTiltSweep:
    """epsilon grows linearly in the tilt angle."""

    @pytest.fixture
    def flow(self):
        z = GridAxis(-3.0, 3.0, 13)
        return shrinking_cylinder_flow([-3.0, -2.0, -1.0], 32, z, z)

    @pytest.fixture
    def center(self):
        return SpacetimePoint([math.sqrt(2), 0.0, 0.0, 0.0], -1.0)

    def test_linear_growth(self, flow, center):
        sweep = tilt_sweep(flow, center, [0.005, 0.01, 0.02], [0.0, 1.0, 0.0, 0.0, 0.0, 0.0], L=1.0, T=1.0)
        assert sweep["slope"] == pytest.approx(1.0, abs=0.01)
        assert sweep["r2"] >= 0.999
        eps = [row[1] for row in sweep["rows"]]
        assert eps[1] / eps[0] == pytest.approx(2.0, rel=0.01)
        assert eps[2] / eps[1] == pytest.approx(2.0, rel=0.01)

    def test_direction_scale_is_ignored(self, flow, center):
        a = tilt_sweep(flow, center, [0.005, 0.01], [0.0, 1.0, 0.0, 0.0, 0.0, 0.0], L=1.0, T=1.0)
        b = tilt_sweep(flow, center, [0.005, 0.01], [0.0, 7.0, 0.0, 0.0, 0.0, 0.0], L=1.0, T=1.0)
        np.testing.assert_allclose(np.array(a["rows"]), np.array(b["rows"]), atol=1e-14)

    @pytest.mark.parametrize("alphas,direction,message", [
        ([0.01, 0.02], [0.0] * 6, "must be nonzero"),
        ([0.01], [0.0, 1.0, 0.0, 0.0, 0.0, 0.0], "at least two positive"),
        ([0.0, 0.01], [0.0, 1.0, 0.0, 0.0, 0.0, 0.0], "at least two positive"),
    ])
    def test_invalid_sweep(self, flow, center, alphas, direction, message):
        with pytest.raises(ValueError, match=message):
            tilt_sweep(flow, center, alphas, direction, L=1.0, T=1.0)

    @pytest.mark.parametrize("eps,KH,expected", [
        (1e-4, 1.0, True),
        (1e-2, 1.0, False),
        (1e-4, 6.0, False),
    ])
    def test_verdict(self, eps, KH, expected):
        assert SymmetryVerdict(eps, KH).passes(1e-3) is expected


# ============================================================
# Cylinder fitting and rigidity
# ============================================================

class TestFitCylinder:
    """Least-squares S^1 x R^2 fit."""

    def test_recovers_tilted_cylinder(self):
        S = expm(antisymmetric([0.0, 0.1, 0.05, 0.0, 0.0, 0.0]))
        z = GridAxis(-1.0, 1.0, 9)
        patch = CylinderModel(1, S, [0.1, -0.2, 0.3, 0.0]).as_polar_patch(32, z, z)
        model, error = fit_cylinder(patch, seed=0, restarts=2)
        assert model.radius == pytest.approx(math.sqrt(2), abs=1e-8)
        assert error < 1e-6
        assert is_cylindrical(error, 1e-3)

    def test_too_few_nodes(self, cylinder_patch):
        mask = np.zeros(cylinder_patch.shape, dtype=bool)
        mask[0, 4, 4] = True
        with pytest.raises(ValueError, match="at least 8 interior nodes"):
            fit_cylinder(cylinder_patch, mask)


class TestRigidity:
    """Residuals against the catalog of tangent rotation fields."""

    def test_cylinder_catalog(self, cylinder_patch):
        assert rigidity_residual(RotationField(), "cylinder", cylinder_patch) <= 1e-10
        assert rigidity_residual(RotationField(SWAP, np.zeros(4)), "cylinder", cylinder_patch) <= 1e-10

    def test_split_rotation_only_on_cylinder(self, cylinder_patch):
        assert rigidity_residual(RotationField(SWAP, np.zeros(4)), "bowl", cylinder_patch) > 0.1

    def test_unknown_model(self, cylinder_patch):
        with pytest.raises(ValueError, match="'cylinder' or 'bowl'"):
            rigidity_residual(RotationField(), "sphere", cylinder_patch)

    def test_catalog_lower_bound(self, cylinder_patch):
        bound = catalog_lower_bound(cylinder_patch, seed=0, starts=20)
        assert bound["certificate"] > 0
        assert bound["sampled_min"] >= bound["certificate"] * (1.0 - 1e-9)


# ============================================================
# Affine sup and alignment
# ============================================================

class TestAffineSup:
    """Exact max |A y + b| over a ball."""

    def test_scaled_identity(self):
        assert affine_sup(2.0 * np.eye(4), np.zeros(4), np.zeros(4), 1.0) == pytest.approx(2.0)

    def test_offset(self):
        b = np.array([1.0, 0.0, 0.0, 0.0])
        assert affine_sup(np.eye(4), b, np.zeros(4), 1.0) == pytest.approx(2.0)

    def test_rotation_off_center(self):
        assert affine_sup(J, np.zeros(4), [1.0, 0.0, 0.0, 0.0], 1.0) == pytest.approx(2.0)

    def test_zero_radius(self):
        assert affine_sup(J, np.ones(4), [1.0, 0.0, 0.0, 0.0], 0.0) == pytest.approx(math.sqrt(7))

    def test_dominates_samples(self):
        rng = np.random.default_rng(11)
        A, b, c = rng.normal(size=(4, 4)), rng.normal(size=4), rng.normal(size=4)
        sup = affine_sup(A, b, c, 1.5)
        y = rng.normal(size=(2000, 4))
        y = c + 1.5 * y / np.linalg.norm(y, axis=1, keepdims=True)
        sampled = np.max(np.linalg.norm(y @ A.T + b, axis=1))
        assert sampled <= sup + 1e-12
        assert sampled >= 0.95 * sup

    def test_ratio_bound(self):
        ratio, bound = affine_sup_ratio(J, np.array([0.0, 1.0, 0.0, 0.0]), np.zeros(4), 1.0, 10.0)
        assert ratio <= bound


class TestAlignment:
    """Agreement of admissible fields on growing balls."""

    def test_explicit_pair(self, cylinder_patch):
        K1 = RotationField()
        K2 = RotationField(np.eye(4), [1e-3, 0.0, 0.0, 0.0])
        report = alignment_experiment(cylinder_patch, [math.sqrt(2), 0.0, 0.0, 0.0], 1e-3,
                                      [1, 10], trials=0, pairs=[(K1, K2)])
        # K1 - K2 is the constant J q
        assert report.ratios[1.0] == pytest.approx(1.0 / (2.0 * math.sqrt(2)), rel=1e-9)
        assert report.ratios[10.0] == pytest.approx(1.0 / (11.0 * math.sqrt(2)), rel=1e-9)
        assert report.rows()[0][0] == 1.0

    def test_identical_fields(self, cylinder_patch):
        report = alignment_experiment(cylinder_patch, [math.sqrt(2), 0.0, 0.0, 0.0], 1e-3,
                                      [1, 100], trials=0, pairs=[(RotationField(), RotationField())])
        assert report.ratios == {1.0: 0.0, 100.0: 0.0}
        assert report.constant_spread == 1.0

    def test_eps_range(self, cylinder_patch):
        with pytest.raises(ValueError, match="eps must lie in"):
            alignment_experiment(cylinder_patch, [math.sqrt(2), 0, 0, 0], 0.02, [1], trials=1)

    def test_L_range(self, cylinder_patch):
        with pytest.raises(ValueError, match="L must lie in"):
            alignment_experiment(cylinder_patch, [math.sqrt(2), 0, 0, 0], 1e-3, [0.5], trials=1)


# ============================================================
# so(4) structure
# ============================================================

class TestSo4:
    """Commutator norms, expm remainder and gauge fixing."""

    def test_structure_checks(self):
        report = so4_structure_checks(samples=20, seed=5)
        assert report.commutator_frobenius_gap <= 1e-10
        assert report.commutator_operator_gap <= 1e-10
        assert report.expm_bound_violations == 0
        assert report.commute_residual <= 1e-12
        assert report.gauge_max_residual <= 1e-12
        assert report.to_dict()["samples"] == 20

    def test_gauge_of_zero(self):
        eta, theta, T = gauge_fix(np.zeros((4, 4)))
        assert (eta, theta) == pytest.approx((0.0, 0.0), abs=1e-14)
        np.testing.assert_allclose(T, 0.0, atol=1e-14)

    def test_gauge_of_pure_rotation(self):
        eta, theta, _ = gauge_fix(0.01 * J)
        assert eta == pytest.approx(0.01, abs=1e-12)
        assert theta == pytest.approx(0.0, abs=1e-12)

    def test_gauge_radius(self):
        with pytest.raises(ValueError, match="only supported"):
            gauge_fix(0.5 * J)
