# ============================================================
# tests.test_heat_kernel: Dirichlet heat kernel on a square
# ============================================================

import math

import numpy as np
import pytest

from soliton_lab.heat_kernel import (
    SIDES,
    BoundaryHistory,
    ImageKernel,
    InitialSlice,
    boundary_flux,
    boundary_solution_formula,
    flux_bound_experiment,
    flux_scaling_ratio,
    heat_residual,
    kernel_eval,
    mass_bound,
    survival_series,
)

L = 8.0


@pytest.fixture(scope="module")
def kernel():
    return ImageKernel(L)


# ============================================================
# Kernel values
# ============================================================

class TestImageKernel:
    """Symmetry, boundary values and the heat equation."""

    def test_symmetric(self, kernel):
        x, y = np.array([1.0, -2.0]), np.array([-3.5, 0.5])
        assert float(kernel_eval(kernel, 2.0, x, y)) == pytest.approx(float(kernel_eval(kernel, 2.0, y, x)), abs=1e-15)

    @pytest.mark.parametrize("side", [(2.0, L), (2.0, -L), (L, -1.0), (-L, 3.0)])
    def test_vanishes_on_boundary(self, kernel, side):
        assert abs(float(kernel_eval(kernel, 3.0, [0.5, -1.0], side))) <= 1e-12

    def test_positive_inside(self, kernel):
        assert kernel_eval(kernel, 1.0, [0.0, 0.0], [0.5, 0.5]) > 0

    def test_solves_heat_equation(self, kernel):
        assert heat_residual(kernel, 2.0, [1.0, 0.5], [-1.0, 2.0]) <= 1e-8

    def test_invalid_parameters(self):
        with pytest.raises(ValueError, match="L must be positive"):
            ImageKernel(0.0)
        with pytest.raises(ValueError, match="truncation must be"):
            ImageKernel(1.0, truncation=2)

    def test_time_must_be_positive(self, kernel):
        with pytest.raises(ValueError, match="t > 0"):
            kernel_eval(kernel, 0.0, [0.0, 0.0], [1.0, 1.0])

    @pytest.mark.parametrize("t", [0.1, 1.0, L * L / 4.0, L * L])
    def test_truncation_five_is_converged(self, kernel, t):
        wider = ImageKernel(L, truncation=6)
        x = np.array([0.3, -7.5])
        ys = np.array([[0.0, 0.0], [7.9, 7.9], [-4.0, 2.5]])
        for y in ys:
            assert abs(float(kernel_eval(kernel, t, x, y)) - float(kernel_eval(wider, t, x, y))) < 1e-12
        assert abs(boundary_flux(kernel, [0.0, 0.0], t) - boundary_flux(wider, [0.0, 0.0], t)) < 1e-12


class TestMass:
    """int |K_t(x, .)| <= 1, equal to the survival probability."""

    @pytest.mark.parametrize("x,t", [
        ([0.0, 0.0], 0.5),
        ([3.0, -5.0], 4.0),
        ([7.0, 7.0], 50.0),
    ])
    def test_matches_survival_series(self, kernel, x, t):
        mass = mass_bound(kernel, t, x)
        assert mass <= 1.0 + 1e-6
        assert mass == pytest.approx(survival_series(L, x, t), abs=1e-8)

    def test_survival_decreases(self):
        values = [survival_series(L, [1.0, 1.0], t) for t in (1.0, 10.0, 100.0)]
        assert values[0] > values[1] > values[2] > 0

    def test_near_boundary_mass(self, kernel):
        mass = mass_bound(kernel, L * L / 4.0, [0.99 * L, 0.0])
        assert 0.0 < mass < 0.9

    def test_point_outside(self, kernel):
        with pytest.raises(ValueError, match="interior of the square"):
            mass_bound(kernel, 1.0, [L, 0.0])


# ============================================================
# Boundary flux
# ============================================================

class TestFlux:
    """Decay of the boundary flux as t - tau shrinks."""

    def test_decay_rate(self, kernel):
        s = L * L * np.geomspace(1.0 / 400.0, 0.5, 16)
        report = flux_bound_experiment(kernel, [0.0, 0.0], s)
        assert report.decay_ok
        assert report.slope_bound == pytest.approx(-L * L / 50.0)
        assert len(report.rows()) == 16
        assert report.C_hk > 0 and report.C_app > 0

    def test_vanishes_as_time_gap_closes(self, kernel):
        s = L * L * np.geomspace(1.0 / 400.0, 0.1, 10)
        flux = flux_bound_experiment(kernel, [0.0, 0.0], s).flux
        assert np.all(np.diff(flux) > 0)
        assert 0.0 <= flux[0] <= 1e-30 * flux[-1]

    def test_far_point_rejected(self, kernel):
        with pytest.raises(ValueError, match="half-width L/25"):
            flux_bound_experiment(kernel, [1.0, 0.0], [1.0, 2.0])

    def test_parabolic_scaling(self):
        assert flux_scaling_ratio(L, [0.1, -0.2], 0.05) == pytest.approx(1.0, abs=1e-6)


# ============================================================
# Representation formula
# ============================================================

class TestRepresentationFormula:
    """Initial data plus boundary history reproduce the solution."""

    @pytest.fixture
    def setup(self, kernel):
        nodes = np.linspace(-L, L, 201)
        Y1, Y2 = np.meshgrid(nodes, nodes, indexing="ij")
        q = math.pi / (2.0 * L)
        initial = InitialSlice(0.0, nodes, nodes, np.cos(q * Y1) * np.cos(q * Y2))
        times = np.array([0.0, 1.0])
        history = BoundaryHistory(times, nodes, {side: np.zeros((2, len(nodes))) for side in SIDES})
        return initial, history, q

    def test_first_eigenfunction(self, kernel, setup):
        initial, history, q = setup
        x = np.array([1.0, -2.0])
        expected = math.exp(-2.0 * q * q) * math.cos(q * x[0]) * math.cos(q * x[1])
        assert boundary_solution_formula(kernel, initial, history, x, 1.0) == pytest.approx(expected, abs=1e-6)

    def test_grid_must_span_square(self, kernel, setup):
        initial, history, _ = setup
        short = InitialSlice(0.0, initial.y1[1:], initial.y2, initial.values[1:])
        with pytest.raises(ValueError, match="grid mismatch"):
            boundary_solution_formula(kernel, short, history, [0.0, 0.0], 1.0)

    def test_missing_side(self, kernel, setup):
        initial, history, _ = setup
        del history.values["x2=-L"]
        with pytest.raises(ValueError, match="missing for sides"):
            boundary_solution_formula(kernel, initial, history, [0.0, 0.0], 1.0)

    @pytest.fixture(scope="class")
    def constant_data(self):
        nodes = np.linspace(-L, L, 201)
        initial = InitialSlice(0.0, nodes, nodes, np.ones((201, 201)))
        # geometric in t - tau toward the target time 1
        taus = np.concatenate([1.0 - np.geomspace(1.0, 1e-5, 2000), [1.0]])
        ones = BoundaryHistory(taus, nodes, {side: np.ones((len(taus), 201)) for side in SIDES})
        zeros = BoundaryHistory(taus, nodes, {side: np.zeros((len(taus), 201)) for side in SIDES})
        return initial, ones, zeros

    @pytest.mark.parametrize("x", [[0.0, 0.0], [4.0, -2.0], [7.0, 0.0], [7.0, 7.0]])
    def test_constant_solution(self, kernel, constant_data, x):
        initial, ones, _ = constant_data
        assert boundary_solution_formula(kernel, initial, ones, x, 1.0) == pytest.approx(1.0, abs=1e-5)

    def test_boundary_term_carries_lost_mass(self, kernel, constant_data):
        initial, ones, zeros = constant_data
        x = [7.0, 0.0]
        interior_only = boundary_solution_formula(kernel, initial, zeros, x, 1.0)
        assert interior_only < 0.9
        assert interior_only == pytest.approx(survival_series(L, x, 1.0), abs=1e-6)
        assert boundary_solution_formula(kernel, initial, ones, x, 1.0) - interior_only > 0.1
