# ============================================================
# soliton_lab.experiments: experiment catalog and runner
# ============================================================

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.linalg import expm
from scipy.spatial import cKDTree

from . import __version__
from .barrier import (
    BarrierConfig,
    bound_sweep,
    coefficient_chain_scan,
    displayed_chain_threshold,
    evolution_identity_residual,
    final_barrier_coefficient,
    final_boundary_bounds,
    maximum_principle_experiment,
    smallest_sufficient_j,
    coefficient_bound_chain,
    weight_condition_check,
)
from .convex import (
    ConvexBody,
    GeneralizedCylinder,
    cross_section_quadratic,
    cross_section_sweep,
    diameter_trials,
    diameters,
    entropy_F,
    entropy_sup,
    entropy_table,
    tilt_rotation,
)
from .geometry import GridAxis, SpacetimePoint, SurfacePatch, translator_residual
from .heat_kernel import (
    ImageKernel,
    flux_bound_experiment,
    flux_scaling_ratio,
    heat_residual,
    kernel_eval,
    mass_bound,
    survival_series,
)
from .helpers import DEFAULT_SEED, make_rng
from .io_utils import write_csv, write_json
from .jacobi import (
    evolve_cylinder_heat,
    field_spectrum,
    graded_times,
    improvement_experiment,
    mode_law,
    mode_zero_identity,
    refine_times,
    rescaled_mode_heat_residual,
    richardson_extrapolate,
    weighted_max_principle,
)
from .rotation import (
    J_PRIME,
    GeneratorPair,
    RotationField,
    alignment_experiment,
    antisymmetric,
    catalog_lower_bound,
    check_epsilon_symmetric,
    rigidity_residual,
    so4_structure_checks,
    tilt_sweep,
)
from .solitons import (
    OMEGA3,
    CylinderModel,
    blow_down_rescale,
    bowl_meridian_patch,
    bowl_times_line_revolution,
    grim_reaper_patch,
    height_evolution_check,
    shrinking_cylinder_flow,
    solve_bowl_profile,
    tabulate_tip_ratio,
    translating_flow,
)
from .validator import validate_params

logger = logging.getLogger(__name__)

PROVENANCE = ("stated", "trivial", "derived")


# ------------------------------------------------------------
# Reports
# ------------------------------------------------------------

def _clean(value):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return _clean(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


@dataclass
class ExperimentReport:
    """Scalars, verdicts and series produced by one experiment run."""

    experiment: str
    seed: int
    params: dict
    scalars: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)
    series: dict = field(default_factory=dict)

    def scalar(self, name: str, value, tolerance=None, provenance: str = "derived"):
        if provenance not in PROVENANCE:
            raise ValueError(f"unknown provenance '{provenance}'")
        self.scalars[name] = {"value": value, "tolerance": tolerance, "provenance": provenance}

    def verdict(self, name: str, passed, provenance: str = "derived", detail: str = ""):
        if provenance not in PROVENANCE:
            raise ValueError(f"unknown provenance '{provenance}'")
        self.verdicts[name] = {"passed": bool(passed), "provenance": provenance, "detail": detail}
        if not passed:
            logger.warning("%s: verdict '%s' failed %s", self.experiment, name, detail)

    def add_series(self, name: str, header, rows):
        self.series[name] = (list(header), [list(r) for r in rows])

    @property
    def passed(self) -> bool:
        return all(v["passed"] for v in self.verdicts.values())

    def to_dict(self) -> dict:
        return _clean({
            "experiment": self.experiment,
            "seed": self.seed,
            "params": self.params,
            "scalars": self.scalars,
            "verdicts": self.verdicts,
            "series": {name: f"{name}.csv" for name in self.series},
        })


# ------------------------------------------------------------
# Catalog
# ------------------------------------------------------------

@dataclass(frozen=True)
class Experiment:
    name: str
    anchor: str
    defaults: dict
    func: Callable


CATALOG: dict[str, Experiment] = {}


def experiment(name: str, anchor: str, **defaults):
    """Register an experiment function under ``name`` with typed defaults."""
    def register(func):
        CATALOG[name] = Experiment(name, anchor, defaults, func)
        return func
    return register


def list_experiments() -> list[tuple[str, str]]:
    return [(e.name, e.anchor) for e in CATALOG.values()]


def get_experiment(name: str) -> Experiment:
    try:
        return CATALOG[name]
    except KeyError:
        raise KeyError(f"unknown experiment '{name}'; choose from: {', '.join(CATALOG)}") from None


def resolve_params(name: str, overrides: dict | None = None) -> dict:
    """
    Defaults merged with typed overrides.

    Raises:
        KeyError: unknown experiment
        ValueError: unknown keys or type mismatches, listed together
    """
    exp = get_experiment(name)
    overrides = dict(overrides or {})
    errors = validate_params(exp.defaults, overrides)
    if errors:
        raise ValueError("Invalid experiment spec:\n" + "\n".join("  - " + e for e in errors))
    params = dict(exp.defaults)
    for key, value in overrides.items():
        default = exp.defaults[key]
        if isinstance(default, list) and not isinstance(value, list):
            value = [float(value)]
        elif isinstance(default, float) and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        params[key] = value
    return params


# ------------------------------------------------------------
# Runner
# ------------------------------------------------------------

def _write_outputs(report: ExperimentReport, out_dir: Path):
    out_dir.mkdir(parents=True, exist_ok=True)
    write_json(out_dir / "report.json", report.to_dict())
    for name, (header, rows) in report.series.items():
        write_csv(out_dir / f"{name}.csv", header, rows)


def run(name: str, overrides: dict | None = None, seed: int = DEFAULT_SEED,
        out_dir: str | Path | None = None) -> ExperimentReport:
    """
    Run one experiment and, with ``out_dir``, persist report.json, series
    CSVs and manifest.json (the only file carrying a wall time).

    Raises:
        KeyError / ValueError: unknown experiment or invalid parameters
        RuntimeError: the experiment raised; partial outputs are flushed and
            the manifest is marked failed
    """
    exp = get_experiment(name)
    params = resolve_params(name, overrides)
    report = ExperimentReport(name, int(seed), params)
    out = Path(out_dir) if out_dir is not None else None
    logger.info("experiment %s: start (seed %d)", name, seed)
    start = time.perf_counter()
    error = None
    try:
        exp.func(report, params, int(seed))
    except Exception as e:
        error = f"{type(e).__name__}: {e}"
        raise RuntimeError(f"experiment '{name}' failed: {e}") from e
    finally:
        wall = time.perf_counter() - start
        if out is not None:
            _write_outputs(report, out)
            write_json(out / "manifest.json", _clean({
                "experiment": name, "params": params, "seed": int(seed),
                "version": __version__, "wall_time": wall,
                "failed": error is not None, "error": error,
            }))
        logger.info("experiment %s: %s in %.2fs", name,
                    "error" if error else ("pass" if report.passed else "fail"), wall)
    return report


def run_all(seed: int = DEFAULT_SEED, out_dir: str | Path | None = None,
            threads: int | None = None, names=None) -> dict:
    """
    Run experiments concurrently; each writes into ``<out_dir>/<name>/``.

    Returns (and writes as summary.json) every verdict per experiment.
    """
    names = list(CATALOG) if names is None else list(names)
    for name in names:
        get_experiment(name)
    root = Path(out_dir) if out_dir is not None else None

    def one(name):
        target = root / name if root is not None else None
        try:
            report = run(name, None, seed, target)
            return name, {"passed": report.passed,
                          "verdicts": {k: v["passed"] for k, v in report.verdicts.items()}}
        except RuntimeError as e:
            logger.error("%s", e)
            return name, {"passed": False, "verdicts": {}, "error": str(e)}

    with ThreadPoolExecutor(max_workers=threads) as pool:
        results = dict(pool.map(one, names))
    summary = {"seed": int(seed), "experiments": {n: results[n] for n in names},
               "passed": all(r["passed"] for r in results.values())}
    if root is not None:
        write_json(root / "summary.json", summary)
    return summary


# ------------------------------------------------------------
# Solitons
# ------------------------------------------------------------

@experiment("bowl-ode", "Bowl profile ODE and the bounds phi' >= r/n, phi >= r^2/(2n)",
            n_values=[2.0, 3.0], r_max=100.0, step=0.01)
def _bowl_ode(report, params, seed):
    phi_ok = dphi_ok = H_ok = True
    for n in (int(v) for v in params["n_values"]):
        profile = solve_bowl_profile(n, params["r_max"], params["step"])
        r = profile.r
        tol = 1e-12 * (1.0 + r)
        dphi_slack = float(np.min(profile.dphi - r / n + tol))
        phi_slack = float(np.min(profile.phi - r * r / (2 * n) + tol))
        far = r >= 1.0
        H_gap = float(np.min(n / r[far] - profile.mean_curvature()[far]))
        report.scalar(f"dphi_slack_n{n}", dphi_slack, 0.0, "stated")
        report.scalar(f"phi_slack_n{n}", phi_slack, 0.0, "stated")
        report.scalar(f"H_gap_n{n}", H_gap, 0.0, "stated")
        dphi_ok &= dphi_slack >= 0
        phi_ok &= phi_slack >= 0
        H_ok &= H_gap > 0
        report.add_series(f"profile_n{n}", ["r", "phi"], profile.rows()[:: max(1, len(r) // 2000)])
    report.verdict("phi_prime_bound", dphi_ok, "stated")
    report.verdict("phi_bound", phi_ok, "stated")
    report.verdict("H_bound", H_ok, "stated", "H(r) < n/r for r >= 1")


@experiment("tip-ratio", "kappa/H = f(H d) near the Bowl tip, and the translator identities",
            r_max=100.0, step=0.01, kappa=1.0, rho_num=29)
def _tip_ratio(report, params, seed):
    profile = solve_bowl_profile(2, params["r_max"], params["step"])
    table = tabulate_tip_ratio(profile, params["kappa"])
    report.add_series("tip_ratio", ["s", "f", "A2_d"], table.rows()[:: max(1, len(table.s) // 2000)])
    tail = table.tail_ratios()[1]
    report.scalar("tail_f_over_s", tail, 0.02, "derived")
    report.verdict("tail_ratio", abs(tail - 2.0) <= 0.02 * 2.0, "derived",
                   f"f/s -> 2/(n-1) = 2, measured {tail:.5f}")
    A2_tip = float(profile.second_fundamental_norm()[0])
    report.verdict("tip_curvature", abs(A2_tip - 0.5) <= 1e-9 and abs(profile.mean_curvature()[0] - 1.0) <= 1e-12,
                   "trivial", "H = 1 and |A|^2 = 1/n at the tip")

    residuals = []
    for num in (params["rho_num"], 2 * params["rho_num"] - 1):
        patch = bowl_times_line_revolution(profile, GridAxis(0.2, 3.0, num), 64, GridAxis(-1.0, 1.0, 5))
        residuals.append(translator_residual(patch, OMEGA3))
    report.scalar("translator_residual", residuals[-1], None, "derived")
    report.verdict("translator_residual_converges", residuals[0] / residuals[1] >= 3.0, "derived",
                   f"residuals {residuals[0]:.3e} -> {residuals[1]:.3e}")

    grim = [translator_residual(grim_reaper_patch(1.2, n), [0.0, 1.0]) for n in (201, 401)]
    report.verdict("grim_reaper_converges", grim[0] / grim[1] >= 3.0, "derived",
                   f"residuals {grim[0]:.3e} -> {grim[1]:.3e}")

    patch = bowl_times_line_revolution(profile, GridAxis(0.2, 3.0, params["rho_num"]), 64,
                                       GridAxis(-1.0, 1.0, 5))
    flow = translating_flow(patch, OMEGA3, [-1.0, -0.5, 0.0])
    height = height_evolution_check(flow, OMEGA3)
    report.scalar("height_max_dhdt", height.max_dhdt, 1e-8, "derived")
    report.verdict("height_nonincreasing", height.matched, "derived")
    tilted = np.array([0.0, 0.1, 1.0, 0.0]) / math.sqrt(1.01)
    control = height_evolution_check(flow, tilted)
    report.verdict("height_detects_wrong_direction", not control.matched, "trivial",
                   f"defect {control.translator_defect:.3e}")


@experiment("blowdown", "blow-down of Bowl^3 to the radius-2 cylinder S^2 x R",
            a_values=[10.0, 20.0, 40.0, 80.0], R=5.0, r_max=180.0, step=0.02, num=12001)
def _blowdown(report, params, seed):
    profile = solve_bowl_profile(3, params["r_max"], params["step"])
    R = params["R"]
    patch = bowl_meridian_patch(profile, profile.r_max - 10.0, params["num"])
    half = math.sqrt(R * R - 4.0)
    y = np.linspace(-half, half, 2001)
    model = np.concatenate([np.stack([np.full_like(y, s * 2.0), y], axis=1) for s in (1.0, -1.0)])
    rows = []
    for a in params["a_values"]:
        clipped = blow_down_rescale(patch, a, R)
        pts = clipped.patch.positions()[clipped.mask]
        to_model = float(np.max(np.abs(np.abs(pts[:, 0]) - 2.0)))
        to_curve = float(np.max(cKDTree(pts).query(model)[0]))
        rows.append((float(a), max(to_model, to_curve)))
    report.add_series("blowdown", ["a", "hausdorff"], rows)
    dist = np.array([r[1] for r in rows])
    a = np.array([r[0] for r in rows])
    slope = float(np.polyfit(np.log(a), np.log(dist), 1)[0])
    report.scalar("hausdorff_at_max_a", float(dist[-1]), 0.15, "derived")
    report.scalar("decay_exponent", slope, None, "derived")
    report.verdict("monotone", bool(np.all(np.diff(dist) < 0)), "stated")
    report.verdict("close_at_max_a", dist[-1] < 0.15, "derived")
    # distance ~ log(a)/a, so the fitted exponent sits a little above -1
    report.verdict("decay_rate", -1.2 <= slope <= -0.5, "derived", f"slope {slope:.3f}")


# ------------------------------------------------------------
# Rotational symmetry
# ------------------------------------------------------------

@experiment("symmetry-check", "epsilon-symmetry of the shrinking cylinder on a parabolic neighborhood",
            L=10.0, T=100.0, theta_num=32, z_num=33, alphas=[0.005, 0.01, 0.02])
def _symmetry_check(report, params, seed):
    L, T = params["L"], params["T"]
    half = 1.15 * L * math.sqrt(2.0)
    z = GridAxis(-half, half, params["z_num"])
    depth = 2.0 * T
    times = [-1.0 - depth, -1.0 - depth / 2.0, -1.0 - depth / 10.0, -2.0, -1.0]
    flow = shrinking_cylinder_flow(times, params["theta_num"], z, z)
    center = SpacetimePoint([math.sqrt(2.0), 0.0, 0.0, 0.0], -1.0)

    exact = check_epsilon_symmetric(flow, center, RotationField(), L, T)
    report.scalar("epsilon_axis_rotation", exact.epsilon_measured, 1e-10, "trivial")
    report.scalar("KH_axis_rotation", exact.bound_KH, 5.0, "trivial")
    report.verdict("axis_rotation_symmetric", exact.passes(1e-10), "trivial")

    rng = make_rng(seed, "symmetry-check")
    S = expm(1e-3 * antisymmetric(rng.normal(size=6)))
    tilted = check_epsilon_symmetric(flow, center, RotationField(S, np.zeros(4)), L, T)
    report.scalar("epsilon_tilted", tilted.epsilon_measured, None, "derived")
    report.verdict("tilt_detected", tilted.epsilon_measured > 1e-6, "derived")

    sweep = tilt_sweep(flow, center, params["alphas"], rng.normal(size=6), L, T)
    report.add_series("tilt_sweep", ["alpha", "epsilon", "KH"], sweep["rows"])
    report.scalar("tilt_slope", sweep["slope"], 0.1, "derived")
    report.scalar("tilt_fit_r2", sweep["r2"], 0.99, "derived")
    report.verdict("epsilon_linear_in_tilt", abs(sweep["slope"] - 1.0) <= 0.1 and sweep["r2"] >= 0.99,
                   "derived", f"slope {sweep['slope']:.4f}")


def _unit_cylinder_patch(theta_num=64, z_num=17, half=2.0) -> SurfacePatch:
    z = GridAxis(-half, half, z_num)
    return CylinderModel(1, np.eye(4), np.zeros(4)).as_polar_patch(theta_num, z, z, t=-1.0)


@experiment("alignment-scaling", "two admissible fields agree up to eps (L + 1) on B_{L/H}",
            eps=1e-3, L_values=[1.0, 10.0, 100.0], trials=50)
def _alignment(report, params, seed):
    patch = _unit_cylinder_patch()
    result = alignment_experiment(patch, [math.sqrt(2.0), 0.0, 0.0, 0.0], params["eps"],
                                  params["L_values"], int(params["trials"]), seed)
    report.add_series("alignment", ["L", "max_ratio"], result.rows())
    report.scalar("constant_spread", result.constant_spread, 5.0, "stated")
    report.verdict("linear_in_L", result.constant_spread <= 5.0, "stated",
                   f"max/min of per-L maxima {result.constant_spread:.3f}")


@experiment("rigidity", "rotation fields tangent to the cylinder and to Bowl x R, so(4) facts",
            samples=1000, starts=200)
def _rigidity(report, params, seed):
    cyl = _unit_cylinder_patch(z_num=9)
    swap = np.zeros((4, 4))
    swap[0, 2] = swap[1, 3] = swap[2, 0] = swap[3, 1] = 1.0
    r_J = rigidity_residual(RotationField(), "cylinder", cyl)
    r_Jp = rigidity_residual(RotationField(swap, np.zeros(4)), "cylinder", cyl)
    report.verdict("cylinder_axis_rotation", r_J <= 1e-10, "trivial")
    report.verdict("cylinder_split_rotation", r_Jp <= 1e-10, "trivial")

    profile = solve_bowl_profile(2, 10.0, 0.01)
    bowl = bowl_times_line_revolution(profile, GridAxis(0.2, 3.0, 29), 64, GridAxis(-1.0, 1.0, 5))
    r_bowl = rigidity_residual(RotationField(), "bowl", bowl)
    report.verdict("bowl_axis_rotation", r_bowl <= 1e-10, "trivial")
    r_split = rigidity_residual(RotationField(swap, np.zeros(4)), "bowl", bowl)
    report.verdict("bowl_excludes_split_rotation", r_split > 0.1, "derived",
                   f"residual {r_split:.3f}")

    bound = catalog_lower_bound(cyl, seed, int(params["starts"]))
    report.scalar("catalog_sampled_min", bound["sampled_min"], None, "derived")
    report.scalar("catalog_certificate", bound["certificate"], None, "derived")
    report.verdict("catalog_bounded_below", bound["certificate"] > 0
                   and bound["sampled_min"] >= bound["certificate"] * (1.0 - 1e-9), "derived")

    so4 = so4_structure_checks(int(params["samples"]), seed)
    report.scalar("commutator_frobenius_gap", so4.commutator_frobenius_gap, 1e-10, "trivial")
    report.scalar("commutator_operator_gap", so4.commutator_operator_gap, 1e-10, "trivial")
    report.scalar("pointwise_ratio_min", so4.pointwise_ratio_range[0], None, "derived")
    report.scalar("pointwise_ratio_max", so4.pointwise_ratio_range[1], None, "derived")
    report.verdict("commutator_norms", max(so4.commutator_frobenius_gap,
                                           so4.commutator_operator_gap) <= 1e-10, "trivial")
    report.verdict("expm_remainder", so4.expm_bound_violations == 0, "trivial")
    report.verdict("gauge_fixing", so4.gauge_max_residual <= 1e-12
                   and max(map(abs, so4.gauge_zero)) <= 1e-14
                   and abs(so4.gauge_pure_rotation[0] - 0.01) <= 1e-12, "derived")
    pair = GeneratorPair().check(seed=seed)
    report.verdict("generator_pair", max(pair.values()) <= 1e-12, "trivial")


# ------------------------------------------------------------
# Cylinder Jacobi equation
# ------------------------------------------------------------

@experiment("mode-decay", "Fourier modes of the cylinder Jacobi field scale like (-t)^((m^2-1)/2)",
            modes=[0.0, 2.0, 3.0, 4.0], t0=-2.0, rel=0.002, theta_num=16, z_num=5,
            graphs=20, amplitude=0.1, wrong_shift=0.5)
def _mode_decay(report, params, seed):
    t0 = params["t0"]
    N = params["theta_num"]
    z = GridAxis(-1.0, 1.0, params["z_num"])
    theta = GridAxis.angle(N).nodes()
    mid = params["z_num"] // 2
    rows = []
    residuals = []
    worst = 0.0
    for m in [1] + [int(v) for v in params["modes"]]:
        shape = np.cos(m * theta)[:, None, None] * np.ones((1, z.num, z.num))

        def exact(t, shape=shape, m=m):
            return float(mode_law(m, t, t0)) * shape

        times = graded_times(t0, -1.0, rel=params["rel"], max_step=params["rel"])
        levels = [times, refine_times(times), refine_times(refine_times(times))]
        fields = [evolve_cylinder_heat(shape, z, z, ts, boundary=exact) for ts in levels]
        field_ = richardson_extrapolate(fields, order=1)
        spec = field_spectrum(field_, max(m, 1))
        coeff = spec.cos[m, :, mid, mid] / spec.cos[m, 0, mid, mid]
        err = float(np.max(np.abs(coeff - mode_law(m, field_.times, t0))))
        rows.append((m, float(coeff[-1]), float(mode_law(m, -1.0, t0)), err))
        # rescaled coefficient (-t)^((1 - m^2)/2) u_m is constant in t
        scale = abs(float(spec.cos[m, 0, mid, mid])) * (-t0) ** ((1 - m * m) / 2.0)
        residuals.append((m, rescaled_mode_heat_residual(field_, m) / scale,
                          rescaled_mode_heat_residual(field_, m, params["wrong_shift"]) / scale))
        if m == 1:
            report.verdict("mode1_neutral", err <= 1e-6, "stated", f"error {err:.2e}")
        else:
            worst = max(worst, err)
    report.add_series("mode_law", ["m", "ratio_at_t1", "law_at_t1", "max_error"], rows)
    report.scalar("mode_law_error", worst, 1e-3, "stated")
    report.verdict("mode_law", worst <= 1e-3, "stated")
    report.add_series("mode_heat_residual", ["m", "residual", "residual_wrong_exponent"], residuals)
    exact_res = max(r[1] for r in residuals)
    wrong_res = min(r[2] for r in residuals)
    report.scalar("rescaled_heat_residual", exact_res, 1e-3, "derived")
    report.scalar("wrong_exponent_residual", wrong_res, None, "derived")
    report.verdict("rescaled_modes_solve_heat", exact_res <= 1e-3, "derived", f"residual {exact_res:.2e}")
    report.verdict("wrong_exponent_detected", wrong_res >= 0.1, "derived", f"residual {wrong_res:.2e}")

    rng = make_rng(seed, "mode-decay")
    zz = GridAxis(-1.0, 1.0, 9)
    th = GridAxis.angle(64)
    TH, Z1, Z2 = np.meshgrid(th.nodes(), zz.nodes(), zz.nodes(), indexing="ij")
    identity = 0.0
    for _ in range(int(params["graphs"])):
        c = rng.uniform(-1.0, 1.0, size=6) * params["amplitude"] / 6.0
        r = (math.sqrt(2.0) + c[0] * np.cos(TH) + c[1] * np.sin(2 * TH) + c[2] * np.cos(3 * TH) * Z1
             + c[3] * np.sin(TH) * Z2 + c[4] * Z1 * Z2 + c[5] * np.cos(TH + Z1))
        identity = max(identity, mode_zero_identity(SurfacePatch("polar", (th, zz, zz), r)))
    report.scalar("mode_zero_identity", identity, 1e-8, "derived")
    report.verdict("mode_zero_identity", identity <= 1e-8, "derived")

    u0 = rng.normal(size=(16, 9, 9))
    g = rng.normal(size=(16, 9, 9))
    mp = weighted_max_principle(u0, zz, zz, graded_times(-2.0, -1.0, 0.02, 0.02),
                                boundary=lambda t: g * (1.0 + 0.1 * t))
    report.scalar("weighted_max_principle_gap", mp["gap"], 1e-8, "derived")
    report.verdict("weighted_max_principle", mp["gap"] <= 1e-8, "derived")


@experiment("neck-improvement", "removing the linear m = 1 field halves the neck perturbation",
            L0_values=[25.0, 50.0, 100.0], eps=1e-3)
def _neck_improvement(report, params, seed):
    rows = []
    for L0 in params["L0_values"]:
        result = improvement_experiment(L0, params["eps"])
        rows.append((result.L0, result.eps_prime, result.factor))
    report.add_series("improvement", ["L0", "eps_prime", "factor"], rows)
    factors = [r[2] for r in rows]
    report.scalar("factor_at_max_L0", factors[-1], 0.6, "stated")
    report.verdict("halves_perturbation", factors[-1] <= 0.6, "stated")
    report.verdict("monotone_in_L0", all(b < a for a, b in zip(factors, factors[1:])), "derived")
    with_linear = improvement_experiment(max(params["L0_values"]), params["eps"], linear=True)
    report.verdict("linear_field_removed", abs(with_linear.factor - factors[-1]) <= 0.05, "derived",
                   f"factor {with_linear.factor:.4f} with a z1 cos(theta) field added")


# ------------------------------------------------------------
# Heat kernel
# ------------------------------------------------------------

@experiment("kernel-mass", "Dirichlet heat kernel on a square: symmetry, boundary values, mass <= 1",
            L=8.0, probes=100)
def _kernel_mass(report, params, seed):
    L = params["L"]
    k = ImageKernel(L)
    rng = make_rng(seed, "kernel-mass")
    sym = edge = resid = oracle = 0.0
    mass_max = 0.0
    for _ in range(int(params["probes"])):
        x = rng.uniform(-0.9 * L, 0.9 * L, size=2)
        y = rng.uniform(-0.9 * L, 0.9 * L, size=2)
        t = float(rng.uniform(1.0, 10.0))
        sym = max(sym, abs(float(kernel_eval(k, t, x, y) - kernel_eval(k, t, y, x))))
        on_side = np.array([y[0], L * rng.choice([-1.0, 1.0])])
        edge = max(edge, abs(float(kernel_eval(k, t, x, on_side))))
        resid = max(resid, heat_residual(k, t, x, y))
    for _ in range(10):
        x = rng.uniform(-0.9 * L, 0.9 * L, size=2)
        t = float(rng.uniform(0.5, 4.0 * L * L))
        mass = mass_bound(k, t, x)
        mass_max = max(mass_max, mass)
        oracle = max(oracle, abs(mass - survival_series(L, x, t)))
    report.scalar("symmetry", sym, 1e-8, "trivial")
    report.scalar("boundary_value", edge, 1e-8, "trivial")
    report.scalar("heat_residual", resid, 1e-8, "derived")
    report.scalar("mass_max", mass_max, 1e-6, "trivial")
    report.scalar("survival_oracle_gap", oracle, 1e-8, "derived")
    report.verdict("symmetry", sym <= 1e-8, "trivial")
    report.verdict("boundary_vanishing", edge <= 1e-8, "trivial")
    report.verdict("heat_equation", resid <= 1e-8, "derived")
    report.verdict("mass_bound", mass_max <= 1.0 + 1e-6, "trivial")
    report.verdict("survival_oracle", oracle <= 1e-8, "derived")


@experiment("kernel-flux", "boundary flux of the square kernel decays like exp(-L^2/(50 (t - tau)))",
            L=8.0, s_min=0.0025, s_max=0.5, points=16)
def _kernel_flux(report, params, seed):
    L = params["L"]
    k = ImageKernel(L)
    s = L * L * np.geomspace(params["s_min"], params["s_max"], int(params["points"]))
    flux = flux_bound_experiment(k, [0.0, 0.0], s)
    report.add_series("flux", ["s", "flux", "bound", "ratio"], flux.rows())
    report.scalar("C_hk", flux.C_hk, None, "stated")
    report.scalar("C_app", flux.C_app, None, "stated")
    report.scalar("log_slope", flux.log_slope, None, "derived")
    report.verdict("decay_rate", flux.decay_ok, "stated",
                   f"slope {flux.log_slope:.4g} vs {flux.slope_bound:.4g}")
    ratio = flux_scaling_ratio(L, [0.1, -0.2], 0.05)
    report.scalar("scaling_ratio", ratio, 1e-6, "trivial")
    report.verdict("parabolic_scaling", abs(ratio - 1.0) <= 1e-6, "trivial")


# ------------------------------------------------------------
# Barrier
# ------------------------------------------------------------

@experiment("barrier-conditions", "weight conditions and negativity of the barrier coefficient",
            Lambda1=2.0, C1=2.0, D_values=[100.0, 1000.0, 1e4, 1e5], samples=200, j_max=1000)
def _barrier_conditions(report, params, seed):
    Lambda1, C1 = params["Lambda1"], params["C1"]
    j0 = smallest_sufficient_j(Lambda1, C1)
    check = weight_condition_check(j0, Lambda1, C1)
    report.scalar("smallest_sufficient_j", j0, None, "derived")
    report.verdict("weight_conditions", check["all_passed"], "stated", f"j = {j0}")
    control = weight_condition_check(1, 1.0, 1.0)
    report.verdict("weight_negative_control", not control["conditions"]["phi_at_W"]["passed"],
                   "derived", "j = 1, Lambda1 = C1 = 1")

    scan = coefficient_chain_scan(params["D_values"], int(params["samples"]), seed)
    report.add_series("coefficient_chain", ["D", "max_coefficient", "scaled"], scan["rows"])
    report.verdict("coefficient_negative", scan["all_negative"], "stated")
    sharp = coefficient_bound_chain(100.0)
    report.verdict("sharp_chain_negative", sharp["sharp_negative"], "derived")
    report.scalar("displayed_chain_threshold", displayed_chain_threshold(), None, "derived")

    final = [final_barrier_coefficient(j, 3.0 * 2.0 ** (-j / 100.0)) for j in range(1, int(params["j_max"]) + 1)]
    report.verdict("final_coefficient_negative", max(final) < 0, "stated")
    bounds = final_boundary_bounds(500, 1.0)
    report.verdict("final_boundary_pieces", bounds["side_ok"] and bounds["far_ok"], "derived", "j = 500")

    coarse = evolution_identity_residual(h=0.04)
    fine = evolution_identity_residual(h=0.02)
    report.scalar("identity_residual", fine, 1e-3, "derived")
    report.verdict("evolution_identity", fine <= 1e-3 and coarse / fine >= 3.0, "derived",
                   f"residuals {coarse:.3e} -> {fine:.3e}")


@experiment("barrier-maxprinciple", "maximum principle for the barrier equation on Bowl^2 x R",
            j=0, Lambda1=16.0, runs=20, Lambda1_sweep=2.0, C1_sweep=2.0)
def _barrier_maxprinciple(report, params, seed):
    cfg = BarrierConfig(int(params["j"]), params["Lambda1"])
    result = maximum_principle_experiment(cfg, random_runs=int(params["runs"]), seed=seed)
    report.add_series("max_principle", ["case", "interior_sup", "boundary_sup"],
                      [(r["case"], r["interior_sup"], r["boundary_sup"]) for r in result.runs])
    by_case = {r["case"]: r for r in result.runs}
    report.verdict("zero_data", by_case["zero"]["interior_sup"] == 0.0, "trivial")
    report.verdict("unit_side_data", by_case["unit"]["interior_sup"] <= 1.0 + 1e-8, "derived")
    report.scalar("worst_gap", result.worst_gap, 1e-8, "stated")
    report.verdict("maximum_principle", result.passes(1e-8), "stated")

    j0 = smallest_sufficient_j(params["Lambda1_sweep"], params["C1_sweep"])
    sweep = bound_sweep(j0, params["Lambda1_sweep"], params["C1_sweep"])
    report.add_series("bound_sweep", ["j", "log2_displayed", "log2_sharp", "log2_target"], sweep["rows"])
    report.scalar("slope_displayed", sweep["slope_displayed"], None, "derived")
    report.scalar("slope_sharp", sweep["slope_sharp"], None, "derived")
    report.verdict("bound_decreases", sweep["monotone"], "stated")
    report.verdict("sharp_bound_below_target", sweep["sharp_below_target"], "derived")


# ------------------------------------------------------------
# Convex geometry
# ------------------------------------------------------------

@experiment("diameters", "intrinsic diameter of a convex boundary is at most 3 extrinsic diameters",
            trials=1000, points=30, sphere_points=400)
def _diameters(report, params, seed):
    sphere = diameters(ConvexBody.sphere(int(params["sphere_points"])))
    report.scalar("sphere_d1", sphere.d1, 0.03, "trivial")
    report.verdict("sphere_geodesic", abs(sphere.d1 - math.pi) <= 0.03, "trivial")
    pancake = diameters(ConvexBody.ellipsoid([1.0, 1.0, 0.01], int(params["sphere_points"])))
    report.scalar("pancake_ratio", pancake.ratio, None, "derived")
    rows = diameter_trials(int(params["trials"]), seed, int(params["points"]))
    report.add_series("diameter_trials", ["trial", "d1", "d2", "ratio"],
                      [(r["trial"], r["d1"], r["d2"], r["ratio"]) for r in rows])
    worst = max(max(r["ratio"] for r in rows), pancake.ratio, sphere.ratio)
    report.scalar("max_ratio", worst, 3.0, "stated")
    report.verdict("ratio_at_most_3", worst <= 3.0, "stated")
    report.verdict("path_at_least_chord", all(r["d1"] >= r["d2"] * (1 - 1e-9) for r in rows), "trivial")


@experiment("cross-section", "section of a slightly rotated S^1 x R^2 is an ellipse with axes near 1",
            etas=[0.01, 0.02, 0.04])
def _cross_section(report, params, seed):
    flat = cross_section_quadratic(np.eye(4), 0.0)
    report.verdict("identity_section", np.allclose(flat.eigenvalues, [1.0, 1.0, 0.0], atol=1e-15), "trivial")
    rows = []
    oracle = 0.0
    for eta in params["etas"]:
        s = cross_section_quadratic(tilt_rotation(eta), eta)
        oracle = max(oracle, abs(s.semi_axes.max() - 1.0 / math.cos(eta)), abs(s.semi_axes.min() - 1.0))
        rows.append((eta, s.deviation, s.constant, s.trace_gap))
    report.add_series("cross_section", ["eta", "deviation", "constant", "trace_gap"], rows)
    report.verdict("tilted_oracle", oracle <= 1e-12, "derived", "axes 1 and sec(eta)")
    report.verdict("trace_identity", max(r[3] for r in rows) <= 1e-14, "trivial")
    sweep = cross_section_sweep(params["etas"], seed)
    report.scalar("deviation_slope", sweep["slope"], None, "derived")
    report.scalar("deviation_fit_r2", sweep["r2"], 0.99, "derived")
    report.verdict("axes_near_one", all(r[1] <= r[0] for r in sweep["rows"]), "stated")
    report.verdict("power_law_fit", sweep["r2"] >= 0.99, "derived",
                   f"deviation ~ eta^{sweep['slope']:.3f}")


@experiment("entropy-table", "Gaussian entropy of the generalized cylinders S^k x R^(3-k)",
            z_half=12.0, theta_num=128, z_num=97)
def _entropy_table(report, params, seed):
    table = entropy_table(3)
    report.add_series("entropy", ["k", "lambda"], table)
    values = dict(table)
    report.scalar("lambda_S1", values[1], 0.002, "derived")
    report.scalar("lambda_S2", values[2], 0.002, "derived")
    report.verdict("circle_value", abs(values[1] - math.sqrt(2.0 * math.pi / math.e)) <= 1e-10, "derived")
    report.verdict("sphere_value", abs(values[2] - 4.0 / math.e) <= 1e-10, "derived")
    report.verdict("plane_value", abs(values[0] - 1.0) <= 1e-12, "trivial")
    report.verdict("ordering", values[1] - values[2] > 0.03, "stated",
                   f"gap {values[1] - values[2]:.4f}")

    stable = 0.0
    for scale in (1, 2):
        z = GridAxis(-params["z_half"], params["z_half"], scale * (int(params["z_num"]) - 1) + 1)
        th = GridAxis.angle(scale * int(params["theta_num"]))
        patch = SurfacePatch("polar", (th, z), np.full((th.num, z.num), math.sqrt(2.0)))
        stable = max(stable, abs(entropy_F(patch, np.zeros(3), 1.0) - values[1]))
    report.scalar("quadrature_gap", stable, 0.002, "derived")
    report.verdict("quadrature_stable", stable <= 0.002, "derived")

    for k in (1, 2):
        best = entropy_sup(GeneralizedCylinder(k, 3))
        report.verdict(f"sup_at_origin_k{k}", best.x0 <= 1e-3 and abs(best.t0 - 1.0) <= 1e-3,
                       "stated", f"argmax a={best.x0:.2e}, t0={best.t0:.6f}")
