# ============================================================
# soliton_lab.barrier: weighted barrier for the Jacobi field on Bowl x R
# ============================================================
#
# f = exp(-Phi + lam (t - t_ref)) u / (H - c),  Phi = phi(x4),  solves
#
#   (d_t - Lap) f = (lam - c|A|^2/(H-c) - d_t Phi + Lap Phi + |grad Phi|^2
#                    + 2<grad Phi, grad H>/(H-c)) f + 2<grad f, grad Phi + grad H/(H-c)>
#
# whenever u solves the Jacobi equation. Negativity of the zeroth-order
# coefficient is what makes the maximum principle bite.

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import brentq
from scipy.sparse.linalg import splu

from .helpers import make_rng
from .solitons import BowlProfile, solve_bowl_profile

logger = logging.getLogger(__name__)

WEIGHT_SLOPE = 400.0
LAMBDA_FACTOR = 1000.0
OFFSET_FACTOR = 8.0
MAX_J_SCAN = 100000
LN2 = math.log(2.0)


# ------------------------------------------------------------
# Configuration and weight
# ------------------------------------------------------------

@dataclass(frozen=True)
class BarrierConfig:
    """Domain and rate constants of the j-th barrier region."""

    j: int
    Lambda1: float = 1.0
    C1: float = 1.0

    def __post_init__(self):
        if self.j < 0:
            raise ValueError(f"j must be >= 0, got {self.j}")
        if self.Lambda1 < 1 or self.C1 < 1:
            raise ValueError("Lambda1 and C1 must be >= 1")

    @property
    def D(self) -> float:
        return 2.0 ** (self.j / 100.0) * self.Lambda1

    @property
    def W(self) -> float:
        return self.D**2

    @property
    def T(self) -> float:
        return self.D**2

    @property
    def lam(self) -> float:
        return 1.0 / (LAMBDA_FACTOR * self.D)

    @property
    def c(self) -> float:
        return self.D**-0.5 / OFFSET_FACTOR

    @property
    def log_extent(self) -> float:
        """ln(W + D + T)."""
        D = self.D
        return 2.0 * math.log(D) + math.log(2.0 + 1.0 / D)

    def to_dict(self) -> dict:
        return {"j": self.j, "Lambda1": self.Lambda1, "C1": self.C1, "D": self.D,
                "W": self.W, "T": self.T, "lam": self.lam, "c": self.c}


def final_rates(j: int) -> tuple[float, float]:
    """(lam_j, c_j) = (2^{-j/50}, 2^{-j/100}) of the final barrier step."""
    return 2.0 ** (-j / 50.0), 2.0 ** (-j / 100.0)


@dataclass(frozen=True)
class WeightFunction:
    """phi(s) = amplitude * ln cosh(s), amplitude = 1/(400 D) by default."""

    D: float
    amplitude: float | None = None

    @property
    def a(self) -> float:
        return 1.0 / (WEIGHT_SLOPE * self.D) if self.amplitude is None else self.amplitude

    def phi(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        return self.a * log_cosh(s)

    def dphi(self, s) -> np.ndarray:
        return self.a * np.tanh(np.asarray(s, dtype=float))

    def d2phi(self, s) -> np.ndarray:
        return self.a / np.cosh(np.clip(np.asarray(s, dtype=float), -700.0, 700.0)) ** 2


def log_cosh(s) -> np.ndarray:
    """ln cosh(s) without overflow."""
    s = np.asarray(s, dtype=float)
    return np.logaddexp(s, -s) - LN2


# ------------------------------------------------------------
# Weight conditions
# ------------------------------------------------------------

def sufficient_inequality(j: int, Lambda1: float, C1: float) -> bool:
    """2^{j/100} > 100 j + 1000 ln(10^4 C1 Lambda1^10)."""
    rhs = 100.0 * j + 1000.0 * (math.log(1e4 * C1) + 10.0 * math.log(Lambda1))
    return (j / 100.0) * LN2 > math.log(rhs)


def smallest_sufficient_j(Lambda1: float = 1.0, C1: float = 1.0) -> int:
    """First j >= 1 satisfying the sufficient inequality."""
    for j in range(1, MAX_J_SCAN):
        if sufficient_inequality(j, Lambda1, C1):
            return j
    raise RuntimeError(f"no j below {MAX_J_SCAN} satisfies the sufficient inequality")


def weight_condition_check(j: int, Lambda1: float = 1.0, C1: float = 1.0) -> dict:
    """
    Evaluate the five weight conditions of the j-th region.

    All comparisons happen in the log domain, so j in the thousands
    (D ~ 1e5, W ~ 1e10) stays finite.

    Returns:
        dict with ``conditions`` (name -> {lhs, rhs, passed}), ``sufficient``
        and ``all_passed``.
    """
    if j < 1 or Lambda1 < 1 or C1 < 1:
        raise ValueError("weight conditions need j >= 1, Lambda1 >= 1, C1 >= 1")
    cfg = BarrierConfig(j, Lambda1, C1)
    w = WeightFunction(cfg.D)
    D = cfg.D
    conditions = {}

    def record(name, lhs, rhs, passed):
        conditions[name] = {"lhs": float(lhs), "rhs": float(rhs), "passed": bool(passed)}

    # tanh <= 1 and sech^2 <= 1 make the sups exact
    record("dphi_bound", w.a, D**-0.5 / 20.0, w.a <= D**-0.5 / 20.0)
    record("d2phi_bound", w.a, 1.0 / (400.0 * D), w.a <= 1.0 / (400.0 * D) * (1.0 + 1e-15))

    phi_W = float(w.phi(cfg.W))
    need = math.log(32.0 * C1 * D) + 4.0 * cfg.log_extent
    record("phi_at_W", phi_W, need, phi_W >= need)

    phi_200 = float(w.phi(200.0))
    record("phi_at_200", phi_200, cfg.log_extent, phi_200 <= cfg.log_extent)

    s = np.linspace(1e-6, 1e4, 2001)
    monotone = float(w.phi(0.0)) == 0.0 and bool(np.all(w.dphi(s) > 0))
    record("normalized", float(w.phi(0.0)), 0.0, monotone)

    sufficient = sufficient_inequality(j, Lambda1, C1)
    all_passed = all(c["passed"] for c in conditions.values())
    logger.info("weight conditions j=%d Lambda1=%g C1=%g: %s (sufficient=%s)",
                j, Lambda1, C1, "pass" if all_passed else "fail", sufficient)
    return {"config": cfg.to_dict(), "conditions": conditions,
            "sufficient": sufficient, "all_passed": all_passed}


# ------------------------------------------------------------
# Evolution coefficient
# ------------------------------------------------------------

@dataclass
class CoefficientSample:
    """
    Geometric data at one spacetime point.

    ``normal_speed`` is <d_t x, omega4> = <H nu, omega4>, ``tangent_sq`` is
    |omega4^T|^2 and ``grad_h`` is <omega4^T, grad H>.
    """

    H: float
    A2: float
    x4: float = 0.0
    normal_speed: float = 0.0
    tangent_sq: float = 1.0
    grad_h: float = 0.0


def coefficient_terms(H, A2, lam, c, phi1, phi2, normal_speed=0.0, tangent_sq=1.0,
                      grad_h=0.0):
    """Zeroth-order coefficient from explicit weight derivatives phi'(x4), phi''(x4)."""
    H = np.asarray(H, dtype=float)
    if np.any(H <= c):
        raise ValueError("denominator degenerate: H <= c")
    dt_phi = phi1 * normal_speed
    lap_phi = phi1 * normal_speed + phi2 * tangent_sq
    grad_sq = phi1 * phi1 * tangent_sq
    cross = phi1 * grad_h
    return lam - c * A2 / (H - c) - dt_phi + lap_phi + grad_sq + 2.0 * cross / (H - c)


def evolution_coefficient(sample: CoefficientSample, cfg: BarrierConfig,
                          weight: WeightFunction | None = None,
                          eps1: float | None = None, lam: float | None = None,
                          c: float | None = None) -> float:
    """
    Zeroth-order coefficient of the f equation.

    With ``eps1`` None the exact terms are used. Otherwise the ambient
    terms are replaced by their worst case on an eps1-perturbed Bowl x R:
    |d_t Phi|, |<grad Phi, grad H>| <= eps1 |phi'|, |A|^2 >= H^2/3.

    Raises:
        ValueError: H <= c ("denominator degenerate").
    """
    lam = cfg.lam if lam is None else lam
    c = cfg.c if c is None else c
    weight = WeightFunction(cfg.D) if weight is None else weight
    H = sample.H
    if H <= c:
        raise ValueError(f"denominator degenerate: H = {H:.6g} <= c = {c:.6g}")
    p1 = float(weight.dphi(sample.x4))
    p2 = float(weight.d2phi(sample.x4))
    if eps1 is None:
        return float(coefficient_terms(H, sample.A2, lam, c, p1, p2, sample.normal_speed,
                                       sample.tangent_sq, sample.grad_h))
    a1 = abs(p1)
    return float(lam - c * H * H / (3.0 * (H - c)) + 2.0 * eps1 * a1 + abs(p2) + p1 * p1
                 + 2.0 * eps1 * a1 / (H - c))


def coefficient_bound_chain(D: float) -> dict:
    """
    The displayed negativity chain at scale D, term by term.

    ``displayed`` uses the generic bounds |phi'| <= D^{-1/2}/20,
    |phi''| <= D^{-1}/400, eps1 < D^{-2}, 1/(H - c) < 8 D^{1/2}; ``sharp``
    replaces |phi'| by the actual sup 1/(400 D) and the offset term by its
    minimum over H > c, 4c^2/3.
    """
    displayed = (-1.0 / (96.0 * D) + 1.0 / (1000.0 * D)
                 + 0.25 * D**-2.5 * (1.0 + 8.0 * math.sqrt(D))
                 + 1.0 / (400.0 * D) + 1.0 / (400.0 * D))
    c = D**-0.5 / OFFSET_FACTOR
    p1 = 1.0 / (WEIGHT_SLOPE * D)
    eps1 = D**-2
    sharp = (1.0 / (LAMBDA_FACTOR * D) - 4.0 * c * c / 3.0 + 2.0 * eps1 * p1
             + 1.0 / (WEIGHT_SLOPE * D) + p1 * p1 + 2.0 * eps1 * p1 * 8.0 * math.sqrt(D))
    return {"D": D, "displayed": displayed, "sharp": sharp,
            "displayed_negative": displayed < 0, "sharp_negative": sharp < 0}


def displayed_chain_threshold() -> float:
    """Smallest D above which the displayed chain is negative."""
    return float(brentq(lambda d: coefficient_bound_chain(d)["displayed"], 10.0, 1e6, xtol=1e-10))


def coefficient_chain_scan(D_values, samples: int = 200, seed: int = 0,
                           kappa: float = 1.0) -> dict:
    """
    Bounded coefficient over random admissible (H, |A|^2, x4, eps1) per D.

    Admissible means D^{-1/2}/4 < H < 4 (kappa D)^{1/2},
    |A|^2 >= max(H^2/3, D^{-1}/8) and eps1 < D^{-2}.
    """
    rng = make_rng(seed, "coefficient-chain")
    rows = []
    for D in D_values:
        cfg = BarrierConfig(0, D)
        weight = WeightFunction(D)
        lo, hi = 0.25 * D**-0.5, 4.0 * math.sqrt(kappa * D)
        worst = -math.inf
        for _ in range(samples):
            H = float(np.exp(rng.uniform(math.log(lo), math.log(hi))))
            A2 = max(H * H / 3.0, 1.0 / (8.0 * D)) * (1.0 + rng.uniform(0.0, 2.0))
            x4 = float(rng.uniform(-D * D, D * D))
            eps1 = float(rng.uniform(0.0, 1.0)) * D**-2
            sample = CoefficientSample(H=H, A2=A2, x4=x4)
            value = evolution_coefficient(sample, cfg, weight, eps1=eps1)
            worst = max(worst, value)
        rows.append((float(D), worst, worst * D))
    negative = all(r[1] < 0 for r in rows)
    logger.info("coefficient chain scan over %d scales: all negative=%s", len(rows), negative)
    return {"rows": rows, "all_negative": negative}


def evolution_identity_residual(lam: float = 0.01, c: float = 0.1, amplitude: float = 0.05,
                                t: float = -1.0, h: float = 0.02, points: int = 64,
                                z_range: float = 2.0) -> float:
    """
    Finite-difference residual of the f equation on S^1_{sqrt(-2t)} x R^2.

    u = cos(theta) (1 + z/10) solves the Jacobi equation there (|A|^2 = 1/r^2,
    u_t = 0); Phi = amplitude ln cosh(z) with z the omega4 coordinate.
    Returns sup |LHS - RHS| / sup |f| over ``points`` sample nodes; the
    residual is O(h^2).
    """
    weight = WeightFunction(1.0, amplitude)

    def H_of(tt):
        return 1.0 / math.sqrt(-2.0 * tt)

    def f(theta, z, tt):
        u = np.cos(theta) * (1.0 + 0.1 * z)
        return np.exp(-weight.phi(z) + lam * (tt - t)) * u / (H_of(tt) - c)

    if H_of(t) <= c:
        raise ValueError("denominator degenerate: H <= c")
    theta = np.linspace(0.0, 2.0 * math.pi, points, endpoint=False)
    z = np.linspace(-z_range, z_range, points)
    th, zz = np.meshgrid(theta, z, indexing="ij")
    r2 = -2.0 * t
    f0 = f(th, zz, t)
    f_t = (f(th, zz, t + h) - f(th, zz, t - h)) / (2.0 * h)
    lap = ((f(th + h, zz, t) - 2.0 * f0 + f(th - h, zz, t)) / (h * h * r2)
           + (f(th, zz + h, t) - 2.0 * f0 + f(th, zz - h, t)) / (h * h))
    f_z = (f(th, zz + h, t) - f(th, zz - h, t)) / (2.0 * h)
    H = H_of(t)
    coef = coefficient_terms(H, H * H, lam, c, weight.dphi(zz), weight.d2phi(zz))
    rhs = coef * f0 + 2.0 * weight.dphi(zz) * f_z
    return float(np.max(np.abs(f_t - lap - rhs)) / np.max(np.abs(f0)))


# ------------------------------------------------------------
# Barrier region on Bowl^2 x R
# ------------------------------------------------------------

@dataclass
class BarrierDomain:
    """
    Omega_j on the translating Bowl^2 x R, in (rho, y = x4) coordinates.

    rho runs from the axis to the radius where the distance to the tip line
    reaches D/kappa; y covers |y| <= W; time covers [-1 - T, -1].
    """

    cfg: BarrierConfig
    profile: BowlProfile
    rho: np.ndarray
    y: np.ndarray
    times: np.ndarray
    coefficient: np.ndarray = field(repr=False)
    matrix: sparse.csc_matrix = field(repr=False)
    boundary_weights: dict = field(repr=False)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.rho), len(self.y)


def _operator_coefficients(profile: BowlProfile, rho: np.ndarray, c: float):
    """a, b of a f_rr + b f_r for rotation-invariant f on the translating Bowl^2."""
    p = profile.dphi_at(rho)
    q = profile.d2phi(rho)
    w2 = 1.0 + p * p
    H = 1.0 / np.sqrt(w2)
    dH = -p * q / w2**1.5
    safe = np.where(rho > 0, rho, 1.0)
    # Laplacian drift, tangential part of the translation, grad H / (H - c)
    b = np.where(rho > 0, 1.0 / (safe * w2), 0.0) - p * q / w2**2 + p / w2 + 2.0 * dH / (w2 * (H - c))
    return 1.0 / w2, b, H


def build_barrier_domain(cfg: BarrierConfig, profile: BowlProfile | None = None,
                         rho_num: int = 41, y_num: int = 41, steps: int = 64,
                         kappa: float = 1.0) -> BarrierDomain:
    """
    Grid, frozen coefficients and the backward-Euler matrix of the f equation.

    Upwinded first-order terms keep I - dt L an M-matrix, so the discrete
    solution obeys the maximum principle whenever the coefficient is negative.

    Raises:
        ValueError: H <= c or a nonnegative coefficient anywhere on the grid.
    """
    D = cfg.D
    if profile is None:
        profile = solve_bowl_profile(2, 4.0 * math.sqrt(D / kappa) + 10.0, 0.01)
    if profile.n != 2:
        raise ValueError("barrier region lives on Bowl^2 x R (n = 2 profile)")
    target = D / kappa
    if math.hypot(profile.r_max, profile.phi[-1]) < target:
        raise ValueError("profile too short for the region radius D/kappa")
    rho_max = brentq(lambda r: math.hypot(r, float(profile.phi_at(r))) - target,
                     0.0, profile.r_max)
    rho = np.linspace(0.0, rho_max, rho_num)
    y = np.linspace(-cfg.W, cfg.W, y_num)
    times = np.linspace(-1.0 - cfg.T, -1.0, steps + 1)

    a, b, H = _operator_coefficients(profile, rho, cfg.c)
    if np.any(H <= cfg.c):
        raise ValueError("denominator degenerate: H <= c inside the region")
    weight = WeightFunction(D)
    A2 = profile.second_fundamental_norm(rho)
    coef = (cfg.lam - cfg.c * A2[:, None] / (H[:, None] - cfg.c)
            + weight.d2phi(y)[None, :] + weight.dphi(y)[None, :] ** 2)
    if np.any(coef >= 0):
        raise ValueError(f"coefficient is not negative on the region: max {coef.max():.6g}")

    dt = times[1] - times[0]
    hr = rho[1] - rho[0]
    hy = y[1] - y[0]
    nr, ny = rho_num - 1, y_num - 2  # unknowns: rho < rho_max, |y| < W
    index = np.arange(nr * ny).reshape(nr, ny)
    rows, cols, vals = [], [], []
    side = np.zeros((nr, ny))      # weight of the rho = rho_max neighbour
    far = np.zeros((nr, ny, 2))    # weights of the y = -W, +W neighbours
    drift_y = 2.0 * weight.dphi(y[1:-1])

    for i in range(nr):
        for jj in range(ny):
            k = index[i, jj]
            off = {}
            if i == 0:
                off[("r", 1)] = 4.0 / hr**2
            else:
                up = max(b[i], 0.0) / hr
                down = max(-b[i], 0.0) / hr
                off[("r", 1)] = a[i] / hr**2 + up
                off[("r", -1)] = a[i] / hr**2 + down
            dy = drift_y[jj]
            off[("y", 1)] = 1.0 / hy**2 + max(dy, 0.0) / hy
            off[("y", -1)] = 1.0 / hy**2 + max(-dy, 0.0) / hy
            diag = 1.0 + dt * (sum(off.values()) - coef[i, jj + 1])
            rows.append(k)
            cols.append(k)
            vals.append(diag)
            for (axis, d), weight_kj in off.items():
                ii, yy = (i + d, jj) if axis == "r" else (i, jj + d)
                if axis == "r" and ii == nr:
                    side[i, jj] += dt * weight_kj
                elif axis == "y" and yy < 0:
                    far[i, jj, 0] += dt * weight_kj
                elif axis == "y" and yy >= ny:
                    far[i, jj, 1] += dt * weight_kj
                else:
                    rows.append(k)
                    cols.append(index[ii, yy])
                    vals.append(-dt * weight_kj)

    matrix = sparse.csc_matrix((vals, (rows, cols)), shape=(nr * ny, nr * ny))
    logger.info("barrier region D=%.4g: rho_max=%.4g, %d unknowns, max coefficient %.4g",
                D, rho_max, nr * ny, coef.max())
    return BarrierDomain(cfg, profile, rho, y, times, coef, matrix,
                         {"side": side, "far": far})


def solve_barrier_pde(domain: BarrierDomain, initial: np.ndarray, side_data: np.ndarray,
                      far_data: np.ndarray) -> np.ndarray:
    """
    Backward-Euler solve of the f equation on the region.

    Args:
        initial: (n_rho, n_y) values at t = -1 - T.
        side_data: (n_t, n_y) values on rho = rho_max.
        far_data: (n_t, n_rho, 2) values on y = -W and y = +W.

    Returns:
        (n_t, n_rho, n_y) array including boundary values.
    """
    nr_all, ny_all = domain.shape
    nt = len(domain.times)
    initial = np.asarray(initial, dtype=float)
    side_data = np.asarray(side_data, dtype=float)
    far_data = np.asarray(far_data, dtype=float)
    if initial.shape != (nr_all, ny_all) or side_data.shape != (nt, ny_all) \
            or far_data.shape != (nt, nr_all, 2):
        raise ValueError("grid mismatch: boundary arrays do not match the region grid")

    lu = splu(domain.matrix)
    side_w = domain.boundary_weights["side"]
    far_w = domain.boundary_weights["far"]
    out = np.empty((nt, nr_all, ny_all))
    out[0] = initial
    current = initial[:-1, 1:-1].copy()
    for n in range(1, nt):
        rhs = (current
               + side_w * side_data[n, 1:-1][None, :]
               + far_w[..., 0] * far_data[n, :-1, 0][:, None]
               + far_w[..., 1] * far_data[n, :-1, 1][:, None])
        current = lu.solve(rhs.ravel()).reshape(current.shape)
        slab = np.empty((nr_all, ny_all))
        slab[:-1, 1:-1] = current
        slab[-1, :] = side_data[n]
        slab[:, 0] = far_data[n, :, 0]
        slab[:, -1] = far_data[n, :, 1]
        out[n] = slab
    return out


@dataclass
class MaxPrincipleReport:
    D: float
    runs: list

    @property
    def worst_gap(self) -> float:
        return max(r["interior_sup"] - r["boundary_sup"] for r in self.runs)

    def passes(self, tol: float = 1e-8) -> bool:
        return self.worst_gap <= tol

    def to_dict(self) -> dict:
        return {"D": self.D, "runs": self.runs, "worst_gap": self.worst_gap}


def _boundary_sup(initial, side_data, far_data) -> float:
    return float(max(np.max(np.abs(initial)), np.max(np.abs(side_data[1:])),
                     np.max(np.abs(far_data[1:]))))


def maximum_principle_experiment(cfg: BarrierConfig, cases=("zero", "unit"),
                                 random_runs: int = 0, seed: int = 0,
                                 domain: BarrierDomain | None = None, **grid) -> MaxPrincipleReport:
    """
    Evolve f on the region and compare the interior sup to the boundary sup.

    Cases: ``zero`` (all data 0), ``unit`` (1 on the rho = rho_max side,
    0 elsewhere) and ``random_runs`` runs of random smooth data.
    """
    domain = build_barrier_domain(cfg, **grid) if domain is None else domain
    nr, ny = domain.shape
    nt = len(domain.times)
    rng = make_rng(seed, "barrier-maxprinciple")
    runs = []

    def run(label, initial, side, far):
        sol = solve_barrier_pde(domain, initial, side, far)
        interior = float(np.max(np.abs(sol[1:, :-1, 1:-1])))
        bsup = _boundary_sup(initial, side, far)
        runs.append({"case": label, "interior_sup": interior, "boundary_sup": bsup})
        logger.debug("max principle %s: interior %.6g boundary %.6g", label, interior, bsup)

    for case in cases:
        if case == "zero":
            run("zero", np.zeros((nr, ny)), np.zeros((nt, ny)), np.zeros((nt, nr, 2)))
        elif case == "unit":
            initial = np.zeros((nr, ny))
            initial[-1, :] = 1.0
            run("unit", initial, np.ones((nt, ny)), np.zeros((nt, nr, 2)))
        else:
            raise ValueError(f"unknown max-principle case '{case}'")

    s = domain.rho / domain.rho[-1]
    yy = domain.y / domain.y[-1]
    tau = np.linspace(0.0, 1.0, nt)
    for k in range(random_runs):
        coeffs = rng.normal(size=(4, 3))

        def smooth(x, row, coeffs=coeffs):
            return coeffs[row, 0] + coeffs[row, 1] * np.cos(math.pi * x) + coeffs[row, 2] * np.sin(2.0 * x)

        initial = np.outer(smooth(s, 0), smooth(yy, 1))
        side = np.outer(smooth(tau, 2), smooth(yy, 1))
        far = np.stack([np.outer(smooth(tau, 3), smooth(s, 0)),
                        np.outer(smooth(tau, 2), smooth(s, 0))], axis=-1)
        run(f"random-{k}", initial, side, far)

    report = MaxPrincipleReport(domain.cfg.D, runs)
    logger.info("max principle D=%.4g: %d runs, worst gap %.3g", report.D, len(runs),
                report.worst_gap)
    return report


# ------------------------------------------------------------
# Boundary bound assembly
# ------------------------------------------------------------

def boundary_bound_pieces(cfg: BarrierConfig, eps: float = 1.0) -> dict:
    """
    log2 of the three boundary pieces of sup|f| on the region.

    ``displayed`` keys carry the simplified forms that enter the combined
    max; ``sharp`` keys keep the exponential weights unsimplified.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    D, j, C1 = cfg.D, cfg.j, cfg.C1
    log2 = lambda v: math.log(v, 2.0)  # noqa: E731
    ext2 = cfg.log_extent / LN2
    base = log2(C1) + 2.0 * ext2 + log2(32.0 * D) + log2(eps)
    weight = WeightFunction(D)
    pieces = {
        "side_sharp": base - j,
        "side_displayed": log2(1000.0 * C1 * cfg.Lambda1**4) - j / 2.0 + log2(eps),
        "far_sharp": base - float(weight.phi(cfg.W)) / LN2,
        "far_displayed": -2.0 * ext2 + log2(eps),
        "initial": base - D / (1000.0 * LN2),
    }
    pieces["combined_displayed"] = max(pieces["side_displayed"], pieces["far_displayed"],
                                       pieces["initial"])
    pieces["combined_sharp"] = max(pieces["side_sharp"], pieces["far_sharp"], pieces["initial"])
    pieces["target"] = log2(C1) - j / 4.0 + log2(eps)
    return pieces


def bound_sweep(j0: int, Lambda1: float = 1.0, C1: float = 1.0, offsets=(0, 100, 200),
                eps: float = 1.0) -> dict:
    """
    Combined boundary bound over j0 + offsets.

    ``slope_*`` are fitted log2 slopes per unit j; the target form has
    slope -1/4.
    """
    js = [j0 + o for o in offsets]
    rows = []
    for j in js:
        p = boundary_bound_pieces(BarrierConfig(j, Lambda1, C1), eps)
        rows.append((j, p["combined_displayed"], p["combined_sharp"], p["target"]))
    arr = np.array(rows, dtype=float)
    slope_displayed = float(np.polyfit(arr[:, 0], arr[:, 1], 1)[0])
    slope_sharp = float(np.polyfit(arr[:, 0], arr[:, 2], 1)[0])
    return {
        "rows": rows,
        "slope_displayed": slope_displayed,
        "slope_sharp": slope_sharp,
        "monotone": bool(np.all(np.diff(arr[:, 1]) < 0) and np.all(np.diff(arr[:, 2]) < 0)),
        "sharp_below_target": bool(np.all(arr[:, 2] <= arr[:, 3])),
        "displayed_below_target": bool(np.all(arr[:, 1] <= arr[:, 3])),
    }


# ------------------------------------------------------------
# Final barrier step
# ------------------------------------------------------------

def final_barrier_coefficient(j: int, H: float) -> float:
    """
    lam_j - c_j H^2 / (3 (H - H/2)), using |A|^2 >= H^2/3 and c_j < H/2.

    Raises:
        ValueError: H <= 2 c_j.
    """
    lam_j, c_j = final_rates(j)
    if H <= 2.0 * c_j:
        raise ValueError(f"final barrier needs H > 2 c_j = {2.0 * c_j:.6g}, got {H}")
    value = lam_j - c_j * H * H / (3.0 * (H - H / 2.0))
    bound = lam_j - 4.0 / 3.0 * c_j * c_j
    if not (value <= bound + 1e-15 and bound < 0):
        raise RuntimeError(f"final barrier coefficient {value:.6g} above bound {bound:.6g}")
    return value


def final_boundary_bounds(j: int, eps1: float, C: float = 1.0) -> dict:
    """
    log2 of the two boundary pieces of the final barrier.

    Side: C 2^{-j/2} eps1 / (2 c_j^2), compared with C 2^{-j/4} eps1.
    Far: exp(-2^{j/50}) C 2^{j/50} / c_j, compared with 2^{-j}.
    """
    _, c_j = final_rates(j)
    log2 = lambda v: math.log(v, 2.0)  # noqa: E731
    side = log2(C) - j / 2.0 + log2(eps1) - 1.0 - 2.0 * log2(c_j)
    far = -(2.0 ** (j / 50.0)) / LN2 + log2(C) + j / 50.0 - log2(c_j)
    return {"side": side, "side_target": log2(C) - j / 4.0 + log2(eps1),
            "far": far, "far_target": -float(j),
            "side_ok": side <= log2(C) - j / 4.0 + log2(eps1),
            "far_ok": far <= -float(j)}


def final_barrier_function(j: int, t, u, H) -> np.ndarray:
    """exp(lam_j t) u / (H - c_j)."""
    lam_j, c_j = final_rates(j)
    H = np.asarray(H, dtype=float)
    if np.any(H <= c_j):
        raise ValueError("denominator degenerate: H <= c_j")
    return np.exp(lam_j * np.asarray(t, dtype=float)) * np.asarray(u, dtype=float) / (H - c_j)
