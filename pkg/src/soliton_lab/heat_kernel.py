# ============================================================
# soliton_lab.heat_kernel: Dirichlet heat kernel on squares by images
# ============================================================

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad, simpson

logger = logging.getLogger(__name__)

MIN_TRUNCATION = 3
MASS_TOL = 1e-6
SIDES = ("x1=+L", "x1=-L", "x2=+L", "x2=-L")


def _gauss(u, t):
    return np.exp(-(u * u) / (4.0 * t)) / math.sqrt(4.0 * math.pi * t)


@dataclass(frozen=True)
class ImageKernel:
    """
    Dirichlet heat kernel of the square [-L, L]^2.

    Product of two odd-image sums; the image pair for index k is
    G(x - y + 4kL) - G(x + y - 2L + 4kL), |k| <= truncation.
    """

    L: float
    truncation: int = 5

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError(f"L must be positive, got {self.L}")
        if self.truncation < MIN_TRUNCATION:
            raise ValueError(f"truncation must be >= {MIN_TRUNCATION}, got {self.truncation}")

    def _shifts(self) -> np.ndarray:
        return 4.0 * self.L * np.arange(-self.truncation, self.truncation + 1)

    def line(self, x, y, t) -> np.ndarray:
        """1-d Dirichlet kernel on [-L, L]."""
        _check_time(t)
        x = np.asarray(x, dtype=float)[..., None]
        y = np.asarray(y, dtype=float)[..., None]
        k = self._shifts()
        return np.sum(_gauss(x - y + k, t) - _gauss(x + y - 2.0 * self.L + k, t), axis=-1)

    def line_dy(self, x, y, t) -> np.ndarray:
        """d/dy of the 1-d kernel, term-wise."""
        _check_time(t)
        x = np.asarray(x, dtype=float)[..., None]
        y = np.asarray(y, dtype=float)[..., None]
        k = self._shifts()
        u = x - y + k
        v = x + y - 2.0 * self.L + k
        return np.sum(u / (2.0 * t) * _gauss(u, t) + v / (2.0 * t) * _gauss(v, t), axis=-1)

    def line_mass(self, x: float, t: float) -> float:
        """int |g(x, y, t)| dy over [-L, L]."""
        value, err = quad(lambda y: abs(float(self.line(x, y, t))), -self.L, self.L,
                          points=[x] if -self.L < x < self.L else None,
                          limit=200, epsabs=1e-13, epsrel=1e-12)
        if err > 1e-9:
            raise RuntimeError(f"mass quadrature did not converge: error estimate {err:.3e}")
        return value


def _check_time(t):
    if np.any(np.asarray(t) <= 0):
        raise ValueError(f"kernel needs t > 0, got {t}")


def kernel_eval(k: ImageKernel, t: float, x, y) -> np.ndarray:
    """K_t(x, y) for points (..., 2)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return k.line(x[..., 0], y[..., 0], t) * k.line(x[..., 1], y[..., 1], t)


def heat_residual(k: ImageKernel, t: float, x, y, h: float = 0.005) -> float:
    """|d_t K - Delta_x K| by fourth-order central differences."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)

    def K(tt, xx):
        return float(kernel_eval(k, tt, xx, y))

    weights = (1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0)
    offsets = (-2, -1, 0, 1, 2)
    dt = sum(w * K(t + o * h, x) for w, o in zip(weights, offsets) if w) / h
    d2 = (-1.0 / 12.0, 4.0 / 3.0, -5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0)
    lap = 0.0
    for axis in range(2):
        e = np.zeros(2)
        e[axis] = h
        lap += sum(w * K(t, x + o * e) for w, o in zip(d2, offsets)) / (h * h)
    return abs(dt - lap)


def mass_bound(k: ImageKernel, t: float, x) -> float:
    """
    int_Omega |K_t(x, y)| dy, a product of two line integrals.

    Raises:
        ValueError: t <= 0 or x outside the open square.
        RuntimeError: quadrature failure or mass above 1 + 1e-6.
    """
    _check_time(t)
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) >= k.L):
        raise ValueError("mass bound needs x in the interior of the square")
    mass = k.line_mass(float(x[0]), t) * k.line_mass(float(x[1]), t)
    if mass > 1.0 + MASS_TOL:
        raise RuntimeError(f"kernel mass {mass:.12f} exceeds 1 + {MASS_TOL:g}")
    return mass


def survival_series(L: float, x, t: float, terms: int = 400) -> float:
    """
    Survival probability of Brownian motion (generator Delta) started at x
    in [-L, L]^2, from the sine series of the 1-d problem.
    """
    x = np.asarray(x, dtype=float)
    m = np.arange(1, 2 * terms, 2)
    out = 1.0
    for xi in x:
        q = m * math.pi / (2.0 * L)
        out *= float(np.sum(4.0 / (m * math.pi) * np.sin(q * (xi + L)) * np.exp(-q * q * t)))
    return out


# ------------------------------------------------------------
# Boundary flux
# ------------------------------------------------------------

def boundary_flux(k: ImageKernel, x, s: float) -> float:
    """int over the boundary of |d_nu_y K_s(x, y)| dy."""
    x = np.asarray(x, dtype=float)
    L = k.L
    total = 0.0
    for axis in range(2):
        other = 1 - axis
        mass_other = k.line_mass(float(x[other]), s)
        for side in (L, -L):
            total += abs(float(k.line_dy(x[axis], side, s))) * mass_other
    return total


@dataclass
class FluxReport:
    L: float
    x: list
    s: np.ndarray
    flux: np.ndarray
    C_hk: float
    C_app: float
    log_slope: float
    slope_bound: float

    @property
    def decay_ok(self) -> bool:
        return bool(self.log_slope <= 0.8 * self.slope_bound)

    def rows(self) -> list[tuple[float, float, float, float]]:
        bound = _app_shape(self.L, self.s) * self.C_app
        ratio = np.divide(self.flux, bound, out=np.zeros_like(self.flux), where=bound > 0)
        return list(zip(self.s.tolist(), self.flux.tolist(), bound.tolist(), ratio.tolist()))

    def to_dict(self) -> dict:
        return {"L": self.L, "x": self.x, "C_hk": self.C_hk, "C_app": self.C_app,
                "log_slope": self.log_slope, "slope_bound": self.slope_bound,
                "decay_ok": self.decay_ok}


def _hk_shape(L, s):
    return L * L / s**2 * np.exp(-L * L / (1000.0 * s))


def _app_shape(L, s):
    return np.exp(-L * L / (50.0 * s)) / L**3


def flux_bound_experiment(k: ImageKernel, x, s_values) -> FluxReport:
    """
    Boundary flux against both decay shapes over a grid of t - tau.

    C_hk and C_app are the smallest constants making the two bounds hold on
    the grid; ``log_slope`` is the slope of log(flux) against 1/s.

    Raises:
        ValueError: x outside the central square of half-width L/25.
    """
    x = np.asarray(x, dtype=float)
    L = k.L
    if np.any(np.abs(x) > L / 25.0):
        raise ValueError(f"flux estimate assumes x in the square of half-width L/25 = {L / 25.0:.6g}")
    s = np.sort(np.asarray(s_values, dtype=float))
    flux = np.array([boundary_flux(k, x, float(si)) for si in s])

    C_hk = float(np.max(flux / _hk_shape(L, s)))
    C_app = float(np.max(flux / _app_shape(L, s)))

    positive = flux > 0
    if np.count_nonzero(positive) < 2:
        raise ValueError("flux vanished on the grid; extend the t - tau range")
    slope = float(np.polyfit(1.0 / s[positive], np.log(flux[positive]), 1)[0])
    logger.info("flux L=%g: C_hk=%.4g C_app=%.4g slope=%.4g (bound %.4g)",
                L, C_hk, C_app, slope, -L * L / 50.0)
    return FluxReport(L, x.tolist(), s, flux, C_hk, C_app, slope, -L * L / 50.0)


def flux_scaling_ratio(L: float, x, s_over_L2: float, factor: float = 2.0,
                       truncation: int = 5) -> float:
    """flux * L^2 at (c L, c x, c^2 s) over the value at (L, x, s)."""
    x = np.asarray(x, dtype=float)
    a = boundary_flux(ImageKernel(L, truncation), x, s_over_L2 * L * L) * L * L
    cL = factor * L
    b = boundary_flux(ImageKernel(cL, truncation), factor * x, s_over_L2 * cL * cL) * cL * cL
    return b / a


# ------------------------------------------------------------
# Representation formula
# ------------------------------------------------------------

@dataclass
class InitialSlice:
    time: float
    y1: np.ndarray
    y2: np.ndarray
    values: np.ndarray


@dataclass
class BoundaryHistory:
    """Dirichlet data per side, sampled at ``times`` x ``nodes`` (nodes run -L..L)."""

    times: np.ndarray
    nodes: np.ndarray
    values: dict


def _check_axis(nodes, L, what):
    nodes = np.asarray(nodes, dtype=float)
    if len(nodes) < 3 or abs(nodes[0] + L) > 1e-9 * L or abs(nodes[-1] - L) > 1e-9 * L:
        raise ValueError(f"grid mismatch: {what} must run from -L to L (L = {L})")
    if np.any(np.diff(nodes) <= 0):
        raise ValueError(f"grid mismatch: {what} must be increasing")
    return nodes


def boundary_solution_formula(k: ImageKernel, initial: InitialSlice, boundary: BoundaryHistory,
                              x, t: float) -> float:
    """
    u(x, t) = int K_{t-t0}(x, y) u0(y) dy - int int d_nu_y K_{t-tau}(x, y) u_b(y, tau) dy dtau.

    Simpson quadrature on the supplied grids.

    Raises:
        ValueError: grids that do not span the square or the time window.
    """
    L = k.L
    x = np.asarray(x, dtype=float)
    y1 = _check_axis(initial.y1, L, "initial y1 grid")
    y2 = _check_axis(initial.y2, L, "initial y2 grid")
    values = np.asarray(initial.values, dtype=float)
    if values.shape != (len(y1), len(y2)):
        raise ValueError(f"grid mismatch: initial values have shape {values.shape}, "
                         f"grid is {(len(y1), len(y2))}")
    if not t > initial.time:
        raise ValueError("target time must lie after the initial slice")

    s0 = t - initial.time
    g1 = k.line(x[0], y1, s0)
    g2 = k.line(x[1], y2, s0)
    first = float(simpson(simpson(values * g2[None, :], x=y2, axis=1) * g1, x=y1))

    taus = np.asarray(boundary.times, dtype=float)
    nodes = _check_axis(boundary.nodes, L, "boundary nodes")
    if abs(taus[0] - initial.time) > 1e-9 * (1.0 + abs(initial.time)) or taus[-1] < t - 1e-12:
        raise ValueError("grid mismatch: boundary times must start at the initial slice and reach t")
    missing = [side for side in SIDES if side not in boundary.values]
    if missing:
        raise ValueError(f"grid mismatch: boundary data missing for sides {missing}")

    keep = taus <= t + 1e-12
    taus = taus[keep]
    inner = np.zeros(len(taus))
    for i, tau in enumerate(taus):
        s = t - tau
        if s <= 0:
            continue
        total = 0.0
        for axis, sign, side in ((0, 1.0, "x1=+L"), (0, -1.0, "x1=-L"),
                                 (1, 1.0, "x2=+L"), (1, -1.0, "x2=-L")):
            data = np.asarray(boundary.values[side], dtype=float)[keep][i]
            other = 1 - axis
            # outward normal derivative on the side y_axis = sign * L
            dnu = sign * float(k.line_dy(x[axis], sign * L, s))
            total += dnu * float(simpson(k.line(x[other], nodes, s) * data, x=nodes))
        inner[i] = total
    second = float(simpson(inner, x=taus))
    return first - second
