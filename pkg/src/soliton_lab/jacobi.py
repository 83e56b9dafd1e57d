# ============================================================
# soliton_lab.jacobi: Jacobi fields on the shrinking S^1 x R^2
# ============================================================
#
# u_t = u_{z1 z1} + u_{z2 z2} + (u_{theta theta} + u) / (-2t)
#
# theta: Fourier (spectral m^2 or second-difference symbol)
# z:     Dirichlet second differences, diagonalized by DST-I
# t:     backward Euler, coefficients frozen at the step midpoint

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.fft import dstn, idstn, irfft, rfft

from .geometry import GridAxis, SurfacePatch, grid_derivatives
from .rotation import RotationField

logger = logging.getLogger(__name__)

THETA_OPERATORS = ("spectral", "fd")
DEFAULT_MAX_MODE = 16
ALIAS_FRACTION = 0.01


@dataclass
class PolarField:
    """Samples u(t, theta, z1, z2) on the cylinder; theta is periodic."""

    theta: GridAxis
    z1: GridAxis
    z2: GridAxis
    times: np.ndarray
    samples: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.samples = np.asarray(self.samples, dtype=float)
        expected = (len(self.times), self.theta.num, self.z1.num, self.z2.num)
        if self.samples.shape != expected:
            raise ValueError(f"polar field samples have shape {self.samples.shape}, expected {expected}")
        if not self.theta.periodic:
            raise ValueError("theta axis must be periodic")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("polar field samples must be finite")

    def at_times(self, times) -> "PolarField":
        index = [int(np.argmin(np.abs(self.times - t))) for t in times]
        return PolarField(self.theta, self.z1, self.z2, self.times[index], self.samples[index])

    def grids(self):
        return np.meshgrid(self.theta.nodes(), self.z1.nodes(), self.z2.nodes(), indexing="ij")


# ------------------------------------------------------------
# Time grids
# ------------------------------------------------------------

def graded_times(t0: float, t1: float, rel: float = 0.01, max_step: float = 0.01) -> np.ndarray:
    """Steps dt = min(max_step, rel |t|) from t0 up to t1."""
    if not t0 < t1 < 0:
        raise ValueError(f"need t0 < t1 < 0, got t0={t0}, t1={t1}")
    out = [t0]
    t = t0
    while t < t1:
        t = min(t + min(max_step, rel * abs(t)), t1)
        if t1 - t < 1e-12 * abs(t1):
            t = t1
        out.append(t)
    return np.asarray(out)


def refine_times(times) -> np.ndarray:
    """Insert the midpoint of every step."""
    times = np.asarray(times, dtype=float)
    mid = 0.5 * (times[1:] + times[:-1])
    out = np.empty(2 * len(times) - 1)
    out[0::2] = times
    out[1::2] = mid
    return out


# ------------------------------------------------------------
# Evolution
# ------------------------------------------------------------

def theta_symbol(N: int, operator: str = "spectral") -> np.ndarray:
    """-d^2/dtheta^2 on rfft modes 0..N/2."""
    if operator not in THETA_OPERATORS:
        raise ValueError(f"theta operator must be one of {', '.join(THETA_OPERATORS)}, got '{operator}'")
    m = np.arange(N // 2 + 1, dtype=float)
    if operator == "spectral":
        return m * m
    h = 2.0 * math.pi / N
    return 4.0 / (h * h) * np.sin(0.5 * m * h) ** 2


def _dirichlet_symbol(axis: GridAxis) -> np.ndarray:
    M = axis.num - 2
    k = np.arange(1, M + 1)
    return -4.0 / axis.step**2 * np.sin(0.5 * math.pi * k / (M + 1)) ** 2


def _boundary_lift(g: np.ndarray, z1: GridAxis, z2: GridAxis) -> np.ndarray:
    """Contribution of Dirichlet values to the interior Laplacian."""
    b = np.zeros((g.shape[0], z1.num - 2, z2.num - 2))
    b[:, 0, :] += g[:, 0, 1:-1] / z1.step**2
    b[:, -1, :] += g[:, -1, 1:-1] / z1.step**2
    b[:, :, 0] += g[:, 1:-1, 0] / z2.step**2
    b[:, :, -1] += g[:, 1:-1, -1] / z2.step**2
    return b


def _solve_step(rhs: np.ndarray, denom: np.ndarray, N: int) -> np.ndarray:
    R = rfft(rhs, axis=0)
    out = []
    for part in (R.real, R.imag):
        coeff = dstn(part, type=1, axes=(1, 2)) / denom
        out.append(idstn(coeff, type=1, axes=(1, 2)))
    return irfft(out[0] + 1j * out[1], n=N, axis=0)


def evolve_cylinder_heat(u0, z1: GridAxis, z2: GridAxis, times, boundary=None,
                         theta_operator: str = "spectral", potential: bool = True,
                         store_after: float | None = None) -> PolarField:
    """
    Backward Euler solve of the cylinder Jacobi equation on Omega_l x [t0, t1].

    ``u0`` has shape (N_theta, n1, n2); ``boundary(t)`` returns an array of the
    same shape whose face values are the Dirichlet data at time t (None means
    zero data). ``potential=False`` drops the u/(-2t) term; ``store_after``
    keeps only slices at or after that time.

    Raises:
        ValueError: invalid grids or times.
        RuntimeError: a step whose implicit operator is not positive, or
            growth beyond the potential term's bound.
    """
    u0 = np.asarray(u0, dtype=float)
    times = np.asarray(times, dtype=float)
    if u0.ndim != 3 or u0.shape[1:] != (z1.num, z2.num):
        raise ValueError(f"initial slice has shape {u0.shape}, grid needs (N, {z1.num}, {z2.num})")
    N = u0.shape[0]
    if N < 4:
        raise ValueError("need at least 4 theta samples")
    if len(times) < 2 or np.any(np.diff(times) <= 0) or times[-1] >= 0:
        raise ValueError("times must increase and stay negative")

    theta = GridAxis.angle(N)
    mu = theta_symbol(N, theta_operator)
    lam = _dirichlet_symbol(z1)[:, None] + _dirichlet_symbol(z2)[None, :]
    shift = 1.0 if potential else 0.0

    def data(t):
        if boundary is None:
            return np.zeros_like(u0)
        g = np.asarray(boundary(t), dtype=float)
        if g.shape != u0.shape:
            raise ValueError(f"boundary data has shape {g.shape}, expected {u0.shape}")
        return g

    stored = np.ones(len(times), dtype=bool) if store_after is None else times >= store_after - 1e-12
    slot = np.cumsum(stored) - 1
    out = np.empty((int(stored.sum()),) + u0.shape)
    u = u0.copy()
    g0 = data(times[0])
    u[:, 0, :], u[:, -1, :], u[:, :, 0], u[:, :, -1] = g0[:, 0, :], g0[:, -1, :], g0[:, :, 0], g0[:, :, -1]
    if stored[0]:
        out[0] = u

    for n in range(len(times) - 1):
        dt = times[n + 1] - times[n]
        a = 1.0 / (-2.0 * (times[n] + 0.5 * dt))
        denom = 1.0 - dt * (lam[None, :, :] + a * (shift - mu)[:, None, None])
        if float(denom.min()) <= 1e-12:
            raise RuntimeError(f"instability detected: step {dt:.4g} at t={times[n]:.6g} "
                               "is too large for the potential term")
        g = data(times[n + 1])
        rhs = u[:, 1:-1, 1:-1] + dt * _boundary_lift(g, z1, z2)
        new = g.copy()
        new[:, 1:-1, 1:-1] = _solve_step(rhs, denom, N)

        bound = max(float(np.max(np.abs(u))), float(np.max(np.abs(g)))) / max(1.0 - dt * a * shift, 1e-12)
        if float(np.max(np.abs(new))) > 2.0 * bound + 1e-12:
            raise RuntimeError(f"instability detected at t={times[n + 1]:.6g}: "
                               f"sup |u| = {np.max(np.abs(new)):.4g} exceeds growth bound {bound:.4g}")
        u = new
        if stored[n + 1]:
            out[slot[n + 1]] = u

    logger.info("cylinder heat: %d steps on %dx%dx%d grid (%s theta)", len(times) - 1,
                N, z1.num, z2.num, theta_operator)
    return PolarField(theta, z1, z2, times[stored], out)


def richardson_extrapolate(fields: list, order: int = 1) -> PolarField:
    """
    Extrapolate solutions on nested time grids (each a midpoint refinement
    of the previous) to the coarse grid, assuming error ~ sum c_k dt^(order+k).
    """
    if len(fields) < 2:
        raise ValueError("Richardson extrapolation needs at least two levels")
    coarse = fields[0]
    table = []
    for level, f in enumerate(fields):
        stride = 2**level
        sub = f.samples[::stride]
        if len(sub) != len(coarse.times) or not np.allclose(f.times[::stride], coarse.times):
            raise ValueError("Richardson levels must be nested midpoint refinements")
        table.append(sub)
    for j in range(1, len(table)):
        factor = 2.0 ** (order + j - 1)
        table = [(factor * table[i] - table[i - 1]) / (factor - 1.0) for i in range(1, len(table))]
    return PolarField(coarse.theta, coarse.z1, coarse.z2, coarse.times, table[-1])


def mode_law(m: int, t, t0: float) -> np.ndarray:
    """u_m(t)/u_m(t0) for a pure mode without z-dependence."""
    return (np.asarray(t, dtype=float) / t0) ** ((m * m - 1) / 2.0)


# ------------------------------------------------------------
# Modes
# ------------------------------------------------------------

@dataclass
class ModeSpectrum:
    """cos/sin coefficients (1/pi) int u cos(m theta), indexed [m, ...]."""

    cos: np.ndarray
    sin: np.ndarray
    N: int
    aliasing: bool = False

    @property
    def max_mode(self) -> int:
        return self.cos.shape[0] - 1

    def resynthesize(self, N: int | None = None) -> np.ndarray:
        N = self.N if N is None else N
        theta = GridAxis.angle(N).nodes()
        m = np.arange(self.max_mode + 1)
        shape = (N,) + (1,) * (self.cos.ndim - 1)
        out = np.zeros((N,) + self.cos.shape[1:])
        out += 0.5 * self.cos[0]
        for k in m[1:]:
            out += np.cos(k * theta).reshape(shape) * self.cos[k] + np.sin(k * theta).reshape(shape) * self.sin[k]
        return out

    def mean_square(self) -> np.ndarray:
        """(1/2pi) int u^2 from the coefficients."""
        return 0.25 * self.cos[0] ** 2 + 0.5 * np.sum(self.cos[1:] ** 2 + self.sin[1:] ** 2, axis=0)


def mode_decompose(samples, max_mode: int = DEFAULT_MAX_MODE, axis: int = 0) -> ModeSpectrum:
    """
    Trapezoidal Fourier coefficients along the theta axis.

    Raises:
        ValueError: fewer than 4 * max_mode theta samples.
    """
    u = np.moveaxis(np.asarray(samples, dtype=float), axis, 0)
    N = u.shape[0]
    if N < 4 * max_mode:
        raise ValueError(f"need at least {4 * max_mode} theta samples for max mode {max_mode}, got {N}")
    F = rfft(u, axis=0)
    cos = 2.0 / N * F.real[: max_mode + 1]
    sin = -2.0 / N * F.imag[: max_mode + 1]

    energy = np.abs(F) ** 2
    cut = int(math.ceil(0.75 * (N // 2 + 1)))
    total = float(energy.sum())
    top = float(energy[cut:].sum())
    aliasing = total > 0 and top > ALIAS_FRACTION * total
    if aliasing:
        logger.warning("mode decomposition: %.2f%% of the energy sits in the top quartile of modes",
                       100.0 * top / total)
    return ModeSpectrum(cos, sin, N, aliasing)


def field_spectrum(field: PolarField, max_mode: int | None = None) -> ModeSpectrum:
    """Spectrum of every slice; coefficient arrays are indexed [m, t, z1, z2]."""
    M = field.theta.num // 4 if max_mode is None else max_mode
    return mode_decompose(field.samples, M, axis=1)


def rescaled_mode_heat_residual(field: PolarField, m: int, exponent_shift: float = 0.0) -> float:
    """
    sup |(d_t - Delta_z) u^_m| with u^_m = u~_m (-t)^((1 - m^2)/2 + shift),
    on interior z nodes and interior times.
    """
    if m < 0:
        raise ValueError("mode index must be >= 0")
    spec = field_spectrum(field, max(m, 1))
    t = field.times
    weight = (-t) ** ((1 - m * m) / 2.0 + exponent_shift)
    worst = 0.0
    for coeff in (spec.cos[m], spec.sin[m]):
        hat = coeff * weight[:, None, None]
        dt = np.gradient(hat, t, axis=0)
        lap = np.zeros_like(hat)
        lap[:, 1:-1, :] += (hat[:, 2:, :] - 2 * hat[:, 1:-1, :] + hat[:, :-2, :]) / field.z1.step**2
        lap[:, :, 1:-1] += (hat[:, :, 2:] - 2 * hat[:, :, 1:-1] + hat[:, :, :-2]) / field.z2.step**2
        res = (dt - lap)[1:-1, 1:-1, 1:-1]
        worst = max(worst, float(np.max(np.abs(res))) if res.size else 0.0)
    return worst


def mode_history_rows(field: PolarField, max_mode: int | None = None) -> list[tuple]:
    """(t, m, sup_z |u~_m|, sup_z |v~_m|) rows."""
    spec = field_spectrum(field, max_mode)
    rows = []
    for i, t in enumerate(field.times):
        for m in range(spec.max_mode + 1):
            rows.append((float(t), m, float(np.max(np.abs(spec.cos[m, i]))),
                         float(np.max(np.abs(spec.sin[m, i])))))
    return rows


def weighted_max_principle(u0, z1: GridAxis, z2: GridAxis, times, boundary=None) -> dict:
    """
    Maximum principle for w = (-t)^(1/2) u, which solves the equation without
    the potential term; second-difference theta operator.

    Returns interior sup, parabolic-boundary sup and their gap.
    """
    times = np.asarray(times, dtype=float)
    w0 = np.sqrt(-times[0]) * np.asarray(u0, dtype=float)
    wb = None
    if boundary is not None:
        def wb(t):
            return math.sqrt(-t) * np.asarray(boundary(t), dtype=float)
    field = evolve_cylinder_heat(w0, z1, z2, times, wb, theta_operator="fd", potential=False)
    s = field.samples
    inner = float(np.max(np.abs(s[1:, :, 1:-1, 1:-1])))
    faces = [np.abs(s[0]).max(), np.abs(s[:, :, 0, :]).max(), np.abs(s[:, :, -1, :]).max(),
             np.abs(s[:, :, :, 0]).max(), np.abs(s[:, :, :, -1]).max()]
    edge = float(max(faces))
    return {"interior_sup": inner, "boundary_sup": edge, "gap": inner - edge}


# ------------------------------------------------------------
# Mode-zero identity
# ------------------------------------------------------------

def mode_zero_identity(patch: SurfacePatch, K: RotationField | None = None,
                       weighted: bool = True) -> float:
    """
    sup over z of |int u W dtheta|, u = <K, nu>, W = sqrt(1 + r^-2 r_theta^2 + |r_z|^2).

    For the axis rotation the weighted integrand is -r_theta, so the
    integral vanishes for every polar graph. ``weighted=False`` returns the
    plain int u dtheta.
    """
    if patch.kind != "polar":
        raise ValueError("mode-zero identity needs a polar patch")
    K = RotationField(patch.frame, patch.offset) if K is None else K
    cf = patch.curvature
    r = patch.samples
    first, _ = grid_derivatives(r, patch.axes)
    W = np.sqrt(1.0 + (first[0] / r) ** 2 + sum(d**2 for d in first[1:]))
    u = np.einsum("...a,...a->...", K.evaluate(cf.positions), cf.normals) / patch.scale
    integrand = u * W if weighted else u
    h = patch.axes[0].step
    integral = np.sum(integrand, axis=0) * h
    z_interior = cf.interior[0]
    return float(np.max(np.abs(integral[z_interior])))


# ------------------------------------------------------------
# Neck improvement
# ------------------------------------------------------------

@dataclass
class ImprovementResult:
    L0: float
    eps: float
    eps_prime: float
    coefficients: np.ndarray

    @property
    def factor(self) -> float:
        if self.eps_prime == 0.0:
            return 0.0
        return self.eps_prime / self.eps if self.eps > 0 else math.inf

    def to_dict(self) -> dict:
        return {"L0": self.L0, "eps": self.eps, "eps_prime": self.eps_prime,
                "factor": self.factor, "coefficients": self.coefficients.tolist()}


def linear_mode_fit(field: PolarField, region: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Least-squares (A0 + A1 z1 + A2 z2) cos + (B0 + B1 z1 + B2 z2) sin over a
    boolean region of the (t, theta, z1, z2) grid.

    Raises:
        RuntimeError: rank-deficient design (region too small).
    """
    _, TH, Z1, Z2 = np.meshgrid(field.times, field.theta.nodes(), field.z1.nodes(),
                                field.z2.nodes(), indexing="ij")
    basis = []
    for trig in (np.cos(TH), np.sin(TH)):
        basis += [trig, trig * Z1, trig * Z2]
    X = np.stack([b[region] for b in basis], axis=1)
    y = field.samples[region]
    coef, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < 6:
        raise RuntimeError(f"linear-mode fit failed: design rank {rank} < 6")
    fitted = np.zeros_like(field.samples)
    for c, b in zip(coef, basis):
        fitted += c * b
    return coef, fitted


def improvement_experiment(L0: float, eps: float, m2: bool = True, linear: bool = False,
                           theta_num: int = 16, z_num: int = 33, rel: float = 0.02,
                           central: float = 2.0, window: tuple = (-4.0, -1.0)) -> ImprovementResult:
    """
    Perturbed shrinking cylinder on Omega_{L0/4} x [-(L0/4)^2, -1]: a Jacobi
    field with m = 2 data of normalized size eps on the parabolic boundary
    (and optionally the neutral field a z1 cos(theta)). After removing the
    best linear m = 1 field, eps' = sup |residual| H on the central region.
    """
    if not 10.0 <= L0 <= 200.0:
        raise ValueError(f"L0 must lie in [10, 200], got {L0}")
    if not 0.0 <= eps <= 1e-2:
        raise ValueError(f"eps must lie in [0, 0.01], got {eps}")
    l = L0 / 4.0
    t0 = -l * l
    z = GridAxis(-l, l, z_num)
    theta = GridAxis.angle(theta_num)
    TH, Z1, Z2 = np.meshgrid(theta.nodes(), z.nodes(), z.nodes(), indexing="ij")
    a = eps * math.sqrt(2.0) / l

    def exact(t):
        u = np.zeros_like(TH)
        if m2:
            u += eps * math.sqrt(-2.0 * t) * np.cos(2 * TH)
        if linear:
            u += a * Z1 * np.cos(TH)
        return u

    times = graded_times(t0, -1.0, rel=rel, max_step=max(1.0, 0.05 * l))
    field = evolve_cylinder_heat(exact(t0), z, z, times, boundary=exact, store_after=window[0])

    T = field.times[:, None, None, None]
    region = ((T >= window[0] - 1e-12) & (T <= window[1] + 1e-12)
              & (np.abs(Z1)[None] <= central + 1e-12) & (np.abs(Z2)[None] <= central + 1e-12))
    region = np.broadcast_to(region, field.samples.shape)
    coef, fitted = linear_mode_fit(field, region)
    H = 1.0 / np.sqrt(-2.0 * T)
    res = np.abs(field.samples - fitted) * H
    eps_prime = float(np.max(res[region]))
    logger.info("improvement L0=%g: eps'=%.4g (factor %.4g)", L0, eps_prime,
                eps_prime / eps if eps else 0.0)
    return ImprovementResult(float(L0), float(eps), eps_prime, coef)
