# ============================================================
# soliton_lab.solitons: Bowl profiles, cylinders and translator tools
# ============================================================

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .geometry import (
    ClippedPatch,
    GridAxis,
    SurfaceFlow,
    SurfacePatch,
)

logger = logging.getLogger(__name__)

MAX_PROFILE_RADIUS = 1e4
SERIES_STEPS = 10
# RK4 is stable for h * |lambda| below ~2.78 on the negative real axis
RK4_STABILITY_MARGIN = 2.5

OMEGA3 = np.array([0.0, 0.0, 1.0, 0.0])
OMEGA4 = np.array([0.0, 0.0, 0.0, 1.0])


# ------------------------------------------------------------
# Bowl soliton profile
# ------------------------------------------------------------

@dataclass
class BowlProfile:
    """
    Profile x_{n+1} = phi(|x|) of the n-dimensional Bowl soliton, normalized
    to translate with unit speed (tip curvature 1).
    """

    n: int
    r_max: float
    step: float
    r: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray

    def d2phi(self, r=None) -> np.ndarray:
        r = self.r if r is None else np.asarray(r, dtype=float)
        v = self.dphi_at(r)
        safe = np.where(r > 0, r, 1.0)
        out = (1.0 + v**2) * (1.0 - (self.n - 1) * v / safe)
        return np.where(r > 0, out, 1.0 / self.n)

    def _spline(self) -> CubicHermiteSpline:
        if not hasattr(self, "_phi_spline"):
            self._phi_spline = CubicHermiteSpline(self.r, self.phi, self.dphi)
            self._dphi_spline = CubicHermiteSpline(self.r, self.dphi, self.d2phi())
        return self._phi_spline

    def phi_at(self, r) -> np.ndarray:
        r = np.abs(np.asarray(r, dtype=float))
        self._check_range(r)
        return self._spline()(r)

    def dphi_at(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if r is self.r or (r.shape == self.r.shape and np.array_equal(r, self.r)):
            return self.dphi
        self._check_range(np.abs(r))
        self._spline()
        return np.sign(r) * self._dphi_spline(np.abs(r))

    def radius_at_height(self, height) -> np.ndarray:
        """Inverse profile: rho with phi(rho) = height."""
        height = np.asarray(height, dtype=float)
        if np.any(height < 0) or np.any(height > self.phi[-1]):
            raise ValueError(f"height outside the solved profile range [0, {self.phi[-1]:.6g}]")
        if not hasattr(self, "_inverse"):
            # dr/dphi = 1/phi'; skip the tip where phi' = 0
            self._inverse = CubicHermiteSpline(self.phi[1:], self.r[1:], 1.0 / self.dphi[1:])
        inner = height < self.phi[1]
        out = np.where(inner, np.sqrt(2.0 * self.n * np.maximum(height, 0.0)), 0.0)
        return np.where(inner, out, self._inverse(np.maximum(height, self.phi[1])))

    def mean_curvature(self, r=None) -> np.ndarray:
        """H = 1/sqrt(1 + phi'^2), the translator identity H = <e_{n+1}, nu>."""
        v = self.dphi if r is None else self.dphi_at(r)
        return 1.0 / np.sqrt(1.0 + v**2)

    def second_fundamental_norm(self, r=None) -> np.ndarray:
        """|A|^2 = k_radial^2 + (n-1) k_sphere^2 along the profile."""
        r = self.r if r is None else np.abs(np.asarray(r, dtype=float))
        v = self.dphi_at(r)
        w = np.sqrt(1.0 + v**2)
        k_rad = self.d2phi(r) / w**3
        safe = np.where(r > 0, r, 1.0)
        k_sph = np.where(r > 0, v / (safe * w), 1.0 / self.n)
        return k_rad**2 + (self.n - 1) * k_sph**2

    def _check_range(self, r):
        if np.any(r > self.r_max * (1.0 + 1e-12)):
            raise ValueError(f"radius beyond solved profile range r_max={self.r_max}")

    def rows(self) -> list[tuple[float, float]]:
        return list(zip(self.r.tolist(), self.phi.tolist()))


def _series(n: int, r: float) -> tuple[float, float]:
    phi = r**2 / (2 * n) + r**4 / (4 * n**3 * (n + 2))
    dphi = r / n + r**3 / (n**3 * (n + 2))
    return phi, dphi


def _rhs(n: int, r: float, v: float) -> float:
    return (1.0 + v * v) * (1.0 - (n - 1) * v / r)


def solve_bowl_profile(n: int, r_max: float, step: float) -> BowlProfile:
    """
    Solve phi''/(1+phi'^2) + (n-1) phi'/r = 1 with phi(0) = phi'(0) = 0.

    Series start on [0, 10*step], classical RK4 afterwards. The bounds
    phi' >= r/n and phi >= r^2/(2n) are checked at every node.

    Raises:
        ValueError: invalid parameters, a step too coarse for stability,
            or a bound violated by the computed profile.
    """
    if int(n) != n or n < 2:
        raise ValueError(f"n must be an integer >= 2, got {n}")
    n = int(n)
    if not 0 < r_max <= MAX_PROFILE_RADIUS:
        raise ValueError(f"r_max must lie in (0, {MAX_PROFILE_RADIUS:g}], got {r_max}")
    if not 0 < step <= r_max / SERIES_STEPS:
        raise ValueError(f"step must lie in (0, r_max/{SERIES_STEPS}], got {step}")

    n_steps = int(math.ceil(r_max / step - 1e-9))
    h = r_max / n_steps
    # stiffness of v' near the asymptotic branch v ~ r/(n-1)
    stiffness = h * (1.0 + r_max**2 / (n - 1) ** 2) * (n - 1) / r_max
    if stiffness >= RK4_STABILITY_MARGIN:
        raise ValueError(
            f"step too coarse to maintain the profile bounds: h*|lambda| = {stiffness:.3g} "
            f">= {RK4_STABILITY_MARGIN} (reduce step below "
            f"{RK4_STABILITY_MARGIN * h / stiffness:.3g})"
        )

    r = np.linspace(0.0, r_max, n_steps + 1)
    phi = np.empty(n_steps + 1)
    dphi = np.empty(n_steps + 1)

    start = min(SERIES_STEPS, n_steps)
    for k in range(start + 1):
        phi[k], dphi[k] = _series(n, float(r[k]))

    y0, v0 = float(phi[start]), float(dphi[start])
    for k in range(start, n_steps):
        rk = float(r[k])
        k1y, k1v = v0, _rhs(n, rk, v0)
        k2y, k2v = v0 + 0.5 * h * k1v, _rhs(n, rk + 0.5 * h, v0 + 0.5 * h * k1v)
        k3y, k3v = v0 + 0.5 * h * k2v, _rhs(n, rk + 0.5 * h, v0 + 0.5 * h * k2v)
        k4y, k4v = v0 + h * k3v, _rhs(n, rk + h, v0 + h * k3v)
        y0 += h * (k1y + 2.0 * k2y + 2.0 * k3y + k4y) / 6.0
        v0 += h * (k1v + 2.0 * k2v + 2.0 * k3v + k4v) / 6.0
        phi[k + 1], dphi[k + 1] = y0, v0

    if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(dphi))):
        raise ValueError("profile integration produced non-finite values; reduce step")

    tol = 1e-12 * (1.0 + r)
    slack_dphi = dphi - r / n
    slack_phi = phi - r**2 / (2 * n)
    if np.any(slack_dphi < -tol) or np.any(slack_phi < -tol * r):
        raise ValueError(
            "step too coarse to maintain the profile bounds: "
            f"min(phi' - r/n) = {slack_dphi.min():.3e}, "
            f"min(phi - r^2/2n) = {slack_phi.min():.3e}"
        )

    logger.info("bowl profile n=%d solved on [0, %g] with %d RK4 steps", n, r_max, n_steps - start)
    return BowlProfile(n=n, r_max=float(r_max), step=h, r=r, phi=phi, dphi=dphi)


# ------------------------------------------------------------
# Tip ratio table
# ------------------------------------------------------------

@dataclass
class TipRatioTable:
    """kappa/H = f(H d) along the profile, with |A|^2 d for reference."""

    s: np.ndarray
    f: np.ndarray
    A2_d: np.ndarray

    def tail_ratios(self) -> tuple[float, float]:
        return float(self.f[-2] / self.s[-2]), float(self.f[-1] / self.s[-1])

    def rows(self) -> list[tuple[float, float, float]]:
        return list(zip(self.s.tolist(), self.f.tolist(), self.A2_d.tolist()))


def tabulate_tip_ratio(profile: BowlProfile, kappa: float = 1.0) -> TipRatioTable:
    """
    Tabulate f with kappa/H(p) = f(H(p) d(p)), d the distance from p to the
    tip line in the profile plane.

    Raises:
        ValueError: if the table is not strictly increasing.
    """
    H = profile.mean_curvature()
    d = np.hypot(profile.r, profile.phi)
    s = H * d
    f = kappa / H
    if np.any(np.diff(s) <= 0) or np.any(np.diff(f) <= 0):
        bad = int(np.argmin(np.minimum(np.diff(s), np.diff(f))))
        raise ValueError(f"non-monotone tip ratio table near r = {profile.r[bad]:.6g}")
    A2_d = profile.second_fundamental_norm() * d
    return TipRatioTable(s=s, f=f, A2_d=A2_d)


# ------------------------------------------------------------
# Model surfaces and flows
# ------------------------------------------------------------

@dataclass
class CylinderModel:
    """
    Shrinking S^k_{sqrt(-2kt)} x R^{3-k} in R^4.

    The first k+1 columns of ``rotation`` span the sphere factor; ``radius``
    overrides the shrinking law when given (static fits).
    """

    k: int
    rotation: np.ndarray
    center_offset: np.ndarray
    radius: float | None = None

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=float)
        self.center_offset = np.asarray(self.center_offset, dtype=float)
        if not 1 <= self.k <= 3:
            raise ValueError(f"sphere dimension k must be 1, 2 or 3, got {self.k}")
        if self.rotation.shape != (4, 4) or not np.allclose(
                self.rotation.T @ self.rotation, np.eye(4), atol=1e-12):
            raise ValueError("rotation must be an orthogonal 4x4 matrix (to 1e-12)")

    def radius_at(self, t: float = -1.0) -> float:
        if self.radius is not None:
            return float(self.radius)
        if t >= 0:
            raise ValueError("shrinking cylinders exist only for t < 0")
        return math.sqrt(-2.0 * self.k * t)

    def axis_distance(self, x) -> np.ndarray:
        """Distance from points to the flat factor through the center."""
        y = (np.asarray(x, dtype=float) - self.center_offset) @ self.rotation
        return np.linalg.norm(y[..., : self.k + 1], axis=-1)

    def distance(self, x, t: float = -1.0) -> np.ndarray:
        """Signed distance (positive outside)."""
        return self.axis_distance(x) - self.radius_at(t)

    def as_polar_patch(self, theta_num: int, z1: GridAxis, z2: GridAxis,
                       t: float = -1.0) -> SurfacePatch:
        if self.k != 1:
            raise ValueError("only S^1 x R^2 cylinders are polar graphs")
        axes = (GridAxis.angle(theta_num), z1, z2)
        samples = np.full(tuple(ax.num for ax in axes), self.radius_at(t))
        return SurfacePatch("polar", axes, samples, frame=self.rotation, offset=self.center_offset)


def shrinking_cylinder_flow(times, theta_num: int, z1: GridAxis, z2: GridAxis,
                            rotation=None, offset=None) -> SurfaceFlow:
    """Exact S^1_{sqrt(-2t)} x R^2 flow as polar patches on a time grid."""
    model = CylinderModel(1, np.eye(4) if rotation is None else rotation,
                          np.zeros(4) if offset is None else offset)
    patches = [model.as_polar_patch(theta_num, z1, z2, t=float(t)) for t in times]
    return SurfaceFlow(np.asarray(times, dtype=float), patches)


def translating_flow(patch: SurfacePatch, omega, times) -> SurfaceFlow:
    """M_t = M + t omega."""
    omega = np.asarray(omega, dtype=float)
    patches = [patch.moved(translation=float(t) * omega) for t in times]
    return SurfaceFlow(np.asarray(times, dtype=float), patches)


# graph coordinates (u1, u2, u3, w) -> ambient (x1, x2, x4, x3)
_GRAPH_TO_X3 = np.array([
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
    [0.0, 0.0, 1.0, 0.0],
])


def bowl_times_line_graph(profile: BowlProfile, half_width: float, num: int,
                          line_half_width: float | None = None,
                          line_num: int | None = None) -> SurfacePatch:
    """Bowl^2 x R as a graph x3 = phi(|(x1, x2)|) over (x1, x2, x4); tip at the origin."""
    if profile.n != 2:
        raise ValueError("Bowl^2 x R needs the n = 2 profile")
    lw = half_width if line_half_width is None else line_half_width
    ln = num if line_num is None else line_num
    axes = (GridAxis(-half_width, half_width, num),
            GridAxis(-half_width, half_width, num),
            GridAxis(-lw, lw, ln))
    u1, u2, _ = np.meshgrid(*[ax.nodes() for ax in axes], indexing="ij")
    samples = profile.phi_at(np.hypot(u1, u2))
    return SurfacePatch("graph", axes, samples, frame=_GRAPH_TO_X3)


def bowl_times_line_revolution(profile: BowlProfile, rho: GridAxis, theta_num: int,
                               line: GridAxis) -> SurfacePatch:
    """Bowl^2 x R as profile-of-revolution x line: x3 rotation/translation axis, x4 split."""
    if profile.n != 2:
        raise ValueError("Bowl^2 x R needs the n = 2 profile")
    axes = (rho, GridAxis.angle(theta_num), line)
    samples = np.broadcast_to(profile.phi_at(rho.nodes())[:, None, None],
                              tuple(ax.num for ax in axes)).copy()
    return SurfacePatch("revolution", axes, samples)


def bowl_meridian_patch(profile: BowlProfile, rho_max: float, num: int) -> SurfacePatch:
    """
    Meridian section x_{n+1} = phi(|x_1|) of the n-dimensional Bowl as a curve
    in the (x_1, x_{n+1}) plane. By rotational symmetry every distance to an
    axis-aligned cylinder is determined by this section.
    """
    axes = (GridAxis(-rho_max, rho_max, num),)
    samples = profile.phi_at(axes[0].nodes())
    return SurfacePatch("graph", axes, samples)


def grim_reaper_patch(half_width: float, num: int) -> SurfacePatch:
    """The curve y = -log cos x, the translator of the plane in direction e2."""
    if not 0 < half_width < math.pi / 2:
        raise ValueError("grim reaper needs 0 < half_width < pi/2")
    axis = GridAxis(-half_width, half_width, num)
    return SurfacePatch("graph", (axis,), -np.log(np.cos(axis.nodes())))


# ------------------------------------------------------------
# Height function and blow-downs
# ------------------------------------------------------------

@dataclass
class HeightField:
    direction: np.ndarray
    times: np.ndarray
    samples: list


def height_field(flow: SurfaceFlow, omega) -> HeightField:
    """h(x, t) = <x, omega> - t on every slice."""
    omega = np.asarray(omega, dtype=float)
    values = [p.positions() @ omega - t for p, t in zip(flow.patches, flow.times)]
    return HeightField(direction=omega, times=flow.times.copy(), samples=values)


@dataclass
class HeightReport:
    max_dhdt: float
    translator_defect: float
    equality_nodes: int
    matched: bool

    def to_dict(self) -> dict:
        return {"max_dhdt": self.max_dhdt, "translator_defect": self.translator_defect,
                "equality_nodes": self.equality_nodes, "matched": self.matched}


def height_evolution_check(flow: SurfaceFlow, omega, tol: float = 1e-8) -> HeightReport:
    """
    Derivative of h along normal trajectories of the sampled flow.

    The normal speed V is measured from consecutive slices (parameter-wise
    displacement projected on the normal); then dh/dt = V <nu, omega> - 1.
    ``translator_defect`` is sup |V - <nu, omega>|, zero exactly when the
    flow translates with velocity omega.
    """
    omega = np.asarray(omega, dtype=float)
    if len(flow.times) < 2:
        raise ValueError("height evolution needs at least two time slices")

    max_dhdt = -np.inf
    defect = 0.0
    equality = 0
    for k in range(len(flow.times) - 1):
        a, b = flow.patches[k], flow.patches[k + 1]
        dt = flow.times[k + 1] - flow.times[k]
        cf = a.curvature
        region = cf.interior
        nu = cf.normals[region]
        V = np.einsum("ma,ma->m", (b.positions() - a.positions())[region], nu) / dt
        proj = nu @ omega
        dhdt = V * proj - 1.0
        max_dhdt = max(max_dhdt, float(dhdt.max()))
        defect = max(defect, float(np.max(np.abs(V - proj))))
        equality += int(np.count_nonzero(np.abs(dhdt) <= tol))

    matched = bool(max_dhdt <= tol and defect <= tol)
    return HeightReport(max_dhdt, defect, equality, matched)


def blow_down_rescale(patch: SurfacePatch, a: float, R: float, omega=None) -> ClippedPatch:
    """
    a^{-1}(M - a^2 omega) clipped to the ball B_R(0).

    Raises:
        ValueError: a < 1, R <= 0, or the patch does not cover the heights
            a^2 - aR .. a^2 + aR along omega.
    """
    if a < 1:
        raise ValueError(f"blow-down needs a >= 1, got {a}")
    if not R > 0:
        raise ValueError(f"R must be positive, got {R}")
    if omega is None:
        omega = np.zeros(patch.ambient_dim)
        omega[min(2, patch.ambient_dim - 1)] = 1.0
    omega = np.asarray(omega, dtype=float)

    heights = patch.positions() @ omega
    lo, hi = a * a - a * R, a * a + a * R
    span = 1e-9 * (1.0 + abs(hi))
    if heights.min() > lo + span or heights.max() < hi - span:
        raise ValueError(
            f"insufficient height range: need [{lo:.6g}, {hi:.6g}], "
            f"patch covers [{heights.min():.6g}, {heights.max():.6g}]"
        )

    rescaled = patch.moved(dilation=1.0 / a, translation=-a * omega)
    mask = np.linalg.norm(rescaled.positions(), axis=-1) <= R
    return ClippedPatch(rescaled, mask, -1.0)
