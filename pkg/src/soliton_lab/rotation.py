# ============================================================
# soliton_lab.rotation: rotation fields, symmetry checks, cylinder fits
# ============================================================

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm, logm
from scipy.optimize import brentq, least_squares, minimize

from .geometry import (
    GridAxis,
    SpacetimePoint,
    SurfaceFlow,
    SurfacePatch,
    closeness_to_model,
    extract_parabolic_neighborhood,
)
from .helpers import make_rng
from .solitons import CylinderModel

logger = logging.getLogger(__name__)

# rotation in the (x1, x2)-plane; row 1 = [0, -1, 0, 0]
J = np.array([
    [0.0, -1.0, 0.0, 0.0],
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0],
])
# rotation in the (x3, x4)-plane
J_PRIME = np.array([
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, -1.0],
    [0.0, 0.0, 1.0, 0.0],
])

ORTHO_TOL = 1e-12
KH_BOUND = 5.0
GAUGE_RADIUS = 0.1


def _check_orthogonal(S: np.ndarray, what: str = "S"):
    if S.shape != (4, 4):
        raise ValueError(f"{what} must be a 4x4 matrix, got shape {S.shape}")
    err = float(np.max(np.abs(S.T @ S - np.eye(4))))
    if err > ORTHO_TOL:
        raise ValueError(f"{what} is not orthogonal: |S^T S - Id| = {err:.3e} > {ORTHO_TOL:g}")


def antisymmetric(params) -> np.ndarray:
    """so(4) element from its six upper entries (a12, a13, a14, a23, a24, a34)."""
    a12, a13, a14, a23, a24, a34 = params
    A = np.array([
        [0.0, a12, a13, a14],
        [0.0, 0.0, a23, a24],
        [0.0, 0.0, 0.0, a34],
        [0.0, 0.0, 0.0, 0.0],
    ])
    return A - A.T


# ------------------------------------------------------------
# Rotation fields
# ------------------------------------------------------------

@dataclass
class RotationField:
    """K(x) = S J S^{-1} (x - q)."""

    S: np.ndarray = field(default_factory=lambda: np.eye(4))
    q: np.ndarray = field(default_factory=lambda: np.zeros(4))

    def __post_init__(self):
        self.S = np.asarray(self.S, dtype=float)
        self.q = np.asarray(self.q, dtype=float)
        _check_orthogonal(self.S)
        if self.q.shape != (4,):
            raise ValueError(f"q must be a point of R^4, got shape {self.q.shape}")

    @property
    def matrix(self) -> np.ndarray:
        return self.S @ J @ self.S.T

    def evaluate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (x - self.q) @ self.matrix.T

    def plane_distance(self, x) -> np.ndarray:
        """Distance to the rotation plane q + S span(e3, e4)."""
        y = (np.asarray(x, dtype=float) - self.q) @ self.S
        return np.linalg.norm(y[..., :2], axis=-1)

    def moved(self, rotation=None, translation=None, dilation: float = 1.0) -> "RotationField":
        """Field pushed forward by x -> dilation * Q x + b."""
        Q = np.eye(4) if rotation is None else np.asarray(rotation, dtype=float)
        b = np.zeros(4) if translation is None else np.asarray(translation, dtype=float)
        return RotationField(Q @ self.S, dilation * (Q @ self.q) + b)


def evaluate_field(K: RotationField, x) -> np.ndarray:
    return K.evaluate(x)


@dataclass
class GeneratorPair:
    J: np.ndarray = field(default_factory=lambda: J.copy())
    J_prime: np.ndarray = field(default_factory=lambda: J_PRIME.copy())

    def check(self, samples: int = 20, seed: int = 0) -> dict:
        """Residuals of J^2|span(e1,e2) = -Id, [J, J'] = 0 and [exp(eta J + theta J'), J] = 0."""
        rng = make_rng(seed, "generator-pair")
        square = float(np.max(np.abs((self.J @ self.J)[:2, :2] + np.eye(2))))
        bracket = float(np.max(np.abs(self.J @ self.J_prime - self.J_prime @ self.J)))
        commute = 0.0
        for eta, theta in rng.uniform(-math.pi, math.pi, size=(samples, 2)):
            E = expm(eta * self.J + theta * self.J_prime)
            commute = max(commute, float(np.max(np.abs(E @ self.J - self.J @ E))))
        return {"square": square, "bracket": bracket, "exp_commutes": commute}


# ------------------------------------------------------------
# epsilon-symmetry
# ------------------------------------------------------------

@dataclass
class SymmetryVerdict:
    epsilon_measured: float
    bound_KH: float
    nodes: int = 0

    def passes(self, eps: float) -> bool:
        return self.epsilon_measured <= eps and self.bound_KH <= KH_BOUND

    def to_dict(self) -> dict:
        return {"epsilon_measured": self.epsilon_measured, "bound_KH": self.bound_KH,
                "nodes": self.nodes}


def symmetry_sups(patches, K: RotationField) -> SymmetryVerdict:
    """sup |<K, nu>| H and sup |K| H over clipped patches."""
    eps = 0.0
    bound = 0.0
    nodes = 0
    for clipped in patches:
        cf = clipped.patch.curvature
        region = cf.interior & clipped.mask
        if not np.any(region):
            continue
        x = cf.positions[region]
        Kx = K.evaluate(x)
        H = cf.H[region]
        eps = max(eps, float(np.max(np.abs(np.einsum("ma,ma->m", Kx, cf.normals[region])) * H)))
        bound = max(bound, float(np.max(np.linalg.norm(Kx, axis=-1) * H)))
        nodes += int(region.sum())
    return SymmetryVerdict(eps, bound, nodes)


def check_epsilon_symmetric(flow: SurfaceFlow, center: SpacetimePoint, K: RotationField,
                            L: float = 100.0, T: float = 100.0**2) -> SymmetryVerdict:
    """
    Measure how symmetric ``flow`` is about K on the parabolic neighborhood
    of ``center``. Extraction errors propagate unchanged.
    """
    _, clipped = extract_parabolic_neighborhood(flow, center, L, T)
    verdict = symmetry_sups(clipped, K)
    logger.info("symmetry check: eps=%.3e |K|H=%.6f over %d nodes",
                verdict.epsilon_measured, verdict.bound_KH, verdict.nodes)
    return verdict


def tilt_sweep(flow: SurfaceFlow, center: SpacetimePoint, alphas, direction,
               L: float = 100.0, T: float = 100.0**2) -> dict:
    """
    epsilon for K tilted by exp(alpha A), A the unit so(4) element along
    ``direction``, over a sweep of alpha.

    Returns rows (alpha, eps, |K|H), the log-log slope of eps against alpha
    and the R^2 of that fit.
    """
    A = antisymmetric(direction)
    norm = float(np.linalg.norm(A))
    if norm == 0.0:
        raise ValueError("tilt direction must be nonzero")
    alphas = [float(a) for a in alphas]
    if len(alphas) < 2 or min(alphas) <= 0.0:
        raise ValueError("tilt sweep needs at least two positive angles")
    _, clipped = extract_parabolic_neighborhood(flow, center, L, T)
    rows = []
    for alpha in alphas:
        verdict = symmetry_sups(clipped, RotationField(expm(alpha * A / norm), np.zeros(4)))
        rows.append((alpha, verdict.epsilon_measured, verdict.bound_KH))
    arr = np.array(rows)
    if np.any(arr[:, 1] <= 0.0):
        raise ValueError("tilt direction commutes with the axis rotation: epsilon vanishes")
    x, y = np.log(arr[:, 0]), np.log(arr[:, 1])
    slope, intercept = np.polyfit(x, y, 1)
    fit = slope * x + intercept
    spread = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum((y - fit) ** 2)) / spread if spread > 0 else 1.0
    logger.info("tilt sweep: slope %.4f, R^2 %.6f over %d angles", slope, r2, len(rows))
    return {"rows": rows, "slope": float(slope), "r2": r2}


# ------------------------------------------------------------
# Cylinder fitting
# ------------------------------------------------------------

def _chart_rotation(R0: np.ndarray, p) -> np.ndarray:
    # rotations mixing span(e1, e2) with span(e3, e4): Grassmannian chart
    a13, a14, a23, a24 = p
    return R0 @ expm(antisymmetric([0.0, a13, a14, a23, a24, 0.0]))


def _cylinder_residuals(params, R0, x):
    R = _chart_rotation(R0, params[:4])
    c = R[:, :2] @ params[4:6]
    y = (x - c) @ R
    return np.linalg.norm(y[:, :2], axis=-1) - params[6]


def _initial_frame(normals: np.ndarray) -> np.ndarray:
    # normals of S^1 x R^2 span the circle plane
    w, V = np.linalg.eigh(normals.T @ normals)
    order = np.argsort(w)[::-1]
    R0 = V[:, order]
    if np.linalg.det(R0) < 0:
        R0[:, 3] = -R0[:, 3]
    return R0


def fit_cylinder(patch: SurfacePatch, mask=None, seed: int = 0, restarts: int = 5,
                 theta_num: int = 128):
    """
    Least-squares S^1 x R^2 fit over circle plane, center and radius.

    Returns:
        (CylinderModel, C2 error of the patch as a normal graph over the model)

    Raises:
        RuntimeError: if no restart converges (carries the best residual).
    """
    cf = patch.curvature
    region = cf.interior if mask is None else (cf.interior & np.asarray(mask, dtype=bool))
    x = cf.positions[region]
    nu = cf.normals[region]
    H = cf.H[region]
    if len(x) < 8:
        raise ValueError("cylinder fit needs at least 8 interior nodes")

    R0 = _initial_frame(nu)
    safe_H = np.where(np.abs(H) > 1e-12, H, np.nan)
    centers = x + nu / safe_H[:, None]
    centers = centers[np.all(np.isfinite(centers), axis=1)]
    c0 = (centers.mean(axis=0) @ R0[:, :2]) if len(centers) else np.zeros(2)
    r0 = float(np.nanmedian(1.0 / safe_H)) if np.any(np.isfinite(safe_H)) else 1.0
    if not np.isfinite(r0) or r0 <= 0:
        r0 = float(np.median(np.linalg.norm((x - x.mean(axis=0)) @ R0[:, :2], axis=1)))

    rng = make_rng(seed, "fit-cylinder")
    base = np.concatenate([np.zeros(4), c0, [r0]])
    best = None
    for attempt in range(restarts):
        start = base.copy()
        if attempt:
            start[:4] += rng.normal(scale=0.05, size=4)
            start[4:6] += rng.normal(scale=0.05 * r0, size=2)
        sol = least_squares(_cylinder_residuals, start, args=(R0, x), method="lm",
                            xtol=1e-14, ftol=1e-14, gtol=1e-14, max_nfev=2000)
        if sol.status <= 0:
            logger.debug("cylinder fit restart %d did not converge: %s", attempt, sol.message)
            continue
        key = (float(sol.cost), tuple(np.round(sol.x, 12)))
        if best is None or key < best[0]:
            best = (key, sol)

    if best is None:
        raise RuntimeError(f"cylinder fit did not converge after {restarts} restarts; "
                           f"best residual {_cylinder_residuals(base, R0, x).std():.3e}")

    sol = best[1]
    R = _chart_rotation(R0, sol.x[:4])
    # re-orthonormalize against expm round-off
    U, _, Vt = np.linalg.svd(R)
    R = U @ Vt
    center = R[:, :2] @ sol.x[4:6]
    radius = abs(float(sol.x[6]))
    model = CylinderModel(1, R, center, radius=radius)

    z = (x - center) @ R[:, 2:]
    pad = 0.1 * (np.ptp(z, axis=0) + radius)
    model_patch = model.as_polar_patch(
        theta_num,
        GridAxis(float(z[:, 0].min() - pad[0]), float(z[:, 0].max() + pad[0]), 41),
        GridAxis(float(z[:, 1].min() - pad[1]), float(z[:, 1].max() + pad[1]), 41),
    )
    try:
        report = closeness_to_model(patch, model_patch, region)
        error = report.graph_norm_C2
    except ValueError as exc:
        logger.warning("cylinder fit: %s", exc)
        error = math.inf

    logger.info("cylinder fit: radius=%.10g rms=%.3e C2=%.3e", radius,
                math.sqrt(2.0 * sol.cost / len(x)), error)
    return model, error


def is_cylindrical(error: float, eps: float) -> bool:
    return bool(error <= eps)


# ------------------------------------------------------------
# Rigidity catalog
# ------------------------------------------------------------

def rigidity_residual(K: RotationField, model: str, patch: SurfacePatch, mask=None) -> float:
    """
    Distance from K to the nearest rotation field tangent to the model.

    Catalog: +-Jx on both models; +-J'(x - a) on the cylinder only, with the
    translation fitted by least squares. The distance is sup |K - C| H over
    the interior nodes of ``patch``.
    """
    if model not in ("cylinder", "bowl"):
        raise ValueError(f"model must be 'cylinder' or 'bowl', got '{model}'")
    cf = patch.curvature
    region = cf.interior if mask is None else (cf.interior & np.asarray(mask, dtype=bool))
    x = cf.positions[region]
    H = cf.H[region]
    Kx = K.evaluate(x)

    best = math.inf
    for sign in (1.0, -1.0):
        diff = Kx - sign * (x @ J.T)
        best = min(best, float(np.max(np.linalg.norm(diff, axis=-1) * H)))
        if model == "cylinder":
            diff = Kx - sign * (x @ J_PRIME.T)
            # J'(x - a) = J'x - b with b in span(e3, e4)
            b = np.zeros(4)
            b[2:] = diff[:, 2:].mean(axis=0)
            best = min(best, float(np.max(np.linalg.norm(diff - b, axis=-1) * H)))
    return best


def catalog_lower_bound(patch: SurfacePatch, seed: int = 0, starts: int = 200) -> dict:
    """
    inf over unit (A, b) of sup |<[A, J]x - J b, nu>|, A in so(4) with
    A_21 = A_43 = 0, b in span(e1, e2).

    Returns the sampled minimum and the singular-value certificate
    sigma_min / sqrt(nodes), which bounds it from below.
    """
    cf = patch.curvature
    x = cf.positions[cf.interior]
    nu = cf.normals[cf.interior]

    columns = []
    for k in range(4):
        p = np.zeros(4)
        p[k] = 1.0
        A = antisymmetric([0.0, p[0], p[1], p[2], p[3], 0.0])
        C = A @ J - J @ A
        columns.append(np.einsum("ma,ma->m", x @ C.T, nu))
    for k in range(2):
        b = np.zeros(4)
        b[k] = 1.0
        columns.append(-(nu @ (J @ b)))
    M = np.stack(columns, axis=1)

    def objective(p):
        p = p / np.linalg.norm(p)
        return float(np.max(np.abs(M @ p)))

    rng = make_rng(seed, "catalog-lower-bound")
    trial = rng.normal(size=(starts, M.shape[1]))
    values = [objective(p) for p in trial]
    best = trial[int(np.argmin(values))]
    res = minimize(objective, best, method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 4000})
    sampled = min(min(values), float(res.fun))
    sigma = float(np.linalg.svd(M, compute_uv=False)[-1])
    return {"sampled_min": sampled, "certificate": sigma / math.sqrt(len(x))}


# ------------------------------------------------------------
# Alignment of admissible fields
# ------------------------------------------------------------

def affine_sup(A: np.ndarray, b: np.ndarray, center: np.ndarray, radius: float) -> float:
    """
    max |A y + b| over the closed ball |y - center| <= radius, exactly.

    The maximum lies on the sphere; its multiplier solves the secular
    equation sum g_i^2 / (mu - l_i)^2 = radius^2 with mu > max l_i.
    """
    A = np.asarray(A, dtype=float)
    c = A @ np.asarray(center, dtype=float) + np.asarray(b, dtype=float)
    if radius == 0:
        return float(np.linalg.norm(c))
    lam, V = np.linalg.eigh(A.T @ A)
    g = V.T @ (A.T @ c)
    top = lam[-1]
    scale = max(top, 1e-300)

    active = np.abs(g) > 1e-14 * (1.0 + np.linalg.norm(g))
    gap = top - lam
    near_top = gap <= 1e-12 * scale

    def value(y_coords):
        y = V @ y_coords
        return float(np.linalg.norm(A @ y + c))

    if not np.any(active & near_top):
        # hard case candidate: y = partial solution + multiple of the top eigenvector
        safe = np.where(near_top, 1.0, gap)
        partial = np.where(near_top, 0.0, g / safe)
        norm2 = float(partial @ partial)
        if norm2 <= radius**2:
            tau = math.sqrt(radius**2 - norm2)
            y = partial.copy()
            y[np.argmax(lam)] += tau
            return value(y)

    def secular(mu):
        return float(np.sum((g / (mu - lam)) ** 2)) - radius**2

    lo = top + 1e-15 * (1.0 + scale)
    hi = top + np.linalg.norm(g) / radius + 1e-12 * (1.0 + scale)
    while secular(lo) < 0:
        lo = top + 0.5 * (lo - top)
        if lo - top < 1e-300:
            break
    mu = brentq(secular, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=500)
    return value(g / (mu - lam))


def affine_sup_ratio(A, b, center, rho: float, L: float) -> tuple[float, float]:
    """(sup over B_L / sup over B_rho, the bound 1 + L/rho)."""
    small = affine_sup(A, b, center, rho)
    large = affine_sup(A, b, center, L)
    ratio = large / small if small > 0 else 0.0
    return ratio, 1.0 + L / rho


def _random_generator(rng) -> np.ndarray:
    return antisymmetric(rng.normal(size=6))


@dataclass
class AlignmentReport:
    eps: float
    L: list
    ratios: dict
    constant_spread: float

    def rows(self) -> list[tuple[float, float]]:
        return [(L, self.ratios[L]) for L in self.L]

    def to_dict(self) -> dict:
        return {"eps": self.eps, "L": list(self.L),
                "max_ratio": {str(k): v for k, v in self.ratios.items()},
                "constant_spread": self.constant_spread}


def _admissible_field(patch_x, patch_nu, patch_H, base: RotationField, eps: float,
                      rng, max_rejects: int = 100) -> RotationField:
    """Perturb ``base`` until sup |<K, nu>| H hits eps on the sampled ball (bisection on size)."""

    def build(delta, B, g):
        return RotationField(base.S @ expm(delta * B), base.q + delta * g)

    def measure(K):
        Kx = K.evaluate(patch_x)
        return float(np.max(np.abs(np.einsum("ma,ma->m", Kx, patch_nu)) * patch_H))

    for _ in range(max_rejects):
        B = _random_generator(rng)
        g = rng.normal(size=4)
        hi = 1e-6
        while measure(build(hi, B, g)) < eps:
            hi *= 2.0
            if hi > 10.0:
                break
        if hi > 10.0:
            continue
        lo = 0.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if measure(build(mid, B, g)) <= eps:
                lo = mid
            else:
                hi = mid
        K = build(lo, B, g)
        if float(np.max(np.linalg.norm(K.evaluate(patch_x), axis=-1) * patch_H)) <= KH_BOUND:
            return K
    raise RuntimeError("trial generation failed: rejection sampling exhausted "
                       f"after {max_rejects} draws")


def alignment_experiment(patch: SurfacePatch, center, eps: float, L_values,
                         trials: int, seed: int = 0, base: RotationField | None = None,
                         pairs=None) -> AlignmentReport:
    """
    Two admissible fields near ``base``; measure
    min over signs of sup_{B_{L/H}} |K1 -+ K2| H(center), divided by eps (L + 1).

    The difference of two rotation fields is affine, so the sup over the
    ambient ball is evaluated exactly (``affine_sup``). ``pairs`` replaces
    the random generation with explicit (K1, K2) pairs.
    """
    if not 0 < eps <= 0.01:
        raise ValueError(f"eps must lie in (0, 0.01], got {eps}")
    L_values = [float(L) for L in L_values]
    for L in L_values:
        if not 1.0 <= L <= 100.0:
            raise ValueError(f"L must lie in [1, 100], got {L}")
    base = RotationField() if base is None else base
    center = np.asarray(center, dtype=float)

    cf = patch.curvature
    flat = np.argmin(np.where(cf.interior, np.linalg.norm(cf.positions - center, axis=-1), np.inf))
    index = np.unravel_index(flat, patch.shape)
    H0 = float(cf.H[index])
    if not H0 > 0:
        raise ValueError("alignment needs H > 0 at the center")
    unit_ball = cf.interior & (np.linalg.norm(cf.positions - center, axis=-1) <= 1.0 / H0)
    x, nu, H = cf.positions[unit_ball], cf.normals[unit_ball], cf.H[unit_ball]

    rng = make_rng(seed, "alignment")
    if pairs is None:
        pairs = []
        for _ in range(trials):
            K1 = _admissible_field(x, nu, H, base, eps, rng)
            K2 = _admissible_field(x, nu, H, base, eps, rng)
            if rng.random() < 0.5:
                K2 = RotationField(K2.S @ np.diag([1.0, -1.0, 1.0, 1.0]), K2.q)
            pairs.append((K1, K2))

    ratios = {}
    for L in L_values:
        worst = 0.0
        for K1, K2 in pairs:
            M1, M2 = K1.matrix, K2.matrix
            best = math.inf
            for sign in (1.0, -1.0):
                A = M1 - sign * M2
                b = -(M1 @ K1.q) + sign * (M2 @ K2.q)
                best = min(best, affine_sup(A, b, center, L / H0) * H0)
            worst = max(worst, best / (eps * (L + 1.0)))
        ratios[L] = worst

    positive = [v for v in ratios.values() if v > 0]
    spread = max(positive) / min(positive) if positive else 1.0
    logger.info("alignment: eps=%g ratios=%s spread=%.3f", eps, ratios, spread)
    return AlignmentReport(eps, L_values, ratios, spread)


# ------------------------------------------------------------
# so(4) structure
# ------------------------------------------------------------

def gauge_fix(A: np.ndarray, tol: float = 1e-13, max_iter: int = 30) -> tuple[float, float, np.ndarray]:
    """
    Find eta, theta with (A~)_21 = (A~)_43 = 0, exp(A~) = exp(A) exp(-eta J - theta J').

    Raises:
        ValueError: |A| > 0.1 (outside the documented Newton radius) or no
            convergence.
    """
    A = np.asarray(A, dtype=float)
    if np.linalg.norm(A, 2) > GAUGE_RADIUS:
        raise ValueError(f"gauge fixing is only supported for |A| <= {GAUGE_RADIUS}, "
                         f"got {np.linalg.norm(A, 2):.4g}")
    E = expm(A)

    def tilde(p):
        return np.real(logm(E @ expm(-p[0] * J - p[1] * J_PRIME)))

    def residual(p):
        T = tilde(p)
        return np.array([T[1, 0], T[3, 2]])

    p = np.array([A[1, 0], A[3, 2]])
    r = residual(p)
    h = 1e-7
    for _ in range(max_iter):
        if np.max(np.abs(r)) <= tol:
            break
        jac = np.column_stack([(residual(p + h * e) - r) / h for e in np.eye(2)])
        p = p - np.linalg.solve(jac, r)
        r = residual(p)
    else:
        if np.max(np.abs(r)) > tol:
            raise ValueError(f"gauge fixing did not converge: residual {np.max(np.abs(r)):.3e}")
    return float(p[0]), float(p[1]), tilde(p)


@dataclass
class So4Report:
    commutator_frobenius_gap: float
    commutator_operator_gap: float
    pointwise_ratio_range: tuple
    expm_bound_violations: int
    expm_worst_slack: float
    commute_residual: float
    gauge_zero: tuple
    gauge_pure_rotation: tuple
    gauge_max_residual: float
    samples: int

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


def so4_structure_checks(samples: int = 1000, seed: int = 0, gauge_scale: float = 0.05) -> So4Report:
    """
    Random checks of the so(4) facts used by the alignment argument:
    commutator norms under A_21 = A_43 = 0, the expm remainder bound,
    commutation of exp(-eta J - theta J') with J, and gauge fixing.
    """
    rng = make_rng(seed, "so4")

    frob_gap = 0.0
    op_gap = 0.0
    lo, hi = math.inf, 0.0
    for _ in range(samples):
        p = rng.normal(size=6)
        p[0] = p[5] = 0.0
        A = antisymmetric(p)
        C = A @ J - J @ A
        frob_gap = max(frob_gap, abs(np.linalg.norm(C) - np.linalg.norm(A)))
        op_gap = max(op_gap, abs(np.linalg.norm(C, 2) - np.linalg.norm(A, 2)))
        x = rng.normal(size=4)
        ax = np.linalg.norm(A @ x)
        if ax > 1e-12:
            ratio = float(np.linalg.norm(C @ x) / ax)
            lo, hi = min(lo, ratio), max(hi, ratio)

    violations = 0
    slack = math.inf
    for _ in range(samples):
        A = antisymmetric(rng.normal(size=6)) * rng.uniform(0.0, 2.0)
        a = np.linalg.norm(A, 2)
        E = expm(A) - np.eye(4) - A
        bound = 0.5 * a * a * math.exp(a)
        gap = bound - np.linalg.norm(E, 2)
        slack = min(slack, float(gap))
        if gap < -1e-14:
            violations += 1

    commute = 0.0
    for eta, theta in rng.uniform(-math.pi, math.pi, size=(samples, 2)):
        E = expm(-eta * J - theta * J_PRIME)
        commute = max(commute, float(np.max(np.abs(E @ J - J @ E))))

    zero = gauge_fix(np.zeros((4, 4)))[:2]
    pure = gauge_fix(0.01 * J)[:2]

    worst = 0.0
    for _ in range(samples):
        A = antisymmetric(rng.normal(size=6))
        A *= rng.uniform(0.0, gauge_scale) / np.linalg.norm(A, 2)
        _, _, T = gauge_fix(A)
        worst = max(worst, abs(T[1, 0]) + abs(T[3, 2]))

    return So4Report(float(frob_gap), float(op_gap), (float(lo), float(hi)), violations,
                     float(slack), commute, zero, pure, float(worst), samples)
