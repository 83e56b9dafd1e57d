# ============================================================
# soliton_lab.convex: convex bodies, cross sections and Gaussian entropy
# ============================================================

import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.optimize import minimize
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra
from scipy.spatial import ConvexHull, QhullError
from scipy.spatial.distance import pdist, squareform
from scipy.special import gamma

from .geometry import SurfacePatch
from .helpers import make_rng

logger = logging.getLogger(__name__)

HULL_TOL = 1e-10
DIAMETER_REL_TOL = 0.01
MAX_LEVEL = 16
TAIL_TOL = 1e-6
RANK_TOL = 1e-10


# ------------------------------------------------------------
# Convex bodies
# ------------------------------------------------------------

class ConvexBody:
    """
    Convex hull of a vertex cloud in R^3 or R^4.

    Construction certifies convexity: every input point lies on the inner
    side of every facet hyperplane to HULL_TOL (relative to the body size).
    """

    def __init__(self, points):
        points = np.asarray(points, dtype=float)
        if points.ndim != 2 or points.shape[1] not in (3, 4):
            raise ValueError(f"convex body needs an (N, 3) or (N, 4) point cloud, got {points.shape}")
        try:
            self.hull = ConvexHull(points)
        except QhullError as e:
            raise ValueError(f"degenerate point cloud: {str(e).splitlines()[0]}") from None
        self.points = points
        scale = float(np.max(np.linalg.norm(points - points.mean(axis=0), axis=1)))
        violation = float(np.max(points @ self.hull.equations[:, :-1].T + self.hull.equations[:, -1]))
        if violation > HULL_TOL * max(scale, 1.0):
            raise ValueError(f"convexity certificate failed: violation {violation:.3e}")

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def vertices(self) -> np.ndarray:
        return self.points[self.hull.vertices]

    @property
    def facets(self) -> np.ndarray:
        return self.hull.simplices

    @classmethod
    def sphere(cls, num: int = 400, radius: float = 1.0) -> "ConvexBody":
        return cls(radius * fibonacci_sphere(num))

    @classmethod
    def ellipsoid(cls, axes, num: int = 400) -> "ConvexBody":
        axes = np.asarray(axes, dtype=float)
        if axes.shape != (3,) or np.any(axes <= 0):
            raise ValueError("ellipsoid needs three positive semi-axes")
        return cls(fibonacci_sphere(num) * axes)

    @classmethod
    def random_polytope(cls, rng: np.random.Generator, num: int = 30, dim: int = 3) -> "ConvexBody":
        """Convex hull of a standard Gaussian cloud."""
        return cls(rng.standard_normal((num, dim)))


def fibonacci_sphere(num: int) -> np.ndarray:
    """Nearly uniform points on the unit sphere S^2."""
    if num < 4:
        raise ValueError("need at least 4 points")
    k = np.arange(num) + 0.5
    z = 1.0 - 2.0 * k / num
    r = np.sqrt(1.0 - z * z)
    phi = math.pi * (3.0 - math.sqrt(5.0)) * k
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


# ------------------------------------------------------------
# Intrinsic and extrinsic diameter
# ------------------------------------------------------------

def _lattice(parts: int, level: int) -> np.ndarray:
    """All compositions of ``level`` into ``parts`` nonnegative integers."""
    out = []
    for bars in itertools.combinations(range(level + parts - 1), parts - 1):
        prev = -1
        comp = []
        for b in bars:
            comp.append(b - prev - 1)
            prev = b
        comp.append(level + parts - 2 - prev)
        out.append(comp)
    return np.array(out, dtype=int)


def surface_graph(body: ConvexBody, level: int):
    """
    Boundary proximity graph: barycentric lattice points of every facet,
    joined pairwise inside each facet with Euclidean weights.

    Facets are flat and convex, so each edge is a path on the boundary and
    graph distances bound intrinsic distances from above.
    """
    facets = body.facets
    comps = _lattice(facets.shape[1], level)
    weights = comps / level
    iu, ju = np.triu_indices(len(comps), k=1)

    ids: dict = {}
    coords = []
    src, dst, wts = [], [], []
    for facet in facets:
        pos = weights @ body.points[facet]
        local = np.empty(len(comps), dtype=int)
        for a, comp in enumerate(comps):
            key = tuple(sorted((int(v), int(k)) for v, k in zip(facet, comp) if k > 0))
            node = ids.get(key)
            if node is None:
                node = len(coords)
                ids[key] = node
                coords.append(pos[a])
            local[a] = node
        src.append(local[iu])
        dst.append(local[ju])
        wts.append(np.linalg.norm(pos[iu] - pos[ju], axis=1))

    src = np.concatenate(src)
    dst = np.concatenate(dst)
    wts = np.concatenate(wts)
    lo, hi = np.minimum(src, dst), np.maximum(src, dst)
    _, keep = np.unique(lo * len(coords) + hi, return_index=True)
    n = len(coords)
    graph = csr_matrix((wts[keep], (lo[keep], hi[keep])), shape=(n, n))
    return graph, np.array(coords)


def _graph_diameter(graph, seeds, sweeps: int = 6) -> float:
    """Repeated farthest-point sweeps from the seed nodes."""
    best = 0.0
    frontier = list(seeds)
    for _ in range(sweeps):
        dist = dijkstra(graph, directed=False, indices=frontier)
        dist = np.atleast_2d(dist)
        if not np.all(np.isfinite(dist)):
            raise ValueError("proximity graph disconnected: refine sampling")
        far = int(np.argmax(dist.max(axis=0)))
        value = float(dist.max())
        if value <= best * (1.0 + 1e-12):
            break
        best = value
        frontier = [far]
    return best


@dataclass
class DiameterReport:
    d1: float
    d2: float
    level: int
    history: list

    @property
    def ratio(self) -> float:
        return self.d1 / self.d2

    def to_dict(self) -> dict:
        return {"d1": self.d1, "d2": self.d2, "ratio": self.ratio, "level": self.level}


def diameters(body: ConvexBody, rel_tol: float = DIAMETER_REL_TOL,
              max_level: int = MAX_LEVEL) -> DiameterReport:
    """
    Intrinsic (d1) and extrinsic (d2) diameter of the boundary.

    d2 is exact over the vertices. d1 comes from the boundary graph,
    doubling the lattice level until it changes by less than ``rel_tol``.

    Raises:
        ValueError: disconnected proximity graph ("refine sampling").
    """
    verts = body.hull.vertices
    dmat = squareform(pdist(body.points[verts]))
    a, b = np.unravel_index(int(np.argmax(dmat)), dmat.shape)
    d2 = float(dmat[a, b])

    history = []
    level = 1
    previous = None
    while True:
        graph, coords = surface_graph(body, level)
        count, _ = connected_components(graph, directed=False)
        if count != 1:
            raise ValueError(f"proximity graph has {count} components: refine sampling")
        # sweeps start at the chord endpoints
        seeds = _nearest_nodes(coords, body.points[[verts[a], verts[b], verts[0]]])
        d1 = _graph_diameter(graph, seeds)
        history.append((level, d1))
        logger.debug("diameter level %d: d1=%.6g (%d nodes)", level, d1, len(coords))
        if previous is not None and abs(previous - d1) <= rel_tol * d1:
            break
        if level >= max_level:
            logger.warning("diameter refinement stopped at level %d without settling", level)
            break
        previous = d1
        level *= 2

    if d1 < d2 * (1.0 - 1e-9):
        raise RuntimeError(f"intrinsic diameter {d1:.6g} below chord {d2:.6g}")
    return DiameterReport(d1, d2, level, history)


def _nearest_nodes(coords: np.ndarray, targets: np.ndarray) -> list[int]:
    d = np.linalg.norm(coords[None, :, :] - targets[:, None, :], axis=-1)
    return sorted(set(int(i) for i in np.argmin(d, axis=1)))


def diameter_trials(trials: int, seed: int = 0, num: int = 30, dim: int = 3) -> list[dict]:
    """d1/d2 over random Gaussian polytopes."""
    rng = make_rng(seed, "diameters")
    rows = []
    for k in range(trials):
        report = diameters(ConvexBody.random_polytope(rng, num, dim))
        rows.append({"trial": k, **report.to_dict()})
    return rows


# ------------------------------------------------------------
# Cross sections of rotated S^1 x R^2
# ------------------------------------------------------------

@dataclass
class CrossSection:
    eigenvalues: np.ndarray
    semi_axes: np.ndarray
    deviation: float
    constant: float
    trace_gap: float

    def to_dict(self) -> dict:
        return {"eigenvalues": self.eigenvalues.tolist(), "semi_axes": self.semi_axes.tolist(),
                "deviation": self.deviation, "constant": self.constant,
                "trace_gap": self.trace_gap}


def cross_section_quadratic(A, eta: float) -> CrossSection:
    """
    Section {x3 = 0} of A(S^1 x R^2), S^1 of radius 1.

    The cylinder is X I1 X^T = 1 with I1 = A diag(1, 1, 0, 0) A^T; deleting
    the third row and column leaves the form of the section, whose two
    nonzero eigenvalues mu give semi-axes mu^{-1/2}.

    Raises:
        ValueError: A not orthogonal, tilt entries above eta, or rank != 2.
    """
    A = np.asarray(A, dtype=float)
    if A.shape != (4, 4) or np.max(np.abs(A.T @ A - np.eye(4))) > 1e-12:
        raise ValueError("A must be an orthogonal 4x4 matrix")
    if eta < 0 or max(abs(A[2, 0]), abs(A[2, 1])) > eta * (1.0 + 1e-12) + 1e-15:
        raise ValueError(f"tilt of the cylinder factor exceeds eta = {eta}")
    I1 = A @ np.diag([1.0, 1.0, 0.0, 0.0]) @ A.T
    keep = [0, 1, 3]
    I1_bar = I1[np.ix_(keep, keep)]
    mu = np.linalg.eigvalsh(I1_bar)[::-1]
    if abs(mu[2]) > RANK_TOL or mu[1] <= RANK_TOL:
        raise ValueError(f"section form has rank != 2 (eigenvalues {mu})")
    axes = 1.0 / np.sqrt(mu[:2])
    deviation = float(np.max(np.abs(axes - 1.0)))
    constant = deviation / eta if eta > 0 else 0.0
    trace_gap = float(abs(mu.sum() - (np.trace(I1) - I1[2, 2])))
    return CrossSection(mu, axes, deviation, constant, trace_gap)


def tilt_rotation(eta: float, alpha: float = 0.0) -> np.ndarray:
    """Rotation by eta in the plane spanned by (cos a, sin a, 0, 0) and e3."""
    v = np.array([math.cos(alpha), math.sin(alpha), 0.0, 0.0])
    e3 = np.array([0.0, 0.0, 1.0, 0.0])
    P = np.outer(v, v) + np.outer(e3, e3)
    G = np.outer(e3, v) - np.outer(v, e3)
    return np.eye(4) + (math.cos(eta) - 1.0) * P + math.sin(eta) * G


def cross_section_sweep(etas, seed: int = 0) -> dict:
    """
    Axis deviation over a tilt sweep, with a random tilt direction and a
    random rotation fixing e3 applied on the left.

    Returns the log-log slope of deviation against eta and its R^2.
    """
    rng = make_rng(seed, "cross-section")
    rows = []
    for eta in etas:
        alpha = float(rng.uniform(0.0, 2.0 * math.pi))
        Q3, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        Q = np.eye(4)
        Q[np.ix_([0, 1, 3], [0, 1, 3])] = Q3
        section = cross_section_quadratic(Q @ tilt_rotation(eta, alpha), eta)
        rows.append((float(eta), section.deviation, float(section.semi_axes.max()),
                     float(section.semi_axes.min())))
    arr = np.array(rows)
    x, y = np.log(arr[:, 0]), np.log(arr[:, 1])
    slope, intercept = np.polyfit(x, y, 1)
    fit = slope * x + intercept
    r2 = 1.0 - float(np.sum((y - fit) ** 2) / np.sum((y - y.mean()) ** 2))
    return {"rows": rows, "slope": float(slope), "r2": r2}


# ------------------------------------------------------------
# Gaussian entropy
# ------------------------------------------------------------

@dataclass(frozen=True)
class GeneralizedCylinder:
    """S^k_radius x R^{n-k}, axis through the origin."""

    k: int
    n: int
    radius: float | None = None

    def __post_init__(self):
        if not 0 <= self.k <= self.n:
            raise ValueError(f"need 0 <= k <= n, got k={self.k}, n={self.n}")

    @property
    def r(self) -> float:
        """Self-shrinker radius sqrt(2k) at t = -1 unless given."""
        return math.sqrt(2.0 * self.k) if self.radius is None else self.radius


def _sphere_area(k: int) -> float:
    """|S^k| for the unit sphere."""
    return 2.0 * math.pi ** ((k + 1) / 2.0) / gamma((k + 1) / 2.0)


def _cylinder_F(surface: GeneralizedCylinder, offset: float, t0: float) -> float:
    k, r = surface.k, surface.r
    if k == 0:
        return 1.0
    a = abs(offset)
    weight = (4.0 * math.pi * t0) ** (-k / 2.0)
    if k == 1:
        value, _ = quad(lambda psi: math.exp(-(r * r + a * a - 2.0 * r * a * math.cos(psi)) / (4.0 * t0)),
                        0.0, math.pi, epsabs=1e-14, epsrel=1e-12)
        return weight * 2.0 * r * value
    shell = _sphere_area(k - 1) * r**k
    value, _ = quad(lambda psi: math.sin(psi) ** (k - 1)
                    * math.exp(-(r * r + a * a - 2.0 * r * a * math.cos(psi)) / (4.0 * t0)),
                    0.0, math.pi, epsabs=1e-14, epsrel=1e-12)
    return weight * shell * value


def required_radius(t0: float, tol: float = TAIL_TOL) -> float:
    """Clipping radius whose Gaussian tail bound C e^{-R^2/(8 t0)} is below tol."""
    return math.sqrt(8.0 * t0 * math.log(1.0 / tol))


def _patch_F(patch: SurfacePatch, x0: np.ndarray, t0: float) -> float:
    geo = patch.curvature
    interior = geo.interior
    x = geo.positions[interior]
    boundary = geo.positions[~interior]
    need = required_radius(t0)
    if len(boundary):
        reach = float(np.min(np.linalg.norm(boundary - x0, axis=-1)))
        if reach < need:
            raise ValueError(f"tail bound violated: need clipping radius R >= {need:.4g} "
                             f"around x0, patch reaches {reach:.4g}")
    cell = float(np.prod([ax.step for ax in patch.axes]))
    n = patch.dim
    d2 = np.sum((x - x0) ** 2, axis=-1)
    density = (4.0 * math.pi * t0) ** (-n / 2.0) * np.exp(-d2 / (4.0 * t0))
    return float(np.sum(density * geo.area_element[interior]) * cell)


def entropy_F(surface, x0=None, t0: float = 1.0) -> float:
    """
    F_{x0,t0} = int (4 pi t0)^{-n/2} exp(-|x - x0|^2/(4 t0)) dmu.

    A GeneralizedCylinder reduces to a 1-d quadrature over its sphere
    factor (the flat factors integrate to 1); for a cylinder ``x0`` may be
    a scalar distance from the axis. A SurfacePatch is integrated over its
    interior nodes.

    Raises:
        ValueError: t0 <= 0, or a patch too small for the Gaussian tail.
    """
    if not t0 > 0:
        raise ValueError(f"t0 must be positive, got {t0}")
    if isinstance(surface, GeneralizedCylinder):
        if x0 is None:
            offset = 0.0
        elif np.ndim(x0) == 0:
            offset = float(x0)
        else:
            offset = float(np.linalg.norm(np.asarray(x0, dtype=float)[: surface.k + 1]))
        return _cylinder_F(surface, offset, t0)
    if isinstance(surface, SurfacePatch):
        x0 = np.zeros(surface.ambient_dim) if x0 is None else np.asarray(x0, dtype=float)
        return _patch_F(surface, x0, t0)
    raise TypeError(f"unsupported surface type {type(surface).__name__}")


@dataclass
class EntropyEvaluation:
    value: float
    x0: float | list
    t0: float
    grid: list

    def to_dict(self) -> dict:
        return {"value": self.value, "x0": self.x0, "t0": self.t0}


def entropy_sup(surface: GeneralizedCylinder, grid: int = 17, log_t_range=(-4.0, 4.0),
                offset_max: float | None = None) -> EntropyEvaluation:
    """
    sup over (x0, t0) of F for a generalized cylinder.

    Rotational symmetry reduces x0 to its distance a from the axis. A
    grid x grid coarse search over (a, log t0) is refined by Nelder-Mead.
    """
    if not isinstance(surface, GeneralizedCylinder):
        raise TypeError("entropy_sup searches generalized cylinders")
    a_max = 2.0 * surface.r if offset_max is None else offset_max
    offsets = np.linspace(0.0, a_max, grid)
    logs = np.linspace(log_t_range[0], log_t_range[1], grid)
    table = [(float(a), float(s), _cylinder_F(surface, a, math.exp(s)))
             for a in offsets for s in logs]
    a0, s0, _ = max(table, key=lambda row: row[2])

    def objective(p):
        a = min(max(p[0], 0.0), a_max)
        s = min(max(p[1], log_t_range[0]), log_t_range[1])
        return -_cylinder_F(surface, a, math.exp(s))

    res = minimize(objective, [a0, s0], method="Nelder-Mead",
                   options={"xatol": 1e-8, "fatol": 1e-13, "maxiter": 2000})
    a = float(min(max(res.x[0], 0.0), a_max))
    s = float(min(max(res.x[1], log_t_range[0]), log_t_range[1]))
    value = -float(res.fun)
    logger.info("entropy sup S^%d x R^%d: %.6f at a=%.3g t0=%.4g",
                surface.k, surface.n - surface.k, value, a, math.exp(s))
    return EntropyEvaluation(value, a, math.exp(s), table)


def entropy_table(n: int = 3) -> list[tuple[int, float]]:
    """(k, lambda(S^k x R^{n-k})) for k = 0..n, evaluated at the shrinker scale."""
    return [(k, _cylinder_F(GeneralizedCylinder(k, n), 0.0, 1.0)) for k in range(n + 1)]


def eccentricity(patch: SurfacePatch) -> float:
    """diam(N) * sup H_N for a section patch; a diagnostic without a target value."""
    geo = patch.curvature
    H = geo.H[geo.interior]
    pts = geo.positions.reshape(-1, patch.ambient_dim)
    return float(np.max(pdist(pts)) * np.max(np.abs(H)))
