# ============================================================
# soliton_lab.geometry: discrete hypersurface patches in R^{n+1}
# ============================================================

import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

logger = logging.getLogger(__name__)

PATCH_KINDS = ("graph", "polar", "revolution")
MIN_AXIS_NODES = 4

PROJECTION_TOL = 1e-10
PROJECTION_MAX_ITER = 50


# ------------------------------------------------------------
# Grids and patches
# ------------------------------------------------------------

@dataclass(frozen=True)
class GridAxis:
    """Uniform axis. Periodic axes exclude the endpoint ``stop``."""

    start: float
    stop: float
    num: int
    periodic: bool = False

    @property
    def step(self) -> float:
        if self.periodic:
            return (self.stop - self.start) / self.num
        return (self.stop - self.start) / (self.num - 1)

    @property
    def period(self) -> float:
        return self.stop - self.start

    def nodes(self) -> np.ndarray:
        if self.periodic:
            return self.start + self.step * np.arange(self.num)
        return np.linspace(self.start, self.stop, self.num)

    @classmethod
    def angle(cls, num: int) -> "GridAxis":
        """Full circle [0, 2*pi) with ``num`` nodes."""
        return cls(0.0, 2.0 * np.pi, num, periodic=True)

    def to_dict(self) -> dict:
        return {"start": self.start, "stop": self.stop, "num": self.num,
                "periodic": self.periodic}


@dataclass
class CurvatureField:
    """Per-node geometry of a patch, in ambient units. NaN off the interior."""

    positions: np.ndarray
    normals: np.ndarray
    H: np.ndarray
    A2: np.ndarray
    lambda12: np.ndarray
    kappa_max: np.ndarray
    metric: np.ndarray
    area_element: np.ndarray
    interior: np.ndarray


@dataclass
class SurfacePatch:
    """
    Hypersurface piece sampled on a tensor grid.

    Kinds and their local embeddings (f = samples):
      graph       X = (u_1, ..., u_n, f(u))
      polar       X = (f cos(theta), f sin(theta), z_1, ..., z_{n-1})
      revolution  X = (rho cos(theta), rho sin(theta), f, s_1, ..., s_{n-2})

    The ambient position is ``scale * frame @ X + offset``. Normals point
    inward: toward +x_{n+1} for graphs, toward the axis for polar patches
    and toward +x_3 for revolution patches (before the frame is applied).
    """

    kind: str
    axes: tuple
    samples: np.ndarray
    frame: np.ndarray | None = None
    offset: np.ndarray | None = None
    scale: float = 1.0

    def __post_init__(self):
        self.axes = tuple(self.axes)
        self.samples = np.asarray(self.samples, dtype=float)
        ambient = len(self.axes) + 1
        self.frame = np.eye(ambient) if self.frame is None else np.asarray(self.frame, dtype=float)
        self.offset = np.zeros(ambient) if self.offset is None else np.asarray(self.offset, dtype=float)
        self.scale = float(self.scale)

        errors = validate_patch(self)
        if errors:
            raise ValueError("Invalid surface patch:\n" + "\n".join("  - " + e for e in errors))

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def ambient_dim(self) -> int:
        return len(self.axes) + 1

    @property
    def shape(self) -> tuple:
        return tuple(ax.num for ax in self.axes)

    def param_grid(self) -> list[np.ndarray]:
        return np.meshgrid(*[ax.nodes() for ax in self.axes], indexing="ij")

    def local_positions(self) -> np.ndarray:
        return _embed(self.kind, np.stack(self.param_grid(), axis=-1), self.samples)

    def positions(self) -> np.ndarray:
        return self.to_ambient(self.local_positions())

    def to_ambient(self, local: np.ndarray) -> np.ndarray:
        return self.scale * (local @ self.frame.T) + self.offset

    @cached_property
    def curvature(self) -> CurvatureField:
        return _curvature_field(self)

    def interior_mask(self) -> np.ndarray:
        mask = np.ones(self.shape, dtype=bool)
        for i, ax in enumerate(self.axes):
            if ax.periodic:
                continue
            lo = [slice(None)] * self.dim
            hi = [slice(None)] * self.dim
            lo[i] = 0
            hi[i] = -1
            mask[tuple(lo)] = False
            mask[tuple(hi)] = False
        return mask

    def with_samples(self, samples: np.ndarray) -> "SurfacePatch":
        return SurfacePatch(self.kind, self.axes, samples, self.frame, self.offset, self.scale)

    def moved(self, rotation: np.ndarray | None = None, translation=None,
              dilation: float = 1.0) -> "SurfacePatch":
        """Image under x -> dilation * (rotation @ x) + translation."""
        Q = np.eye(self.ambient_dim) if rotation is None else np.asarray(rotation, dtype=float)
        b = np.zeros(self.ambient_dim) if translation is None else np.asarray(translation, dtype=float)
        return SurfacePatch(
            self.kind, self.axes, self.samples,
            frame=Q @ self.frame,
            offset=dilation * (Q @ self.offset) + b,
            scale=dilation * self.scale,
        )

    def to_dict(self) -> dict:
        return {
            "format": "soliton-lab/patch",
            "version": 1,
            "kind": self.kind,
            "axes": [ax.to_dict() for ax in self.axes],
            "samples": self.samples.ravel(order="C").tolist(),
            "frame": self.frame.tolist(),
            "offset": self.offset.tolist(),
            "scale": self.scale,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SurfacePatch":
        if data.get("format") != "soliton-lab/patch":
            raise ValueError(f"Not a patch container: format={data.get('format')!r}")
        axes = tuple(GridAxis(float(a["start"]), float(a["stop"]), int(a["num"]),
                              bool(a.get("periodic", False))) for a in data["axes"])
        shape = tuple(ax.num for ax in axes)
        samples = np.asarray(data["samples"], dtype=float)
        if samples.size != int(np.prod(shape)):
            raise ValueError(f"Patch samples have {samples.size} values, grid needs {int(np.prod(shape))}")
        return cls(data["kind"], axes, samples.reshape(shape),
                   frame=data.get("frame"), offset=data.get("offset"),
                   scale=data.get("scale", 1.0))


def validate_patch(patch: SurfacePatch) -> list[str]:
    """Check a patch's structure; returns readable messages (empty if valid)."""
    errors: list[str] = []

    if patch.kind not in PATCH_KINDS:
        errors.append(f"kind must be one of {', '.join(PATCH_KINDS)}, got '{patch.kind}'")
        return errors

    if patch.dim < 1:
        errors.append("patch needs at least one axis")
        return errors

    for i, ax in enumerate(patch.axes):
        if ax.num < MIN_AXIS_NODES:
            errors.append(f"axis {i} has {ax.num} nodes, need >= {MIN_AXIS_NODES}")
        if not ax.stop > ax.start:
            errors.append(f"axis {i} must have stop > start")

    if patch.samples.shape != patch.shape:
        errors.append(f"samples shape {patch.samples.shape} does not match grid {patch.shape}")
    elif not np.all(np.isfinite(patch.samples)):
        errors.append("samples must be finite")

    if patch.kind == "polar" and patch.samples.shape == patch.shape and np.any(patch.samples <= 0):
        errors.append("polar-graph radii must be strictly positive")
    if patch.kind == "polar" and patch.dim < 2:
        errors.append("polar patches need theta plus at least one axial coordinate")
    if patch.kind == "revolution":
        if patch.dim < 2:
            errors.append("revolution patches need rho and theta axes")
        elif patch.axes[0].start <= 0:
            errors.append("revolution patches need rho > 0 (the axis is a coordinate singularity)")

    ambient = patch.ambient_dim
    if patch.frame.shape != (ambient, ambient):
        errors.append(f"frame must be {ambient}x{ambient}")
    elif not np.allclose(patch.frame.T @ patch.frame, np.eye(ambient), atol=1e-10):
        errors.append("frame must be orthogonal")
    if patch.offset.shape != (ambient,):
        errors.append(f"offset must have {ambient} components")
    if not patch.scale > 0:
        errors.append("scale must be positive")

    return errors


# ------------------------------------------------------------
# Local embeddings and jets
# ------------------------------------------------------------

def _embed(kind: str, params: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Local embedding for parameter points ``params[..., n]`` with values ``f[...]``."""
    if kind == "graph":
        return np.concatenate([params, f[..., None]], axis=-1)
    if kind == "polar":
        theta = params[..., 0]
        head = np.stack([f * np.cos(theta), f * np.sin(theta)], axis=-1)
        return np.concatenate([head, params[..., 1:]], axis=-1)
    rho, theta = params[..., 0], params[..., 1]
    head = np.stack([rho * np.cos(theta), rho * np.sin(theta), f], axis=-1)
    return np.concatenate([head, params[..., 2:]], axis=-1)


def grid_derivatives(f: np.ndarray, axes) -> tuple[list, list]:
    """
    Centered second-order differences of ``f`` along every axis.

    Returns (first, second) with ``first[i]`` = df/du_i and
    ``second[i][j]`` = d2f/du_i du_j. Values on the outer layer of a
    non-periodic axis are wrap-around garbage; mask them with the interior.
    """
    n = len(axes)
    first = []
    for i, ax in enumerate(axes):
        first.append((np.roll(f, -1, axis=i) - np.roll(f, 1, axis=i)) / (2.0 * ax.step))

    second = [[None] * n for _ in range(n)]
    for i, ax in enumerate(axes):
        h = ax.step
        second[i][i] = (np.roll(f, -1, axis=i) - 2.0 * f + np.roll(f, 1, axis=i)) / h**2
        for j in range(i + 1, n):
            mixed = (np.roll(first[j], -1, axis=i) - np.roll(first[j], 1, axis=i)) / (2.0 * h)
            second[i][j] = mixed
            second[j][i] = mixed
    return first, second


def _local_jet(kind: str, params: np.ndarray, f: np.ndarray, df: list, d2f: list):
    """
    Embedding, tangents and second derivatives at ``m`` points.

    params: (m, n); f: (m,); df[i]: (m,); d2f[i][j]: (m,).
    Returns X (m, n+1), T (m, n, n+1), S (m, n, n, n+1).
    """
    m, n = params.shape
    X = _embed(kind, params, f)
    T = np.zeros((m, n, n + 1))
    S = np.zeros((m, n, n, n + 1))

    if kind == "graph":
        for i in range(n):
            T[:, i, i] = 1.0
            T[:, i, n] = df[i]
            for j in range(n):
                S[:, i, j, n] = d2f[i][j]
        return X, T, S

    if kind == "polar":
        c, s = np.cos(params[:, 0]), np.sin(params[:, 0])
        r = f
        r_t = df[0]
        T[:, 0, 0] = r_t * c - r * s
        T[:, 0, 1] = r_t * s + r * c
        r_tt = d2f[0][0]
        S[:, 0, 0, 0] = r_tt * c - 2.0 * r_t * s - r * c
        S[:, 0, 0, 1] = r_tt * s + 2.0 * r_t * c - r * s
        for k in range(1, n):
            T[:, k, 0] = df[k] * c
            T[:, k, 1] = df[k] * s
            T[:, k, k + 1] = 1.0
            r_tk = d2f[0][k]
            S[:, 0, k, 0] = S[:, k, 0, 0] = r_tk * c - df[k] * s
            S[:, 0, k, 1] = S[:, k, 0, 1] = r_tk * s + df[k] * c
            for l in range(1, n):
                S[:, k, l, 0] = d2f[k][l] * c
                S[:, k, l, 1] = d2f[k][l] * s
        return X, T, S

    # revolution: X = (rho c, rho s, f, s_1..)
    rho = params[:, 0]
    c, s = np.cos(params[:, 1]), np.sin(params[:, 1])
    T[:, 0, 0] = c
    T[:, 0, 1] = s
    T[:, 1, 0] = -rho * s
    T[:, 1, 1] = rho * c
    for k in range(2, n):
        T[:, k, k + 1] = 1.0
    for i in range(n):
        T[:, i, 2] = df[i]
        for j in range(n):
            S[:, i, j, 2] = d2f[i][j]
    S[:, 0, 1, 0] = S[:, 1, 0, 0] = -s
    S[:, 0, 1, 1] = S[:, 1, 0, 1] = c
    S[:, 1, 1, 0] = -rho * c
    S[:, 1, 1, 1] = -rho * s
    return X, T, S


def generalized_cross(T: np.ndarray) -> np.ndarray:
    """Vector orthogonal to the n rows of ``T[..., n, n+1]`` (cofactor expansion)."""
    n = T.shape[-2]
    out = np.empty(T.shape[:-2] + (n + 1,))
    for k in range(n + 1):
        minor = np.delete(T, k, axis=-1)
        out[..., k] = (-1) ** k * np.linalg.det(minor)
    return out


def _orient_inward(kind: str, params: np.ndarray, N: np.ndarray) -> np.ndarray:
    if kind == "graph":
        ref = N[:, -1]
    elif kind == "polar":
        ref = -(N[:, 0] * np.cos(params[:, 0]) + N[:, 1] * np.sin(params[:, 0]))
    else:
        ref = N[:, 2]
    sign = np.where(ref < 0, -1.0, 1.0)
    return N * sign[:, None]


def _shape_operator(T: np.ndarray, S: np.ndarray, nu: np.ndarray):
    """Principal curvatures (ascending) and metric at every point."""
    g = np.einsum("mia,mja->mij", T, T)
    h = np.einsum("mija,ma->mij", S, nu)
    try:
        L = np.linalg.cholesky(g)
    except np.linalg.LinAlgError as exc:
        raise ValueError("degenerate metric: first fundamental form is not invertible") from exc
    Linv = np.linalg.inv(L)
    M = Linv @ h @ np.swapaxes(Linv, -1, -2)
    M = 0.5 * (M + np.swapaxes(M, -1, -2))
    return np.linalg.eigvalsh(M), g


def _curvature_field(patch: SurfacePatch) -> CurvatureField:
    n = patch.dim
    interior = patch.interior_mask()
    params_all = np.stack(patch.param_grid(), axis=-1)
    first, second = grid_derivatives(patch.samples, patch.axes)

    params = params_all[interior]
    f = patch.samples[interior]
    df = [d[interior] for d in first]
    d2f = [[second[i][j][interior] for j in range(n)] for i in range(n)]

    X, T, S = _local_jet(patch.kind, params, f, df, d2f)
    N = _orient_inward(patch.kind, params, generalized_cross(T))
    norm = np.linalg.norm(N, axis=-1)
    if np.any(norm < 1e-14):
        raise ValueError("degenerate metric: tangent vectors are linearly dependent")
    nu = N / norm[:, None]
    eig, g = _shape_operator(T, S, nu)

    shape = patch.shape
    scale = patch.scale

    def _scatter(values, tail=()):
        out = np.full(shape + tail, np.nan)
        out[interior] = values
        return out

    H = _scatter(eig.sum(axis=-1) / scale)
    A2 = _scatter((eig**2).sum(axis=-1) / scale**2)
    lambda12 = _scatter(eig[:, :2].sum(axis=-1) / scale if n >= 2 else eig[:, 0] / scale)
    kappa_max = _scatter(np.abs(eig).max(axis=-1) / scale)
    normals = _scatter(nu @ patch.frame.T, (n + 1,))
    metric = _scatter(g * scale**2, (n, n))
    area = _scatter(np.sqrt(np.linalg.det(g)) * scale**n)

    return CurvatureField(
        positions=patch.positions(),
        normals=normals,
        H=H,
        A2=A2,
        lambda12=lambda12,
        kappa_max=kappa_max,
        metric=metric,
        area_element=area,
        interior=interior,
    )


# ------------------------------------------------------------
# Curvature accessors
# ------------------------------------------------------------

@dataclass
class CurvatureSample:
    H: float
    A2: float
    lambda12: float
    normal: np.ndarray


def _check_interior_index(patch: SurfacePatch, index) -> tuple:
    index = tuple(int(i) for i in index)
    if len(index) != patch.dim:
        raise ValueError(f"index needs {patch.dim} components, got {len(index)}")
    for i, (k, ax) in enumerate(zip(index, patch.axes)):
        if not 0 <= k < ax.num:
            raise ValueError(f"index {index} is outside the grid on axis {i}")
        if not ax.periodic and not 1 <= k <= ax.num - 2:
            raise ValueError(f"mean curvature needs interior stencil: index {index} touches the boundary of axis {i}")
    return index


def mean_curvature(patch: SurfacePatch, index) -> float:
    """Mean curvature (sum convention, inward normal) at an interior grid node."""
    index = _check_interior_index(patch, index)
    return float(patch.curvature.H[index])


def curvature_at(patch: SurfacePatch, index) -> CurvatureSample:
    index = _check_interior_index(patch, index)
    cf = patch.curvature
    return CurvatureSample(
        H=float(cf.H[index]),
        A2=float(cf.A2[index]),
        lambda12=float(cf.lambda12[index]),
        normal=cf.normals[index].copy(),
    )


def translator_residual(patch: SurfacePatch, omega) -> float:
    """sup |H - <omega, nu>| over interior nodes."""
    omega = np.asarray(omega, dtype=float)
    cf = patch.curvature
    res = np.abs(cf.H - cf.normals @ omega)
    return float(np.nanmax(res))


# ------------------------------------------------------------
# Closeness to a model surface
# ------------------------------------------------------------

@dataclass
class ClosenessReport:
    graph_norm_C0: float
    graph_norm_C1: float
    graph_norm_C2: float
    matched: bool
    w: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {"C0": self.graph_norm_C0, "C1": self.graph_norm_C1,
                "C2": self.graph_norm_C2, "matched": self.matched}


class _ModelSurface:
    """Smooth (cubic spline) extension of a model patch to continuous parameters."""

    PAD = 4

    def __init__(self, model: SurfacePatch):
        self.model = model
        pad = [(self.PAD, self.PAD) if ax.periodic else (0, 0) for ax in model.axes]
        padded = np.pad(model.samples, pad, mode="wrap")
        self.coeffs = ndimage.spline_filter(padded, order=3, mode="mirror")
        self.offsets = np.array([self.PAD if ax.periodic else 0 for ax in model.axes], dtype=float)
        self.starts = np.array([ax.start for ax in model.axes])
        self.steps = np.array([ax.step for ax in model.axes])

    def wrap(self, p: np.ndarray) -> np.ndarray:
        p = p.copy()
        for i, ax in enumerate(self.model.axes):
            if ax.periodic:
                p[:, i] = ax.start + np.mod(p[:, i] - ax.start, ax.period)
        return p

    def inside(self, p: np.ndarray) -> np.ndarray:
        ok = np.ones(len(p), dtype=bool)
        for i, ax in enumerate(self.model.axes):
            if not ax.periodic:
                tol = 0.5 * ax.step
                ok &= (p[:, i] >= ax.start - tol) & (p[:, i] <= ax.stop + tol)
        return ok

    def values(self, p: np.ndarray) -> np.ndarray:
        idx = (p - self.starts) / self.steps + self.offsets
        return ndimage.map_coordinates(self.coeffs, idx.T, order=3, mode="mirror", prefilter=False)

    def point(self, p: np.ndarray) -> np.ndarray:
        p = self.wrap(p)
        return self.model.to_ambient(_embed(self.model.kind, p, self.values(p)))

    def jacobian(self, p: np.ndarray) -> np.ndarray:
        """(m, ambient, n) by centered differences of the spline embedding."""
        m, n = p.shape
        J = np.empty((m, n + 1, n))
        for i in range(n):
            delta = 1e-5 * self.steps[i]
            e = np.zeros(n)
            e[i] = delta
            J[:, :, i] = (self.point(p + e) - self.point(p - e)) / (2.0 * delta)
        return J

    def normal(self, p: np.ndarray) -> np.ndarray:
        """Inward unit normal of the model at continuous parameters."""
        J = self.jacobian(p)
        # tangents back in local coordinates for orientation
        T_local = np.einsum("ba,mbi->mia", self.model.frame, J) / self.model.scale
        N = _orient_inward(self.model.kind, self.wrap(p), generalized_cross(T_local))
        N /= np.linalg.norm(N, axis=-1)[:, None]
        return N @ self.model.frame.T


def _flat_params(patch: SurfacePatch) -> np.ndarray:
    return np.stack(patch.param_grid(), axis=-1).reshape(-1, patch.dim)


def project_to_model(points: np.ndarray, model: SurfacePatch):
    """
    Nearest-point projection of ambient points onto a model patch.

    Damped Gauss-Newton from the nearest model node, tolerance 1e-10 in
    ambient distance, 50 iterations. Returns (foot points, normals, signed
    offsets w) with ``points = foot + w * normal``.
    """
    points = np.asarray(points, dtype=float).reshape(-1, model.ambient_dim)
    surf = _ModelSurface(model)
    model_pts = model.positions().reshape(-1, model.ambient_dim)
    model_params = _flat_params(model)
    tree = cKDTree(model_pts)

    dist, idx = tree.query(points)
    p = model_params[idx].copy()
    exact = dist <= 1e-13 * (1.0 + np.linalg.norm(points, axis=-1))
    active = ~exact

    for iteration in range(PROJECTION_MAX_ITER):
        if not np.any(active):
            break
        pa = p[active]
        xa = points[active]
        r = xa - surf.point(pa)
        J = surf.jacobian(pa)
        JtJ = np.einsum("mai,maj->mij", J, J)
        Jtr = np.einsum("mai,ma->mi", J, r)
        delta = np.linalg.solve(JtJ, Jtr[..., None])[..., 0]

        old = np.linalg.norm(r, axis=-1)
        step = np.ones(len(pa))
        for _ in range(10):
            trial = pa + step[:, None] * delta
            new = np.linalg.norm(xa - surf.point(trial), axis=-1)
            worse = new > old * (1.0 + 1e-12) + 1e-15
            if not np.any(worse):
                break
            step[worse] *= 0.5
        pa = pa + step[:, None] * delta
        p[active] = pa

        moved = np.linalg.norm(np.einsum("mai,mi->ma", J, step[:, None] * delta), axis=-1)
        done = moved <= PROJECTION_TOL * (1.0 + old)
        still = np.flatnonzero(active)
        active[still[done]] = False
        logger.debug("projection iteration %d: %d nodes active", iteration, int(active.sum()))

    if np.any(active):
        raise ValueError(f"graph map undefined: projection did not converge at {int(active.sum())} nodes")
    if not np.all(surf.inside(p)):
        raise ValueError("graph map undefined: foot point leaves the model grid")

    foot = surf.point(p)
    normals = surf.normal(p)
    w = np.einsum("ma,ma->m", points - foot, normals)
    w[exact] = 0.0
    foot[exact] = points[exact]

    kappa = float(np.nanmax(model.curvature.kappa_max))
    if kappa > 0 and np.any(np.abs(w) * kappa >= 1.0 - 1e-9):
        raise ValueError("graph map undefined: point lies beyond the focal distance of the model")
    return foot, normals, w


def graph_norms(patch: SurfacePatch, w: np.ndarray, mask: np.ndarray | None = None):
    """Discrete C0, C1, C2 norms of a scalar field on the patch grid."""
    cf = patch.curvature
    region = cf.interior if mask is None else (cf.interior & mask)
    if not np.any(region):
        raise ValueError("graph norms need at least one interior node in the region")

    first, second = grid_derivatives(w, patch.axes)
    n = patch.dim
    # parameter derivatives -> metric norms (metric already carries scale**2)
    ginv = np.linalg.inv(cf.metric[region])
    grad = np.stack([d[region] for d in first], axis=-1)
    hess = np.stack([np.stack([second[i][j][region] for j in range(n)], axis=-1)
                     for i in range(n)], axis=-2)

    grad_norm = np.sqrt(np.einsum("mi,mij,mj->m", grad, ginv, grad))
    GH = ginv @ hess
    hess_norm = np.sqrt(np.abs(np.einsum("mij,mji->m", GH, GH)))

    c0 = float(np.max(np.abs(w[region])))
    c1 = c0 + float(np.max(grad_norm))
    c2 = c1 + float(np.max(hess_norm))
    return c0, c1, c2


def closeness_to_model(patch: SurfacePatch, model: SurfacePatch,
                       mask: np.ndarray | None = None) -> ClosenessReport:
    """
    Write ``patch`` as a normal graph ``x = y + w(y) nu(y)`` over ``model``
    and measure w.

    Raises:
        ValueError: "graph map undefined" when the projection is ambiguous,
            does not converge or leaves the model grid.
    """
    if patch.ambient_dim != model.ambient_dim:
        raise ValueError("patch and model live in different ambient dimensions")

    points = patch.positions().reshape(-1, patch.ambient_dim)
    if mask is not None:
        keep = np.asarray(mask, dtype=bool).ravel()
    else:
        keep = np.ones(len(points), dtype=bool)

    w_flat = np.zeros(len(points))
    _, _, w_sel = project_to_model(points[keep], model)
    w_flat[keep] = w_sel
    w = w_flat.reshape(patch.shape)

    c0, c1, c2 = graph_norms(patch, w, None if mask is None else np.asarray(mask, dtype=bool))
    matched = bool(np.isfinite(c0) and np.isfinite(c1) and np.isfinite(c2))
    return ClosenessReport(c0, c1, c2, matched, w)


# ------------------------------------------------------------
# Flows and parabolic neighborhoods
# ------------------------------------------------------------

@dataclass
class SpacetimePoint:
    position: np.ndarray
    time: float

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        self.time = float(self.time)
        if not (np.all(np.isfinite(self.position)) and np.isfinite(self.time)):
            raise ValueError("spacetime point needs finite coordinates")


@dataclass
class ParabolicNeighborhood:
    center: SpacetimePoint
    L: float
    T: float
    H_center: float

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError(f"L must be positive, got {self.L}")
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T}")
        if not self.H_center > 0:
            raise ValueError(f"mean curvature at the center must be positive, got {self.H_center}")

    @property
    def radius(self) -> float:
        return self.L / self.H_center

    @property
    def depth(self) -> float:
        return self.T / self.H_center**2

    @property
    def window(self) -> tuple[float, float]:
        return (self.center.time - self.depth, self.center.time)


@dataclass
class ClippedPatch:
    patch: SurfacePatch
    mask: np.ndarray
    time: float


@dataclass
class SurfaceFlow:
    """Time-indexed patches sharing one parametrization."""

    times: np.ndarray
    patches: list

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if len(self.times) != len(self.patches) or len(self.patches) == 0:
            raise ValueError("flow needs one patch per time slice")
        first = self.patches[0]
        for p in self.patches[1:]:
            if p.kind != first.kind or p.shape != first.shape:
                raise ValueError("all flow slices must share kind and grid")
        order = np.argsort(self.times)
        self.times = self.times[order]
        self.patches = [self.patches[i] for i in order]

    def slice_index(self, time: float, tol: float = 1e-9) -> int:
        hits = np.flatnonzero(np.abs(self.times - time) <= tol * (1.0 + abs(time)))
        if len(hits) == 0:
            raise ValueError(f"time {time} is not a stored slice of the flow")
        return int(hits[0])


def _boundary_sides(patch: SurfacePatch):
    """(axis, side) pairs that are real grid boundaries."""
    sides = []
    for i, ax in enumerate(patch.axes):
        if ax.periodic:
            continue
        for side in (0, -1):
            if patch.kind == "revolution" and i == 0 and side == 0 and ax.start <= ax.step:
                # first node within one cell of the rotation axis
                continue
            sides.append((i, side))
    return sides


def extract_parabolic_neighborhood(flow: SurfaceFlow, center: SpacetimePoint,
                                   L: float, T: float):
    """
    Restrict ``flow`` to the parabolic neighborhood of ``center``.

    The spatial ball (radius L/H, Euclidean in R^{n+1}) is taken on the
    center slice and carried to earlier slices through the shared
    parametrization; slices in [t - T/H^2, t] are kept.

    Returns:
        (ParabolicNeighborhood, list of ClippedPatch), latest slice last.

    Raises:
        ValueError: center off the flow, H <= 0 at the center, or the region
            exceeds the stored grid (deficit listed per axis and in time).
    """
    k = flow.slice_index(center.time)
    patch = flow.patches[k]
    cf = patch.curvature
    pts = cf.positions.reshape(-1, patch.ambient_dim)

    dist, flat = cKDTree(pts).query(center.position)
    if dist > 1e-6 * (1.0 + np.linalg.norm(center.position)):
        raise ValueError(f"center is not on the flow (nearest node at distance {dist:.3e})")
    index = np.unravel_index(flat, patch.shape)
    H = cf.H[index]
    if not np.isfinite(H):
        raise ValueError("center needs interior stencil to evaluate H")

    nbhd = ParabolicNeighborhood(center, float(L), float(T), float(H))

    deficits = []
    r = np.linalg.norm(cf.positions - center.position, axis=-1)
    ball = r <= nbhd.radius

    for axis, side in _boundary_sides(patch):
        edge = [slice(None)] * patch.dim
        edge[axis] = side
        inner = list(edge)
        inner[axis] = 1 if side == 0 else -2
        edge, inner = tuple(edge), tuple(inner)
        inside = ball[edge]
        if np.any(inside):
            # ambient length per parameter unit across the last cell
            speed = np.linalg.norm(cf.positions[edge] - cf.positions[inner], axis=-1) / patch.axes[axis].step
            need = float(np.max((nbhd.radius - r[edge][inside]) / np.maximum(speed[inside], 1e-300)))
            where = "start" if side == 0 else "stop"
            deficits.append(f"axis {axis} ({where}): short by {need:.4g} parameter units")

    t_lo = nbhd.window[0]
    if flow.times[0] > t_lo + 1e-9 * (1.0 + abs(t_lo)):
        deficits.append(f"time: stored slices start at {flow.times[0]:.6g}, need {t_lo:.6g}")

    if deficits:
        raise ValueError("Parabolic neighborhood exceeds the stored grid:\n"
                         + "\n".join("  - " + d for d in deficits))

    keep = [i for i, t in enumerate(flow.times)
            if t_lo - 1e-9 * (1.0 + abs(t_lo)) <= t <= center.time + 1e-12]
    clipped = [ClippedPatch(flow.patches[i], ball.copy(), float(flow.times[i])) for i in keep]
    logger.info("neighborhood: radius %.4g, depth %.4g, %d slices, %d nodes per slice",
                nbhd.radius, nbhd.depth, len(clipped), int(ball.sum()))
    return nbhd, clipped
