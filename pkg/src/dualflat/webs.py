"""Webs on the simplex and the plane, Ceva's relation, and WDVV residuals."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .expr import (Expression, compile_expr, const, derivative, func, parse,
                   substitute, var, variables)

__all__ = [
    "SimplexPoint", "CevianFrame", "PlanarThreeWeb", "FrobeniusPotential",
    "HexagonalityReport", "WebTraversalError", "GeneralPositionError",
    "cevian_frame", "planar_chart", "ceva_product", "cevian_feet", "concurrent_to_parallel",
    "apply_projective", "parallel_slope_spread", "cevian_web", "projective_image",
    "hexagon_closure", "web_curvature", "wdvv_residual", "hexagonality_certificate",
    "defect_tol", "root_bracketed", "CURVATURE_TOL", "WDVV_TOL", "DEFECT_FLOOR",
]

CURVATURE_TOL = 1e-7
WDVV_TOL = 1e-9
ROOT_TOL = 1e-12


class WebTraversalError(ArithmeticError):
    pass


class GeneralPositionError(ValueError):
    pass


# --- simplex ----------------------------------------------------------------

@dataclass(frozen=True)
class SimplexPoint:
    """Point of the open simplex in full barycentric coordinates."""

    p: np.ndarray

    def __post_init__(self):
        p = np.array(self.p, dtype=float).reshape(-1)
        if p.size < 2:
            raise ValueError("need at least two barycentric coordinates")
        if not np.all(np.isfinite(p)) or np.any(p <= 0) or np.any(p >= 1):
            raise ValueError("barycentric coordinates must lie strictly in (0, 1)")
        total = math.fsum(p)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"barycentric coordinates sum to {total!r}, not 1")
        p = p / total
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @property
    def dim(self) -> int:
        return self.p.size - 1


@dataclass(frozen=True)
class CevianFrame:
    """Row k of each array belongs to vertex e_k."""

    y: np.ndarray
    z: np.ndarray
    q: np.ndarray
    x: np.ndarray


def cevian_frame(p) -> CevianFrame:
    sp = p if isinstance(p, SimplexPoint) else SimplexPoint(p)
    pv = sp.p
    d = pv.size
    eye = np.eye(d)
    y = eye - pv
    z = y / (1.0 - pv)[:, None]
    q = np.tile(pv, (d, 1))
    np.fill_diagonal(q, 0.0)
    q = q / (1.0 - pv)[:, None]
    x = pv[:, None] * y
    return CevianFrame(y=y, z=z, q=q, x=x)


def planar_chart(points) -> np.ndarray:
    """Affine chart of the 2-simplex: drop the last barycentric coordinate."""
    pts = np.asarray(points, dtype=float)
    if pts.shape[-1] != 3:
        raise ValueError("planar chart needs three barycentric coordinates")
    return pts[..., :2]


# --- planar Ceva --------------------------------------------------------------

def _signed_ratio(foot, a, b, tol):
    """(foot -> a) / (foot -> b) for collinear points."""
    ab = b - a
    length = np.hypot(*ab)
    if length == 0:
        raise ValueError("degenerate triangle side")
    fa, fb = a - foot, b - foot
    off = abs(ab[0] * (foot - a)[1] - ab[1] * (foot - a)[0]) / length
    if off > tol:
        raise ValueError(f"foot {foot.tolist()} is {off:.3e} off its side line")
    if np.hypot(*fa) <= tol * length or np.hypot(*fb) <= tol * length:
        raise ValueError("foot coincides with a vertex; the ratio is undefined")
    return float(fa @ fb) / float(fb @ fb)


def ceva_product(triangle, feet, tol: float = 1e-10) -> float:
    """Signed product (A'B/A'C)(B'C/B'A)(C'A/C'B).

    ``feet`` are A' on BC, B' on CA, C' on AB. The product is -1 exactly when
    AA', BB', CC' are concurrent or parallel.
    """
    A, B, C = (np.asarray(v, dtype=float) for v in triangle)
    Ap, Bp, Cp = (np.asarray(v, dtype=float) for v in feet)
    scale = max(np.hypot(*(B - A)), np.hypot(*(C - B)), np.hypot(*(A - C)))
    t = tol * max(scale, 1.0)
    return (_signed_ratio(Ap, B, C, t) * _signed_ratio(Bp, C, A, t)
            * _signed_ratio(Cp, A, B, t))


def _line_intersection(p1, d1, p2, d2):
    m = np.column_stack([d1, -d2])
    s = np.linalg.solve(m, p2 - p1)
    return p1 + s[0] * d1


def cevian_feet(triangle, point=None, direction=None):
    """Feet of the Cevians through ``point``, or parallel to ``direction``."""
    A, B, C = (np.asarray(v, dtype=float) for v in triangle)
    if (point is None) == (direction is None):
        raise ValueError("give exactly one of point or direction")
    out = []
    for V, P, Q in ((A, B, C), (B, C, A), (C, A, B)):
        d = (np.asarray(point, dtype=float) - V) if direction is None \
            else np.asarray(direction, dtype=float)
        out.append(_line_intersection(V, d, P, Q - P))
    return out


def apply_projective(H, points) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    hom = np.column_stack([pts, np.ones(len(pts))]) @ np.asarray(H).T
    return hom[:, :2] / hom[:, 2:3]


def concurrent_to_parallel(triangle, p) -> np.ndarray:
    """Projective map sending ``p`` to infinity.

    The preimage of the line at infinity is the line through ``p`` parallel to
    BC, which misses all three vertices; the Cevians through ``p`` therefore
    become parallel lines, one through the image of each vertex. ``p`` given
    in homogeneous form with last coordinate 0 is already at infinity and the
    identity is returned.
    """
    p = np.asarray(p, dtype=float).reshape(-1)
    if p.size == 3:
        if p[2] == 0:
            return np.eye(3)
        p = p[:2] / p[2]
    A, B, C = (np.asarray(v, dtype=float) for v in triangle)
    lam = _barycentric(A, B, C, p)
    if np.any(lam <= 0):
        raise ValueError("p must lie strictly inside the triangle")
    d = C - B
    normal = np.array([-d[1], d[0]])
    ell = np.array([normal[0], normal[1], -normal @ p])
    ell = ell / np.max(np.abs(ell))
    best = None
    for i, j in itertools.combinations(range(3), 2):
        H = np.vstack([np.eye(3)[i], np.eye(3)[j], ell])
        if best is None or abs(np.linalg.det(H)) > abs(np.linalg.det(best)):
            best = H
    return best


def _barycentric(A, B, C, p):
    m = np.array([[A[0], B[0], C[0]], [A[1], B[1], C[1]], [1.0, 1.0, 1.0]])
    return np.linalg.solve(m, np.array([p[0], p[1], 1.0]))


def parallel_slope_spread(H, triangle, p, samples: int = 10) -> float:
    """Largest angle (radians) between images of sampled Cevian points.

    For each vertex, ``samples`` points on its Cevian through ``p`` (avoiding
    ``p``) are mapped by H; every image segment from the vertex image must
    share one direction.
    """
    A, B, C = (np.asarray(v, dtype=float) for v in triangle)
    p = np.asarray(p, dtype=float)
    feet = cevian_feet((A, B, C), point=p)
    angles = []
    for V, F in zip((A, B, C), feet):
        ts = np.linspace(0.1, 0.9, samples)
        ts = ts[np.abs(V + ts[:, None] * (F - V) - p).sum(axis=1) > 1e-6]
        pts = V + ts[:, None] * (F - V)
        img = apply_projective(H, pts) - apply_projective(H, V)[0]
        angles.extend(np.arctan2(img[:, 1], img[:, 0]) % np.pi)
    angles = np.asarray(angles)
    ref = angles[0]
    diff = (angles - ref + np.pi / 2) % np.pi - np.pi / 2
    return float(np.max(np.abs(diff)))


# --- planar three-webs ------------------------------------------------------------

def _as_expr(e):
    return parse(e) if isinstance(e, str) else e


@dataclass
class PlanarThreeWeb:
    u: Expression
    v: Expression
    w: Expression
    domain: tuple = ((0.0, 2.0), (0.0, 2.0))
    names: tuple = ("x", "y")
    _fns: list = field(init=False, repr=False)
    _grads: list = field(init=False, repr=False)

    def __post_init__(self):
        self.u, self.v, self.w = (_as_expr(e) for e in (self.u, self.v, self.w))
        (x0, x1), (y0, y1) = self.domain
        if not (x0 < x1 and y0 < y1):
            raise ValueError("domain bounds must be increasing")
        self.domain = ((float(x0), float(x1)), (float(y0), float(y1)))
        allowed = set(self.names)
        for e in self.foliations:
            extra = variables(e) - allowed
            if extra:
                raise ValueError(f"foliation uses unknown variables {sorted(extra)}")
        a, b = self.names
        self._fns = [compile_expr(e) for e in self.foliations]
        self._grads = [(compile_expr(derivative(e, a)), compile_expr(derivative(e, b)))
                       for e in self.foliations]

    @property
    def foliations(self):
        return (self.u, self.v, self.w)

    def value(self, k: int, pt) -> float:
        return self._fns[k](self._bind(pt))

    def gradient(self, k: int, pt) -> np.ndarray:
        b = self._bind(pt)
        gx, gy = self._grads[k]
        return np.array([gx(b), gy(b)])

    def _bind(self, pt):
        return {self.names[0]: float(pt[0]), self.names[1]: float(pt[1])}

    def contains(self, pt, margin: float = 0.0) -> bool:
        (x0, x1), (y0, y1) = self.domain
        return (x0 + margin <= pt[0] <= x1 - margin) and (y0 + margin <= pt[1] <= y1 - margin)

    def check_general_position(self, pt, tol: float = 1e-10) -> None:
        grads = [self.gradient(k, pt) for k in range(3)]
        for k, g in enumerate(grads):
            if np.hypot(*g) <= tol:
                raise GeneralPositionError(f"foliation {k + 1} is singular at {list(pt)}")
        for i, j in itertools.combinations(range(3), 2):
            cross = grads[i][0] * grads[j][1] - grads[i][1] * grads[j][0]
            if abs(cross) <= tol * np.hypot(*grads[i]) * np.hypot(*grads[j]):
                raise GeneralPositionError(
                    f"foliations {i + 1} and {j + 1} are tangent at {list(pt)}")

    def to_json(self) -> dict:
        return {"u": str(self.u), "v": str(self.v), "w": str(self.w),
                "domain": [list(self.domain[0]), list(self.domain[1])]}


def root_bracketed(g, a: float, b: float, tol: float = ROOT_TOL, ga=None, gb=None) -> float:
    """Root of ``g`` in [a, b] by bisection refined with secant steps.

    A secant step is tried first on every iteration; if it fails to halve the
    bracket a bisection step follows, so the bracket always shrinks at least
    geometrically.
    """
    if a > b:
        a, b, ga, gb = b, a, gb, ga
    fa = g(a) if ga is None else ga
    fb = g(b) if gb is None else gb
    if fa == 0:
        return a
    if fb == 0:
        return b
    if (fa > 0) == (fb > 0):
        raise WebTraversalError("root is not bracketed")
    for _ in range(300):
        width = b - a
        if width <= tol * max(1.0, abs(a), abs(b)):
            break
        s = a - fa * width / (fb - fa)
        if not a < s < b:
            s = 0.5 * (a + b)
        fs = g(s)
        if fs == 0:
            return s
        if (fs > 0) == (fa > 0):
            a, fa = s, fs
        else:
            b, fb = s, fs
        if b - a > 0.5 * width:
            m = 0.5 * (a + b)
            fm = g(m)
            if fm == 0:
                return m
            if (fm > 0) == (fa > 0):
                a, fa = m, fm
            else:
                b, fb = m, fm
    s = a - fa * (b - a) / (fb - fa)
    return s if a <= s <= b else 0.5 * (a + b)


def _bracket(g, t0, lo, hi, delta):
    """Smallest symmetric expansion around t0 inside [lo, hi] that brackets a root."""
    g0 = g(t0)
    if g0 == 0:
        return t0, t0, g0, g0
    while True:
        moved = False
        for t in (t0 + delta, t0 - delta):
            if lo <= t <= hi:
                moved = True
                gt = g(t)
                if gt == 0 or (gt > 0) != (g0 > 0):
                    return t0, t, g0, gt
        if not moved:
            raise WebTraversalError("leaf leaves the domain before reaching its target")
        delta *= 2.0
        if t0 + delta > hi and t0 - delta < lo:
            # one last probe at the domain edges
            for t in (hi, lo):
                gt = g(t)
                if gt == 0 or (gt > 0) != (g0 > 0):
                    return t0, t, g0, gt
            raise WebTraversalError("leaf leaves the domain before reaching its target")


def _follow_leaf(web: PlanarThreeWeb, P, k: int, m: int, target: float, scale: float):
    """Point on the leaf of foliation k through P where foliation m equals target."""
    c_k = web.value(k, P)
    grad = web.gradient(k, P)
    (x0, x1), (y0, y1) = web.domain
    # parametrize the leaf by the coordinate it is a graph over
    if abs(grad[0]) >= abs(grad[1]):
        free, lo_f, hi_f, lo_t, hi_t = 0, x0, x1, y0, y1
    else:
        free, lo_f, hi_f, lo_t, hi_t = 1, y0, y1, x0, x1
    other = 1 - free
    last = [float(P[free])]

    def point(t):
        def h(s):
            pt = [0.0, 0.0]
            pt[free], pt[other] = s, t
            return web.value(k, pt) - c_k
        a, b, ga, gb = _bracket(h, last[0], lo_f, hi_f, 1e-3 * scale)
        s = a if ga == 0 else root_bracketed(h, a, b, ga=ga, gb=gb)
        last[0] = s
        pt = [0.0, 0.0]
        pt[free], pt[other] = s, t
        return pt

    def g(t):
        return web.value(m, point(t)) - target

    a, b, ga, gb = _bracket(g, float(P[other]), lo_t, hi_t, 0.25 * scale)
    t = a if ga == 0 else root_bracketed(g, a, b, ga=ga, gb=gb)
    pt = np.array(point(t))
    if not web.contains(pt):
        raise WebTraversalError(f"traversal left the domain at {pt.tolist()}")
    return pt


def hexagon_closure(web: PlanarThreeWeb, start, step: float, return_path: bool = False):
    """Closure defect of the hexagon traversal centred at ``start``.

    With L1, L2, L3 the leaves of the three foliations through the centre,
    the walk starts on L2 where the first web function has advanced by
    ``step`` and alternately follows foliations 1, 2, 3, 1, 2, 3, landing on
    L3, L1, L2 in turn. The defect is the distance between the first and last
    points; it vanishes for hexagonal webs.
    """
    O = np.asarray(start, dtype=float)
    if step <= 0:
        raise ValueError("step must be positive")
    if not web.contains(O, margin=6 * step):
        raise ValueError("start must be inside the domain with margin 6*step")
    web.check_general_position(O)
    levels = [web.value(k, O) for k in range(3)]
    scale = step
    P = _follow_leaf(web, O, 1, 0, levels[0] + step, scale)
    path = [P]
    landing = {0: 2, 1: 0, 2: 1}
    for k in (0, 1, 2, 0, 1, 2):
        m = landing[k]
        P = _follow_leaf(web, P, k, m, levels[m], scale)
        path.append(P)
    defect = float(np.hypot(*(path[-1] - path[0])))
    if return_path:
        return defect, np.array(path)
    return defect


def _curvature_expr(web: PlanarThreeWeb) -> Expression:
    """Blaschke curvature as an expression in the plane coordinates.

    With the first two web functions as coordinates (U, V) and the third as
    f(U, V), K = d^2/dU dV log(f_U / f_V). f_U and f_V come from the chain
    rule, and the coordinate fields d/dU, d/dV are written in x, y.
    """
    a, b = web.names
    u, v, w = web.foliations
    ux, uy, vx, vy, wx, wy = (derivative(e, n) for e in (u, v, w) for n in (a, b))
    jac = ux * vy - uy * vx
    h = func("log", (wx * vy - wy * vx) / (ux * wy - uy * wx))

    def d_U(e):
        return (vy * derivative(e, a) - vx * derivative(e, b)) / jac

    def d_V(e):
        return (ux * derivative(e, b) - uy * derivative(e, a)) / jac

    return d_V(d_U(h))


def _check_jacobian(web, pt):
    J = np.vstack([web.gradient(0, pt), web.gradient(1, pt)])
    det = np.linalg.det(J)
    if abs(det) <= 1e-10 * max(1.0, np.abs(J).max() ** 2):
        raise GeneralPositionError(f"first two foliations are degenerate at {list(pt)}")
    return J


def web_curvature(web: PlanarThreeWeb, point, method: str = "symbolic", fd_step: float = 1e-4) -> float:
    """Blaschke curvature of the web at ``point``.

    ``method="symbolic"`` differentiates the normal form exactly.
    ``method="numeric"`` inverts (x, y) -> (u, v) by Newton around the point
    and takes a central mixed difference of log(f_U / f_V) in (u, v).
    """
    pt = np.asarray(point, dtype=float)
    _check_jacobian(web, pt)
    if method == "symbolic":
        if getattr(web, "_curv", None) is None:
            web._curv = compile_expr(_curvature_expr(web))
        return float(web._curv(web._bind(pt)))
    if method != "numeric":
        raise ValueError(f"unknown method {method!r}")
    base = np.array([web.value(0, pt), web.value(1, pt)])

    def h(du, dv):
        target = base + (du, dv)
        q = pt.copy()
        for _ in range(50):
            r = np.array([web.value(0, q), web.value(1, q)]) - target
            J = _check_jacobian(web, q)
            dq = np.linalg.solve(J, r)
            q = q - dq
            if np.max(np.abs(dq)) < 1e-15 * max(1.0, np.abs(q).max()):
                break
        J = _check_jacobian(web, q)
        f_uv = np.linalg.solve(J.T, web.gradient(2, q))
        return math.log(abs(f_uv[0] / f_uv[1]))

    s = fd_step
    return (h(s, s) - h(s, -s) - h(-s, s) + h(-s, -s)) / (4 * s * s)


DEFECT_FLOOR = 1e-10


def defect_tol(step: float) -> float:
    """Closure tolerance: ten times the defect of a web at the curvature threshold.

    A web of curvature K leaves a gap of roughly |K| step^3 / 2, so the cubic
    scale is tied to CURVATURE_TOL; the floor sits above root-finding noise.
    """
    return max(10.0 * CURVATURE_TOL * step ** 3, DEFECT_FLOOR)


@dataclass
class HexagonalityReport:
    max_abs_curvature: float
    max_defect: float
    step: float
    defect_tol: float
    curvature_hexagonal: bool
    closure_hexagonal: bool
    points: list

    @property
    def verdict(self) -> str:
        if self.curvature_hexagonal and self.closure_hexagonal:
            return "hexagonal"
        if not self.curvature_hexagonal and not self.closure_hexagonal:
            return "not hexagonal"
        return "conflict"

    @property
    def diagnostic(self) -> str | None:
        if self.verdict != "conflict":
            return None
        which = "curvature" if self.curvature_hexagonal else "closure"
        return f"only the {which} test reports a hexagonal web"

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "diagnostic": self.diagnostic,
            "max_abs_curvature": self.max_abs_curvature,
            "max_defect": self.max_defect,
            "step": self.step,
            "defect_tol": self.defect_tol,
            "curvature_tol": CURVATURE_TOL,
            "points": self.points,
        }


def _grid_points(web, grid, step):
    if isinstance(grid, (int, np.integer)):
        m = int(grid)
        if m < 1:
            raise ValueError("grid must have at least one point per axis")
        (x0, x1), (y0, y1) = web.domain
        margin = 6 * step
        if x1 - x0 <= 2 * margin or y1 - y0 <= 2 * margin:
            raise ValueError("domain too small for the requested step")
        xs = np.linspace(x0 + margin, x1 - margin, m + 2)[1:-1]
        ys = np.linspace(y0 + margin, y1 - margin, m + 2)[1:-1]
        return [(float(a), float(b)) for b in ys for a in xs]
    return [(float(a), float(b)) for a, b in grid]


def hexagonality_certificate(web: PlanarThreeWeb, grid=3, step: float = 0.1) -> HexagonalityReport:
    """Curvature and hexagon-closure tests over a grid of sample points.

    ``grid`` is either a number of points per axis (placed inside the domain
    with margin 6*step) or an explicit sequence of points.
    """
    pts = _grid_points(web, grid, step)
    rows = []
    for pt in pts:
        K = web_curvature(web, pt)
        d = hexagon_closure(web, pt, step)
        rows.append({"point": list(pt), "curvature": K, "defect": d})
    kmax = max(abs(r["curvature"]) for r in rows)
    dmax = max(r["defect"] for r in rows)
    tol = defect_tol(step)
    return HexagonalityReport(kmax, dmax, step, tol, kmax < CURVATURE_TOL, dmax < tol, rows)


def cevian_web(triangle, domain=None, names=("x", "y")) -> PlanarThreeWeb:
    """Three-web whose leaves are the Cevians (lines through each vertex).

    Foliation k is log(l_{k+1} / l_{k+2}) in barycentric coordinates l, so
    the three functions sum to zero: the web is parallel in these charts.
    """
    A, B, C = (np.asarray(v, dtype=float) for v in triangle)
    m = np.array([[A[0], B[0], C[0]], [A[1], B[1], C[1]], [1.0, 1.0, 1.0]])
    inv = np.linalg.inv(m)
    x, y = var(names[0]), var(names[1])
    lam = [const(inv[i, 0]) * x + const(inv[i, 1]) * y + const(inv[i, 2]) for i in range(3)]
    folios = [func("log", lam[(k + 1) % 3] / lam[(k + 2) % 3]) for k in range(3)]
    if domain is None:
        g = (A + B + C) / 3
        r = 0.15 * min(np.hypot(*(B - A)), np.hypot(*(C - B)), np.hypot(*(A - C)))
        domain = ((g[0] - r, g[0] + r), (g[1] - r, g[1] + r))
    return PlanarThreeWeb(*folios, domain=domain, names=names)


def projective_image(web: PlanarThreeWeb, H, domain) -> PlanarThreeWeb:
    """The web transported by the projective map H (leaves map to leaves)."""
    Hinv = np.linalg.inv(np.asarray(H, dtype=float))
    x, y = var(web.names[0]), var(web.names[1])
    hom = [const(Hinv[i, 0]) * x + const(Hinv[i, 1]) * y + const(Hinv[i, 2]) for i in range(3)]
    mapping = {web.names[0]: hom[0] / hom[2], web.names[1]: hom[1] / hom[2]}
    folios = [substitute(e, mapping) for e in web.foliations]
    return PlanarThreeWeb(*folios, domain=domain, names=web.names)


# --- WDVV --------------------------------------------------------------------------

@dataclass
class FrobeniusPotential:
    phi: Expression
    metric: np.ndarray
    names: tuple | None = None

    def __post_init__(self):
        self.phi = _as_expr(self.phi)
        g = np.array(self.metric, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise ValueError("metric must be a square matrix")
        if not np.allclose(g, g.T, rtol=0, atol=1e-12):
            raise ValueError("metric must be symmetric")
        self.metric = g
        n = g.shape[0]
        if self.names is None:
            self.names = tuple(f"x{i + 1}" for i in range(n))
        if len(self.names) != n:
            raise ValueError("one variable name per metric row is required")
        extra = variables(self.phi) - set(self.names)
        if extra:
            raise ValueError(f"potential uses unknown variables {sorted(extra)}")
        self.condition = float(np.linalg.cond(g))
        if not np.isfinite(self.condition) or self.condition > 1e12:
            raise np.linalg.LinAlgError(f"metric is singular (condition number {self.condition:.3e})")
        self.inverse = np.linalg.inv(g)
        self._third = {}
        for a, b, c in itertools.combinations_with_replacement(range(n), 3):
            e = derivative(derivative(derivative(self.phi, self.names[a]), self.names[b]), self.names[c])
            self._third[(a, b, c)] = compile_expr(e)

    @property
    def n(self) -> int:
        return self.metric.shape[0]

    def third_derivatives(self, point) -> np.ndarray:
        bind = dict(zip(self.names, map(float, point)))
        n = self.n
        t = np.empty((n, n, n))
        for key, fn in self._third.items():
            val = fn(bind)
            for perm in set(itertools.permutations(key)):
                t[perm] = val
        return t


def wdvv_residual(pot: FrobeniusPotential, point: Sequence[float]) -> float:
    """max over (a,b,c,d) of |Phi_abe g^ef Phi_fcd - Phi_bce g^ef Phi_fad|."""
    if len(point) != pot.n:
        raise ValueError(f"point must have {pot.n} coordinates")
    t = pot.third_derivatives(point)
    lhs = np.einsum("abe,ef,fcd->abcd", t, pot.inverse, t)
    rhs = np.einsum("bce,ef,fad->abcd", t, pot.inverse, t)
    return float(np.max(np.abs(lhs - rhs)))
