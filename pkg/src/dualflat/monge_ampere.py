"""Monge-Ampere diagnostics for the dual potentials, and 1-D Brenier transport."""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Hashable, Sequence

import numpy as np

from . import exp_family as ef
from .expr import Expression, ExprDomainError, compile_expr, parse

__all__ = [
    "MAReport", "DiscreteMeasure", "Transport1D", "MassMismatchError",
    "SingularHessianError", "ma_report", "dual_hessian", "pushforward",
    "brenier_1d", "FD_STEP",
]

FD_STEP = 1e-5


class SingularHessianError(ArithmeticError):
    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class MassMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class MAReport:
    det_primal: float
    det_dual: float
    product_residual: float
    identity_residual: float

    def to_json(self) -> dict:
        return {k: float(getattr(self, k)) for k in
                ("det_primal", "det_dual", "product_residual", "identity_residual")}


def dual_hessian(space: ef.StateSpace, theta, step: float = FD_STEP) -> np.ndarray:
    """Hessian of psi* at eta(theta), by differences of to_theta.

    Five-point central stencil per column. Each solve starts from ``theta``
    itself, so a perturbation of size ``step`` costs one or two Newton steps.
    """
    th = ef._coords(space, theta)
    eta = ef.to_eta(space, th).coords
    if eta.min() <= 2 * step or eta.max() >= 1 - 2 * step:
        raise ValueError(f"eta lies within {2 * step:g} of the boundary; "
                         "the difference stencil would leave the moment polytope")
    d = space.dim
    h = np.empty((d, d))
    for j in range(d):
        e = np.zeros(d)
        e[j] = step

        def solve(k):
            return ef.to_theta(space, eta + k * e, theta0=th, tol=1e-13).coords
        h[:, j] = (-solve(2) + 8 * solve(1) - 8 * solve(-1) + solve(-2)) / (12 * step)
    return 0.5 * (h + h.T)


def ma_report(space: ef.StateSpace, theta) -> MAReport:
    """Determinants of Hess psi (exact) and Hess psi* (finite differences).

    For a dually flat pair the two Hessians are mutually inverse, so both
    residuals vanish up to discretization error.
    """
    g = ef.fisher_metric(space, theta).matrix
    cond = np.linalg.cond(g)
    if not np.isfinite(cond) or cond > 1e14:
        raise SingularHessianError(f"Fisher metric is numerically singular (cond {cond:.3e})",
                                   condition=float(cond))
    g_dual = dual_hessian(space, theta)
    det_p = float(np.linalg.det(g))
    det_d = float(np.linalg.det(g_dual))
    if det_p <= 0 or det_d <= 0:
        raise SingularHessianError("Hessian determinant is not positive", condition=float(cond))
    return MAReport(
        det_primal=det_p,
        det_dual=det_d,
        product_residual=abs(det_p * det_d - 1.0),
        identity_residual=float(np.max(np.abs(g @ g_dual - np.eye(space.dim)))),
    )


# --- measures -----------------------------------------------------------------

@dataclass(frozen=True)
class DiscreteMeasure:
    support: tuple
    mass: tuple

    def __post_init__(self):
        support, mass = tuple(self.support), tuple(self.mass)
        if len(support) != len(mass):
            raise ValueError("support and mass have different lengths")
        if any(m < 0 for m in mass):
            raise ValueError("masses must be nonnegative")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "mass", mass)

    @property
    def total(self):
        if all(isinstance(m, (int, Fraction)) for m in self.mass):
            return sum(self.mass, Fraction(0))
        return math.fsum(self.mass)

    def as_dict(self) -> dict:
        return dict(zip(self.support, self.mass))


def _sum(values):
    if all(isinstance(v, (int, Fraction)) for v in values):
        return sum(values, Fraction(0))
    return math.fsum(values)


def pushforward(mu: DiscreteMeasure, T: Callable[[Hashable], Hashable] | dict) -> DiscreteMeasure:
    """Image measure: the mass of each label y is mu[T^{-1}(y)].

    Labels keep the order of first appearance. Float masses are merged with
    fsum; Fraction/int masses exactly.
    """
    fn = T.__getitem__ if isinstance(T, dict) else T
    groups: dict = defaultdict(list)
    for x, m in zip(mu.support, mu.mass):
        groups[fn(x)].append(m)
    labels = list(groups)
    return DiscreteMeasure(tuple(labels), tuple(_sum(groups[y]) for y in labels))


# --- one-dimensional transport ----------------------------------------------------

@dataclass
class Transport1D:
    grid: np.ndarray
    map_values: np.ndarray
    target_grid: np.ndarray
    potential_values: np.ndarray
    det_hessian: np.ndarray
    density_ratio: np.ndarray
    identity_errors: dict = field(default_factory=dict)
    hessian_error: float = 0.0
    mass: tuple = (1.0, 1.0)

    @property
    def max_identity_error(self) -> float:
        return max(self.identity_errors.values())

    def to_json(self) -> dict:
        return {
            "grid_size": int(self.grid.size),
            "source_interval": [float(self.grid[0]), float(self.grid[-1])],
            "target_interval": [float(self.target_grid[0]), float(self.target_grid[-1])],
            "source_mass": float(self.mass[0]),
            "target_mass": float(self.mass[1]),
            "identity_errors": {k: float(v) for k, v in self.identity_errors.items()},
            "max_identity_error": float(self.max_identity_error),
            "hessian_error": float(self.hessian_error),
        }

    def csv_rows(self):
        """Rows (x, T(x), y, V(y), detD2V(y), r(y)); grids share one length."""
        return zip(self.grid, self.map_values, self.target_grid,
                   self.potential_values, self.det_hessian, self.density_ratio)


def _density_values(expr, grid, name):
    if isinstance(expr, str):
        expr = parse(expr)
    fn = compile_expr(expr)
    out = np.empty(grid.size)
    for i, t in enumerate(grid):
        # densities may be written in x or y; bind both
        out[i] = fn({"x": t, "y": t, "t": t})
    if not np.all(np.isfinite(out)):
        raise ExprDomainError(f"{name} density is not finite on its interval")
    if np.any(out < 0):
        raise ValueError(f"{name} density is negative on its interval")
    return out, fn


def _check_plateaus(values, name):
    zero = values == 0
    run = 0
    for z in zero:
        run = run + 1 if z else 0
        # three zero nodes in a row = CDF flat across two cells
        if run >= 3:
            raise ValueError(f"{name} density vanishes on more than one grid cell; "
                             "the CDF is not invertible")


def _cdf(grid, dens):
    h = np.diff(grid)
    return np.concatenate([[0.0], np.cumsum(0.5 * h * (dens[:-1] + dens[1:]))])


def _invert_cdf(grid, dens, cdf, levels, tol=1e-12):
    """Solve F(y) = level on the piecewise-quadratic CDF by bisection.

    F is the exact integral of the piecewise-linear density interpolant, which
    is what the trapezoid accumulation computes at the nodes.
    """
    levels = np.clip(levels, 0.0, cdf[-1])
    cell = np.clip(np.searchsorted(cdf, levels, side="right") - 1, 0, grid.size - 2)
    a = grid[cell].copy()
    b = grid[cell + 1].copy()
    x0, f0, f1, c0 = grid[cell], dens[cell], dens[cell + 1], cdf[cell]
    width = grid[cell + 1] - grid[cell]

    def F(y):
        s = y - x0
        return c0 + f0 * s + 0.5 * (f1 - f0) / width * s * s

    while np.max(b - a) > tol:
        mid = 0.5 * (a + b)
        below = F(mid) < levels
        a = np.where(below, mid, a)
        b = np.where(below, b, mid)
        if np.all(b - a <= tol):
            break
        if np.all(mid == a) or np.all(mid == b):
            break
    return 0.5 * (a + b)


def _trapezoid(values, grid):
    return float(np.sum(0.5 * np.diff(grid) * (values[:-1] + values[1:])))


def brenier_1d(source_density: Expression | str, target_density: Expression | str,
               source_interval: Sequence[float], target_interval: Sequence[float],
               grid_size: int = 1024, mass_tol: float = 1e-6) -> Transport1D:
    """Monotone transport between two densities on intervals.

    T = F_target^{-1} o F_source on the source grid; V is the integral of
    T^{-1} on the target grid, so V'' = (T^{-1})' should equal the density
    ratio r(y) = rho_target(y) / rho_source(T^{-1}(y)). Both sides of the
    change of variables are integrated with the trapezoid rule on their grids.
    """
    if int(grid_size) < 3:
        raise ValueError("grid_size must be at least 3")
    a, b = map(float, source_interval)
    c, d = map(float, target_interval)
    if not (a < b and c < d):
        raise ValueError("intervals must be nondegenerate and increasing")
    x = np.linspace(a, b, int(grid_size))
    y = np.linspace(c, d, int(grid_size))
    rho_s, source_fn = _density_values(source_density, x, "source")
    rho_t, _ = _density_values(target_density, y, "target")
    _check_plateaus(rho_s, "source")
    _check_plateaus(rho_t, "target")
    F_s, F_t = _cdf(x, rho_s), _cdf(y, rho_t)
    mass_s, mass_t = F_s[-1], F_t[-1]
    if abs(mass_s - mass_t) > mass_tol:
        raise MassMismatchError(f"source mass {float(mass_s)!r} differs from target mass {float(mass_t)!r}")
    if mass_s <= 0:
        raise ValueError("densities carry no mass")
    # rescale to a common total so both inversions see the same range
    levels_s = F_s / mass_s * mass_t
    T = _invert_cdf(y, rho_t, F_t, levels_s)
    T_inv = _invert_cdf(x, rho_s, F_s, F_t / mass_t * mass_s)
    T[0], T[-1], T_inv[0], T_inv[-1] = c, d, a, b

    V = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(y) * (T_inv[:-1] + T_inv[1:]))])
    D2V = np.gradient(T_inv, y, edge_order=2)

    with np.errstate(divide="ignore", invalid="ignore"):
        rho_back = np.array([source_fn({"x": t, "y": t, "t": t}) for t in T_inv])
        r = rho_t / rho_back

    # int f(T(x)) dx against int f(y) det D2V(y) dy
    tests = {"1": lambda s: np.ones_like(s), "y": lambda s: s, "y^2": lambda s: s * s}
    errors = {}
    for name, f in tests.items():
        lhs = _trapezoid(f(T), x)
        rhs = _trapezoid(f(y) * D2V, y)
        errors[name] = abs(lhs - rhs)
    interior = slice(1, -1)
    finite = np.isfinite(r[interior])
    hess_err = float(np.max(np.abs(D2V[interior][finite] - r[interior][finite]), initial=0.0))
    return Transport1D(grid=x, map_values=T, target_grid=y, potential_values=V,
                       det_hessian=D2V, density_ratio=r, identity_errors=errors,
                       hessian_error=hess_err, mass=(mass_s, mass_t))
