"""Exact exponential-family geometry on the binary cube {0,1}^n.

States are enumerated in integer order 0..2^n-1 with bit i of the index
holding x_{i+1}. Sufficient statistics are monomials x_S = prod_{i in S} x_i
over a basis of nonempty index sets S (1-based, sorted).
"""
from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "StateSpace", "ThetaPoint", "EtaPoint", "FisherMetric",
    "ConvergenceError", "log_partition", "density", "densities", "to_eta",
    "to_theta", "fisher_metric", "dual_potential", "sphere_embedding",
    "state_bits", "MAX_UNITS", "BOUNDARY_EPS",
]

MAX_UNITS = 20
BOUNDARY_EPS = 1e-12
# states per chunk; fixed so summation order never depends on the caller
CHUNK = 1 << 14


class ConvergenceError(ArithmeticError):
    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


def state_bits(n: int, start: int = 0, stop: int | None = None) -> np.ndarray:
    """Bit matrix of states ``start..stop-1``; row k, column i is x_{i+1}."""
    stop = (1 << n) if stop is None else stop
    idx = np.arange(start, stop, dtype=np.int64)
    return ((idx[:, None] >> np.arange(n)) & 1).astype(np.float64)


@dataclass(frozen=True)
class StateSpace:
    n: int
    basis: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or not 1 <= self.n <= MAX_UNITS:
            raise ValueError(f"n must be an integer in [1, {MAX_UNITS}], got {self.n!r}")
        basis = tuple(tuple(int(i) for i in S) for S in self.basis)
        if not basis:
            raise ValueError("statistic basis is empty")
        for S in basis:
            if not S:
                raise ValueError("empty index set in basis")
            if list(S) != sorted(set(S)):
                raise ValueError(f"index set {S} must be strictly increasing")
            if S[0] < 1 or S[-1] > self.n:
                raise ValueError(f"index set {S} out of range 1..{self.n}")
        if len(set(basis)) != len(basis):
            raise ValueError("duplicate index sets in basis")
        object.__setattr__(self, "basis", basis)

    @classmethod
    def full(cls, n: int) -> "StateSpace":
        """All 2^n - 1 nonempty monomials, ordered by size then lexicographically."""
        basis = [S for k in range(1, n + 1)
                 for S in itertools.combinations(range(1, n + 1), k)]
        return cls(n, tuple(basis))

    @classmethod
    def pairwise(cls, n: int, biases: bool = False) -> "StateSpace":
        basis = list(itertools.combinations(range(1, n + 1), 2))
        if biases:
            basis = [(i,) for i in range(1, n + 1)] + basis
        if not basis:
            raise ValueError("pairwise basis needs n >= 2")
        return cls(n, tuple(basis))

    @classmethod
    def from_kind(cls, n: int, kind: str) -> "StateSpace":
        kinds = {"full": cls.full, "pairwise": cls.pairwise,
                 "ising": lambda m: cls.pairwise(m, biases=True)}
        if kind not in kinds:
            raise ValueError(f"unknown basis kind {kind!r}; expected one of {sorted(kinds)}")
        return kinds[kind](n)

    @property
    def dim(self) -> int:
        return len(self.basis)

    @property
    def n_states(self) -> int:
        return 1 << self.n

    def statistics(self, bits: np.ndarray) -> np.ndarray:
        """Monomial statistics x_S for each row of ``bits``."""
        out = np.empty((bits.shape[0], self.dim))
        for j, S in enumerate(self.basis):
            out[:, j] = np.prod(bits[:, [i - 1 for i in S]], axis=1)
        return out

    def chunks(self):
        if self.n_states <= CHUNK:
            yield from _cached_chunks(self)
            return
        for start in range(0, self.n_states, CHUNK):
            stop = min(start + CHUNK, self.n_states)
            yield start, stop, self.statistics(state_bits(self.n, start, stop))

    def to_json(self) -> dict:
        return {"n": int(self.n), "basis": [list(S) for S in self.basis]}

    @classmethod
    def from_json(cls, obj: dict) -> "StateSpace":
        return cls(int(obj["n"]), tuple(tuple(S) for S in obj["basis"]))


@functools.lru_cache(maxsize=64)
def _cached_chunks(space):
    stats = space.statistics(state_bits(space.n))
    stats.setflags(write=False)
    return ((0, space.n_states, stats),)


@dataclass(frozen=True)
class _Point:
    basis: tuple[tuple[int, ...], ...]
    coords: np.ndarray

    def __post_init__(self):
        coords = np.array(self.coords, dtype=float).reshape(-1)
        if coords.shape[0] != len(self.basis):
            raise ValueError(f"{len(self.basis)} basis sets but {coords.shape[0]} coordinates")
        if not np.all(np.isfinite(coords)):
            raise ValueError("coordinates must be finite")
        coords.setflags(write=False)
        object.__setattr__(self, "basis", tuple(tuple(S) for S in self.basis))
        object.__setattr__(self, "coords", coords)

    def to_json(self) -> dict:
        return {"basis": [list(S) for S in self.basis],
                "coords": [float(c) for c in self.coords]}

    @classmethod
    def from_json(cls, obj: dict):
        return cls(tuple(tuple(S) for S in obj["basis"]), obj["coords"])


class ThetaPoint(_Point):
    """Canonical (natural) coordinates."""


class EtaPoint(_Point):
    """Expectation coordinates eta_S = E[x_S]."""

    def check_interior(self, eps: float = BOUNDARY_EPS) -> None:
        c = self.coords
        if np.any(c <= eps) or np.any(c >= 1 - eps):
            raise ValueError("expectation coordinates must lie strictly inside (0, 1)")
        index = {S: k for k, S in enumerate(self.basis)}
        for S, k in index.items():
            for r in range(1, len(S)):
                for T in itertools.combinations(S, r):
                    if T in index and c[k] > c[index[T]]:
                        raise ValueError(f"E[x_{S}] exceeds E[x_{T}]; not a moment vector")


@dataclass(frozen=True)
class FisherMetric:
    basis: tuple[tuple[int, ...], ...]
    matrix: np.ndarray

    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.matrix)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def det(self) -> float:
        return float(np.linalg.det(self.matrix))


def _coords(space: StateSpace, point, kind=ThetaPoint) -> np.ndarray:
    if isinstance(point, _Point):
        if point.basis != space.basis:
            raise ValueError("point basis does not match the state space basis")
        return np.asarray(point.coords, dtype=float)
    c = np.asarray(point, dtype=float).reshape(-1)
    if c.shape[0] != space.dim:
        raise ValueError(f"dimension mismatch: basis has {space.dim} sets, got {c.shape[0]} coordinates")
    return c


class _Kahan:
    """Compensated accumulator for arrays of partial sums."""

    def __init__(self, shape=()):
        self.total = np.zeros(shape)
        self.comp = np.zeros(shape)

    def add(self, value):
        y = value - self.comp
        t = self.total + y
        self.comp = (t - self.total) - y
        self.total = t


def _log_weights(space, theta):
    """Max energy and per-chunk energies, in fixed chunk order."""
    energies = [(start, stop, stats, stats @ theta) for start, stop, stats in space.chunks()]
    shift = max(float(e.max()) for *_, e in energies)
    return shift, energies


def _moments(space: StateSpace, theta: np.ndarray, second: bool = False):
    """psi, eta and (optionally) the centred second moments in one sweep."""
    shift, energies = _log_weights(space, theta)
    weights = [np.exp(e - shift) for *_, e in energies]
    z = math.fsum(float(s) for w in weights for s in _chunk_partials(w))
    psi = shift + math.log(z)
    acc = _Kahan(space.dim)
    for (_, _, stats, _), w in zip(energies, weights):
        acc.add((w / z) @ stats)
    eta = acc.total
    if not second:
        return psi, eta, None
    cov = _Kahan((space.dim, space.dim))
    for (_, _, stats, _), w in zip(energies, weights):
        centred = stats - eta
        cov.add(centred.T @ (centred * (w / z)[:, None]))
    g = cov.total
    return psi, eta, 0.5 * (g + g.T)


def _chunk_partials(w):
    # fsum over per-block sums keeps the state sum exact to one rounding
    return np.add.reduceat(w, np.arange(0, w.shape[0], 256))


def log_partition(space: StateSpace, theta) -> float:
    """psi(theta) = log sum_x exp(<theta, x_S(x)>), evaluated with a max shift."""
    return _moments(space, _coords(space, theta))[0]


def densities(space: StateSpace, theta) -> np.ndarray:
    """p(x; theta) for every state, in state-index order."""
    th = _coords(space, theta)
    psi = log_partition(space, th)
    return np.concatenate([np.exp(stats @ th - psi) for _, _, stats in space.chunks()])


def density(space: StateSpace, theta, x: Sequence[int]) -> float:
    th = _coords(space, theta)
    bits = np.asarray(x, dtype=float).reshape(1, -1)
    if bits.shape[1] != space.n:
        raise ValueError(f"state must have {space.n} bits, got {bits.shape[1]}")
    if not np.all((bits == 0) | (bits == 1)):
        raise ValueError("state entries must be 0 or 1")
    energy = float((space.statistics(bits) @ th)[0])
    return math.exp(energy - log_partition(space, th))


def to_eta(space: StateSpace, theta) -> EtaPoint:
    """Expectation coordinates, the gradient of log_partition."""
    _, eta, _ = _moments(space, _coords(space, theta))
    return EtaPoint(space.basis, eta)


def fisher_metric(space: StateSpace, theta, method: str = "covariance") -> FisherMetric:
    """Hessian of log_partition.

    ``method="covariance"`` sums p(x)(x_S - eta_S)(x_T - eta_T) over states;
    ``method="moments"`` uses E[x_{S u T}] - eta_S eta_T, the closed-form
    second derivative. The two must agree to rounding.
    """
    th = _coords(space, theta)
    if method == "covariance":
        g = _moments(space, th, second=True)[2]
    elif method == "moments":
        p = densities(space, th)
        bits = state_bits(space.n)
        stats = space.statistics(bits)
        eta = _kahan_dot(p, stats)
        d = space.dim
        g = np.empty((d, d))
        for a in range(d):
            for b in range(a, d):
                union = tuple(sorted(set(space.basis[a]) | set(space.basis[b])))
                joint = math.fsum(p[np.all(bits[:, [i - 1 for i in union]] == 1, axis=1)])
                g[a, b] = g[b, a] = joint - eta[a] * eta[b]
    else:
        raise ValueError(f"unknown method {method!r}")
    return FisherMetric(space.basis, g)


def _kahan_dot(p, stats):
    return np.array([math.fsum(p * stats[:, j]) for j in range(stats.shape[1])])


def to_theta(space: StateSpace, eta, *, theta0=None, tol: float = 1e-10,
             max_iter: int = 200, polish: bool = True) -> ThetaPoint:
    """Invert the Legendre map by damped Newton on psi(theta) - <theta, eta>.

    Armijo backtracking (halving, sufficient decrease 1e-4) from ``theta0``
    (zero by default). Convergence is declared when the max-norm of the
    gradient eta(theta) - eta drops below ``tol``; with ``polish`` a couple of
    extra full Newton steps are kept while they still shrink the gradient.
    """
    target = _coords(space, eta)
    if not isinstance(eta, EtaPoint):
        eta = EtaPoint(space.basis, target)
    eta.check_interior()
    theta = np.zeros(space.dim) if theta0 is None else _coords(space, theta0).copy()

    psi, grad_eta, g = _moments(space, theta, second=True)
    f = psi - theta @ target
    grad = grad_eta - target
    for it in range(max_iter):
        resid = float(np.max(np.abs(grad)))
        if resid < tol:
            if polish:
                theta = _polish(space, theta, target, grad, g)
            return ThetaPoint(space.basis, theta)
        try:
            step = -np.linalg.solve(g, grad)
        except np.linalg.LinAlgError as err:
            raise ConvergenceError("singular Fisher metric in Newton step",
                                   residual=resid, iterations=it) from err
        slope = grad @ step
        t = 1.0
        while True:
            cand = theta + t * step
            psi_c, eta_c, g_c = _moments(space, cand, second=True)
            f_c = psi_c - cand @ target
            if f_c <= f + 1e-4 * t * slope or t < 1e-12:
                break
            # f is flat to rounding near the optimum; judge by the gradient
            if (abs(f_c - f) <= 1e-13 * max(1.0, abs(f))
                    and np.max(np.abs(eta_c - target)) < resid):
                break
            t *= 0.5
        theta, f, grad, g = cand, f_c, eta_c - target, g_c
    raise ConvergenceError(
        f"Newton did not converge in {max_iter} iterations (residual {np.max(np.abs(grad)):.3e})",
        residual=float(np.max(np.abs(grad))), iterations=max_iter)


def _polish(space, theta, target, grad, g, steps=2):
    best = float(np.max(np.abs(grad)))
    for _ in range(steps):
        try:
            cand = theta - np.linalg.solve(g, grad)
        except np.linalg.LinAlgError:
            break
        _, eta_c, g_c = _moments(space, cand, second=True)
        r = float(np.max(np.abs(eta_c - target)))
        if r >= best:
            break
        theta, grad, g, best = cand, eta_c - target, g_c, r
    return theta


def dual_potential(space: StateSpace, eta, **kwargs) -> float:
    """psi*(eta) = <theta, eta> - psi(theta) at theta = to_theta(eta)."""
    target = _coords(space, eta)
    theta = to_theta(space, eta, **kwargs).coords
    return float(theta @ target) - log_partition(space, theta)


def sphere_embedding(p) -> np.ndarray:
    """Map a positive probability vector to the radius-2 sphere, eta_i = 2 sqrt(p_i)."""
    p = np.asarray(p, dtype=float).reshape(-1)
    if np.any(p <= 0):
        raise ValueError("probability vector must be strictly positive")
    if abs(math.fsum(p) - 1.0) > 1e-12:
        raise ValueError("probability vector must sum to 1")
    return 2.0 * np.sqrt(p)
