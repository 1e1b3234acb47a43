"""Fully visible Boltzmann machines: exact stationary laws and AHS learning."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import exp_family as ef

__all__ = [
    "WeightMatrix", "CommutatorPair", "LearningTrace", "TraceRecord",
    "DivergenceError", "SupportError", "stationary_distribution",
    "pair_expectations", "ahs_update", "kullback", "kl_gradient", "train",
    "commutator_decomposition", "check_distribution", "DIVERGENCE_BOUND",
]

logger = logging.getLogger(__name__)

DIVERGENCE_BOUND = 1e3


class DivergenceError(ArithmeticError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class SupportError(ValueError):
    pass


@dataclass(frozen=True)
class WeightMatrix:
    """Symmetric couplings with zero diagonal, plus optional biases."""

    matrix: np.ndarray
    bias: np.ndarray | None = None

    def __post_init__(self):
        w = np.array(self.matrix, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError("weight matrix must be square")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        if not np.array_equal(w, w.T):
            raise ValueError("weight matrix must be exactly symmetric")
        if np.any(np.diag(w) != 0):
            raise ValueError("weight matrix must have a zero diagonal")
        if not 1 <= w.shape[0] <= ef.MAX_UNITS:
            raise ValueError(f"at most {ef.MAX_UNITS} units are supported")
        w.setflags(write=False)
        object.__setattr__(self, "matrix", w)
        if self.bias is not None:
            h = np.array(self.bias, dtype=float).reshape(-1)
            if h.shape[0] != w.shape[0]:
                raise ValueError("bias length must equal the number of units")
            h.setflags(write=False)
            object.__setattr__(self, "bias", h)

    @classmethod
    def zeros(cls, n: int, biases: bool = False) -> "WeightMatrix":
        return cls(np.zeros((n, n)), np.zeros(n) if biases else None)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def has_bias(self) -> bool:
        return self.bias is not None

    def space(self) -> ef.StateSpace:
        return ef.StateSpace.pairwise(self.n, biases=self.has_bias)

    def to_theta(self) -> np.ndarray:
        """Canonical coordinates on ``self.space()``: biases first, then w_ij, i<j."""
        iu = np.triu_indices(self.n, 1)
        parts = [self.bias] if self.has_bias else []
        return np.concatenate(parts + [self.matrix[iu]])

    @classmethod
    def from_theta(cls, n: int, theta, biases: bool = False) -> "WeightMatrix":
        theta = np.asarray(theta, dtype=float)
        h = theta[:n] if biases else None
        w = np.zeros((n, n))
        iu = np.triu_indices(n, 1)
        w[iu] = theta[n:] if biases else theta
        return cls(w + w.T, h)

    def apply(self, delta: np.ndarray) -> "WeightMatrix":
        """Add a moment-gap matrix; its diagonal updates the biases, if any."""
        off = delta - np.diag(np.diag(delta))
        off = 0.5 * (off + off.T)
        bias = self.bias + np.diag(delta) if self.has_bias else None
        return WeightMatrix(self.matrix + off, bias)


def _as_weights(W) -> WeightMatrix:
    return W if isinstance(W, WeightMatrix) else WeightMatrix(W)


def check_distribution(q, n: int | None = None) -> np.ndarray:
    """Validate a probability vector over 2^n states and return it as float array."""
    q = np.asarray(q, dtype=float).reshape(-1)
    size = q.shape[0]
    if size < 2 or size & (size - 1):
        raise ValueError(f"distribution length {size} is not a power of two >= 2")
    if n is not None and size != 1 << n:
        raise ValueError(f"distribution has {size} entries, expected {1 << n}")
    if not np.all(np.isfinite(q)) or np.any(q < 0):
        raise ValueError("probabilities must be finite and nonnegative")
    if abs(math.fsum(q) - 1.0) > 1e-12:
        raise ValueError(f"probabilities sum to {math.fsum(q)!r}, not 1")
    return q


def _bits(n):
    return ef.state_bits(n)


def stationary_distribution(W) -> np.ndarray:
    """p(x) proportional to exp(sum_{i>j} w_ij x_i x_j [+ sum_i h_i x_i])."""
    W = _as_weights(W)
    x = _bits(W.n)
    energy = 0.5 * np.einsum("ki,ij,kj->k", x, W.matrix, x)
    if W.has_bias:
        energy = energy + x @ W.bias
    shift = energy.max()
    weights = np.exp(energy - shift)
    return weights / math.fsum(weights)


def pair_expectations(dist, n: int | None = None) -> np.ndarray:
    """Matrix of E[x_i x_j]; the diagonal holds E[x_i]."""
    dist = np.asarray(dist, dtype=float).reshape(-1)
    if n is None:
        n = int(dist.shape[0]).bit_length() - 1
    check_distribution(dist, n)
    x = _bits(n)
    m = x.T @ (x * dist[:, None])
    return 0.5 * (m + m.T)


def _moment_gap(W: WeightMatrix, q) -> np.ndarray:
    gap = pair_expectations(q, W.n) - pair_expectations(stationary_distribution(W), W.n)
    if not W.has_bias:
        np.fill_diagonal(gap, 0.0)
    return gap


def ahs_update(W, q, c: float) -> np.ndarray:
    """Averaged AHS step, dw_ij = c (q_ij - p_ij).

    The diagonal is zero unless ``W`` carries biases, in which case it holds
    the bias step c (q_i - p_i).
    """
    if not c > 0:
        raise ValueError("learning rate c must be positive")
    return c * _moment_gap(_as_weights(W), q)


def kullback(q, p) -> float:
    """I(q, p) = sum_x q(x) log(q(x) / p(x)), with 0 log 0 = 0."""
    q = np.asarray(q, dtype=float).reshape(-1)
    p = np.asarray(p, dtype=float).reshape(-1)
    if q.shape != p.shape:
        raise ValueError("distributions have different lengths")
    mask = q > 0
    if np.any(p[mask] <= 0):
        raise SupportError("q puts mass where p vanishes")
    qm, pm = q[mask], p[mask]
    # log1p keeps the terms accurate when q is close to p
    terms = qm * np.log1p((qm - pm) / pm)
    return max(math.fsum(terms), 0.0)


def kl_gradient(W, q) -> np.ndarray:
    """dI(q, p_W)/dw_ij = p_ij - q_ij (diagonal: bias gradient, if any)."""
    W = _as_weights(W)
    q = check_distribution(q, W.n)
    p = stationary_distribution(W)
    if np.any(p[q > 0] <= 0):
        raise SupportError("q puts mass where p vanishes")
    return -_moment_gap(W, q)


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    kl: float
    moment_gap: float
    step_norm: float
    weights: np.ndarray


@dataclass
class LearningTrace:
    records: list = field(default_factory=list)
    converged: bool = False
    final: WeightMatrix | None = None

    @property
    def iterations(self) -> int:
        return self.records[-1].iteration if self.records else 0

    @property
    def kl(self) -> np.ndarray:
        return np.array([r.kl for r in self.records])

    @property
    def moment_gap(self) -> np.ndarray:
        return np.array([r.moment_gap for r in self.records])

    def append(self, record: TraceRecord):
        if self.records and record.iteration <= self.records[-1].iteration:
            raise ValueError("trace iterations must increase")
        self.records.append(record)

    def csv_header(self) -> list:
        n = self.final.n if self.final is not None else 0
        names = [f"w_{i + 1}_{j + 1}" for i in range(n) for j in range(i + 1, n)]
        if self.final is not None and self.final.has_bias:
            names = [f"h_{i + 1}" for i in range(n)] + names
        return ["iter", "kl", "moment_gap"] + names

    def csv_rows(self):
        for r in self.records:
            yield [r.iteration, r.kl, r.moment_gap, *r.weights]


def _natural_step(W: WeightMatrix, gap: np.ndarray, c: float) -> np.ndarray:
    """Premultiply the moment gap by the inverse Fisher metric."""
    space = W.space()
    g = ef.fisher_metric(space, W.to_theta()).matrix
    iu = np.triu_indices(W.n, 1)
    flat = np.concatenate(([np.diag(gap)] if W.has_bias else []) + [gap[iu]])
    step = c * np.linalg.solve(g, flat)
    out = np.zeros_like(gap)
    if W.has_bias:
        out[np.diag_indices(W.n)] = step[:W.n]
        step = step[W.n:]
    out[iu] = step
    out[(iu[1], iu[0])] = step
    return out


def train(W0, q, c: float, max_iters: int = 10_000, tol: float = 1e-8,
          natural: bool = False) -> LearningTrace:
    """Iterate W <- W + ahs_update(W, q, c) until the moment gap is below ``tol``.

    Record k holds the state after k updates; record 0 is the start. With
    ``natural=True`` each step is premultiplied by the inverse Fisher metric.
    """
    if not c > 0:
        raise ValueError("learning rate c must be positive")
    if not tol > 0:
        raise ValueError("tol must be positive")
    W = _as_weights(W0)
    q = check_distribution(q, W.n)
    trace = LearningTrace()
    step_norm = 0.0
    for it in range(max_iters + 1):
        p = stationary_distribution(W)
        gap = _moment_gap(W, q)
        gap_norm = float(np.max(np.abs(gap)))
        trace.append(TraceRecord(it, kullback(q, p), gap_norm, step_norm, W.to_theta()))
        if gap_norm < tol:
            trace.converged = True
            break
        if it == max_iters:
            break
        delta = _natural_step(W, gap, c) if natural else c * gap
        step_norm = float(np.max(np.abs(delta)))
        W = W.apply(delta)
        if np.max(np.abs(W.matrix)) > DIVERGENCE_BOUND:
            trace.final = W
            raise DivergenceError(
                f"weights exceeded {DIVERGENCE_BOUND:g} in max-norm at iteration {it + 1}; "
                "the target may not be realizable or c is too large", trace=trace)
    trace.final = W
    if not trace.converged:
        logger.warning("AHS training stopped after %d iterations with moment gap %.3e",
                       trace.iterations, trace.records[-1].moment_gap)
    return trace


@dataclass(frozen=True)
class CommutatorPair:
    X: np.ndarray
    Y: np.ndarray

    def commutator(self) -> np.ndarray:
        return self.X @ self.Y - self.Y @ self.X


def commutator_decomposition(W) -> CommutatorPair:
    """Write a zero-diagonal matrix as [X, Y] with X = diag(0, 1, ..., N-1).

    Then [X, Y]_ij = (i - j) Y_ij, so Y_ij = W_ij / (i - j) off the diagonal.
    """
    W = np.asarray(W.matrix if isinstance(W, WeightMatrix) else W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ValueError("matrix must be square")
    if np.any(np.diag(W) != 0):
        raise ValueError("matrix must have a zero diagonal")
    n = W.shape[0]
    idx = np.arange(n, dtype=float)
    diff = idx[:, None] - idx[None, :]
    np.fill_diagonal(diff, 1.0)
    Y = W / diff
    np.fill_diagonal(Y, 0.0)
    return CommutatorPair(np.diag(idx), Y)
