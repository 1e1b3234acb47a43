"""Scikit-learn style density estimators on binary vectors."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, DensityMixin
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_is_fitted

from . import boltzmann as bm
from . import exp_family as ef
from .validation import (check_binary_samples, check_fraction, check_positive,
                         empirical_distribution, mix_uniform, states_to_index)

__all__ = ["ExponentialFamilyModel", "BoltzmannMachine"]


class _BinaryDensity(DensityMixin, BaseEstimator):
    """Shared scoring and sampling given a fitted probability table."""

    def _probabilities(self) -> np.ndarray:
        raise NotImplementedError

    def score_samples(self, X):
        """Log-probability of each row of X."""
        check_is_fitted(self)
        X = check_binary_samples(X, self.n_features_in_)
        with np.errstate(divide="ignore"):
            return np.log(self._probabilities()[states_to_index(X)])

    def score(self, X, y=None):
        """Mean log-likelihood of the samples."""
        return float(np.mean(self.score_samples(X)))

    def sample(self, n_samples: int = 1, random_state=None) -> np.ndarray:
        check_is_fitted(self)
        rng = check_random_state(random_state)
        p = self._probabilities()
        idx = rng.choice(p.shape[0], size=int(n_samples), p=p)
        return ef.state_bits(self.n_features_in_)[idx].astype(np.int64)


class ExponentialFamilyModel(_BinaryDensity):
    """Maximum-likelihood fit of a log-linear model on {0,1}^n.

    The empirical distribution is mixed with the uniform one in proportion
    ``smoothing`` so that its moments sit inside the moment polytope, then
    the Legendre map is inverted to obtain the canonical parameters.

    Parameters
    ----------
    basis : {"pairwise", "ising", "full"}
        Monomials of the model. "ising" adds first-order terms to "pairwise".
    smoothing : float in [0, 1)
        Weight of the uniform distribution in the fitted target.
    tol : float
        Gradient tolerance of the Newton solve.

    Attributes
    ----------
    space_ : StateSpace
    theta_, eta_ : ndarray
        Canonical and expectation coordinates of the fit.
    psi_ : float
        Log-partition function at ``theta_``.
    """

    def __init__(self, basis: str = "pairwise", smoothing: float = 1e-3, tol: float = 1e-10):
        self.basis = basis
        self.smoothing = smoothing
        self.tol = tol

    def fit(self, X, y=None, sample_weight=None):
        X = check_binary_samples(X)
        alpha = check_fraction("smoothing", self.smoothing)
        check_positive("tol", self.tol)
        n = X.shape[1]
        space = ef.StateSpace.from_kind(n, self.basis)
        q = mix_uniform(empirical_distribution(X, sample_weight), alpha)
        stats = space.statistics(ef.state_bits(n))
        eta = ef.EtaPoint(space.basis, q @ stats)
        theta = ef.to_theta(space, eta, tol=self.tol)
        self.space_ = space
        self.n_features_in_ = n
        self.theta_ = np.array(theta.coords)
        self.eta_ = np.array(eta.coords)
        self.psi_ = ef.log_partition(space, theta)
        return self

    def transform(self, X):
        """Sufficient statistics x_S of each row, one column per basis set."""
        check_is_fitted(self)
        return self.space_.statistics(check_binary_samples(X, self.n_features_in_))

    def fisher_metric(self) -> np.ndarray:
        check_is_fitted(self)
        return ef.fisher_metric(self.space_, self.theta_).matrix

    def _probabilities(self):
        return ef.densities(self.space_, self.theta_)


class BoltzmannMachine(_BinaryDensity):
    """Fully visible Boltzmann machine trained by the averaged AHS rule.

    Parameters
    ----------
    c : float
        Learning rate of the update dw_ij = c (q_ij - p_ij).
    max_iter, tol : stopping rule on the moment gap.
    natural : bool
        Premultiply each step by the inverse Fisher metric.
    biases : bool
        Learn first-order terms as well.
    smoothing : float in [0, 1)
        Weight of the uniform distribution mixed into the empirical target;
        without it a pair that never fires together has no finite optimum.

    Attributes
    ----------
    weights_ : WeightMatrix
    trace_ : LearningTrace
    n_iter_ : int
    converged_ : bool
    """

    def __init__(self, c: float = 0.5, max_iter: int = 10_000, tol: float = 1e-8,
                 natural: bool = False, biases: bool = False, smoothing: float = 1e-3):
        self.c = c
        self.max_iter = max_iter
        self.tol = tol
        self.natural = natural
        self.biases = biases
        self.smoothing = smoothing

    def fit(self, X, y=None, sample_weight=None):
        X = check_binary_samples(X)
        alpha = check_fraction("smoothing", self.smoothing)
        q = mix_uniform(empirical_distribution(X, sample_weight), alpha)
        return self.fit_distribution(q)

    def fit_distribution(self, q):
        """Train against an explicit target over the 2^n states."""
        check_positive("c", self.c)
        check_positive("tol", self.tol)
        q = bm.check_distribution(q)
        n = q.shape[0].bit_length() - 1
        trace = bm.train(bm.WeightMatrix.zeros(n, self.biases), q, self.c,
                         max_iters=int(self.max_iter), tol=self.tol, natural=self.natural)
        self.n_features_in_ = n
        self.trace_ = trace
        self.weights_ = trace.final
        self.n_iter_ = trace.iterations
        self.converged_ = trace.converged
        return self

    def _probabilities(self):
        return bm.stationary_distribution(self.weights_)
