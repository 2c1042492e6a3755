"""Domain types for the mixture conditional regression model.

The model has two blocks of parameters.  The regression block holds class
priors, class intercepts, shared slopes and the noise variance; the feature
block holds one Bernoulli success probability per (class, feature) pair.
Every estimation module consumes these types, so validation and class-label
bookkeeping live here.

All types are immutable after construction (arrays are marked read-only) and
can be shared freely across worker processes or threads.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .errors import DimensionMismatch, InvariantViolation, KMismatch, MissingLabels

# Bernoulli probabilities are kept inside [EPS_CLAMP, 1 - EPS_CLAMP] so that
# log-space posteriors stay finite even for all-zero or all-one columns.
EPS_CLAMP = 1e-4

# Lower bound for the noise variance; prevents EM collapse on degenerate
# clusters.
NOISE_VAR_FLOOR = 1e-8

_PRIOR_SUM_TOL = 1e-12
_ROW_SUM_TOL = 1e-10


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class MixtureParams:
    """Regression-block parameters: priors, intercepts, shared slopes, variance.

    Attributes
    ----------
    priors : (K,) class prior probabilities, summing to one.
    intercepts : (K,) class-specific intercepts, in response units.
    slopes : (q,) regression slopes shared by all classes.
    noise_var : scalar noise variance, bounded below by `var_floor`.
    """

    priors: np.ndarray
    intercepts: np.ndarray
    slopes: np.ndarray
    noise_var: float
    var_floor: float = NOISE_VAR_FLOOR

    def __post_init__(self):
        object.__setattr__(self, "priors", _readonly(np.atleast_1d(self.priors)))
        object.__setattr__(self, "intercepts", _readonly(np.atleast_1d(self.intercepts)))
        object.__setattr__(self, "slopes", _readonly(np.atleast_1d(np.asarray(self.slopes, dtype=float).reshape(-1))))
        object.__setattr__(self, "noise_var", float(self.noise_var))
        self.check()

    @property
    def k(self) -> int:
        return self.priors.shape[0]

    @property
    def q(self) -> int:
        return self.slopes.shape[0]

    def check(self) -> None:
        if self.priors.ndim != 1 or self.intercepts.ndim != 1:
            raise DimensionMismatch("priors and intercepts must be 1-d")
        if self.priors.shape != self.intercepts.shape:
            raise DimensionMismatch(
                f"priors have K={self.priors.shape[0]} but intercepts have "
                f"K={self.intercepts.shape[0]}"
            )
        if abs(self.priors.sum() - 1.0) > _PRIOR_SUM_TOL:
            raise InvariantViolation(f"priors sum to {self.priors.sum()!r}, not 1")
        if np.any(self.priors <= 0.0) or np.any(self.priors >= 1.0):
            if self.k > 1 or not np.allclose(self.priors, 1.0):
                raise InvariantViolation("each prior must lie in (0, 1)")
        if not np.all(np.isfinite(self.intercepts)):
            raise InvariantViolation("intercepts must be finite")
        if not np.all(np.isfinite(self.slopes)):
            raise InvariantViolation("slopes must be finite")
        if not np.isfinite(self.noise_var) or self.noise_var < self.var_floor:
            raise InvariantViolation(
                f"noise_var {self.noise_var!r} below floor {self.var_floor!r}"
            )

    def permuted(self, perm: np.ndarray) -> "MixtureParams":
        """Relabel classes: class k of the result is class perm[k] of self."""
        perm = np.asarray(perm, dtype=int)
        return MixtureParams(
            priors=self.priors[perm],
            intercepts=self.intercepts[perm],
            slopes=self.slopes,
            noise_var=self.noise_var,
            var_floor=self.var_floor,
        )


@dataclass(frozen=True)
class ResponseProbs:
    """K x p matrix of Bernoulli success probabilities, clamped away from 0/1."""

    probs: np.ndarray
    eps: float = EPS_CLAMP

    def __post_init__(self):
        object.__setattr__(self, "probs", _readonly(np.atleast_2d(self.probs)))
        self.check()

    @property
    def k(self) -> int:
        return self.probs.shape[0]

    @property
    def p(self) -> int:
        return self.probs.shape[1]

    def check(self) -> None:
        if self.probs.ndim != 2:
            raise DimensionMismatch("probs must be a K x p matrix")
        if self.eps <= 0.0 or self.eps >= 0.5:
            raise InvariantViolation("eps must lie in (0, 0.5)")
        lo, hi = self.eps, 1.0 - self.eps
        # allow a one-ulp slack so clamped values pass their own check
        if self.probs.size and (self.probs.min() < lo * (1 - 1e-12) or
                                self.probs.max() > hi * (1 + 1e-12)):
            raise InvariantViolation(
                f"response probabilities must lie in [{lo}, {hi}]"
            )

    def permuted(self, perm: np.ndarray) -> "ResponseProbs":
        perm = np.asarray(perm, dtype=int)
        return ResponseProbs(probs=self.probs[perm, :], eps=self.eps)


@dataclass(frozen=True)
class FullParams:
    """Complete model: regression block plus the feature-probability matrix."""

    mixture: MixtureParams
    response: ResponseProbs

    def __post_init__(self):
        self.check()

    @property
    def k(self) -> int:
        return self.mixture.k

    @property
    def q(self) -> int:
        return self.mixture.q

    @property
    def p(self) -> int:
        return self.response.p

    def check(self) -> None:
        self.mixture.check()
        self.response.check()
        if self.mixture.k != self.response.k:
            raise KMismatch(
                f"mixture has K={self.mixture.k} but response probabilities "
                f"have K={self.response.k}"
            )

    def permuted(self, perm: np.ndarray) -> "FullParams":
        return FullParams(self.mixture.permuted(perm), self.response.permuted(perm))


@dataclass(frozen=True)
class Dataset:
    """Observations (y_i, x_i, z_i): response, covariates, binary features.

    `z` is stored column-major (CSC) because the feature EM iterates per
    column and keyword matrices are sparse.  `true_labels` (0-based class
    indices) is only present for simulated data.
    """

    y: np.ndarray
    x: np.ndarray
    z: sparse.csc_array
    true_labels: np.ndarray | None = None

    def __post_init__(self):
        y = _readonly(np.atleast_1d(self.y))
        x = np.array(self.x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(len(y), -1)
        x.setflags(write=False)
        z = sparse.csc_array(self.z)
        if z.dtype != np.int8:
            z = z.astype(np.int8)
        for buf in (z.data, z.indices, z.indptr):
            buf.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", z)
        if self.true_labels is not None:
            labels = np.array(self.true_labels, dtype=int)
            labels.setflags(write=False)
            object.__setattr__(self, "true_labels", labels)
        self.check()

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def q(self) -> int:
        return self.x.shape[1]

    @property
    def p(self) -> int:
        return self.z.shape[1]

    def check(self) -> None:
        if self.n < 1:
            raise InvariantViolation("dataset must contain at least one observation")
        if self.x.shape[0] != self.n:
            raise DimensionMismatch(f"x has {self.x.shape[0]} rows for n={self.n}")
        if self.z.shape[0] != self.n:
            raise DimensionMismatch(f"z has {self.z.shape[0]} rows for n={self.n}")
        if not np.all(np.isfinite(self.y)):
            raise InvariantViolation("y contains non-finite values")
        if self.x.size and not np.all(np.isfinite(self.x)):
            raise InvariantViolation("x contains non-finite values")
        if self.z.nnz and not np.all(self.z.data == 1):
            raise InvariantViolation("binary feature matrix must contain only 0/1")
        if self.true_labels is not None:
            if self.true_labels.shape != (self.n,):
                raise DimensionMismatch("true_labels length must equal n")
            if self.true_labels.min(initial=0) < 0:
                raise InvariantViolation("true_labels must be non-negative")

    def require_labels(self) -> np.ndarray:
        if self.true_labels is None:
            raise MissingLabels("dataset has no true class labels")
        return self.true_labels

    def subset(self, idx: np.ndarray) -> "Dataset":
        """New dataset keeping rows `idx` (in the given order)."""
        idx = np.asarray(idx, dtype=int)
        return Dataset(
            y=self.y[idx],
            x=self.x[idx],
            z=sparse.csc_array(self.z[idx, :]),
            true_labels=None if self.true_labels is None else self.true_labels[idx],
        )


@dataclass(frozen=True)
class PosteriorMatrix:
    """n x K soft class memberships; each row sums to one.

    Indicator (0/1 row) matrices are the degenerate case used by the oracle
    estimator.
    """

    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "weights", _readonly(np.atleast_2d(self.weights)))
        self.check()

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @property
    def k(self) -> int:
        return self.weights.shape[1]

    def check(self) -> None:
        w = self.weights
        if w.ndim != 2:
            raise DimensionMismatch("weights must be an n x K matrix")
        if w.size == 0:
            raise InvariantViolation("weights must be non-empty")
        if w.min() < -1e-15 or w.max() > 1.0 + 1e-12:
            raise InvariantViolation("membership weights must lie in [0, 1]")
        if np.max(np.abs(w.sum(axis=1) - 1.0)) > _ROW_SUM_TOL:
            raise InvariantViolation("membership rows must sum to 1")

    def permuted(self, perm: np.ndarray) -> "PosteriorMatrix":
        perm = np.asarray(perm, dtype=int)
        return PosteriorMatrix(self.weights[:, perm])


def indicator_matrix(labels: np.ndarray, k: int) -> PosteriorMatrix:
    """Binary membership matrix a_ik = 1{label_i = k}."""
    labels = np.asarray(labels, dtype=int)
    if labels.size and labels.max() >= k:
        raise DimensionMismatch(f"label {labels.max()} outside 0..{k - 1}")
    w = np.zeros((labels.shape[0], k))
    w[np.arange(labels.shape[0]), labels] = 1.0
    return PosteriorMatrix(w)


def validate(params: FullParams, data: Dataset) -> None:
    """Re-check every invariant and confirm params and data shapes agree.

    Raises DimensionMismatch or InvariantViolation; returns None when
    everything is consistent.
    """
    params.check()
    data.check()
    if params.q != data.q:
        raise DimensionMismatch(f"model has q={params.q} but data has q={data.q}")
    if params.p != data.p:
        raise DimensionMismatch(f"model has p={params.p} but data has p={data.p}")


def align_labels(estimated: MixtureParams, reference: MixtureParams) -> np.ndarray:
    """Match estimated classes to reference classes by intercept.

    Returns the permutation ``perm`` minimizing
    sum_k (estimated.intercepts[perm[k]] - reference.intercepts[k])**2,
    so ``estimated.permuted(perm)`` is label-aligned with ``reference``.
    Exhaustive search for K <= 8; greedy nearest-intercept matching above.
    """
    if estimated.k != reference.k:
        raise KMismatch(f"K={estimated.k} vs K={reference.k}")
    k = estimated.k
    est = estimated.intercepts
    ref = reference.intercepts
    if k <= 8:
        best_perm = None
        best_cost = np.inf
        for perm in itertools.permutations(range(k)):
            cost = float(np.sum((est[list(perm)] - ref) ** 2))
            if cost < best_cost - 1e-15:
                best_cost = cost
                best_perm = perm
        return np.array(best_perm, dtype=int)
    # greedy: reference classes in index order each grab the nearest unused
    # estimated intercept
    unused = list(range(k))
    perm = np.empty(k, dtype=int)
    for j in range(k):
        best = min(unused, key=lambda m: (abs(est[m] - ref[j]), m))
        perm[j] = best
        unused.remove(best)
    return perm


def canonical_order(params: MixtureParams) -> tuple[MixtureParams, np.ndarray]:
    """Sort classes by ascending intercept; returns (sorted params, perm used)."""
    perm = np.argsort(params.intercepts, kind="stable")
    return params.permuted(perm), perm
