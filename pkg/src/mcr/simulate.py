"""Synthetic data generator for benchmarking the estimator.

The default design mirrors the benchmark configuration used throughout the
tests: five classes with priors (.15, .2, .3, .25, .1), intercepts
(-4, -1, 2, 5, 8), eight covariates with slopes (3, 1.5, 0, 0, 2, 0, 0, 0)
and AR(1) correlation 0.5, unit noise variance, and a block-structured
feature-probability matrix whose diagonal blocks are informative
(probabilities 0.8-0.95) and off-diagonal blocks quiet (0.01-0.3).

Determinism contract: a fixed (design, seed) pair yields a bitwise
identical dataset.  All normals come from inverse-CDF transforms of
`rng.random()` draws and the draw order is frozen as: feature-probability
matrix, labels, covariates, features (in 1024-column blocks), noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.special import ndtri

from .core import Dataset, FullParams, MixtureParams, ResponseProbs
from .errors import InvariantViolation

_Z_BLOCK = 1024  # feature columns drawn per block; fixed to pin the draw order

_DEFAULT_PRIORS = (0.15, 0.2, 0.3, 0.25, 0.1)
_DEFAULT_INTERCEPTS = (-4.0, -1.0, 2.0, 5.0, 8.0)
_DEFAULT_SLOPES = (3.0, 1.5, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class SimDesign:
    """Ground-truth configuration for one simulated dataset."""

    n: int
    p: int
    priors: tuple[float, ...] = _DEFAULT_PRIORS
    intercepts: tuple[float, ...] = _DEFAULT_INTERCEPTS
    slopes: tuple[float, ...] = _DEFAULT_SLOPES
    noise_var: float = 1.0
    rho: float = 0.5
    block_diag_range: tuple[float, float] = (0.8, 0.95)
    block_offdiag_range: tuple[float, float] = (0.01, 0.3)
    seed: int = 0
    probs_seed: int | None = None

    def __post_init__(self):
        if self.n < 1 or self.p < 0:
            raise InvariantViolation("need n >= 1 and p >= 0")
        if len(self.priors) != len(self.intercepts):
            raise InvariantViolation("priors and intercepts must have equal length")
        if abs(sum(self.priors) - 1.0) > 1e-12 or min(self.priors) <= 0.0:
            raise InvariantViolation("priors must be positive and sum to 1")
        if not -1.0 < self.rho < 1.0:
            raise InvariantViolation("rho must lie in (-1, 1)")
        for lo, hi in (self.block_diag_range, self.block_offdiag_range):
            if not 0.0 < lo < hi < 1.0:
                raise InvariantViolation("probability ranges must satisfy 0 < lo < hi < 1")
        if self.noise_var <= 0.0:
            raise InvariantViolation("noise_var must be positive")

    @property
    def k(self) -> int:
        return len(self.priors)

    @property
    def q(self) -> int:
        return len(self.slopes)


def default_design(n: int, p: int, seed: int = 0, probs_seed: int | None = None) -> SimDesign:
    """The benchmark design at a given sample size and feature count."""
    return SimDesign(n=n, p=p, seed=seed, probs_seed=probs_seed)


def _standard_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Inverse-CDF normals: one uniform consumed per value, fixed order."""
    u = rng.random(shape)
    return ndtri(np.clip(u, 1e-300, None))


def _block_probs(rng: np.random.Generator, design: SimDesign) -> np.ndarray:
    """K x p probabilities: contiguous column groups, one informative class each."""
    k, p = design.k, design.p
    u = rng.random((k, p))
    sizes = np.full(k, p // k)
    sizes[-1] += p - sizes.sum()
    group = np.repeat(np.arange(k), sizes)
    diag = group[None, :] == np.arange(k)[:, None]
    lo = np.where(diag, design.block_diag_range[0], design.block_offdiag_range[0])
    hi = np.where(diag, design.block_diag_range[1], design.block_offdiag_range[1])
    return lo + u * (hi - lo)


def _ar1_cholesky(q: int, rho: float) -> np.ndarray:
    cov = rho ** np.abs(np.subtract.outer(np.arange(q), np.arange(q)))
    return np.linalg.cholesky(cov)


def generate(design: SimDesign) -> tuple[Dataset, FullParams]:
    """Draw one dataset and return it with the generating parameters.

    When `probs_seed` is set, the feature-probability matrix is drawn from
    its own generator, so replications can share a probability matrix while
    redrawing everything else (or vice versa).
    """
    rng = np.random.default_rng(design.seed)
    if design.probs_seed is None:
        probs = _block_probs(rng, design)
    else:
        probs = _block_probs(np.random.default_rng(design.probs_seed), design)

    priors = np.asarray(design.priors)
    labels = np.searchsorted(np.cumsum(priors), rng.random(design.n), side="right")
    labels = np.minimum(labels, design.k - 1)  # guard the cumsum(pi)=1-ulp edge

    x = _standard_normal(rng, (design.n, design.q)) @ _ar1_cholesky(design.q, design.rho).T

    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    for start in range(0, design.p, _Z_BLOCK):
        width = min(_Z_BLOCK, design.p - start)
        u = rng.random((design.n, width))
        r, c = np.nonzero(u < probs[labels, start : start + width])
        rows.append(r)
        cols.append(c + start)
    if rows:
        r = np.concatenate(rows)
        c = np.concatenate(cols)
    else:
        r = c = np.zeros(0, dtype=int)
    z = sparse.coo_array(
        (np.ones(r.size, dtype=np.int8), (r, c)), shape=(design.n, design.p)
    ).tocsc()

    eps = _standard_normal(rng, design.n) * np.sqrt(design.noise_var)
    y = np.asarray(design.intercepts)[labels] + x @ np.asarray(design.slopes) + eps

    data = Dataset(y=y, x=x, z=z, true_labels=labels)
    truth = FullParams(
        MixtureParams(priors, np.asarray(design.intercepts), np.asarray(design.slopes), design.noise_var),
        ResponseProbs(probs),
    )
    return data, truth
