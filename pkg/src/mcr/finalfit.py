"""Final least-squares fit on the posterior-augmented design.

Each observation's covariate vector is prepended with its K membership
weights, giving the design row (w_i1, ..., w_iK, x_i1, ..., x_iq).  Ordinary
least squares on this design estimates the class intercepts (first K
coordinates) and the shared slopes (last q) in one shot.  Standard errors
treat the membership weights as fixed regressors and use the plain
sandwich-free formula with a normal reference distribution.

With indicator weights (the oracle case) the fit coincides with running the
fully supervised estimator, which is what `fit_oracle` relies on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg as _sla
from scipy import stats

from .core import NOISE_VAR_FLOOR, Dataset, PosteriorMatrix, indicator_matrix, _readonly
from .errors import DimensionMismatch, InvariantViolation, SingularDesign

_COND_LIMIT = 1e12


@dataclass(frozen=True)
class FinalFit:
    """Coefficients and inference from the weighted-design least squares.

    `phi` stacks the K class intercepts followed by the q shared slopes.
    `priors` are the membership-weight column means.  `xtx_inverse` is the
    inverse of the n-normalized design cross-product, from which the
    standard errors derive as sqrt(noise_var * diag / n).
    """

    phi: np.ndarray
    noise_var: float
    priors: np.ndarray
    se: np.ndarray
    p_values: np.ndarray
    xtx_inverse: np.ndarray
    k: int
    q: int
    n: int

    def __post_init__(self):
        for name in ("phi", "priors", "se", "p_values", "xtx_inverse"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))
        self.check()

    @property
    def intercepts(self) -> np.ndarray:
        return self.phi[: self.k]

    @property
    def slopes(self) -> np.ndarray:
        return self.phi[self.k :]

    def check(self) -> None:
        m = self.k + self.q
        if self.phi.shape != (m,) or self.se.shape != (m,) or self.p_values.shape != (m,):
            raise DimensionMismatch("phi, se and p_values must have length K + q")
        if self.xtx_inverse.shape != (m, m):
            raise DimensionMismatch("xtx_inverse must be (K + q) square")
        if abs(self.priors.sum() - 1.0) > 1e-10:
            raise InvariantViolation("estimated priors must sum to 1")
        if not np.all(np.isfinite(self.se)) or np.any(self.se <= 0.0):
            raise InvariantViolation("standard errors must be finite and positive")
        if np.any(self.p_values < 0.0) or np.any(self.p_values > 1.0):
            raise InvariantViolation("p-values must lie in [0, 1]")


def build_design(weights: PosteriorMatrix, x: np.ndarray) -> np.ndarray:
    """n x (K + q) design: membership weights first, covariates after."""
    if x.shape[0] != weights.n:
        raise DimensionMismatch(f"x has {x.shape[0]} rows, weights have {weights.n}")
    return np.hstack([weights.weights, x])


def _offending_columns(design: np.ndarray) -> tuple[int, ...]:
    """Columns past the numerical rank, identified by pivoted QR."""
    _, r, piv = _sla.qr(design, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = diag.max(initial=0.0) * max(design.shape) * np.finfo(float).eps
    rank = int((diag > tol).sum())
    return tuple(sorted(int(c) for c in piv[rank:]))


def fit_final(data: Dataset, weights: PosteriorMatrix) -> FinalFit:
    """Least squares of y on the weight-augmented design, with inference.

    The noise variance uses denominator n (no degrees-of-freedom
    correction), and p-values come from the standard normal.  A rank
    deficient design raises SingularDesign naming the offending columns.
    """
    if weights.n != data.n:
        raise DimensionMismatch(f"weights have n={weights.n}, data has n={data.n}")
    k, q = weights.k, data.q
    if data.n <= k + q:
        raise InvariantViolation(f"need n > K + q ({data.n} <= {k + q})")
    design = build_design(weights, data.x)
    n = data.n
    sxx = design.T @ design / n
    cond = np.linalg.cond(sxx)
    if not np.isfinite(cond) or cond > _COND_LIMIT:
        cols = _offending_columns(design)
        raise SingularDesign(
            f"weighted design is numerically singular (cond={cond:.3g}); "
            f"offending columns {list(cols)}",
            columns=cols,
        )
    sxy = design.T @ data.y / n
    phi = np.linalg.solve(sxx, sxy)
    resid = data.y - design @ phi
    noise_var = max(float(resid @ resid / n), NOISE_VAR_FLOOR)
    xtx_inverse = np.linalg.inv(sxx)
    xtx_inverse = (xtx_inverse + xtx_inverse.T) / 2.0
    se = np.sqrt(noise_var * np.diag(xtx_inverse) / n)
    p_values = 2.0 * stats.norm.sf(np.abs(phi / se))
    priors = weights.weights.mean(axis=0)
    return FinalFit(
        phi=phi,
        noise_var=noise_var,
        priors=priors,
        se=se,
        p_values=p_values,
        xtx_inverse=xtx_inverse,
        k=k,
        q=q,
        n=n,
    )


def fit_oracle(data: Dataset, k: int | None = None) -> FinalFit:
    """Supervised benchmark: the same fit with true-label indicator weights."""
    labels = data.require_labels()
    if k is None:
        k = int(labels.max()) + 1
    return fit_final(data, indicator_matrix(labels, k))
