"""Class-count selection by a feature-wise BIC.

The criterion sums, over feature columns, the joint log-likelihood of
(y_i, x_i, z_ij) at the fitted parameters, then penalizes with
df = 2K + q + pK (priors and intercepts per class, shared slopes, one
Bernoulli probability per class and feature; the noise variance rides with
the intercept count).  Note the regression part of the likelihood is counted
once per feature column by construction, so the criterion is a sum of p
per-column model scores rather than one joint likelihood.
"""

from __future__ import annotations

import warnings

import numpy as np
from scipy.special import logsumexp

from .core import Dataset, FullParams, validate
from .errors import InvariantViolation, McrError
from .features import _CHUNK, fit_response_probs
from .mixreg import EmConfig, _class_scores, fit_initial


def degrees_of_freedom(k: int, q: int, p: int) -> int:
    """Parameter count 2K + q + pK used in the BIC penalty."""
    if k < 1 or q < 0 or p < 0:
        raise InvariantViolation("need k >= 1, q >= 0, p >= 0")
    return 2 * k + q + p * k


def bic(data: Dataset, fitted: FullParams) -> float:
    """Feature-summed BIC of a fitted model on its training data."""
    validate(fitted, data)
    df = degrees_of_freedom(fitted.k, fitted.q, fitted.p)
    if data.p == 0:
        warnings.warn("BIC with p = 0 keeps only the penalty term", stacklevel=2)
        return df * float(np.log(data.n))
    log_c = _class_scores(data, fitted.mixture)
    probs = fitted.response.probs
    total = 0.0
    for start in range(0, data.p, _CHUNK):
        cols = np.arange(start, min(start + _CHUNK, data.p))
        zb = np.zeros((data.n, cols.size), dtype=bool)
        block = data.z[:, cols].tocoo()
        zb[block.row, block.col] = True
        p_blk = probs[:, cols].T  # (C, K)
        bern = np.where(zb[:, :, None], np.log(p_blk)[None, :, :], np.log1p(-p_blk)[None, :, :])
        total += float(logsumexp(log_c[:, None, :] + bern, axis=2).sum())
    return -2.0 * total + df * float(np.log(data.n))


def select_k(
    data: Dataset, k_max: int = 10, config: EmConfig = EmConfig()
) -> tuple[int, np.ndarray]:
    """Fit K = 1..k_max and pick the BIC minimizer (ties break small).

    Every candidate K is fitted from the same configuration, so the random
    starts are derived from the same seed.  Returns (k_hat, bic_values)
    where bic_values[k - 1] is the criterion at K = k.
    """
    if k_max < 1:
        raise InvariantViolation("k_max must be >= 1")
    values = np.empty(k_max)
    for k in range(1, k_max + 1):
        try:
            mixture, _ = fit_initial(data, k, config)
            response = fit_response_probs(data, mixture)
            values[k - 1] = bic(data, FullParams(mixture, response))
        except McrError as exc:
            raise type(exc)(f"candidate K={k}: {exc}") from exc
    k_hat = int(np.argmin(values)) + 1
    return k_hat, values
