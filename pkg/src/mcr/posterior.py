"""Posterior class memberships under the full fitted model.

All scores are accumulated in log space.  The Bernoulli block enters through
the sparse identity

    sum_j [ z_ij log p_kj + (1 - z_ij) log(1 - p_kj) ]
        = sum_j log(1 - p_kj) + sum_{j : z_ij = 1} [log p_kj - log(1 - p_kj)]

so only the nonzero entries of z are ever touched.  Because the feature
probabilities are clamped away from 0 and 1, every score is finite; with
hundreds of features the spread between classes is routinely large enough
that the normalized weights underflow to exact 0/1, which is accepted.
"""

from __future__ import annotations

import numpy as np
from scipy import sparse

from .core import Dataset, FullParams, PosteriorMatrix, validate
from .errors import DimensionMismatch, InvariantViolation
from .mixreg import _class_scores


def _feature_scores(params: FullParams) -> tuple[np.ndarray, np.ndarray]:
    """Per-class all-zeros baseline and per-feature log-odds increments."""
    probs = params.response.probs
    base = np.log1p(-probs).sum(axis=1)
    delta = np.log(probs) - np.log1p(-probs)
    return base, delta


def _softmax_rows(scores: np.ndarray) -> PosteriorMatrix:
    s = scores - scores.max(axis=1, keepdims=True)
    w = np.exp(s)
    w /= w.sum(axis=1, keepdims=True)
    return PosteriorMatrix(w)


def posterior_full(data: Dataset, params: FullParams) -> PosteriorMatrix:
    """Soft memberships given (y_i, x_i, z_i) under the complete model.

    With p = 0 this reduces to the regression-only posterior exactly: the
    feature block contributes an empty sum.
    """
    validate(params, data)
    scores = _class_scores(data, params.mixture)
    if params.p:
        base, delta = _feature_scores(params)
        scores = scores + base[None, :] + data.z @ delta.T
    return _softmax_rows(scores)


def posterior_features_only(z_row: np.ndarray, params: FullParams) -> np.ndarray:
    """Membership probabilities of one observation from its features alone.

    Used at prediction time, where the response is unknown and only the
    priors and the Bernoulli block can discriminate.  Returns a length-K
    probability vector.
    """
    if sparse.issparse(z_row):
        z_row = np.asarray(z_row.todense()).reshape(-1)
    z_row = np.asarray(z_row)
    if z_row.ndim != 1 or z_row.shape[0] != params.p:
        raise DimensionMismatch(
            f"feature vector has shape {np.shape(z_row)}, want ({params.p},)"
        )
    if z_row.size and not np.all((z_row == 0) | (z_row == 1)):
        raise InvariantViolation("feature vector must be binary")
    base, delta = _feature_scores(params)
    scores = np.log(params.mixture.priors) + base + delta @ z_row.astype(float)
    return _softmax_rows(scores[None, :]).weights[0]


def posterior_features_only_batch(z, params: FullParams) -> PosteriorMatrix:
    """Row-wise `posterior_features_only` for an n x p (sparse) matrix."""
    z = sparse.csc_array(z)
    if z.shape[1] != params.p:
        raise DimensionMismatch(f"z has p={z.shape[1]} but model has p={params.p}")
    base, delta = _feature_scores(params)
    scores = np.log(params.mixture.priors)[None, :] + base[None, :] + z @ delta.T
    return _softmax_rows(scores)


def hard_assign(weights: PosteriorMatrix) -> np.ndarray:
    """Most probable class per row; ties resolve to the lowest class index."""
    return np.argmax(weights.weights, axis=1)
