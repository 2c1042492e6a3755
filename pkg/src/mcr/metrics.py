"""Error metrics for simulation studies, plus out-of-sample prediction.

Class-indexed quantities must be label-aligned (see `align_labels`) before
any of these comparisons; the metrics themselves do no matching.
"""

from __future__ import annotations

import numpy as np

from .core import Dataset, FullParams, PosteriorMatrix, ResponseProbs, indicator_matrix
from .errors import DimensionMismatch, KMismatch, ZeroVariance
from .finalfit import FinalFit
from .posterior import posterior_features_only, posterior_features_only_batch


def err_norm(estimate: np.ndarray, truth: np.ndarray) -> float:
    """Euclidean distance between an estimated block and its true value."""
    estimate = np.asarray(estimate, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if estimate.shape != truth.shape:
        raise DimensionMismatch(f"shapes {estimate.shape} and {truth.shape} differ")
    return float(np.linalg.norm((estimate - truth).ravel()))


def max_err_response(estimated: ResponseProbs, truth: ResponseProbs) -> float:
    """Worst feature column: max_j of the Euclidean error of column j."""
    if estimated.k != truth.k:
        raise KMismatch(f"K={estimated.k} vs K={truth.k}")
    if estimated.p != truth.p:
        raise DimensionMismatch(f"p={estimated.p} vs p={truth.p}")
    if estimated.p == 0:
        return 0.0
    return float(np.linalg.norm(estimated.probs - truth.probs, axis=0).max())


def max_err_posterior(weights: PosteriorMatrix, labels: np.ndarray) -> float:
    """Largest absolute gap between soft memberships and the true indicators."""
    ind = indicator_matrix(labels, weights.k)
    if ind.n != weights.n:
        raise DimensionMismatch(f"{ind.n} labels for {weights.n} rows")
    return float(np.abs(weights.weights - ind.weights).max())


def diff_real_oracle(real: FinalFit, oracle: FinalFit) -> float:
    """Distance between the weighted fit and the true-label benchmark fit.

    Euclidean norm over the stacked blocks (priors, intercepts, slopes,
    noise variance).
    """
    if real.k != oracle.k or real.q != oracle.q:
        raise DimensionMismatch(
            f"fits disagree: (K={real.k}, q={real.q}) vs (K={oracle.k}, q={oracle.q})"
        )
    stacked = np.concatenate(
        [
            real.priors - oracle.priors,
            real.phi - oracle.phi,
            [real.noise_var - oracle.noise_var],
        ]
    )
    return float(np.linalg.norm(stacked))


def out_of_sample_r2(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    """Percent of response variance explained on held-out data.

    100 * (1 - sum (y - yhat)^2 / sum (y - ybar)^2), where ybar is the
    held-out mean.  Negative when predictions do worse than the mean.
    """
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise DimensionMismatch("y_true and y_pred must be equal-length vectors")
    tss = float(np.sum((y_true - y_true.mean()) ** 2))
    if tss <= 0.0:
        raise ZeroVariance("held-out responses are constant")
    rss = float(np.sum((y_true - y_pred) ** 2))
    return 100.0 * (1.0 - rss / tss)


def predict(
    x_row: np.ndarray, z_row: np.ndarray, fit: FinalFit, params: FullParams
) -> float:
    """Point prediction for one new observation.

    Class membership comes from the binary features alone (the response is
    unknown at prediction time); the prediction mixes the fitted intercepts
    by those membership probabilities and adds the covariate effect.
    """
    x_row = np.asarray(x_row, dtype=float).reshape(-1)
    if x_row.shape[0] != fit.q:
        raise DimensionMismatch(f"x has {x_row.shape[0]} entries, model has q={fit.q}")
    if params.k != fit.k:
        raise KMismatch(f"posterior model has K={params.k}, fit has K={fit.k}")
    w = posterior_features_only(z_row, params)
    return float(w @ fit.intercepts + x_row @ fit.slopes)


def predict_dataset(data: Dataset, fit: FinalFit, params: FullParams) -> np.ndarray:
    """Vectorized `predict` over all rows of a dataset."""
    if data.q != fit.q:
        raise DimensionMismatch(f"data has q={data.q}, model has q={fit.q}")
    if params.k != fit.k:
        raise KMismatch(f"posterior model has K={params.k}, fit has K={fit.k}")
    w = posterior_features_only_batch(data.z, params)
    return w.weights @ fit.intercepts + data.x @ fit.slopes
