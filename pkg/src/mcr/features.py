"""Per-feature EM for the class-conditional Bernoulli probabilities.

The regression-block estimate from `fit_initial` is held fixed; each binary
feature column j gets its own K-vector of success probabilities, fitted by a
small EM that shares discrete memberships between the regression part and
the column.  Columns are mutually independent, so they can be processed in
vectorized chunks; the chunked path is written so that its arithmetic is
identical to running one column at a time.
"""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

from .core import EPS_CLAMP, Dataset, MixtureParams, ResponseProbs
from .errors import ColumnOutOfRange, DegenerateWeights, DimensionMismatch, InvariantViolation
from .mixreg import EmConfig, _class_scores

_DEN_EPS = 1e-12
_CHUNK = 64  # columns per vectorized block; fixed so results never depend on memory

FEATURE_EM_DEFAULTS = EmConfig(max_iters=200, rel_tol=1e-8, n_starts=1)


def _check_column(data: Dataset, j: int) -> np.ndarray:
    if not 0 <= j < data.p:
        raise ColumnOutOfRange(f"column {j} outside 0..{data.p - 1}")
    col = np.zeros(data.n, dtype=bool)
    start, stop = data.z.indptr[j], data.z.indptr[j + 1]
    col[data.z.indices[start:stop]] = True
    return col


def _check_probs(p_j: np.ndarray, k: int) -> np.ndarray:
    p_j = np.asarray(p_j, dtype=float)
    if p_j.shape != (k,):
        raise DimensionMismatch(f"probability vector has shape {p_j.shape}, want ({k},)")
    if np.any(p_j <= 0.0) or np.any(p_j >= 1.0):
        raise InvariantViolation("feature probabilities must lie in (0, 1)")
    return p_j


def _block_update(
    log_c: np.ndarray, zb: np.ndarray, p_cur: np.ndarray, eps: float
) -> tuple[np.ndarray, np.ndarray]:
    """One EM update for a block of columns.

    log_c : (n, K) fixed regression-block class scores.
    zb : (n, C) boolean feature block; p_cur : (C, K) current probabilities.
    Returns (p_new clamped to [eps, 1 - eps], den) where den is the (C, K)
    matrix of total membership weights.
    """
    scores = log_c[:, None, :] + np.where(
        zb[:, :, None], np.log(p_cur)[None, :, :], np.log1p(-p_cur)[None, :, :]
    )
    scores -= scores.max(axis=2, keepdims=True)
    w = np.exp(scores)
    w /= w.sum(axis=2, keepdims=True)
    den = w.sum(axis=0)
    num = (w * zb[:, :, None]).sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        p_new = num / den
    return np.clip(p_new, eps, 1.0 - eps), den


def loglik_feature(data: Dataset, mixture: MixtureParams, j: int, p_j: np.ndarray) -> float:
    """Joint log-likelihood of (y_i, x_i, z_ij) over i for one feature column."""
    zb = _check_column(data, j)
    p_j = _check_probs(p_j, mixture.k)
    log_c = _class_scores(data, mixture)
    bern = np.where(zb[:, None], np.log(p_j)[None, :], np.log1p(-p_j)[None, :])
    return float(logsumexp(log_c + bern, axis=1).sum())


def em_step_feature(
    data: Dataset,
    mixture: MixtureParams,
    j: int,
    current: np.ndarray,
    eps: float = EPS_CLAMP,
) -> np.ndarray:
    """One EM update of the K success probabilities for feature column j.

    Membership weights combine the fixed regression-block scores with the
    Bernoulli factor at `current`; the update is the weighted frequency of
    z_ij = 1 per class, clamped to [eps, 1 - eps].
    """
    zb = _check_column(data, j)
    current = _check_probs(current, mixture.k)
    log_c = _class_scores(data, mixture)
    p_new, den = _block_update(log_c, zb[:, None], current[None, :], eps)
    if den.min() < _DEN_EPS:
        bad = int(np.argmin(den.min(axis=0)))
        raise DegenerateWeights(
            f"column {j}: class {bad} received total weight {den.min()!r}"
        )
    return p_new[0]


def fit_response_probs(
    data: Dataset,
    mixture: MixtureParams,
    config: EmConfig = FEATURE_EM_DEFAULTS,
    eps: float = EPS_CLAMP,
) -> ResponseProbs:
    """Fit all K x p feature probabilities, one independent EM per column.

    Every column starts at 1/2 for all classes and iterates until its
    max-abs parameter change drops below `config.rel_tol` or `config.max_iters`
    is reached.  Columns are processed in fixed-width chunks purely for
    speed; per-column results are identical to `em_step_feature` iterated on
    its own.
    """
    if data.p == 0:
        return ResponseProbs(np.zeros((mixture.k, 0)), eps=eps)
    log_c = _class_scores(data, mixture)
    k = mixture.k
    out = np.empty((data.p, k))
    degenerate: list[int] = []

    for start in range(0, data.p, _CHUNK):
        cols = np.arange(start, min(start + _CHUNK, data.p))
        zb = np.zeros((data.n, cols.size), dtype=bool)
        block = data.z[:, cols].tocoo()
        zb[block.row, block.col] = True
        p_cur = np.full((cols.size, k), 0.5)
        active = np.ones(cols.size, dtype=bool)
        for _ in range(config.max_iters):
            idx = np.nonzero(active)[0]
            p_new, den = _block_update(log_c, zb[:, idx], p_cur[idx], eps)
            bad = den.min(axis=1) < _DEN_EPS
            if bad.any():
                degenerate.extend(int(cols[c]) for c in idx[bad])
                active[idx[bad]] = False
                keep = ~bad
                idx, p_new = idx[keep], p_new[keep]
            delta = np.abs(p_new - p_cur[idx]).max(axis=1) if idx.size else np.zeros(0)
            p_cur[idx] = p_new
            active[idx[delta < config.rel_tol]] = False
            if not active.any():
                break
        out[cols] = p_cur

    if degenerate:
        raise DegenerateWeights(
            f"columns {sorted(degenerate)} produced classes with ~zero total weight"
        )
    return ResponseProbs(out.T, eps=eps)
