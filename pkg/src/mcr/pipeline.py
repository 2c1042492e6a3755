"""Corpus preprocessing: keyword dummies and the covariate/feature split.

`binarize` turns a document-term count matrix into presence indicators,
dropping rare and stoplisted terms.  `split_controls` then divides the
binary columns into a small set that enters the regression as ordinary
covariates (those most predictive of the response, chosen by forward
selection under BIC) and the high-dimensional remainder that the mixture
model treats as class-informative features.  Tokenization is out of scope;
input is an already tokenized count matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .errors import EmptyVocabulary, InvariantViolation, SingularDesign

_RSS_FLOOR = 1e-300  # keeps log(rss) finite on interpolating fits


def binarize(
    doc_term_counts, min_doc_freq: int = 0, stoplist=()
) -> tuple[sparse.csc_array, np.ndarray]:
    """Presence indicators for sufficiently frequent, non-stoplisted terms.

    Terms whose total count over all documents is <= `min_doc_freq`, or
    whose ids appear in `stoplist`, are dropped.  Returns the binary matrix
    and the kept original term ids, in ascending order.
    """
    counts = sparse.csc_array(doc_term_counts)
    if counts.nnz and counts.data.min() < 0:
        raise InvariantViolation("counts must be nonnegative")
    if counts.nnz and np.any(counts.data != np.floor(counts.data)):
        raise InvariantViolation("counts must be integers")
    totals = np.asarray(counts.sum(axis=0)).reshape(-1)
    keep = totals > min_doc_freq
    if stoplist:
        stop = np.fromiter(stoplist, dtype=int)
        keep[stop[(stop >= 0) & (stop < keep.size)]] = False
    kept = np.nonzero(keep)[0]
    if kept.size == 0:
        raise EmptyVocabulary(
            f"no term survives min_doc_freq={min_doc_freq} and the stoplist"
        )
    z = sparse.csc_array(counts[:, kept].astype(bool).astype(np.int8))
    return z, kept


@dataclass(frozen=True)
class SplitResult:
    """Outcome of the covariate/feature split.

    `x` merges the given covariates with the selected columns (densified);
    `z` keeps the remainder as sparse features.  `selected` lists chosen
    column ids in selection order, `skipped` the ids passed over because
    they made the design singular, and `bic_trace` the criterion after the
    null model and after each accepted column (strictly decreasing).
    """

    x: np.ndarray
    z: sparse.csc_array
    selected: np.ndarray
    skipped: np.ndarray
    bic_trace: np.ndarray


def _ols_bic(design: np.ndarray, y: np.ndarray) -> tuple[float, int]:
    """Gaussian BIC of OLS: n log(2 pi rss/n) + n + (ncols + 1) log n."""
    n = y.shape[0]
    beta, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < design.shape[1]:
        return np.inf, rank
    rss = max(float(np.sum((y - design @ beta) ** 2)), _RSS_FLOOR)
    loglik = -0.5 * n * (np.log(2.0 * np.pi * rss / n) + 1.0)
    return -2.0 * loglik + (design.shape[1] + 1) * np.log(n), rank


def split_controls(
    y: np.ndarray, x1: np.ndarray, z_full, max_selected: int = 200
) -> SplitResult:
    """Move the response's best binary predictors from z into x.

    Columns of `z_full` are ranked by absolute sample correlation with y
    (zero-variance columns rank last with correlation 0; ties keep the
    lower original index first).  In rank order, each column is added to
    the OLS regression of y on (intercept, x1, chosen columns) as long as
    the BIC strictly improves; the first non-improving candidate stops the
    selection.  Columns that would make the design rank deficient are
    skipped and recorded, not selected.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    n = y.shape[0]
    x1 = np.asarray(x1, dtype=float)
    if x1.ndim == 1:
        x1 = x1.reshape(n, -1)
    z_full = sparse.csc_array(z_full)
    if x1.shape[0] != n or z_full.shape[0] != n:
        raise InvariantViolation("y, x1 and z_full must have matching rows")
    big_p = z_full.shape[1]

    means = np.asarray(z_full.sum(axis=0)).reshape(-1) / n
    cross = (z_full.T @ y) / n
    var_z = means * (1.0 - means)
    var_y = float(np.mean(y**2) - np.mean(y) ** 2)
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = (cross - means * y.mean()) / np.sqrt(var_z * var_y)
    corr[~np.isfinite(corr)] = 0.0
    order = np.argsort(-np.abs(corr), kind="stable")

    design = np.column_stack([np.ones(n), x1])
    bic_cur, rank = _ols_bic(design, y)
    if not np.isfinite(bic_cur):
        raise SingularDesign("base design (intercept, x1) is rank deficient")
    selected: list[int] = []
    skipped: list[int] = []
    trace = [bic_cur]

    for j in order:
        if len(selected) >= max_selected:
            break
        col = np.asarray(z_full[:, [j]].todense(), dtype=float).reshape(n, 1)
        candidate = np.hstack([design, col])
        bic_new, rank = _ols_bic(candidate, y)
        if rank < candidate.shape[1]:
            skipped.append(int(j))
            continue
        if bic_new < bic_cur:
            design = candidate
            bic_cur = bic_new
            selected.append(int(j))
            trace.append(bic_new)
        else:
            break

    sel = np.array(selected, dtype=int)
    remainder = np.setdiff1d(np.arange(big_p), sel)
    x = design[:, 1:]  # drop the intercept column; x1 then selected dummies
    z = sparse.csc_array(z_full[:, remainder]) if remainder.size else sparse.csc_array(
        np.zeros((n, 0), dtype=np.int8)
    )
    return SplitResult(
        x=x,
        z=z,
        selected=sel,
        skipped=np.array(skipped, dtype=int),
        bic_trace=np.array(trace),
    )
