"""EM for the regression block using (y, x) only.

This is the first stage of the pipeline: a finite mixture of linear
regressions with class-specific intercepts, shared slopes and a common noise
variance.  The resulting parameters are held fixed by the per-feature EM and
the posterior computations downstream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .core import Dataset, MixtureParams, PosteriorMatrix, canonical_order
from .errors import DimensionMismatch, InvariantViolation, SingularDesign

_WEIGHT_EPS = 1e-12  # below this total weight a class counts as empty
_PRIOR_FLOOR = 1e-12  # keeps updated priors inside (0, 1) when a class empties


@dataclass(frozen=True)
class EmConfig:
    """Stopping rule and start policy for the mixture-regression EM.

    `rel_tol` applies to the relative change of the log-likelihood between
    consecutive iterations.  `n_starts` chains are run from deterministically
    jittered starts derived from `seed`; the best final log-likelihood wins.
    When `sequential` is set, the slope and variance updates use the freshly
    updated intercepts instead of the previous iteration's values.
    """

    max_iters: int = 500
    rel_tol: float = 1e-8
    n_starts: int = 5
    seed: int = 0
    sequential: bool = False

    def __post_init__(self):
        if self.max_iters < 1:
            raise InvariantViolation("max_iters must be >= 1")
        if not self.rel_tol > 0.0:
            raise InvariantViolation("rel_tol must be > 0")
        if self.n_starts < 1:
            raise InvariantViolation("n_starts must be >= 1")


@dataclass(frozen=True)
class EmTrace:
    """Per-chain diagnostics of one EM run (the winning chain for multi-start)."""

    loglik_per_iter: tuple[float, ...]
    iterations: int
    converged: bool
    start_index: int
    empty_classes: tuple[tuple[int, int], ...] = ()

    def check_ascent(self, tol: float = 1e-10) -> None:
        """Assert the defining EM property: the log-likelihood never drops."""
        ll = self.loglik_per_iter
        for a, b in zip(ll, ll[1:]):
            if b - a < -tol * (1.0 + abs(a)):
                raise InvariantViolation(f"log-likelihood decreased: {a} -> {b}")


def _log_gauss(data: Dataset, params: MixtureParams) -> np.ndarray:
    """n x K matrix of log N(y_i | intercept_k + x_i.slopes, noise_var)."""
    if params.q != data.q:
        raise DimensionMismatch(f"params have q={params.q} but data has q={data.q}")
    xb = data.x @ params.slopes if params.q else np.zeros(data.n)
    resid = data.y[:, None] - params.intercepts[None, :] - xb[:, None]
    return -0.5 * np.log(2.0 * np.pi * params.noise_var) - resid**2 / (2.0 * params.noise_var)


def _class_scores(data: Dataset, params: MixtureParams) -> np.ndarray:
    return np.log(params.priors)[None, :] + _log_gauss(data, params)


def loglik_limited(data: Dataset, params: MixtureParams) -> float:
    """Mixture log-likelihood of (y, x), computed with log-sum-exp."""
    return float(logsumexp(_class_scores(data, params), axis=1).sum())


def posterior_limited(data: Dataset, params: MixtureParams) -> PosteriorMatrix:
    """Soft memberships given (y_i, x_i) only; rows normalized in log space."""
    s = _class_scores(data, params)
    s = s - s.max(axis=1, keepdims=True)
    w = np.exp(s)
    w /= w.sum(axis=1, keepdims=True)
    return PosteriorMatrix(w)


def _solve_normal_eqs(xtx: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    if xtx.shape[0] == 0:
        return np.zeros(0)
    cond = np.linalg.cond(xtx)
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularDesign(f"x'x is numerically singular (cond={cond:.3g})")
    return np.linalg.solve(xtx, rhs)


def _em_step(
    data: Dataset, current: MixtureParams, sequential: bool = False
) -> tuple[MixtureParams, tuple[int, ...]]:
    """One EM update; returns the new parameters and any emptied classes."""
    w = posterior_limited(data, current).weights
    n = data.n
    colsum = w.sum(axis=0)
    empty = tuple(int(k) for k in np.nonzero(colsum < _WEIGHT_EPS)[0])

    priors = np.maximum(colsum / n, _PRIOR_FLOOR)
    priors = priors / priors.sum()

    xb = data.x @ current.slopes if current.q else np.zeros(n)
    num = w.T @ (data.y - xb)
    safe = np.where(colsum < _WEIGHT_EPS, 1.0, colsum)
    intercepts = num / safe
    if empty:
        intercepts = np.where(colsum < _WEIGHT_EPS, current.intercepts, intercepts)

    gamma_for_v = intercepts if sequential else current.intercepts
    if current.q:
        v = w @ gamma_for_v
        slopes = _solve_normal_eqs(data.x.T @ data.x, data.x.T @ (data.y - v))
    else:
        slopes = current.slopes

    g, t = (intercepts, slopes) if sequential else (current.intercepts, current.slopes)
    xb_var = data.x @ t if current.q else np.zeros(n)
    resid = data.y[:, None] - g[None, :] - xb_var[:, None]
    noise_var = max(float((w * resid**2).sum() / n), current.var_floor)

    params = MixtureParams(
        priors=priors,
        intercepts=intercepts,
        slopes=slopes,
        noise_var=noise_var,
        var_floor=current.var_floor,
    )
    return params, empty


def em_step_limited(
    data: Dataset, current: MixtureParams, sequential: bool = False
) -> MixtureParams:
    """One EM update of (priors, intercepts, slopes, noise_var).

    The posterior weights are computed from `current`; by default every
    right-hand side uses the previous iteration's intercepts and slopes.
    Classes whose total weight falls below 1e-12 keep their previous
    intercept.
    """
    params, _ = _em_step(data, current, sequential=sequential)
    return params


def _base_start(data: Dataset, k: int, var_floor: float):
    """Deterministic start ingredients: OLS slopes and residual quantile intercepts."""
    n, q = data.n, data.q
    if q:
        design = np.column_stack([np.ones(n), data.x])
        beta, *_ = np.linalg.lstsq(design, data.y, rcond=None)
        slopes = beta[1:]
        rss = float(np.sum((data.y - design @ beta) ** 2))
    else:
        slopes = np.zeros(0)
        rss = float(np.sum((data.y - data.y.mean()) ** 2))
    partial = data.y - (data.x @ slopes if q else 0.0)
    levels = (np.arange(k) + 0.5) / k
    intercepts = np.quantile(partial, levels)
    sd = np.sqrt(max(rss / n, var_floor))
    return partial, intercepts, slopes, sd


def _start_params(
    partial: np.ndarray, intercepts: np.ndarray, slopes: np.ndarray, var_floor: float
) -> MixtureParams:
    """Self-consistent start: priors and variance from nearest-intercept groups.

    Seeding the variance with the pooled residual variance flattens the
    responsibilities and regularly collapses classes; the within-group
    variance keeps the start responsibilities informative.
    """
    k = intercepts.shape[0]
    lab = np.argmin(np.abs(partial[:, None] - intercepts[None, :]), axis=1)
    counts = np.bincount(lab, minlength=k)
    priors = np.maximum(counts / partial.shape[0], 1e-3)
    priors = priors / priors.sum()
    within = float(np.mean((partial - intercepts[lab]) ** 2))
    return MixtureParams(priors, intercepts, slopes, max(within, var_floor))


def fit_initial(
    data: Dataset, k: int, config: EmConfig = EmConfig()
) -> tuple[MixtureParams, EmTrace]:
    """Fit the regression block by multi-start EM on (y, x).

    Runs `config.n_starts` chains.  The first start places the intercepts at
    the (j + 0.5)/K quantiles of the OLS partial residuals y - x.slopes and
    is fully deterministic; later starts jitter the intercepts with Gaussian
    noise scaled by the residual standard deviation, using per-start seeds
    spawned from `config.seed`.  The chain with the highest final
    log-likelihood wins and its classes are relabeled by ascending
    intercept.

    Non-convergence is not an error; inspect `trace.converged`.
    """
    if k < 1:
        raise InvariantViolation("k must be >= 1")
    if data.n <= k + data.q:
        raise InvariantViolation(f"need n > K + q ({data.n} <= {k + data.q})")

    partial, gamma0, slopes0, sd = _base_start(data, k, MixtureParams.var_floor)
    seeds = np.random.SeedSequence(config.seed & (2**64 - 1)).spawn(config.n_starts)

    best: tuple[MixtureParams, EmTrace] | None = None
    for s in range(config.n_starts):
        if s == 0:
            gamma_s = gamma0
        else:
            rng = np.random.default_rng(seeds[s])
            gamma_s = gamma0 + sd * rng.standard_normal(k)
        params = _start_params(partial, gamma_s, slopes0, MixtureParams.var_floor)

        loglik = [loglik_limited(data, params)]
        empties: list[tuple[int, int]] = []
        converged = False
        iters = 0
        for t in range(config.max_iters):
            params, empty = _em_step(data, params, sequential=config.sequential)
            ll = loglik_limited(data, params)
            loglik.append(ll)
            empties.extend((t + 1, c) for c in empty)
            iters = t + 1
            if abs(ll - loglik[-2]) < config.rel_tol * (1.0 + abs(loglik[-2])):
                converged = True
                break
        trace = EmTrace(tuple(loglik), iters, converged, s, tuple(empties))
        if best is None or loglik[-1] > best[1].loglik_per_iter[-1]:
            best = (params, trace)

    params, trace = best
    params, _ = canonical_order(params)
    return params, trace
