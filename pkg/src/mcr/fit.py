"""End-to-end fitting pipeline: regression EM, feature EM, posterior, final fit."""

from __future__ import annotations

from dataclasses import dataclass

from .core import Dataset, FullParams, PosteriorMatrix
from .features import fit_response_probs
from .finalfit import FinalFit, fit_final
from .mixreg import EmConfig, EmTrace, fit_initial
from .posterior import posterior_full


@dataclass(frozen=True)
class McrFit:
    """Everything produced by one full fit at a fixed class count."""

    params: FullParams
    weights: PosteriorMatrix
    final: FinalFit
    trace: EmTrace


def fit_mcr(data: Dataset, k: int, config: EmConfig = EmConfig()) -> McrFit:
    """Run the four estimation stages in order and bundle the results.

    Stage 1 fits the regression block by EM on (y, x); stage 2 fits the
    per-feature Bernoulli probabilities with the regression block held
    fixed; stage 3 computes full-model posterior memberships; stage 4 runs
    the weighted-design least squares that yields the reported coefficients
    and their standard errors.
    """
    mixture, trace = fit_initial(data, k, config)
    response = fit_response_probs(data, mixture)
    params = FullParams(mixture, response)
    weights = posterior_full(data, params)
    final = fit_final(data, weights)
    return McrFit(params=params, weights=weights, final=final, trace=trace)
