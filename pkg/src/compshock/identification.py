"""Population estimands implied by a known SVMA model.

These are data-free: every quantity follows from the model's lag
polynomial, its shock variances and the instrument loadings.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import (
    DivisionError,
    InvalidArgumentError,
    RankConditionError,
    RelevanceError,
)
from .svma import (
    AugmentedSvmaModel,
    InstrumentSpec,
    SvmaModel,
    collapse,
    instrument_covariance,
    shock_instrument_covariance,
)

RELEVANCE_TOL = 1e-10
RANK_TOL = 1e-10


@dataclass
class AlphaVector:
    """Instrument-shock covariances ``E[z_t eps_{s,t}]`` for the composite shocks."""

    values: np.ndarray
    source: str = "analytic"
    std_errors: Optional[np.ndarray] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).ravel()
        if self.std_errors is None:
            self.std_errors = np.zeros_like(self.values)


@dataclass
class WeightVector:
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).ravel()

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


@dataclass
class CumulativeDecomposition:
    """Cumulative estimand together with its weight/multiplier pairs."""

    estimand: float
    weights: np.ndarray
    multipliers: np.ndarray


def _baseline(model) -> SvmaModel:
    return collapse(model) if isinstance(model, AugmentedSvmaModel) else model


def alpha(model, spec: InstrumentSpec) -> AlphaVector:
    """Covariances between the instrument and each composite shock.

    Continuous instruments give ``gamma_s * Var(eps_s)`` exactly; binary ones
    are simulated and carry Monte Carlo standard errors.
    """
    values, ses, source = shock_instrument_covariance(model, spec)
    S = model.S
    return AlphaVector(values[:S], source=source, std_errors=ses[:S])


def _check_relevance(values: np.ndarray, what: str = "sum of alpha") -> float:
    total = float(values.sum())
    scale = float(np.max(np.abs(values))) if values.size else 0.0
    if scale == 0.0 or abs(total) < RELEVANCE_TOL * scale:
        raise RelevanceError(f"instrument is not relevant: {what} = {total:.3g}")
    return total


def lpiv_weights(a: AlphaVector) -> WeightVector:
    """``w_s = alpha_s / sum(alpha)``."""
    values = a.values if isinstance(a, AlphaVector) else np.asarray(a, dtype=float)
    total = _check_relevance(values)
    w = values / total
    return WeightVector(w)


def same_sign_holds(a: AlphaVector) -> bool:
    values = a.values if isinstance(a, AlphaVector) else np.asarray(a, dtype=float)
    return bool(np.all(values >= 0) or np.all(values <= 0))


def lpiv_estimand(model, spec: InstrumentSpec, h: int) -> float:
    """Population LP-IV estimand at horizon ``h``: ``sum_s w_s theta_{h,ys}``."""
    base = _baseline(model)
    w = lpiv_weights(alpha(base, spec)).values
    theta_y = base.theta.at(h)[base.y_row, : base.S]
    return float(w @ theta_y)


def covariance_ratio(model, spec: InstrumentSpec, h: int, cumulative: bool = False) -> float:
    """``Cov(y_{t+h}, z_t) / Cov(x_t, z_t)`` computed from population covariances.

    An independent route to :func:`lpiv_estimand` (and to the cumulative
    estimand with ``cumulative=True``) that does not use the weight formula.
    """
    base = _baseline(model)
    cov_y = instrument_covariance(base, spec, h, cumulative=cumulative)[base.y_row]
    if cumulative:
        cov_x = instrument_covariance(base, spec, h, cumulative=True)[base.x_row]
    else:
        cov_x = instrument_covariance(base, spec, 0)[base.x_row]
    if cov_x == 0.0:
        raise RelevanceError("instrument is uncorrelated with x")
    return float(cov_y / cov_x)


def recompose_multiplier(weights, multipliers) -> float:
    """``sum_s weights[s] * multipliers[s]``."""
    weights = np.asarray(weights, dtype=float)
    multipliers = np.asarray(multipliers, dtype=float)
    if weights.shape != multipliers.shape:
        raise InvalidArgumentError("weights and multipliers must have the same length")
    return float(weights @ multipliers)


def cumulative_lpiv_estimand(model, spec: InstrumentSpec, h: int) -> CumulativeDecomposition:
    """Cumulative LP-IV estimand as an affine combination of sectoral multipliers.

    Weight ``s`` is ``alpha_s * cx_s / sum_s' alpha_s' * cx_s'`` and multiplier
    ``s`` is ``cy_s / cx_s``, where ``cx``/``cy`` are cumulative responses of x
    and y to shock ``s`` up to horizon ``h``.
    """
    base = _baseline(model)
    S = base.S
    cum = base.theta.cumulative(h)
    cx = cum[base.x_row, :S]
    cy = cum[base.y_row, :S]
    for s in range(S):
        if cx[s] == 0.0:
            raise DivisionError(f"cumulative x-response to shock {s} is zero at h={h}", index=s)
    a = alpha(base, spec).values
    scaled = a * cx
    total = _check_relevance(scaled, "sum of alpha * cumulative x-response")
    weights = scaled / total
    multipliers = cy / cx
    return CumulativeDecomposition(recompose_multiplier(weights, multipliers), weights, multipliers)


def _check_weight_matrix(W, l: int) -> np.ndarray:
    if W is None:
        return np.eye(l)
    W = np.asarray(W, dtype=float)
    if W.shape != (l, l) or not np.allclose(W, W.T, rtol=1e-10, atol=1e-12):
        raise InvalidArgumentError(f"weighting matrix must be symmetric {l}x{l}")
    if np.linalg.eigvalsh(W).min() <= 0:
        raise InvalidArgumentError("weighting matrix must be positive definite")
    return W


def check_rank(C: np.ndarray, what: str = "Cov(Z, X')") -> None:
    """Raise :class:`RankConditionError` unless ``C`` has full column rank."""
    l, S = C.shape
    if l < S:
        raise RankConditionError(f"{what} is {l}x{S}: fewer instruments than sectors")
    sv = np.linalg.svd(C, compute_uv=False)
    if sv[0] == 0.0 or sv[-1] < RANK_TOL * sv[0]:
        raise RankConditionError(
            f"{what} is rank deficient (singular values {np.array2string(sv, precision=3)})"
        )


def multi_iv_identify(cov_Zy, cov_ZX, W=None) -> np.ndarray:
    """Solve ``cov_Zy = cov_ZX @ theta`` for the sectoral responses.

    Just-identified systems (``l == S``) are solved directly; otherwise the
    weighted least-squares solution ``(C'WC)^{-1} C'W cov_Zy`` is returned,
    with ``W`` the identity when omitted.
    """
    C = np.atleast_2d(np.asarray(cov_ZX, dtype=float))
    c = np.asarray(cov_Zy, dtype=float).ravel()
    l, S = C.shape
    if c.size != l:
        raise InvalidArgumentError(f"cov_Zy has {c.size} entries, expected {l}")
    check_rank(C)
    if l == S:
        return np.linalg.solve(C, c)
    W = _check_weight_matrix(W, l)
    A = C.T @ W @ C
    return np.linalg.solve(A, C.T @ W @ c)


def population_moments(model: AugmentedSvmaModel, specs: Sequence[InstrumentSpec], h: int,
                       cumulative: bool = False) -> tuple:
    """Population ``(Cov(y_{t+h}, Z_t), Cov(Z_t, X_t'))`` for an augmented model.

    With ``cumulative`` the outcome is ``y~_{t+h}`` and the sectoral block uses
    ``X~_{t+h}``.
    """
    S = model.S
    covs = []
    for spec in specs:
        if cumulative:
            covs.append(instrument_covariance(model, spec, h, cumulative=True))
        else:
            y_part = instrument_covariance(model, spec, h)
            x_part = instrument_covariance(model, spec, 0)
            covs.append(np.concatenate([x_part[:S], y_part[S:]]))
    covs = np.array(covs)
    return covs[:, -1], covs[:, :S]


def multi_iv_identify_population(model: AugmentedSvmaModel, specs: Sequence[InstrumentSpec],
                                 h: int, W=None) -> np.ndarray:
    cov_Zy, cov_ZX = population_moments(model, specs, h)
    return multi_iv_identify(cov_Zy, cov_ZX, W)


def multi_iv_identify_cumulative(model: AugmentedSvmaModel, specs: Sequence[InstrumentSpec],
                                 h: int, W=None) -> np.ndarray:
    """Cumulative sectoral responses, each relative to its own sector's cumulative change.

    Recovers ``y~_s / psi~_ss`` when sectors do not respond to each other's
    shocks at any lag up to ``h``.
    """
    cum = model.psi.cumulative(h)
    for s in range(model.S):
        if cum[s, s] == 0.0:
            raise DivisionError(f"cumulative own response of sector {s} is zero at h={h}", index=s)
    cov_Zy, cov_ZX = population_moments(model, specs, h, cumulative=True)
    return multi_iv_identify(cov_Zy, cov_ZX, W)


def sectoral_targets(model: AugmentedSvmaModel, h: int, cumulative: bool = False) -> np.ndarray:
    """True ``theta_{h,y}`` (or its cumulative, sector-normalized version)."""
    S = model.S
    if not cumulative:
        return model.psi.at(h)[model.y_row, :S].copy()
    cum = model.psi.cumulative(h)
    diag = np.diag(cum[:S, :S])
    if np.any(diag == 0.0):
        s = int(np.flatnonzero(diag == 0.0)[0])
        raise DivisionError(f"cumulative own response of sector {s} is zero at h={h}", index=s)
    return cum[model.y_row, :S] / diag


def lambda_matrix(model, specs: Sequence[InstrumentSpec]) -> np.ndarray:
    """``l x S`` matrix with column ``s`` equal to ``E[Z_t eps_{s,t}]``."""
    return np.array([alpha(model, spec).values for spec in specs])
