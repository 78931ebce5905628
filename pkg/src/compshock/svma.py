"""Structural vector moving average models.

A model maps i.i.d. structural shocks into observables through a truncated
lag polynomial, ``Y_t = sum_h Theta_h eps_{t-h}``. Two flavours exist:

* :class:`SvmaModel` -- the baseline system. Row ``x_row`` (first by default)
  is the normalizing variable and row ``y_row`` (last by default) is the
  outcome. The first ``S`` shocks form the composite shock.
* :class:`AugmentedSvmaModel` -- the same system with the normalizing
  variable split into ``S`` sectoral series occupying the first ``S`` rows.

Instruments are generated contemporaneously as
``z_t = sum_s gamma_s eps_{s,t} + nu_t`` (or a thresholded version of that
index for binary instruments), so covariances with the shocks are analytic.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy import stats

from .errors import InvalidArgumentError, NormalizationError, UndefinedEventError

NORMALIZATION_TOL = 1e-12
EVENT_TOL = 1e-12
SUM_TOL = 1e-9
# draws used whenever a population quantity has no closed form
POPULATION_DRAWS = 1_000_000


@dataclass
class LagPolynomial:
    """Truncated lag polynomial ``coeffs[h]`` for ``h = 0..H_max``.

    ``coeffs`` is stored as an array of shape ``(H_max + 1, n_rows, m)``.
    """

    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float)
        if coeffs.ndim == 2:
            coeffs = coeffs[None, :, :]
        if coeffs.ndim != 3 or coeffs.shape[0] < 1:
            raise InvalidArgumentError(
                "lag polynomial needs a sequence of H_max + 1 >= 1 matrices of equal shape"
            )
        if not np.all(np.isfinite(coeffs)):
            raise InvalidArgumentError("lag polynomial coefficients must be finite")
        self.coeffs = coeffs

    @classmethod
    def from_matrices(cls, matrices: Sequence) -> "LagPolynomial":
        mats = [np.atleast_2d(np.asarray(mat, dtype=float)) for mat in matrices]
        if len({mat.shape for mat in mats}) != 1:
            raise InvalidArgumentError("all lag matrices must share identical dimensions")
        return cls(np.stack(mats))

    @property
    def H_max(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def n_rows(self) -> int:
        return self.coeffs.shape[1]

    @property
    def m(self) -> int:
        return self.coeffs.shape[2]

    def at(self, h: int) -> np.ndarray:
        """Coefficient matrix at lag ``h`` (zeros beyond the truncation)."""
        if h < 0:
            raise InvalidArgumentError(f"horizon must be nonnegative, got {h}")
        if h > self.H_max:
            return np.zeros((self.n_rows, self.m))
        return self.coeffs[h]

    def cumulative(self, h: int) -> np.ndarray:
        """Partial sum ``coeffs[0] + ... + coeffs[h]``."""
        if h < 0:
            raise InvalidArgumentError(f"horizon must be nonnegative, got {h}")
        return self.coeffs[: h + 1].sum(axis=0)


@dataclass
class DiscreteShock:
    """Finite-support, mean-zero shock distribution."""

    support: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        self.support = np.asarray(self.support, dtype=float).ravel()
        self.probs = np.asarray(self.probs, dtype=float).ravel()
        if self.support.shape != self.probs.shape or self.support.size == 0:
            raise InvalidArgumentError("support and probabilities must be nonempty and match")
        if np.any(self.probs <= 0) or abs(self.probs.sum() - 1.0) > 1e-12:
            raise InvalidArgumentError("point masses must be positive and sum to one")
        if abs(float(self.support @ self.probs)) > 1e-12:
            raise InvalidArgumentError("discrete shocks must have zero mean")

    @property
    def variance(self) -> float:
        return float(self.support**2 @ self.probs)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.choice(self.support, size=size, p=self.probs)


Distribution = Union[str, DiscreteShock]


def _check_distributions(distributions, variances) -> tuple:
    m = len(variances)
    if distributions is None:
        return ("gaussian",) * m
    if isinstance(distributions, (str, DiscreteShock)):
        distributions = [distributions] * m
    distributions = tuple(distributions)
    if len(distributions) != m:
        raise InvalidArgumentError(f"expected {m} shock distributions, got {len(distributions)}")
    for s, dist in enumerate(distributions):
        if isinstance(dist, DiscreteShock):
            if not math.isclose(dist.variance, variances[s], rel_tol=1e-10, abs_tol=1e-14):
                raise InvalidArgumentError(
                    f"shock {s}: discrete support variance {dist.variance} "
                    f"does not match shock_variances[{s}] = {variances[s]}"
                )
        elif dist != "gaussian":
            raise InvalidArgumentError(f"unknown shock distribution {dist!r}")
    return distributions


def _check_variances(variances, m) -> np.ndarray:
    if variances is None:
        return np.ones(m)
    variances = np.asarray(variances, dtype=float).ravel()
    if variances.size != m:
        raise InvalidArgumentError(f"expected {m} shock variances, got {variances.size}")
    if np.any(variances <= 0):
        raise InvalidArgumentError("shock variances must be strictly positive")
    return variances


def _as_polynomial(coeffs) -> LagPolynomial:
    if isinstance(coeffs, LagPolynomial):
        return coeffs
    return LagPolynomial(np.asarray(coeffs, dtype=float))


@dataclass
class SvmaModel:
    """Baseline SVMA system with a composite shock made of the first ``S`` shocks.

    Parameters
    ----------
    theta : LagPolynomial or array_like
        Impulse responses, shape ``(H_max + 1, n, m)``.
    S : int
        Number of structural shocks composing the composite shock.
    shock_variances : array_like, optional
        Diagonal of the shock covariance; unit variances by default.
    distributions : sequence, optional
        ``"gaussian"`` or :class:`DiscreteShock` per shock.
    x_row, y_row : int
        Rows of the normalizing variable and of the outcome.
    """

    theta: LagPolynomial
    S: int = 1
    shock_variances: Optional[np.ndarray] = None
    distributions: Optional[Sequence[Distribution]] = None
    x_row: int = 0
    y_row: int = -1

    def __post_init__(self):
        self.theta = _as_polynomial(self.theta)
        n, m = self.theta.n_rows, self.theta.m
        self.shock_variances = _check_variances(self.shock_variances, m)
        self.distributions = _check_distributions(self.distributions, self.shock_variances)
        if not 1 <= self.S <= m:
            raise InvalidArgumentError(f"composite set size must be in 1..{m}, got {self.S}")
        self.x_row = _normalize_row(self.x_row, n)
        self.y_row = _normalize_row(self.y_row, n)
        impact = self.theta.coeffs[0][self.x_row, : self.S]
        for s, value in enumerate(impact):
            if abs(value - 1.0) > NORMALIZATION_TOL:
                raise NormalizationError(
                    f"unit effect normalization violated: theta_0[x, {s}] = {value}", shock=s
                )

    @property
    def n(self) -> int:
        return self.theta.n_rows

    @property
    def m(self) -> int:
        return self.theta.m

    @property
    def H_max(self) -> int:
        return self.theta.H_max

    @property
    def composite_set(self) -> tuple:
        return tuple(range(self.S))

    @property
    def polynomial(self) -> LagPolynomial:
        return self.theta


@dataclass
class AugmentedSvmaModel:
    """SVMA system whose first ``S`` rows are sectoral components of x.

    The outcome is the last row. Unit effect normalization applies per sector,
    ``psi[0][s, s] = 1``. Setting ``no_intersectoral`` additionally enforces
    ``psi[0][r, s] = 0`` for distinct sectors ``r, s``.
    """

    psi: LagPolynomial
    S: int = 2
    shock_variances: Optional[np.ndarray] = None
    distributions: Optional[Sequence[Distribution]] = None
    no_intersectoral: bool = False

    def __post_init__(self):
        self.psi = _as_polynomial(self.psi)
        rows, m = self.psi.n_rows, self.psi.m
        if not 1 <= self.S <= min(m, rows - 1):
            raise InvalidArgumentError(
                f"sector count must be in 1..{min(m, rows - 1)} for a {rows}x{m} system"
            )
        self.shock_variances = _check_variances(self.shock_variances, m)
        self.distributions = _check_distributions(self.distributions, self.shock_variances)
        block = self.psi.coeffs[0][: self.S, : self.S]
        for s in range(self.S):
            if abs(block[s, s] - 1.0) > NORMALIZATION_TOL:
                raise NormalizationError(
                    f"unit effect normalization violated: psi_0[{s}, {s}] = {block[s, s]}", shock=s
                )
        if self.no_intersectoral and not self.satisfies_no_intersectoral():
            raise InvalidArgumentError(
                "model flagged no_intersectoral but psi_0 has nonzero off-diagonal sector entries"
            )

    @property
    def n(self) -> int:
        """Row count of the collapsed (baseline) system."""
        return self.psi.n_rows - self.S + 1

    @property
    def m(self) -> int:
        return self.psi.m

    @property
    def H_max(self) -> int:
        return self.psi.H_max

    @property
    def y_row(self) -> int:
        return self.psi.n_rows - 1

    @property
    def sector_rows(self) -> tuple:
        return tuple(range(self.S))

    @property
    def composite_set(self) -> tuple:
        return tuple(range(self.S))

    @property
    def polynomial(self) -> LagPolynomial:
        return self.psi

    def impact_block(self) -> np.ndarray:
        """The S x S upper-left block of ``psi[0]``."""
        return self.psi.coeffs[0][: self.S, : self.S].copy()

    def satisfies_no_intersectoral(self, tol: float = 0.0) -> bool:
        off = self.impact_block() - np.diag(np.diag(self.impact_block()))
        return bool(np.all(np.abs(off) <= tol))


Model = Union[SvmaModel, AugmentedSvmaModel]


def _normalize_row(row: int, n: int) -> int:
    if not -n <= row < n:
        raise InvalidArgumentError(f"row index {row} out of range for {n} rows")
    return row % n


@dataclass
class InstrumentSpec:
    """How an instrument loads on the structural shocks.

    The latent index is ``sum_s loadings[s] * eps_s + nu`` with ``nu`` Gaussian
    with variance ``noise_variance``. Binary instruments equal one when the
    index exceeds its ``1 - p_z`` quantile.
    """

    loadings: np.ndarray
    noise_variance: float = 1.0
    kind: str = "continuous"
    p_z: Optional[float] = None

    def __post_init__(self):
        self.loadings = np.asarray(self.loadings, dtype=float).ravel()
        if self.noise_variance < 0:
            raise InvalidArgumentError("noise variance must be nonnegative")
        if self.kind not in ("continuous", "binary"):
            raise InvalidArgumentError(f"unknown instrument kind {self.kind!r}")
        if self.kind == "binary":
            if self.p_z is None or not 0 < self.p_z < 1:
                raise InvalidArgumentError("binary instruments need 0 < p_z < 1")

    def is_exogenous(self, S: int) -> bool:
        """True when the instrument loads only on the first ``S`` shocks."""
        return bool(np.all(self.loadings[S:] == 0))


@dataclass
class Panel:
    """Observed time series.

    ``sectors`` has shape ``(S, T)`` and ``instruments`` shape ``(l, T)``.
    ``shocks`` holds the structural draws behind a simulated panel and is
    ``None`` for real data.
    """

    y: np.ndarray
    x: np.ndarray
    instruments: np.ndarray
    sectors: Optional[np.ndarray] = None
    names: dict = field(default_factory=dict)
    shocks: Optional[np.ndarray] = None

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float).ravel()
        self.x = np.asarray(self.x, dtype=float).ravel()
        T = self.y.size
        self.instruments = np.atleast_2d(np.asarray(self.instruments, dtype=float))
        if self.instruments.size == 0:
            self.instruments = np.empty((0, T))
        if self.x.size != T or self.instruments.shape[1] != T:
            raise InvalidArgumentError("all panel series must have the same length")
        if self.sectors is not None:
            self.sectors = np.atleast_2d(np.asarray(self.sectors, dtype=float))
            if self.sectors.shape[1] != T:
                raise InvalidArgumentError("sector series must have the panel length")
            gap = np.abs(self.sectors.sum(axis=0) - self.x)
            if np.any(gap > SUM_TOL):
                t = int(np.argmax(gap))
                raise InvalidArgumentError(
                    f"x_t must equal the sum of sectoral series (t={t}, gap={gap[t]:.3g})"
                )
        names = {"y": "y", "x": "x"}
        names["instruments"] = [f"z{i + 1}" for i in range(self.l)]
        if self.sectors is not None:
            names["sectors"] = [f"x{s + 1}" for s in range(self.S)]
        names.update(self.names or {})
        self.names = names

    @property
    def T(self) -> int:
        return self.y.size

    @property
    def l(self) -> int:
        return self.instruments.shape[0]

    @property
    def S(self) -> int:
        return 0 if self.sectors is None else self.sectors.shape[0]

    def instrument(self, j: int) -> np.ndarray:
        if not 0 <= j < self.l:
            raise InvalidArgumentError(f"instrument index {j} out of range (l={self.l})")
        return self.instruments[j]

    def columns(self) -> dict:
        """Ordered mapping of column label to series."""
        cols = {self.names["y"]: self.y, self.names["x"]: self.x}
        if self.sectors is not None:
            cols.update(zip(self.names["sectors"], self.sectors))
        cols.update(zip(self.names["instruments"], self.instruments))
        return cols


def convolve(poly: LagPolynomial, shocks: np.ndarray) -> np.ndarray:
    """Apply the lag polynomial to a shock path.

    ``shocks`` has shape ``(T + H_max, m)``; the first ``H_max`` rows are
    pre-sample history. Returns the ``(T, n_rows)`` observables.
    """
    shocks = np.asarray(shocks, dtype=float)
    H = poly.H_max
    total = shocks.shape[0]
    if shocks.ndim != 2 or shocks.shape[1] != poly.m or total <= H:
        raise InvalidArgumentError(
            f"shock path must have shape (T + {H}, {poly.m}) with T >= 1, got {shocks.shape}"
        )
    out = np.zeros((total - H, poly.n_rows))
    for h in range(H + 1):
        out += shocks[H - h : total - h] @ poly.coeffs[h].T
    return out


def draw_shocks(model: Model, rng: np.random.Generator, size: int) -> np.ndarray:
    eps = np.empty((size, model.m))
    for s, dist in enumerate(model.distributions):
        if isinstance(dist, DiscreteShock):
            eps[:, s] = dist.sample(rng, size)
        else:
            eps[:, s] = rng.standard_normal(size) * math.sqrt(model.shock_variances[s])
    return eps


def binary_threshold(model: Model, spec: InstrumentSpec) -> float:
    """Threshold on the latent instrument index giving ``P(z = 1) = p_z``."""
    gamma = _check_loadings(model, spec)
    if all(d == "gaussian" for d in model.distributions):
        scale = math.sqrt(float(gamma**2 @ model.shock_variances) + spec.noise_variance)
        return scale * stats.norm.ppf(1.0 - spec.p_z)
    rng = np.random.default_rng(0)
    latent = draw_shocks(model, rng, POPULATION_DRAWS) @ gamma
    latent += rng.standard_normal(POPULATION_DRAWS) * math.sqrt(spec.noise_variance)
    return float(np.quantile(latent, 1.0 - spec.p_z))


def _check_loadings(model: Model, spec: InstrumentSpec) -> np.ndarray:
    if spec.loadings.size != model.m:
        raise InvalidArgumentError(
            f"instrument has {spec.loadings.size} loadings but the model has {model.m} shocks"
        )
    return spec.loadings


def instrument_values(model: Model, spec: InstrumentSpec, shocks: np.ndarray,
                      noise: np.ndarray) -> np.ndarray:
    """Instrument series from contemporaneous shocks and standard-normal noise."""
    gamma = _check_loadings(model, spec)
    latent = shocks @ gamma + math.sqrt(spec.noise_variance) * noise
    if spec.kind == "binary":
        return (latent > binary_threshold(model, spec)).astype(float)
    return latent


def simulate(model: Model, specs: Sequence[InstrumentSpec], T: int, seed=None, *,
             shocks: Optional[np.ndarray] = None,
             noise: Optional[np.ndarray] = None) -> Panel:
    """Simulate an observable panel.

    Parameters
    ----------
    model : SvmaModel or AugmentedSvmaModel
    specs : sequence of InstrumentSpec
        One entry per instrument to generate.
    T : int
        Sample length returned after discarding ``H_max`` burn-in periods.
    seed : int, sequence of int or numpy Generator
        Seed for ``numpy.random.default_rng``.
    shocks : ndarray, optional
        Deterministic mode: a ``(T + H_max, m)`` shock path used instead of draws.
    noise : ndarray, optional
        Deterministic mode: ``(l, T)`` standard-normal instrument noise.

    Returns
    -------
    Panel
        With ``panel.shocks`` set to the in-sample ``(T, m)`` shock draws.
    """
    if not isinstance(T, (int, np.integer)) or T < 1:
        raise InvalidArgumentError(f"T must be a positive integer, got {T!r}")
    specs = list(specs)
    for spec in specs:
        _check_loadings(model, spec)
    poly = model.polynomial
    burn = poly.H_max
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if shocks is None:
        shocks = draw_shocks(model, rng, T + burn)
    else:
        shocks = np.asarray(shocks, dtype=float)
        if shocks.shape != (T + burn, model.m):
            raise InvalidArgumentError(f"injected shocks must have shape {(T + burn, model.m)}")
    if noise is None:
        noise = rng.standard_normal((len(specs), T))
    else:
        noise = np.asarray(noise, dtype=float).reshape(len(specs), T)
    Y = convolve(poly, shocks)
    current = shocks[burn:]
    Z = np.array([instrument_values(model, spec, current, noise[i])
                  for i, spec in enumerate(specs)]).reshape(len(specs), T)
    if isinstance(model, AugmentedSvmaModel):
        sectors = Y[:, : model.S].T
        return Panel(y=Y[:, -1], x=sectors.sum(axis=0), sectors=sectors,
                     instruments=Z, shocks=current)
    return Panel(y=Y[:, model.y_row], x=Y[:, model.x_row], instruments=Z, shocks=current)


def _check_index(model: Model, row: int, s: int) -> None:
    poly = model.polynomial
    if not 0 <= s < poly.m:
        raise InvalidArgumentError(f"shock index {s} out of range (m={poly.m})")
    if not -poly.n_rows <= row < poly.n_rows:
        raise InvalidArgumentError(f"row index {row} out of range ({poly.n_rows} rows)")


def true_irf(model: Model, h: int, row: int, s: int) -> float:
    """Response of ``row`` at horizon ``h`` to a unit shock ``s``; zero beyond ``H_max``."""
    _check_index(model, row, s)
    return float(model.polynomial.at(h)[row, s])


def cumulative_true_irf(model: Model, h: int, row: int, s: int) -> float:
    _check_index(model, row, s)
    return float(model.polynomial.cumulative(h)[row, s])


def collapse(aug: AugmentedSvmaModel) -> SvmaModel:
    """Sum the sectoral rows into one normalizing row.

    Raises :class:`NormalizationError` when the summed impact responses of a
    sectoral shock differ from one.
    """
    S = aug.S
    coeffs = aug.psi.coeffs
    theta = np.concatenate([coeffs[:, :S, :].sum(axis=1, keepdims=True), coeffs[:, S:, :]], axis=1)
    for s in range(S):
        if abs(theta[0, 0, s] - 1.0) > NORMALIZATION_TOL:
            raise NormalizationError(
                f"collapsed model violates theta_0[x, {s}] = 1 (sum of psi_0[:, {s}] is "
                f"{theta[0, 0, s]})", shock=s)
    return SvmaModel(LagPolynomial(theta), S=S, shock_variances=aug.shock_variances.copy(),
                     distributions=aug.distributions)


def as_augmented(model: SvmaModel) -> AugmentedSvmaModel:
    """Embed a baseline model as a trivially augmented one with a single sector."""
    coeffs = model.theta.coeffs
    order = [model.x_row] + [r for r in range(model.n) if r not in (model.x_row, model.y_row)]
    order.append(model.y_row)
    return AugmentedSvmaModel(LagPolynomial(coeffs[:, order, :]), S=1,
                              shock_variances=model.shock_variances.copy(),
                              distributions=model.distributions)


def shock_instrument_covariance(model: Model, spec: InstrumentSpec) -> tuple:
    """``E[z_t eps_t]`` for every shock.

    Returns ``(values, std_errors, source)``. Continuous instruments give the
    exact ``gamma_s * sigma_s^2`` with zero standard errors; binary
    instruments are evaluated with ``POPULATION_DRAWS`` simulation draws.
    """
    gamma = _check_loadings(model, spec)
    if spec.kind == "continuous":
        return gamma * model.shock_variances, np.zeros(model.m), "analytic"
    threshold = binary_threshold(model, spec)
    rng = np.random.default_rng(1)
    eps = draw_shocks(model, rng, POPULATION_DRAWS)
    latent = eps @ gamma + rng.standard_normal(POPULATION_DRAWS) * math.sqrt(spec.noise_variance)
    prod = eps * (latent > threshold)[:, None]
    return prod.mean(axis=0), prod.std(axis=0, ddof=1) / math.sqrt(POPULATION_DRAWS), "simulated"


def instrument_covariance(model: Model, spec: InstrumentSpec, h: int,
                          cumulative: bool = False) -> np.ndarray:
    """Population ``Cov(Y_{t+h}, z_t)`` for every row of the system.

    With ``cumulative`` the left-hand side is ``sum_{j<=h} Y_{t+j}``.
    """
    values, _, _ = shock_instrument_covariance(model, spec)
    poly = model.polynomial
    mat = poly.cumulative(h) if cumulative else poly.at(h)
    return mat @ values


def autocovariance(model: Model, lag: int) -> np.ndarray:
    """Population ``E[Y_{t+lag} Y_t']``."""
    poly = model.polynomial
    lag = abs(lag)
    D = np.diag(model.shock_variances)
    out = np.zeros((poly.n_rows, poly.n_rows))
    for k in range(poly.H_max + 1 - lag):
        out += poly.coeffs[k + lag] @ D @ poly.coeffs[k].T
    return out


def composite_average_irf(model: SvmaModel, h: int) -> float:
    """Response of y at horizon h to a unit composite shock.

    Averages ``a' theta_{h,y}`` over all support points ``a`` of the composite
    shocks with ``sum(a) = 1``, weighted by their conditional probability.
    Requires every composite shock to be a :class:`DiscreteShock`.
    """
    S = model.S
    dists = model.distributions[:S]
    if not all(isinstance(d, DiscreteShock) for d in dists):
        raise InvalidArgumentError("composite average IRF needs discrete composite shocks")
    theta_y = model.theta.at(h)[model.y_row, :S]
    total_p = 0.0
    acc = 0.0
    for combo in itertools.product(*(zip(d.support, d.probs) for d in dists)):
        point = np.array([a for a, _ in combo])
        if abs(point.sum() - 1.0) > EVENT_TOL:
            continue
        p = math.prod(q for _, q in combo)
        total_p += p
        acc += p * float(point @ theta_y)
    if total_p == 0.0:
        raise UndefinedEventError("the composite shock never equals one: P(xi = 1) = 0")
    return acc / total_p
