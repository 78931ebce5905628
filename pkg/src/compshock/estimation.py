"""Sample estimators: LP-IV, sectoral multi-instrument IV, multiplier
decomposition and the GMM test of no contemporaneous inter-sectoral effects.

Every instrument ``j`` carries its own control set ``R^(j)`` (a constant plus
``p`` lags of the configured series, including lags of instrument ``j``).
Series are residualized on ``R^(j)`` before the moment conditions are formed,
and all instruments share the sample ``t = p .. T - h - 1``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg
from scipy import stats

from .errors import (
    CollinearityError,
    ConvergenceError,
    IdentificationError,
    InsufficientSampleError,
    InvalidArgumentError,
    RelevanceError,
    SingularityError,
    UnderIdentificationError,
    WeightingError,
)
from .identification import check_rank, recompose_multiplier
from .svma import Panel

logger = logging.getLogger(__name__)

RELEVANCE_TOL = 1e-12
COLLINEAR_TOL = 1e-10
IDENTITY_TOL = 1e-9
WEIGHTINGS = ("2sls", "identity", "efficient")


@dataclass
class ControlSpec:
    """Control set: a constant plus ``lags`` lags of each flagged series.

    ``instrument`` adds lags of the instrument whose control set is being
    built; ``sectors`` adds lags of every sectoral series.
    """

    lags: int = 4
    y: bool = True
    x: bool = True
    instrument: bool = True
    sectors: bool = False

    def __post_init__(self):
        if self.lags < 0:
            raise InvalidArgumentError("lag order must be nonnegative")


@dataclass
class MomentDiagnostics:
    C_ZX: np.ndarray
    C_Zy: np.ndarray
    Omega: np.ndarray
    W_hat: np.ndarray
    psd_clipped: bool = False


@dataclass
class IrfEstimate:
    """Point estimate(s) at one horizon with HAR standard errors.

    ``point``/``std_errors`` are floats for a scalar LP-IV estimate and
    length-S arrays for sectoral estimates.
    """

    horizon: int
    point: object
    std_errors: object
    covariance: np.ndarray
    nobs: int
    weights: Optional[np.ndarray] = None
    diagnostics: Optional[MomentDiagnostics] = None
    cumulative: bool = False
    instruments: tuple = ()


@dataclass
class Decomposition:
    """Cumulative LP-IV multiplier split into sectoral weights and multipliers."""

    beta: IrfEstimate
    weights: np.ndarray
    multipliers: IrfEstimate
    recomposed: float
    gap: float

    @property
    def horizon(self) -> int:
        return self.beta.horizon


@dataclass
class GmmTestResult:
    statistic: float
    dof: int
    p_value: float
    psi0: np.ndarray
    theta: np.ndarray
    covariance: Optional[np.ndarray] = None
    iterations: int = 0
    criterion: float = 0.0
    trace: list = field(default_factory=list)

    def rejects(self, level: float = 0.05) -> bool:
        return self.dof > 0 and self.p_value < level


def lead(v: np.ndarray, h: int) -> np.ndarray:
    """``out[t] = v[t + h]``; NaN where ``t + h`` falls past the sample."""
    v = np.asarray(v, dtype=float)
    out = np.full(v.shape, np.nan)
    if h == 0:
        return v.copy()
    out[..., :-h] = v[..., h:]
    return out


def cumulative_lead(v: np.ndarray, h: int) -> np.ndarray:
    """``out[t] = v[t] + ... + v[t + h]``; NaN where the window runs past the sample."""
    v = np.asarray(v, dtype=float)
    csum = np.concatenate([np.zeros(v.shape[:-1] + (1,)), np.cumsum(v, axis=-1)], axis=-1)
    out = np.full(v.shape, np.nan)
    T = v.shape[-1]
    out[..., : T - h] = csum[..., h + 1 :] - csum[..., : T - h]
    return out


def lag(v: np.ndarray, k: int) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    out = np.full(v.shape, np.nan)
    if k == 0:
        return v.copy()
    out[k:] = v[:-k]
    return out


def _sample_rows(T: int, p: int, h: int) -> slice:
    if h < 0:
        raise InvalidArgumentError(f"horizon must be nonnegative, got {h}")
    if h >= T - p:
        raise InsufficientSampleError(f"horizon {h} leaves no observations (T={T}, lags={p})")
    return slice(p, T - h)


def control_matrix(panel: Panel, controls: ControlSpec, j: int, h: int = 0) -> tuple:
    """Control regressors ``R^(j)`` over the estimation rows.

    Returns ``(R, names)`` where ``R`` has one row per ``t = p .. T - h - 1``.
    """
    rows = _sample_rows(panel.T, controls.lags, h)
    series = []
    if controls.y:
        series.append((panel.names["y"], panel.y))
    if controls.x:
        series.append((panel.names["x"], panel.x))
    if controls.sectors and panel.sectors is not None:
        series.extend(zip(panel.names["sectors"], panel.sectors))
    if controls.instrument:
        series.append((panel.names["instruments"][j], panel.instrument(j)))
    cols = [np.ones(panel.T)]
    names = ["const"]
    for k in range(1, controls.lags + 1):
        for name, v in series:
            cols.append(lag(v, k))
            names.append(f"{name}.L{k}")
    R = np.column_stack(cols)[rows]
    return R, names


def _check_collinear(R: np.ndarray, names: Sequence[str]) -> None:
    if R.shape[1] == 0:
        return
    _, r, piv = scipy.linalg.qr(R, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag[0] == 0.0:
        rank = 0
    else:
        rank = int(np.sum(diag > COLLINEAR_TOL * diag[0]))
    if rank < R.shape[1]:
        dependent = [names[i] for i in sorted(piv[rank:])]
        raise CollinearityError(
            f"control matrix is rank deficient; dependent columns: {', '.join(dependent)}",
            columns=dependent,
        )


def _residuals(V: np.ndarray, R: np.ndarray, names: Sequence[str]) -> np.ndarray:
    """Least-squares residuals of each column of ``V`` on ``R``."""
    if R.shape[0] <= R.shape[1]:
        raise InsufficientSampleError(
            f"{R.shape[0]} observations for {R.shape[1]} control regressors"
        )
    _check_collinear(R, names)
    coef, *_ = np.linalg.lstsq(R, V, rcond=None)
    return V - R @ coef


def residualize(series, panel: Panel, controls: Optional[ControlSpec], j: int,
                h: int = 0) -> np.ndarray:
    """Residual of ``series`` after regressing it on the controls of instrument ``j``.

    ``series`` is a length-T array indexed by date ``t`` (use :func:`lead` for
    ``y_{t+h}``). Only rows ``t = p .. T - h - 1`` are used; rows with missing
    values are dropped and come back as NaN.
    """
    controls = controls or ControlSpec()
    series = np.asarray(series, dtype=float)
    if series.shape != (panel.T,):
        raise InvalidArgumentError(f"series must have length T={panel.T}")
    R, names = control_matrix(panel, controls, j, h)
    v = series[_sample_rows(panel.T, controls.lags, h)]
    ok = np.isfinite(v) & np.all(np.isfinite(R), axis=1)
    out = np.full(v.shape, np.nan)
    out[ok] = _residuals(v[ok, None], R[ok], names)[:, 0]
    return out


def newey_west(moments, bandwidth: int) -> np.ndarray:
    """Bartlett-kernel long-run covariance of a moment sequence.

    ``Gamma_0 + sum_{j=1}^{B} (1 - j/(B+1)) (Gamma_j + Gamma_j')`` with
    ``Gamma_j = (1/n) sum_t g_t g_{t-j}'``. The moments are not demeaned.
    """
    G = np.asarray(moments, dtype=float)
    if G.ndim == 1:
        G = G[:, None]
    n = G.shape[0]
    if bandwidth < 0 or bandwidth >= n:
        raise InvalidArgumentError(f"bandwidth must satisfy 0 <= B < {n}, got {bandwidth}")
    omega = G.T @ G / n
    for j in range(1, bandwidth + 1):
        gamma = G[j:].T @ G[:-j] / n
        omega += (1.0 - j / (bandwidth + 1.0)) * (gamma + gamma.T)
    return omega


def psd_clip(M: np.ndarray) -> tuple:
    """Symmetrize and clip negative eigenvalues at zero. Returns ``(matrix, clipped)``."""
    M = 0.5 * (M + M.T)
    vals, vecs = np.linalg.eigh(M)
    if np.all(vals >= 0):
        return M, False
    logger.info("clipping %d negative eigenvalue(s) of a long-run covariance",
                int(np.sum(vals < 0)))
    return (vecs * np.clip(vals, 0, None)) @ vecs.T, True


def _instrument_indices(panel: Panel, instruments) -> list:
    if instruments is None:
        return list(range(panel.l))
    if isinstance(instruments, (int, np.integer)):
        instruments = [instruments]
    out = [int(i) for i in instruments]
    for i in out:
        panel.instrument(i)
    if not out:
        raise InvalidArgumentError("at least one instrument is required")
    return out


def _regressors(panel: Panel, h: int, cumulative: bool, sectoral: bool) -> tuple:
    if sectoral:
        if panel.sectors is None:
            raise InvalidArgumentError("panel has no sectoral series")
        xs = panel.sectors
    else:
        xs = panel.x[None, :]
    if cumulative:
        return cumulative_lead(panel.y, h), cumulative_lead(xs, h)
    return lead(panel.y, h), xs


def residualized_moments(panel: Panel, instruments, h: int, controls: Optional[ControlSpec] = None,
                         cumulative: bool = False, sectoral: bool = True) -> tuple:
    """Per-instrument residualized series on a common sample.

    Returns ``(Zp, Ups, Xbar)`` with shapes ``(n, l)``, ``(n, l)`` and
    ``(n, l, S)``: column ``i`` holds ``z_i``, ``y_{t+h}`` and the regressors
    residualized on the controls of instrument ``i``.
    """
    controls = controls or ControlSpec()
    idx = _instrument_indices(panel, instruments)
    rows = _sample_rows(panel.T, controls.lags, h)
    y_dep, xs = _regressors(panel, h, cumulative, sectoral)
    blocks = []
    ok = None
    for i in idx:
        R, names = control_matrix(panel, controls, i, h)
        V = np.column_stack([panel.instrument(i)[rows], y_dep[rows], xs[:, rows].T])
        finite = np.all(np.isfinite(V), axis=1) & np.all(np.isfinite(R), axis=1)
        ok = finite if ok is None else ok & finite
        blocks.append((R, names, V))
    dropped = int(ok.size - ok.sum())
    if dropped:
        logger.info("dropped %d row(s) with missing values", dropped)
    n = int(ok.sum())
    S = xs.shape[0]
    Zp = np.empty((n, len(idx)))
    Ups = np.empty((n, len(idx)))
    Xbar = np.empty((n, len(idx), S))
    for k, (R, names, V) in enumerate(blocks):
        E = _residuals(V[ok], R[ok], names)
        Zp[:, k] = E[:, 0]
        Ups[:, k] = E[:, 1]
        Xbar[:, k, :] = E[:, 2:]
    return Zp, Ups, Xbar


def _moment_matrices(Zp, Ups, Xbar) -> tuple:
    n = Zp.shape[0]
    C_ZX = np.einsum("ti,tis->is", Zp, Xbar) / n
    C_Zy = np.einsum("ti,ti->i", Zp, Ups) / n
    return C_ZX, C_Zy


def _moments_at(Zp, Ups, Xbar, theta) -> np.ndarray:
    return Zp * (Ups - Xbar @ theta)


def _weight_matrix(mode: str, Zp: np.ndarray) -> np.ndarray:
    l = Zp.shape[1]
    if mode == "identity":
        return np.eye(l)
    if mode in ("2sls", "efficient"):
        ZZ = Zp.T @ Zp / Zp.shape[0]
        return _invert_weight(ZZ, "sum of Z Z'")
    raise InvalidArgumentError(f"unknown weighting mode {mode!r}")


def _invert_weight(M: np.ndarray, what: str) -> np.ndarray:
    sv = np.linalg.svd(M, compute_uv=False)
    if sv[0] == 0.0 or sv[-1] < 1e-12 * sv[0]:
        raise WeightingError(f"cannot form the weighting matrix: {what} is singular")
    return np.linalg.inv(M)


def _gmm_solve(C_ZX, C_Zy, W) -> np.ndarray:
    l, S = C_ZX.shape
    if l == S:
        return np.linalg.solve(C_ZX, C_Zy)
    A = C_ZX.T @ W @ C_ZX
    return np.linalg.solve(A, C_ZX.T @ W @ C_Zy)


def _sandwich(C_ZX, W, Omega) -> np.ndarray:
    l, S = C_ZX.shape
    if l == S:
        Cinv = np.linalg.inv(C_ZX)
        return Cinv @ Omega @ Cinv.T
    Ainv = np.linalg.inv(C_ZX.T @ W @ C_ZX)
    return Ainv @ C_ZX.T @ W @ Omega @ W @ C_ZX @ Ainv


def _linear_iv(Zp, Ups, Xbar, h: int, weighting: str, bandwidth: Optional[int]) -> tuple:
    n, l, S = Xbar.shape
    if l < S:
        raise UnderIdentificationError(f"{l} instrument(s) for {S} sectoral response(s)")
    C_ZX, C_Zy = _moment_matrices(Zp, Ups, Xbar)
    if l == 1 and S == 1:
        scale = np.sqrt(np.mean(Zp[:, 0] ** 2) * np.mean(Xbar[:, 0, 0] ** 2))
        if not abs(C_ZX[0, 0]) > RELEVANCE_TOL * scale:
            raise RelevanceError("instrument is uncorrelated with the regressor after controls")
    else:
        check_rank(C_ZX, "C_ZX")
    B = h + 1 if bandwidth is None else int(bandwidth)
    W = np.eye(l) if l == S else _weight_matrix("identity" if weighting == "identity" else "2sls",
                                                 Zp)
    theta = _gmm_solve(C_ZX, C_Zy, W)
    if weighting == "efficient" and l > S:
        Omega1, _ = psd_clip(newey_west(_moments_at(Zp, Ups, Xbar, theta), B))
        W = _invert_weight(Omega1, "first-step long-run covariance")
        theta = _gmm_solve(C_ZX, C_Zy, W)
    Omega, clipped = psd_clip(newey_west(_moments_at(Zp, Ups, Xbar, theta), B))
    V = _sandwich(C_ZX, W, Omega)
    cov = V / n
    se = np.sqrt(np.clip(np.diag(cov), 0, None))
    diag = MomentDiagnostics(C_ZX=C_ZX, C_Zy=C_Zy, Omega=Omega, W_hat=W, psd_clipped=clipped)
    return theta, se, cov, diag


def lpiv_estimate(panel: Panel, j: int, h: int, controls: Optional[ControlSpec] = None,
                  cumulative: bool = False, bandwidth: Optional[int] = None) -> IrfEstimate:
    """LP-IV estimate of the response of y at horizon ``h`` to a unit change in x.

    ``beta = sum z^ y^ / sum z^ x^`` with ``^`` denoting residuals on the
    controls of instrument ``j``. With ``cumulative`` both y and x are
    replaced by their sums over ``t .. t+h`` (the cumulative multiplier).
    Standard errors use the Newey-West long-run variance of
    ``z^ (y^ - x^ beta)`` with bandwidth ``h + 1`` unless overridden.
    """
    Zp, Ups, Xbar = residualized_moments(panel, [j], h, controls, cumulative, sectoral=False)
    theta, se, cov, diag = _linear_iv(Zp, Ups, Xbar, h, "identity", bandwidth)
    return IrfEstimate(horizon=h, point=float(theta[0]), std_errors=float(se[0]), covariance=cov,
                       nobs=Zp.shape[0], diagnostics=diag, cumulative=cumulative,
                       instruments=(j,))


def sectoral_irf_estimate(panel: Panel, instruments=None, h: int = 0,
                          controls: Optional[ControlSpec] = None, weighting: str = "2sls",
                          cumulative: bool = False,
                          bandwidth: Optional[int] = None) -> IrfEstimate:
    """Sectoral impulse responses of y identified by ``l >= S`` instruments.

    Parameters
    ----------
    panel : Panel
        Must carry sectoral series.
    instruments : sequence of int, optional
        Instrument indices; all instruments by default.
    h : int
        Horizon.
    controls : ControlSpec, optional
    weighting : {"2sls", "identity", "efficient"}
        Over-identified weighting: ``(sum Z^ Z^')^{-1}``, the identity, or the
        two-step efficient inverse long-run covariance. Ignored when ``l == S``.
    cumulative : bool
        Use cumulative y and sectoral regressors; each response is then
        relative to its own sector's cumulative change.
    bandwidth : int, optional
        Newey-West bandwidth, ``h + 1`` by default.
    """
    if weighting not in WEIGHTINGS:
        raise InvalidArgumentError(f"unknown weighting mode {weighting!r}; choose from {WEIGHTINGS}")
    idx = _instrument_indices(panel, instruments)
    Zp, Ups, Xbar = residualized_moments(panel, idx, h, controls, cumulative, sectoral=True)
    theta, se, cov, diag = _linear_iv(Zp, Ups, Xbar, h, weighting, bandwidth)
    return IrfEstimate(horizon=h, point=theta, std_errors=se, covariance=cov, nobs=Zp.shape[0],
                       diagnostics=diag, cumulative=cumulative, instruments=tuple(idx))


def multiplier_weights(panel: Panel, j: int, h: int,
                       controls: Optional[ControlSpec] = None) -> np.ndarray:
    """Estimated sectoral weights of the cumulative multiplier for instrument ``j``.

    ``w_s = sum z^ x~_s^ / sum_s' sum z^ x~_s'^``; they sum to one.
    """
    Zp, _, Xbar = residualized_moments(panel, [j], h, controls, cumulative=True, sectoral=True)
    num = np.einsum("t,ts->s", Zp[:, 0], Xbar[:, 0, :])
    total = num.sum()
    scale = np.sqrt(np.sum(Zp[:, 0] ** 2) * np.sum(Xbar[:, 0, :].sum(axis=1) ** 2))
    if not abs(total) > RELEVANCE_TOL * scale:
        raise RelevanceError("instrument is uncorrelated with cumulative x after controls")
    return num / total


def decompose_multiplier(panel: Panel, j: int, h: int, controls: Optional[ControlSpec] = None,
                         instruments=None, bandwidth: Optional[int] = None) -> Decomposition:
    """Split the cumulative LP-IV multiplier of instrument ``j`` into sectoral parts.

    Sectoral multipliers come from :func:`sectoral_irf_estimate` in cumulative
    mode using ``instruments`` (all by default). When that system is just
    identified and contains ``j``, ``beta = sum_s w_s m_s`` holds exactly; the
    identity is checked and a violation raises ``RuntimeError``.
    """
    idx = _instrument_indices(panel, instruments)
    beta = lpiv_estimate(panel, j, h, controls, cumulative=True, bandwidth=bandwidth)
    weights = multiplier_weights(panel, j, h, controls)
    comps = sectoral_irf_estimate(panel, idx, h, controls, cumulative=True, bandwidth=bandwidth)
    recomposed = recompose_multiplier(weights, comps.point)
    gap = abs(beta.point - recomposed)
    if len(idx) == panel.S and j in idx and gap > IDENTITY_TOL * max(1.0, abs(beta.point)):
        raise RuntimeError(f"decomposition identity failed at h={h}: gap {gap:.3g}")
    beta.weights = weights
    return Decomposition(beta=beta, weights=weights, multipliers=comps, recomposed=recomposed,
                         gap=gap)


# --- GMM test of no contemporaneous inter-sectoral effects -----------------

def _offdiag_index(S: int) -> list:
    return [(r, c) for r in range(S) for c in range(S) if r != c]


class _NoIntersectoralProblem:
    """Parameter layout ``[psi off-diagonals, theta, free Lambda entries]``.

    Moments, stacked per instrument ``i``:
    ``z_i^ (y^ - X^' Psi^{-1'} theta)`` and, when a loading pattern is given,
    ``z_i^ x_r^ - (Lambda Psi')_{ir}`` for every sector ``r``.
    """

    def __init__(self, Zp, Ups, Xbar, pattern):
        self.Zp, self.Ups, self.Xbar = Zp, Ups, Xbar
        self.n, self.l, self.S = Xbar.shape
        self.off = _offdiag_index(self.S)
        self.pattern = pattern
        self.n_lambda = 0 if pattern is None else int(pattern.sum())
        self.k = len(self.off) + self.S + self.n_lambda
        self.C_ZX, self.C_Zy = _moment_matrices(Zp, Ups, Xbar)
        self.ZX_t = Zp[:, :, None] * Xbar

    def unpack(self, phi):
        S = self.S
        psi = np.eye(S)
        for value, (r, c) in zip(phi[: len(self.off)], self.off):
            psi[r, c] = value
        theta = phi[len(self.off) : len(self.off) + S]
        lam = None
        if self.pattern is not None:
            lam = np.zeros((self.l, S))
            lam[self.pattern] = phi[len(self.off) + S :]
        return psi, theta, lam

    def _solve_b(self, psi, theta):
        return np.linalg.solve(psi.T, theta)

    def mean_moments(self, phi):
        psi, theta, lam = self.unpack(phi)
        g = self.C_Zy - self.C_ZX @ self._solve_b(psi, theta)
        if lam is None:
            return g
        return np.concatenate([g, (self.C_ZX - lam @ psi.T).ravel()])

    def moments(self, phi):
        psi, theta, lam = self.unpack(phi)
        g = _moments_at(self.Zp, self.Ups, self.Xbar, self._solve_b(psi, theta))
        if lam is None:
            return g
        g2 = (self.ZX_t - lam @ psi.T).reshape(self.n, -1)
        return np.hstack([g, g2])

    def jacobian(self, phi, step=1e-6):
        base = self.mean_moments(phi)
        J = np.empty((base.size, self.k))
        for k in range(self.k):
            e = np.zeros(self.k)
            e[k] = step * max(1.0, abs(phi[k]))
            J[:, k] = (self.mean_moments(phi + e) - self.mean_moments(phi - e)) / (2 * e[k])
        return J

    def start(self, theta0):
        phi = np.zeros(self.k)
        phi[len(self.off) : len(self.off) + self.S] = theta0
        if self.pattern is not None:
            phi[len(self.off) + self.S :] = self.C_ZX[self.pattern]
        return phi


def _gauss_newton(problem: _NoIntersectoralProblem, phi, W, max_iter, tol):
    def criterion(p):
        g = problem.mean_moments(p)
        return float(g @ W @ g)

    q = criterion(phi)
    trace = [q]
    for it in range(1, max_iter + 1):
        g = problem.mean_moments(phi)
        J = problem.jacobian(phi)
        A = J.T @ W @ J
        try:
            step = -np.linalg.solve(A, J.T @ W @ g)
        except np.linalg.LinAlgError as exc:
            raise SingularityError("Gauss-Newton normal matrix is singular", trace) from exc
        t = 1.0
        while True:
            cand = phi + t * step
            psi, _, _ = problem.unpack(cand)
            if abs(np.linalg.det(psi)) > 1e-10:
                q_new = criterion(cand)
                if q_new <= q or t < 1e-8:
                    break
            elif t < 1e-8:
                raise SingularityError("Psi_0X is singular along the search direction", trace)
            t *= 0.5
        phi = cand
        trace.append(q_new)
        converged = abs(q - q_new) <= tol or np.max(np.abs(t * step)) <= tol
        q = q_new
        if converged:
            return phi, it, trace
    raise ConvergenceError(f"GMM did not converge in {max_iter} iterations", trace)


def gmm_test_no_intersectoral(panel: Panel, instruments=None, h: int = 0,
                              controls: Optional[ControlSpec] = None,
                              loading_pattern=None, bandwidth: Optional[int] = None,
                              max_iter: int = 200, tol: float = 1e-10) -> GmmTestResult:
    """Wald test of ``Psi_0X = I`` (no contemporaneous inter-sectoral effects).

    Parameters
    ----------
    panel : Panel
        Panel with ``S`` sectoral series and at least ``S**2`` instruments.
    instruments : sequence of int, optional
    h : int
        Horizon of the outcome equation.
    controls : ControlSpec, optional
    loading_pattern : array_like of bool, shape (l, S), optional
        ``True`` where instrument ``i`` may covary with sectoral shock ``s``.
        The outcome moment alone depends on ``Psi_0X`` only through
        ``Psi_0X^{-1'} theta``, so the off-diagonal entries are identified only
        once zero restrictions on the instrument-shock covariances are added;
        without them the test raises :class:`IdentificationError` for S >= 2.
    bandwidth : int, optional
        Newey-West bandwidth, ``h + 1`` by default.
    max_iter, tol : Gauss-Newton controls.

    Returns
    -------
    GmmTestResult
        Wald statistic on the ``S**2 - S`` off-diagonal entries with its
        chi-square p-value.
    """
    idx = _instrument_indices(panel, instruments)
    S = panel.S
    if S == 0:
        raise InvalidArgumentError("panel has no sectoral series")
    l = len(idx)
    if l < S * S:
        raise UnderIdentificationError(f"the test needs at least S^2 = {S * S} instruments, got {l}")
    Zp, Ups, Xbar = residualized_moments(panel, idx, h, controls, sectoral=True)
    B = h + 1 if bandwidth is None else int(bandwidth)
    first = _linear_iv(Zp, Ups, Xbar, h, "2sls", B)
    if S == 1:
        return GmmTestResult(statistic=0.0, dof=0, p_value=1.0, psi0=np.eye(1), theta=first[0],
                             covariance=first[2])
    pattern = None
    if loading_pattern is not None:
        pattern = np.asarray(loading_pattern, dtype=bool)
        if pattern.shape != (l, S):
            raise InvalidArgumentError(f"loading pattern must have shape {(l, S)}")
    problem = _NoIntersectoralProblem(Zp, Ups, Xbar, pattern)
    phi = problem.start(first[0])
    J = problem.jacobian(phi)
    if np.linalg.matrix_rank(J, tol=1e-8 * max(1.0, np.abs(J).max())) < problem.k:
        raise IdentificationError(
            "Psi_0X is not identified by the supplied moments: the outcome moment depends on it "
            "only through Psi_0X^{-1'} theta; supply a loading_pattern with zero restrictions"
        )
    n = problem.n
    phi, it1, trace = _gauss_newton(problem, phi, np.eye(J.shape[0]), max_iter, tol)
    Omega, _ = psd_clip(newey_west(problem.moments(phi), B))
    W = _invert_weight(Omega, "first-step long-run covariance of the test moments")
    phi, it2, trace2 = _gauss_newton(problem, phi, W, max_iter, tol)
    J = problem.jacobian(phi)
    A = J.T @ W @ J
    try:
        cov = np.linalg.inv(A) / n
    except np.linalg.LinAlgError as exc:
        raise IdentificationError("singular GMM information matrix at the estimate") from exc
    m = len(problem.off)
    r = phi[:m]
    V = cov[:m, :m]
    stat = float(r @ np.linalg.solve(V, r))
    psi, theta, _ = problem.unpack(phi)
    g = problem.mean_moments(phi)
    return GmmTestResult(statistic=stat, dof=m, p_value=float(stats.chi2.sf(stat, m)), psi0=psi,
                         theta=theta, covariance=cov, iterations=it1 + it2,
                         criterion=float(n * g @ W @ g), trace=trace + trace2)
