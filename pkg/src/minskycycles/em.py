"""Maximum-likelihood estimation of the two-regime MS-VAR(1) by EM.

The E-step runs the Hamilton filter forward and the Kim smoother backward;
the M-step solves the probability-weighted regressions in closed form.
The first observation only conditions the VAR, so every per-period array
here has ``T - 1`` rows, row ``k`` belonging to observation ``k + 2``
(``data.years[k + 1]``).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import (
    DataError,
    DegenerateCovarianceError,
    EstimationError,
    RegimeStarvationError,
    SmootherError,
    UnderflowError,
)
from .model import (
    Covariance2,
    MsVarModel,
    RegimeCoefficients,
    Restriction,
    SeriesPair,
    TransitionMatrix,
    require_valid,
)

PARAM_NAMES = (
    "a11", "a12", "a21", "a22",
    "psi1", "omega2",
    "sigma1_11", "sigma1_12", "sigma1_22",
    "sigma2_11", "sigma2_12", "sigma2_22",
    "p11", "p22",
)

VARIANCE_FLOOR = 1e-8
STARVATION_WEIGHT = 1e-6
LOG_2PI = math.log(2.0 * math.pi)


class SingularInformationWarning(RuntimeWarning):
    """The numerical Hessian is not negative definite in some direction."""


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class FilterOutput:
    """Regime probabilities for observations 2..T plus the log-likelihood.

    ``filtered[k, j]`` is P(s = j+1 | data through that period),
    ``predicted[k, j]`` conditions on the period before, and ``smoothed``
    (None until :func:`kim_smoother` runs) conditions on the full sample.
    """

    filtered: np.ndarray
    predicted: np.ndarray
    loglik: float
    smoothed: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "filtered", _frozen(self.filtered))
        object.__setattr__(self, "predicted", _frozen(self.predicted))
        if self.smoothed is not None:
            object.__setattr__(self, "smoothed", _frozen(self.smoothed))
        object.__setattr__(self, "loglik", float(self.loglik))


@dataclass(frozen=True)
class EstimationConfig:
    max_iter: int = 1000
    tol: float = 1e-8
    restarts: int = 10
    seed: int | np.random.SeedSequence = 0
    compute_se: bool = True

    def __post_init__(self):
        if self.max_iter < 0:
            raise DataError("max_iter must be >= 0")
        if self.restarts < 1:
            raise DataError("restarts must be >= 1")
        if not (self.tol > 0):
            raise DataError("tol must be positive")


@dataclass(frozen=True)
class EstimationResult:
    model: MsVarModel
    std_errors: np.ndarray
    filter: FilterOutput
    iterations: int
    converged: bool
    loglik_path: tuple[float, ...]
    se_warning: bool = False
    restart: int = 0
    restart_failures: tuple[str, ...] = field(default_factory=tuple)

    @property
    def loglik(self) -> float:
        return self.filter.loglik

    def se_dict(self) -> dict[str, float]:
        return dict(zip(PARAM_NAMES, (float(v) for v in self.std_errors)))


# -- densities -----------------------------------------------------------------

def _check_pd(sigma: Covariance2):
    if not sigma.is_positive_definite():
        raise DegenerateCovarianceError(
            f"degenerate covariance (v11={sigma.v11:.6g}, v12={sigma.v12:.6g}, "
            f"v22={sigma.v22:.6g})"
        )


def conditional_density(obs, lag, coeffs: RegimeCoefficients, sigma: Covariance2) -> float:
    """Bivariate normal density of ``obs - A @ lag`` under N(0, sigma)."""
    _check_pd(sigma)
    r1 = obs[0] - (coeffs.a11 * lag[0] + coeffs.a12 * lag[1])
    r2 = obs[1] - (coeffs.a21 * lag[0] + coeffs.a22 * lag[1])
    det = sigma.determinant
    quad = (sigma.v22 * r1 * r1 - 2.0 * sigma.v12 * r1 * r2 + sigma.v11 * r2 * r2) / det
    return math.exp(-0.5 * quad) / (2.0 * math.pi * math.sqrt(det))


def _log_density_column(Z, X, coeffs: RegimeCoefficients, sigma: Covariance2):
    _check_pd(sigma)
    r1 = Z[:, 0] - (coeffs.a11 * X[:, 0] + coeffs.a12 * X[:, 1])
    r2 = Z[:, 1] - (coeffs.a21 * X[:, 0] + coeffs.a22 * X[:, 1])
    det = sigma.determinant
    quad = (sigma.v22 * r1 * r1 - 2.0 * sigma.v12 * r1 * r2 + sigma.v11 * r2 * r2) / det
    return -LOG_2PI - 0.5 * math.log(det) - 0.5 * quad


def _log_densities(model: MsVarModel, Z, X):
    out = np.empty((Z.shape[0], 2))
    out[:, 0] = _log_density_column(Z, X, model.regime1, model.sigma1)
    out[:, 1] = _log_density_column(Z, X, model.regime2, model.sigma2)
    return out


def _lagged(data):
    if isinstance(data, SeriesPair):
        obs = data.as_array()
    else:
        obs = np.asarray(data, dtype=float)
        if obs.ndim != 2 or obs.shape[1] != 2 or obs.shape[0] < 2:
            raise DataError("observations must be a (T, 2) array with T >= 2")
        if not np.all(np.isfinite(obs)):
            raise DataError("observations contain non-finite values")
    return obs[1:], obs[:-1]


# -- recursions ----------------------------------------------------------------

@njit(cache=True)
def _forward(logdens, P, init):
    n = logdens.shape[0]
    filtered = np.empty((n, 2))
    predicted = np.empty((n, 2))
    p0 = init[0]
    p1 = init[1]
    loglik = 0.0
    for t in range(n):
        predicted[t, 0] = p0
        predicted[t, 1] = p1
        a0 = math.log(p0) + logdens[t, 0] if p0 > 0.0 else -np.inf
        a1 = math.log(p1) + logdens[t, 1] if p1 > 0.0 else -np.inf
        m = max(a0, a1)
        if not math.isfinite(m):
            return filtered, predicted, loglik, t
        w0 = math.exp(a0 - m)
        w1 = math.exp(a1 - m)
        s = w0 + w1
        loglik += m + math.log(s)
        f0 = w0 / s
        f1 = w1 / s
        filtered[t, 0] = f0
        filtered[t, 1] = f1
        q0 = f0 * P[0, 0] + f1 * P[1, 0]
        q1 = f0 * P[0, 1] + f1 * P[1, 1]
        tot = q0 + q1
        p0 = q0 / tot
        p1 = q1 / tot
    return filtered, predicted, loglik, -1


@njit(cache=True)
def _backward(filtered, predicted, P):
    n = filtered.shape[0]
    smoothed = np.empty((n, 2))
    smoothed[n - 1, 0] = filtered[n - 1, 0]
    smoothed[n - 1, 1] = filtered[n - 1, 1]
    for t in range(n - 2, -1, -1):
        for i in range(2):
            acc = 0.0
            for j in range(2):
                num = P[i, j] * smoothed[t + 1, j]
                if num == 0.0:
                    continue
                den = predicted[t + 1, j]
                if den <= 0.0:
                    return smoothed, t + 1
                acc += num / den
            smoothed[t, i] = filtered[t, i] * acc
        tot = smoothed[t, 0] + smoothed[t, 1]
        smoothed[t, 0] /= tot
        smoothed[t, 1] /= tot
    return smoothed, -1


def _run_forward(model: MsVarModel, Z, X):
    logdens = _log_densities(model, Z, X)
    init = np.asarray(model.init_dist, dtype=float)
    filtered, predicted, loglik, bad = _forward(logdens, model.trans.matrix, init)
    if bad >= 0:
        raise UnderflowError(f"numerical underflow at t={bad + 2}")
    return FilterOutput(filtered, predicted, loglik)


def hamilton_filter(model: MsVarModel, data) -> FilterOutput:
    """Forward filter; ``smoothed`` is left as None.

    ``data`` is a :class:`SeriesPair` or any ``(T, 2)`` array with ``T >= 2``;
    the ten-observation minimum applies to estimation only.

    The log-likelihood accumulates ``log sum_j density_j * predicted_j`` over
    observations 2..T, in log space. ``model.init_dist`` is the predicted
    distribution of the second observation.
    """
    require_valid(model)
    Z, X = _lagged(data)
    return _run_forward(model, Z, X)


def kim_smoother(filt: FilterOutput, trans: TransitionMatrix) -> FilterOutput:
    """Backward pass filling ``smoothed``; the last row equals ``filtered``."""
    smoothed, bad = _backward(
        np.asarray(filt.filtered), np.asarray(filt.predicted), trans.matrix
    )
    if bad >= 0:
        raise SmootherError(f"smoother division by zero at row {bad}")
    return FilterOutput(filt.filtered, filt.predicted, filt.loglik, smoothed)


def pairwise_probabilities(filt: FilterOutput, trans: TransitionMatrix) -> np.ndarray:
    """Joint smoothed probabilities ``xi[k, i, j] = P(s_k = i, s_{k+1} = j | all)``.

    Shape ``(n - 1, 2, 2)`` for ``n`` filter rows. Terms whose numerator is
    zero contribute zero even where the predicted probability vanishes.
    """
    if filt.smoothed is None:
        raise DataError("pairwise probabilities need smoothed probabilities")
    P = trans.matrix
    f_prev = filt.filtered[:-1]
    ratio_num = filt.smoothed[1:]
    ratio_den = filt.predicted[1:]
    ratio = np.divide(ratio_num, ratio_den, out=np.zeros_like(ratio_num),
                      where=ratio_num != 0)
    return f_prev[:, :, None] * P[None, :, :] * ratio[:, None, :]


# -- M-step --------------------------------------------------------------------

def weighted_var_ols(Z, X, w):
    """Weighted least squares of every column of ``Z`` on ``X`` (no intercept).

    Returns the coefficient matrix ``A`` with ``Z ~ X @ A.T``.
    """
    Xw = X * w[:, None]
    return np.linalg.solve(Xw.T @ X, Xw.T @ Z).T


def _diagonal_gls(Z, X, w, sigma: Covariance2):
    """Weighted GLS for ``diag(psi, omega)`` given the error covariance.

    With a diagonal covariance this is two scalar regressions; otherwise the
    cross-equation correlation enters through the precision matrix.
    """
    Om = np.linalg.inv(sigma.matrix)
    x1, x2 = X[:, 0], X[:, 1]
    z1, z2 = Z[:, 0], Z[:, 1]
    s11 = np.sum(w * x1 * x1)
    s22 = np.sum(w * x2 * x2)
    s12 = np.sum(w * x1 * x2)
    lhs = np.array([[Om[0, 0] * s11, Om[0, 1] * s12],
                    [Om[0, 1] * s12, Om[1, 1] * s22]])
    rhs = np.array([
        Om[0, 0] * np.sum(w * x1 * z1) + Om[0, 1] * np.sum(w * x1 * z2),
        Om[0, 1] * np.sum(w * x2 * z1) + Om[1, 1] * np.sum(w * x2 * z2),
    ])
    return np.linalg.solve(lhs, rhs)


def _weighted_cov(R, w):
    S = (R * w[:, None]).T @ R / np.sum(w)
    return Covariance2(max(S[0, 0], VARIANCE_FLOOR), 0.5 * (S[0, 1] + S[1, 0]),
                       max(S[1, 1], VARIANCE_FLOOR))


def _m_step(model: MsVarModel, Z, X, filt: FilterOutput) -> MsVarModel:
    sm = filt.smoothed
    w1, w2 = sm[:, 0], sm[:, 1]
    for j, w in enumerate((w1, w2), 1):
        if np.sum(w) < STARVATION_WEIGHT:
            raise RegimeStarvationError(f"regime starvation (regime {j})")
    try:
        A1 = weighted_var_ols(Z, X, w1)
        sigma1 = _weighted_cov(Z - X @ A1.T, w1)
        psi, omega = _diagonal_gls(Z, X, w2, model.sigma2)
        A2 = np.array([[psi, 0.0], [0.0, omega]])
        sigma2 = _weighted_cov(Z - X @ A2, w2)
    except np.linalg.LinAlgError as exc:
        raise EstimationError(f"singular M-step regression: {exc}") from None

    if sm.shape[0] > 1:
        xi = pairwise_probabilities(filt, model.trans).sum(axis=0)
        rows = xi.sum(axis=1)
        P = np.empty((2, 2))
        for i in range(2):
            if rows[i] > 0:
                P[i] = xi[i] / rows[i]
            else:
                P[i] = model.trans.matrix[i]
        P[:, 1] = 1.0 - P[:, 0]
    else:
        P = model.trans.matrix

    init = (float(sm[0, 0]), 1.0 - float(sm[0, 0]))
    return MsVarModel(
        regime1=RegimeCoefficients.full(A1),
        regime2=RegimeCoefficients.diagonal(psi, omega),
        sigma1=sigma1,
        sigma2=sigma2,
        trans=TransitionMatrix.from_matrix(P),
        init_dist=init,
    )


def _e_step(model: MsVarModel, Z, X) -> FilterOutput:
    return kim_smoother(_run_forward(model, Z, X), model.trans)


def em_step(model: MsVarModel, data: SeriesPair) -> MsVarModel:
    """One EM iteration: smooth under ``model``, then re-fit every parameter.

    Regime 1 gets the weighted OLS of the full VAR; regime 2 gets the
    weighted GLS of the diagonal system at the current regime-2 covariance,
    after which both covariances, the transition matrix and the initial
    distribution are updated. Each update maximizes the expected complete
    log-likelihood given the others, so the likelihood never decreases.
    """
    require_valid(model)
    Z, X = _lagged(data)
    return _m_step(model, Z, X, _e_step(model, Z, X))


# -- estimation ----------------------------------------------------------------

def initial_model(data: SeriesPair) -> MsVarModel:
    """OLS anchors: full VAR for regime 1, per-equation AR(1) for regime 2."""
    Z, X = _lagged(data)
    w = np.ones(Z.shape[0])
    try:
        A1 = weighted_var_ols(Z, X, w)
    except np.linalg.LinAlgError:
        raise EstimationError("singular lagged design: cannot initialize EM") from None
    R = Z - X @ A1.T
    S = R.T @ R / R.shape[0]
    sigma = Covariance2(max(S[0, 0], VARIANCE_FLOOR), 0.5 * (S[0, 1] + S[1, 0]),
                        max(S[1, 1], VARIANCE_FLOOR))
    psi = float(X[:, 0] @ Z[:, 0] / (X[:, 0] @ X[:, 0]))
    omega = float(X[:, 1] @ Z[:, 1] / (X[:, 1] @ X[:, 1]))
    trans = TransitionMatrix(0.8, 0.2, 0.2, 0.8)
    return MsVarModel(
        RegimeCoefficients.full(A1),
        RegimeCoefficients.diagonal(psi, omega),
        sigma, sigma, trans,
    )


def _perturbed(model: MsVarModel, rng: np.random.Generator) -> MsVarModel:
    A1 = model.regime1.matrix + rng.normal(0.0, 0.1, size=(2, 2))
    d = rng.normal(0.0, 0.1, size=2)
    return MsVarModel(
        RegimeCoefficients.full(A1),
        RegimeCoefficients.diagonal(model.regime2.a11 + d[0], model.regime2.a22 + d[1]),
        model.sigma1, model.sigma2, model.trans, model.init_dist,
    )


def _run_em(start: MsVarModel, Z, X, max_iter, tol):
    model = start
    filt = _e_step(model, Z, X)
    path = [filt.loglik]
    converged = False
    it = 0
    while it < max_iter:
        new_model = _m_step(model, Z, X, filt)
        new_filt = _e_step(new_model, Z, X)
        it += 1
        path.append(new_filt.loglik)
        model, filt = new_model, new_filt
        if abs(path[-1] - path[-2]) < tol:
            converged = True
            break
    return model, filt, it, converged, tuple(path)


def _seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def estimate(data: SeriesPair, config: EstimationConfig | None = None) -> EstimationResult:
    """Fit the MS-VAR by EM from several starting points.

    Restart 0 starts at the OLS anchors of :func:`initial_model`; restart
    ``r > 0`` adds N(0, 0.1^2) noise to the coefficient entries, drawn from
    the ``r``-th child of the seed sequence. The run with the highest final
    log-likelihood wins; ties (within 1e-10) go to the lowest restart index.
    """
    config = config or EstimationConfig()
    Z, X = _lagged(data)
    anchor = initial_model(data)
    children = _seed_sequence(config.seed).spawn(config.restarts)

    best = None
    failures = []
    for r, child in enumerate(children):
        start = anchor if r == 0 else _perturbed(anchor, np.random.default_rng(child))
        try:
            run = _run_em(start, Z, X, config.max_iter, config.tol)
        except EstimationError as exc:
            failures.append(f"restart {r}: {exc}")
            continue
        if best is None or run[1].loglik > best[1][1].loglik + 1e-10:
            best = (r, run)

    if best is None:
        raise EstimationError("estimation failed", failures)

    r, (model, filt, iterations, converged, path) = best
    if config.compute_se:
        se, ok = _std_errors_flagged(model, Z, X)
    else:
        se, ok = np.full(len(PARAM_NAMES), np.nan), True
    return EstimationResult(
        model=model,
        std_errors=_frozen(se),
        filter=filt,
        iterations=iterations,
        converged=converged,
        loglik_path=path,
        se_warning=not ok,
        restart=r,
        restart_failures=tuple(failures),
    )


# -- standard errors -----------------------------------------------------------

def model_to_params(model: MsVarModel) -> np.ndarray:
    r1, r2, s1, s2, tr = model.regime1, model.regime2, model.sigma1, model.sigma2, model.trans
    return np.array([
        r1.a11, r1.a12, r1.a21, r1.a22,
        r2.a11, r2.a22,
        s1.v11, s1.v12, s1.v22,
        s2.v11, s2.v12, s2.v22,
        tr.p11, tr.p22,
    ])


def params_to_model(theta, init_dist) -> MsVarModel:
    t = [float(v) for v in theta]
    return MsVarModel(
        RegimeCoefficients(t[0], t[1], t[2], t[3], Restriction.FULL),
        RegimeCoefficients.diagonal(t[4], t[5]),
        Covariance2(t[6], t[7], t[8]),
        Covariance2(t[9], t[10], t[11]),
        TransitionMatrix.from_diagonal(t[12], t[13]),
        init_dist,
    )


def _loglik_at(theta, init_dist, Z, X) -> float:
    p11, p22 = theta[12], theta[13]
    if not (0.0 <= p11 <= 1.0 and 0.0 <= p22 <= 1.0):
        return np.nan
    try:
        return _run_forward(params_to_model(theta, init_dist), Z, X).loglik
    except EstimationError:
        return np.nan


def numerical_hessian(func, theta, rel_step=1e-5, min_step=1e-5):
    """Central-difference Hessian with step ``max(min_step, rel_step*|theta_i|)``.

    Returns ``(H, f0, steps)``.
    """
    theta = np.asarray(theta, dtype=float)
    k = theta.size
    h = np.maximum(min_step, rel_step * np.abs(theta))
    f0 = func(theta)
    H = np.empty((k, k))

    def shifted(*moves):
        t = theta.copy()
        for i, s in moves:
            t[i] += s * h[i]
        return func(t)

    for i in range(k):
        H[i, i] = (shifted((i, 1)) - 2.0 * f0 + shifted((i, -1))) / (h[i] * h[i])
        for j in range(i):
            v = (shifted((i, 1), (j, 1)) - shifted((i, 1), (j, -1))
                 - shifted((i, -1), (j, 1)) + shifted((i, -1), (j, -1)))
            H[i, j] = H[j, i] = v / (4.0 * h[i] * h[j])
    return H, f0, h


def hessian_std_errors(func, theta):
    """Standard errors from the inverse negative Hessian of a log-likelihood.

    A parameter whose curvature is non-finite, non-negative, or lost in
    rounding noise gets NaN. The remaining block must be negative definite
    or every entry is NaN. Returns ``(se, ok)``; ``ok`` is False whenever any
    entry is NaN.
    """
    H, f0, h = numerical_hessian(func, theta)
    k = H.shape[0]
    se = np.full(k, np.nan)
    if not np.isfinite(f0):
        return se, False
    noise = 1e3 * np.finfo(float).eps * max(1.0, abs(f0)) / (h * h)
    curv = -np.diag(H)
    bad = ~np.isfinite(H).all(axis=1) | ~(curv > noise)
    keep = np.flatnonzero(~bad)
    if keep.size == 0:
        return se, False
    info = -H[np.ix_(keep, keep)]
    scale = 1.0 / np.sqrt(np.diag(info))
    scaled = info * scale[:, None] * scale[None, :]
    try:
        L = np.linalg.cholesky(scaled)
    except np.linalg.LinAlgError:
        return se, False
    inv_scaled = np.linalg.inv(L).T @ np.linalg.inv(L)
    var = np.diag(inv_scaled) * scale * scale
    se[keep] = np.sqrt(var)
    return se, not bad.any()


def _std_errors_flagged(model: MsVarModel, Z, X):
    init = model.init_dist
    return hessian_std_errors(lambda th: _loglik_at(th, init, Z, X), model_to_params(model))


def std_errors(model: MsVarModel, data: SeriesPair) -> np.ndarray:
    """Per-parameter standard errors, ordered as :data:`PARAM_NAMES`.

    Square roots of the diagonal of the inverse negative numerical Hessian
    of the log-likelihood in the 14 free parameters (``init_dist`` is held
    fixed). Directions without curvature yield NaN and a
    :class:`SingularInformationWarning`.
    """
    require_valid(model)
    Z, X = _lagged(data)
    se, ok = _std_errors_flagged(model, Z, X)
    if not ok:
        warnings.warn(
            "log-likelihood Hessian is not negative definite; some standard "
            "errors are undefined", SingularInformationWarning, stacklevel=2,
        )
    return se
