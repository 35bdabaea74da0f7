"""Simulation from a fitted MS-VAR and Monte Carlo re-estimation."""

from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .em import PARAM_NAMES, EstimationConfig, estimate, model_to_params
from .errors import DataError, DegenerateCovarianceError, EstimationError, MonteCarloError
from .model import MIN_SERIES_LENGTH, MsVarModel, SeriesPair, TransitionMatrix, require_valid

BURN_IN = 50

PARAM_BLOCKS = {
    "a11": "regime1", "a12": "regime1", "a21": "regime1", "a22": "regime1",
    "psi1": "regime2", "omega2": "regime2",
    "sigma1_11": "sigma1", "sigma1_12": "sigma1", "sigma1_22": "sigma1",
    "sigma2_11": "sigma2", "sigma2_12": "sigma2", "sigma2_22": "sigma2",
    "p11": "transition", "p22": "transition",
}


@dataclass(frozen=True)
class SimulatedPath:
    data: SeriesPair
    regimes: np.ndarray  # 1 or 2 per period


def simulate(model: MsVarModel, T: int, seed=None, *, burn_in: int = BURN_IN,
             y0=None, unit_noise: bool = False, start_year: int = 1) -> SimulatedPath:
    """Draw ``T`` observations and their regime path from ``model``.

    The chain starts from ``init_dist`` and the state vector from ``y0``
    (zero by default); the first ``burn_in`` periods are dropped. Shocks are
    standard normal scaled by the lower Cholesky factor of the active
    regime's covariance, or left unscaled with ``unit_noise``.
    """
    require_valid(model)
    if T < MIN_SERIES_LENGTH:
        raise DataError(f"T must be >= {MIN_SERIES_LENGTH}")
    rng = np.random.default_rng(seed)
    total = T + burn_in

    if unit_noise:
        chol = (np.eye(2), np.eye(2))
    else:
        try:
            chol = tuple(np.linalg.cholesky(s.matrix) for s in model.sigmas)
        except np.linalg.LinAlgError:
            raise DegenerateCovarianceError("Cholesky failure: covariance not positive definite") from None
    A = (model.regime1.matrix, model.regime2.matrix)
    P = model.trans.matrix

    u = rng.random(total)
    shocks = rng.standard_normal((total, 2))

    states = np.empty(total, dtype=np.int64)
    states[0] = 0 if u[0] < model.init_dist[0] else 1
    for t in range(1, total):
        states[t] = 0 if u[t] < P[states[t - 1], 0] else 1

    out = np.empty((total, 2))
    out[0] = np.zeros(2) if y0 is None else np.asarray(y0, dtype=float)
    for t in range(1, total):
        s = states[t]
        out[t] = A[s] @ out[t - 1] + chol[s] @ shocks[t]

    kept = out[burn_in:]
    data = SeriesPair(tuple(range(start_year, start_year + T)), tuple(kept[:, 0]),
                      tuple(kept[:, 1]), ("y", "f"))
    return SimulatedPath(data, states[burn_in:] + 1)


@dataclass(frozen=True)
class McSummary:
    """Replication means with 95% intervals per free parameter.

    ``ci_low``/``ci_high`` bound the Monte Carlo mean
    (``mean -/+ 1.96 sd / sqrt(n)``); ``pct_low``/``pct_high`` are the 2.5th
    and 97.5th percentiles of the replication distribution itself.
    """

    means: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    pct_low: np.ndarray
    pct_high: np.ndarray
    mean_transition: TransitionMatrix
    n_success: int
    n_total: int
    failures: tuple[str, ...] = field(default_factory=tuple)
    param_names: tuple[str, ...] = PARAM_NAMES

    def row(self, name: str) -> tuple[float, float, float]:
        i = self.param_names.index(name)
        return float(self.means[i]), float(self.ci_low[i]), float(self.ci_high[i])

    def percentile_row(self, name: str) -> tuple[float, float]:
        i = self.param_names.index(name)
        return float(self.pct_low[i]), float(self.pct_high[i])


def _replicate(args):
    r, child, model, T, est_config, unit_noise = args
    sim_seed, est_seed = child.spawn(2)
    try:
        path = simulate(model, T, sim_seed, unit_noise=unit_noise)
        res = estimate(path.data, replace(est_config, seed=est_seed, compute_se=False))
    except (EstimationError, DataError) as exc:
        return r, None, f"rep {r}: {exc}"
    if not res.converged:
        return r, None, f"rep {r}: EM did not converge in {res.iterations} iterations"
    return r, model_to_params(res.model), None


def summarize(params: np.ndarray, n_total: int, failures=()) -> McSummary:
    """Summary of a (reps, 14) array of estimates.

    Each column is sorted before any reduction, so the result does not
    depend on replication order.
    """
    cols = np.sort(np.asarray(params, dtype=float), axis=0)
    n = cols.shape[0]
    means = np.array([np.mean(cols[:, i]) for i in range(cols.shape[1])])
    sd = np.array([np.std(cols[:, i], ddof=1) for i in range(cols.shape[1])]) \
        if n > 1 else np.zeros(cols.shape[1])
    half = 1.96 * sd / np.sqrt(n)
    lo, hi = np.percentile(cols, [2.5, 97.5], axis=0)
    p11, p22 = means[PARAM_NAMES.index("p11")], means[PARAM_NAMES.index("p22")]
    return McSummary(
        means=means,
        ci_low=means - half,
        ci_high=means + half,
        pct_low=lo,
        pct_high=hi,
        mean_transition=TransitionMatrix.from_diagonal(p11, p22),
        n_success=n,
        n_total=n_total,
        failures=tuple(failures),
    )


def mc_study(model: MsVarModel, reps: int, T: int, master_seed=0,
             est_config: EstimationConfig | None = None, *,
             unit_noise: bool = False, n_jobs: int = 1) -> McSummary:
    """Simulate ``reps`` paths from ``model``, re-estimate each, summarize.

    Replication ``r`` draws both its path and its EM restarts from the
    ``r``-th child of ``master_seed``'s seed sequence, so serial and
    parallel runs agree bit for bit. Replications whose estimation fails or
    does not converge are excluded and listed in ``failures``.
    """
    if reps < 2:
        raise DataError("Monte Carlo needs reps >= 2")
    require_valid(model)
    est_config = est_config or EstimationConfig()
    ss = master_seed if isinstance(master_seed, np.random.SeedSequence) \
        else np.random.SeedSequence(master_seed)
    jobs = [(r, child, model, T, est_config, unit_noise)
            for r, child in enumerate(ss.spawn(reps))]

    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            outcomes = list(pool.map(_replicate, jobs))
    else:
        outcomes = [_replicate(job) for job in jobs]
    outcomes.sort(key=lambda o: o[0])

    good = [p for _, p, _ in outcomes if p is not None]
    failures = [msg for _, _, msg in outcomes if msg is not None]
    if len(good) < reps / 2:
        raise MonteCarloError("Monte Carlo unstable", failures)
    return summarize(np.vstack(good), reps, failures)


def summary_to_csv(summary: McSummary) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["block", "parameter", "mean", "ci_low", "ci_high", "pct_2.5", "pct_97.5"])
    for name in summary.param_names:
        mean, lo, hi = summary.row(name)
        plo, phi = summary.percentile_row(name)
        w.writerow([PARAM_BLOCKS[name], name] + [f"{v:.6g}" for v in (mean, lo, hi, plo, phi)])
        if name in ("p11", "p22"):
            other = "p12" if name == "p11" else "p21"
            w.writerow(["transition", other]
                       + [f"{v:.6g}" for v in (1 - mean, 1 - hi, 1 - lo, 1 - phi, 1 - plo)])
    w.writerow(["meta", "n_success", summary.n_success, "", "", "", ""])
    w.writerow(["meta", "n_total", summary.n_total, "", "", "", ""])
    return buf.getvalue()
