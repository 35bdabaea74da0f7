"""End-to-end run: CSV in, estimation tables and diagnostics out.

Stages run in order: ingest, HP detrending of both series, Dickey-Fuller
tests on the cycles, EM estimation, cycle diagnosis of both regimes,
Ljung-Box tests on the regime residuals, and optionally a Monte Carlo
re-estimation study. Every artifact is rendered in memory first and only
written once all stages succeed.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cycles import (
    DEFAULT_SIGNIFICANCE,
    SIGNIFICANCE_THRESHOLDS,
    classify_minsky,
    diagnose,
    format_eigenvalues,
    is_significant,
    significance_stars,
)
from .diagnostics import df_test, regime_residuals, reports_to_csv, residual_diagnostics
from .em import PARAM_NAMES, EstimationConfig, EstimationResult, estimate
from .errors import DataError, EstimationError
from .hp import DEFAULT_LAMBDA, HpConfig, hp_decompose
from .model import (
    Covariance2,
    MsVarModel,
    RegimeCoefficients,
    SeriesPair,
    TransitionMatrix,
    model_to_dict,
)
from .montecarlo import mc_study, summary_to_csv

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_ESTIMATION = 2
EXIT_IO = 3

ARTIFACTS = (
    "estimates.json", "estimates.csv", "probabilities.csv", "unit_root.csv",
    "ljung_box.csv", "monte_carlo.csv", "verdict.txt",
)


@dataclass(frozen=True)
class PipelineConfig:
    input_path: Path
    output_dir: Path
    real_column: str
    financial_column: str
    year_column: str = "year"
    log_real: bool = False
    lamb: float = DEFAULT_LAMBDA
    est: EstimationConfig = field(default_factory=EstimationConfig)
    mc_reps: int = 0
    mc_T: int | None = None
    mc_unit_noise: bool = False
    significance_level: float = DEFAULT_SIGNIFICANCE
    df_lags: int = 0
    lb_lags: int = 1

    def __post_init__(self):
        if not (self.lamb >= 0 and math.isfinite(self.lamb)):
            raise DataError("lambda must be finite and >= 0")
        if self.mc_reps < 0:
            raise DataError("mc reps must be >= 0")
        if self.significance_level not in SIGNIFICANCE_THRESHOLDS:
            raise DataError("significance level must be 0.01, 0.05 or 0.10")

    @property
    def mc_enabled(self) -> bool:
        return self.mc_reps > 0


@dataclass
class PipelineResult:
    status: int
    message: str = ""
    files: list[Path] = field(default_factory=list)
    estimation: EstimationResult | None = None
    verdict: str | None = None


class StageError(Exception):
    def __init__(self, stage: str, code: int, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
        self.code = code


# -- ingest --------------------------------------------------------------------

def _parse_float(text: str, column: str, row: int) -> float:
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise DataError(f"non-numeric value {text!r} in column {column!r} at row {row}") from None
    if not math.isfinite(value):
        raise DataError(f"non-finite value {text!r} in column {column!r} at row {row}")
    return value


def read_columns(path, year_column: str, real_column: str, financial_column: str,
                 log_real: bool = False):
    """Parse a headed CSV into ``(years, real, financial)`` lists.

    Checks cells and year contiguity but not the length rule. Row numbers in
    error messages count the header as row 1.
    """
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        for col in (year_column, real_column, financial_column):
            if col not in fields:
                raise DataError(f"missing column {col!r}")
        years, y, f = [], [], []
        for row_no, row in enumerate(reader, start=2):
            year_text = (row[year_column] or "").strip()
            try:
                year = int(year_text)
            except ValueError:
                raise DataError(f"non-integer year {year_text!r} at row {row_no}") from None
            if years:
                if year in years:
                    raise DataError(f"duplicate year {year} at row {row_no}")
                if year < years[-1]:
                    raise DataError(f"years out of order at row {row_no}")
                if year != years[-1] + 1:
                    raise DataError(f"gap in years at row {row_no}")
            real = _parse_float(row[real_column], real_column, row_no)
            if log_real:
                if real <= 0:
                    raise DataError(f"cannot take log of {real!r} at row {row_no}")
                real = math.log(real)
            years.append(year)
            y.append(real)
            f.append(_parse_float(row[financial_column], financial_column, row_no))
    return years, y, f


def ingest(path, year_column: str, real_column: str, financial_column: str,
           log_real: bool = False) -> SeriesPair:
    """Read a headed CSV into a validated :class:`SeriesPair`."""
    years, y, f = read_columns(path, year_column, real_column, financial_column, log_real)
    return SeriesPair(tuple(years), tuple(y), tuple(f), (real_column, financial_column))


def write_series_csv(pair: SeriesPair, path, year_column="year") -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([year_column, *pair.labels])
        for yr, a, b in zip(pair.years, pair.y, pair.f):
            w.writerow([yr, repr(a), repr(b)])


# -- rendering -----------------------------------------------------------------

def _num(v: float) -> str:
    return repr(float(v))


def _json_float(v: float):
    v = float(v)
    return v if math.isfinite(v) else None


def estimates_json(result: EstimationResult) -> str:
    doc = model_to_dict(result.model)
    doc["se"] = {k: _json_float(v) for k, v in result.se_dict().items()}
    doc["loglik"] = result.loglik
    doc["iterations"] = result.iterations
    doc["converged"] = result.converged
    doc["se_warning"] = result.se_warning
    return json.dumps(doc, indent=2) + "\n"


def estimates_csv(result: EstimationResult) -> str:
    """Long-format estimate table in full round-trip precision."""
    m = result.model
    se = result.se_dict()
    rows = [
        ("regime1", "a11", m.regime1.a11, se["a11"]),
        ("regime1", "a12", m.regime1.a12, se["a12"]),
        ("regime1", "a21", m.regime1.a21, se["a21"]),
        ("regime1", "a22", m.regime1.a22, se["a22"]),
        ("regime2", "psi1", m.regime2.a11, se["psi1"]),
        ("regime2", "omega2", m.regime2.a22, se["omega2"]),
        ("sigma1", "v11", m.sigma1.v11, se["sigma1_11"]),
        ("sigma1", "v12", m.sigma1.v12, se["sigma1_12"]),
        ("sigma1", "v22", m.sigma1.v22, se["sigma1_22"]),
        ("sigma2", "v11", m.sigma2.v11, se["sigma2_11"]),
        ("sigma2", "v12", m.sigma2.v12, se["sigma2_12"]),
        ("sigma2", "v22", m.sigma2.v22, se["sigma2_22"]),
        ("transition", "p11", m.trans.p11, se["p11"]),
        ("transition", "p12", m.trans.p12, se["p11"]),
        ("transition", "p21", m.trans.p21, se["p22"]),
        ("transition", "p22", m.trans.p22, se["p22"]),
        ("init", "pi1", m.init_dist[0], math.nan),
        ("init", "pi2", m.init_dist[1], math.nan),
    ]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["block", "parameter", "estimate", "se", "stars"])
    for block, name, est, s in rows:
        se_text = _num(s) if math.isfinite(s) else ""
        stars = significance_stars(est, s) if block in ("regime1", "regime2") else ""
        w.writerow([block, name, _num(est), se_text, stars])
    return buf.getvalue()


def model_from_estimates_csv(text: str) -> MsVarModel:
    vals = {}
    for row in csv.DictReader(io.StringIO(text)):
        vals[(row["block"], row["parameter"])] = float(row["estimate"])
    return MsVarModel(
        RegimeCoefficients.full([[vals["regime1", "a11"], vals["regime1", "a12"]],
                                 [vals["regime1", "a21"], vals["regime1", "a22"]]]),
        RegimeCoefficients.diagonal(vals["regime2", "psi1"], vals["regime2", "omega2"]),
        Covariance2(vals["sigma1", "v11"], vals["sigma1", "v12"], vals["sigma1", "v22"]),
        Covariance2(vals["sigma2", "v11"], vals["sigma2", "v12"], vals["sigma2", "v22"]),
        TransitionMatrix(vals["transition", "p11"], vals["transition", "p12"],
                         vals["transition", "p21"], vals["transition", "p22"]),
        (vals["init", "pi1"], vals["init", "pi2"]),
    )


def probabilities_csv(result: EstimationResult, data: SeriesPair) -> str:
    filt = result.filter
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["year", "filtered1", "filtered2", "smoothed1", "smoothed2"])
    for k, year in enumerate(data.years[1:]):
        w.writerow([year, _num(filt.filtered[k, 0]), _num(filt.filtered[k, 1]),
                    _num(filt.smoothed[k, 0]), _num(filt.smoothed[k, 1])])
    return buf.getvalue()


def regime_verdicts(result: EstimationResult, level: float):
    """Diagnosis and verdict for both regimes; regime 2 never cycles."""
    se = result.se_dict()
    m = result.model
    d1 = diagnose(m.regime1)
    sig_a2 = is_significant(m.regime1.a12, se["a12"], level)
    sig_b1 = is_significant(m.regime1.a21, se["a21"], level)
    v1 = classify_minsky(d1, sig_a2, sig_b1)
    d2 = diagnose(m.regime2)
    v2 = classify_minsky(d2, False, False)
    return (d1, v1, sig_a2, sig_b1), (d2, v2)


def verdict_text(result: EstimationResult, level: float) -> str:
    (d1, v1, sig_a2, sig_b1), (d2, v2) = regime_verdicts(result, level)
    flag = lambda b: "true" if b else "false"  # noqa: E731
    lines = [
        v1.value,
        f"regime1 discriminant={d1.discriminant:.6g} eigenvalues={format_eigenvalues(d1)} "
        f"modulus={d1.modulus:.6g} oscillatory={flag(d1.oscillatory)} "
        f"necessary_condition={flag(d1.necessary_condition)} "
        f"minsky_signs={flag(d1.minsky_signs)} alpha2_significant={flag(sig_a2)} "
        f"beta1_significant={flag(sig_b1)}",
        f"regime2 verdict={v2.value} discriminant={d2.discriminant:.6g} "
        f"eigenvalues={format_eigenvalues(d2)} modulus={d2.modulus:.6g}",
        f"significance_level={level:g}",
    ]
    return "\n".join(lines) + "\n"


# -- orchestration -------------------------------------------------------------

def _stage(name: str, code: int, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except DataError as exc:
        raise StageError(name, EXIT_VALIDATION, str(exc)) from exc
    except EstimationError as exc:
        raise StageError(name, code, str(exc)) from exc
    except OSError as exc:
        raise StageError(name, EXIT_IO, str(exc)) from exc


def build_artifacts(config: PipelineConfig):
    """Run every stage and return ``(artifacts, estimation, verdict)``."""
    raw = _stage("ingest", EXIT_VALIDATION, ingest, config.input_path, config.year_column,
                 config.real_column, config.financial_column, config.log_real)
    hp = HpConfig(config.lamb)
    _, y_cycle = _stage("hp-filter", EXIT_VALIDATION, hp_decompose, raw.y, hp)
    _, f_cycle = _stage("hp-filter", EXIT_VALIDATION, hp_decompose, raw.f, hp)
    data = SeriesPair(raw.years, tuple(y_cycle), tuple(f_cycle), raw.labels)
    dataset = Path(config.input_path).stem

    df_reports = {
        data.labels[0]: _stage("unit-root", EXIT_VALIDATION, df_test, y_cycle, config.df_lags),
        data.labels[1]: _stage("unit-root", EXIT_VALIDATION, df_test, f_cycle, config.df_lags),
    }
    logger.info("estimating MS-VAR on %d observations", len(data))
    result = _stage("estimate", EXIT_ESTIMATION, estimate, data, config.est)

    resid = regime_residuals(result, data)
    lb_reports = _stage("ljung-box", EXIT_VALIDATION, residual_diagnostics, resid,
                        config.lb_lags, 0.01)

    verdict = verdict_text(result, config.significance_level)
    artifacts = {
        "estimates.json": estimates_json(result),
        "estimates.csv": estimates_csv(result),
        "probabilities.csv": probabilities_csv(result, data),
        "unit_root.csv": reports_to_csv([(dataset, df_reports)]),
        "ljung_box.csv": reports_to_csv([(dataset, lb_reports)]),
        "verdict.txt": verdict,
    }
    if config.mc_enabled:
        T = config.mc_T or len(data)
        logger.info("Monte Carlo: %d replications of length %d", config.mc_reps, T)
        summary = _stage("monte-carlo", EXIT_ESTIMATION, mc_study, result.model,
                         config.mc_reps, T, config.est.seed, config.est,
                         unit_noise=config.mc_unit_noise)
        artifacts["monte_carlo.csv"] = summary_to_csv(summary)
    return artifacts, result, verdict.splitlines()[0]


def write_artifacts(artifacts: dict[str, str], output_dir) -> list[Path]:
    """Write every artifact or none: on failure the files written so far are removed."""
    out = Path(output_dir)
    written = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        stale = out / "monte_carlo.csv"
        if "monte_carlo.csv" not in artifacts and stale.exists():
            stale.unlink()
        for name in sorted(artifacts):
            path = out / name
            with open(path, "w", newline="") as fh:
                fh.write(artifacts[name])
            written.append(path)
    except OSError:
        for path in written:
            try:
                os.remove(path)
            except OSError:
                pass
        raise
    return written


def run_pipeline(config: PipelineConfig) -> PipelineResult:
    """Run all stages; never raises for data, estimation or I/O failures.

    Exit statuses: 0 success, 1 validation error, 2 estimation failure,
    3 I/O error. On failure no artifact from this run is left behind.
    """
    try:
        artifacts, result, verdict = build_artifacts(config)
    except StageError as exc:
        return PipelineResult(exc.code, str(exc))
    try:
        files = write_artifacts(artifacts, config.output_dir)
    except OSError as exc:
        return PipelineResult(EXIT_IO, f"[write] {exc}")
    return PipelineResult(EXIT_OK, f"verdict: {verdict}", files, result, verdict)


def probabilities_row_sums(text: str) -> np.ndarray:
    rows = list(csv.DictReader(io.StringIO(text)))
    return np.array([float(r["filtered1"]) + float(r["filtered2"]) for r in rows])


__all__ = [
    "PipelineConfig", "PipelineResult", "ingest", "run_pipeline", "build_artifacts",
    "estimates_csv", "estimates_json", "model_from_estimates_csv", "PARAM_NAMES",
]
