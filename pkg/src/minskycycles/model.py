"""Domain types for the bivariate two-regime Markov-switching VAR(1).

Regime 1 carries an unrestricted 2x2 coefficient matrix (the real-financial
interaction regime); regime 2 is restricted to its main diagonal, so the two
variables evolve independently there. The system has no intercepts: it is
fitted to mean-zero HP cycles.

All types are frozen value objects. Parameter containers accept any finite
numbers so that :func:`validate_model` can report violations as data;
only structural rules (the diagonal restriction, series alignment) are
enforced at construction time.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DataError

MIN_SERIES_LENGTH = 10
ROW_SUM_TOL = 1e-12


class Restriction(enum.Enum):
    FULL = "full"
    DIAGONAL = "diagonal"


@dataclass(frozen=True)
class SeriesPair:
    """Aligned yearly observations of a real and a financial variable."""

    years: tuple[int, ...]
    y: tuple[float, ...]
    f: tuple[float, ...]
    labels: tuple[str, str] = ("real", "financial")

    def __post_init__(self):
        years = tuple(int(v) for v in self.years)
        y = tuple(float(v) for v in self.y)
        f = tuple(float(v) for v in self.f)
        object.__setattr__(self, "years", years)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "labels", tuple(str(s) for s in self.labels))

        if not (len(years) == len(y) == len(f)):
            raise DataError(
                f"length mismatch: years={len(years)}, y={len(y)}, f={len(f)}"
            )
        if len(years) < MIN_SERIES_LENGTH:
            raise DataError(
                f"series too short: T={len(years)} < {MIN_SERIES_LENGTH}"
            )
        if len(self.labels) != 2:
            raise DataError("labels must be a pair of strings")
        for i in range(1, len(years)):
            if years[i] != years[i - 1] + 1:
                raise DataError(
                    f"years must increase in unit steps "
                    f"(found {years[i - 1]} then {years[i]})"
                )
        for name, seq in (("y", y), ("f", f)):
            for i, v in enumerate(seq):
                if not math.isfinite(v):
                    raise DataError(f"non-finite value in {name} at index {i}")

    def __len__(self):
        return len(self.years)

    def as_array(self) -> np.ndarray:
        """Observations stacked as a (T, 2) array, real variable first."""
        return np.column_stack([np.asarray(self.y), np.asarray(self.f)])


@dataclass(frozen=True)
class RegimeCoefficients:
    """2x2 VAR(1) coefficient matrix ``[[a11, a12], [a21, a22]]``.

    In the usual notation ``a11, a12, a21, a22`` are alpha_1, alpha_2,
    beta_1, beta_2 for regime 1 and ``a11, a22`` are psi_1, omega_2 for the
    diagonal regime 2.
    """

    a11: float
    a12: float
    a21: float
    a22: float
    restriction: Restriction = Restriction.FULL

    def __post_init__(self):
        for name in ("a11", "a12", "a21", "a22"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.restriction is Restriction.DIAGONAL and (
            self.a12 != 0.0 or self.a21 != 0.0
        ):
            raise DataError(
                "diagonal regime matrix must have exactly zero off-diagonal "
                f"entries (got a12={self.a12!r}, a21={self.a21!r})"
            )

    @classmethod
    def full(cls, matrix) -> "RegimeCoefficients":
        m = np.asarray(matrix, dtype=float).reshape(2, 2)
        return cls(m[0, 0], m[0, 1], m[1, 0], m[1, 1], Restriction.FULL)

    @classmethod
    def diagonal(cls, psi: float, omega: float) -> "RegimeCoefficients":
        return cls(psi, 0.0, 0.0, omega, Restriction.DIAGONAL)

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.a11, self.a12], [self.a21, self.a22]])

    def violations(self, name="coefficients") -> list[str]:
        out = []
        for attr in ("a11", "a12", "a21", "a22"):
            if not math.isfinite(getattr(self, attr)):
                out.append(f"{name}: {attr} is not finite")
        return out


@dataclass(frozen=True)
class Covariance2:
    """Symmetric 2x2 error covariance ``[[v11, v12], [v12, v22]]``."""

    v11: float
    v12: float
    v22: float

    def __post_init__(self):
        for name in ("v11", "v12", "v22"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @classmethod
    def from_matrix(cls, matrix) -> "Covariance2":
        m = np.asarray(matrix, dtype=float).reshape(2, 2)
        return cls(m[0, 0], 0.5 * (m[0, 1] + m[1, 0]), m[1, 1])

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.v11, self.v12], [self.v12, self.v22]])

    @property
    def determinant(self) -> float:
        return self.v11 * self.v22 - self.v12 * self.v12

    def is_positive_definite(self) -> bool:
        return self.v11 > 0 and self.v22 > 0 and self.determinant > 0

    def violations(self, name="sigma") -> list[str]:
        out = []
        vals = (self.v11, self.v12, self.v22)
        if not all(math.isfinite(v) for v in vals):
            return [f"{name}: entries not finite"]
        if self.v11 <= 0:
            out.append(f"{name}: variance nonpositive (v11={self.v11!r})")
        if self.v22 <= 0:
            out.append(f"{name}: variance nonpositive (v22={self.v22!r})")
        if self.v12 * self.v12 > self.v11 * self.v22:
            out.append(f"{name}: not positive semi-definite (v12^2 > v11*v22)")
        return out


@dataclass(frozen=True)
class TransitionMatrix:
    """Row-stochastic matrix with ``pij = P(s_t = j | s_{t-1} = i)``."""

    p11: float
    p12: float
    p21: float
    p22: float

    def __post_init__(self):
        for name in ("p11", "p12", "p21", "p22"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @classmethod
    def from_diagonal(cls, p11: float, p22: float) -> "TransitionMatrix":
        return cls(p11, 1.0 - p11, 1.0 - p22, p22)

    @classmethod
    def from_matrix(cls, matrix) -> "TransitionMatrix":
        m = np.asarray(matrix, dtype=float).reshape(2, 2)
        return cls(m[0, 0], m[0, 1], m[1, 0], m[1, 1])

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.p11, self.p12], [self.p21, self.p22]])

    def ergodic(self) -> tuple[float, float]:
        """Stationary distribution ``(p21, p12) / (p12 + p21)``.

        Falls back to (0.5, 0.5) for a chain that never switches, whose
        stationary distribution is not unique.
        """
        denom = self.p12 + self.p21
        if denom <= 0:
            return (0.5, 0.5)
        pi1 = self.p21 / denom
        return (pi1, 1.0 - pi1)

    def violations(self, name="trans") -> list[str]:
        out = []
        for attr in ("p11", "p12", "p21", "p22"):
            v = getattr(self, attr)
            if not (math.isfinite(v) and 0.0 <= v <= 1.0):
                out.append(f"{name}: {attr}={v!r} outside [0, 1]")
        for row, (a, b) in enumerate(((self.p11, self.p12), (self.p21, self.p22)), 1):
            s = a + b
            if not abs(s - 1.0) <= ROW_SUM_TOL:
                out.append(f"{name}: row {row} sums to {s:.12g}")
        return out


@dataclass(frozen=True)
class MsVarModel:
    """Full parameterization of the two-regime MS-VAR(1).

    ``init_dist`` is the regime distribution at the first usable period
    (the second observation). When omitted it defaults to the ergodic
    distribution of ``trans``.
    """

    regime1: RegimeCoefficients
    regime2: RegimeCoefficients
    sigma1: Covariance2
    sigma2: Covariance2
    trans: TransitionMatrix
    init_dist: tuple[float, float] | None = field(default=None)

    def __post_init__(self):
        if self.regime1.restriction is not Restriction.FULL:
            raise DataError("regime 1 must carry an unrestricted (full) matrix")
        if self.regime2.restriction is not Restriction.DIAGONAL:
            raise DataError("regime 2 must carry a diagonal matrix")
        init = self.init_dist
        if init is None:
            init = self.trans.ergodic()
        init = tuple(float(v) for v in init)
        if len(init) != 2:
            raise DataError("init_dist must hold two probabilities")
        object.__setattr__(self, "init_dist", init)

    @classmethod
    def from_arrays(cls, a1, a2_diag, sigma1, sigma2, trans, init_dist=None):
        return cls(
            regime1=RegimeCoefficients.full(a1),
            regime2=RegimeCoefficients.diagonal(*np.asarray(a2_diag, dtype=float)),
            sigma1=Covariance2.from_matrix(sigma1),
            sigma2=Covariance2.from_matrix(sigma2),
            trans=TransitionMatrix.from_matrix(trans),
            init_dist=None if init_dist is None else tuple(init_dist),
        )

    @property
    def regimes(self) -> tuple[RegimeCoefficients, RegimeCoefficients]:
        return (self.regime1, self.regime2)

    @property
    def sigmas(self) -> tuple[Covariance2, Covariance2]:
        return (self.sigma1, self.sigma2)

    def with_init(self, init_dist) -> "MsVarModel":
        return MsVarModel(
            self.regime1, self.regime2, self.sigma1, self.sigma2, self.trans,
            tuple(init_dist),
        )


def validate_model(model: MsVarModel) -> list[str]:
    """Return every violated invariant of ``model``; an empty list means valid."""
    out = []
    out += model.regime1.violations("regime1")
    out += model.regime2.violations("regime2")
    out += model.sigma1.violations("sigma1")
    out += model.sigma2.violations("sigma2")
    out += model.trans.violations("trans")
    p1, p2 = model.init_dist
    for i, v in enumerate((p1, p2), 1):
        if not (math.isfinite(v) and 0.0 <= v <= 1.0):
            out.append(f"init: entry {i}={v!r} outside [0, 1]")
    if not abs(p1 + p2 - 1.0) <= ROW_SUM_TOL:
        out.append(f"init: sums to {p1 + p2:.12g}")
    return out


def require_valid(model: MsVarModel) -> None:
    problems = validate_model(model)
    if problems:
        raise DataError("invalid model: " + "; ".join(problems))


# -- JSON ---------------------------------------------------------------------

def model_to_dict(model: MsVarModel) -> dict:
    r1, r2 = model.regime1, model.regime2
    s1, s2 = model.sigma1, model.sigma2
    tr = model.trans
    return {
        "a1": [r1.a11, r1.a12, r1.a21, r1.a22],
        "a2": [r2.a11, r2.a22],
        "sigma1": [s1.v11, s1.v12, s1.v22],
        "sigma2": [s2.v11, s2.v12, s2.v22],
        "trans": [tr.p11, tr.p12, tr.p21, tr.p22],
        "init": list(model.init_dist),
    }


def model_from_dict(data: dict) -> MsVarModel:
    try:
        a1 = [float(v) for v in data["a1"]]
        a2 = [float(v) for v in data["a2"]]
        s1 = [float(v) for v in data["sigma1"]]
        s2 = [float(v) for v in data["sigma2"]]
        tr = [float(v) for v in data["trans"]]
        init = [float(v) for v in data["init"]]
    except KeyError as exc:
        raise DataError(f"model JSON missing field {exc.args[0]!r}") from None
    sizes = {"a1": (a1, 4), "a2": (a2, 2), "sigma1": (s1, 3), "sigma2": (s2, 3),
             "trans": (tr, 4), "init": (init, 2)}
    for key, (vals, n) in sizes.items():
        if len(vals) != n:
            raise DataError(f"model JSON field {key!r} needs {n} values, got {len(vals)}")
    return MsVarModel(
        regime1=RegimeCoefficients(*a1, Restriction.FULL),
        regime2=RegimeCoefficients.diagonal(*a2),
        sigma1=Covariance2(*s1),
        sigma2=Covariance2(*s2),
        trans=TransitionMatrix(*tr),
        init_dist=tuple(init),
    )


def model_to_json(model: MsVarModel, **kwargs) -> str:
    return json.dumps(model_to_dict(model), **kwargs)


def model_from_json(text: str) -> MsVarModel:
    return model_from_dict(json.loads(text))


def series_from_arrays(y: Sequence[float], f: Sequence[float], start_year: int = 1,
                       labels=("real", "financial")) -> SeriesPair:
    n = len(y)
    return SeriesPair(tuple(range(start_year, start_year + n)), tuple(y), tuple(f),
                      tuple(labels))
