"""Eigenvalue conditions for endogenous cycles in a 2x2 VAR(1) matrix.

For ``A = [[alpha1, alpha2], [beta1, beta2]]`` the characteristic polynomial
is ``lam^2 - tr(A) lam + det(A)``. Complex roots, and hence oscillations,
require a negative discriminant ``tr^2 - 4 det = (alpha1 - beta2)^2 +
4 alpha2 beta1``, which is impossible unless ``alpha2 * beta1 < 0``. The
Minsky pattern is ``beta1 > 0`` (output raises the financial variable) with
``alpha2 < 0`` (the financial variable depresses output).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .model import RegimeCoefficients

# two-sided standard normal quantiles
SIGNIFICANCE_THRESHOLDS = {0.01: 2.576, 0.05: 1.960, 0.10: 1.645}
DEFAULT_SIGNIFICANCE = 0.05


class Verdict(enum.Enum):
    MINSKY = "minsky"
    NON_MINSKY = "cycle-non-minsky"
    NO_CYCLE = "no-cycle"
    NOT_SIGNIFICANT = "not-significant"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class CycleDiagnosis:
    trace: float
    determinant: float
    discriminant: float
    eigenvalues: tuple[complex, complex]
    modulus: float
    oscillatory: bool
    necessary_condition: bool
    minsky_signs: bool
    stable: bool
    alpha2: float
    beta1: float


def diagnose(coeffs: RegimeCoefficients) -> CycleDiagnosis:
    """Eigenvalue analysis of a regime matrix."""
    a1, a2, b1, b2 = coeffs.a11, coeffs.a12, coeffs.a21, coeffs.a22
    tr = a1 + b2
    det = a1 * b2 - a2 * b1
    disc = tr * tr - 4.0 * det

    alt = (a1 - b2) ** 2 + 4.0 * a2 * b1
    scale = max(1.0, tr * tr, 4.0 * abs(det), (a1 - b2) ** 2, 4.0 * abs(a2 * b1))
    if abs(disc - alt) > 1e-12 * scale:
        raise ArithmeticError(f"discriminant identity violated: {disc!r} vs {alt!r}")

    if disc < 0:
        root = 1j * math.sqrt(-disc)
    else:
        root = complex(math.sqrt(disc), 0.0)
    lam1 = (tr + root) / 2.0
    lam2 = (tr - root) / 2.0
    modulus = max(abs(lam1), abs(lam2))

    return CycleDiagnosis(
        trace=tr,
        determinant=det,
        discriminant=disc,
        eigenvalues=(complex(lam1), complex(lam2)),
        modulus=modulus,
        oscillatory=disc < 0,
        necessary_condition=a2 * b1 < 0,
        minsky_signs=(b1 > 0) and (a2 < 0),
        stable=modulus < 1.0,
        alpha2=a2,
        beta1=b1,
    )


def is_significant(estimate: float, se: float, level: float = DEFAULT_SIGNIFICANCE) -> bool:
    """``|estimate / se|`` beyond the two-sided normal quantile for ``level``.

    An undefined standard error (NaN, zero or negative) is never significant.
    """
    try:
        z = SIGNIFICANCE_THRESHOLDS[level]
    except KeyError:
        raise ValueError(
            f"significance level must be one of {sorted(SIGNIFICANCE_THRESHOLDS)}"
        ) from None
    if not (se > 0) or not math.isfinite(se):
        return False
    return abs(estimate / se) > z


def significance_stars(estimate: float, se: float) -> str:
    for level, stars in ((0.01, "***"), (0.05, "**"), (0.10, "*")):
        if is_significant(estimate, se, level):
            return stars
    return ""


def classify_minsky(diag: CycleDiagnosis, alpha2_significant: bool,
                    beta1_significant: bool) -> Verdict:
    """Verdict for a regime given significance of the two cross coefficients."""
    if not diag.oscillatory:
        return Verdict.NO_CYCLE
    if not diag.minsky_signs:
        return Verdict.NON_MINSKY
    if alpha2_significant and beta1_significant:
        return Verdict.MINSKY
    return Verdict.NOT_SIGNIFICANT


def format_eigenvalues(diag: CycleDiagnosis, digits: int = 6) -> str:
    parts = []
    for lam in diag.eigenvalues:
        if lam.imag == 0:
            parts.append(f"{lam.real:.{digits}g}")
        else:
            sign = "+" if lam.imag >= 0 else "-"
            parts.append(f"{lam.real:.{digits}g}{sign}{abs(lam.imag):.{digits}g}i")
    return ", ".join(parts)

