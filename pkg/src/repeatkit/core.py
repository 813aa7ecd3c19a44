"""Test-retest measurement model: variability estimation and change decisions.

A study measures ``n`` subjects ``m_i >= 2`` times each under identical
conditions.  Within-subject measurements scatter around the subject's true
value with standard deviation ``w_SD``.  This module estimates ``w_SD`` from
such data, builds the repeatability coefficient (the half-width of the
symmetric interval that a no-change measurement pair should fall into), and
classifies longitudinal pairs as changed / unchanged.

It also carries the sampling law of the normalized estimation error
``W = wsd_hat / w_SD``: with ``nu = sum_i (m_i - 1)`` pooled degrees of
freedom, ``nu * W**2`` is chi-square distributed with ``nu`` degrees of
freedom, and ``W`` is asymptotically normal with mean 1 and variance
``1/(2 nu)``.  The density/support helpers for both forms live here because
every downstream expectation and confidence statement integrates against
them.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from .errors import DataValidationError, DomainError
from .numerics import (
    check_degrees_of_freedom,
    check_probability,
    chisq_pdf,
    chisq_quantile,
    normal_quantile,
)

__all__ = [
    "TestRetestData",
    "WsdEstimate",
    "RepeatabilityCoefficient",
    "LongitudinalPair",
    "estimate_wsd",
    "repeatability_coefficient",
    "decide_change",
    "symmetric_coverage_quantile",
    "design_degrees_of_freedom",
    "ratio_density_exact",
    "ratio_density_normal",
    "ratio_support_exact",
    "ratio_support_normal",
]

_SQRT2 = math.sqrt(2.0)

# Below this many pooled degrees of freedom the large-sample normal forms are
# unreliable; estimation still proceeds, but with a warning.
SMALL_NU_WARNING_THRESHOLD = 10


def symmetric_coverage_quantile(p: float) -> float:
    """Half-width multiplier z with P[-z <= Z <= z] = p for standard normal Z.

    Equals ``normal_quantile(1 - (1 - p)/2)``; the factor that turns a
    standard deviation into the half-width of a symmetric interval with
    coverage ``p``.
    """
    p = check_probability(p, "coverage probability")
    return normal_quantile(1.0 - (1.0 - p) / 2.0)


def design_degrees_of_freedom(n_subjects: int, replicates: int) -> int:
    """Pooled degrees of freedom ``n * (m - 1)`` of a balanced design."""
    if not isinstance(n_subjects, int) or isinstance(n_subjects, bool) or n_subjects < 1:
        raise DomainError(f"n_subjects must be a positive integer, got {n_subjects!r}")
    if not isinstance(replicates, int) or isinstance(replicates, bool) or replicates < 2:
        raise DomainError(f"replicates per subject must be an integer >= 2, got {replicates!r}")
    return n_subjects * (replicates - 1)


# ---------------------------------------------------------------------------
# data containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TestRetestData:
    """Measurements from one test-retest study.

    Parameters
    ----------
    subjects : sequence of (subject_id, measurements)
        One entry per subject; every subject needs at least two finite
        measurements in the biomarker's native units.  Replicate counts may
        differ between subjects.
    """

    subjects: tuple[tuple[str, tuple[float, ...]], ...]

    def __post_init__(self):
        normalized = []
        seen: set[str] = set()
        for entry in self.subjects:
            try:
                subject_id, values = entry
            except (TypeError, ValueError):
                raise DataValidationError(
                    "each subject entry must be a (subject_id, measurements) pair"
                ) from None
            subject_id = str(subject_id)
            if subject_id in seen:
                raise DataValidationError(f"duplicate subject id {subject_id!r}")
            seen.add(subject_id)
            values = tuple(float(v) for v in values)
            if len(values) < 2:
                raise DataValidationError(
                    f"subject {subject_id!r} has {len(values)} measurement(s); "
                    "at least 2 replicates are required")
            if not all(math.isfinite(v) for v in values):
                raise DataValidationError(
                    f"subject {subject_id!r} has a non-finite measurement")
            normalized.append((subject_id, values))
        if not normalized:
            raise DataValidationError("at least one subject is required")
        object.__setattr__(self, "subjects", tuple(normalized))


@dataclass(frozen=True)
class WsdEstimate:
    """Estimated within-subject standard deviation and its degrees of freedom."""

    wsd_hat: float
    nu: int

    def __post_init__(self):
        if not math.isfinite(self.wsd_hat) or self.wsd_hat < 0.0:
            raise DomainError(f"wsd_hat must be finite and >= 0, got {self.wsd_hat!r}")
        object.__setattr__(self, "nu", check_degrees_of_freedom(self.nu))

    def repeatability_coefficient(self, p_sp: float = 0.95) -> "RepeatabilityCoefficient":
        """Repeatability coefficient built from this estimate (flagged as such)."""
        return repeatability_coefficient(self.wsd_hat, p_sp, estimated=True)


@dataclass(frozen=True)
class RepeatabilityCoefficient:
    """Half-width of the no-change interval for a measurement pair.

    ``value = z * sqrt(2) * w`` where ``z`` is the symmetric coverage
    quantile of ``target_specificity`` and ``w`` the (estimated or known)
    within-subject SD.  ``estimated`` records which of the two it was.
    """

    value: float
    target_specificity: float
    estimated: bool = False

    def __post_init__(self):
        if not math.isfinite(self.value) or self.value < 0.0:
            raise DomainError(f"coefficient value must be finite and >= 0, got {self.value!r}")
        object.__setattr__(self, "target_specificity",
                           check_probability(self.target_specificity, "target_specificity"))


@dataclass(frozen=True)
class LongitudinalPair:
    """Two consecutive measurements of the same subject."""

    y_pre: float
    y_post: float

    def __post_init__(self):
        if not (math.isfinite(self.y_pre) and math.isfinite(self.y_post)):
            raise DataValidationError("longitudinal measurements must be finite")


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def estimate_wsd(data: TestRetestData) -> WsdEstimate:
    """Pooled within-subject standard deviation estimate.

    Sums the squared deviations from each subject's own mean and divides by
    the pooled degrees of freedom ``nu = sum_i (m_i - 1)``:

        wsd_hat = sqrt( sum_ij (Y_ij - Ybar_i)^2 / nu )

    For a balanced design this equals the root of the mean per-subject
    sample variance.  The pooled form is used for unequal replicate counts
    as well, because it is the version for which ``nu * wsd_hat^2 / w_SD^2``
    is chi-square with ``nu`` degrees of freedom under normal errors.

    Warns (without failing) when ``nu < 10``, where the downstream
    large-sample approximations are unreliable, and when the estimate is
    exactly zero.
    """
    if not isinstance(data, TestRetestData):
        data = TestRetestData(tuple(data))
    pooled_ss = 0.0
    nu = 0
    for subject_id, values in data.subjects:
        mean = math.fsum(values) / len(values)
        pooled_ss += math.fsum((v - mean) ** 2 for v in values)
        nu += len(values) - 1
    wsd_hat = math.sqrt(pooled_ss / nu)
    if nu < SMALL_NU_WARNING_THRESHOLD:
        warnings.warn(
            f"only {nu} degrees of freedom; large-sample approximations and "
            "the reported operating characteristics are unreliable below "
            f"{SMALL_NU_WARNING_THRESHOLD}", stacklevel=2)
    if wsd_hat == 0.0:
        warnings.warn(
            "within-subject spread is exactly zero; every nonzero change "
            "will be declared significant", stacklevel=2)
    return WsdEstimate(wsd_hat=wsd_hat, nu=nu)


def repeatability_coefficient(wsd: float, p_sp: float = 0.95, *,
                              estimated: bool = False) -> RepeatabilityCoefficient:
    """Repeatability coefficient ``z * sqrt(2) * wsd`` for target specificity ``p_sp``.

    The difference of two measurements of an unchanged subject has standard
    deviation ``sqrt(2) * w_SD``; scaling by the symmetric coverage quantile
    of ``p_sp`` gives the half-width that keeps the no-change false-positive
    rate at ``1 - p_sp``.  Linear in ``wsd``.
    """
    wsd = float(wsd)
    if not math.isfinite(wsd) or wsd < 0.0:
        raise DomainError(f"wsd must be finite and >= 0, got {wsd!r}")
    z = symmetric_coverage_quantile(p_sp)
    return RepeatabilityCoefficient(value=z * _SQRT2 * wsd,
                                    target_specificity=p_sp,
                                    estimated=estimated)


def decide_change(pair: LongitudinalPair, rc: RepeatabilityCoefficient) -> bool:
    """True iff the pair's difference exceeds the repeatability coefficient.

    The comparison is strict: ``|y_post - y_pre|`` exactly equal to the
    coefficient counts as no-change (the no-change interval is closed).
    Symmetric in the two measurements.
    """
    return abs(pair.y_post - pair.y_pre) > rc.value


# ---------------------------------------------------------------------------
# sampling law of W = wsd_hat / w_SD
# ---------------------------------------------------------------------------

def ratio_density_exact(w: float, nu: int) -> float:
    """Density of ``W = wsd_hat / w_SD`` at ``w > 0``: chi-square transformed.

    ``nu * W^2`` is chi-square(``nu``), so ``f_W(w) = f_chi2(nu w^2) * 2 w nu``.
    """
    w = float(w)
    if not math.isfinite(w) or w <= 0.0:
        raise DomainError(f"ratio w must be positive and finite, got {w!r}")
    return chisq_pdf(nu * w * w, nu) * 2.0 * w * nu


def ratio_density_normal(w: float, nu: int) -> float:
    """Large-``nu`` normal density of ``W``: mean 1, variance ``1/(2 nu)``."""
    nu = check_degrees_of_freedom(nu)
    return math.sqrt(nu / math.pi) * math.exp(-nu * (w - 1.0) ** 2)


def ratio_support_exact(nu: int, tail_mass: float = 1e-14) -> tuple[float, float]:
    """Interval of ``w`` leaving ``tail_mass`` probability in each chi tail."""
    nu = check_degrees_of_freedom(nu)
    lo = math.sqrt(chisq_quantile(tail_mass, nu) / nu)
    hi = math.sqrt(chisq_quantile(1.0 - tail_mass, nu) / nu)
    return lo, hi


def ratio_support_normal(nu: int, half_width_sds: float = 10.0) -> tuple[float, float]:
    """Interval ``1 +- half_width_sds / sqrt(2 nu)`` for the normal form."""
    nu = check_degrees_of_freedom(nu)
    half = half_width_sds / math.sqrt(2.0 * nu)
    return 1.0 - half, 1.0 + half
