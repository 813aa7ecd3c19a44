"""Distribution of the effective specificity under an estimated threshold.

A change rule built from the true within-subject SD has specificity exactly
``p_sp``.  Built from an estimate, its realized ("effective") specificity is
a random variable: a monotone transform of the estimation-error ratio
``W = wsd_hat / w_SD``.  This module provides that transform, the induced
density, the expectation (whose shortfall from ``p_sp`` is the bias of the
plug-in rule), confidence statements ``P[P_esp >= bound]``, worst-case lower
bounds at a given confidence, and the minimal number of subjects needed to
keep the effective specificity above a floor with prescribed confidence.

Every distributional quantity comes in two forms: ``Exact`` integrates the
chi-square law of ``W`` and holds at any ``nu``; ``Asymptotic`` replaces
``W`` by its large-``nu`` normal limit and yields closed forms.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InfeasibleError
from .core import (
    design_degrees_of_freedom,
    ratio_density_exact,
    ratio_density_normal,
    ratio_support_exact,
    ratio_support_normal,
    symmetric_coverage_quantile,
)
from .numerics import (
    QuadratureSpec,
    check_degrees_of_freedom,
    check_probability,
    chisq_cdf,
    chisq_log_pdf,
    chisq_quantile,
    integrate,
    min_integer_satisfying,
    normal_cdf,
    normal_quantile,
)

__all__ = [
    "MethodChoice",
    "SpecificityQuery",
    "SampleSizeResult",
    "effective_specificity_given_ratio",
    "effective_specificity_pdf",
    "expected_effective_specificity",
    "specificity_confidence",
    "specificity_lower_bound",
    "sample_size_specificity",
]

_SQRT2 = math.sqrt(2.0)
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)

# Expectation quadrature runs tighter than the coarsest downstream tolerance
# so comparisons against published 4-decimal values are limited by their
# rounding, not by integration error.
_DEFAULT_QUADRATURE = QuadratureSpec(abs_tol=1e-11, rel_tol=1e-11)


class MethodChoice(enum.Enum):
    """Distributional treatment of the estimation-error ratio ``W``.

    ``EXACT`` uses the chi-square law of ``nu * W**2``; ``ASYMPTOTIC`` uses
    the normal limit ``W ~ N(1, 1/(2 nu))``.
    """

    EXACT = "exact"
    ASYMPTOTIC = "asymptotic"


def _as_method(method) -> MethodChoice:
    if isinstance(method, MethodChoice):
        return method
    try:
        return MethodChoice(method)
    except ValueError:
        raise DomainError(
            f"method must be MethodChoice or one of "
            f"{[m.value for m in MethodChoice]}, got {method!r}") from None


@dataclass(frozen=True)
class SpecificityQuery:
    """Inputs of a confidence question about the effective specificity.

    Asks: with ``nu`` pooled degrees of freedom and target specificity
    ``p_sp``, how sure can we be that the realized specificity stays at or
    above ``p_esp_lb``?  ``p_conf`` carries the answer's required level in
    sample-size use.
    """

    p_sp: float
    p_esp_lb: float
    p_conf: float
    nu: int

    def __post_init__(self):
        object.__setattr__(self, "p_sp", check_probability(self.p_sp, "p_sp"))
        object.__setattr__(self, "p_esp_lb", check_probability(self.p_esp_lb, "p_esp_lb"))
        object.__setattr__(self, "p_conf", check_probability(self.p_conf, "p_conf"))
        object.__setattr__(self, "nu", check_degrees_of_freedom(self.nu))

    @classmethod
    def from_design(cls, n_subjects: int, replicates: int, p_sp: float,
                    p_esp_lb: float, p_conf: float) -> "SpecificityQuery":
        """Build a query from a balanced design of ``n`` subjects x ``m`` replicates."""
        return cls(p_sp=p_sp, p_esp_lb=p_esp_lb, p_conf=p_conf,
                   nu=design_degrees_of_freedom(n_subjects, replicates))


@dataclass(frozen=True)
class SampleSizeResult:
    """Solved sample size: integer ``n`` plus the pre-ceiling real for closed forms.

    ``raw`` is the right-hand side of the asymptotic closed form before
    rounding up; it is ``None`` when ``n`` came from an integer search with
    no underlying real-valued solution.
    """

    n: int
    raw: float | None = None


def _p_esp_raw(y):
    # specificity of a symmetric band with half-width quantile y; the
    # two-term form keeps the complement identity with the zero-effect
    # sensitivity bitwise exact and is accurate when the result is tiny.
    return normal_cdf(y) - normal_cdf(-y)


def effective_specificity_given_ratio(w, p_sp: float = 0.95):
    """Realized specificity of the plug-in change rule at ratio ``w``.

    Parameters
    ----------
    w : float or ndarray
        Estimation-error ratio ``wsd_hat / w_SD``; must be finite and > 0.
    p_sp : float
        Target specificity the rule was built for.

    Returns
    -------
    float or ndarray
        ``1 - 2 (1 - Phi(z w))`` with ``z`` the symmetric coverage quantile
        of ``p_sp``; strictly increasing in ``w``, equals ``p_sp`` at
        ``w = 1``.
    """
    z = symmetric_coverage_quantile(p_sp)
    if isinstance(w, np.ndarray):
        if w.size and (not np.all(np.isfinite(w)) or not np.all(w > 0.0)):
            raise DomainError("ratio w must be finite and > 0 elementwise")
        return _p_esp_raw(z * w)
    w = float(w)
    if not math.isfinite(w) or w <= 0.0:
        raise DomainError(f"ratio w must be finite and > 0, got {w!r}")
    return _p_esp_raw(z * w)


def effective_specificity_pdf(p: float, nu: int, p_sp: float = 0.95) -> float:
    """Density of the effective specificity at ``p`` for ``nu`` degrees of freedom.

    Change of variables through the strictly increasing map
    ``w -> 1 - 2(1 - Phi(z w))``: the chi-square density of ``W`` at the
    preimage, divided by the map's slope ``2 z phi(z w)``.  Evaluated in log
    space so the far tails (where both factors underflow) stay finite.
    """
    p = check_probability(p, "p")
    nu = check_degrees_of_freedom(nu)
    z = symmetric_coverage_quantile(p_sp)
    y = symmetric_coverage_quantile(p)  # z * w at the preimage
    w = y / z
    log_ratio_density = chisq_log_pdf(nu * w * w, nu) + math.log(2.0 * w * nu)
    log_slope = math.log(2.0 * z) - 0.5 * y * y - _LOG_SQRT_2PI
    return math.exp(log_ratio_density - log_slope)


def expected_effective_specificity(nu: int, p_sp: float = 0.95,
                                   method: MethodChoice = MethodChoice.EXACT,
                                   quadrature: QuadratureSpec | None = None) -> float:
    """Mean of the effective specificity; below ``p_sp`` for every finite ``nu``.

    Integrates ``Phi(z w)`` against the density of ``W`` (chi-square form or
    normal kernel per ``method``) and assembles ``1 - 2 (1 - I)``.  The
    shortfall ``result - p_sp`` is the bias introduced by estimating the
    within-subject SD.
    """
    nu = check_degrees_of_freedom(nu)
    method = _as_method(method)
    z = symmetric_coverage_quantile(p_sp)
    spec = quadrature if quadrature is not None else _DEFAULT_QUADRATURE
    if method is MethodChoice.EXACT:
        lo, hi = ratio_support_exact(nu)

        def integrand(w):
            return normal_cdf(z * w) * ratio_density_exact(w, nu)
    else:
        # The normal kernel's support crosses w = 0 for nu < 50; the formula
        # extends across it, matching the limit law's full real line.
        lo, hi = ratio_support_normal(nu)

        def integrand(w):
            return normal_cdf(z * w) * ratio_density_normal(w, nu)
    mean_phi = integrate(integrand, lo, hi, spec)
    return 1.0 - 2.0 * (1.0 - mean_phi)


def specificity_confidence(query: SpecificityQuery,
                           method: MethodChoice = MethodChoice.EXACT) -> float:
    """Probability that the effective specificity reaches the queried bound.

    ``P[P_esp >= p_esp_lb] = P[W >= z_lb / z]``: the chi-square upper tail
    at ``nu (z_lb/z)^2`` exactly, or the matching normal tail
    ``1 - Phi((z_lb/z - 1) sqrt(2 nu))`` asymptotically.  Defined for any
    bound; values sink below 1/2 once the bound passes ``p_sp``.
    """
    method = _as_method(method)
    z = symmetric_coverage_quantile(query.p_sp)
    z_lb = symmetric_coverage_quantile(query.p_esp_lb)
    ratio = z_lb / z
    if method is MethodChoice.EXACT:
        return 1.0 - chisq_cdf(query.nu * ratio * ratio, query.nu)
    return 1.0 - normal_cdf((ratio - 1.0) * math.sqrt(2.0 * query.nu))


def specificity_lower_bound(nu: int, p_sp: float = 0.95, p_conf: float = 0.95,
                            method: MethodChoice = MethodChoice.EXACT) -> float:
    """Worst-case effective specificity held with probability ``p_conf``.

    The value ``b`` with ``P[P_esp >= b] = p_conf``: the realized
    specificity at the lower ``1 - p_conf`` quantile of ``W``.  Inverse of
    :func:`specificity_confidence` in the bound argument.
    """
    nu = check_degrees_of_freedom(nu)
    p_conf = check_probability(p_conf, "p_conf")
    z = symmetric_coverage_quantile(p_sp)
    method = _as_method(method)
    if method is MethodChoice.EXACT:
        w_q = math.sqrt(chisq_quantile(1.0 - p_conf, nu) / nu)
    else:
        w_q = 1.0 + normal_quantile(1.0 - p_conf) / math.sqrt(2.0 * nu)
        if w_q <= 0.0:
            raise DomainError(
                f"normal approximation places the {1.0 - p_conf:g} ratio "
                f"quantile at w={w_q:.4g} <= 0 for nu={nu}; use the exact method")
    return _p_esp_raw(z * w_q)


def sample_size_specificity(m: int, p_sp: float = 0.95, p_esp_lb: float = 0.90,
                            p_conf: float = 0.95,
                            method: MethodChoice = MethodChoice.EXACT,
                            max_n: int = 10_000_000) -> SampleSizeResult:
    """Minimal subjects ``n`` (at ``m`` replicates each) for a specificity floor.

    Smallest ``n`` such that, with ``nu = n (m - 1)`` degrees of freedom,
    the effective specificity stays at or above ``p_esp_lb`` with
    probability at least ``p_conf``.  The asymptotic method returns the
    closed-form real solution (also in ``raw``) rounded up; the exact method
    searches the chi-square-form confidence for the smallest qualifying
    integer, seeded by the asymptotic value.
    """
    if not isinstance(m, int) or isinstance(m, bool) or m < 2:
        raise DomainError(f"replicates per subject m must be an integer >= 2, got {m!r}")
    p_sp = check_probability(p_sp, "p_sp")
    p_esp_lb = check_probability(p_esp_lb, "p_esp_lb")
    p_conf = check_probability(p_conf, "p_conf")
    method = _as_method(method)
    if p_esp_lb >= p_sp:
        raise InfeasibleError(
            "no finite sample size achieves an effective-specificity floor "
            f"at or above the target specificity (floor {p_esp_lb} >= target {p_sp})")
    if p_conf <= 0.5:
        warnings.warn(
            f"p_conf={p_conf} is at or below 0.5; the sample-size criterion "
            "degenerates and the closed form is not meaningful", stacklevel=2)

    z = symmetric_coverage_quantile(p_sp)
    z_lb = symmetric_coverage_quantile(p_esp_lb)
    raw = (normal_quantile(1.0 - p_conf) * z / (z_lb - z)) ** 2 / (2.0 * (m - 1))
    if method is MethodChoice.ASYMPTOTIC:
        return SampleSizeResult(n=max(1, math.ceil(raw)), raw=raw)

    def enough(n: int) -> bool:
        q = SpecificityQuery(p_sp=p_sp, p_esp_lb=p_esp_lb, p_conf=p_conf,
                             nu=n * (m - 1))
        return specificity_confidence(q, MethodChoice.EXACT) >= p_conf

    hint = min(max(1, math.ceil(raw)), max_n)
    try:
        n = min_integer_satisfying(enough, start_hint=hint, max_n=max_n)
    except InfeasibleError:
        raise InfeasibleError(
            f"no sample size up to {max_n} reaches confidence {p_conf} for "
            f"floor {p_esp_lb} at target {p_sp}") from None
    return SampleSizeResult(n=n, raw=None)
