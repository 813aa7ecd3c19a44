"""Sensitivity of the change rule and its distribution under estimation.

For a subject whose true value shifts by ``mu_delta`` between visits, the
probability that the rule flags the change depends only on the
noise-standardized effect size ``delta = mu_delta / w_SD``.  With the
threshold built from an estimated within-subject SD the realized
("effective") sensitivity again becomes a random variable through the ratio
``W = wsd_hat / w_SD`` -- this time a decreasing transform: overestimating
the spread widens the no-change band and costs detection power.

Two treatments of the detection event are offered.  ``FULL_TWO_SIDED``
keeps both exceedance directions (the exact definition).
``ONE_SIDED_EXCEEDANCE`` drops the far-side term, which for positive
effects is at most ``(1 - p_sp)/2`` and vanishes quickly in ``delta``; it
is what makes the confidence and sample-size formulas analytic, and is the
default there.  Point evaluations default to the full form.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InfeasibleError
from .core import (
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
    chisq_quantile,
    integrate,
    min_integer_satisfying,
    normal_cdf,
    normal_quantile,
)
from .specificity import MethodChoice, SampleSizeResult, _as_method

__all__ = [
    "EffectSize",
    "SensitivityApproximation",
    "SensitivityQuery",
    "sensitivity",
    "effective_sensitivity_given_ratio",
    "expected_effective_sensitivity",
    "sensitivity_confidence",
    "sensitivity_lower_bound",
    "sample_size_sensitivity",
]

_SQRT2 = math.sqrt(2.0)
_DEFAULT_QUADRATURE = QuadratureSpec(abs_tol=1e-11, rel_tol=1e-11)


class SensitivityApproximation(enum.Enum):
    """Treatment of the two-sided detection event.

    ``FULL_TWO_SIDED`` counts exceedance of either band edge;
    ``ONE_SIDED_EXCEEDANCE`` keeps only the edge the effect pushes toward,
    neglecting a term bounded by ``(1 - p_sp)/2``.
    """

    ONE_SIDED_EXCEEDANCE = "one-sided-exceedance"
    FULL_TWO_SIDED = "full-two-sided"


def _as_approximation(value) -> SensitivityApproximation:
    if isinstance(value, SensitivityApproximation):
        return value
    try:
        return SensitivityApproximation(value)
    except ValueError:
        raise DomainError(
            f"approximation must be SensitivityApproximation or one of "
            f"{[a.value for a in SensitivityApproximation]}, got {value!r}") from None


@dataclass(frozen=True)
class EffectSize:
    """Noise-standardized true change ``delta = mu_delta / w_SD``.

    Stored as a magnitude: by symmetry of the rule a negative shift behaves
    like its mirror image, so negative inputs are reflected and the sign
    kept only in ``negative`` for reporting.
    """

    delta: float
    negative: bool = False

    def __post_init__(self):
        delta = float(self.delta)
        if not math.isfinite(delta):
            raise DomainError(f"effect size must be finite, got {delta!r}")
        if delta < 0.0:
            object.__setattr__(self, "delta", -delta)
            object.__setattr__(self, "negative", True)
        else:
            object.__setattr__(self, "delta", delta)

    @classmethod
    def from_change(cls, mu_delta: float, w_sd: float) -> "EffectSize":
        """Standardize a raw change in biomarker units by the within-subject SD."""
        mu_delta = float(mu_delta)
        w_sd = float(w_sd)
        if not math.isfinite(mu_delta):
            raise DomainError(f"mu_delta must be finite, got {mu_delta!r}")
        if not math.isfinite(w_sd) or w_sd <= 0.0:
            raise DomainError(f"w_sd must be finite and > 0, got {w_sd!r}")
        return cls(delta=mu_delta / w_sd)

    @property
    def signed(self) -> float:
        return -self.delta if self.negative else self.delta


def _as_effect(delta) -> EffectSize:
    if isinstance(delta, EffectSize):
        return delta
    return EffectSize(float(delta))


@dataclass(frozen=True)
class SensitivityQuery:
    """Inputs of a confidence question about the effective sensitivity.

    Asks: with ``nu`` pooled degrees of freedom, target specificity
    ``p_sp`` and effect size ``delta``, how sure can we be that the
    realized sensitivity stays at or above ``p_ese_lb``?
    """

    p_sp: float
    delta: EffectSize
    p_ese_lb: float
    p_conf: float
    nu: int
    approximation: SensitivityApproximation = SensitivityApproximation.ONE_SIDED_EXCEEDANCE

    def __post_init__(self):
        object.__setattr__(self, "p_sp", check_probability(self.p_sp, "p_sp"))
        object.__setattr__(self, "delta", _as_effect(self.delta))
        object.__setattr__(self, "p_ese_lb", check_probability(self.p_ese_lb, "p_ese_lb"))
        object.__setattr__(self, "p_conf", check_probability(self.p_conf, "p_conf"))
        object.__setattr__(self, "nu", check_degrees_of_freedom(self.nu))
        object.__setattr__(self, "approximation", _as_approximation(self.approximation))


def _p_ese_raw(y, d, approximation: SensitivityApproximation):
    # detection probability when the band edge sits at y (in difference-SD
    # units) and the true shift at d = delta / sqrt(2); at d = 0 the full
    # form is the bitwise complement of the specificity expression.
    if approximation is SensitivityApproximation.FULL_TWO_SIDED:
        return 1.0 - (normal_cdf(y - d) - normal_cdf(-y - d))
    return 1.0 - normal_cdf(y - d)


def sensitivity(delta, p_sp: float = 0.95) -> float:
    """Detection probability of a true shift ``delta`` under a perfect threshold.

    ``1 - [Phi(z - delta/sqrt(2)) - Phi(-z - delta/sqrt(2))]``: the chance
    the measured difference leaves the no-change band when the threshold
    uses the true within-subject SD.  Equals ``1 - p_sp`` at ``delta = 0``
    and increases to 1 with ``|delta|``.
    """
    return effective_sensitivity_given_ratio(
        1.0, delta, p_sp, SensitivityApproximation.FULL_TWO_SIDED)


def effective_sensitivity_given_ratio(
        w, delta, p_sp: float = 0.95,
        approximation: SensitivityApproximation = SensitivityApproximation.FULL_TWO_SIDED):
    """Realized sensitivity of the plug-in rule at ratio ``w``.

    Parameters
    ----------
    w : float or ndarray
        Estimation-error ratio ``wsd_hat / w_SD``; finite and > 0.
    delta : EffectSize or float
        Noise-standardized true change; negative values reflect.
    p_sp : float
        Target specificity the threshold was built for.
    approximation : SensitivityApproximation
        Full two-sided detection event, or the analytic one-sided form.

    Returns
    -------
    float or ndarray
        Decreasing in ``w``: an overestimated spread widens the band and
        misses changes.  At ``w = 1`` the full form equals
        :func:`sensitivity` exactly.
    """
    approximation = _as_approximation(approximation)
    eff = _as_effect(delta)
    z = symmetric_coverage_quantile(p_sp)
    d = eff.delta / _SQRT2
    if isinstance(w, np.ndarray):
        if w.size and (not np.all(np.isfinite(w)) or not np.all(w > 0.0)):
            raise DomainError("ratio w must be finite and > 0 elementwise")
        return _p_ese_raw(z * w, d, approximation)
    w = float(w)
    if not math.isfinite(w) or w <= 0.0:
        raise DomainError(f"ratio w must be finite and > 0, got {w!r}")
    return _p_ese_raw(z * w, d, approximation)


def expected_effective_sensitivity(nu: int, delta, p_sp: float = 0.95,
                                   method: MethodChoice = MethodChoice.EXACT,
                                   quadrature: QuadratureSpec | None = None) -> float:
    """Mean of the (full two-sided) effective sensitivity.

    Integrates both detection terms against the density of ``W``
    (chi-square form or normal kernel per ``method``); the difference from
    :func:`sensitivity` is the power bias of the plug-in rule.
    """
    nu = check_degrees_of_freedom(nu)
    method = _as_method(method)
    eff = _as_effect(delta)
    z = symmetric_coverage_quantile(p_sp)
    d = eff.delta / _SQRT2
    spec = quadrature if quadrature is not None else _DEFAULT_QUADRATURE
    if method is MethodChoice.EXACT:
        lo, hi = ratio_support_exact(nu)
        density = ratio_density_exact
    else:
        lo, hi = ratio_support_normal(nu)
        density = ratio_density_normal
    near = integrate(lambda w: normal_cdf(z * w - d) * density(w, nu), lo, hi, spec)
    far = integrate(lambda w: normal_cdf(-z * w - d) * density(w, nu), lo, hi, spec)
    return 1.0 - near + far


def _invert_two_sided(target: float, d: float, z: float) -> float:
    """Ratio ``w`` where the full two-sided effective sensitivity hits ``target``.

    The map is strictly decreasing in ``w`` (both band edges move outward),
    so bracketed bisection is safe; refined to 1e-12 in ``w``.
    """
    def value(w):
        return _p_ese_raw(z * w, d, SensitivityApproximation.FULL_TWO_SIDED)

    lo = 1e-12
    if value(lo) <= target:
        return lo
    hi = 1.0
    for _ in range(2000):
        if value(hi) <= target:
            break
        hi *= 2.0
    else:
        raise DomainError(
            f"two-sided effective sensitivity never reaches {target}")
    while hi - lo > 1e-12 * max(1.0, lo):
        mid = 0.5 * (lo + hi)
        if value(mid) > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _attainable_sensitivity(eff: EffectSize, p_sp: float,
                            approximation: SensitivityApproximation) -> float:
    # the w = 1 sensitivity under the same approximation the computation
    # will use, so boundary queries fail consistently across methods
    z = symmetric_coverage_quantile(p_sp)
    return _p_ese_raw(z, eff.delta / _SQRT2, approximation)


def sensitivity_confidence(query: SensitivityQuery,
                           method: MethodChoice = MethodChoice.EXACT) -> float:
    """Probability that the effective sensitivity reaches the queried bound.

    One-sided form: the bound maps to a ratio cap
    ``u = (Phi^{-1}(1 - p_ese_lb) + delta/sqrt(2)) / z`` and the answer is
    ``P[W <= u]`` (chi-square CDF exactly, normal CDF asymptotically).  The
    full two-sided form first inverts the sensitivity map numerically, then
    takes the same tail.  The query is infeasible when even a perfect
    estimate could not attain the bound.
    """
    method = _as_method(method)
    eff = query.delta
    if (query.approximation is SensitivityApproximation.ONE_SIDED_EXCEEDANCE
            and eff.delta == 0.0):
        raise DomainError("one-sided form requires a nonzero effect size")
    attainable = _attainable_sensitivity(eff, query.p_sp, query.approximation)
    if attainable <= query.p_ese_lb:
        raise InfeasibleError(
            f"sensitivity at delta={eff.delta:g} and p_sp={query.p_sp:g} is "
            f"{attainable:.6f} under {query.approximation.value}; the lower "
            f"bound {query.p_ese_lb:g} must be strictly below it")
    z = symmetric_coverage_quantile(query.p_sp)
    d = eff.delta / _SQRT2
    if query.approximation is SensitivityApproximation.ONE_SIDED_EXCEEDANCE:
        u = (normal_quantile(1.0 - query.p_ese_lb) + d) / z
    else:
        u = _invert_two_sided(query.p_ese_lb, d, z)
    if method is MethodChoice.EXACT:
        return chisq_cdf(query.nu * u * u, query.nu)
    return normal_cdf((u - 1.0) * math.sqrt(2.0 * query.nu))


def sensitivity_lower_bound(
        nu: int, delta, p_sp: float = 0.95, p_conf: float = 0.95,
        method: MethodChoice = MethodChoice.EXACT,
        approximation: SensitivityApproximation = SensitivityApproximation.ONE_SIDED_EXCEEDANCE,
) -> float:
    """Worst-case effective sensitivity held with probability ``p_conf``.

    The effective sensitivity is decreasing in ``W``, so the guaranteed
    floor sits at the upper ``p_conf`` quantile of ``W``; the chi-square
    form gives it in closed form.  Inverse of
    :func:`sensitivity_confidence` in the bound argument.
    """
    nu = check_degrees_of_freedom(nu)
    p_conf = check_probability(p_conf, "p_conf")
    method = _as_method(method)
    approximation = _as_approximation(approximation)
    eff = _as_effect(delta)
    if eff.delta <= 0.0:
        raise DomainError("sensitivity_lower_bound requires a nonzero effect size")
    if method is MethodChoice.EXACT:
        w_q = math.sqrt(chisq_quantile(p_conf, nu) / nu)
    else:
        w_q = 1.0 + normal_quantile(p_conf) / math.sqrt(2.0 * nu)
        if w_q <= 0.0:
            raise DomainError(
                f"normal approximation places the {p_conf:g} ratio quantile "
                f"at w={w_q:.4g} <= 0 for nu={nu}; use the exact method")
    return effective_sensitivity_given_ratio(w_q, eff, p_sp, approximation)


def sample_size_sensitivity(
        m: int, delta, p_sp: float = 0.95, p_ese_lb: float = 0.75,
        p_conf: float = 0.95,
        method: MethodChoice = MethodChoice.EXACT,
        approximation: SensitivityApproximation = SensitivityApproximation.ONE_SIDED_EXCEEDANCE,
        max_n: int = 10_000_000) -> SampleSizeResult:
    """Minimal subjects ``n`` (at ``m`` replicates each) for a sensitivity floor.

    Smallest ``n`` such that, with ``nu = n (m - 1)`` degrees of freedom,
    the effective sensitivity at effect size ``delta`` stays at or above
    ``p_ese_lb`` with probability at least ``p_conf``.  Three routes:
    asymptotic closed form (one-sided, returns ``raw``), integer search
    over the one-sided chi-square confidence, or integer search over the
    numerically inverted full two-sided confidence.
    """
    if not isinstance(m, int) or isinstance(m, bool) or m < 2:
        raise DomainError(f"replicates per subject m must be an integer >= 2, got {m!r}")
    p_sp = check_probability(p_sp, "p_sp")
    p_ese_lb = check_probability(p_ese_lb, "p_ese_lb")
    p_conf = check_probability(p_conf, "p_conf")
    method = _as_method(method)
    approximation = _as_approximation(approximation)
    eff = _as_effect(delta)
    if eff.delta <= 0.0:
        raise DomainError("sample_size_sensitivity requires a nonzero effect size")

    attainable = _attainable_sensitivity(eff, p_sp, approximation)
    if attainable <= p_ese_lb:
        raise InfeasibleError(
            f"no finite sample size achieves an effective-sensitivity floor at "
            f"or above the attainable sensitivity: p_se(delta={eff.delta:g}) = "
            f"{attainable:.6f} under {approximation.value}, floor {p_ese_lb:g}")
    if p_conf <= 0.5:
        warnings.warn(
            f"p_conf={p_conf} is at or below 0.5; the sample-size criterion "
            "degenerates and the closed form is not meaningful", stacklevel=2)

    z = symmetric_coverage_quantile(p_sp)
    d = eff.delta / _SQRT2
    denom = normal_quantile(1.0 - p_ese_lb) + d - z
    # denom > 0 is guaranteed when the one-sided feasibility check ran; a
    # two-sided query can be feasible with denom <= 0, where the closed
    # form has no solution and only serves as a (skipped) search hint.
    raw = (normal_quantile(p_conf) * z / denom) ** 2 / (2.0 * (m - 1)) \
        if denom > 0.0 else math.inf
    if method is MethodChoice.ASYMPTOTIC and \
            approximation is SensitivityApproximation.ONE_SIDED_EXCEEDANCE:
        return SampleSizeResult(n=max(1, math.ceil(raw)), raw=raw)

    def enough(n: int) -> bool:
        q = SensitivityQuery(p_sp=p_sp, delta=eff, p_ese_lb=p_ese_lb,
                             p_conf=p_conf, nu=n * (m - 1),
                             approximation=approximation)
        return sensitivity_confidence(q, method) >= p_conf

    hint = min(max(1, math.ceil(raw)), max_n) if math.isfinite(raw) else 1
    try:
        n = min_integer_satisfying(enough, start_hint=hint, max_n=max_n)
    except InfeasibleError:
        raise InfeasibleError(
            f"no sample size up to {max_n} reaches confidence {p_conf} for "
            f"floor {p_ese_lb} at delta={eff.delta:g}") from None
    return SampleSizeResult(n=n, raw=None)
