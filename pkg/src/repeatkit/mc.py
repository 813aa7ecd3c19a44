"""Monte Carlo oracle: brute-force simulation of test-retest studies.

Every analytic statement in this package reduces to the law of the
estimation-error ratio ``W = wsd_hat / w_SD``.  This module checks those
statements the expensive way: it simulates whole test-retest studies
(``n`` subjects x ``m`` replicates of ``N(mu_i, w_sd^2)`` measurements),
re-estimates the within-subject SD per study, and either maps the realized
ratio through the closed-form operating characteristics or carries on and
simulates the longitudinal decision itself.

Reproducibility contract: replicate ``r`` of a run draws from a Philox
stream keyed ``[seed, r]``, so any single replicate can be regenerated in
isolation and neither chunking nor thread count can change results.
Uniforms map 64-bit raw output to the open interval via
``((raw >> 11) + 0.5) * 2^-53`` and become normals through the package's
own quantile function.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .core import symmetric_coverage_quantile
from .numerics import check_probability, normal_quantile
from .sensitivity import SensitivityApproximation, effective_sensitivity_given_ratio
from .specificity import effective_specificity_given_ratio

__all__ = [
    "SimulationConfig",
    "EmpiricalDistribution",
    "QUANTILE_PROBES",
    "simulate_wsd_ratios",
    "simulate_effective_specificity",
    "simulate_effective_sensitivity",
    "simulate_longitudinal_decisions",
]

_SQRT2 = math.sqrt(2.0)

QUANTILE_PROBES = (0.01, 0.05, 0.25, 0.50, 0.75, 0.95, 0.99)

# Work-unit size in replicates; a fixed constant (shrunk only by the
# per-replicate draw count to bound buffer memory) so the chunk layout, and
# therefore every floating-point reduction, is independent of threading.
_CHUNK_REPLICATES = 4096
_CHUNK_BUDGET_DRAWS = 8_000_000


def _thread_count() -> int:
    raw = os.environ.get("REPEATKIT_THREADS", "0")
    try:
        requested = int(raw)
    except ValueError:
        warnings.warn(f"REPEATKIT_THREADS={raw!r} is not an integer; using auto",
                      stacklevel=2)
        requested = 0
    if requested <= 0:
        return max(1, os.cpu_count() or 1)
    return requested


@dataclass(frozen=True)
class SimulationConfig:
    """Parameters of one simulated study design and run.

    ``n`` subjects measured ``m`` times each with within-subject SD
    ``w_sd``; ``delta`` is the noise-standardized true change used by the
    sensitivity arms; ``replicates`` independent studies are generated from
    ``seed``.
    """

    n: int
    m: int
    w_sd: float = 1.0
    p_sp: float = 0.95
    delta: float = 0.0
    replicates: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if not isinstance(self.n, int) or isinstance(self.n, bool) or self.n < 1:
            raise DomainError(f"n must be a positive integer, got {self.n!r}")
        if not isinstance(self.m, int) or isinstance(self.m, bool) or self.m < 2:
            raise DomainError(f"m must be an integer >= 2, got {self.m!r}")
        if not isinstance(self.w_sd, (int, float)) or isinstance(self.w_sd, bool) \
                or not math.isfinite(self.w_sd) or self.w_sd <= 0.0:
            raise DomainError(f"w_sd must be finite and > 0, got {self.w_sd!r}")
        object.__setattr__(self, "w_sd", float(self.w_sd))
        object.__setattr__(self, "p_sp", check_probability(self.p_sp, "p_sp"))
        if not isinstance(self.delta, (int, float)) or isinstance(self.delta, bool) \
                or not math.isfinite(self.delta):
            raise DomainError(f"delta must be finite, got {self.delta!r}")
        object.__setattr__(self, "delta", float(self.delta))
        if not isinstance(self.replicates, int) or isinstance(self.replicates, bool) \
                or self.replicates < 1:
            raise DomainError(f"replicates must be a positive integer, got {self.replicates!r}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) \
                or not 0 <= self.seed < 2**64:
            raise DomainError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")

    @property
    def nu(self) -> int:
        return self.n * (self.m - 1)


@dataclass(frozen=True)
class EmpiricalDistribution:
    """Simulated samples of an operating characteristic plus their summary.

    ``quantiles`` pairs each probe level with the sample quantile;
    ``mc_standard_error_of_mean`` is ``sd / sqrt(replicates)``.  The summary
    is always recomputable from ``samples``.
    """

    samples: np.ndarray
    mean: float
    sd: float
    quantiles: tuple[tuple[float, float], ...]
    mc_standard_error_of_mean: float

    @classmethod
    def from_samples(cls, samples: np.ndarray) -> "EmpiricalDistribution":
        samples = np.asarray(samples, dtype=float)
        if samples.ndim != 1 or samples.size == 0:
            raise DomainError("samples must be a nonempty 1-d array")
        samples = samples.copy()
        samples.flags.writeable = False
        mean = float(np.mean(samples))
        sd = float(np.std(samples, ddof=1)) if samples.size > 1 else 0.0
        quantiles = tuple(
            (q, float(np.quantile(samples, q))) for q in QUANTILE_PROBES)
        return cls(samples=samples, mean=mean, sd=sd, quantiles=quantiles,
                   mc_standard_error_of_mean=sd / math.sqrt(samples.size))

    def quantile(self, q: float) -> float:
        """Sample quantile at an arbitrary level (not just the stored probes)."""
        q = check_probability(q, "q")
        return float(np.quantile(self.samples, q))

    def quantile_standard_error(self, q: float, half_window: float = 0.01) -> float:
        """Monte Carlo standard error of the ``q``-quantile.

        Binomial/density method: ``sqrt(q (1-q) / R)`` counting error scaled
        by the inverse density, the latter estimated from the quantile slope
        over ``q +- half_window``.
        """
        q = check_probability(q, "q")
        r = self.samples.size
        h = min(half_window, 0.5 * q, 0.5 * (1.0 - q))
        if h <= 0.0 or r < 2:
            raise DomainError("too few samples or too extreme q for a quantile SE")
        slope = (np.quantile(self.samples, q + h)
                 - np.quantile(self.samples, q - h)) / (2.0 * h)
        return math.sqrt(q * (1.0 - q) / r) * float(slope)


def _chunk_layout(cfg: SimulationConfig, draws_per_replicate: int) -> list[tuple[int, int]]:
    size = max(1, min(_CHUNK_REPLICATES, _CHUNK_BUDGET_DRAWS // draws_per_replicate))
    return [(start, min(size, cfg.replicates - start))
            for start in range(0, cfg.replicates, size)]


def _run_chunks(worker, chunks):
    threads = _thread_count()
    if threads == 1 or len(chunks) == 1:
        return [worker(start, count) for start, count in chunks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda sc: worker(*sc), chunks))


def _chunk_normals(cfg: SimulationConfig, start: int, count: int,
                   draws: int) -> np.ndarray:
    """Standard normal draws for replicates [start, start+count), shape (count, draws)."""
    out = np.empty((count, draws), dtype=np.float64)
    shift = np.uint64(11)
    scale = 2.0 ** -53
    for i in range(count):
        raw = np.random.Philox(key=[cfg.seed, start + i]).random_raw(draws)
        out[i] = (np.asarray(raw >> shift, dtype=np.float64) + 0.5) * scale
    return normal_quantile(out)


def _chunk_ratios(cfg: SimulationConfig, eps: np.ndarray) -> np.ndarray:
    """Estimation-error ratios from per-replicate noise draws of shape (count, n*m)."""
    meas = cfg.w_sd * eps.reshape(eps.shape[0], cfg.n, cfg.m)
    centered = meas - meas.mean(axis=2, keepdims=True)
    pooled_ss = np.einsum("rij,rij->r", centered, centered)
    wsd_hat = np.sqrt(pooled_ss / cfg.nu)
    return wsd_hat / cfg.w_sd


def simulate_wsd_ratios(cfg: SimulationConfig) -> np.ndarray:
    """Draws of ``wsd_hat / w_SD``, one per simulated study.

    Each replicate builds a full ``n x m`` measurement table, pools the
    within-subject sums of squares, and normalizes the resulting SD
    estimate by the true ``w_sd``.  Deterministic given ``cfg``.
    """
    draws = cfg.n * cfg.m
    chunks = _chunk_layout(cfg, draws)

    def worker(start, count):
        return _chunk_ratios(cfg, _chunk_normals(cfg, start, count, draws))

    return np.concatenate(_run_chunks(worker, chunks))


def simulate_effective_specificity(cfg: SimulationConfig) -> EmpiricalDistribution:
    """Empirical distribution of the effective specificity across studies.

    Per study the realized ratio is mapped through the closed form; no
    inner longitudinal simulation is needed (that path is exercised by
    :func:`simulate_longitudinal_decisions`).
    """
    ratios = simulate_wsd_ratios(cfg)
    return EmpiricalDistribution.from_samples(
        effective_specificity_given_ratio(ratios, cfg.p_sp))


def simulate_effective_sensitivity(cfg: SimulationConfig) -> EmpiricalDistribution:
    """Empirical distribution of the full two-sided effective sensitivity."""
    ratios = simulate_wsd_ratios(cfg)
    return EmpiricalDistribution.from_samples(
        effective_sensitivity_given_ratio(
            ratios, cfg.delta, cfg.p_sp, SensitivityApproximation.FULL_TWO_SIDED))


def simulate_longitudinal_decisions(cfg: SimulationConfig) -> tuple[float, float]:
    """End-to-end decision simulation: (empirical specificity, empirical sensitivity).

    The only operation with no closed forms anywhere: each study estimates
    its threshold, then one unchanged and one changed (by ``delta * w_sd``)
    measurement pair are drawn and classified by the strict-exceedance rule
    (the same comparison as ``decide_change``).  Fractions are aggregated
    across all studies.
    """
    z = symmetric_coverage_quantile(cfg.p_sp)
    draws = cfg.n * cfg.m + 4
    chunks = _chunk_layout(cfg, draws)

    def worker(start, count):
        normals = _chunk_normals(cfg, start, count, draws)
        ratios = _chunk_ratios(cfg, normals[:, :cfg.n * cfg.m])
        rc_hat = z * _SQRT2 * (ratios * cfg.w_sd)
        pair = normals[:, cfg.n * cfg.m:]
        y_pre0 = cfg.w_sd * pair[:, 0]
        y_post0 = cfg.w_sd * pair[:, 1]
        y_pre1 = cfg.w_sd * pair[:, 2]
        y_post1 = cfg.delta * cfg.w_sd + cfg.w_sd * pair[:, 3]
        unchanged_kept = np.abs(y_post0 - y_pre0) <= rc_hat
        changed_caught = np.abs(y_post1 - y_pre1) > rc_hat
        return int(np.count_nonzero(unchanged_kept)), int(np.count_nonzero(changed_caught))

    results = _run_chunks(worker, chunks)
    kept = sum(r[0] for r in results)
    caught = sum(r[1] for r in results)
    return kept / cfg.replicates, caught / cfg.replicates
