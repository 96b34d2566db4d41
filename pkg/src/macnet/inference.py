"""Hypothesis tests for edge detection and multiple-testing control.

Provides the variance-stabilized correlation test, the chi-squared test on
all canonical roots, tail approximations for the maximum/minimum of two
correlated test statistics (with a Monte Carlo alternative), a likelihood
ratio test for pair homogeneity, and Benjamini-Hochberg FDR control.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import gammaincc

from . import numkernel
from .errors import (
    DegenerateCorrelation,
    InsufficientSamples,
    InternalNumericalError,
    InvalidDf,
    InvalidGamma,
    InvalidP,
    LengthMismatch,
    NonFiniteInput,
    RootOutOfRange,
    SingularCovariance,
)

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

#: degrees-of-freedom bookkeeping for the homogeneity likelihood ratio test:
#: k(k+1)/2 equalities between the marginal blocks plus k(k-1)/2 symmetry
#: constraints on the cross block
HOMOGENEITY_DF_FORMULA = "k(k+1)/2 + k(k-1)/2"


def normal_sf(c: float) -> float:
    """Standard normal upper-tail probability."""
    return 0.5 * math.erfc(c / _SQRT2)


def normal_pdf(c: float) -> float:
    return _INV_SQRT_2PI * math.exp(-0.5 * c * c)


def chi2_sf(x: float, df: int) -> float:
    """Chi-squared upper-tail probability via the regularized incomplete gamma."""
    if int(df) != df or df < 1:
        raise InvalidDf(f"degrees of freedom must be a positive integer, got {df}")
    if math.isnan(x):
        raise NonFiniteInput("chi-squared statistic is NaN")
    if x == math.inf:
        return 0.0
    if x <= 0.0:
        return 1.0
    return float(gammaincc(df / 2.0, x / 2.0))


def fisher_z(rho_hat: float, n: int) -> float:
    """Variance-stabilized z statistic for a sample correlation.

    Equals sqrt(n-3)/2 * ln((1+rho)/(1-rho)); computed through atanh so the
    statistic is exactly antisymmetric in the correlation.
    """
    rho_hat = float(rho_hat)
    if not math.isfinite(rho_hat):
        raise NonFiniteInput("correlation is not finite")
    if abs(rho_hat) >= 1.0:
        raise DegenerateCorrelation(f"|rho|={abs(rho_hat)} leaves no finite statistic")
    if n < 4:
        raise InsufficientSamples(f"need at least 4 samples, got {n}")
    return math.sqrt(n - 3) * math.atanh(rho_hat)


@dataclass(frozen=True)
class BartlettTest:
    statistic: float
    df: int
    p: float


def bartlett_chi2(roots, n: int, k: int) -> BartlettTest:
    """Joint chi-squared test that all canonical roots are zero.

    The statistic is -[(n-1) - (k+0.5)] * ln prod(1 - root^2) with k^2
    degrees of freedom.
    """
    roots = np.asarray(roots, dtype=float)
    if roots.size != k:
        raise LengthMismatch(f"expected {k} canonical roots, got {roots.size}")
    if np.any(roots < 0.0) or np.any(roots > 1.0) or not np.all(np.isfinite(roots)):
        raise RootOutOfRange(f"canonical roots outside [0, 1]: {roots}")
    if n <= 2 * k + 2 or n - 1 < k * (2 * k - 1):
        raise InsufficientSamples(
            f"n={n} too small for k={k}: need n > {2 * k + 2} and n-1 >= {k * (2 * k - 1)}"
        )
    factor = (n - 1) - (k + 0.5)
    with np.errstate(divide="ignore"):
        log_terms = np.log1p(-(roots * roots))
    statistic = float(-factor * np.sum(log_terms))
    if math.isnan(statistic):
        raise InternalNumericalError("Bartlett statistic is NaN")
    return BartlettTest(statistic=statistic, df=k * k, p=chi2_sf(statistic, k * k))


def _w_formula(c: float, arc: float, mode: str) -> float:
    """Tail approximation for the extreme of two correlated z statistics.

    ``arc`` is the angle arccos of the correlation between the two
    statistics.  The correction term is an approximation of uncertain
    accuracy at low correlation; see :func:`extreme_corr_mc_pvalue` for the
    calibrated alternative.  Output is clamped to [0, 1].
    """
    if c == 0.0:
        # the correction term diverges at zero; the clamp takes over
        return 0.0 if mode == "max" else 1.0
    correction = normal_pdf(c) * (normal_pdf(c * arc / 2.0) - 0.5) / (c / 2.0)
    if mode == "max":
        value = normal_sf(c) + correction
    else:
        value = normal_sf(c) - correction
    return min(1.0, max(0.0, value))


def _check_extreme_inputs(z1: float, z2: float, rho_z: float, mode: str) -> float:
    if mode not in ("max", "min"):
        raise InvalidP(f"mode must be 'max' or 'min', got {mode!r}")
    if not (math.isfinite(z1) and math.isfinite(z2) and math.isfinite(rho_z)):
        raise NonFiniteInput("z statistics and their correlation must be finite")
    if abs(rho_z) > 1.0 + 1e-12:
        raise NonFiniteInput(f"correlation of z statistics outside [-1, 1]: {rho_z}")
    return min(1.0, max(-1.0, rho_z))


def extreme_corr_pvalue(z1: float, z2: float, rho_z: float, mode: str) -> float:
    """One-sided tail probability for max(z1, z2) or min(z1, z2)."""
    rho_z = _check_extreme_inputs(z1, z2, rho_z, mode)
    arc = math.acos(rho_z)
    c = max(z1, z2) if mode == "max" else min(z1, z2)
    return _w_formula(c, arc, mode)


def extreme_corr_pvalue_two_sided(z1: float, z2: float, rho_z: float, mode: str) -> float:
    """Two-sided tail probability for the extreme of two z statistics.

    Built from the one-sided approximation by quadrant decomposition: for the
    max, P(max|Z| > c) = 2 P(max Z > c) - 2 P(Z1 > c, Z2 < -c); for the min,
    P(min|Z| > c) sums the two same-sign and two opposite-sign quadrants.
    Opposite-sign quadrants reuse the one-sided form at the negated
    correlation.
    """
    rho_z = _check_extreme_inputs(z1, z2, rho_z, mode)
    arc = math.acos(rho_z)
    arc_neg = math.acos(-rho_z)
    if mode == "max":
        c = max(abs(z1), abs(z2))
        value = 2.0 * _w_formula(c, arc, "max") - 2.0 * _w_formula(c, arc_neg, "min")
    else:
        c = min(abs(z1), abs(z2))
        value = 2.0 * _w_formula(c, arc, "min") + 2.0 * _w_formula(c, arc_neg, "min")
    return min(1.0, max(0.0, value))


class ExtremeTailSampler:
    """Monte Carlo tail estimates for extremes of a correlated z pair.

    Draws a fixed panel of standard-normal pairs once; each query correlates
    the panel to the requested level, so estimates are deterministic for a
    given seed and smooth in the correlation.
    """

    def __init__(self, draws: int = 1_000_000, seed: int = 1905):
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
        self._u1 = rng.standard_normal(draws)
        self._u2 = rng.standard_normal(draws)
        self._tables = {}
        self.draws = draws

    def _pair(self, rho_z: float):
        rho_z = min(1.0, max(-1.0, rho_z))
        z2 = rho_z * self._u1 + math.sqrt(max(0.0, 1.0 - rho_z * rho_z)) * self._u2
        return self._u1, z2

    def sorted_extremes(self, rho_z: float, mode: str, two_sided: bool = False) -> np.ndarray:
        key = (float(rho_z), mode, two_sided)
        table = self._tables.get(key)
        if table is None:
            z1, z2 = self._pair(rho_z)
            if two_sided:
                z1, z2 = np.abs(z1), np.abs(z2)
            extreme = np.maximum(z1, z2) if mode == "max" else np.minimum(z1, z2)
            table = np.sort(extreme)
            self._tables[key] = table
        return table

    def pvalue(self, c: float, rho_z: float, mode: str, two_sided: bool = False) -> float:
        table = self.sorted_extremes(rho_z, mode, two_sided)
        idx = np.searchsorted(table, c, side="right")
        return float((table.size - idx) / table.size)


def extreme_corr_mc_pvalue(
    z1: float,
    z2: float,
    rho_z: float,
    mode: str,
    *,
    two_sided: bool = False,
    sampler: Optional[ExtremeTailSampler] = None,
) -> float:
    """Monte Carlo p-value for the extreme of two correlated z statistics."""
    rho_z = _check_extreme_inputs(z1, z2, rho_z, mode)
    sampler = sampler or ExtremeTailSampler()
    if two_sided:
        c = max(abs(z1), abs(z2)) if mode == "max" else min(abs(z1), abs(z2))
    else:
        c = max(z1, z2) if mode == "max" else min(z1, z2)
    return sampler.pvalue(c, rho_z, mode, two_sided)


def w_formula_calibration_table(rho_values=(0.0, 0.3, 0.6), c_values=(1.5, 2.0, 2.5),
                                draws: int = 1_000_000, seed: int = 1905):
    """Analytic tail approximations next to Monte Carlo estimates.

    Returns one row per (mode, rho_z, c): the formula output, the Monte
    Carlo tail estimate, and its standard error.  This is the record of the
    approximation's accuracy; nothing recalibrates the formula itself.
    """
    sampler = ExtremeTailSampler(draws=draws, seed=seed)
    rows = []
    for mode in ("max", "min"):
        for rho_z in rho_values:
            for c in c_values:
                formula = extreme_corr_pvalue(c, c, rho_z, mode)
                mc = extreme_corr_mc_pvalue(c, c, rho_z, mode, sampler=sampler)
                se = math.sqrt(max(mc * (1.0 - mc), 1.0 / draws) / draws)
                rows.append(
                    {"mode": mode, "rho_z": rho_z, "c": c, "formula": formula,
                     "montecarlo": mc, "mc_se": se, "deviation": formula - mc}
                )
    return rows


def fisher_z_correlation(sigma_ii, sigma_jj, sigma_ij) -> float:
    """Asymptotic correlation of the two per-attribute z statistics (k = 2).

    Delta-method expression for the covariance of two sample correlations
    with no shared variables, divided by the product of their asymptotic
    standard deviations; all entries are plug-in estimates.
    """
    sigma_ii = np.asarray(sigma_ii, dtype=float)
    sigma_jj = np.asarray(sigma_jj, dtype=float)
    sigma_ij = np.asarray(sigma_ij, dtype=float)
    if sigma_ii.shape != (2, 2) or sigma_jj.shape != (2, 2) or sigma_ij.shape != (2, 2):
        raise LengthMismatch("z-statistic correlation is defined for 2 attributes")
    r_ab = sigma_ij[0, 0]
    r_cd = sigma_ij[1, 1]
    r_ac = sigma_ii[0, 1]
    r_bd = sigma_jj[0, 1]
    r_ad = sigma_ij[0, 1]
    r_bc = sigma_ij[1, 0]
    cov = (
        0.5 * r_ab * r_cd * (r_ac**2 + r_ad**2 + r_bc**2 + r_bd**2)
        + r_ac * r_bd
        + r_ad * r_bc
        - r_ab * (r_ac * r_ad + r_bc * r_bd)
        - r_cd * (r_ac * r_bc + r_ad * r_bd)
    )
    denom = (1.0 - r_ab**2) * (1.0 - r_cd**2)
    if denom <= 0.0:
        raise DegenerateCorrelation("a per-attribute correlation has magnitude 1")
    return min(1.0, max(-1.0, float(cov / denom)))


@dataclass(frozen=True, eq=False)
class FdrDecision:
    """Outcome of the step-up false-discovery-rate procedure."""

    gamma: float
    cutoff_index: int
    rejected: tuple
    qvalues: np.ndarray


def bh_fdr(pvalues: Sequence[float], gamma: float) -> FdrDecision:
    """Benjamini-Hochberg step-up rule with monotone adjusted q-values.

    Rejects the ``cutoff_index`` smallest p-values where ``cutoff_index`` is
    the largest i with p_(i) <= i * gamma / m; ties are ordered by original
    index.  q-values are q_(i) = min_{j >= i} m p_(j) / j clamped to 1.
    """
    p = np.asarray(list(pvalues), dtype=float)
    if p.size and (np.any(~np.isfinite(p)) or np.any(p < 0.0) or np.any(p > 1.0)):
        bad = int(np.flatnonzero(~((p >= 0.0) & (p <= 1.0)))[0])
        raise InvalidP(f"p-value at index {bad} outside [0, 1]: {p[bad]}")
    if not (0.0 < gamma < 1.0):
        raise InvalidGamma(f"FDR level must lie in (0, 1), got {gamma}")
    m = p.size
    if m == 0:
        return FdrDecision(gamma=gamma, cutoff_index=0, rejected=(), qvalues=np.array([]))
    order = np.lexsort((np.arange(m), p))
    sorted_p = p[order]
    ranks = np.arange(1, m + 1)
    passed = sorted_p <= ranks * gamma / m
    cutoff = int(np.max(np.nonzero(passed)[0]) + 1) if np.any(passed) else 0
    rejected = tuple(sorted(int(i) for i in order[:cutoff]))
    q_sorted = np.minimum.accumulate((m * sorted_p / ranks)[::-1])[::-1]
    q_sorted = np.minimum(q_sorted, 1.0)
    qvalues = np.empty(m)
    qvalues[order] = q_sorted
    return FdrDecision(gamma=gamma, cutoff_index=cutoff, rejected=rejected, qvalues=qvalues)


@dataclass(frozen=True)
class HomogeneityTest:
    statistic: float
    df: int
    p: float


def _gaussian_loglik_terms(model_cov: np.ndarray, sample_cov: np.ndarray, n: int) -> float:
    sign, logdet = np.linalg.slogdet(model_cov)
    if sign <= 0:
        raise SingularCovariance("model covariance is not positive-definite")
    trace_term = float(np.trace(np.linalg.solve(model_cov, sample_cov)))
    return -0.5 * n * (logdet + trace_term)


def homogeneity_lrt(samples_i, samples_j) -> HomogeneityTest:
    """Likelihood ratio test of equal marginal blocks and a symmetric cross block.

    Fits the stacked 2k-vector as Gaussian, unconstrained versus constrained
    to a block-swap-invariant covariance.  The constrained fit alternates
    block averaging, cross-block symmetrization and eigenvalue flooring at
    1e-8 until the likelihood moves by less than 1e-10 (the projection is a
    fixed point after one pass whenever no flooring is needed).
    """
    samples_i = numkernel.as_matrix(samples_i)
    samples_j = numkernel.as_matrix(samples_j)
    if samples_i.shape != samples_j.shape:
        raise LengthMismatch("sample blocks have mismatched shapes")
    n, k = samples_i.shape
    if n < 2 * k + 2:
        raise InsufficientSamples(f"need at least {2 * k + 2} samples for k={k}, got {n}")
    stacked = np.hstack([samples_i, samples_j])
    centered = stacked - stacked.mean(axis=0)
    sample_cov = centered.T @ centered / n
    sign, logdet_free = np.linalg.slogdet(sample_cov)
    if sign <= 0 or not np.isfinite(logdet_free):
        raise SingularCovariance("stacked sample covariance is singular")
    loglik_free = -0.5 * n * (logdet_free + 2 * k)

    current = sample_cov.copy()
    previous = None
    constrained = current
    for _ in range(100):
        marginal = (current[:k, :k] + current[k:, k:]) / 2.0
        cross = (current[:k, k:] + current[:k, k:].T) / 2.0
        candidate = np.block([[marginal, cross], [cross, marginal]])
        values, vectors = np.linalg.eigh(candidate)
        if values[0] < 1e-8:
            candidate = (vectors * np.maximum(values, 1e-8)) @ vectors.T
        loglik = _gaussian_loglik_terms(candidate, sample_cov, n)
        constrained = candidate
        if previous is not None and abs(loglik - previous) < 1e-10:
            break
        previous = loglik
        current = candidate

    loglik_constrained = _gaussian_loglik_terms(constrained, sample_cov, n)
    statistic = max(0.0, 2.0 * (loglik_free - loglik_constrained))
    df = k * (k + 1) // 2 + k * (k - 1) // 2
    return HomogeneityTest(statistic=statistic, df=df, p=chi2_sf(statistic, df))
