"""
Kappa-mu shadowed per-hop SNR statistics.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import NamedTuple, Optional, Tuple

import numpy as np
from scipy import special

from lib.analysis.specfun import LogNum, SeriesConfig, kummer_1f1_series, log_sum, truncation_length, upper_inc_gamma
from lib.errors import ConfigError, DomainError, ShapeIntegralityError

logger = logging.getLogger(__name__)

INF = math.inf
_INTEGER_TOL = 1e-9


@dataclass(frozen=True)
class FadingParams:
    """
    Shape triple and linear average SNR of one kappa-mu shadowed link.

    m = INF means an unshadowed dominant component.
    """

    kappa: float
    mu: float
    m: float
    avg_snr: float

    def __post_init__(self) -> None:
        if not (self.kappa >= 0.0 and math.isfinite(self.kappa)):
            raise ConfigError(f"must be finite and >= 0, got {self.kappa}", "kappa")
        if not (self.mu > 0.0 and math.isfinite(self.mu)):
            raise ConfigError(f"must be finite and > 0, got {self.mu}", "mu")
        if not self.m > 0.0:
            raise ConfigError(f"must be > 0 or inf, got {self.m}", "m")
        if not (self.avg_snr > 0.0 and math.isfinite(self.avg_snr)):
            raise ConfigError(f"must be finite and > 0, got {self.avg_snr}", "avg_snr")

    @property
    def unshadowed(self) -> bool:
        return math.isinf(self.m)

    def with_avg_snr(self, avg_snr: float) -> "FadingParams":
        return replace(self, avg_snr=avg_snr)


def rayleigh(avg_snr: float) -> FadingParams:
    return FadingParams(0.0, 1.0, INF, avg_snr)


def one_sided_gaussian(avg_snr: float) -> FadingParams:
    return FadingParams(0.0, 0.5, INF, avg_snr)


def nakagami(m: float, avg_snr: float) -> FadingParams:
    return FadingParams(0.0, m, INF, avg_snr)


def rician(k: float, avg_snr: float) -> FadingParams:
    return FadingParams(k, 1.0, INF, avg_snr)


def shadowed_rician(k: float, m: float, avg_snr: float) -> FadingParams:
    return FadingParams(k, 1.0, m, avg_snr)


@dataclass(frozen=True)
class HopCoefficients:
    """
    Series coefficients of one hop's SNR density.

    The density is sum_e c1 * term_weights[e] * snr^(shape_base + e - 1) * exp(-rate * snr),
    where term_weights are the 1F1 series terms at mixture_rate. Each term carries the mass
    exp(log_masses[e]) and the retained masses are renormalised to sum to one.

    Parameters:
        c1 (LogNum): Leading constant of the density.
        rate (float): Exponential rate shape_base * (1 + kappa) / avg_snr.
        shape_base (float): Antenna-scaled cluster count.
        mixture_rate (float): 1F1 argument scale, zero iff kappa is zero.
        term_weights (LogNum): 1F1 terms for e = 0, 1, ... (array valued).
        shadowing (float): Antenna-scaled shadowing severity used by the series.
        log_masses (np.ndarray): Log probability mass of each gamma component.
        tail_mass (float): Mass discarded by truncation before renormalising.
        surrogate (bool): Whether m = INF was replaced by the surrogate.
        warnings (Tuple[str, ...]): Soft conditions met while building.
    """

    c1: LogNum
    rate: float
    shape_base: float
    mixture_rate: float
    term_weights: LogNum
    shadowing: float
    log_masses: np.ndarray
    tail_mass: float = 0.0
    surrogate: bool = False
    warnings: Tuple[str, ...] = ()

    @property
    def terms_used(self) -> int:
        return int(self.log_masses.size)

    @property
    def shapes(self) -> np.ndarray:
        return self.shape_base + np.arange(self.terms_used, dtype=float)

    @property
    def masses(self) -> np.ndarray:
        return np.exp(self.log_masses)

    @property
    def log_weights(self) -> np.ndarray:
        """Logs of the full density coefficients c1 * term_weights[e]."""
        return self.c1.log_magnitude + np.asarray(self.term_weights.log_magnitude, dtype=float)

    @property
    def integer_shape(self) -> bool:
        return abs(self.shape_base - round(self.shape_base)) < _INTEGER_TOL


def hop_coefficients(p: FadingParams, antennas: int = 1, trunc: Optional[SeriesConfig] = None) -> HopCoefficients:
    """
    Build the series coefficients of one hop, scaling mu and m by the antenna count.

    Parameters:
        p (FadingParams): Link parameters.
        antennas (int): Number of i.i.d. receive branches folded into the shape, >= 1.
        trunc (Optional[SeriesConfig]): Truncation settings.
    Returns:
        HopCoefficients: Immutable coefficient set.
    Raises:
        DomainError: If antennas < 1.
    """
    trunc = trunc or SeriesConfig()
    if int(antennas) != antennas or antennas < 1:
        raise DomainError(f"antennas must be a positive integer, got {antennas}")

    warnings = []
    surrogate = p.unshadowed and p.kappa > 0.0
    base_m = trunc.surrogate_m if p.unshadowed else p.m
    if surrogate:
        message = f"m = inf replaced by surrogate m = {trunc.surrogate_m:g} on the series path"
        warnings.append(message)
        logger.info(message)

    mu = antennas * p.mu
    m = antennas * base_m
    rate = mu * (1.0 + p.kappa) / p.avg_snr
    mixture_rate = mu * mu * p.kappa * (1.0 + p.kappa) / ((mu * p.kappa + m) * p.avg_snr)

    log_c1 = (
        mu * math.log(mu)
        + m * math.log(m)
        + mu * math.log1p(p.kappa)
        - float(special.gammaln(mu))
        - mu * math.log(p.avg_snr)
        - m * math.log(mu * p.kappa + m)
    )

    if p.kappa == 0.0:
        log_masses = np.zeros(1)
        term_weights = LogNum(np.zeros(1), np.ones(1))
        tail = 0.0
    else:
        # mixture masses are negative binomial with success ratio rho
        rho = mu * p.kappa / (mu * p.kappa + m)
        index = np.arange(trunc.max_depth, dtype=float)
        log_masses = (
            m * math.log1p(-rho)
            + special.gammaln(m + index)
            - special.gammaln(m)
            - special.gammaln(index + 1.0)
            + index * math.log(rho)
        )
        length, pruned = truncation_length(log_masses, trunc)
        log_masses = log_masses[:length]
        tail = float(special.betainc(length, m, rho))
        if not pruned and tail > trunc.prune:
            message = f"hop series capped at max_depth={trunc.max_depth}, discarded mass {tail:.3g}"
            warnings.append(message)
            logger.warning(message)
        series = kummer_1f1_series(m, mu, mixture_rate, SeriesConfig(depth=length, max_depth=length, prune=0.0))
        term_weights = series.terms

        log_total, _ = log_sum(log_masses)
        log_masses = log_masses - log_total
        log_c1 -= log_total
        logger.debug("hop series kept %d terms (rho=%.4g, tail=%.3g)", length, rho, tail)

    return HopCoefficients(
        c1=LogNum(log_c1, 1.0),
        rate=rate,
        shape_base=mu,
        mixture_rate=mixture_rate,
        term_weights=term_weights,
        shadowing=m,
        log_masses=np.asarray(log_masses, dtype=float),
        tail_mass=tail,
        surrogate=surrogate,
        warnings=tuple(warnings),
    )


def hop_pdf(c: HopCoefficients, snr):
    """
    Density of the hop SNR.

    Parameters:
        c (HopCoefficients): Hop coefficients.
        snr (float | np.ndarray): SNR value(s), >= 0.
    Returns:
        float | np.ndarray: Density value(s).
    Raises:
        DomainError: If any snr is negative.
    """
    x = _check_snr(snr)
    shapes = c.shapes
    log_terms = c.log_weights + special.xlogy(shapes - 1.0, x[..., None]) - c.rate * x[..., None]
    with np.errstate(divide="ignore"):
        log_pdf = special.logsumexp(log_terms, axis=-1)
    return _unwrap_like(np.exp(log_pdf), snr)


def hop_ccdf(c: HopCoefficients, snr):
    """
    Complementary CDF Pr(SNR > snr) as a mixture of regularised upper incomplete gammas.

    Parameters:
        c (HopCoefficients): Hop coefficients.
        snr (float | np.ndarray): SNR value(s), >= 0.
    Returns:
        float | np.ndarray: Probability in [0, 1].
    Raises:
        DomainError: If any snr is negative.
    """
    x = _check_snr(snr)
    tails = special.gammaincc(c.shapes, c.rate * x[..., None])
    return _unwrap_like(np.clip(tails @ c.masses, 0.0, 1.0), snr)


def hop_cdf(c: HopCoefficients, snr):
    """
    CDF Pr(SNR <= snr) as a mixture of regularised lower incomplete gammas.

    Parameters:
        c (HopCoefficients): Hop coefficients.
        snr (float | np.ndarray): SNR value(s), >= 0.
    Returns:
        float | np.ndarray: Probability in [0, 1].
    Raises:
        DomainError: If any snr is negative.
    """
    x = _check_snr(snr)
    heads = special.gammainc(c.shapes, c.rate * x[..., None])
    return _unwrap_like(np.clip(heads @ c.masses, 0.0, 1.0), snr)


def hop_log_ccdf(c: HopCoefficients, snr: float) -> float:
    """
    Natural log of the hop CCDF for a single SNR, usable deep in the tail.

    Parameters:
        c (HopCoefficients): Hop coefficients.
        snr (float): SNR value, >= 0.
    Returns:
        float: ln Pr(SNR > snr).
    Raises:
        DomainError: If snr is negative.
    """
    if not snr >= 0.0:
        raise DomainError(f"snr must be >= 0, got {snr}")
    logs = [
        log_mass + upper_inc_gamma(shape, c.rate * snr).log_magnitude - float(special.gammaln(shape))
        for log_mass, shape in zip(c.log_masses, c.shapes)
    ]
    total, _ = log_sum(np.asarray(logs))
    return min(float(total), 0.0)


def hop_mean(c: HopCoefficients) -> float:
    """
    Mean SNR of the retained mixture, equal to avg_snr up to the truncated mass.

    Parameters:
        c (HopCoefficients): Hop coefficients.
    Returns:
        float: Mean SNR.
    Raises:
        None
    """
    return float(np.dot(c.masses, c.shapes) / c.rate)


class SurvivalPolynomial(NamedTuple):
    """CCDF of an integer-shape hop as exp(-rate * x) * sum_k exp(log_coeffs[k]) * x^k."""

    rate: float
    log_coeffs: np.ndarray
    signs: np.ndarray


def hop_survival_polynomial(c: HopCoefficients, prune: float = 0.0) -> SurvivalPolynomial:
    """
    Expand the hop CCDF into an exponential times a polynomial.

    Applies Gamma(n, x) = (n - 1)! e^{-x} sum_{k<n} x^k / k! to every gamma component, so
    the coefficient of x^k is rate^k / k! times the mass of the components with n > k.

    Parameters:
        c (HopCoefficients): Hop coefficients with an integer shape_base.
        prune (float): Coefficients whose component mass falls below this are dropped.
    Returns:
        SurvivalPolynomial: Rate and log-domain coefficients (all positive).
    Raises:
        ShapeIntegralityError: If shape_base is not an integer.
    """
    if not c.integer_shape:
        raise ShapeIntegralityError(
            f"closed form needs an integer antenna-scaled mu, got {c.shape_base:g}; use method='quadrature'"
        )
    base = int(round(c.shape_base))
    count = base + c.terms_used - 1
    # mass of components e >= k - base + 1, a reverse cumulative sum
    reverse = np.logaddexp.accumulate(c.log_masses[::-1])[::-1]
    k = np.arange(count, dtype=float)
    first_component = np.clip(np.arange(count) - base + 1, 0, None)
    log_tail = reverse[first_component]
    if prune > 0.0:
        # log_tail is nonincreasing, so the kept coefficients form a prefix
        kept = max(1, int(np.count_nonzero(log_tail >= math.log(prune))))
        k, log_tail = k[:kept], log_tail[:kept]
    log_coeffs = k * math.log(c.rate) - special.gammaln(k + 1.0) + log_tail
    return SurvivalPolynomial(c.rate, np.asarray(log_coeffs, dtype=float), np.ones(k.size))


def _check_snr(snr) -> np.ndarray:
    x = np.asarray(snr, dtype=float)
    if np.any(~(x >= 0.0)):
        raise DomainError(f"snr must be >= 0, got {snr!r}")
    return x


def _unwrap_like(values: np.ndarray, like):
    return float(values) if np.ndim(like) == 0 else values
