"""
Secrecy metrics of the multicast network: PNSMC, SOPM and ESMC.

Every metric is available through three independent methods: the expanded closed form,
adaptive quadrature over the pointwise densities and the Monte-Carlo oracle.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import TYPE_CHECKING, List, Optional, Sequence, Tuple

from lib.analysis.channel import hop_mean
from lib.analysis.dualhop import DualHopDist, bestrelay_ccdf, eavesdropper_dist, receiver_dist
from lib.analysis.extremes import (
    ExpoPolySum,
    max_snr_cdf_direct,
    max_snr_pdf_direct,
    max_snr_survival,
    min_snr_pdf_direct,
    min_snr_survival,
)
from lib.analysis.quadrature import integrate_semi_infinite
from lib.analysis.specfun import SeriesConfig
from lib.config import DefaultConfig
from lib.errors import ConfigError, DomainError
from lib.simulation.montecarlo import SimPlan, simulate_metrics

if TYPE_CHECKING:
    from lib.auto_run.scenario import NetworkConfig

logger = logging.getLogger(__name__)

METHODS = ("closed_form", "quadrature", "monte_carlo")
METRICS = ("pnsmc", "sopm", "esmc")


@dataclass(frozen=True)
class MetricResult:
    """
    One metric value and how it was obtained.

    Parameters:
        value (float): Metric value (probability, or bits/s/Hz for ESMC).
        method (str): "closed_form", "quadrature" or "monte_carlo".
        terms_used (int): Expansion terms on the closed-form path, integrand evaluations on
            the quadrature path, trials on the Monte-Carlo path.
        tail_estimate (float): Discarded-series bound, quadrature error estimate or standard error.
        warnings (Tuple[str, ...]): Soft conditions met along the way.
        positive_part (Optional[float]): Mean of max(C, 0) over the simulated trials, set on
            Monte-Carlo ESMC results only.
    """

    value: float
    method: str
    terms_used: int = 0
    tail_estimate: float = 0.0
    warnings: Tuple[str, ...] = ()
    positive_part: Optional[float] = None


@dataclass(frozen=True)
class SecrecyExpansion:
    """Expanded extreme-value laws shared by the closed-form metrics of one network."""

    min_survival: ExpoPolySum
    max_survival: ExpoPolySum
    max_pdf: ExpoPolySum
    tail_estimate: float
    warnings: Tuple[str, ...]

    @property
    def terms_used(self) -> int:
        return self.min_survival.term_count + self.max_survival.term_count


@lru_cache(maxsize=32)
def secrecy_expansion(net: "NetworkConfig", trunc: SeriesConfig) -> SecrecyExpansion:
    """
    Expand the weakest-receiver survival and strongest-eavesdropper law of a network.

    Parameters:
        net (NetworkConfig): Network.
        trunc (SeriesConfig): Truncation and expansion settings.
    Returns:
        SecrecyExpansion: Cached expansions with their truncation bound.
    Raises:
        ShapeIntegralityError: If an antenna-scaled hop shape is not an integer.
        BudgetExceededError: If a multinomial expansion is too large.
    """
    rx = receiver_dist(net, trunc)
    eve = eavesdropper_dist(net, trunc)
    min_survival = min_snr_survival(rx, net.receivers, trunc)
    max_survival = max_snr_survival(eve, net.eavesdroppers, trunc)
    # total-variation bound of the renormalised hop truncations over every branch
    tail = 2.0 * net.relays * (
        net.receivers * (rx.first_hop.tail_mass + rx.second_hop.tail_mass)
        + net.eavesdroppers * (eve.first_hop.tail_mass + eve.second_hop.tail_mass)
    )
    terms = min_survival.term_count + max_survival.term_count
    tail += terms * trunc.prune
    warnings = tuple(dict.fromkeys(rx.warnings + eve.warnings))
    logger.debug("closed-form expansion: %d terms, tail bound %.3g", terms, tail)
    return SecrecyExpansion(min_survival, max_survival, -max_survival.derivative(), tail, warnings)


def _check_method(method: str) -> None:
    if method not in METHODS:
        raise ConfigError(f"must be one of {', '.join(METHODS)}, got {method!r}", "method")


def _check_rate(target_rate: float) -> None:
    if not (target_rate > 0.0 and math.isfinite(target_rate)):
        raise DomainError(f"target_rate must be finite and > 0, got {target_rate}")


def _clamped(value: float, method: str, terms: int, tail: float, warnings: Sequence[str], name: str) -> MetricResult:
    warnings = list(warnings)
    if value < -DefaultConfig.CLAMP_WARN_MARGIN or value > 1.0 + DefaultConfig.CLAMP_WARN_MARGIN:
        message = f"{name} raw value {value:.9g} clamped to [0, 1]"
        warnings.append(message)
        logger.warning(message)
    return MetricResult(min(max(value, 0.0), 1.0), method, terms, tail, tuple(warnings))


def _scale(d: DualHopDist) -> float:
    return min(hop_mean(d.first_hop), hop_mean(d.second_hop))


def _plan(net: "NetworkConfig", plan: Optional[SimPlan]) -> SimPlan:
    return plan or SimPlan(DefaultConfig.MC_TRIALS, DefaultConfig.MC_SEED, DefaultConfig.MC_MODE, net)


@lru_cache(maxsize=16)
def _simulated(plan: SimPlan, target_rate: float, workers: Optional[int] = None):
    return simulate_metrics(plan, target_rate, workers)


def _min_cdf(d: DualHopDist, receivers: int, x: float) -> float:
    survival = float(bestrelay_ccdf(d, x))
    if survival <= 0.0:
        return 1.0
    return -math.expm1(receivers * math.log(survival))


def sopm(
    net: "NetworkConfig",
    target_rate: float,
    trunc: Optional[SeriesConfig] = None,
    method: str = DefaultConfig.DEFAULT_METHOD,
    plan: Optional[SimPlan] = None,
    workers: Optional[int] = None,
) -> MetricResult:
    """
    Secure outage probability for multicasting, Pr(C < target_rate).

    With q = 2^rate and p = q - 1, outage means min SNR < q * max SNR + p, so the
    metric is the integral of f_max(y) F_min(q y + p).

    Parameters:
        net (NetworkConfig): Network.
        target_rate (float): Target secrecy rate in bits/s/Hz, > 0.
        trunc (Optional[SeriesConfig]): Series settings for the closed form.
        method (str): "closed_form", "quadrature" or "monte_carlo".
        plan (Optional[SimPlan]): Monte-Carlo plan, defaults from DefaultConfig.
        workers (Optional[int]): Monte-Carlo block threads, DefaultConfig.WORKERS when omitted.
    Returns:
        MetricResult: Probability in [0, 1].
    Raises:
        DomainError: If target_rate is not positive.
        ShapeIntegralityError: On the closed form with non-integer shapes.
        ConvergenceError: If quadrature does not converge.
    """
    _check_method(method)
    _check_rate(target_rate)
    trunc = trunc or SeriesConfig()
    q = 2.0**target_rate
    p = q - 1.0

    if method == "closed_form":
        expansion = secrecy_expansion(net, trunc)
        secure = expansion.max_pdf.inner_integral(expansion.min_survival.compose_affine(q, p))
        return _clamped(1.0 - secure, method, expansion.terms_used, expansion.tail_estimate, expansion.warnings, "sopm")

    if method == "quadrature":
        rx, eve = receiver_dist(net, trunc), eavesdropper_dist(net, trunc)
        result = integrate_semi_infinite(
            lambda y: max_snr_pdf_direct(eve, net.eavesdroppers, y) * _min_cdf(rx, net.receivers, q * y + p),
            _scale(eve),
            "sopm",
        )
        return _clamped(result.value, method, result.evaluations, result.abserr, result.warnings, "sopm")

    estimate = _simulated(_plan(net, plan), target_rate, workers)
    return MetricResult(estimate.sopm, method, estimate.trials, estimate.stderr[1], estimate.warnings)


def pnsmc(
    net: "NetworkConfig",
    trunc: Optional[SeriesConfig] = None,
    method: str = DefaultConfig.DEFAULT_METHOD,
    plan: Optional[SimPlan] = None,
    workers: Optional[int] = None,
) -> MetricResult:
    """
    Probability of non-zero secrecy multicast capacity, Pr(min SNR > max SNR).

    Parameters:
        net (NetworkConfig): Network.
        trunc (Optional[SeriesConfig]): Series settings for the closed form.
        method (str): "closed_form", "quadrature" or "monte_carlo".
        plan (Optional[SimPlan]): Monte-Carlo plan, defaults from DefaultConfig.
        workers (Optional[int]): Monte-Carlo block threads, DefaultConfig.WORKERS when omitted.
    Returns:
        MetricResult: Probability in [0, 1].
    Raises:
        ShapeIntegralityError: On the closed form with non-integer shapes.
        ConvergenceError: If quadrature does not converge.
    """
    _check_method(method)
    trunc = trunc or SeriesConfig()

    if method == "closed_form":
        expansion = secrecy_expansion(net, trunc)
        value = expansion.max_pdf.inner_integral(expansion.min_survival)
        return _clamped(value, method, expansion.terms_used, expansion.tail_estimate, expansion.warnings, "pnsmc")

    if method == "quadrature":
        rx, eve = receiver_dist(net, trunc), eavesdropper_dist(net, trunc)
        result = integrate_semi_infinite(
            lambda x: min_snr_pdf_direct(rx, net.receivers, x) * max_snr_cdf_direct(eve, net.eavesdroppers, x),
            _scale(rx),
            "pnsmc",
        )
        return _clamped(result.value, method, result.evaluations, result.abserr, result.warnings, "pnsmc")

    estimate = _simulated(_plan(net, plan), 1.0, workers)
    return MetricResult(estimate.pnsmc, method, estimate.trials, estimate.stderr[0], estimate.warnings)


def esmc(
    net: "NetworkConfig",
    trunc: Optional[SeriesConfig] = None,
    method: str = DefaultConfig.DEFAULT_METHOD,
    plan: Optional[SimPlan] = None,
    workers: Optional[int] = None,
) -> MetricResult:
    """
    Ergodic secrecy multicast capacity E[log2(1 + min SNR)] - E[log2(1 + max SNR)].

    The value is signed. The closed form integrates each survival function against
    1 / (1 + x); quadrature integrates the densities against log2(1 + x).

    Parameters:
        net (NetworkConfig): Network.
        trunc (Optional[SeriesConfig]): Series settings for the closed form.
        method (str): "closed_form", "quadrature" or "monte_carlo".
        plan (Optional[SimPlan]): Monte-Carlo plan, defaults from DefaultConfig.
        workers (Optional[int]): Monte-Carlo block threads, DefaultConfig.WORKERS when omitted.
    Returns:
        MetricResult: Capacity in bits/s/Hz.
    Raises:
        ShapeIntegralityError: On the closed form with non-integer shapes.
        ConvergenceError: If quadrature does not converge.
    """
    _check_method(method)
    trunc = trunc or SeriesConfig()

    if method == "closed_form":
        expansion = secrecy_expansion(net, trunc)
        nats = expansion.min_survival.log1p_integral() - expansion.max_survival.log1p_integral()
        return MetricResult(
            nats / math.log(2.0), method, expansion.terms_used, expansion.tail_estimate, expansion.warnings
        )

    if method == "quadrature":
        rx, eve = receiver_dist(net, trunc), eavesdropper_dist(net, trunc)
        legit = integrate_semi_infinite(
            lambda x: min_snr_pdf_direct(rx, net.receivers, x) * math.log2(1.0 + x), _scale(rx), "esmc receivers"
        )
        wiretap = integrate_semi_infinite(
            lambda x: max_snr_pdf_direct(eve, net.eavesdroppers, x) * math.log2(1.0 + x),
            _scale(eve),
            "esmc eavesdroppers",
        )
        return MetricResult(
            legit.value - wiretap.value,
            method,
            legit.evaluations + wiretap.evaluations,
            legit.abserr + wiretap.abserr,
            legit.warnings + wiretap.warnings,
        )

    estimate = _simulated(_plan(net, plan), 1.0, workers)
    return MetricResult(
        estimate.esmc, method, estimate.trials, estimate.stderr[2], estimate.warnings, estimate.esmc_positive
    )


def secrecy_rate_cdf(
    net: "NetworkConfig",
    rates: Sequence[float],
    trunc: Optional[SeriesConfig] = None,
    method: str = DefaultConfig.DEFAULT_METHOD,
    plan: Optional[SimPlan] = None,
    workers: Optional[int] = None,
) -> List[MetricResult]:
    """
    SOPM over several target rates, the CDF of the secrecy capacity at those rates.

    The closed-form expansion is built once and shared by every rate. Quadrature rebuilds the
    pointwise laws per rate and Monte-Carlo runs one simulation per rate.

    Parameters:
        net (NetworkConfig): Network.
        rates (Sequence[float]): Target secrecy rates, each > 0.
        trunc (Optional[SeriesConfig]): Series settings for the closed form.
        method (str): "closed_form", "quadrature" or "monte_carlo".
        plan (Optional[SimPlan]): Monte-Carlo plan, defaults from DefaultConfig.
        workers (Optional[int]): Monte-Carlo block threads, DefaultConfig.WORKERS when omitted.
    Returns:
        List[MetricResult]: One outage probability per rate, in input order.
    Raises:
        DomainError: If a rate is not positive.
    """
    return [sopm(net, rate, trunc, method, plan, workers) for rate in rates]


def evaluate_metric(
    metric: str,
    net: "NetworkConfig",
    target_rate: float,
    trunc: Optional[SeriesConfig] = None,
    method: str = DefaultConfig.DEFAULT_METHOD,
    plan: Optional[SimPlan] = None,
    workers: Optional[int] = None,
) -> MetricResult:
    """
    Dispatch one metric by name.

    Parameters:
        metric (str): "pnsmc", "sopm" or "esmc".
        net (NetworkConfig): Network.
        target_rate (float): Target secrecy rate, used by sopm only.
        trunc (Optional[SeriesConfig]): Series settings for the closed form.
        method (str): "closed_form", "quadrature" or "monte_carlo".
        plan (Optional[SimPlan]): Monte-Carlo plan.
        workers (Optional[int]): Monte-Carlo block threads.
    Returns:
        MetricResult: The metric value.
    Raises:
        ConfigError: If the metric or method is unknown.
    """
    if metric == "sopm":
        return sopm(net, target_rate, trunc, method, plan, workers)
    if metric == "pnsmc":
        return pnsmc(net, trunc, method, plan, workers)
    if metric == "esmc":
        return esmc(net, trunc, method, plan, workers)
    raise ConfigError(f"must be one of {', '.join(METRICS)}, got {metric!r}", "metric")
