"""
Monte-Carlo oracle for the secrecy metrics.

Trials run in fixed-size blocks. Block b draws from its own Philox stream keyed by
(seed, b), so estimates depend only on the plan and never on the worker count.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import partial
from typing import TYPE_CHECKING, Callable, List, Optional, Tuple

import numpy as np
from scipy import stats

from lib.analysis.channel import FadingParams, HopCoefficients, hop_cdf, hop_coefficients, hop_log_ccdf
from lib.config import DefaultConfig
from lib.errors import ConfigError, DomainError

if TYPE_CHECKING:
    from lib.auto_run.scenario import NetworkConfig

logger = logging.getLogger(__name__)

MODES = ("analysis_consistent", "physical")
HOPS = ("sp", "pq", "pw")
_INTEGER_TOL = 1e-9


@dataclass(frozen=True)
class SimPlan:
    """
    What to simulate and how.

    Parameters:
        trials (int): Number of independent trials, >= 1.
        seed (int): Root seed of every block stream.
        mode (str): "analysis_consistent" draws every best-relay SNR independently;
            "physical" shares the source-to-relay draws within a trial.
        net (NetworkConfig): Network to simulate.
        block_size (int): Trials per block.
    """

    trials: int
    seed: int
    mode: str
    net: "NetworkConfig"
    block_size: int = DefaultConfig.MC_BLOCK_SIZE

    def __post_init__(self) -> None:
        if int(self.trials) != self.trials or self.trials < 1:
            raise ConfigError(f"must be a positive integer, got {self.trials}", "simulation.trials")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ConfigError(f"must be an integer in [0, 2^64), got {self.seed}", "simulation.seed")
        if self.mode not in MODES:
            raise ConfigError(f"must be one of {', '.join(MODES)}, got {self.mode!r}", "simulation.mode")
        if int(self.block_size) != self.block_size or self.block_size < 1:
            raise ConfigError(f"must be a positive integer, got {self.block_size}", "simulation.block_size")

    @property
    def blocks(self) -> List[Tuple[int, int]]:
        starts = range(0, self.trials, self.block_size)
        return [(index, min(self.block_size, self.trials - start)) for index, start in enumerate(starts)]


@dataclass(frozen=True)
class SimEstimate:
    """Monte-Carlo estimates; esmc_positive is the mean of max(C, 0) over the same trials."""

    pnsmc: float
    sopm: float
    esmc: float
    esmc_positive: float
    stderr: Tuple[float, float, float]
    trials: int
    mode: str
    warnings: Tuple[str, ...] = ()


def block_rng(seed: int, block: int) -> np.random.Generator:
    """
    Random stream of one trial block.

    Parameters:
        seed (int): Root seed of the plan.
        block (int): Block index.
    Returns:
        np.random.Generator: Philox generator keyed by (seed, block).
    Raises:
        None
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, block])))


def sample_kappa_mu_shadowed(p: FadingParams, antennas: int, rng: np.random.Generator, size=None):
    """
    Draw kappa-mu shadowed SNRs with antenna-scaled shape (kappa, mu G, m G, avg_snr).

    The dominant power is a unit-mean Gamma(m G) shadow times avg_snr kappa / (1 + kappa);
    the SNR is a scaled noncentral chi-square with 2 mu G degrees of freedom carrying it.
    Non-integer 2 mu G falls back to inverting a CDF by bisection: the exact noncentral
    chi-square law when m = INF, the series CDF otherwise.

    Parameters:
        p (FadingParams): Link parameters.
        antennas (int): Antenna count G, >= 1.
        rng (np.random.Generator): Random source.
        size (Optional[int | tuple]): Output shape, a single draw when None.
    Returns:
        float | np.ndarray: SNR draw(s).
    Raises:
        DomainError: If antennas < 1.
    """
    if int(antennas) != antennas or antennas < 1:
        raise DomainError(f"antennas must be a positive integer, got {antennas}")
    dof = 2.0 * p.mu * antennas
    sigma2 = p.avg_snr / (dof * (1.0 + p.kappa))
    if abs(dof - round(dof)) > _INTEGER_TOL:
        if p.unshadowed and p.kappa > 0.0:
            law = stats.ncx2(dof, dof * p.kappa, scale=sigma2)
            return _inverse_cdf_draws(law.cdf, law.logsf, p.avg_snr, rng, size)
        c = hop_coefficients(p, antennas)
        return _inverse_cdf_draws(partial(hop_cdf, c), partial(hop_log_ccdf, c), p.avg_snr, rng, size)

    if p.kappa == 0.0:
        return sigma2 * rng.chisquare(round(dof), size)
    if p.unshadowed:
        shadow = np.ones(size) if size is not None else 1.0
    else:
        shape = p.m * antennas
        shadow = rng.gamma(shape, 1.0 / shape, size)
    noncentrality = p.avg_snr * p.kappa * shadow / ((1.0 + p.kappa) * sigma2)
    return sigma2 * rng.noncentral_chisquare(round(dof), noncentrality, size)


def _inverse_cdf_draws(
    cdf: Callable[[np.ndarray], np.ndarray],
    log_ccdf: Callable[[float], float],
    start: float,
    rng: np.random.Generator,
    size,
):
    """
    Inverse-CDF draws by vectorised bisection.

    The shared upper bracket is found on the log tail, so uniforms close to one
    never depend on a CDF that has rounded to 1.

    Parameters:
        cdf (Callable[[np.ndarray], np.ndarray]): Vectorised CDF.
        log_ccdf (Callable[[float], float]): Natural log of the CCDF at one point.
        start (float): First upper bracket candidate, > 0.
        rng (np.random.Generator): Random source.
        size (Optional[int | tuple]): Output shape, a single draw when None.
    Returns:
        float | np.ndarray: Draw(s).
    Raises:
        None
    """
    targets = np.asarray(rng.random(size), dtype=float)
    flat = targets.reshape(-1)
    target_tail = math.log1p(-float(np.max(flat)))
    high_value = start
    while log_ccdf(high_value) > target_tail:
        high_value *= 2.0
    low = np.zeros_like(flat)
    high = np.full_like(flat, high_value)
    while np.any(high - low > DefaultConfig.INVERSE_CDF_TOL * np.maximum(1.0, high)):
        middle = 0.5 * (low + high)
        below = cdf(middle) < flat
        low = np.where(below, middle, low)
        high = np.where(below, high, middle)
    draws = (0.5 * (low + high)).reshape(targets.shape)
    return float(draws) if size is None else draws


def _best_relay(first: np.ndarray, second: np.ndarray) -> np.ndarray:
    return np.max(np.minimum(first, second), axis=-1)


def _block_capacities(plan: SimPlan, block: int, count: int) -> np.ndarray:
    net = plan.net
    rng = block_rng(plan.seed, block)
    if plan.mode == "physical":
        shared = sample_kappa_mu_shadowed(net.hop_sp, 1, rng, (count, 1, net.relays))
        first_rx, first_eve = shared, shared
    else:
        first_rx = sample_kappa_mu_shadowed(net.hop_sp, 1, rng, (count, net.receivers, net.relays))
        first_eve = sample_kappa_mu_shadowed(net.hop_sp, 1, rng, (count, net.eavesdroppers, net.relays))
    second_rx = sample_kappa_mu_shadowed(net.hop_pq, net.antennas_rx, rng, (count, net.receivers, net.relays))
    second_eve = sample_kappa_mu_shadowed(net.hop_pw, net.antennas_eve, rng, (count, net.eavesdroppers, net.relays))
    weakest = np.min(_best_relay(first_rx, second_rx), axis=-1)
    strongest = np.max(_best_relay(first_eve, second_eve), axis=-1)
    return (np.log1p(weakest) - np.log1p(strongest)) / math.log(2.0)


def _block_summary(plan: SimPlan, target_rate: float, block: Tuple[int, int]) -> Tuple[int, int, int, float, float, float]:
    index, count = block
    capacity = _block_capacities(plan, index, count)
    mean = float(np.mean(capacity))
    squares = float(np.sum((capacity - mean) ** 2))
    return (
        count,
        int(np.count_nonzero(capacity > 0.0)),
        int(np.count_nonzero(capacity < target_rate)),
        mean,
        squares,
        float(np.sum(np.maximum(capacity, 0.0))),
    )


def simulate_metrics(plan: SimPlan, target_rate: float, workers: Optional[int] = None) -> SimEstimate:
    """
    Estimate PNSMC, SOPM and ESMC from independent channel realisations.

    Parameters:
        plan (SimPlan): Simulation plan.
        target_rate (float): Target secrecy rate in bits/s/Hz, > 0.
        workers (Optional[int]): Threads used for blocks, DefaultConfig.WORKERS when omitted.
    Returns:
        SimEstimate: Estimates, standard errors and warnings.
    Raises:
        DomainError: If target_rate is not positive.
    """
    if not target_rate > 0.0:
        raise DomainError(f"target_rate must be > 0, got {target_rate}")
    workers = workers or DefaultConfig.WORKERS
    blocks = plan.blocks
    logger.info("simulating %d trials in %d blocks (%s mode)", plan.trials, len(blocks), plan.mode)
    summarise = partial(_block_summary, plan, target_rate)
    if workers == 1:
        summaries = [summarise(item) for item in blocks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            summaries = list(pool.map(summarise, blocks))

    # block order combination keeps the result independent of scheduling
    total, positive, outage = 0, 0, 0
    mean, squares = 0.0, 0.0
    for count, block_positive, block_outage, block_mean, block_squares, _ in summaries:
        delta = block_mean - mean
        merged = total + count
        mean += delta * count / merged
        squares += block_squares + delta * delta * total * count / merged
        total, positive, outage = merged, positive + block_positive, outage + block_outage
    positive_part = math.fsum(summary[5] for summary in summaries) / total

    pnsmc = positive / total
    sopm = outage / total
    variance = squares / (total - 1) if total > 1 else 0.0
    stderr = (
        math.sqrt(pnsmc * (1.0 - pnsmc) / total),
        math.sqrt(sopm * (1.0 - sopm) / total),
        math.sqrt(variance / total),
    )
    warnings = []
    for name, value in (("pnsmc", pnsmc), ("sopm", sopm)):
        if value in (0.0, 1.0):
            message = f"{name} estimate {value:g} from {total} trials has a degenerate confidence interval"
            warnings.append(message)
            logger.warning(message)
    return SimEstimate(pnsmc, sopm, mean, positive_part, stderr, total, plan.mode, tuple(warnings))


def sample_hop(net: "NetworkConfig", hop: str, count: int, seed: int, block_size: int = DefaultConfig.MC_BLOCK_SIZE) -> np.ndarray:
    """
    Raw SNR draws of one hop, reproducible for a given seed.

    Parameters:
        net (NetworkConfig): Network holding the hop parameters.
        hop (str): "sp", "pq" or "pw".
        count (int): Number of draws, >= 1.
        seed (int): Root seed.
        block_size (int): Draws per stream block.
    Returns:
        np.ndarray: SNR draws.
    Raises:
        ConfigError: If hop is unknown or count < 1.
    """
    if hop not in HOPS:
        raise ConfigError(f"must be one of {', '.join(HOPS)}, got {hop!r}", "hop")
    if count < 1:
        raise ConfigError(f"must be >= 1, got {count}", "count")
    params, antennas = {
        "sp": (net.hop_sp, 1),
        "pq": (net.hop_pq, net.antennas_rx),
        "pw": (net.hop_pw, net.antennas_eve),
    }[hop]
    parts = [
        sample_kappa_mu_shadowed(params, antennas, block_rng(seed, index), min(block_size, count - start))
        for index, start in enumerate(range(0, count, block_size))
    ]
    return np.concatenate(parts)


def ks_distance(samples: np.ndarray, coeffs: HopCoefficients) -> float:
    """Kolmogorov-Smirnov distance between samples and the analytical hop CDF."""
    return float(stats.kstest(np.asarray(samples, dtype=float), lambda x: hop_cdf(coeffs, x)).statistic)
