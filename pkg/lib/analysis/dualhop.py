"""
Dual-hop and best-relay SNR distributions.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional

import numpy as np

from lib.analysis.channel import HopCoefficients, hop_ccdf, hop_cdf, hop_coefficients, hop_pdf
from lib.analysis.specfun import SeriesConfig
from lib.errors import DomainError

if TYPE_CHECKING:
    from lib.auto_run.scenario import NetworkConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DualHopDist:
    """
    Two independent hops in series and the number of relays selected over.

    Parameters:
        first_hop (HopCoefficients): Source to relay hop.
        second_hop (HopCoefficients): Relay to destination hop.
        relays (int): Number of relays P, >= 1.
    """

    first_hop: HopCoefficients
    second_hop: HopCoefficients
    relays: int = 1

    def __post_init__(self) -> None:
        if int(self.relays) != self.relays or self.relays < 1:
            raise DomainError(f"relays must be a positive integer, got {self.relays}")

    @property
    def warnings(self):
        return self.first_hop.warnings + self.second_hop.warnings


def receiver_dist(net: "NetworkConfig", trunc: Optional[SeriesConfig] = None) -> DualHopDist:
    """Best-relay law seen by one legitimate receiver."""
    return DualHopDist(
        hop_coefficients(net.hop_sp, 1, trunc),
        hop_coefficients(net.hop_pq, net.antennas_rx, trunc),
        net.relays,
    )


def eavesdropper_dist(net: "NetworkConfig", trunc: Optional[SeriesConfig] = None) -> DualHopDist:
    """Best-relay law seen by one eavesdropper, which selects its own best relay."""
    return DualHopDist(
        hop_coefficients(net.hop_sp, 1, trunc),
        hop_coefficients(net.hop_pw, net.antennas_eve, trunc),
        net.relays,
    )


def dualhop_ccdf(d: DualHopDist, snr):
    return hop_ccdf(d.first_hop, snr) * hop_ccdf(d.second_hop, snr)


def dualhop_cdf(d: DualHopDist, snr):
    """
    CDF of min(first hop, second hop) for a single relay.

    Parameters:
        d (DualHopDist): Dual-hop distribution.
        snr (float | np.ndarray): SNR value(s), >= 0.
    Returns:
        float | np.ndarray: Probability in [0, 1].
    Raises:
        DomainError: If any snr is negative.
    """
    first = hop_cdf(d.first_hop, snr)
    second = hop_cdf(d.second_hop, snr)
    return np.clip(first + second - first * second, 0.0, 1.0)


def dualhop_pdf(d: DualHopDist, snr):
    return hop_pdf(d.first_hop, snr) * hop_ccdf(d.second_hop, snr) + hop_pdf(d.second_hop, snr) * hop_ccdf(
        d.first_hop, snr
    )


def bestrelay_cdf(d: DualHopDist, snr):
    """
    CDF of the best of P i.i.d. relay branches, the single-relay CDF raised to P.

    Parameters:
        d (DualHopDist): Dual-hop distribution.
        snr (float | np.ndarray): SNR value(s), >= 0.
    Returns:
        float | np.ndarray: Probability in [0, 1].
    Raises:
        DomainError: If any snr is negative.
    """
    return dualhop_cdf(d, snr) ** d.relays


def bestrelay_ccdf(d: DualHopDist, snr):
    """
    Survival of the best-relay SNR, 1 - (1 - S)^P with S the dual-hop survival.

    Parameters:
        d (DualHopDist): Dual-hop distribution.
        snr (float | np.ndarray): SNR value(s), >= 0.
    Returns:
        float | np.ndarray: Probability in [0, 1].
    Raises:
        DomainError: If any snr is negative.
    """
    survival = dualhop_ccdf(d, snr)
    with np.errstate(divide="ignore"):
        return np.clip(-np.expm1(d.relays * np.log1p(-survival)), 0.0, 1.0)


def bestrelay_pdf(d: DualHopDist, snr):
    """
    Density of the best-relay SNR, P f F^(P - 1).

    Parameters:
        d (DualHopDist): Dual-hop distribution.
        snr (float | np.ndarray): SNR value(s), >= 0.
    Returns:
        float | np.ndarray: Density value(s).
    Raises:
        DomainError: If any snr is negative.
    """
    return d.relays * dualhop_pdf(d, snr) * dualhop_cdf(d, snr) ** (d.relays - 1)
