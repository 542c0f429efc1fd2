"""
Adaptive quadrature over [0, inf) through the map x = scale * t / (1 - t).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

from scipy import integrate

from lib.config import DefaultConfig
from lib.errors import ConvergenceError, DomainError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class QuadResult:
    value: float
    abserr: float
    evaluations: int
    warnings: Tuple[str, ...] = ()


def integrate_semi_infinite(
    func: Callable[[float], float],
    scale: float = 1.0,
    label: str = "integral",
    abs_tol: Optional[float] = None,
    rel_tol: Optional[float] = None,
) -> QuadResult:
    """
    Integrate func over [0, inf).

    The half line is folded onto [0, 1) so the adaptive Gauss-Kronrod rule never samples
    the endpoints; scale should be a typical abscissa of the integrand.

    Parameters:
        func (Callable[[float], float]): Integrand, finite on (0, inf).
        scale (float): Abscissa mapped to t = 1/2, > 0.
        label (str): Name used in diagnostics.
        abs_tol (Optional[float]): Absolute tolerance, DefaultConfig.QUAD_ABS_TOL when omitted.
        rel_tol (Optional[float]): Relative tolerance, DefaultConfig.QUAD_REL_TOL when omitted.
    Returns:
        QuadResult: Value, error estimate, evaluation count and warnings.
    Raises:
        DomainError: If scale is not positive.
        ConvergenceError: If the error estimate exceeds the accepted tolerance.
    """
    if not (scale > 0.0 and math.isfinite(scale)):
        raise DomainError(f"quadrature scale must be finite and > 0, got {scale}")
    abs_tol = DefaultConfig.QUAD_ABS_TOL if abs_tol is None else abs_tol
    rel_tol = DefaultConfig.QUAD_REL_TOL if rel_tol is None else rel_tol

    def folded(t: float) -> float:
        if t >= 1.0:
            return 0.0
        gap = 1.0 - t
        return float(func(scale * t / gap)) * scale / (gap * gap)

    output = integrate.quad(folded, 0.0, 1.0, epsabs=abs_tol, epsrel=rel_tol, limit=DefaultConfig.QUAD_LIMIT, full_output=1)
    value, abserr, info = output[0], output[1], output[2]
    warnings = []
    if len(output) > 3:
        message = f"{label}: {output[3].strip().splitlines()[0]}"
        warnings.append(message)
        logger.warning(message)

    accepted = DefaultConfig.QUAD_ACCEPT_FACTOR * max(abs_tol, rel_tol * abs(value))
    if not math.isfinite(value) or abserr > accepted:
        raise ConvergenceError(f"{label} did not converge (error estimate {abserr:.3g})", (value, abserr))
    return QuadResult(value, abserr, int(info["neval"]), tuple(warnings))
