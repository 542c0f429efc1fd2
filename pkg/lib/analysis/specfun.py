"""
Special functions and log-domain kernels used by the analytical formulas.

Everything here is a pure function of its arguments. Coefficient products
(factorials, gamma ratios, powers of rates) are carried as ``LogNum`` so that
nothing overflows before the final accumulation.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np
from scipy import special

from lib.config import DefaultConfig
from lib.errors import ConfigError, ConvergenceError, DomainError

logger = logging.getLogger(__name__)

EULER_GAMMA = 0.5772156649015329
_TINY = 1e-300

ArrayLike = Union[float, np.ndarray]

EXPANSIONS = ("convolution", "multinomial")


def _unwrap(value):
    array = np.asarray(value)
    return float(array) if array.ndim == 0 else array


def log_sum(
    log_magnitudes: ArrayLike, signs: Optional[ArrayLike] = None, axis: Optional[int] = None
) -> Tuple[ArrayLike, ArrayLike]:
    """
    Sign-segregated log-sum-exp.

    Parameters:
        log_magnitudes (ArrayLike): Natural logs of the term magnitudes.
        signs (Optional[ArrayLike]): Term signs in {+1, -1, 0}; all +1 when omitted.
        axis (Optional[int]): Reduction axis, None reduces everything.
    Returns:
        Tuple[ArrayLike, ArrayLike]: Log magnitude and sign of the sum.
    Raises:
        None
    """
    logs = np.asarray(log_magnitudes, dtype=float)
    weights = np.ones_like(logs) if signs is None else np.broadcast_to(np.asarray(signs, dtype=float), logs.shape)
    if logs.size == 0:
        return -math.inf, 0.0

    weights = np.where(np.isneginf(logs), 0.0, np.sign(weights))
    logs = np.where(weights == 0.0, -np.inf, logs)
    with np.errstate(divide="ignore", invalid="ignore"):
        total, sign = special.logsumexp(logs, axis=axis, b=weights, return_sign=True)
    total = np.asarray(total, dtype=float)
    sign = np.asarray(sign, dtype=float)
    zero = (sign == 0.0) | np.isneginf(total) | np.isnan(total)
    total = np.where(zero, -np.inf, total)
    sign = np.where(zero, 0.0, sign)
    return _unwrap(total), _unwrap(sign)


@dataclass(frozen=True)
class LogNum:
    """
    Signed number stored as (natural log of magnitude, sign).

    Fields may hold scalars or equally shaped numpy arrays. A sign of 0 marks an
    exact zero, in which case the log magnitude is -inf.
    """

    log_magnitude: ArrayLike
    sign: ArrayLike = 1.0

    def __post_init__(self) -> None:
        logs = np.asarray(self.log_magnitude, dtype=float)
        signs = np.sign(np.broadcast_to(np.asarray(self.sign, dtype=float), logs.shape))
        zero = np.isneginf(logs) | (signs == 0.0)
        object.__setattr__(self, "log_magnitude", _unwrap(np.where(zero, -np.inf, logs)))
        object.__setattr__(self, "sign", _unwrap(np.where(zero, 0.0, signs)))

    @classmethod
    def from_value(cls, value: ArrayLike) -> "LogNum":
        values = np.asarray(value, dtype=float)
        with np.errstate(divide="ignore"):
            logs = np.log(np.abs(values))
        return cls(_unwrap(logs), _unwrap(np.sign(values)))

    @classmethod
    def zero(cls) -> "LogNum":
        return cls(-math.inf, 0.0)

    @property
    def value(self) -> ArrayLike:
        with np.errstate(over="ignore"):
            return _unwrap(np.asarray(self.sign) * np.exp(self.log_magnitude))

    @property
    def is_zero(self) -> bool:
        return bool(np.all(np.asarray(self.sign) == 0.0))

    def __float__(self) -> float:
        return float(self.value)

    def __neg__(self) -> "LogNum":
        return LogNum(self.log_magnitude, -np.asarray(self.sign))

    def __mul__(self, other) -> "LogNum":
        other = as_lognum(other)
        return LogNum(
            np.asarray(self.log_magnitude) + np.asarray(other.log_magnitude),
            np.asarray(self.sign) * np.asarray(other.sign),
        )

    __rmul__ = __mul__

    def __truediv__(self, other) -> "LogNum":
        other = as_lognum(other)
        if np.any(np.asarray(other.sign) == 0.0):
            raise DomainError("division by an exact zero LogNum")
        return LogNum(
            np.asarray(self.log_magnitude) - np.asarray(other.log_magnitude),
            np.asarray(self.sign) * np.asarray(other.sign),
        )

    def __pow__(self, exponent: int) -> "LogNum":
        if exponent == 0:
            return LogNum(np.zeros_like(np.asarray(self.log_magnitude, dtype=float)), 1.0)
        return LogNum(exponent * np.asarray(self.log_magnitude), np.asarray(self.sign) ** exponent)

    def __add__(self, other) -> "LogNum":
        other = as_lognum(other)
        logs = np.stack(np.broadcast_arrays(self.log_magnitude, other.log_magnitude))
        signs = np.stack(np.broadcast_arrays(self.sign, other.sign))
        total, sign = log_sum(logs, signs, axis=0)
        return LogNum(total, sign)

    __radd__ = __add__

    def __sub__(self, other) -> "LogNum":
        return self + (-as_lognum(other))

    def total(self) -> "LogNum":
        """Sum every element of an array-valued LogNum."""
        total, sign = log_sum(self.log_magnitude, self.sign)
        return LogNum(total, sign)


def as_lognum(value) -> LogNum:
    return value if isinstance(value, LogNum) else LogNum.from_value(value)


@dataclass(frozen=True)
class SeriesConfig:
    """
    Truncation and expansion controls shared by every series in the engine.

    depth is the minimum number of retained terms of an infinite index; terms
    beyond it are kept until their relative magnitude drops below prune, up to
    max_depth.
    """

    depth: int = DefaultConfig.SERIES_DEPTH
    prune: float = DefaultConfig.SERIES_PRUNE
    max_depth: int = DefaultConfig.SERIES_MAX_DEPTH
    expansion: str = DefaultConfig.EXPANSION
    composition_budget: int = DefaultConfig.COMPOSITION_BUDGET
    surrogate_m: float = DefaultConfig.SHADOWING_SURROGATE_M

    def __post_init__(self) -> None:
        if int(self.depth) != self.depth or self.depth < 1:
            raise ConfigError("must be an integer >= 1", "series.depth")
        if int(self.max_depth) != self.max_depth or self.max_depth < self.depth:
            raise ConfigError("must be an integer >= depth", "series.max_depth")
        if not 0.0 <= self.prune < 1.0:
            raise ConfigError("must lie in [0, 1)", "series.prune")
        if self.expansion not in EXPANSIONS:
            raise ConfigError(f"must be one of {', '.join(EXPANSIONS)}", "series.expansion")
        if int(self.composition_budget) != self.composition_budget or self.composition_budget < 1:
            raise ConfigError("must be a positive integer", "series.composition_budget")
        if not (self.surrogate_m > 0 and math.isfinite(self.surrogate_m)):
            raise ConfigError("must be a finite positive number", "series.surrogate_m")

    @classmethod
    def default(cls) -> "SeriesConfig":
        return cls()


@dataclass(frozen=True)
class SeriesResult:
    """
    Truncated series value together with its retained terms.

    tail_estimate is the estimated discarded magnitude relative to the value.
    """

    value: LogNum
    terms: LogNum
    tail_estimate: float
    warnings: Tuple[str, ...] = ()

    @property
    def terms_used(self) -> int:
        return int(np.size(self.terms.log_magnitude))

    def term_list(self) -> List[LogNum]:
        logs = np.atleast_1d(self.terms.log_magnitude)
        signs = np.atleast_1d(self.terms.sign)
        return [LogNum(float(log), float(sign)) for log, sign in zip(logs, signs)]


def truncation_length(log_terms: np.ndarray, trunc: SeriesConfig) -> Tuple[int, bool]:
    """
    Decide how many leading terms of a positive series to keep.

    Parameters:
        log_terms (np.ndarray): Logs of the term magnitudes, index 0 first.
        trunc (SeriesConfig): Truncation settings.
    Returns:
        Tuple[int, bool]: Retained length and whether the prune criterion was met.
    Raises:
        None
    """
    count = len(log_terms)
    if count <= trunc.depth:
        return count, True
    if trunc.prune <= 0.0:
        return count, False

    running = np.logaddexp.accumulate(log_terms)
    relative = log_terms - running
    decreasing = np.concatenate(([False], np.diff(log_terms) < 0.0))
    below = (relative < math.log(trunc.prune)) & decreasing
    below[: trunc.depth] = False
    hits = np.flatnonzero(below)
    if hits.size:
        return int(hits[0]), True
    return count, False


def ln_gamma(s: ArrayLike) -> ArrayLike:
    """
    Natural log of the gamma function.

    Parameters:
        s (ArrayLike): Positive argument(s).
    Returns:
        ArrayLike: ln Gamma(s).
    Raises:
        DomainError: If any argument is not strictly positive.
    """
    values = np.asarray(s, dtype=float)
    if np.any(~(values > 0.0)):
        raise DomainError(f"ln_gamma needs s > 0, got {s!r}")
    return _unwrap(special.gammaln(values))


def _log_lower_gamma_series(s: float, x: float) -> float:
    term = 1.0 / s
    total = term
    shifted = s
    for _ in range(DefaultConfig.SPECFUN_MAX_ITER):
        shifted += 1.0
        term *= x / shifted
        total += term
        if abs(term) < abs(total) * DefaultConfig.SPECFUN_EPS:
            return -x + s * math.log(x) + math.log(total)
    raise ConvergenceError(f"lower incomplete gamma series did not converge for s={s}, x={x}", (total,))


def _log_upper_gamma_cf(a: float, x: float) -> float:
    # Legendre continued fraction, modified Lentz; valid for any real a when x > 0.
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b if b != 0.0 else 1.0 / _TINY
    h = d
    for i in range(1, DefaultConfig.SPECFUN_MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < DefaultConfig.SPECFUN_EPS:
            return -x + a * math.log(x) + math.log(h)
    raise ConvergenceError(f"incomplete gamma continued fraction did not converge for a={a}, x={x}", (h,))


def upper_inc_gamma(s: float, x: float) -> LogNum:
    """
    Upper incomplete gamma function Gamma(s, x) in log domain.

    Integer s uses the finite sum (n-1)! e^{-x} sum_{k<n} x^k / k!; other s use the
    continued fraction for x > s + 1 and the complement of the lower series otherwise.

    Parameters:
        s (float): Shape, s > 0.
        x (float): Lower integration limit, x >= 0.
    Returns:
        LogNum: Gamma(s, x).
    Raises:
        DomainError: If s <= 0 or x < 0.
    """
    if not s > 0.0:
        raise DomainError(f"upper_inc_gamma needs s > 0, got {s}")
    if not x >= 0.0:
        raise DomainError(f"upper_inc_gamma needs x >= 0, got {x}")
    log_gamma_s = float(special.gammaln(s))
    if x == 0.0:
        return LogNum(log_gamma_s, 1.0)

    if float(s).is_integer():
        k = np.arange(int(s), dtype=float)
        log_partial, _ = log_sum(k * math.log(x) - special.gammaln(k + 1.0))
        return LogNum(log_gamma_s - x + log_partial, 1.0)

    if x > s + 1.0:
        return LogNum(_log_upper_gamma_cf(s, x), 1.0)

    lower_ratio = math.exp(_log_lower_gamma_series(s, x) - log_gamma_s)
    return LogNum(log_gamma_s + math.log1p(-lower_ratio), 1.0)


def kummer_1f1_series(a: float, b: float, z: float, trunc: Optional[SeriesConfig] = None) -> SeriesResult:
    """
    Truncated confluent hypergeometric series 1F1(a; b; z) with its terms.

    Term d is Gamma(b) Gamma(a + d) z^d / (Gamma(a) Gamma(b + d) d!).

    Parameters:
        a (float): Numerator parameter, a > 0.
        b (float): Denominator parameter, b > 0.
        z (float): Argument, z >= 0.
        trunc (Optional[SeriesConfig]): Truncation settings.
    Returns:
        SeriesResult: Sum, retained terms, relative tail estimate and warnings.
    Raises:
        DomainError: If a, b or z are outside the supported region.
    """
    trunc = trunc or SeriesConfig()
    if not (a > 0.0 and b > 0.0):
        raise DomainError(f"kummer_1f1_series needs a > 0 and b > 0, got a={a}, b={b}")
    if not z >= 0.0:
        raise DomainError(f"kummer_1f1_series needs z >= 0, got {z}")
    if z == 0.0:
        return SeriesResult(LogNum(0.0, 1.0), LogNum(np.zeros(1), np.ones(1)), 0.0)

    index = np.arange(trunc.max_depth, dtype=float)
    log_terms = (
        special.gammaln(b)
        - special.gammaln(a)
        + special.gammaln(a + index)
        - special.gammaln(b + index)
        + index * math.log(z)
        - special.gammaln(index + 1.0)
    )
    length, pruned = truncation_length(log_terms, trunc)
    kept = log_terms[:length]
    log_value, _ = log_sum(kept)

    warnings: List[str] = []
    tail = 0.0
    if length >= 2:
        ratio = math.exp(kept[-1] - kept[-2])
        if ratio >= 1.0:
            tail = math.inf
            warnings.append(f"1F1 term ratio {ratio:.3g} >= 1 at truncation depth {length}")
        else:
            tail = math.exp(kept[-1] - log_value) * ratio / (1.0 - ratio)
    if not pruned and trunc.prune > 0.0 and tail > trunc.prune:
        warnings.append(f"1F1 series reached max_depth={trunc.max_depth} with relative tail {tail:.3g}")
    for message in warnings:
        logger.warning(message)

    return SeriesResult(LogNum(log_value, 1.0), LogNum(kept, np.ones(length)), tail, tuple(warnings))


def _ei_power_series(x: float) -> float:
    total = 0.0
    term = 1.0
    for k in range(1, DefaultConfig.SPECFUN_MAX_ITER):
        term *= x / k
        contribution = term / k
        total += contribution
        if abs(contribution) < DefaultConfig.SPECFUN_EPS * abs(total):
            return EULER_GAMMA + math.log(-x) + total
    raise ConvergenceError(f"Ei power series did not converge for x={x}", (total,))


def _e1_continued_fraction(x: float) -> float:
    b = x + 1.0
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, DefaultConfig.SPECFUN_MAX_ITER):
        an = -float(i * i)
        b += 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < DefaultConfig.SPECFUN_EPS:
            return h * math.exp(-x)
    raise ConvergenceError(f"E1 continued fraction did not converge for x={x}", (h,))


def expint_ei(x: float) -> float:
    """
    Exponential integral Ei(x) for negative x.

    Parameters:
        x (float): Argument, x < 0.
    Returns:
        float: Ei(x) = -E1(-x).
    Raises:
        DomainError: If x >= 0.
    """
    if not x < 0.0:
        raise DomainError(f"expint_ei is only needed for x < 0, got {x}")
    if -x <= DefaultConfig.EI_CROSSOVER:
        return _ei_power_series(x)
    return -_e1_continued_fraction(-x)


def log_shifted_moment(k: int, rate: float) -> LogNum:
    """
    Integral of x^k e^{-rate x} / (1 + x) over [0, inf).

    Parameters:
        k (int): Nonnegative integer power.
        rate (float): Exponential rate, rate > 0.
    Returns:
        LogNum: Value of the integral (always positive).
    Raises:
        DomainError: If k < 0 or rate <= 0.
    """
    if k < 0 or int(k) != k:
        raise DomainError(f"log_shifted_moment needs an integer k >= 0, got {k}")
    if not rate > 0.0:
        raise DomainError(f"log_shifted_moment needs rate > 0, got {rate}")
    k = int(k)

    if rate > 1.0:
        # k! e^{r} Gamma(-k, r)
        return LogNum(float(special.gammaln(k + 1.0)) + rate + _log_upper_gamma_cf(-float(k), rate), 1.0)

    # finite alternating sum plus the e^{r} E1(r) = -e^{r} Ei(-r) remainder
    i = np.arange(k, dtype=float)
    logs = np.append(special.gammaln(i + 1.0) - (i + 1.0) * math.log(rate), rate + math.log(-expint_ei(-rate)))
    signs = np.append((-1.0) ** (k - 1 - i), (-1.0) ** k)
    total, sign = log_sum(logs, signs)
    if sign <= 0.0:
        return LogNum(float(special.gammaln(k + 1.0)) + rate + _log_upper_gamma_cf(-float(k), rate), 1.0)
    return LogNum(total, sign)
