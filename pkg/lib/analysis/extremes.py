"""
Order statistics across receivers and eavesdroppers.

The survival of one relay branch is exp(-rate x) times a polynomial once every hop has an
integer shape. Powers of it expand into sums of c x^k exp(-r x) terms, held in an
``ExpoPolySum`` so that the metric integrals reduce to gamma-function sums.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy import special

from lib.analysis.channel import hop_survival_polynomial
from lib.analysis.dualhop import DualHopDist, bestrelay_ccdf, bestrelay_cdf, bestrelay_pdf
from lib.analysis.specfun import LogNum, SeriesConfig, as_lognum, log_shifted_moment, log_sum
from lib.errors import BudgetExceededError, DomainError

logger = logging.getLogger(__name__)

_RATE_MERGE_TOL = 1e-12


def enumerate_compositions(cells: int, total: int, budget: Optional[int] = None) -> Iterator[Tuple[int, ...]]:
    """
    Yield every weak composition of total into cells nonnegative parts, once each.

    Parameters:
        cells (int): Number of parts, >= 1.
        total (int): Sum of the parts, >= 0.
        budget (Optional[int]): Largest acceptable number of compositions.
    Returns:
        Iterator[Tuple[int, ...]]: Compositions in lexicographically decreasing order.
    Raises:
        DomainError: If cells < 1 or total < 0.
        BudgetExceededError: If C(cells + total - 1, total) exceeds budget.
    """
    if cells < 1 or total < 0:
        raise DomainError(f"need cells >= 1 and total >= 0, got cells={cells}, total={total}")
    count = math.comb(cells + total - 1, total)
    if budget is not None and count > budget:
        raise BudgetExceededError(
            f"{count} compositions of {total} over {cells} cells exceed the budget of {budget}; "
            "raise series.prune or lower series.depth"
        )
    return _compositions(cells, total)


def _compositions(cells: int, total: int) -> Iterator[Tuple[int, ...]]:
    if cells == 1:
        yield (total,)
        return
    for head in range(total, -1, -1):
        for rest in _compositions(cells - 1, total - head):
            yield (head,) + rest


@dataclass(frozen=True)
class CompositionTerm:
    """
    One term of a multinomial expansion.

    Parameters:
        weight (LogNum): Multinomial coefficient times the product of the cell coefficients.
        power (int): Sum of the cell powers weighted by the composition.
        rate (float): Sum of the cell rates weighted by the composition.
    """

    weight: LogNum
    power: int
    rate: float


def composition_terms(
    log_coeffs: np.ndarray,
    signs: np.ndarray,
    powers: np.ndarray,
    rates: np.ndarray,
    total: int,
    budget: Optional[int] = None,
) -> Iterator[CompositionTerm]:
    """
    Expand (sum_j c_j x^{k_j} e^{-r_j x})^total term by term.

    Parameters:
        log_coeffs (np.ndarray): Logs of the cell coefficient magnitudes.
        signs (np.ndarray): Cell coefficient signs.
        powers (np.ndarray): Cell polynomial powers.
        rates (np.ndarray): Cell exponential rates.
        total (int): Exponent.
        budget (Optional[int]): Largest acceptable number of compositions.
    Returns:
        Iterator[CompositionTerm]: One term per composition.
    Raises:
        BudgetExceededError: If the expansion is too large.
    """
    log_factorial_total = float(special.gammaln(total + 1.0))
    for composition in enumerate_compositions(len(log_coeffs), total, budget):
        g = np.asarray(composition, dtype=float)
        used = g > 0
        log_weight = log_factorial_total - float(np.sum(special.gammaln(g + 1.0))) + float(np.dot(g[used], log_coeffs[used]))
        sign = float(np.prod(signs[used] ** g[used]))
        yield CompositionTerm(LogNum(log_weight, sign), int(np.dot(g, powers)), float(np.dot(g, rates)))


def _log_convolve(log_a: np.ndarray, sign_a: np.ndarray, log_b: np.ndarray, sign_b: np.ndarray):
    rows = np.arange(log_a.size)[:, None]
    cols = rows + np.arange(log_b.size)[None, :]
    logs = np.full((log_a.size, log_a.size + log_b.size - 1), -np.inf)
    signs = np.zeros_like(logs)
    logs[rows, cols] = log_a[:, None] + log_b[None, :]
    signs[rows, cols] = sign_a[:, None] * sign_b[None, :]
    total, sign = log_sum(logs, signs, axis=0)
    return np.atleast_1d(total), np.atleast_1d(sign)


@dataclass(frozen=True)
class ExpoBlock:
    """exp(-rate x) * sum_k sign[k] exp(log_coeffs[k]) x^k."""

    rate: float
    log_coeffs: np.ndarray
    signs: np.ndarray

    @property
    def degree(self) -> int:
        return self.log_coeffs.size - 1

    def log_contributions(self) -> np.ndarray:
        # log of |c_k| * integral of x^k e^{-rate x}
        k = np.arange(self.log_coeffs.size, dtype=float)
        return self.log_coeffs + special.gammaln(k + 1.0) - (k + 1.0) * math.log(self.rate)

    def pruned(self, prune: float) -> "ExpoBlock":
        logs = np.where(self.signs == 0.0, -np.inf, self.log_coeffs)
        if prune > 0.0 and logs.size > 1:
            contributions = self.log_contributions()
            logs = np.where(contributions < np.max(contributions) + math.log(prune), -np.inf, logs)
        nonzero = np.flatnonzero(np.isfinite(logs))
        if nonzero.size == 0:
            return ExpoBlock(self.rate, np.full(1, -np.inf), np.zeros(1))
        end = nonzero[-1] + 1
        signs = np.where(np.isfinite(logs), self.signs, 0.0)
        return ExpoBlock(self.rate, logs[:end], signs[:end])


class ExpoPolySum:
    """
    Sum of c x^k exp(-r x) terms with r > 0, grouped into blocks by rate.
    """

    def __init__(self, blocks: Iterable[ExpoBlock] = ()) -> None:
        merged: List[ExpoBlock] = []
        for block in sorted(blocks, key=lambda b: b.rate):
            if not block.rate > 0.0:
                raise DomainError(f"ExpoPolySum rates must be > 0, got {block.rate}")
            if merged and abs(block.rate - merged[-1].rate) <= _RATE_MERGE_TOL * block.rate:
                merged[-1] = _add_blocks(merged[-1], block)
            else:
                merged.append(block)
        self.blocks: Tuple[ExpoBlock, ...] = tuple(merged)

    @classmethod
    def from_terms(cls, terms: Iterable[Tuple[object, int, float]]) -> "ExpoPolySum":
        """Build from (coefficient, power, rate) triples; coefficients may be LogNum or float."""
        grouped: Dict[float, Dict[int, List[LogNum]]] = {}
        for coeff, power, rate in terms:
            grouped.setdefault(float(rate), {}).setdefault(int(power), []).append(as_lognum(coeff))
        blocks = []
        for rate, by_power in grouped.items():
            logs = np.full(max(by_power) + 1, -np.inf)
            signs = np.zeros_like(logs)
            for power, coeffs in by_power.items():
                total, sign = log_sum([c.log_magnitude for c in coeffs], [c.sign for c in coeffs])
                logs[power], signs[power] = total, sign
            blocks.append(ExpoBlock(rate, logs, signs))
        return cls(blocks)

    @property
    def terms(self) -> List[Tuple[LogNum, int, float]]:
        return [
            (LogNum(float(log), float(sign)), power, block.rate)
            for block in self.blocks
            for power, (log, sign) in enumerate(zip(block.log_coeffs, block.signs))
            if sign != 0.0
        ]

    @property
    def term_count(self) -> int:
        return int(sum(np.count_nonzero(block.signs) for block in self.blocks))

    def __repr__(self) -> str:
        return f"ExpoPolySum(blocks={len(self.blocks)}, terms={self.term_count})"

    def evaluate(self, x):
        """
        Pointwise value of the sum.

        Parameters:
            x (float | np.ndarray): Evaluation point(s), >= 0.
        Returns:
            float | np.ndarray: Sum value(s).
        Raises:
            None
        """
        points = np.asarray(x, dtype=float)
        total = np.zeros(points.shape)
        for block in self.blocks:
            k = np.arange(block.log_coeffs.size, dtype=float)
            logs = block.log_coeffs + special.xlogy(k, points[..., None]) - block.rate * points[..., None]
            log_value, sign = log_sum(logs, np.broadcast_to(block.signs, logs.shape), axis=-1)
            total = total + np.asarray(sign) * np.exp(log_value)
        return float(total) if total.ndim == 0 else total

    __call__ = evaluate

    def scale(self, factor) -> "ExpoPolySum":
        factor = as_lognum(factor)
        return ExpoPolySum(
            ExpoBlock(b.rate, b.log_coeffs + factor.log_magnitude, b.signs * factor.sign) for b in self.blocks
        )

    def __neg__(self) -> "ExpoPolySum":
        return self.scale(-1.0)

    def add(self, other: "ExpoPolySum") -> "ExpoPolySum":
        return ExpoPolySum(self.blocks + other.blocks)

    __add__ = add

    def multiply(self, other: "ExpoPolySum", prune: float = 0.0) -> "ExpoPolySum":
        products = []
        for left in self.blocks:
            for right in other.blocks:
                logs, signs = _log_convolve(left.log_coeffs, left.signs, right.log_coeffs, right.signs)
                products.append(ExpoBlock(left.rate + right.rate, logs, signs).pruned(prune))
        return ExpoPolySum(products)

    def pruned(self, prune: float) -> "ExpoPolySum":
        return ExpoPolySum(block.pruned(prune) for block in self.blocks)

    def power(self, n: int, trunc: Optional[SeriesConfig] = None) -> "ExpoPolySum":
        """
        Raise the sum to a nonnegative integer power n >= 1.

        With trunc.expansion == "multinomial" the power is expanded literally over the
        compositions of n, after deleting cells below trunc.prune; otherwise it is formed by
        repeated log-domain convolution.

        Parameters:
            n (int): Exponent, >= 1.
            trunc (Optional[SeriesConfig]): Expansion and pruning settings.
        Returns:
            ExpoPolySum: The n-th power.
        Raises:
            DomainError: If n < 1.
            BudgetExceededError: If the multinomial expansion exceeds the budget.
        """
        trunc = trunc or SeriesConfig()
        if n < 1:
            raise DomainError(f"power needs n >= 1, got {n}")
        if trunc.expansion == "multinomial":
            return self._multinomial_power(n, trunc)
        result = self
        for _ in range(n - 1):
            result = result.multiply(self, trunc.prune)
        return result

    def _multinomial_power(self, n: int, trunc: SeriesConfig) -> "ExpoPolySum":
        cells = self.pruned(trunc.prune)
        log_coeffs, signs, powers, rates = [], [], [], []
        for block in cells.blocks:
            for power in np.flatnonzero(block.signs):
                log_coeffs.append(block.log_coeffs[power])
                signs.append(block.signs[power])
                powers.append(power)
                rates.append(block.rate)
        logger.debug("multinomial power %d over %d cells", n, len(log_coeffs))
        terms = composition_terms(
            np.asarray(log_coeffs), np.asarray(signs), np.asarray(powers), np.asarray(rates), n, trunc.composition_budget
        )
        return ExpoPolySum.from_terms((term.weight, term.power, _snap_rate(term.rate, rates, n)) for term in terms)

    def derivative(self) -> "ExpoPolySum":
        blocks = []
        for block in self.blocks:
            k = np.arange(1, block.log_coeffs.size, dtype=float)
            # coefficient of x^j is (j + 1) c_{j+1} - rate c_j
            shifted = np.append(block.log_coeffs[1:] + np.log(k), -np.inf)
            shifted_signs = np.append(block.signs[1:], 0.0)
            scaled = block.log_coeffs + math.log(block.rate)
            logs = np.stack([shifted, scaled])
            signs = np.stack([shifted_signs, -block.signs])
            total, sign = log_sum(logs, signs, axis=0)
            blocks.append(ExpoBlock(block.rate, np.atleast_1d(total), np.atleast_1d(sign)))
        return ExpoPolySum(blocks)

    def compose_affine(self, q: float, p: float) -> "ExpoPolySum":
        """
        Substitute x -> q y + p and re-expand in y.

        exp(-r (q y + p)) (q y + p)^k expands binomially into powers of y with weights
        C(k, i) q^i p^(k - i), under the new rate r q and the constant factor exp(-r p).

        Parameters:
            q (float): Scale, > 0.
            p (float): Shift, >= 0.
        Returns:
            ExpoPolySum: The composed sum as a function of y.
        Raises:
            DomainError: If q <= 0 or p < 0.
        """
        if not (q > 0.0 and p >= 0.0):
            raise DomainError(f"compose_affine needs q > 0 and p >= 0, got q={q}, p={p}")
        blocks = []
        for block in self.blocks:
            size = block.log_coeffs.size
            i = np.arange(size, dtype=float)
            if p == 0.0:
                logs, signs = block.log_coeffs + i * math.log(q), block.signs
            else:
                k = i[None, :]
                row = i[:, None]
                valid = k >= row
                with np.errstate(invalid="ignore"):
                    binomial = special.gammaln(k + 1.0) - special.gammaln(row + 1.0) - special.gammaln(k - row + 1.0)
                    matrix = np.where(valid, block.log_coeffs[None, :] + binomial + (k - row) * math.log(p), -np.inf)
                total, signs = log_sum(matrix, np.where(valid, block.signs[None, :], 0.0), axis=1)
                logs = np.atleast_1d(total) + i * math.log(q) - block.rate * p
                signs = np.atleast_1d(signs)
            blocks.append(ExpoBlock(block.rate * q, logs, signs))
        return ExpoPolySum(blocks)

    def integrate(self) -> float:
        """Integral over [0, inf)."""
        parts = []
        for block in self.blocks:
            total, sign = log_sum(block.log_contributions(), block.signs)
            parts.append(sign * math.exp(total))
        return math.fsum(parts)

    def inner_integral(self, other: "ExpoPolySum") -> float:
        """
        Integral over [0, inf) of the product of two sums.

        Parameters:
            other (ExpoPolySum): Second factor.
        Returns:
            float: Sum over coefficient pairs of a_i b_j (i + j)! / (r_a + r_b)^(i + j + 1).
        Raises:
            None
        """
        parts = []
        for left in self.blocks:
            i = np.arange(left.log_coeffs.size, dtype=float)[:, None]
            for right in other.blocks:
                j = np.arange(right.log_coeffs.size, dtype=float)[None, :]
                rate = left.rate + right.rate
                logs = (
                    left.log_coeffs[:, None]
                    + right.log_coeffs[None, :]
                    + special.gammaln(i + j + 1.0)
                    - (i + j + 1.0) * math.log(rate)
                )
                total, sign = log_sum(logs, left.signs[:, None] * right.signs[None, :])
                parts.append(sign * math.exp(total))
        return math.fsum(parts)

    def log1p_integral(self) -> float:
        """Integral over [0, inf) of the sum divided by (1 + x)."""
        parts = []
        for block in self.blocks:
            moments = [log_shifted_moment(k, block.rate).log_magnitude for k in range(block.log_coeffs.size)]
            total, sign = log_sum(block.log_coeffs + np.asarray(moments), block.signs)
            parts.append(sign * math.exp(total))
        return math.fsum(parts)


def _add_blocks(left: ExpoBlock, right: ExpoBlock) -> ExpoBlock:
    size = max(left.log_coeffs.size, right.log_coeffs.size)
    logs = np.full((2, size), -np.inf)
    signs = np.zeros((2, size))
    logs[0, : left.log_coeffs.size], signs[0, : left.signs.size] = left.log_coeffs, left.signs
    logs[1, : right.log_coeffs.size], signs[1, : right.signs.size] = right.log_coeffs, right.signs
    total, sign = log_sum(logs, signs, axis=0)
    return ExpoBlock(left.rate, np.atleast_1d(total), np.atleast_1d(sign))


def _snap_rate(rate: float, cell_rates: Sequence[float], n: int) -> float:
    # single-rate cells give n * rate exactly, avoiding spurious block splits from rounding
    base = cell_rates[0]
    return n * base if all(r == base for r in cell_rates) else rate


def dualhop_survival_sum(d: DualHopDist, trunc: Optional[SeriesConfig] = None) -> ExpoPolySum:
    """
    Survival of a single relay branch, Pr(min(first, second) > x), as one block.

    Parameters:
        d (DualHopDist): Dual-hop distribution with integer hop shapes.
        trunc (Optional[SeriesConfig]): Pruning settings.
    Returns:
        ExpoPolySum: Block of rate A + B holding the product polynomial.
    Raises:
        ShapeIntegralityError: If either hop shape is not an integer.
    """
    trunc = trunc or SeriesConfig()
    first = hop_survival_polynomial(d.first_hop, trunc.prune)
    second = hop_survival_polynomial(d.second_hop, trunc.prune)
    logs, signs = _log_convolve(first.log_coeffs, first.signs, second.log_coeffs, second.signs)
    return ExpoPolySum([ExpoBlock(first.rate + second.rate, logs, signs)])


def _min_weights(relays: int, receivers: int) -> np.ndarray:
    # (1 - (1 - G)^P)^Q as a polynomial in G
    branch = npoly.polysub([1.0], npoly.polypow([1.0, -1.0], relays))
    return npoly.polypow(branch, receivers)


def _max_survival_weights(relays: int, eavesdroppers: int) -> np.ndarray:
    # 1 - (1 - G)^(P W) as a polynomial in G
    return npoly.polysub([1.0], npoly.polypow([1.0, -1.0], relays * eavesdroppers))


def _series_in_survival(base: ExpoPolySum, weights: np.ndarray, trunc: SeriesConfig) -> ExpoPolySum:
    result = ExpoPolySum()
    current: Optional[ExpoPolySum] = None
    for n in range(1, weights.size):
        if trunc.expansion == "multinomial":
            current = base.power(n, trunc)
        else:
            current = base if current is None else current.multiply(base, trunc.prune)
        if weights[n] != 0.0:
            result = result + current.scale(float(weights[n]))
    logger.debug("order-statistic expansion holds %d terms", result.term_count)
    return result


def min_snr_survival(d: DualHopDist, receivers: int, trunc: Optional[SeriesConfig] = None) -> ExpoPolySum:
    """
    Survival of the weakest of Q receivers, Pr(min_b snr_b > x).

    Parameters:
        d (DualHopDist): Receiver-side distribution.
        receivers (int): Number of receivers Q, >= 1.
        trunc (Optional[SeriesConfig]): Expansion settings.
    Returns:
        ExpoPolySum: Expanded survival function.
    Raises:
        ShapeIntegralityError: If a hop shape is not an integer.
        BudgetExceededError: If a multinomial expansion is too large.
    """
    trunc = trunc or SeriesConfig()
    _check_count(receivers, "receivers")
    return _series_in_survival(dualhop_survival_sum(d, trunc), _min_weights(d.relays, receivers), trunc)


def max_snr_survival(d: DualHopDist, eavesdroppers: int, trunc: Optional[SeriesConfig] = None) -> ExpoPolySum:
    """
    Survival of the strongest of W eavesdroppers, 1 - F_max(x).

    Parameters:
        d (DualHopDist): Eavesdropper-side distribution.
        eavesdroppers (int): Number of eavesdroppers W, >= 1.
        trunc (Optional[SeriesConfig]): Expansion settings.
    Returns:
        ExpoPolySum: Expanded survival function.
    Raises:
        ShapeIntegralityError: If a hop shape is not an integer.
        BudgetExceededError: If a multinomial expansion is too large.
    """
    trunc = trunc or SeriesConfig()
    _check_count(eavesdroppers, "eavesdroppers")
    return _series_in_survival(
        dualhop_survival_sum(d, trunc), _max_survival_weights(d.relays, eavesdroppers), trunc
    )


def min_snr_pdf(d: DualHopDist, receivers: int, trunc: Optional[SeriesConfig] = None) -> ExpoPolySum:
    """
    Density of the weakest receiver SNR, the negated derivative of its expanded survival.

    Parameters:
        d (DualHopDist): Receiver branch law.
        receivers (int): Receiver count Q, >= 1.
        trunc (Optional[SeriesConfig]): Truncation and expansion settings.
    Returns:
        ExpoPolySum: Density as a sum of exponential-polynomial terms.
    Raises:
        ShapeIntegralityError: If a hop shape is not an integer.
        BudgetExceededError: If a multinomial expansion is too large.
        DomainError: If receivers < 1.
    """
    return -min_snr_survival(d, receivers, trunc).derivative()


def max_snr_pdf(d: DualHopDist, eavesdroppers: int, trunc: Optional[SeriesConfig] = None) -> ExpoPolySum:
    """
    Density of the strongest eavesdropper SNR, from the expanded survival of the maximum.

    Parameters:
        d (DualHopDist): Eavesdropper branch law.
        eavesdroppers (int): Eavesdropper count W, >= 1.
        trunc (Optional[SeriesConfig]): Truncation and expansion settings.
    Returns:
        ExpoPolySum: Density as a sum of exponential-polynomial terms.
    Raises:
        ShapeIntegralityError: If a hop shape is not an integer.
        BudgetExceededError: If a multinomial expansion is too large.
        DomainError: If eavesdroppers < 1.
    """
    return -max_snr_survival(d, eavesdroppers, trunc).derivative()


def min_snr_ccdf_direct(d: DualHopDist, receivers: int, x):
    return bestrelay_ccdf(d, x) ** receivers


def min_snr_pdf_direct(d: DualHopDist, receivers: int, x):
    """Q f* (1 - F*)^(Q - 1) from pointwise best-relay evaluations."""
    return receivers * bestrelay_pdf(d, x) * bestrelay_ccdf(d, x) ** (receivers - 1)


def max_snr_cdf_direct(d: DualHopDist, eavesdroppers: int, x):
    return bestrelay_cdf(d, x) ** eavesdroppers


def max_snr_pdf_direct(d: DualHopDist, eavesdroppers: int, x):
    """W f* F*^(W - 1) from pointwise best-relay evaluations."""
    return eavesdroppers * bestrelay_pdf(d, x) * bestrelay_cdf(d, x) ** (eavesdroppers - 1)


def _check_count(value: int, name: str) -> None:
    if int(value) != value or value < 1:
        raise DomainError(f"{name} must be a positive integer, got {value}")
