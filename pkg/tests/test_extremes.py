import itertools
import math

import numpy as np
import pytest

from lib.analysis.channel import INF, FadingParams, hop_coefficients, nakagami
from lib.analysis.dualhop import DualHopDist, bestrelay_ccdf, dualhop_ccdf
from lib.analysis.extremes import (
    ExpoBlock,
    ExpoPolySum,
    composition_terms,
    dualhop_survival_sum,
    enumerate_compositions,
    max_snr_cdf_direct,
    max_snr_pdf,
    max_snr_pdf_direct,
    max_snr_survival,
    min_snr_ccdf_direct,
    min_snr_pdf,
    min_snr_pdf_direct,
    min_snr_survival,
)
from lib.analysis.specfun import SeriesConfig
from lib.errors import BudgetExceededError, DomainError, ShapeIntegralityError

STRONG = FadingParams(2.0, 2.0, INF, 10.0)
WEAK = FadingParams(2.0, 2.0, INF, 0.1)
SINGLE_GAMMA = FadingParams(0.0, 2.0, INF, 1.0)
GRID = np.linspace(0.0, 40.0, 81)


def _dist(first, second, relays=2, antennas=1):
    return DualHopDist(hop_coefficients(first), hop_coefficients(second, antennas), relays)


def _max_gap(left, right):
    return float(np.max(np.abs(np.asarray(left) - np.asarray(right))) / max(np.max(np.abs(right)), 1e-300))


def test_compositions_small_case():
    found = list(enumerate_compositions(3, 2))
    assert len(found) == 6
    assert found[0] == (2, 0, 0)
    assert len(set(found)) == 6
    assert all(sum(c) == 2 for c in found)


def test_compositions_match_brute_force():
    brute = {c for c in itertools.product(range(5), repeat=4) if sum(c) == 4}
    found = list(enumerate_compositions(4, 4))
    assert len(found) == 35
    assert set(found) == brute


def test_compositions_of_zero():
    assert list(enumerate_compositions(3, 0)) == [(0, 0, 0)]


def test_multinomial_weights_sum_to_power_of_cells():
    cells, total = 3, 5
    terms = list(composition_terms(np.zeros(cells), np.ones(cells), np.arange(cells), np.ones(cells), total))
    assert math.fsum(term.weight.value for term in terms) == pytest.approx(cells**total, rel=1e-12)
    assert {term.rate for term in terms} == {float(total)}


def test_composition_budget():
    with pytest.raises(BudgetExceededError):
        enumerate_compositions(10, 10, budget=100)
    with pytest.raises(DomainError):
        enumerate_compositions(0, 2)


def test_expo_poly_sum_integrals():
    assert ExpoPolySum.from_terms([(1.0, 1, 2.0)]).integrate() == pytest.approx(0.25, rel=1e-14)
    first = ExpoPolySum.from_terms([(1.0, 0, 1.0)])
    second = ExpoPolySum.from_terms([(1.0, 0, 2.0)])
    assert first.inner_integral(second) == pytest.approx(1.0 / 3.0, rel=1e-14)
    assert first.log1p_integral() == pytest.approx(0.5963473623231941, rel=1e-10)


def test_expo_poly_sum_merges_equal_rates():
    s = ExpoPolySum.from_terms([(1.0, 0, 1.0), (2.0, 0, 1.0), (3.0, 2, 1.0)])
    assert len(s.blocks) == 1
    assert s.term_count == 2
    assert s.evaluate(1.0) == pytest.approx(6.0 * math.exp(-1.0), rel=1e-14)


def test_compose_affine():
    s = ExpoPolySum.from_terms([(2.0, 2, 1.5), (-1.0, 0, 0.5), (0.3, 1, 0.5)])
    composed = s.compose_affine(2.0, 0.7)
    y = np.linspace(0.0, 5.0, 11)
    np.testing.assert_allclose(composed.evaluate(y), s.evaluate(2.0 * y + 0.7), rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(s.compose_affine(3.0, 0.0).evaluate(y), s.evaluate(3.0 * y), rtol=1e-12, atol=1e-15)


def test_compose_affine_domain():
    s = ExpoPolySum.from_terms([(1.0, 0, 1.0)])
    with pytest.raises(DomainError):
        s.compose_affine(0.0, 1.0)
    with pytest.raises(DomainError):
        s.compose_affine(1.0, -0.5)


def test_derivative():
    s = ExpoPolySum.from_terms([(1.0, 2, 1.0)])
    x = np.linspace(0.1, 6.0, 12)
    np.testing.assert_allclose(s.derivative().evaluate(x), (2.0 * x - x * x) * np.exp(-x), rtol=1e-12, atol=1e-15)


def test_power_matches_repeated_product():
    s = ExpoPolySum.from_terms([(0.5, 0, 1.0), (1.5, 1, 1.0), (-0.2, 0, 2.5)])
    x = np.linspace(0.0, 4.0, 9)
    cube = s.power(3)
    np.testing.assert_allclose(cube.evaluate(x), s.evaluate(x) ** 3, rtol=1e-11, atol=1e-15)
    literal = s.power(3, SeriesConfig(expansion="multinomial", prune=0.0))
    np.testing.assert_allclose(literal.evaluate(x), s.evaluate(x) ** 3, rtol=1e-11, atol=1e-15)


def test_power_needs_positive_exponent():
    with pytest.raises(DomainError):
        ExpoPolySum.from_terms([(1.0, 0, 1.0)]).power(0)


def test_rates_must_be_positive():
    with pytest.raises(DomainError):
        ExpoPolySum([ExpoBlock(0.0, np.zeros(1), np.ones(1))])


def test_branch_survival_is_product_of_hops():
    d = _dist(STRONG, STRONG, relays=1, antennas=2)
    s = dualhop_survival_sum(d)
    assert len(s.blocks) == 1
    assert _max_gap(s.evaluate(GRID), dualhop_ccdf(d, GRID)) < 1e-9


def test_single_receiver_single_relay_is_branch():
    d = _dist(STRONG, STRONG, relays=1)
    branch = dualhop_ccdf(d, GRID)
    assert _max_gap(min_snr_survival(d, 1).evaluate(GRID), branch) < 1e-9
    assert _max_gap(max_snr_survival(d, 1).evaluate(GRID), branch) < 1e-9


def test_min_expansion_matches_direct():
    d = _dist(STRONG, STRONG, relays=2, antennas=2)
    expanded = min_snr_survival(d, 5).evaluate(GRID)
    assert _max_gap(expanded, min_snr_ccdf_direct(d, 5, GRID)) < 1e-4
    assert _max_gap(min_snr_pdf(d, 5).evaluate(GRID[1:]), min_snr_pdf_direct(d, 5, GRID[1:])) < 1e-4


def test_max_expansion_matches_direct():
    d = _dist(STRONG, WEAK, relays=2, antennas=2)
    grid = np.linspace(0.0, 2.0, 41)
    expanded = max_snr_survival(d, 3).evaluate(grid)
    assert _max_gap(1.0 - expanded, max_snr_cdf_direct(d, 3, grid)) < 1e-4
    assert _max_gap(max_snr_pdf(d, 3).evaluate(grid[1:]), max_snr_pdf_direct(d, 3, grid[1:])) < 1e-4


@pytest.mark.parametrize("count", [1, 3, 5])
def test_order_statistic_densities_normalised(count):
    d = _dist(STRONG, STRONG, relays=2)
    assert min_snr_survival(d, count).evaluate(0.0) == pytest.approx(1.0, abs=1e-10)
    assert min_snr_pdf(d, count).integrate() == pytest.approx(1.0, abs=1e-4)
    assert max_snr_pdf(d, count).integrate() == pytest.approx(1.0, abs=1e-4)


def test_stochastic_ordering():
    d = _dist(STRONG, STRONG, relays=2)
    branch = bestrelay_ccdf(d, GRID)
    weakest = min_snr_survival(d, 3).evaluate(GRID)
    strongest = max_snr_survival(d, 3).evaluate(GRID)
    assert np.all(weakest <= branch + 1e-9)
    assert np.all(strongest >= branch - 1e-9)


@pytest.mark.parametrize("relays, receivers", [(1, 3), (2, 2), (3, 1)])
def test_multinomial_matches_convolution(relays, receivers):
    d = _dist(SINGLE_GAMMA, SINGLE_GAMMA, relays=relays)
    grid = np.linspace(0.0, 8.0, 33)
    convolution = min_snr_survival(d, receivers, SeriesConfig(prune=0.0))
    multinomial = min_snr_survival(d, receivers, SeriesConfig(prune=0.0, expansion="multinomial"))
    np.testing.assert_allclose(multinomial.evaluate(grid), convolution.evaluate(grid), rtol=1e-10, atol=1e-14)


def test_multinomial_budget_is_enforced():
    d = _dist(STRONG, STRONG, relays=2)
    trunc = SeriesConfig(prune=0.0, expansion="multinomial", composition_budget=50)
    with pytest.raises(BudgetExceededError):
        min_snr_survival(d, 4, trunc)


def test_non_integer_shape_rejected():
    d = _dist(nakagami(1.5, 1.0), nakagami(1.5, 1.0))
    with pytest.raises(ShapeIntegralityError):
        min_snr_survival(d, 2)


def test_counts_must_be_positive():
    d = _dist(SINGLE_GAMMA, SINGLE_GAMMA)
    with pytest.raises(DomainError):
        min_snr_survival(d, 0)
    with pytest.raises(DomainError):
        max_snr_survival(d, 0)
