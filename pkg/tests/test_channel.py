import math

import mpmath
import numpy as np
import pytest
from scipy import integrate, special, stats

from lib.analysis.channel import (
    INF,
    FadingParams,
    hop_ccdf,
    hop_cdf,
    hop_coefficients,
    hop_log_ccdf,
    hop_mean,
    hop_pdf,
    hop_survival_polynomial,
    nakagami,
    one_sided_gaussian,
    rayleigh,
    rician,
    shadowed_rician,
)
from lib.analysis.specfun import SeriesConfig
from lib.errors import ConfigError, DomainError, ShapeIntegralityError

PARAMS = [
    FadingParams(0.0, 1.0, INF, 1.0),
    FadingParams(1.0, 1.0, 2.0, 1.0),
    FadingParams(2.0, 2.0, 3.0, 1.0),
    FadingParams(2.0, 1.0, 3.0, 1.0),
    FadingParams(1.0, 1.5, 4.0, 3.0),
]


def test_hop_without_line_of_sight_is_single_gamma():
    c = hop_coefficients(FadingParams(0.0, 2.0, 5.0, 1.0))
    assert c.mixture_rate == 0.0
    assert c.rate == pytest.approx(2.0)
    assert c.terms_used == 1
    assert c.tail_mass == 0.0


def test_antenna_scaling_of_shape_and_rate():
    c = hop_coefficients(FadingParams(2.0, 2.0, 3.0, 1.0), antennas=2)
    assert c.shape_base == pytest.approx(4.0)
    assert c.rate == pytest.approx(12.0)
    assert c.shadowing == pytest.approx(6.0)


def test_weights_match_extended_precision():
    kappa, mu, m, avg = 1.0, 1.0, 2.0, 1.0
    c = hop_coefficients(FadingParams(kappa, mu, m, avg))
    mixture = mpmath.mpf(mu) ** 2 * kappa * (1 + kappa) / ((mu * kappa + m) * avg)
    c1 = (
        mpmath.mpf(mu) ** mu
        * mpmath.mpf(m) ** m
        * (1 + mpmath.mpf(kappa)) ** mu
        / (mpmath.gamma(mu) * mpmath.mpf(avg) ** mu * (mu * kappa + mpmath.mpf(m)) ** m)
    )
    assert c.terms_used >= 25
    for e in range(25):
        term = mpmath.gamma(mu) * mpmath.gamma(m + e) * mixture**e / (
            mpmath.gamma(m) * mpmath.gamma(mu + e) * mpmath.factorial(e)
        )
        expected = float(c1 * term)
        assert math.exp(c.log_weights[e]) == pytest.approx(expected, rel=1e-9)
        from_series = math.exp(c.c1.log_magnitude + c.term_weights.log_magnitude[e])
        assert from_series == pytest.approx(expected, rel=1e-9)


def test_masses_sum_to_one():
    c = hop_coefficients(FadingParams(2.0, 1.0, 3.0, 1.0))
    assert float(np.sum(c.masses)) == pytest.approx(1.0, abs=1e-14)
    assert c.tail_mass < 1e-12


def test_pdf_reduces_to_gamma():
    c = hop_coefficients(FadingParams(0.0, 2.0, INF, 1.0))
    assert hop_pdf(c, 1.0) == pytest.approx(4.0 * math.exp(-2.0), rel=1e-12)


@pytest.mark.parametrize("p", PARAMS)
def test_pdf_normalised(p):
    c = hop_coefficients(p)
    total, _ = integrate.quad(lambda x: hop_pdf(c, x), 0.0, np.inf, epsabs=1e-10, epsrel=1e-10, limit=200)
    assert total == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("p", PARAMS)
def test_mean_equals_average_snr(p):
    c = hop_coefficients(p)
    numeric, _ = integrate.quad(lambda x: x * hop_pdf(c, x), 0.0, np.inf, epsabs=1e-10, epsrel=1e-10, limit=200)
    assert numeric == pytest.approx(p.avg_snr, rel=1e-4)
    assert hop_mean(c) == pytest.approx(p.avg_snr, rel=1e-8)


def test_mean_with_antennas_scales_shape_not_average():
    c = hop_coefficients(FadingParams(1.0, 1.0, 2.0, 5.0), antennas=3)
    assert hop_mean(c) == pytest.approx(5.0, rel=1e-8)


def test_ccdf_boundaries():
    c = hop_coefficients(FadingParams(1.0, 1.0, 2.0, 1.0))
    assert hop_ccdf(c, 0.0) == pytest.approx(1.0, abs=1e-15)
    assert hop_ccdf(c, 1e6) < 1e-12


def test_ccdf_matches_integrated_pdf():
    c = hop_coefficients(FadingParams(1.0, 1.0, 2.0, 1.0))
    head, _ = integrate.quad(lambda x: hop_pdf(c, x), 0.0, 1.0, epsabs=1e-13, epsrel=1e-12)
    assert hop_ccdf(c, 1.0) == pytest.approx(1.0 - head, rel=1e-8)


@pytest.mark.parametrize("p", PARAMS)
def test_ccdf_monotone_and_complementary(p):
    c = hop_coefficients(p)
    grid = np.linspace(0.0, 10.0, 41)
    tail = hop_ccdf(c, grid)
    assert np.all(np.diff(tail) <= 0.0)
    assert np.all(hop_pdf(c, grid[1:]) >= 0.0)
    np.testing.assert_allclose(hop_cdf(c, grid) + tail, 1.0, atol=1e-14)


@pytest.mark.parametrize("snr", [0.0, 0.3, 2.0, 6.0])
def test_log_ccdf_matches_ccdf(snr):
    c = hop_coefficients(FadingParams(1.0, 1.0, 2.0, 1.0), antennas=2)
    assert hop_log_ccdf(c, snr) == pytest.approx(math.log(hop_ccdf(c, snr)), abs=1e-10)


def test_log_ccdf_deep_tail():
    c = hop_coefficients(FadingParams(1.0, 1.0, 2.0, 1.0))
    value = hop_log_ccdf(c, 200.0)
    assert math.isfinite(value)
    assert value < -100.0


def test_negative_snr_rejected():
    c = hop_coefficients(rayleigh(1.0))
    with pytest.raises(DomainError):
        hop_pdf(c, -1.0)
    with pytest.raises(DomainError):
        hop_ccdf(c, np.array([0.5, -0.1]))


@pytest.mark.parametrize("antennas", [1, 2, 3])
def test_survival_polynomial_matches_ccdf(antennas):
    c = hop_coefficients(FadingParams(1.0, 1.0, 2.0, 1.0), antennas=antennas)
    poly = hop_survival_polynomial(c)
    for x in [0.0, 0.1, 1.0, 3.0, 10.0]:
        k = np.arange(poly.log_coeffs.size, dtype=float)
        value = math.exp(-poly.rate * x) * float(np.sum(np.exp(poly.log_coeffs + special.xlogy(k, x))))
        assert value == pytest.approx(hop_ccdf(c, x), rel=1e-9)


def test_survival_polynomial_needs_integer_shape():
    with pytest.raises(ShapeIntegralityError):
        hop_survival_polynomial(hop_coefficients(nakagami(1.5, 1.0)))


@pytest.mark.parametrize("m_nakagami", [1.0, 2.5, 4.0])
def test_nakagami_collapse(m_nakagami):
    c = hop_coefficients(nakagami(m_nakagami, 2.0))
    grid = np.linspace(0.05, 8.0, 30)
    expected = stats.gamma(a=m_nakagami, scale=2.0 / m_nakagami).pdf(grid)
    np.testing.assert_allclose(hop_pdf(c, grid), expected, rtol=1e-6)


def test_rayleigh_collapse():
    c = hop_coefficients(rayleigh(3.0))
    grid = np.linspace(0.0, 12.0, 25)
    np.testing.assert_allclose(hop_pdf(c, grid), np.exp(-grid / 3.0) / 3.0, rtol=1e-12)


def _rician_pdf(k, avg, x):
    argument = 2.0 * np.sqrt(k * (1.0 + k) * x / avg)
    return (1.0 + k) / avg * np.exp(-k - (1.0 + k) * x / avg + argument) * special.i0e(argument)


def test_surrogate_close_to_exact_rician():
    grid = np.linspace(0.01, 6.0, 60)
    exact = _rician_pdf(2.0, 1.0, grid)
    coarse = hop_coefficients(rician(2.0, 1.0))
    fine = hop_coefficients(rician(2.0, 1.0), trunc=SeriesConfig(surrogate_m=2000.0))
    assert coarse.surrogate
    assert coarse.shadowing == pytest.approx(200.0)
    assert any("surrogate" in message for message in coarse.warnings)
    coarse_gap = np.max(np.abs(hop_pdf(coarse, grid) - exact))
    fine_gap = np.max(np.abs(hop_pdf(fine, grid) - exact))
    assert coarse_gap < 6e-3
    assert fine_gap < coarse_gap / 5.0


def test_unshadowed_rayleigh_uses_no_surrogate():
    c = hop_coefficients(rayleigh(1.0))
    assert not c.surrogate
    assert not c.warnings


def test_presets():
    assert rayleigh(2.0) == FadingParams(0.0, 1.0, INF, 2.0)
    assert one_sided_gaussian(2.0) == FadingParams(0.0, 0.5, INF, 2.0)
    assert nakagami(3.0, 2.0) == FadingParams(0.0, 3.0, INF, 2.0)
    assert rician(4.0, 2.0) == FadingParams(4.0, 1.0, INF, 2.0)
    assert shadowed_rician(2.0, 3.0, 1.0) == FadingParams(2.0, 1.0, 3.0, 1.0)


def test_one_sided_gaussian_is_half_normal_power():
    c = hop_coefficients(one_sided_gaussian(1.0))
    grid = np.linspace(0.05, 5.0, 20)
    np.testing.assert_allclose(hop_pdf(c, grid), stats.chi2(df=1).pdf(grid), rtol=1e-10)


@pytest.mark.parametrize(
    "kwargs, key",
    [
        ({"kappa": -1.0, "mu": 1.0, "m": 1.0, "avg_snr": 1.0}, "kappa"),
        ({"kappa": 1.0, "mu": 0.0, "m": 1.0, "avg_snr": 1.0}, "mu"),
        ({"kappa": 1.0, "mu": 1.0, "m": 0.0, "avg_snr": 1.0}, "m"),
        ({"kappa": 1.0, "mu": 1.0, "m": 1.0, "avg_snr": -2.0}, "avg_snr"),
    ],
)
def test_fading_params_validation(kwargs, key):
    with pytest.raises(ConfigError) as excinfo:
        FadingParams(**kwargs)
    assert excinfo.value.key == key


def test_antennas_must_be_positive():
    with pytest.raises(DomainError):
        hop_coefficients(rayleigh(1.0), antennas=0)


def test_depth_stability():
    p = FadingParams(2.0, 2.0, 3.0, 1.0)
    shallow = hop_coefficients(p, 2, SeriesConfig(depth=25))
    deep = hop_coefficients(p, 2, SeriesConfig(depth=35))
    grid = np.linspace(0.0, 3.0, 16)
    np.testing.assert_allclose(hop_ccdf(shallow, grid), hop_ccdf(deep, grid), rtol=1e-8, atol=1e-15)
