import math

import numpy as np
import pytest
from scipy import stats as sp

from blockstruct import stats


@pytest.mark.parametrize("p", [1e-12, 1e-6, 0.001, 0.025, 0.3, 0.5, 0.7, 0.975, 0.999, 1 - 1e-9])
def test_norm_ppf_matches_scipy(p):
    assert stats.norm_ppf(p) == pytest.approx(sp.norm.ppf(p), rel=1e-12, abs=1e-14)


@pytest.mark.parametrize("x", [-8.0, -2.5, -0.1, 0.0, 0.3, 1.96, 6.0])
def test_norm_cdf_and_sf(x):
    assert stats.norm_cdf(x) == pytest.approx(sp.norm.cdf(x), rel=1e-13)
    assert stats.norm_sf(x) == pytest.approx(sp.norm.sf(x), rel=1e-13)


@pytest.mark.parametrize("a", [0.5, 1.0, 4.0, 20.0])
@pytest.mark.parametrize("x", [0.01, 0.9, 4.0, 30.0])
def test_regularized_gamma(a, x):
    from scipy.special import gammainc, gammaincc

    assert stats.gammainc_lower(a, x) == pytest.approx(gammainc(a, x), rel=1e-12, abs=1e-300)
    assert stats.gammainc_upper(a, x) == pytest.approx(gammaincc(a, x), rel=1e-11, abs=1e-300)


@pytest.mark.parametrize("k", [1, 2, 7, 8, 9, 30])
@pytest.mark.parametrize("q", [0.01, 0.5, 0.95, 0.99, 0.999])
def test_chi2_ppf_matches_scipy(k, q):
    assert stats.chi2_ppf(q, k) == pytest.approx(sp.chi2.ppf(q, k), rel=1e-10)


def test_chi2_ppf_round_trip():
    for k in (3, 8):
        x = stats.chi2_ppf(0.9, k)
        assert stats.chi2_cdf(x, k) == pytest.approx(0.9, rel=1e-12)


@pytest.mark.parametrize("k,p", [(8, 0.5), (8, 0.9), (20, 0.13)])
def test_binomial_cdf_exact_sum(k, p):
    for x in range(-1, k + 1):
        want = math.fsum(math.comb(k, i) * p**i * (1 - p) ** (k - i) for i in range(x + 1))
        assert stats.binom_cdf(x, k, p) == pytest.approx(want, rel=1e-13, abs=0)
        assert stats.binom_cdf(x, k, p) == pytest.approx(sp.binom.cdf(x, k, p), rel=1e-12)


def test_binomial_pmf_sums_to_one():
    assert math.fsum(stats.binom_pmf(i, 12, 0.37) for i in range(13)) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("bad", [0.0, 1.0, -0.1, 1.5])
def test_quantile_domain(bad):
    with pytest.raises(ValueError):
        stats.norm_ppf(bad)
    with pytest.raises(ValueError):
        stats.chi2_ppf(bad, 3)


def test_vectorised_consistency():
    xs = np.linspace(-3, 3, 13)
    assert all(stats.norm_cdf(x) + stats.norm_sf(x) == pytest.approx(1.0, abs=1e-15) for x in xs)
