"""Closed-form distribution functions used by the annealing tests.

Self-contained so that thresholds are reproducible without a statistics
package: normal quantiles by rational approximation plus a Newton step,
chi-square quantiles by bisection on the regularized incomplete gamma
function, binomial tails by exact pmf summation.
"""
from __future__ import annotations

import math

_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)


def norm_pdf(x: float) -> float:
    return math.exp(-0.5 * x * x) / _SQRT2PI


def norm_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / _SQRT2)


def norm_sf(x: float) -> float:
    return 0.5 * math.erfc(x / _SQRT2)


# Acklam's rational approximation to the normal quantile (|rel err| < 1.2e-9).
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def _acklam(p: float) -> float:
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        return (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / \
               ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    if p <= 1.0 - _P_LOW:
        q = p - 0.5
        r = q * q
        return (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / \
               (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0)
    q = math.sqrt(-2.0 * math.log1p(-p))
    return -(((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / \
            ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)


def norm_ppf(p: float) -> float:
    """Standard normal quantile."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must lie in (0, 1), got {p}")
    if p > 0.5:
        # work in the lower tail where the CDF is computed without cancellation
        return -norm_ppf(1.0 - p)
    z = _acklam(p)
    return z - (norm_cdf(z) - p) / norm_pdf(z)


def _gamma_series(a: float, x: float) -> float:
    term = total = 1.0 / a
    ap = a
    for _ in range(10_000):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * 1e-17:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_contfrac(a: float, x: float) -> float:
    # modified Lentz evaluation of the continued fraction for Q(a, x)
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 10_000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def gammainc_lower(a: float, x: float) -> float:
    """Regularized lower incomplete gamma ``P(a, x)``."""
    if a <= 0.0:
        raise ValueError("shape must be positive")
    if x <= 0.0:
        return 0.0
    if x < a + 1.0:
        return _gamma_series(a, x)
    return 1.0 - _gamma_contfrac(a, x)


def gammainc_upper(a: float, x: float) -> float:
    """Regularized upper incomplete gamma ``Q(a, x)``."""
    if a <= 0.0:
        raise ValueError("shape must be positive")
    if x <= 0.0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _gamma_series(a, x)
    return _gamma_contfrac(a, x)


def chi2_cdf(x: float, k: int) -> float:
    return gammainc_lower(0.5 * k, 0.5 * x)


def chi2_sf(x: float, k: int) -> float:
    return gammainc_upper(0.5 * k, 0.5 * x)


def chi2_ppf(q: float, k: int) -> float:
    """Chi-square quantile: Wilson-Hilferty start, then bisection on the CDF."""
    if k <= 0:
        raise ValueError("degrees of freedom must be positive")
    if not 0.0 < q < 1.0:
        raise ValueError(f"probability must lie in (0, 1), got {q}")
    z = norm_ppf(q)
    c = 2.0 / (9.0 * k)
    guess = max(k * (1.0 - c + z * math.sqrt(c)) ** 3, 1e-300)
    lo = hi = guess
    while chi2_cdf(lo, k) > q:
        lo *= 0.5
    while chi2_cdf(hi, k) < q:
        hi *= 2.0
    # compare via the upper tail above the median to avoid 1 - q cancellation
    upper = q > 0.5
    target = 1.0 - q
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        below = chi2_sf(mid, k) > target if upper else chi2_cdf(mid, k) < q
        if below:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def binom_pmf(i: int, k: int, p: float) -> float:
    return math.comb(k, i) * p**i * (1.0 - p) ** (k - i)


def binom_cdf(x: int, k: int, p: float) -> float:
    """``P(Binomial(k, p) <= x)`` by exact summation of the pmf."""
    if x < 0:
        return 0.0
    if x >= k:
        return 1.0
    return min(1.0, math.fsum(binom_pmf(i, k, p) for i in range(x + 1)))
