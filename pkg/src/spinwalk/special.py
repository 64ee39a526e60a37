"""Special functions backing the closed-form laws.

Self-contained double-precision implementations: regularized incomplete gamma
(series for small argument, Lentz continued fraction for large), modified
Bessel function of the first kind (power series below z=30, asymptotic
expansion beyond), chi-square and Kolmogorov survival functions.
"""

from __future__ import annotations

import math

_EPS = 1e-16
_MAX_ITER = 500


def _gamma_series(a: float, x: float) -> float:
    # P(a, x) by the standard power series, valid for x < a + 1
    term = 1.0 / a
    total = term
    for k in range(1, _MAX_ITER):
        term *= x / (a + k)
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_cf(a: float, x: float) -> float:
    # Q(a, x) by the Lentz continued fraction, valid for x >= a + 1
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for k in range(1, _MAX_ITER):
        an = -k * (k - a)
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
        if abs(delta - 1.0) < _EPS:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def gammainc_lower(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x), absolute error < 1e-12."""
    if a <= 0:
        raise ValueError(f"shape must be positive, got {a}")
    if x < 0:
        raise ValueError(f"argument must be nonnegative, got {x}")
    if x == 0.0:
        return 0.0
    if x < a + 1.0:
        return _gamma_series(a, x)
    return 1.0 - _gamma_cf(a, x)


def gammainc_upper(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x)."""
    if a <= 0:
        raise ValueError(f"shape must be positive, got {a}")
    if x < 0:
        raise ValueError(f"argument must be nonnegative, got {x}")
    if x == 0.0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _gamma_series(a, x)
    return _gamma_cf(a, x)


def chi2_sf(x: float, dof: int) -> float:
    """Survival function of the chi-square distribution."""
    return gammainc_upper(dof / 2.0, x / 2.0)


_SERIES_CUTOFF = 30.0


def _log_iv_series(nu: float, z: float) -> float:
    half = z / 2.0
    log_pref = nu * math.log(half) - math.lgamma(nu + 1.0)
    term = 1.0
    total = 1.0
    q = half * half
    for k in range(1, _MAX_ITER):
        term *= q / (k * (nu + k))
        total += term
        if term < total * _EPS:
            break
    return log_pref + math.log(total)


def _log_iv_asymptotic(nu: float, z: float) -> float:
    # I_nu(z) ~ e^z / sqrt(2 pi z) * sum_k (-1)^k a_k(nu) / z^k, truncated at
    # the smallest term; relative error < 1e-10 for z >= 30, |nu| <= 5
    mu = 4.0 * nu * nu
    term = 1.0
    total = 1.0
    prev = abs(term)
    for k in range(1, 40):
        term *= -(mu - (2 * k - 1) ** 2) / (8.0 * k * z)
        if abs(term) > prev:
            break
        total += term
        prev = abs(term)
        if abs(term) < abs(total) * _EPS:
            break
    return z - 0.5 * math.log(2.0 * math.pi * z) + math.log(total)


def log_bessel_iv(nu: float, z: float) -> float:
    """log I_nu(z) for nu >= -1/2, z > 0 (overflow-safe at large z)."""
    if nu < -0.5:
        raise ValueError(f"order must be >= -1/2, got {nu}")
    if z < 0:
        raise ValueError(f"argument must be nonnegative, got {z}")
    if z == 0.0:
        raise ValueError("log I_nu(0) is -inf for nu > 0; handle z=0 in the caller")
    if z <= _SERIES_CUTOFF:
        return _log_iv_series(nu, z)
    return _log_iv_asymptotic(nu, z)


def bessel_iv(nu: float, z: float) -> float:
    """Modified Bessel function of the first kind I_nu(z), nu >= -1/2."""
    if z == 0.0:
        if nu == 0.0:
            return 1.0
        if nu > 0.0:
            return 0.0
        return math.inf  # nu in (-1/2, 0): (z/2)^nu diverges at 0
    return math.exp(log_bessel_iv(nu, z))


def kolmogorov_sf(t: float) -> float:
    """Survival function of the Kolmogorov distribution, Q(t) = 2 sum (-1)^(k-1) exp(-2 k^2 t^2)."""
    if t <= 0:
        return 1.0
    if t > 8.0:
        return 0.0
    total = 0.0
    for k in range(1, 101):
        term = 2.0 * (-1.0) ** (k - 1) * math.exp(-2.0 * k * k * t * t)
        total += term
        if abs(term) < 1e-16:
            break
    return min(max(total, 0.0), 1.0)
