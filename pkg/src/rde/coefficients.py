"""Effective coefficients sigma and a, the exponent alpha, and polylogarithms."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import integrate, special

from .forcing import DomainError, ForcingLaw, decay_integral
from .quadrature import integrate_halfline

ZETA2 = 1.6449340668482264  # pi^2 / 6
ZETA3 = 1.2020569031595943
ZERO_TOL = 1e-7


class DivergentIntegral(ArithmeticError):
    pass


@dataclass(frozen=True)
class EffectiveCoefficients:
    sigma: float
    a: float
    alpha: int
    decay_value: float
    sigma_is_zero: bool

    def to_json(self):
        return asdict(self)


def _check_decay(law, tol):
    d = decay_integral(law, tol)
    if not np.isfinite(d.value):
        raise DivergentIntegral(d.diagnostic)
    return d


def _gap_integral(f, tol, weight):
    kinks = f.gap_kinks()
    if weight == "sigma":
        fn = f.gap
    else:
        def fn(s):
            h = f.gap(s)
            return (2.0 * s + h) * h
    res = integrate_halfline(fn, kinks, tol)
    if not res.converged:
        raise DivergentIntegral(res.diagnostic)
    return res.value


def _side_sums(law, tol, weight):
    plus = sum(w * _gap_integral(f, tol, weight) for w, f in law.plus_parts())
    minus = sum(w * _gap_integral(f, tol, weight) for w, f in law.minus_parts())
    return plus, minus


def compute_sigma(law: ForcingLaw, tol=1e-10):
    _check_decay(law, tol)
    plus, minus = _side_sums(law, tol, "sigma")
    return -2.0 * law.p * plus + 2.0 * (1.0 - law.p) * minus


def compute_a(law: ForcingLaw, tol=1e-10):
    # (3s - g)(s - g) = (2s + h) h with h = s - g
    _check_decay(law, tol)
    plus, minus = _side_sums(law, tol, "a")
    return law.p * plus + (1.0 - law.p) * minus


def select_alpha(sigma, zero_tol=ZERO_TOL):
    """Returns (alpha, sigma_is_zero)."""
    if zero_tol <= 0:
        raise ValueError("zero_tol must be positive")
    is_zero = abs(sigma) < zero_tol
    return (3 if is_zero else 2), is_zero


def effective_coefficients(law: ForcingLaw, tol=1e-10, zero_tol=ZERO_TOL):
    d = _check_decay(law, tol)
    sigma = compute_sigma(law, tol)
    a = compute_a(law, tol)
    alpha, is_zero = select_alpha(sigma, zero_tol)
    return EffectiveCoefficients(sigma, a, alpha, d.value, is_zero)


# ---------------------------------------------------------------------------
# Polylogarithms on [0, 1]

_SERIES_EPS = 1e-17


def _zeta_nonpositive(m):
    """zeta(-m) for integer m >= 0."""
    if m == 0:
        return -0.5
    return -float(special.bernoulli(m + 1)[-1]) / (m + 1)


_ZNEG = [_zeta_nonpositive(m) for m in range(40)]


def _power_series(t, k):
    if t == 0.0:
        return 0.0
    total = 0.0
    tn = 1.0
    n = 0
    while True:
        n += 1
        tn *= t
        total += tn / n**k
        # remaining terms are bounded by a geometric series
        if tn * t / ((n + 1) ** k * (1.0 - t)) < _SERIES_EPS:
            return total


def _log_series(t, k):
    # expansion of Li_k(e^mu) around mu = 0, converges for |mu| < 2 pi;
    # with |mu| <= log 2 the terms fall like (log 2 / 2 pi)^j, so a fixed
    # count of 36 is far past 1e-17
    mu = math.log(t)
    lm = math.log(-mu)
    if k == 2:
        total = ZETA2 + mu * (1.0 - lm)
        start = 2
    else:
        total = ZETA3 + ZETA2 * mu + 0.5 * mu * mu * (1.5 - lm)
        start = 3
    fact = math.factorial(start)
    pw = mu**start
    for j in range(start, start + len(_ZNEG) - 4):
        term = _ZNEG[j - k] * pw / fact
        total += term
        pw *= mu
        fact *= j + 1
    return total


def _polylog(t, k):
    t = float(t)
    if not 0.0 <= t <= 1.0 or math.isnan(t):
        raise DomainError(f"polylog argument {t} outside [0, 1]")
    if t == 1.0:
        return ZETA2 if k == 2 else ZETA3
    if t <= 0.5:
        return _power_series(t, k)
    return _log_series(t, k)


def dilog(t):
    return _polylog(t, 2)


def trilog(t):
    return _polylog(t, 3)


@dataclass(frozen=True)
class AppendixCReport:
    sigma_D_quadrature: float
    sigma_D_closed: float
    a_R_quadrature: float
    a_R_closed: float
    abs_errors: dict

    def to_json(self):
        return asdict(self)


def appendixC_identities():
    """Distance sigma and resistance a, computed as x = e^-s integrals and
    compared with their polylogarithm closed forms."""
    opts = dict(epsabs=1e-14, epsrel=1e-13, limit=200)
    q = lambda fn, lo, hi: integrate.quad(fn, lo, hi, **opts)[0]
    # sigma_D = -int_0^{log 2} s ds - int_{log 2}^inf -log(1 - e^-s) ds
    head = q(lambda x: -math.log(x) / x, 0.5, 1.0)
    tail = q(lambda x: -math.log1p(-x) / x, 0.0, 0.5)
    sigma_q = -(head + tail)
    sigma_c = -0.5 * dilog(1.0)
    # a_R = int_0^{log 2} 3 s^2 ds + int_{log 2}^inf (2 s h + h^2) ds, h = -log(1 - e^-s)
    head = q(lambda x: 3.0 * math.log(x) ** 2 / x, 0.5, 1.0)
    tail = q(lambda x: (2.0 * math.log(x) * math.log1p(-x) + math.log1p(-x) ** 2) / x, 0.0, 0.5)
    a_q = head + tail
    a_c = 2.0 * trilog(1.0)
    errs = {"sigma_D": abs(sigma_q - sigma_c), "a_R": abs(a_q - a_c)}
    return AppendixCReport(sigma_q, sigma_c, a_q, a_c, errs)
