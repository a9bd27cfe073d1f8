"""Closed-form references for the scaling limits.

Beta(2,1) comes from the Hopf-Lax solution of F_t = sigma |F_x|^2 with a
step datum, Beta(2,2) from the Barenblatt profile of the porous medium
equation F_t = a |F_x| F_xx.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cdf import LINEAR, ExtendedCDF
from .coefficients import EffectiveCoefficients

BETA21 = "beta21"
BETA22 = "beta22"
DEGENERATE = "degenerate"
CONDITIONAL = "conditional_distance"


def _ret(x, out):
    return out if np.ndim(x) else float(out)


def beta21_cdf(x):
    y = np.clip(np.asarray(x, float), 0.0, 1.0)
    return _ret(x, y * y)


def beta22_cdf(x):
    y = np.clip(np.asarray(x, float), 0.0, 1.0)
    return _ret(x, y * y * (3.0 - 2.0 * y))


def beta21_quantile(u):
    return np.sqrt(np.clip(np.asarray(u, float), 0.0, 1.0))


def beta22_quantile(u):
    # 3y^2 - 2y^3 = u  <=>  y = 1/2 - sin(asin(1 - 2u) / 3)
    u = np.clip(np.asarray(u, float), 0.0, 1.0)
    return 0.5 - np.sin(np.arcsin(1.0 - 2.0 * u) / 3.0)


def _check_ta(t, a):
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    if not a > 0:
        raise ValueError(f"a must be positive, got {a}")


def barenblatt_density(x, t, a):
    """(6at)^(-1/3) ((3/4)^(2/3) - x^2 / (6at)^(2/3)) on |x| <= (9at/2)^(1/3)."""
    _check_ta(t, a)
    c = (6.0 * a * t) ** (1.0 / 3.0)
    z = np.asarray(x, float) / c
    rho = np.maximum(0.75 ** (2.0 / 3.0) - z * z, 0.0) / c
    return _ret(x, rho)


def barenblatt_cdf(x, t, a):
    _check_ta(t, a)
    c = (6.0 * a * t) ** (1.0 / 3.0)
    A = 0.75 ** (2.0 / 3.0)
    r = math.sqrt(A)
    z = np.clip(np.asarray(x, float) / c, -r, r)
    # int_{-r}^{z} (A - s^2) ds, with total mass (4/3) A^(3/2) = 1
    out = A * (z + r) - (z**3 + r**3) / 3.0
    return _ret(x, np.clip(out, 0.0, 1.0))


def barenblatt_support(t, a):
    _check_ta(t, a)
    return (4.5 * a * t) ** (1.0 / 3.0)


# ---------------------------------------------------------------------------
# Hopf-Lax

_HL_CHUNK = 1 << 22


def hopf_lax_eval(F_in: ExtendedCDF, x, t, sigma_neg):
    """inf_y F_in(y) + (x - y)^2 / (4 |sigma| t), the solution of
    F_t = sigma |F_x|^2 for sigma < 0.

    The infimum is taken cell by cell: on a constant (step mode) cell the
    minimizer is the point of the cell nearest to x, on a linear cell it is
    x - 2|sigma| t * slope clipped to the cell.  Outside the grid F_in is
    flat at its boundary values.
    """
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    if not sigma_neg < 0:
        raise ValueError("hopf_lax_eval needs sigma < 0; reflect the datum for sigma > 0")
    k = 4.0 * abs(sigma_neg) * t
    xs = np.atleast_1d(np.asarray(x, float))
    g, v = F_in.grid, F_in.values
    # cells: (-inf, g0) at F(-inf), [g_i, g_{i+1}), [g_last, inf) at v_last
    lo = np.concatenate([[-np.inf], g])
    hi = np.concatenate([g, [np.inf]])
    base = np.concatenate([[F_in.mass_neg_inf], v])
    slope = np.zeros(lo.size)
    if F_in.mode == LINEAR:
        # linear mode holds v0 below g0
        base[0] = v[0]
        slope[1:-1] = np.diff(v) / np.diff(g)
    out = np.empty(xs.size)
    step = max(1, _HL_CHUNK // lo.size)
    for s in range(0, xs.size, step):
        xc = xs[s:s + step, None]
        y = np.clip(xc - 0.5 * k * slope, lo, hi)
        fy = base + slope * np.where(np.isfinite(lo), y - lo, 0.0)
        vals = fy + (xc - y) ** 2 / k
        out[s:s + step] = vals.min(axis=1)
    out = np.minimum(out, F_in.upper)
    return out if np.ndim(x) else float(out[0])


def hopf_lax_step(x, t, sigma_neg):
    """Closed form for the datum 1_[0, inf): min(1, x^2 / (4|sigma| t)) for x >= 0."""
    xs = np.asarray(x, float)
    out = np.where(xs < 0, 0.0, np.minimum(1.0, xs * xs / (4.0 * abs(sigma_neg) * t)))
    return _ret(x, out)


# ---------------------------------------------------------------------------
# limit laws

@dataclass(frozen=True)
class LimitLaw:
    """Target of the rescaled CDF of X^(N).

    ``scaling(N, x)`` maps raw values to the limit coordinate.  For the
    degenerate law the scaling is the identity and ``reference`` (a CDF
    callable, usually the initial law) is the target.
    """

    kind: str
    sigma: float = 0.0
    a: float = 0.0
    q: float | None = None
    reference: object = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.kind in (BETA21, CONDITIONAL) and self.sigma == 0:
            raise ValueError("Beta(2,1) limits need sigma != 0")
        if self.kind == BETA22 and not self.a > 0:
            raise ValueError("Beta(2,2) limits need a > 0")
        if self.kind == CONDITIONAL and not (self.q is not None and 0 < self.q <= 1):
            raise ValueError("conditional limits need q in (0, 1]")
        if self.kind not in (BETA21, BETA22, DEGENERATE, CONDITIONAL):
            raise ValueError(f"unknown limit kind {self.kind!r}")

    @property
    def conditional(self):
        return self.kind == CONDITIONAL

    def scale_coeffs(self, N):
        """(slope, shift) with y = slope * x + shift."""
        if N < 1:
            raise ValueError("N must be at least 1")
        if self.kind == BETA22:
            return 1.0 / ((36.0 * self.a * N) ** (1.0 / 3.0)), 0.5
        if self.kind in (BETA21, CONDITIONAL):
            return -math.copysign(1.0, self.sigma) / (2.0 * math.sqrt(abs(self.sigma) * N)), 0.0
        return 1.0, 0.0

    def scaling(self, N, x):
        m, c = self.scale_coeffs(N)
        return m * np.asarray(x, float) + c

    def cdf(self, y):
        if self.kind == BETA22:
            return beta22_cdf(y)
        if self.kind == BETA21:
            return beta21_cdf(y)
        if self.kind == CONDITIONAL:
            y = np.clip(np.asarray(y, float), 0.0, math.sqrt(self.q))
            return _ret(y, np.minimum(y * y / self.q, 1.0))
        if self.reference is None:
            raise ValueError("degenerate limit has no reference CDF attached")
        return self.reference(y)

    def quantile(self, u):
        """Quantiles for the evaluation grid; None when unknown."""
        if self.kind == BETA22:
            return beta22_quantile(u)
        if self.kind == BETA21:
            return beta21_quantile(u)
        if self.kind == CONDITIONAL:
            return np.sqrt(self.q * np.clip(np.asarray(u, float), 0.0, 1.0))
        return None

    def describe(self):
        d = {"kind": self.kind}
        if self.kind == BETA22:
            d.update(a=self.a, divisor="(36 a N)^(1/3)", shift=0.5)
        elif self.kind in (BETA21, CONDITIONAL):
            d.update(sigma=self.sigma, factor="-sgn(sigma) / (2 sqrt(|sigma| N))")
            if self.q is not None:
                d["q"] = self.q
        return d


def limit_law(coeffs: EffectiveCoefficients, conditional_q=None, reference=None) -> LimitLaw:
    if coeffs.sigma_is_zero:
        if coeffs.a > 0:
            return LimitLaw(BETA22, 0.0, coeffs.a)
        if conditional_q is not None:
            raise ValueError("a conditional limit needs sigma != 0; sigma = a = 0 here")
        return LimitLaw(DEGENERATE, 0.0, 0.0, reference=reference)
    if conditional_q is not None:
        return LimitLaw(CONDITIONAL, coeffs.sigma, coeffs.a, float(conditional_q))
    return LimitLaw(BETA21, coeffs.sigma, coeffs.a)
