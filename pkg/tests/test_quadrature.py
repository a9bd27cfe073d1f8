import math

import numpy as np
import pytest

from rde.quadrature import adaptive_simpson, gauss_legendre, integrate_halfline


def test_simpson_polynomial_exact():
    assert adaptive_simpson(lambda x: x**3 - 2 * x, 0.0, 2.0) == pytest.approx(0.0, abs=1e-13)


def test_simpson_smooth():
    assert adaptive_simpson(np.sin, 0.0, math.pi, tol=1e-12) == pytest.approx(2.0, abs=1e-11)


def test_simpson_empty_interval():
    assert adaptive_simpson(np.cos, 1.0, 1.0) == 0.0


def test_halfline_exponential_tail():
    res = integrate_halfline(lambda s: s * np.exp(-s))
    assert res.converged
    assert res.value == pytest.approx(1.0, abs=1e-10)


def test_halfline_kink_breakpoint():
    res = integrate_halfline(lambda s: np.where(s < 1.0, s, 0.0), breakpoints=[1.0])
    assert res.value == pytest.approx(0.5, abs=1e-12)


def test_halfline_divergent_reports_inf():
    res = integrate_halfline(lambda s: 1.0 / (1.0 + s))
    assert not res.converged
    assert math.isinf(res.value)
    assert res.diagnostic


@pytest.mark.parametrize("n", [4, 16])
def test_gauss_legendre_unit_interval(n):
    x, w = gauss_legendre(n)
    assert w.sum() == pytest.approx(1.0, abs=1e-14)
    assert np.all((x > 0) & (x < 1))
    assert np.dot(w, x ** (2 * n - 1)) == pytest.approx(1.0 / (2 * n), abs=1e-14)
