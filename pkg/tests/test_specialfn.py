import math

import mpmath
import numpy as np
import pytest

from coinv.exceptions import DomainError, SingularityError
from coinv.specialfn import (
    bessel_j0y0,
    bessel_j1y1,
    fundamental_solution,
    grad_fundamental_solution,
    hankel1,
)

mpmath.mp.dps = 40


def _series_j0(t):
    # sum_m (-1)^m (t/2)^(2m) / (m!)^2
    t = mpmath.mpf(t)
    q = (t / 2) ** 2
    term, total, m = mpmath.mpf(1), mpmath.mpf(1), 0
    while abs(term) > mpmath.mpf(10) ** -45 or m < 5:
        m += 1
        term *= -q / (m * m)
        total += term
    return total


def _series_y0(t):
    # (2/pi)(ln(t/2) + gamma) J0(t) + (2/pi) sum_m (-1)^(m+1) H_m (t/2)^(2m) / (m!)^2
    t = mpmath.mpf(t)
    q = (t / 2) ** 2
    term, harmonic, total, m = mpmath.mpf(1), mpmath.mpf(0), mpmath.mpf(0), 0
    while True:
        m += 1
        term *= -q / (m * m)
        harmonic += mpmath.mpf(1) / m
        inc = -term * harmonic
        total += inc
        if abs(inc) < mpmath.mpf(10) ** -45 and m > 5:
            break
    return 2 / mpmath.pi * ((mpmath.log(t / 2) + mpmath.euler) * _series_j0(t) + total)


def test_series_oracle_at_one():
    j0, y0 = bessel_j0y0(1.0)
    assert j0 == pytest.approx(0.7651976866, abs=1e-10)
    assert y0 == pytest.approx(0.0882569642, abs=1e-10)


@pytest.mark.parametrize("t", [1e-3, 0.1, 0.5, 1.0, 2.5, 5.0, 8.0, 12.0, 20.0])
def test_against_power_series(t):
    j0, y0 = bessel_j0y0(t)
    ej, ey = float(_series_j0(t)), float(_series_y0(t))
    h = math.hypot(ej, ey)
    # relative to |H0|; J0 and Y0 alone have zeros
    assert abs(j0 - ej) <= 1e-12 * h
    assert abs(y0 - ey) <= 1e-12 * h


@pytest.mark.parametrize("t", [30.0, 100.0, 1e3, 1e4])
def test_large_argument_against_mpmath(t):
    j0, y0 = bessel_j0y0(t)
    ej, ey = float(mpmath.besselj(0, t)), float(mpmath.bessely(0, t))
    h = math.hypot(ej, ey)
    assert abs(j0 - ej) <= 1e-12 * h
    assert abs(y0 - ey) <= 1e-12 * h


def test_asymptotic_modulus_at_100():
    j0, y0 = bessel_j0y0(100.0)
    assert abs(math.sqrt(100.0) * math.hypot(j0, y0) - math.sqrt(2.0 / math.pi)) <= 1e-3


@pytest.mark.parametrize("t", [0.0, -1.0])
def test_nonpositive_argument_rejected(t):
    with pytest.raises(DomainError):
        bessel_j0y0(t)


def test_hankel_values():
    assert hankel1(0, 1.0) == pytest.approx(0.7651976866 + 0.0882569642j, abs=1e-10)
    with pytest.raises(DomainError):
        hankel1(2, 1.0)


@pytest.mark.parametrize("t", [0.5, 1.0, 5.0])
def test_wronskian(t):
    j0, y0 = bessel_j0y0(t)
    j1, y1 = bessel_j1y1(t)
    assert abs(j0 * y1 - j1 * y0 + 2.0 / (math.pi * t)) <= 1e-10


def test_wronskian_log_sample():
    t = np.logspace(-3, 4, 200)
    j0, y0 = bessel_j0y0(t)
    j1, y1 = bessel_j1y1(t)
    w = j0 * y1 - j1 * y0
    assert np.max(np.abs(w * t * math.pi / 2.0 + 1.0)) <= 1e-10


def test_derivative_consistency():
    t = np.array([0.3, 1.0, 4.0, 17.0, 250.0])
    h = 1e-6
    fd = (hankel1(0, t + h) - hankel1(0, t - h)) / (2 * h)
    assert np.max(np.abs(fd + hankel1(1, t)) / np.abs(hankel1(1, t))) <= 1e-6


def test_fundamental_solution_value():
    phi = fundamental_solution(1.0, np.array([1.0, 0.0]), np.array([0.0, 0.0]))
    assert phi == pytest.approx(-0.0220642410 + 0.1912994217j, abs=1e-10)


def test_fundamental_solution_symmetric_and_singular():
    x, y = np.array([0.3, -1.2]), np.array([2.0, 0.5])
    assert fundamental_solution(3.0, x, y) == fundamental_solution(3.0, y, x)
    with pytest.raises(SingularityError):
        fundamental_solution(3.0, x, x)


def test_helmholtz_residual():
    k, h = 2.0, 1e-3
    y = np.zeros(2)
    for x in (np.array([1.0, 0.5]), np.array([-0.7, 2.0])):
        ex, ey = np.array([h, 0.0]), np.array([0.0, h])
        f = lambda p: fundamental_solution(k, p, y)
        lap = (f(x + ex) + f(x - ex) + f(x + ey) + f(x - ey) - 4 * f(x)) / h**2
        assert abs(lap + k * k * f(x)) <= 1e-4


def test_gradient_matches_finite_differences():
    k, h = 4.0, 1e-5
    x, y = np.array([0.8, -0.3]), np.array([-0.5, 0.4])
    g = grad_fundamental_solution(k, x, y)
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        fd = (fundamental_solution(k, x + e, y) - fundamental_solution(k, x - e, y)) / (2 * h)
        assert abs(g[i] - fd) <= 1e-6
