"""Cylinder functions and the 2D Helmholtz fundamental solution.

All functions are vectorized over numpy arrays and free of shared state.
The real-argument Bessel functions of order 0 and 1 are delegated to the
Cephes routines in :mod:`scipy.special`, which combine power series on
small arguments with rational/asymptotic phase-amplitude forms beyond.
"""

import numpy as np
from scipy import special as _sp

from .exceptions import DomainError, SingularityError

__all__ = [
    "bessel_j0y0",
    "bessel_j1y1",
    "hankel1",
    "fundamental_solution",
    "grad_fundamental_solution",
]


def _positive(t):
    t = np.asarray(t, dtype=float)
    if np.any(~(t > 0)):
        raise DomainError("Bessel/Hankel argument must be strictly positive and finite")
    if np.any(~np.isfinite(t)):
        raise DomainError("Bessel/Hankel argument must be finite")
    return t


def bessel_j0y0(t):
    """Return ``(J0(t), Y0(t))`` for ``t > 0``."""
    t = _positive(t)
    return _sp.j0(t), _sp.y0(t)


def bessel_j1y1(t):
    """Return ``(J1(t), Y1(t))`` for ``t > 0``."""
    t = _positive(t)
    return _sp.j1(t), _sp.y1(t)


def hankel1(order, t):
    """Hankel function of the first kind, ``H_n^(1)(t) = J_n(t) + i Y_n(t)``.

    Only ``order`` 0 and 1 are supported.
    """
    if order == 0:
        j, y = bessel_j0y0(t)
    elif order == 1:
        j, y = bessel_j1y1(t)
    else:
        raise DomainError(f"hankel1 supports orders 0 and 1, got {order!r}")
    return j + 1j * y


def _separation(x, y):
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    if d.shape[-1] != 2:
        raise DomainError("points must have a trailing dimension of size 2")
    r = np.hypot(d[..., 0], d[..., 1])
    if np.any(r == 0.0):
        raise SingularityError("fundamental solution is singular at x == y")
    return d, r


def fundamental_solution(k, x, y):
    """``Phi(x, y) = (i/4) H0^(1)(k |x - y|)``, broadcasting over point arrays."""
    if not k > 0:
        raise DomainError("wavenumber must be positive")
    _, r = _separation(x, y)
    return 0.25j * hankel1(0, k * r)


def grad_fundamental_solution(k, x, y):
    """Gradient of ``Phi`` with respect to ``x``; last axis holds the components."""
    if not k > 0:
        raise DomainError("wavenumber must be positive")
    d, r = _separation(x, y)
    scale = -0.25j * k * hankel1(1, k * r) / r
    return scale[..., None] * d
