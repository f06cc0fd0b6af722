"""Parametric obstacle boundaries, sensor rings and sampling grids."""

from dataclasses import dataclass, field
import math

import numpy as np

from .exceptions import ConfigurationError

__all__ = [
    "CURVE_KINDS",
    "ParametricCurve",
    "Ring",
    "SamplingGrid",
    "curve_eval",
    "ring_points",
    "grid_points",
]

TWO_PI = 2.0 * np.pi

# kind -> (allowed parameter names, defaults)
CURVE_KINDS = {
    "circle": {"center": (0.0, 0.0), "radius": 1.0},
    "starfish": {"center": (0.0, 0.0), "radius": 1.0, "amplitude": 0.2, "lobes": 5},
    "peanut": {"center": (0.0, 0.0), "semi_axes": (2.0, 1.0)},
    "kite": {"center": (0.0, 0.0), "scale": 1.0},
    "trig-polynomial": {"center": (0.0, 0.0), "cos": (1.0,), "sin": ()},
}
_COMMON = {"rotation": 0.0}


def _freeze(value):
    if isinstance(value, (list, tuple, np.ndarray)):
        return tuple(float(v) for v in value)
    return float(value)


@dataclass(frozen=True)
class ParametricCurve:
    """Closed, counterclockwise, C^2 boundary ``t -> x(t)`` on ``[0, 2pi)``.

    ``params`` is normalized to a sorted tuple of ``(name, value)`` pairs so
    curves are hashable and compare by value. Every kind accepts an optional
    ``rotation`` (radians) applied about the origin after ``center``.
    """

    kind: str
    params: tuple = ()

    def __post_init__(self):
        if self.kind not in CURVE_KINDS:
            raise ConfigurationError(
                f"unsupported curve kind {self.kind!r}; expected one of {sorted(CURVE_KINDS)}"
            )
        given = dict(self.params)
        allowed = {**CURVE_KINDS[self.kind], **_COMMON}
        unknown = set(given) - set(allowed)
        if unknown:
            raise ConfigurationError(
                f"unknown parameter(s) {sorted(unknown)} for curve kind {self.kind!r}"
            )
        merged = {name: _freeze(given.get(name, default)) for name, default in allowed.items()}
        object.__setattr__(self, "params", tuple(sorted(merged.items())))
        self._validate()

    @classmethod
    def make(cls, kind, **params):
        return cls(kind, tuple(params.items()))

    def param(self, name):
        return dict(self.params)[name]

    def _validate(self):
        p = dict(self.params)
        if len(p["center"]) != 2:
            raise ConfigurationError("curve center must have two coordinates")
        if self.kind == "circle" and not p["radius"] > 0:
            raise ConfigurationError("circle radius must be positive")
        if self.kind == "starfish":
            if not (p["radius"] > 0 and abs(p["amplitude"]) < p["radius"]):
                raise ConfigurationError("starfish requires radius > |amplitude|")
            if p["lobes"] != int(p["lobes"]) or p["lobes"] < 1:
                raise ConfigurationError("starfish lobes must be a positive integer")
        if self.kind == "peanut":
            if len(p["semi_axes"]) != 2 or min(p["semi_axes"]) <= 0:
                raise ConfigurationError("peanut semi_axes must be two positive reals")
        if self.kind == "kite" and not p["scale"] > 0:
            raise ConfigurationError("kite scale must be positive")
        if self.kind == "trig-polynomial":
            if len(p["cos"]) < 1:
                raise ConfigurationError("trig-polynomial needs at least the constant cos term")
            t = np.linspace(0.0, TWO_PI, 2048, endpoint=False)
            r, _, _ = _trig_radius(p["cos"], p["sin"], t)
            if np.min(r) <= 0:
                raise ConfigurationError("trig-polynomial radius must stay positive")

    def derivatives(self, t):
        """Return ``x(t), x'(t), x''(t)`` as arrays of shape ``t.shape + (2,)``."""
        t = np.asarray(t, dtype=float)
        p = dict(self.params)
        if self.kind == "kite":
            s = p["scale"]
            x = s * np.stack([np.cos(t) + 0.65 * np.cos(2 * t) - 0.65, 1.5 * np.sin(t)], -1)
            dx = s * np.stack([-np.sin(t) - 1.3 * np.sin(2 * t), 1.5 * np.cos(t)], -1)
            ddx = s * np.stack([-np.cos(t) - 2.6 * np.cos(2 * t), -1.5 * np.sin(t)], -1)
        else:
            r, dr, ddr = self._radius(p, t)
            e = np.stack([np.cos(t), np.sin(t)], -1)
            ep = np.stack([-np.sin(t), np.cos(t)], -1)
            x = r[..., None] * e
            dx = dr[..., None] * e + r[..., None] * ep
            ddx = (ddr - r)[..., None] * e + 2.0 * dr[..., None] * ep
        x = x + np.asarray(p["center"])
        if p["rotation"] != 0.0:
            c, s_ = math.cos(p["rotation"]), math.sin(p["rotation"])
            rot = np.array([[c, -s_], [s_, c]])
            x, dx, ddx = x @ rot.T, dx @ rot.T, ddx @ rot.T
        return x, dx, ddx

    def _radius(self, p, t):
        if self.kind == "circle":
            one = np.ones_like(t)
            return p["radius"] * one, 0.0 * one, 0.0 * one
        if self.kind == "starfish":
            m = p["lobes"]
            a = p["amplitude"]
            return (
                p["radius"] + a * np.cos(m * t),
                -a * m * np.sin(m * t),
                -a * m * m * np.cos(m * t),
            )
        if self.kind == "peanut":
            a, b = p["semi_axes"]
            r = np.sqrt(a * a * np.cos(t) ** 2 + b * b * np.sin(t) ** 2)
            # r^2 = (a^2+b^2)/2 + (a^2-b^2)/2 cos 2t
            c = 0.5 * (a * a - b * b)
            dr = -c * np.sin(2 * t) / r
            ddr = (-2.0 * c * np.cos(2 * t) - dr * dr) / r
            return r, dr, ddr
        return _trig_radius(p["cos"], p["sin"], t)

    def point(self, t):
        return self.derivatives(t)[0]

    def length(self, n=4096):
        t = np.linspace(0.0, TWO_PI, n, endpoint=False)
        _, dx, _ = self.derivatives(t)
        return float(np.sum(np.hypot(dx[:, 0], dx[:, 1])) * TWO_PI / n)

    def polygon(self, n=2048):
        t = np.linspace(0.0, TWO_PI, n, endpoint=False)
        return self.point(t)

    def contains(self, points, n=2048):
        """Boolean mask of points strictly inside the curve (even-odd rule on a fine polygon)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        poly = self.polygon(n)
        x0, y0 = poly[:, 0], poly[:, 1]
        x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
        px = pts[:, 0][:, None]
        py = pts[:, 1][:, None]
        crosses = (y0 > py) != (y1 > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = x0 + (py - y0) * (x1 - x0) / (y1 - y0)
        inside = np.sum(crosses & (px < xint), axis=1) % 2 == 1
        return inside

    def distance(self, points, n=8192):
        """Approximate distance from points to the curve (dense sampling)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        poly = self.polygon(n)
        out = np.empty(len(pts))
        for start in range(0, len(pts), 512):
            chunk = pts[start:start + 512]
            d = chunk[:, None, :] - poly[None, :, :]
            out[start:start + 512] = np.sqrt(np.min(np.einsum("ijk,ijk->ij", d, d), axis=1))
        return out


def _trig_radius(cos_coef, sin_coef, t):
    r = np.zeros_like(t, dtype=float)
    dr = np.zeros_like(r)
    ddr = np.zeros_like(r)
    for m, a in enumerate(cos_coef):
        r += a * np.cos(m * t)
        dr -= a * m * np.sin(m * t)
        ddr -= a * m * m * np.cos(m * t)
    for m, b in enumerate(sin_coef, start=1):
        r += b * np.sin(m * t)
        dr += b * m * np.cos(m * t)
        ddr -= b * m * m * np.sin(m * t)
    return r, dr, ddr


def curve_eval(curve, t):
    """Point, tangent ``x'(t)``, unit outward normal and speed ``|x'(t)|`` at ``t``."""
    t = np.asarray(t, dtype=float)
    x, dx, _ = curve.derivatives(t)
    speed = np.hypot(dx[..., 0], dx[..., 1])
    # counterclockwise curve: outward normal is the tangent rotated by -pi/2
    normal = np.stack([dx[..., 1], -dx[..., 0]], -1) / speed[..., None]
    return x, dx, normal, speed


@dataclass(frozen=True)
class Ring:
    """``n`` points on the circle of given radius over ``[theta0, theta1)``."""

    radius: float
    n: int
    aperture: tuple = (0.0, TWO_PI)

    def __post_init__(self):
        object.__setattr__(self, "aperture", tuple(float(a) for a in self.aperture))
        if not self.radius > 0:
            raise ConfigurationError("ring radius must be positive")
        if int(self.n) != self.n or self.n < 1:
            raise ConfigurationError("ring point count must be a positive integer")
        object.__setattr__(self, "n", int(self.n))
        th0, th1 = self.aperture
        if not th1 > th0:
            raise ConfigurationError("ring aperture requires theta1 > theta0")
        if th1 - th0 > TWO_PI + 1e-12:
            raise ConfigurationError("ring aperture cannot exceed 2*pi")

    @property
    def angles(self):
        th0, th1 = self.aperture
        return th0 + np.arange(self.n) * (th1 - th0) / self.n

    @property
    def weight(self):
        """Trapezoidal arc-length weight per node."""
        th0, th1 = self.aperture
        return self.radius * (th1 - th0) / self.n

    @property
    def full_aperture(self):
        return abs(self.aperture[1] - self.aperture[0] - TWO_PI) < 1e-12


def ring_points(ring):
    th = ring.angles
    return ring.radius * np.stack([np.cos(th), np.sin(th)], -1)


@dataclass(frozen=True)
class SamplingGrid:
    """Endpoint-inclusive rectangular lattice, enumerated row-major (y outer)."""

    bbox: tuple
    nx: int
    ny: int = field(default=None)

    def __post_init__(self):
        if self.ny is None:
            object.__setattr__(self, "ny", self.nx)
        object.__setattr__(self, "bbox", tuple(float(b) for b in self.bbox))
        if len(self.bbox) != 4:
            raise ConfigurationError("bbox must be (xmin, xmax, ymin, ymax)")
        xmin, xmax, ymin, ymax = self.bbox
        if not (xmax > xmin and ymax > ymin):
            raise ConfigurationError("bbox must have xmax > xmin and ymax > ymin")
        if self.nx < 2 or self.ny < 2:
            raise ConfigurationError("sampling grid needs at least 2 points per axis")

    @property
    def x(self):
        return np.linspace(self.bbox[0], self.bbox[1], self.nx)

    @property
    def y(self):
        return np.linspace(self.bbox[2], self.bbox[3], self.ny)

    @property
    def spacing(self):
        xmin, xmax, ymin, ymax = self.bbox
        return (xmax - xmin) / (self.nx - 1), (ymax - ymin) / (self.ny - 1)

    @property
    def shape(self):
        return (self.ny, self.nx)


def grid_points(grid):
    xx, yy = np.meshgrid(grid.x, grid.y)
    return np.stack([xx.ravel(), yy.ravel()], -1)
