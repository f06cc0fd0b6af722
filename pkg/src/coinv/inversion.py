"""Decoupling of the phaseless data and the two direct imaging indicators.

From the three modulus data sets with weights ``0, sigma, 2 sigma`` the
reference field modulus ``|u(x;z)|`` and the cross term
``Theta = 2 Re(u(x;P) conj(u(x;z)))`` are recovered algebraically. The
obstacle is then imaged by a reverse-time-migration functional and the
sources by a direct sampling functional, both evaluated as trapezoidal
double sums over the receiver and reference rings.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
import logging
import math

import numpy as np
from scipy import special as _sp

from .exceptions import ConfigurationError, NumericError
from .geometry import SamplingGrid, grid_points

logger = logging.getLogger(__name__)

__all__ = [
    "IndicatorGrid",
    "PeakSet",
    "recover_modulus",
    "theta",
    "obstacle_indicator_at",
    "scattering_signal",
    "source_indicator_at",
    "indicator_obstacle",
    "indicator_source",
    "normalize",
    "extract_peaks",
    "write_indicator_csv",
    "write_indicator_pgm",
    "write_peaks_csv",
]

CHUNK = 2048
KINDS = ("obstacle_ID", "source_IP")


@dataclass(frozen=True, eq=False)
class IndicatorGrid:
    grid: SamplingGrid
    values: np.ndarray = field(repr=False)
    kind: str
    normalized: bool = False
    degenerate: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"indicator kind must be one of {KINDS}")
        v = np.asarray(self.values, dtype=float).reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            raise NumericError("indicator values must be finite")
        object.__setattr__(self, "values", v)

    def argmax_point(self):
        iy, ix = np.unravel_index(np.argmax(self.values), self.values.shape)
        return np.array([self.grid.x[ix], self.grid.y[iy]])


@dataclass(frozen=True)
class PeakSet:
    """Local maxima sorted by descending indicator value."""

    points: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    tau: float
    min_sep: float

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(zip(map(tuple, self.points), self.values))


def _moduli(ds):
    return (
        np.asarray(ds.m0, dtype=float)[:, None],
        np.asarray(ds.m1, dtype=float),
        np.asarray(ds.m2, dtype=float),
    )


def recover_modulus(ds):
    """``|u(x_i; z_j)|`` from the three data sets, plus the number of clamped entries.

    Radicands made negative by noise are clamped to zero.
    """
    sigma = ds.sigma
    if not sigma > 0:
        raise ConfigurationError("sigma must be positive")
    m0, m1, m2 = _moduli(ds)
    rad = m2**2 - 2.0 * m1**2 + m0**2
    neg = rad < 0
    n_clamped = int(np.count_nonzero(neg))
    if n_clamped:
        logger.debug("recover_modulus: clamped %d negative radicands", n_clamped)
    rad = np.where(neg, 0.0, rad)
    return np.sqrt(rad) / (math.sqrt(2.0) * sigma), n_clamped


def theta(ds):
    """Cross term ``(2 m1^2 - m2^2/2 - 3 m0^2/2) / sigma`` for every receiver/reference pair."""
    sigma = ds.sigma
    if not sigma > 0:
        raise ConfigurationError("sigma must be positive")
    m0, m1, m2 = _moduli(ds)
    return (2.0 * m1**2 - 0.5 * m2**2 - 1.5 * m0**2) / sigma


def _phi(k, r):
    return 0.25j * (_sp.j0(k * r) + 1j * _sp.y0(k * r))


def _dist(a, b):
    d = a[:, None, :] - b[None, :, :]
    return np.hypot(d[..., 0], d[..., 1])


def _map_chunks(fn, points, n_jobs):
    starts = range(0, len(points), CHUNK)
    chunks = [points[s:s + CHUNK] for s in starts]
    if n_jobs is None or n_jobs == 1 or len(chunks) == 1:
        parts = [fn(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            parts = list(pool.map(fn, chunks))
    return np.concatenate(parts) if parts else np.zeros(0)


def obstacle_weights(ds, modulus=None):
    """Weighted migration data ``w_x w_z Upsilon(x, z)``, shape ``(n_rx, n_ref)``."""
    g = ds.geometry
    if modulus is None:
        modulus, _ = recover_modulus(ds)
    x, z = g.receiver_points, g.reference_points
    ui = _phi(ds.k, _dist(x, z))
    if np.any(np.abs(ui) < 1e-300):
        raise NumericError("incident field vanishes numerically; Upsilon undefined")
    upsilon = (modulus**2 - np.abs(ui) ** 2) / ui
    return upsilon * (g.receivers.weight * g.references.weight)


def scattering_signal(ds):
    """``max | |u(x;z)|^2 - |u^i(x;z)|^2 | / max |u^i|^2``; zero up to rounding in free space."""
    g = ds.geometry
    modulus, _ = recover_modulus(ds)
    inc = np.abs(_phi(ds.k, _dist(g.receiver_points, g.reference_points))) ** 2
    return float(np.max(np.abs(modulus**2 - inc)) / np.max(inc))


def obstacle_indicator_at(ds, points, n_jobs=None, weights=None):
    """Reverse time migration functional ``I_D`` at arbitrary points."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    g = ds.geometry
    k = ds.k
    W = obstacle_weights(ds) if weights is None else weights
    x, z = g.receiver_points, g.reference_points

    def chunk(y):
        phi_zy = _phi(k, _dist(y, z))        # (c, n_ref)
        phi_xy = _phi(k, _dist(y, x))        # (c, n_rx)
        acc = np.einsum("cx,cx->c", phi_xy, phi_zy @ W.T)
        return -k * k * acc.imag

    return _map_chunks(chunk, pts, n_jobs)


def source_weights(ds, cross=None):
    """Receiver-side aggregate ``A(x) = sum_z w_z exp(-ik|x-z|) |x-z|^(1/2) Theta(x,z)``."""
    g = ds.geometry
    th = theta(ds) if cross is None else cross
    x, z = g.receiver_points, g.reference_points
    r = _dist(x, z)
    a = (np.exp(-1j * ds.k * r) * np.sqrt(r) * th) @ np.full(len(z), g.references.weight)
    return a * g.receivers.weight


def source_indicator_at(ds, points, n_jobs=None, weights=None):
    """Direct sampling functional ``I_P`` at arbitrary points."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    g = ds.geometry
    A = source_weights(ds) if weights is None else weights
    x = g.receiver_points
    scale = 1.0 / (g.references.radius * math.sqrt(g.receivers.radius))

    def chunk(y):
        return scale * (np.exp(1j * ds.k * _dist(y, x)) @ A).real

    return _map_chunks(chunk, pts, n_jobs)


def indicator_obstacle(ds, grid, n_jobs=None):
    vals = obstacle_indicator_at(ds, grid_points(grid), n_jobs=n_jobs)
    return IndicatorGrid(grid, vals.reshape(grid.shape), "obstacle_ID")


def indicator_source(ds, grid, n_jobs=None):
    vals = source_indicator_at(ds, grid_points(grid), n_jobs=n_jobs)
    return IndicatorGrid(grid, vals.reshape(grid.shape), "source_IP")


def normalize(g):
    """Divide by the maximum absolute value; an all-zero grid is returned flagged and unchanged."""
    peak = float(np.max(np.abs(g.values)))
    if peak == 0.0:
        return replace(g, degenerate=True)
    return replace(g, values=g.values / peak, normalized=True, degenerate=False)


def _strict_local_max(v):
    padded = np.pad(v, 1, constant_values=-np.inf)
    ny, nx = v.shape
    mask = np.ones_like(v, dtype=bool)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dy == 0 and dx == 0:
                continue
            mask &= v > padded[1 + dy:1 + dy + ny, 1 + dx:1 + dx + nx]
    return mask


def extract_peaks(g, tau=0.5, min_sep=None, k=None):
    """Strict 8-neighbour local maxima above ``tau * max``, merged greedily by ``min_sep``.

    ``min_sep`` defaults to half a wavelength ``pi / k`` when ``k`` is given.
    """
    if min_sep is None:
        if k is None:
            raise ConfigurationError("extract_peaks needs min_sep or the wavenumber k")
        min_sep = math.pi / k
    v = g.values
    top = float(np.max(v))
    mask = _strict_local_max(v) & (v >= tau * top)
    iy, ix = np.nonzero(mask)
    order = np.argsort(-v[iy, ix], kind="stable")
    pts, vals = [], []
    for o in order:
        p = np.array([g.grid.x[ix[o]], g.grid.y[iy[o]]])
        if all(np.hypot(*(p - q)) >= min_sep for q in pts):
            pts.append(p)
            vals.append(float(v[iy[o], ix[o]]))
    return PeakSet(np.array(pts).reshape(-1, 2), np.array(vals), float(tau), float(min_sep))


def _fmt(v):
    return format(float(v), ".17g")


def write_indicator_csv(g, path):
    pts = grid_points(g.grid)
    with open(path, "w", newline="\n") as fh:
        fh.write("x,y,value\n")
        for (px, py), val in zip(pts, g.values.ravel()):
            fh.write(f"{_fmt(px)},{_fmt(py)},{_fmt(val)}\n")


def write_indicator_pgm(g, path):
    """16-bit binary PGM (top row = largest y) plus a ``.txt`` sidecar with the gray mapping."""
    v = g.values
    lo, hi = float(np.min(v)), float(np.max(v))
    span = hi - lo
    gray = np.zeros_like(v) if span == 0 else (v - lo) / span * 65535.0
    img = np.rint(gray).astype(">u2")[::-1]
    ny, nx = v.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{nx} {ny}\n65535\n".encode("ascii"))
        fh.write(img.tobytes())
    xmin, xmax, ymin, ymax = g.grid.bbox
    with open(str(path) + ".txt", "w", newline="\n") as fh:
        fh.write(f"kind {g.kind}\nnormalized {int(g.normalized)}\n")
        fh.write(f"value_min {_fmt(lo)}\nvalue_max {_fmt(hi)}\n")
        fh.write("mapping gray = round((value - value_min) / (value_max - value_min) * 65535)\n")
        fh.write(f"bbox {_fmt(xmin)} {_fmt(xmax)} {_fmt(ymin)} {_fmt(ymax)}\n")
        fh.write(f"size {nx} {ny}\norientation row0=ymax col0=xmin\n")


def write_peaks_csv(peaks, path):
    with open(path, "w", newline="\n") as fh:
        fh.write("x,y,value\n")
        for (px, py), val in peaks:
            fh.write(f"{_fmt(px)},{_fmt(py)},{_fmt(val)}\n")
