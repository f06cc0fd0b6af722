"""Phaseless measurement synthesis, noise model and dataset persistence."""

from dataclasses import dataclass, field, replace
import logging
import math

import numpy as np

from .exceptions import ConfigurationError, DatasetParseError
from .forward import Discretization, solver_for
from .geometry import Ring, ring_points

logger = logging.getLogger(__name__)

__all__ = [
    "AcquisitionGeometry",
    "PhaselessDataset",
    "synthesize",
    "add_noise",
    "suggest_sigma",
    "write_dataset",
    "read_dataset",
    "FORMAT_HEADER",
]

FORMAT_HEADER = "COINV-DATASET v1"
_DATASET_IDS = {"m0": 0, "m1": 1, "m2": 2}


@dataclass(frozen=True)
class AcquisitionGeometry:
    """Receiver ring ``Gamma_R``, reference-source ring ``Gamma_rho`` and scaling ``sigma``."""

    receivers: Ring
    references: Ring
    sigma: float = 1.0

    def __post_init__(self):
        if not self.receivers.radius > self.references.radius:
            raise ConfigurationError("receiver radius R must exceed reference radius rho")
        if not (math.isfinite(self.sigma) and self.sigma >= 1.0):
            raise ConfigurationError("scaling factor sigma must satisfy sigma >= 1")

    @property
    def receiver_points(self):
        return ring_points(self.receivers)

    @property
    def reference_points(self):
        return ring_points(self.references)

    def check_scene(self, scene):
        rho = self.references.radius
        for o in scene.obstacles:
            if np.max(np.hypot(*o.curve.polygon(1024).T)) >= rho:
                raise ConfigurationError("every obstacle must lie strictly inside the reference ring")
        for s in scene.sources:
            if math.hypot(*s) >= rho:
                raise ConfigurationError(f"source {s} must lie strictly inside the reference ring")
        if len(scene.sources) == 0:
            raise ConfigurationError("scene has no excitation sources")


@dataclass(frozen=True, eq=False)
class PhaselessDataset:
    """The three modulus data sets ``|u(x;P)|``, ``|u(x;P,sigma z)|``, ``|u(x;P,2 sigma z)|``.

    ``m0`` has one entry per receiver; ``m1`` and ``m2`` are indexed
    ``[receiver, reference source]``.
    """

    geometry: AcquisitionGeometry
    k: float
    m0: np.ndarray = field(repr=False)
    m1: np.ndarray = field(repr=False)
    m2: np.ndarray = field(repr=False)
    noise_delta: float = 0.0
    noise_seed: int = 0

    def __post_init__(self):
        n_rx, n_ref = self.geometry.receivers.n, self.geometry.references.n
        for name, arr, shape in (
            ("m0", self.m0, (n_rx,)),
            ("m1", self.m1, (n_rx, n_ref)),
            ("m2", self.m2, (n_rx, n_ref)),
        ):
            arr = np.asarray(arr, dtype=float)
            if arr.shape != shape:
                raise ConfigurationError(f"{name} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)) or np.any(arr < 0):
                raise ConfigurationError(f"{name} entries must be finite and nonnegative")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def sigma(self):
        return self.geometry.sigma

    @property
    def shape(self):
        return self.m1.shape

    def equals(self, other):
        return (
            self.geometry == other.geometry
            and self.k == other.k
            and self.noise_delta == other.noise_delta
            and self.noise_seed == other.noise_seed
            and all(np.array_equal(getattr(self, m), getattr(other, m)) for m in ("m0", "m1", "m2"))
        )


def synthesize(scene, geom, disc=None, return_fields=False):
    """Noiseless phaseless data for ``scene`` observed with ``geom``.

    One forward solve per distinct point source (the ``N`` excitation
    sources plus every reference source); the superposed fields are then
    combined by linearity. With ``return_fields`` the phased fields
    ``u(x;P)`` and ``u(x;z)`` are returned as well (for validation only).
    """
    geom.check_scene(scene)
    if disc is None:
        disc = Discretization.for_scene(scene)
    solver = solver_for(scene, disc)
    before = solver.n_solves
    rx = geom.receiver_points
    sources = np.asarray(scene.sources)
    refs = geom.reference_points
    u_p = solver.total_fields(rx, sources).sum(axis=1)
    u_ref = solver.total_fields(rx, refs)
    n_used = solver.n_solves - before
    logger.info("synthesize: %d forward solves (%d sources + %d references)", n_used, len(sources), len(refs))
    s = geom.sigma
    ds = PhaselessDataset(
        geometry=geom,
        k=scene.k,
        m0=np.abs(u_p),
        m1=np.abs(u_p[:, None] + s * u_ref),
        m2=np.abs(u_p[:, None] + 2.0 * s * u_ref),
    )
    if return_fields:
        return ds, u_p, u_ref
    return ds


def _uniform_pm1(seed, dataset_id, rows, cols):
    # one stream per (seed, dataset, row): entry (i, j) depends only on (seed, dataset, i, j)
    out = np.empty((rows, cols))
    for i in range(rows):
        rng = np.random.default_rng([int(seed), dataset_id, i])
        out[i] = rng.uniform(-1.0, 1.0, cols)
    return out


def add_noise(ds, delta, seed):
    """Multiplicative uniform noise ``m <- m (1 + delta r)``, ``r ~ U[-1, 1]`` per entry."""
    if not (0.0 <= delta < 1.0):
        raise ConfigurationError("noise level delta must lie in [0, 1)")
    if delta == 0.0:
        return replace(ds, noise_delta=0.0, noise_seed=int(seed))
    n_rx, n_ref = ds.shape
    m0 = ds.m0 * (1.0 + delta * _uniform_pm1(seed, _DATASET_IDS["m0"], n_rx, 1)[:, 0])
    m1 = ds.m1 * (1.0 + delta * _uniform_pm1(seed, _DATASET_IDS["m1"], n_rx, n_ref))
    m2 = ds.m2 * (1.0 + delta * _uniform_pm1(seed, _DATASET_IDS["m2"], n_rx, n_ref))
    return replace(ds, m0=m0, m1=m1, m2=m2, noise_delta=float(delta), noise_seed=int(seed))


def suggest_sigma(ds):
    """Report ``||u(.; sigma z)||_inf / ||u(.; P)||_inf`` and the sigma that would make it 1.

    Diagnostic only; the dataset's sigma is never changed.
    """
    from .inversion import recover_modulus

    mod, _ = recover_modulus(ds)
    ref_peak = float(np.max(mod))
    p_peak = float(np.max(ds.m0))
    ratio = ds.sigma * ref_peak / p_peak if p_peak > 0 else math.inf
    suggested = p_peak / ref_peak if ref_peak > 0 else math.inf
    return ratio, suggested


def _fmt(v):
    return format(float(v), ".17g")


def write_dataset(ds, path):
    g = ds.geometry
    rx, ref = g.receivers, g.references
    lines = [
        FORMAT_HEADER,
        f"k {_fmt(ds.k)}  sigma {_fmt(g.sigma)}  delta {_fmt(ds.noise_delta)}  seed {int(ds.noise_seed)}",
        f"receivers {rx.n} radius {_fmt(rx.radius)} aperture {_fmt(rx.aperture[0])} {_fmt(rx.aperture[1])}",
        f"references {ref.n} radius {_fmt(ref.radius)} aperture {_fmt(ref.aperture[0])} {_fmt(ref.aperture[1])}",
        "M0",
    ]
    lines.extend(_fmt(v) for v in ds.m0)
    for name, mat in (("M1", ds.m1), ("M2", ds.m2)):
        lines.append(name)
        lines.extend(" ".join(_fmt(v) for v in row) for row in mat)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _keyed(tokens, keys, lineno):
    """Parse ``key value key value ...`` with the expected keys in order."""
    if len(tokens) != 2 * len(keys) or [tokens[2 * i] for i in range(len(keys))] != list(keys):
        raise DatasetParseError(f"expected fields {' '.join(keys)}", line=lineno)
    return [tokens[2 * i + 1] for i in range(len(keys))]


def _real(tok, lineno, name):
    try:
        v = float(tok)
    except ValueError:
        raise DatasetParseError(f"not a real number: {tok!r}", line=lineno, field=name) from None
    if not math.isfinite(v):
        raise DatasetParseError(f"non-finite value {tok!r}", line=lineno, field=name)
    return v


def _int(tok, lineno, name):
    try:
        return int(tok)
    except ValueError:
        raise DatasetParseError(f"not an integer: {tok!r}", line=lineno, field=name) from None


def _ring_line(tokens, label, lineno):
    if len(tokens) != 7 or tokens[0] != label or tokens[2] != "radius" or tokens[4] != "aperture":
        raise DatasetParseError(f"expected '{label} <n> radius <r> aperture <t0> <t1>'", line=lineno)
    n = _int(tokens[1], lineno, label)
    r = _real(tokens[3], lineno, "radius")
    a = (_real(tokens[5], lineno, "aperture"), _real(tokens[6], lineno, "aperture"))
    try:
        return Ring(r, n, a)
    except ConfigurationError as exc:
        raise DatasetParseError(str(exc), line=lineno, field=label) from None


def read_dataset(path):
    with open(path, encoding="ascii") as fh:
        raw = fh.read().splitlines()
    if not raw or raw[0].strip() != FORMAT_HEADER:
        raise DatasetParseError(f"missing version header {FORMAT_HEADER!r}", line=1)
    if len(raw) < 5:
        raise DatasetParseError("truncated header", line=len(raw))
    k, sigma, delta, seed = _keyed(raw[1].split(), ("k", "sigma", "delta", "seed"), 2)
    k, sigma, delta = _real(k, 2, "k"), _real(sigma, 2, "sigma"), _real(delta, 2, "delta")
    seed = _int(seed, 2, "seed")
    rx = _ring_line(raw[2].split(), "receivers", 3)
    ref = _ring_line(raw[3].split(), "references", 4)
    pos = 4

    def block(name, ncols):
        nonlocal pos
        if pos >= len(raw) or raw[pos].strip() != name:
            raise DatasetParseError(f"expected section marker {name}", line=pos + 1)
        pos += 1
        rows = []
        for i in range(rx.n):
            if pos >= len(raw):
                raise DatasetParseError(f"{name}: expected {rx.n} rows, file ended", line=pos + 1, field=name)
            toks = raw[pos].split()
            if len(toks) != ncols:
                raise DatasetParseError(
                    f"{name} row {i}: expected {ncols} values, found {len(toks)}", line=pos + 1, field=name
                )
            rows.append([_real(t, pos + 1, name) for t in toks])
            pos += 1
        return np.array(rows, dtype=float)

    m0 = block("M0", 1)[:, 0]
    m1 = block("M1", ref.n)
    m2 = block("M2", ref.n)
    trailing = [ln for ln in raw[pos:] if ln.strip()]
    if trailing:
        raise DatasetParseError("unexpected content after M2 block", line=pos + 1)
    try:
        geom = AcquisitionGeometry(rx, ref, sigma)
        return PhaselessDataset(geom, k, m0, m1, m2, delta, seed)
    except ConfigurationError as exc:
        raise DatasetParseError(str(exc)) from None
