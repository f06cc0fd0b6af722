"""Exterior Helmholtz scattering by point sources via a Nystrom boundary integral method.

The scattered field is represented on every obstacle boundary by the
combined layer potential

    u^s(x) = int_{dD} [ dPhi(x,y)/dnu(y) - i*eta*Phi(x,y) ] phi(y) ds(y),   eta = k,

which is injective at every wavenumber for both the Dirichlet and the
Neumann/impedance traces. Dirichlet rows use the jump relation of the
double layer; Neumann/impedance rows need the hypersingular operator T,
evaluated through Maue's identity ``T = d/ds S d/ds + k^2 nu . S nu``
with trigonometric differentiation on the nodes.

Weakly singular self-interaction kernels are split as
``K(t, tau) = K1(t, tau) ln(4 sin^2((t - tau)/2)) + K2(t, tau)`` and
integrated with Kress' product quadrature on ``N`` equispaced nodes;
interactions between distinct obstacles are smooth and use the plain
trapezoidal rule.
"""

from dataclasses import dataclass, field
from functools import lru_cache
import logging
import math
import warnings

import numpy as np
import scipy.linalg as la
from scipy import special as _sp

from .exceptions import ConfigurationError, DomainError, SingularityError, SolverError
from .geometry import ParametricCurve, curve_eval
from .specialfn import fundamental_solution

logger = logging.getLogger(__name__)

__all__ = [
    "BoundaryCondition",
    "SOUND_SOFT",
    "SOUND_HARD",
    "Obstacle",
    "Scene",
    "Discretization",
    "ScatteringSolver",
    "BoundarySolution",
    "solve",
    "eval_scattered",
    "eval_total",
    "superpose",
    "circle_series_oracle",
    "boundary_residual",
]

EULER_GAMMA = 0.57721566490153286061
COND_LIMIT = 1e12
TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class BoundaryCondition:
    """``sound_soft`` (u = 0), ``sound_hard`` or ``impedance`` (du/dnu + i k lambda u = 0)."""

    kind: str = "sound_soft"
    lam: float = None

    def __post_init__(self):
        if self.kind not in ("sound_soft", "sound_hard", "impedance"):
            raise ConfigurationError(f"unknown boundary condition {self.kind!r}")
        if self.kind == "impedance":
            if self.lam is None or not math.isfinite(self.lam):
                raise ConfigurationError("impedance boundary condition requires a finite lambda")
            object.__setattr__(self, "lam", float(self.lam))
        elif self.lam is not None:
            raise ConfigurationError("lambda is only meaningful for the impedance condition")

    @property
    def impedance(self):
        """Impedance coefficient for Neumann-type rows (0 for sound-hard)."""
        return 0.0 if self.kind == "sound_hard" else self.lam

    @property
    def dirichlet(self):
        return self.kind == "sound_soft"


SOUND_SOFT = BoundaryCondition("sound_soft")
SOUND_HARD = BoundaryCondition("sound_hard")


@dataclass(frozen=True)
class Obstacle:
    curve: ParametricCurve
    bc: BoundaryCondition = SOUND_SOFT


@dataclass(frozen=True)
class Scene:
    """Wavenumber, obstacles and the excitation source points ``P``."""

    k: float
    obstacles: tuple = ()
    sources: tuple = ()

    def __post_init__(self):
        if not (self.k > 0 and math.isfinite(self.k)):
            raise ConfigurationError("wavenumber k must be positive and finite")
        obs = tuple(o if isinstance(o, Obstacle) else Obstacle(*o) for o in self.obstacles)
        object.__setattr__(self, "obstacles", obs)
        object.__setattr__(self, "sources", tuple(tuple(float(c) for c in s) for s in self.sources))
        for s in self.sources:
            if len(s) != 2:
                raise ConfigurationError("source points must have two coordinates")
        if len(set(self.sources)) != len(self.sources):
            raise ConfigurationError("source points must be mutually distinct")
        for i, a in enumerate(obs):
            for b in obs[i + 1:]:
                if np.any(a.curve.contains(b.curve.polygon(512))) or np.any(
                    b.curve.contains(a.curve.polygon(512))
                ):
                    raise ConfigurationError("obstacles must be pairwise disjoint")
        if self.sources:
            bad = self.inside_mask(np.asarray(self.sources))
            if np.any(bad):
                raise ConfigurationError(
                    f"source {self.sources[int(np.argmax(bad))]} lies inside an obstacle"
                )

    def inside_mask(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        mask = np.zeros(len(pts), dtype=bool)
        for o in self.obstacles:
            mask |= o.curve.contains(pts)
        return mask

    def with_sources(self, sources):
        return Scene(self.k, self.obstacles, tuple(map(tuple, sources)))


def default_nodes(curve, k, ppw=10.0, min_nodes=128):
    """``max(min_nodes, ceil(ppw * k * L / 2pi))`` rounded up to even."""
    n = max(int(min_nodes), int(math.ceil(ppw * k * curve.length() / TWO_PI)))
    return n + (n % 2)


@dataclass(frozen=True)
class Discretization:
    """Even node counts per obstacle."""

    nodes: tuple

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(int(n) for n in self.nodes))
        for n in self.nodes:
            if n < 4 or n % 2:
                raise ConfigurationError(f"node count must be even and >= 4, got {n}")

    @classmethod
    def for_scene(cls, scene, n_b=None, ppw=10.0, min_nodes=128):
        """Default resolution, or a fixed ``n_b`` (int or per-obstacle sequence)."""
        if n_b is None:
            return cls(tuple(default_nodes(o.curve, scene.k, ppw, min_nodes) for o in scene.obstacles))
        if np.isscalar(n_b):
            return cls((int(n_b),) * len(scene.obstacles))
        return cls(tuple(n_b))


class _Panel:
    """Nodes and geometric data of one discretized boundary."""

    def __init__(self, curve, n):
        self.curve = curve
        self.n = n
        self.h = TWO_PI / n
        self.t = np.arange(n) * self.h
        self.x, self.dx, self.ddx = curve.derivatives(self.t)
        self.speed = np.hypot(self.dx[:, 0], self.dx[:, 1])
        # unnormalized outward normal (dx2, -dx1) = nu * speed
        self.nvec = np.stack([self.dx[:, 1], -self.dx[:, 0]], -1)
        self.nu = self.nvec / self.speed[:, None]
        self.tau = self.dx / self.speed[:, None]
        self.curvature_term = (self.dx[:, 0] * self.ddx[:, 1] - self.dx[:, 1] * self.ddx[:, 0]) / self.speed**2
        self.dmat = _fourier_diff_matrix(n)


def _fourier_diff_matrix(n):
    """Spectral differentiation on ``n`` (even) equispaced periodic nodes, Nyquist mode dropped."""
    j = np.arange(n)
    d = j[:, None] - j[None, :]
    with np.errstate(divide="ignore"):
        out = 0.5 * (-1.0) ** d / np.tan(d * np.pi / n)
    out[d == 0] = 0.0
    return out


def _kress_weights(dt, n):
    """Weights ``R_j(t)`` of ``int ln(4 sin^2((t-tau)/2)) f(tau) dtau`` on ``n`` nodes; ``dt = t - t_j``."""
    half = n // 2
    dt = np.asarray(dt, dtype=float)
    w = np.zeros_like(dt)
    for m in range(1, half):
        w += np.cos(m * dt) / m
    return -(TWO_PI / half) * w - (np.pi / half**2) * np.cos(half * dt)


def _kress_circulant(n):
    """``R_j(t_i)`` on the nodes themselves; depends only on ``(i - j) mod n``."""
    return la.circulant(_kress_weights(np.arange(n) * TWO_PI / n, n))


def _log_sin2(dt):
    return np.log(4.0 * np.sin(0.5 * dt) ** 2)


def _self_operators(panel, k, t_eval=None):
    """Single, double, adjoint-double and Maue operators of a panel on itself.

    Returns matrices acting on nodal density values. Targets are the panel
    nodes (``t_eval is None``) or curve points at off-node parameters.
    """
    src = panel
    on_nodes = t_eval is None
    if on_nodes:
        tt = src.t
        x, nu_t, speed_t = src.x, src.nu, src.speed
    else:
        tt = np.asarray(t_eval, dtype=float)
        x, _, nu_t, speed_t = curve_eval(src.curve, tt)
    dt = tt[:, None] - src.t[None, :]
    R = _kress_circulant(src.n) if on_nodes else _kress_weights(dt, src.n)
    diff = x[:, None, :] - src.x[None, :, :]
    r = np.hypot(diff[..., 0], diff[..., 1])
    diag = None
    if on_nodes:
        diag = np.diag_indices(src.n)
        r[diag] = 1.0
        logs = np.zeros_like(r)
        off = ~np.eye(src.n, dtype=bool)
        logs[off] = _log_sin2(dt[off])
    else:
        if np.any(r == 0):
            raise SingularityError("off-node trace evaluation hit a node exactly")
        logs = _log_sin2(dt)
    kr = k * r
    j0, y0 = _sp.j0(kr), _sp.y0(kr)
    j1, y1 = _sp.j1(kr), _sp.y1(kr)
    phi = 0.25j * (j0 + 1j * y0)
    phi_log = -j0 / (4.0 * np.pi)
    if on_nodes:
        phi_log[diag] = -1.0 / (4.0 * np.pi)
    # (ik/4) H1(kr) / r and its log coefficient
    dphi = 0.25j * k * (j1 + 1j * y1) / r
    dphi_log = -k * j1 / (4.0 * np.pi * r)

    def kress(kfull, klog, diag_value=None):
        k2 = kfull - klog * logs
        if on_nodes:
            k2[diag] = diag_value
        return R * klog + src.h * k2

    s_j = src.speed[None, :]
    phi_diag = None
    if on_nodes:
        phi_diag = 0.25j - EULER_GAMMA / TWO_PI - np.log(0.5 * k * src.speed) / TWO_PI

    # A0: int Phi(x(t), x(tau)) f(tau) dtau (no speed factor)
    A0 = kress(phi, phi_log, phi_diag)
    S = kress(phi * s_j, phi_log * s_j, None if phi_diag is None else phi_diag * src.speed)

    n_dot_src = np.einsum("ijk,jk->ij", diff, src.nvec)
    dl_diag = None if not on_nodes else -src.curvature_term / (4.0 * np.pi)
    D = kress(dphi * n_dot_src, dphi_log * n_dot_src, dl_diag)

    nu_dot_tgt = np.einsum("ijk,ik->ij", diff, nu_t)
    D_adj = kress(-dphi * nu_dot_tgt * s_j, -dphi_log * nu_dot_tgt * s_j, dl_diag)

    nn = nu_t @ src.nu.T
    Snn = kress(phi * s_j * nn, phi_log * s_j * nn, None if phi_diag is None else phi_diag * src.speed)
    return {"A0": A0, "S": S, "D": D, "Dp": D_adj, "Snn": Snn, "speed_t": speed_t}


def _cross_operators(tgt_x, tgt_nu, tgt_tau, src, k):
    """Smooth (trapezoidal) operators from panel ``src`` onto well-separated targets."""
    diff = tgt_x[:, None, :] - src.x[None, :, :]
    r = np.hypot(diff[..., 0], diff[..., 1])
    kr = k * r
    h0 = _sp.j0(kr) + 1j * _sp.y0(kr)
    h1 = _sp.j1(kr) + 1j * _sp.y1(kr)
    phi = 0.25j * h0
    grad_x = (-0.25j * k * h1 / r)[..., None] * diff
    w = src.h * src.speed[None, :]
    ops = {
        "S": phi * w,
        "D": -np.einsum("ijk,jk->ij", grad_x, src.nu) * w,
    }
    if tgt_nu is not None:
        ops["Dp"] = np.einsum("ijk,ik->ij", grad_x, tgt_nu) * w
        tan_grad = np.einsum("ijk,ik->ij", grad_x, tgt_tau)
        ops["T"] = (tan_grad * src.h) @ src.dmat + k * k * (tgt_nu @ src.nu.T) * phi * w
    return ops


class ScatteringSolver:
    """Assembled and LU-factorized Nystrom system for one scene.

    Immutable after construction apart from the ``n_solves`` counter; every
    new source only changes the right-hand side.
    """

    def __init__(self, scene, disc=None):
        if disc is None:
            disc = Discretization.for_scene(scene)
        if len(disc.nodes) != len(scene.obstacles):
            raise ConfigurationError("discretization does not match the number of obstacles")
        self.scene = scene
        self.disc = disc
        self.k = scene.k
        self.eta = scene.k
        self.panels = [_Panel(o.curve, n) for o, n in zip(scene.obstacles, disc.nodes)]
        self.offsets = np.concatenate([[0], np.cumsum(disc.nodes)]).astype(int)
        self.n_solves = 0
        self.condition = 1.0
        self._lu = None
        if self.panels:
            self._factorize(self._assemble())

    def _row_block(self, a, b):
        ta, pb = self.panels[a], self.panels[b]
        bc = self.scene.obstacles[a].bc
        k, eta = self.k, self.eta
        if a == b:
            ops = _self_operators(pb, k)
            eye = np.eye(pb.n)
            T = (ops["A0"] @ pb.dmat)
            T = (pb.dmat @ T) / ta.speed[:, None] + k * k * ops["Snn"]
        else:
            ops = _cross_operators(ta.x, ta.nu, ta.tau, pb, k)
            eye = 0.0
            T = ops["T"]
        trace = 0.5 * eye + ops["D"] - 1j * eta * ops["S"]
        if bc.dirichlet:
            return trace
        normal = T + 0.5j * eta * eye - 1j * eta * ops["Dp"]
        return normal + 1j * k * bc.impedance * trace

    def _assemble(self):
        n = self.offsets[-1]
        A = np.empty((n, n), dtype=complex)
        for a in range(len(self.panels)):
            ra = slice(self.offsets[a], self.offsets[a + 1])
            for b in range(len(self.panels)):
                rb = slice(self.offsets[b], self.offsets[b + 1])
                A[ra, rb] = self._row_block(a, b)
        return A

    def _factorize(self, A):
        anorm = np.linalg.norm(A, 1)
        self._lu = la.lu_factor(A, check_finite=True)
        rcond, info = la.lapack.zgecon(self._lu[0], anorm, norm="1")
        self.condition = np.inf if rcond == 0 else 1.0 / rcond
        if not self.condition < COND_LIMIT:
            raise SolverError(
                f"boundary integral system is ill-conditioned (cond_1 ~ {self.condition:.3e}, "
                f"nodes {self.disc.nodes}, k = {self.k})",
                condition=self.condition,
            )
        logger.debug("factorized %d x %d system, cond ~ %.3e", A.shape[0], A.shape[1], self.condition)

    def _rhs(self, sources):
        cols = []
        for a, pa in enumerate(self.panels):
            bc = self.scene.obstacles[a].bc
            ui = fundamental_solution(self.k, pa.x[:, None, :], sources[None, :, :])
            if bc.dirichlet:
                cols.append(-ui)
            else:
                diff = pa.x[:, None, :] - sources[None, :, :]
                r = np.hypot(diff[..., 0], diff[..., 1])
                h1 = _sp.j1(self.k * r) + 1j * _sp.y1(self.k * r)
                dn = -0.25j * self.k * h1 / r * np.einsum("ijk,ik->ij", diff, pa.nu)
                cols.append(-(dn + 1j * self.k * bc.impedance * ui))
        return np.concatenate(cols, axis=0)

    def check_exterior(self, points, what="point"):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        bad = self.scene.inside_mask(pts)
        if np.any(bad):
            raise DomainError(f"{what} {tuple(pts[int(np.argmax(bad))])} lies inside an obstacle")
        return pts

    def densities(self, sources):
        """Solve for the layer densities of every source column; shape ``(n_total, m)``."""
        src = self.check_exterior(sources, "source")
        self.n_solves += len(src)
        if not self.panels:
            return np.zeros((0, len(src)), dtype=complex)
        dens = la.lu_solve(self._lu, self._rhs(src))
        if not np.all(np.isfinite(dens)):
            raise SolverError("non-finite layer density", condition=self.condition)
        return dens

    def scattered_matrix(self, points):
        """Matrix mapping stacked densities to ``u^s`` at exterior points."""
        pts = self.check_exterior(points, "evaluation point")
        blocks = []
        for p in self.panels:
            ops = _cross_operators(pts, None, None, p, self.k)
            blocks.append(ops["D"] - 1j * self.eta * ops["S"])
        if not blocks:
            return np.zeros((len(pts), 0), dtype=complex)
        return np.concatenate(blocks, axis=1)

    def total_fields(self, points, sources):
        """``u(x_i; z_j)`` for every evaluation point and source; shape ``(n_points, n_sources)``."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        src = np.atleast_2d(np.asarray(sources, dtype=float))
        dens = self.densities(src)
        us = self.scattered_matrix(pts) @ dens
        return fundamental_solution(self.k, pts[:, None, :], src[None, :, :]) + us

    def solve(self, z):
        z = np.asarray(z, dtype=float)
        dens = self.densities(z[None, :])[:, 0]
        return BoundarySolution(self, tuple(z), dens)


@lru_cache(maxsize=8)
def _cached_solver(scene, disc):
    return ScatteringSolver(scene, disc)


def solver_for(scene, disc=None):
    """Shared factorization for ``(scene, disc)``; built once and reused."""
    if disc is None:
        disc = Discretization.for_scene(scene)
    return _cached_solver(scene, disc)


@dataclass(frozen=True)
class BoundarySolution:
    solver: ScatteringSolver
    z: tuple
    density: np.ndarray = field(repr=False)

    @property
    def scene(self):
        return self.solver.scene

    def split(self):
        off = self.solver.offsets
        return [self.density[off[i]:off[i + 1]] for i in range(len(off) - 1)]


def solve(scene, disc, z):
    """Layer densities for the point source at ``z`` (factorization is cached per scene)."""
    return solver_for(scene, disc).solve(z)


def eval_scattered(sol, x):
    """Scattered field ``u^s(x; z)``; scalar for one point, array for ``(m, 2)`` input."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    us = sol.solver.scattered_matrix(x) @ sol.density
    return us[0] if single else us


def eval_total(sol, x):
    """Total field ``u^i + u^s`` with ``u^i = Phi(x, z)``."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    ui = fundamental_solution(sol.solver.k, pts, np.asarray(sol.z))
    u = ui + np.atleast_1d(eval_scattered(sol, pts))
    return u[0] if single else u


def superpose(scene, disc, extra, x):
    """``u(x; P) + t u(x; z)``; ``extra`` is ``None`` or ``(t, z)``."""
    solver = solver_for(scene, disc)
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    if scene.sources:
        out = solver.total_fields(pts, np.asarray(scene.sources)).sum(axis=1)
    else:
        out = np.zeros(len(pts), dtype=complex)
    if extra is not None:
        t, z = extra
        if t != 0:
            out = out + t * solver.total_fields(pts, np.asarray(z, dtype=float)[None, :])[:, 0]
    return out[0] if single else out


def boundary_residual(sol, n_check=64):
    """Max boundary-condition residual ``|B u|`` per obstacle at off-node parameters.

    The density is trigonometrically interpolated and the on-surface operators
    are evaluated with product quadrature at parameters shifted half a node
    spacing from the collocation points (so the check is not the collocation
    equation itself).
    """
    solver = sol.solver
    k, eta = solver.k, solver.eta
    z = np.asarray(sol.z, dtype=float)
    dens = sol.split()
    out = []
    for a, pa in enumerate(solver.panels):
        bc = solver.scene.obstacles[a].bc
        idx = np.round(np.linspace(0, pa.n, n_check, endpoint=False)).astype(int)
        tt = pa.t[idx] + 0.5 * pa.h
        x, dx, nu, speed = curve_eval(pa.curve, tt)
        tau = dx / speed[:, None]
        ops = _self_operators(pa, k, t_eval=tt)
        psi_t = _trig_interp(dens[a], tt)
        trace = 0.5 * psi_t + (ops["D"] - 1j * eta * ops["S"]) @ dens[a]
        g = _self_operators(pa, k)["A0"] @ (pa.dmat @ dens[a])
        T_t = _trig_interp(g, tt, derivative=True) / speed + k * k * ops["Snn"] @ dens[a]
        normal = T_t + 0.5j * eta * psi_t - 1j * eta * ops["Dp"] @ dens[a]
        for b, pb in enumerate(solver.panels):
            if b == a:
                continue
            c = _cross_operators(x, nu, tau, pb, k)
            trace = trace + (c["D"] - 1j * eta * c["S"]) @ dens[b]
            normal = normal + (c["T"] - 1j * eta * c["Dp"]) @ dens[b]
        diff = x - z
        r = np.hypot(diff[:, 0], diff[:, 1])
        ui = fundamental_solution(k, x, z)
        dui = -0.25j * k * (_sp.j1(k * r) + 1j * _sp.y1(k * r)) / r * np.einsum("ik,ik->i", diff, nu)
        if bc.dirichlet:
            res = trace + ui
        else:
            res = normal + dui + 1j * k * bc.impedance * (trace + ui)
        out.append(float(np.max(np.abs(res))))
    return out


def _trig_interp(values, t, derivative=False):
    """Evaluate the trigonometric interpolant (or its derivative) of nodal values at ``t``."""
    n = len(values)
    c = np.fft.fft(values) / n
    m = np.fft.fftfreq(n, 1.0 / n)
    c[n // 2] = 0.5 * c[n // 2]
    coef = np.concatenate([c, [c[n // 2]]])
    modes = np.concatenate([m, [n // 2]])
    basis = np.exp(1j * np.multiply.outer(t, modes))
    if derivative:
        basis = basis * (1j * modes)
    return basis @ coef


def circle_series_oracle(a, center, k, z, x, n_terms=None, bc=SOUND_SOFT, tol=1e-12):
    """Scattered field of a disk via the Fourier-Bessel (addition theorem) series.

    ``u^s(x; z) = -(i/4) sum_n c_n H_n(k r_z) H_n(k r_x) exp(i n (th_x - th_z))``
    with ``c_n = J_n(ka)/H_n(ka)`` for the sound-soft disk and
    ``(J_n'(ka) + i lam J_n(ka)) / (H_n'(ka) + i lam H_n(ka))`` otherwise.
    Orders up to ``n_terms`` are evaluated with :func:`scipy.special.jv` / ``hankel1``.
    """
    center = np.asarray(center, dtype=float)
    xr = np.atleast_2d(np.asarray(x, dtype=float)) - center
    zr = np.asarray(z, dtype=float) - center
    rx, thx = np.hypot(xr[:, 0], xr[:, 1]), np.arctan2(xr[:, 1], xr[:, 0])
    rz, thz = math.hypot(*zr), math.atan2(zr[1], zr[0])
    if np.any(rx <= a) or rz <= a:
        raise DomainError("circle oracle requires source and evaluation points outside the disk")
    if n_terms is None:
        n_terms = int(math.ceil(k * a)) + 30
    n = np.arange(0, n_terms + 1)
    ka = k * a
    if bc.dirichlet:
        c = _sp.jv(n, ka) / _sp.hankel1(n, ka)
    else:
        lam = bc.impedance
        c = (_sp.jvp(n, ka) + 1j * lam * _sp.jv(n, ka)) / (_sp.h1vp(n, ka) + 1j * lam * _sp.hankel1(n, ka))
    hz = _sp.hankel1(n, k * rz)
    hx = _sp.hankel1(n[None, :], k * rx[:, None])
    terms = c * hz * hx * np.cos(np.multiply.outer(thx - thz, n))
    terms[:, 1:] *= 2.0  # orders +n and -n coincide
    tail = np.max(np.abs(terms[:, -1]))
    scale = max(np.max(np.abs(terms.sum(axis=1))), 1e-300)
    if tail > tol * scale:
        warnings.warn(
            f"circle series may not have converged (last term {tail:.2e} relative {tail / scale:.2e})",
            RuntimeWarning,
            stacklevel=2,
        )
    us = -0.25j * terms.sum(axis=1)
    return us[0] if np.asarray(x).ndim == 1 else us
