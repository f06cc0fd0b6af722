from dataclasses import replace
import math

from hypothesis import given, settings, strategies as st
import numpy as np
import pytest

from coinv.acquisition import AcquisitionGeometry, PhaselessDataset, synthesize
from coinv.exceptions import ConfigurationError
from coinv.forward import Discretization, Obstacle, Scene
from coinv.geometry import ParametricCurve, Ring, SamplingGrid, grid_points
from coinv.inversion import (
    IndicatorGrid,
    extract_peaks,
    indicator_obstacle,
    indicator_source,
    normalize,
    obstacle_indicator_at,
    recover_modulus,
    source_indicator_at,
    theta,
    write_indicator_csv,
    write_indicator_pgm,
    write_peaks_csv,
)

from _freespace import free_space_dataset

K = 4 * np.pi


def _one(m0, m1, m2, sigma=1.0):
    geom = AcquisitionGeometry(Ring(10.0, 1), Ring(9.0, 1), sigma)
    return PhaselessDataset(geom, 1.0, [m0], [[m1]], [[m2]])


def test_hand_example():
    up, uz = 3 + 4j, 1 - 2j
    ds = _one(abs(up), abs(up + uz), abs(up + 2 * uz))
    assert ds.m1[0, 0] == pytest.approx(math.sqrt(20))
    mod, n = recover_modulus(ds)
    assert mod[0, 0] == pytest.approx(math.sqrt(5), abs=1e-14) and n == 0
    assert theta(ds)[0, 0] == pytest.approx(-10.0, abs=1e-12)
    assert theta(ds)[0, 0] == pytest.approx(2 * (up * np.conj(uz)).real)


def test_zero_reference_field():
    ds = _one(5.0, 5.0, 5.0)
    assert recover_modulus(ds)[0][0, 0] == 0.0
    assert theta(ds)[0, 0] == 0.0


def test_clamp():
    mod, n = recover_modulus(_one(0.9, 1.0, 1.0))
    assert mod[0, 0] == 0.0 and n == 1


def test_sigma_invariance(example1):
    geom1 = AcquisitionGeometry(Ring(10.0, 32), Ring(9.0, 24), 1.0)
    geom2 = replace(geom1, sigma=2.0)
    disc = example1.discretization()
    t1 = theta(synthesize(example1.scene, geom1, disc))
    t2 = theta(synthesize(example1.scene, geom2, disc))
    assert np.max(np.abs(t1 - t2)) <= 1e-12


def test_identities_free_space():
    ds, u_p, u_z = free_space_dataset(K, [(3.0, 1.0), (-1.0, 2.0)], sigma=2.0)
    assert np.max(np.abs(recover_modulus(ds)[0] - np.abs(u_z))) <= 1e-12
    assert np.max(np.abs(theta(ds) - 2 * (u_p[:, None] * np.conj(u_z)).real)) <= 1e-10


def test_obstacle_indicator_vanishes_in_free_space():
    ds, _, _ = free_space_dataset(K, [(3.0, 1.0)])
    g = indicator_obstacle(ds, SamplingGrid((-2, 2, -2, 2), 40))
    assert np.max(np.abs(g.values)) <= 1e-12


def test_source_indicator_free_space_argmax():
    ds, _, _ = free_space_dataset(K, [(3.0, 1.0)])
    grid = SamplingGrid((-5, 5, -5, 5), 200)
    g = indicator_source(ds, grid)
    assert np.linalg.norm(g.argmax_point() - [3.0, 1.0]) <= 10 / 199
    assert np.array_equal(normalize(g).argmax_point(), g.argmax_point())


def _rotate(p):
    p = np.asarray(p, dtype=float)
    return np.stack([-p[..., 1], p[..., 0]], -1)


def test_obstacle_indicator_rotation_equivariance():
    geom = AcquisitionGeometry(Ring(10.0, 64), Ring(9.0, 64))
    star = ParametricCurve.make("trig-polynomial", cos=(1.0, 0.1, 0.15), sin=(0.05, 0.1))
    rot = ParametricCurve.make("trig-polynomial", cos=(1.0, 0.1, 0.15), sin=(0.05, 0.1), rotation=np.pi / 2)
    src = [(3.0, 1.0), (-2.0, 2.5)]
    a = Scene(K, (Obstacle(star),), src)
    b = Scene(K, (Obstacle(rot),), [tuple(_rotate(s)) for s in src])
    disc = Discretization((160,))
    pts = grid_points(SamplingGrid((-2, 2, -2, 2), 25))
    ia = obstacle_indicator_at(synthesize(a, geom, disc), pts)
    ib = obstacle_indicator_at(synthesize(b, geom, disc), _rotate(pts))
    assert np.max(np.abs(ia - ib)) <= 1e-10 * np.max(np.abs(ia))


def test_source_indicator_mirror_equivariance():
    geom = AcquisitionGeometry(Ring(10.0, 64), Ring(9.0, 64))
    cos, sin = (1.0, 0.1, 0.15), (0.05, 0.1)
    a = Scene(K, (Obstacle(ParametricCurve.make("trig-polynomial", cos=cos, sin=sin)),), [(3.0, 1.0)])
    neg = tuple(-s for s in sin)
    b = Scene(K, (Obstacle(ParametricCurve.make("trig-polynomial", cos=cos, sin=neg)),), [(3.0, -1.0)])
    disc = Discretization((160,))
    pts = grid_points(SamplingGrid((-5, 5, -5, 5), 25))
    mirror = pts * [1.0, -1.0]
    ia = source_indicator_at(synthesize(a, geom, disc), pts)
    ib = source_indicator_at(synthesize(b, geom, disc), mirror)
    assert np.max(np.abs(ia - ib)) <= 1e-10 * np.max(np.abs(ia))


def _bumps(centers, heights, n=101, width=0.2):
    grid = SamplingGrid((-2, 2, -2, 2), n)
    pts = grid_points(grid)
    v = sum(h * np.exp(-np.sum((pts - c) ** 2, axis=1) / width**2) for c, h in zip(centers, heights))
    return IndicatorGrid(grid, v.reshape(grid.shape), "source_IP")


def test_normalize():
    g = normalize(_bumps([(0.3, -0.2)], [2.5]))
    assert g.normalized and np.max(np.abs(g.values)) == 1.0
    zero = IndicatorGrid(SamplingGrid((0, 1, 0, 1), 3), np.zeros((3, 3)), "obstacle_ID")
    z = normalize(zero)
    assert z.degenerate and np.array_equal(z.values, zero.values)


def test_single_bump_peak():
    g = normalize(_bumps([(0.32, -0.44)], [1.0]))
    peaks = extract_peaks(g, 0.5, 0.1)
    assert len(peaks) == 1
    assert np.array_equal(peaks.points[0], g.argmax_point())


def test_close_bumps_merge():
    g = normalize(_bumps([(0.0, 0.0), (0.6, 0.0)], [1.0, 0.9], width=0.15))
    assert len(extract_peaks(g, 0.5, 0.3)) == 2
    peaks = extract_peaks(g, 0.5, 1.0)
    assert len(peaks) == 1 and abs(peaks.points[0][0]) < 0.05


def test_peak_invariants():
    g = normalize(_bumps([(-1, -1), (1, 1), (1, -1), (0, 0.2)], [1.0, 0.8, 0.6, 0.3]))
    peaks = extract_peaks(g, 0.5, 0.2)
    assert len(peaks) == 3
    assert np.all(np.diff(peaks.values) <= 0)
    d = np.hypot(*(peaks.points[:, None] - peaks.points[None]).transpose(2, 0, 1))
    assert np.all(d[~np.eye(len(peaks), dtype=bool)] >= 0.2)
    assert len(extract_peaks(g, 1.01, 0.2)) == 0
    with pytest.raises(ConfigurationError):
        extract_peaks(g, 0.5)
    assert extract_peaks(g, 0.5, k=np.pi).min_sep == 1.0


def test_indicator_grid_validation():
    with pytest.raises(ConfigurationError):
        IndicatorGrid(SamplingGrid((0, 1, 0, 1), 2), np.zeros((2, 2)), "other")


def decay_profile(k=K, source=(3.0, 1.0), n_rays=8):
    """Envelope of normalized I_P at 1, 2 and 4 wavelengths along ``n_rays`` rays."""
    ds, _, _ = free_space_dataset(k, [source])
    lam = 2 * np.pi / k
    src = np.asarray(source)
    peak = abs(source_indicator_at(ds, src[None])[0])
    out = []
    for a in np.arange(n_rays) * 2 * np.pi / n_rays:
        e = np.array([np.cos(a), np.sin(a)])
        env = []
        for d in (1, 2, 4):
            s = np.linspace(d - 0.5, d + 0.5, 41) * lam
            env.append(np.max(np.abs(source_indicator_at(ds, src + s[:, None] * e))) / peak)
        out.append(env)
    return np.array(out)


def test_source_indicator_decays():
    env = decay_profile()
    assert np.sum((env[:, 0] > env[:, 1]) & (env[:, 1] > env[:, 2])) >= 7


def test_clamp_rate_noiseless(example1):
    ds = synthesize(example1.scene, example1.geometry, example1.discretization())
    assert recover_modulus(ds)[1] == 0


def test_exports(tmp_path):
    g = normalize(_bumps([(0.3, 0.1)], [1.0], n=5))
    write_indicator_csv(g, tmp_path / "g.csv")
    lines = (tmp_path / "g.csv").read_text().splitlines()
    assert lines[0] == "x,y,value" and len(lines) == 26
    assert lines[1].startswith("-2,-2,")
    write_indicator_pgm(g, tmp_path / "g.pgm")
    raw = (tmp_path / "g.pgm").read_bytes()
    assert raw.startswith(b"P5\n5 5\n65535\n")
    img = np.frombuffer(raw[len(b"P5\n5 5\n65535\n"):], dtype=">u2").reshape(5, 5)
    assert img.max() == 65535 and img.min() == 0
    # first image row is the top (largest y) row of the grid
    assert np.array_equal(img[::-1].argmax(), g.values.argmax())
    assert "value_min" in (tmp_path / "g.pgm.txt").read_text()
    write_peaks_csv(extract_peaks(g, 0.5, 0.1), tmp_path / "p.csv")
    assert (tmp_path / "p.csv").read_text().count("\n") == 2


def test_clamp_rate_noisy(example1):
    from coinv.acquisition import add_noise

    ds = add_noise(synthesize(example1.scene, example1.geometry, example1.discretization()), 0.1, example1.seed)
    _, n = recover_modulus(ds)
    assert n / ds.m1.size < 0.05


def test_quadrature_refinement_example1(example1):
    disc = example1.discretization()
    g = example1.geometry

    def image(n_rx, n_ref):
        geom = AcquisitionGeometry(Ring(g.receivers.radius, n_rx), Ring(g.references.radius, n_ref), g.sigma)
        return normalize(indicator_source(synthesize(example1.scene, geom, disc), example1.source_grid)).values

    assert np.max(np.abs(image(256, 256) - image(128, 128))) <= 0.01


def test_quadrature_refinement_resolved_rings(example1):
    # once the rings carry a few samples per wavelength the trapezoid sums have converged
    disc = example1.discretization()
    g = example1.geometry

    def image(n):
        geom = AcquisitionGeometry(Ring(g.receivers.radius, n), Ring(g.references.radius, n), g.sigma)
        return normalize(indicator_source(synthesize(example1.scene, geom, disc), example1.source_grid)).values

    assert np.max(np.abs(image(512) - image(256))) <= 0.01

_c = st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False)


@settings(max_examples=300, deadline=None)
@given(up=_c, uz=_c, sigma=st.sampled_from([1.0, 2.0, 3.5]))
def test_decoupling_identity_property(up, uz, sigma):
    ds = _one(abs(up), abs(up + sigma * uz), abs(up + 2 * sigma * uz), sigma)
    scale = max(abs(up), abs(uz), 1.0)
    assert abs(recover_modulus(ds)[0][0, 0] - abs(uz)) <= 1e-6 * scale
    assert abs(theta(ds)[0, 0] - 2 * (up * np.conj(uz)).real) <= 1e-9 * scale**2
