import numpy as np
import pytest

from coinv.acquisition import (
    AcquisitionGeometry,
    PhaselessDataset,
    add_noise,
    read_dataset,
    suggest_sigma,
    synthesize,
    write_dataset,
)
from coinv.exceptions import ConfigurationError, DatasetParseError
from coinv.forward import Discretization, Obstacle, Scene, solver_for
from coinv.geometry import ParametricCurve, Ring, ring_points
from coinv.inversion import recover_modulus
from coinv.specialfn import fundamental_solution

K = 4 * np.pi
GEOM = AcquisitionGeometry(Ring(10.0, 32), Ring(9.0, 24))


def _small_dataset(rng, n_rx=4, n_ref=3):
    geom = AcquisitionGeometry(Ring(10.0, n_rx), Ring(9.0, n_ref, (0.0, np.pi)), 2.0)
    return PhaselessDataset(geom, 7.5, rng.uniform(0.1, 1, n_rx), rng.uniform(0.1, 1, (n_rx, n_ref)),
                            rng.uniform(0.1, 1, (n_rx, n_ref)), 0.05, 11)


def test_free_space_m0_is_incident_modulus():
    ds = synthesize(Scene(K, (), ((3.0, 1.0),)), GEOM)
    expected = np.abs(fundamental_solution(K, ring_points(GEOM.receivers), np.array([3.0, 1.0])))
    assert np.array_equal(ds.m0, expected)


def test_consistency_with_recovery(example1):
    ds, _, u_ref = synthesize(example1.scene, GEOM, example1.discretization(), return_fields=True)
    mod, n_clamped = recover_modulus(ds)
    assert n_clamped == 0
    assert np.max(np.abs(mod - np.abs(u_ref))) <= 1e-12


def test_example1_dataset_and_solve_count(example1):
    disc = example1.discretization()
    solver = solver_for(example1.scene, disc)
    before = solver.n_solves
    ds = synthesize(example1.scene, example1.geometry, disc)
    assert solver.n_solves - before == 4 + 128
    assert ds.shape == (128, 128)
    for m in (ds.m0, ds.m1, ds.m2):
        assert np.all(np.isfinite(m)) and np.all(m > 0)


def test_geometry_checks():
    with pytest.raises(ConfigurationError):
        AcquisitionGeometry(Ring(9.0, 8), Ring(10.0, 8))
    with pytest.raises(ConfigurationError):
        AcquisitionGeometry(Ring(10.0, 8), Ring(9.0, 8), 0.5)
    with pytest.raises(ConfigurationError):
        synthesize(Scene(K, (), ((9.5, 0.0),)), GEOM)
    big = Obstacle(ParametricCurve.make("circle", radius=9.5))
    with pytest.raises(ConfigurationError):
        synthesize(Scene(K, (big,), ((0.0, 0.0),)), GEOM)
    with pytest.raises(ConfigurationError):
        synthesize(Scene(K, ()), GEOM)


def test_dataset_is_read_only(rng):
    ds = _small_dataset(rng)
    with pytest.raises(ValueError):
        ds.m1[0, 0] = 1.0
    with pytest.raises(ConfigurationError):
        PhaselessDataset(ds.geometry, 1.0, -ds.m0, ds.m1, ds.m2)
    with pytest.raises(ConfigurationError):
        PhaselessDataset(ds.geometry, 1.0, ds.m0, ds.m1[:, :2], ds.m2)


def test_zero_noise_is_identity(rng):
    ds = _small_dataset(rng)
    out = add_noise(ds, 0.0, 3)
    assert all(np.array_equal(getattr(out, m), getattr(ds, m)) for m in ("m0", "m1", "m2"))


def test_noise_bounds_and_determinism(example1):
    ds = synthesize(example1.scene, GEOM, example1.discretization())
    a = add_noise(ds, 0.1, 5)
    for m in ("m0", "m1", "m2"):
        ref, got = getattr(ds, m), getattr(a, m)
        assert np.all(got >= 0.9 * ref - 1e-15) and np.all(got <= 1.1 * ref + 1e-15)
        assert not np.array_equal(got, ref)
    assert add_noise(ds, 0.1, 5).equals(a)
    assert not np.array_equal(add_noise(ds, 0.1, 6).m1, a.m1)
    # m0, m1 and m2 draw independent streams
    r0 = a.m0 / ds.m0 - 1
    r1 = a.m1[:, 0] / ds.m1[:, 0] - 1
    assert not np.allclose(r0, r1)


def test_noise_rejects_bad_delta(rng):
    ds = _small_dataset(rng)
    for d in (-0.1, 1.0):
        with pytest.raises(ConfigurationError):
            add_noise(ds, d, 0)


def test_noise_entry_depends_only_on_index(rng):
    big = _small_dataset(rng, 6, 5)
    small = PhaselessDataset(AcquisitionGeometry(Ring(10.0, 3), Ring(9.0, 5, (0.0, np.pi)), 2.0), big.k,
                             big.m0[:3], big.m1[:3], big.m2[:3])
    a, b = add_noise(big, 0.2, 9), add_noise(small, 0.2, 9)
    assert np.array_equal(a.m1[:3], b.m1)


def test_round_trip(tmp_path, rng):
    ds = _small_dataset(rng)
    path = tmp_path / "d.txt"
    write_dataset(ds, path)
    assert read_dataset(path).equals(ds)
    text = path.read_text().splitlines()
    assert text[0] == "COINV-DATASET v1"
    assert text[4] == "M0"


def test_missing_header(tmp_path, rng):
    path = tmp_path / "d.txt"
    write_dataset(_small_dataset(rng), path)
    path.write_text("\n".join(path.read_text().splitlines()[1:]))
    with pytest.raises(DatasetParseError, match="version header"):
        read_dataset(path)


def test_dimension_mismatch(tmp_path, rng):
    path = tmp_path / "d.txt"
    write_dataset(_small_dataset(rng), path)
    lines = path.read_text().splitlines()
    lines[2] = lines[2].replace("receivers 4", "receivers 5")
    path.write_text("\n".join(lines))
    with pytest.raises(DatasetParseError) as err:
        read_dataset(path)
    assert err.value.line is not None


def test_bad_number_names_line(tmp_path, rng):
    path = tmp_path / "d.txt"
    write_dataset(_small_dataset(rng), path)
    lines = path.read_text().splitlines()
    lines[6] = "abc"
    path.write_text("\n".join(lines))
    with pytest.raises(DatasetParseError, match="line 7"):
        read_dataset(path)


def test_sigma_diagnostic_does_not_change_sigma(example1):
    ds = synthesize(example1.scene, GEOM, example1.discretization())
    ratio, suggested = suggest_sigma(ds)
    assert ratio > 0 and suggested > 0
    assert ds.sigma == 1.0
