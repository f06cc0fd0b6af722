"""Command line front end: ``coinv {synth,invert,pipeline,validate}``.

Exit codes: 0 success, 2 configuration error, 3 numeric/solver error,
4 validation failure.
"""

import argparse
import logging
import math
import os
from pathlib import Path
import sys
import time
import warnings

import numpy as np
from threadpoolctl import threadpool_limits

from .acquisition import (
    AcquisitionGeometry,
    add_noise,
    read_dataset,
    suggest_sigma,
    synthesize,
    write_dataset,
)
from .config import load_config
from .estimators import ObstacleImager, SourceImager
from .exceptions import ConfigurationError, CoinvError, DatasetParseError
from .forward import (
    SOUND_HARD,
    SOUND_SOFT,
    Discretization,
    Obstacle,
    Scene,
    boundary_residual,
    circle_series_oracle,
    solver_for,
)
from .geometry import ParametricCurve, Ring
from .inversion import (
    extract_peaks,
    normalize,
    recover_modulus,
    scattering_signal,
    theta,
    write_indicator_csv,
    write_indicator_pgm,
    write_peaks_csv,
)

logger = logging.getLogger("coinv")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VALIDATION = 0, 2, 3, 4
DATASET_NAME = "dataset.txt"


def _config(args):
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        from dataclasses import replace

        cfg = replace(cfg, seed=args.seed)
    return cfg


def _out_dir(args, cfg):
    out = Path(args.out if args.out else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def run_synth(cfg, out, echo=print):
    disc = cfg.discretization()
    solver = solver_for(cfg.scene, disc)
    before = solver.n_solves
    t0 = time.perf_counter()
    ds = synthesize(cfg.scene, cfg.geometry, disc)
    n_solves = solver.n_solves - before
    ds = add_noise(ds, cfg.delta, cfg.seed)
    path = out / DATASET_NAME
    write_dataset(ds, path)
    echo(f"forward solves: {n_solves} ({len(cfg.scene.sources)} sources + {cfg.geometry.references.n} references)")
    echo(f"boundary nodes: {disc.nodes}  condition ~ {solver.condition:.3e}")
    if cfg.scene.obstacles:
        res = boundary_residual(solver.solve(cfg.scene.sources[0]))
        echo("boundary residual per obstacle: " + " ".join(f"{r:.2e}" for r in res))
    ratio, suggested = suggest_sigma(ds)
    echo(f"sigma diagnostic: ||u(.;sigma z)|| / ||u(.;P)|| = {ratio:.3g} (sigma ~ {suggested:.3g} would equalize)")
    echo(f"dataset {ds.shape[0]}x{ds.shape[1]} delta={ds.noise_delta} seed={ds.noise_seed} -> {path}")
    logger.debug("synth took %.2fs", time.perf_counter() - t0)
    return ds


def _check_match(ds, cfg):
    if ds.k != cfg.scene.k:
        raise ConfigurationError(f"dataset wavenumber {ds.k} does not match config {cfg.scene.k}")
    if ds.geometry != cfg.geometry:
        raise ConfigurationError("dataset acquisition geometry does not match the config")


def _report_sources(peaks, cfg, echo):
    hx, hy = cfg.source_grid.spacing
    cell = math.hypot(hx, hy) / math.sqrt(2.0)
    echo(f"{len(peaks)} peaks (tau={peaks.tau}, min_sep={peaks.min_sep:.4g})")
    for i, ((x, y), v) in enumerate(peaks, start=1):
        echo(f"  peak {i}: ({x:.4f}, {y:.4f})  value {v:.4f}")
    if not cfg.scene.sources:
        return []
    missed = []
    pts = np.asarray(peaks.points).reshape(-1, 2)
    for s in cfg.scene.sources:
        d = np.hypot(*(pts - np.asarray(s)).T) if len(pts) else np.array([np.inf])
        j = int(np.argmin(d))
        ok = d[j] <= 2 * cell
        if not ok:
            missed.append(s)
        near = f"({pts[j][0]:.4f}, {pts[j][1]:.4f})" if len(pts) else "-"
        echo(f"  source ({s[0]:g}, {s[1]:g}): nearest peak {near} distance {d[j]:.4f}" + ("" if ok else "  MISSED"))
    if missed:
        echo(f"missed sources (no peak within 2 cells): {missed}")
    return missed


def run_invert(ds, cfg, out, which, n_jobs=None, echo=print):
    _check_match(ds, cfg)
    result = {}
    if which in ("sources", "both"):
        imager = SourceImager(n_jobs=n_jobs).fit(ds)
        raw = imager.image(cfg.source_grid, normalized=False)
        norm = normalize(raw)
        write_indicator_csv(raw, out / "sources_IP.csv")
        write_indicator_csv(norm, out / "sources_IP_normalized.csv")
        write_indicator_pgm(norm, out / "sources_IP.pgm")
        peaks = extract_peaks(norm, cfg.tau, cfg.min_sep)
        write_peaks_csv(peaks, out / "sources_peaks.csv")
        result["peaks"] = peaks
        result["missed"] = _report_sources(peaks, cfg, echo)
    if which in ("obstacle", "both"):
        imager = ObstacleImager(n_jobs=n_jobs).fit(ds)
        raw = imager.image(cfg.obstacle_grid, normalized=False)
        if scattering_signal(ds) < 1e-10:
            msg = "data carry no scattering signal (free space?); obstacle indicator is numerically zero"
            warnings.warn(msg, RuntimeWarning, stacklevel=2)
            echo("warning: " + msg)
            norm = raw
        else:
            norm = normalize(raw)
        write_indicator_csv(raw, out / "obstacle_ID.csv")
        write_indicator_csv(norm, out / "obstacle_ID_normalized.csv")
        write_indicator_pgm(norm, out / "obstacle_ID.pgm")
        echo(f"obstacle indicator: max |I_D| = {np.max(np.abs(raw.values)):.4e}, clamped radicands {imager.n_clamped_}")
        result["obstacle"] = norm
    echo(f"outputs written to {out}")
    return result


def run_validate(n_b=256, echo=print):
    """Built-in oracle suite; returns ``(all_passed, rows)``."""
    rows = []
    k = 4.0 * np.pi
    circle = ParametricCurve.make("circle", radius=1.0)
    th = np.linspace(0.0, 2.0 * np.pi, 64, endpoint=False)
    ring = 10.0 * np.stack([np.cos(th), np.sin(th)], -1)
    z = np.array([3.0, 1.0])
    for bc, tol in ((SOUND_SOFT, 1e-6), (SOUND_HARD, 1e-4)):
        scene = Scene(k, (Obstacle(circle, bc),))
        solver = solver_for(scene, Discretization((n_b,)))
        us = solver.total_fields(ring, z[None, :])[:, 0] - _free(k, ring, z)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            ref = circle_series_oracle(1.0, (0.0, 0.0), k, z, ring, bc=bc)
        err = np.linalg.norm(us - ref) / np.linalg.norm(ref)
        rows.append((f"circle series vs BIE ({bc.kind})", err, tol))

    rng = np.random.default_rng(12345)
    star = ParametricCurve.make("starfish")
    scene = Scene(k, (Obstacle(star),), ((3.0, 1.0), (-2.0, 2.5)))
    disc = Discretization.for_scene(scene, n_b=n_b)
    geom = AcquisitionGeometry(Ring(10.0, 32), Ring(9.0, 24), 1.0)
    ds, u_p, u_ref = synthesize(scene, geom, disc, return_fields=True)
    mod, _ = recover_modulus(ds)
    rows.append(("decoupling |u(x;z)|", float(np.max(np.abs(mod - np.abs(u_ref)))), 1e-12))
    cross = 2.0 * np.real(u_p[:, None] * np.conj(u_ref))
    rows.append(("cross term Theta", float(np.max(np.abs(theta(ds) - cross))), 1e-10))

    solver = solver_for(scene, disc)
    worst = 0.0
    for _ in range(5):
        a = rng.uniform(-5, 5, 2)
        b = rng.uniform(-5, 5, 2)
        if np.any(scene.inside_mask(np.stack([a, b]))):
            continue
        uab = solver.total_fields(a[None, :], b[None, :])[0, 0]
        uba = solver.total_fields(b[None, :], a[None, :])[0, 0]
        worst = max(worst, abs(uab - uba) / abs(uab))
    rows.append(("reciprocity u(x;z) = u(z;x)", worst, 1e-6))

    ok = True
    for name, err, tol in rows:
        passed = err <= tol
        ok &= passed
        echo(f"{'PASS' if passed else 'FAIL'}  {name:<34s} error {err:.3e}  (tol {tol:.0e})")
    return ok, rows


def _free(k, x, z):
    from .specialfn import fundamental_solution

    return fundamental_solution(k, x, z)


def build_parser():
    p = argparse.ArgumentParser(prog="coinv", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", required=True, help="config file or bundled name (e.g. example1.cfg)")
        sp.add_argument("--out", help="output directory (default: [output] directory of the config)")
        sp.add_argument("--threads", type=int, default=None, help="cap on worker/BLAS threads (default: all cores)")
        sp.add_argument("--seed", type=int, default=None, help="override the noise seed of the config")

    sp = sub.add_parser("synth", help="synthesize a phaseless dataset")
    common(sp)
    sp = sub.add_parser("invert", help="image sources and/or obstacle from a dataset")
    common(sp)
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--which", choices=("sources", "obstacle", "both"), default="both")
    sp = sub.add_parser("pipeline", help="synth followed by invert")
    common(sp)
    sp.add_argument("--which", choices=("sources", "obstacle", "both"), default="both")
    sp = sub.add_parser("validate", help="run the built-in oracle suite")
    sp.add_argument("--threads", type=int, default=None)
    sp.add_argument("--nb", type=int, default=256, help="boundary nodes for the oracles (negative control: small)")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    threads = args.threads or os.cpu_count() or 1
    try:
        with threadpool_limits(limits=threads):
            if args.command == "validate":
                ok, _ = run_validate(n_b=args.nb)
                return EXIT_OK if ok else EXIT_VALIDATION
            cfg = _config(args)
            out = _out_dir(args, cfg)
            if args.command == "synth":
                run_synth(cfg, out)
            elif args.command == "invert":
                ds = read_dataset(args.dataset)
                run_invert(ds, cfg, out, args.which, n_jobs=threads)
            else:
                ds = run_synth(cfg, out)
                run_invert(ds, cfg, out, args.which, n_jobs=threads)
        return EXIT_OK
    except (ConfigurationError, DatasetParseError, FileNotFoundError) as exc:
        print(f"coinv: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CoinvError as exc:
        print(f"coinv: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
