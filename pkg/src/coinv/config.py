"""Strict INI-style experiment configuration.

See ``docs/config.md`` for the schema. Unknown sections or keys are errors.
"""

import ast
import configparser
from dataclasses import dataclass
from importlib import resources
import math
import operator
from pathlib import Path

from .acquisition import AcquisitionGeometry
from .exceptions import ConfigurationError
from .forward import BoundaryCondition, Discretization, Obstacle, Scene
from .geometry import CURVE_KINDS, ParametricCurve, Ring, SamplingGrid

__all__ = ["ExperimentConfig", "load_config", "parse_config", "bundled_configs", "parse_real"]

_SCHEMA = {
    "scene": {"k": True, "sources": True},
    "acquisition": {
        "receivers_radius": True,
        "receivers_n": True,
        "receivers_aperture": False,
        "references_radius": True,
        "references_n": True,
        "references_aperture": False,
        "sigma": False,
    },
    "noise": {"delta": False, "seed": False},
    "imaging": {
        "source_bbox": True,
        "source_n": True,
        "obstacle_bbox": True,
        "obstacle_n": True,
        "tau": False,
        "min_sep": False,
    },
    "solver": {"n_b": False, "points_per_wavelength": False, "min_nodes": False},
    "output": {"directory": False},
}
_OBSTACLE_KEYS = {"kind", "bc", "lambda"} | {k for spec in CURVE_KINDS.values() for k in spec} | {"rotation"}

_OPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv}


def parse_real(text):
    """A real number or a tiny arithmetic expression in numbers and ``pi`` (e.g. ``4*pi``)."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        raise ValueError(text)

    try:
        value = ev(ast.parse(text.strip(), mode="eval"))
    except (SyntaxError, ValueError, ZeroDivisionError):
        raise ConfigurationError(f"cannot parse real value {text!r}") from None
    if not math.isfinite(value):
        raise ConfigurationError(f"non-finite value {text!r}")
    return value


def _reals(text, count=None, what="value"):
    vals = [parse_real(t) for t in text.replace(",", " ").split()]
    if count is not None and len(vals) != count:
        raise ConfigurationError(f"{what}: expected {count} numbers, got {len(vals)}")
    return tuple(vals)


def _int(text, what):
    try:
        return int(text.strip())
    except ValueError:
        raise ConfigurationError(f"{what}: expected an integer, got {text!r}") from None


def _points(text, what):
    pts = []
    for chunk in text.split(";"):
        if chunk.strip():
            pts.append(_reals(chunk, 2, what))
    return tuple(pts)


@dataclass(frozen=True)
class ExperimentConfig:
    scene: Scene
    geometry: AcquisitionGeometry
    delta: float
    seed: int
    source_grid: SamplingGrid
    obstacle_grid: SamplingGrid
    tau: float
    min_sep: float
    output_dir: str
    n_b: object = None
    points_per_wavelength: float = 10.0
    min_nodes: int = 128
    name: str = ""

    def discretization(self, n_b=None):
        return Discretization.for_scene(
            self.scene,
            n_b=self.n_b if n_b is None else n_b,
            ppw=self.points_per_wavelength,
            min_nodes=self.min_nodes,
        )


def _obstacle(section, name):
    unknown = set(section) - _OBSTACLE_KEYS
    if unknown:
        raise ConfigurationError(f"[{name}]: unknown key(s) {sorted(unknown)}")
    if "kind" not in section:
        raise ConfigurationError(f"[{name}]: missing key 'kind'")
    kind = section["kind"].strip()
    if kind not in CURVE_KINDS:
        raise ConfigurationError(f"[{name}]: unsupported kind {kind!r}")
    allowed = set(CURVE_KINDS[kind]) | {"rotation"}
    params = {}
    for key, raw in section.items():
        if key in ("kind", "bc", "lambda"):
            continue
        if key not in allowed:
            raise ConfigurationError(f"[{name}]: key {key!r} not valid for kind {kind!r}")
        default = CURVE_KINDS[kind].get(key, 0.0)
        if isinstance(default, tuple):
            count = len(default) if key in ("center", "semi_axes") else None
            params[key] = _reals(raw, count, f"[{name}] {key}")
        else:
            params[key] = _reals(raw, 1, f"[{name}] {key}")[0]
    bc_kind = section.get("bc", "sound_soft").strip().replace("-", "_")
    lam = parse_real(section["lambda"]) if "lambda" in section else None
    try:
        return Obstacle(ParametricCurve.make(kind, **params), BoundaryCondition(bc_kind, lam))
    except ConfigurationError as exc:
        raise ConfigurationError(f"[{name}]: {exc}") from None


def parse_config(text, name=""):
    cp = configparser.ConfigParser(interpolation=None, strict=True, inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"config syntax error: {exc}") from None

    obstacles = []
    for sec in cp.sections():
        if sec.startswith("obstacle"):
            obstacles.append(_obstacle(dict(cp[sec]), sec))
        elif sec not in _SCHEMA:
            raise ConfigurationError(f"unknown section [{sec}]")
    values = {}
    for sec, keys in _SCHEMA.items():
        present = dict(cp[sec]) if cp.has_section(sec) else {}
        unknown = set(present) - set(keys)
        if unknown:
            raise ConfigurationError(f"[{sec}]: unknown key(s) {sorted(unknown)}")
        for key, required in keys.items():
            if required and key not in present:
                raise ConfigurationError(f"[{sec}]: missing required key {key!r}")
        values[sec] = present

    sc, acq, noise, img = values["scene"], values["acquisition"], values["noise"], values["imaging"]
    scene = Scene(parse_real(sc["k"]), tuple(obstacles), _points(sc["sources"], "[scene] sources"))
    full = "0 2*pi"
    geom = AcquisitionGeometry(
        Ring(
            parse_real(acq["receivers_radius"]),
            _int(acq["receivers_n"], "receivers_n"),
            _reals(acq.get("receivers_aperture", full), 2, "receivers_aperture"),
        ),
        Ring(
            parse_real(acq["references_radius"]),
            _int(acq["references_n"], "references_n"),
            _reals(acq.get("references_aperture", full), 2, "references_aperture"),
        ),
        parse_real(acq.get("sigma", "1")),
    )
    geom.check_scene(scene)
    delta = parse_real(noise.get("delta", "0"))
    if not 0.0 <= delta < 1.0:
        raise ConfigurationError("[noise] delta must lie in [0, 1)")
    src_grid = SamplingGrid(_reals(img["source_bbox"], 4, "source_bbox"), _int(img["source_n"], "source_n"))
    obs_grid = SamplingGrid(_reals(img["obstacle_bbox"], 4, "obstacle_bbox"), _int(img["obstacle_n"], "obstacle_n"))
    tau = parse_real(img.get("tau", "0.5"))
    if not 0.0 <= tau <= 1.0:
        raise ConfigurationError("[imaging] tau must lie in [0, 1]")
    min_sep = parse_real(img["min_sep"]) if "min_sep" in img else math.pi / scene.k
    solver = values["solver"]
    n_b = None
    if "n_b" in solver:
        n_b = tuple(_int(t, "n_b") for t in solver["n_b"].split())
        n_b = n_b[0] if len(n_b) == 1 else n_b
    cfg = ExperimentConfig(
        scene=scene,
        geometry=geom,
        delta=delta,
        seed=_int(noise.get("seed", "0"), "seed"),
        source_grid=src_grid,
        obstacle_grid=obs_grid,
        tau=tau,
        min_sep=min_sep,
        output_dir=values["output"].get("directory", "out"),
        n_b=n_b,
        points_per_wavelength=parse_real(solver.get("points_per_wavelength", "10")),
        min_nodes=_int(solver.get("min_nodes", "128"), "min_nodes"),
        name=name,
    )
    cfg.discretization()
    return cfg


def bundled_configs():
    return sorted(p.name for p in resources.files("coinv.configs").iterdir() if p.name.endswith(".cfg"))


def load_config(path):
    """Load a config file; a bare bundled name such as ``example1.cfg`` is also accepted."""
    p = Path(path)
    if p.is_file():
        return parse_config(p.read_text(), name=p.stem)
    bundled = resources.files("coinv.configs").joinpath(p.name if p.suffix else p.name + ".cfg")
    if bundled.is_file():
        return parse_config(bundled.read_text(), name=Path(bundled.name).stem)
    raise ConfigurationError(f"config file not found: {path}")
