"""Experiment configuration files.

Line-oriented INI text: ``[section]`` headers, ``key = value`` pairs,
comments start with ``#``.  Sections and keys (defaults in brackets):

    [problem]   kind = ms | quasilinear1d
                a0 [1], a2 [0], f1 [0], f2 [0]   1D: a = a0 + a2 u^2, f = f1 u + f2 u^2
                mesh [63]                        1D interior nodes
    [geometry]  reference = circle | ellipse [circle]
                radius [0.5], center [0, 0], semi_axes [0.5, 0.4], angle [0]
                container_radius [1], container_center [0, 0], nodes [64]
    [initial]   cos = k:amp, ...     sin = k:amp, ...     constant [0]
                offset = dx, dy      (MS: heights of the shifted reference circle)
                rough_amplitude [0], rough_decay [2.2]   (seeded random phases)
    [weights]   p [6 for ms, 4 for 1D], mu [midpoint of (mu0, 1)]
    [grid]      steps [20], q [graded default]
    [run]       mode = semi_implicit | picard, horizon, dt, seed [0],
                record_every [1], snapshot_every [0 = first and last only]
    [monitors]  M [1e3], r [0.05], eta [0.05]
    [output]    root [runs], name [config file stem]
"""
from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from .errors import ConfigError, ParameterOutOfRange
from .stepper import compute_mu0

OUTPUT_ROOT_ENV = "QUASIFLOW_OUTPUT_ROOT"

_KNOWN = {
    "problem": {"kind", "a0", "a2", "f1", "f2", "mesh"},
    "geometry": {"reference", "radius", "center", "semi_axes", "angle", "container_radius",
                 "container_center", "nodes"},
    "initial": {"cos", "sin", "constant", "offset", "rough_amplitude", "rough_decay"},
    "weights": {"p", "mu"},
    "grid": {"steps", "q"},
    "run": {"mode", "horizon", "dt", "seed", "record_every", "snapshot_every"},
    "monitors": {"m", "r", "eta"},
    "output": {"root", "name"},
}


@dataclass
class ExperimentConfig:
    kind: str
    horizon: float
    dt: float
    mode: str = "semi_implicit"
    p: float = 6.0
    mu: float = 0.8
    steps: int = 20
    q: Optional[float] = None
    # geometry (ms)
    reference: str = "circle"
    radius: float = 0.5
    center: Tuple[float, float] = (0.0, 0.0)
    semi_axes: Tuple[float, float] = (0.5, 0.4)
    angle: float = 0.0
    container_radius: float = 1.0
    container_center: Tuple[float, float] = (0.0, 0.0)
    nodes: int = 64
    # 1D problem
    a0: float = 1.0
    a2: float = 0.0
    f1: float = 0.0
    f2: float = 0.0
    mesh: int = 63
    # initial data
    cos_modes: Dict[int, float] = field(default_factory=dict)
    sin_modes: Dict[int, float] = field(default_factory=dict)
    constant: float = 0.0
    offset: Optional[Tuple[float, float]] = None
    rough_amplitude: float = 0.0
    rough_decay: float = 2.2
    # monitors and output
    norm_max: float = 1e3
    ball_min: float = 0.05
    eta_fraction: float = 0.05
    seed: int = 0
    record_every: int = 1
    snapshot_every: int = 0
    output_root: str = "runs"
    name: str = "run"

    def output_dir(self):
        root = os.environ.get(OUTPUT_ROOT_ENV) or self.output_root
        return os.path.join(root, self.name)


def _float(sec, key, default=None, positive=False):
    raw = sec.get(key)
    if raw is None:
        if default is None:
            raise ConfigError(f"{sec.name}.{key}", "required value is missing")
        return default
    try:
        val = float(raw)
    except ValueError:
        raise ConfigError(f"{sec.name}.{key}", f"expected a number, got {raw!r}") from None
    if not np.isfinite(val):
        raise ConfigError(f"{sec.name}.{key}", "value must be finite")
    if positive and not val > 0:
        raise ConfigError(f"{sec.name}.{key}", f"must be positive, got {val}")
    return val


def _int(sec, key, default, minimum=None):
    raw = sec.get(key)
    if raw is None:
        return default
    try:
        val = int(raw)
    except ValueError:
        raise ConfigError(f"{sec.name}.{key}", f"expected an integer, got {raw!r}") from None
    if minimum is not None and val < minimum:
        raise ConfigError(f"{sec.name}.{key}", f"must be at least {minimum}, got {val}")
    return val


def _pair(sec, key, default):
    raw = sec.get(key)
    if raw is None:
        return default
    parts = [s for s in raw.replace(",", " ").split() if s]
    try:
        vals = tuple(float(s) for s in parts)
    except ValueError:
        raise ConfigError(f"{sec.name}.{key}", f"expected two numbers, got {raw!r}") from None
    if len(vals) != 2:
        raise ConfigError(f"{sec.name}.{key}", f"expected two numbers, got {raw!r}")
    return vals


def _modes(sec, key):
    raw = sec.get(key)
    out = {}
    if not raw:
        return out
    for item in raw.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            k, amp = item.split(":")
            out[int(k)] = float(amp)
        except ValueError:
            raise ConfigError(f"{sec.name}.{key}", f"expected entries 'k:amplitude', got {item!r}") from None
        if int(k) < 0:
            raise ConfigError(f"{sec.name}.{key}", "mode numbers must be nonnegative")
    return out


def parse_config(text, name="run") -> ExperimentConfig:
    cp = configparser.ConfigParser(comment_prefixes=("#",), inline_comment_prefixes=("#",), interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("syntax", str(exc).splitlines()[0]) from None
    for section in cp.sections():
        if section not in _KNOWN:
            raise ConfigError(section, "unknown section")
        for key in cp[section]:
            if key not in _KNOWN[section]:
                raise ConfigError(f"{section}.{key}", "unknown key")
    sec = {s: (cp[s] if cp.has_section(s) else _Empty(s)) for s in _KNOWN}

    kind = sec["problem"].get("kind")
    if kind not in ("ms", "quasilinear1d"):
        raise ConfigError("problem.kind", f"expected 'ms' or 'quasilinear1d', got {kind!r}")
    cfg = ExperimentConfig(
        kind=kind,
        horizon=_float(sec["run"], "horizon", positive=True),
        dt=_float(sec["run"], "dt", positive=True),
        name=sec["output"].get("name") or name,
        output_root=sec["output"].get("root") or "runs",
    )
    mode = sec["run"].get("mode", "semi_implicit")
    if mode not in ("semi_implicit", "picard"):
        raise ConfigError("run.mode", f"expected 'semi_implicit' or 'picard', got {mode!r}")
    cfg.mode = mode
    cfg.seed = _int(sec["run"], "seed", 0)
    cfg.record_every = _int(sec["run"], "record_every", 1, 1)
    cfg.snapshot_every = _int(sec["run"], "snapshot_every", 0, 0)
    if cfg.dt > cfg.horizon:
        raise ConfigError("run.dt", "time step exceeds the horizon")

    cfg.p = _float(sec["weights"], "p", 6.0 if kind == "ms" else 4.0)
    try:
        mu0 = compute_mu0(2 if kind == "ms" else 1, cfg.p, "mullins_sekerka" if kind == "ms" else "secondorder")
    except ParameterOutOfRange as exc:
        raise ConfigError("weights.p", str(exc)) from None
    cfg.mu = _float(sec["weights"], "mu", 0.5 * (mu0 + 1.0))
    if not (mu0 < cfg.mu <= 1.0):
        raise ConfigError("weights.mu", f"mu = {cfg.mu} must lie in (mu0, 1] with mu0 = {mu0:.6g}")
    cfg.steps = _int(sec["grid"], "steps", 20, 1)
    if sec["grid"].get("q") is not None:
        cfg.q = _float(sec["grid"], "q")
        if cfg.q < 1:
            raise ConfigError("grid.q", "grading exponent must be at least 1")

    g = sec["geometry"]
    cfg.reference = g.get("reference", "circle")
    if cfg.reference not in ("circle", "ellipse"):
        raise ConfigError("geometry.reference", f"expected 'circle' or 'ellipse', got {cfg.reference!r}")
    cfg.radius = _float(g, "radius", 0.5, positive=True)
    cfg.center = _pair(g, "center", (0.0, 0.0))
    cfg.semi_axes = _pair(g, "semi_axes", (0.5, 0.4))
    if min(cfg.semi_axes) <= 0:
        raise ConfigError("geometry.semi_axes", "semi-axes must be positive")
    cfg.angle = _float(g, "angle", 0.0)
    cfg.container_radius = _float(g, "container_radius", 1.0, positive=True)
    cfg.container_center = _pair(g, "container_center", (0.0, 0.0))
    cfg.nodes = _int(g, "nodes", 64, 8)
    if cfg.nodes & (cfg.nodes - 1):
        raise ConfigError("geometry.nodes", "node count must be a power of two")

    pr = sec["problem"]
    cfg.a0 = _float(pr, "a0", 1.0)
    cfg.a2 = _float(pr, "a2", 0.0)
    cfg.f1 = _float(pr, "f1", 0.0)
    cfg.f2 = _float(pr, "f2", 0.0)
    cfg.mesh = _int(pr, "mesh", 63, 3)
    if cfg.a0 <= 0 or cfg.a2 < 0:
        raise ConfigError("problem.a0", "diffusion coefficient a0 + a2 u^2 must be positive")

    ini = sec["initial"]
    cfg.cos_modes = _modes(ini, "cos")
    cfg.sin_modes = _modes(ini, "sin")
    cfg.constant = _float(ini, "constant", 0.0)
    cfg.offset = _pair(ini, "offset", None)
    cfg.rough_amplitude = _float(ini, "rough_amplitude", 0.0)
    cfg.rough_decay = _float(ini, "rough_decay", 2.2, positive=True)

    mon = sec["monitors"]
    cfg.norm_max = _float(mon, "m", 1e3, positive=True)
    cfg.ball_min = _float(mon, "r", 0.05, positive=True)
    cfg.eta_fraction = _float(mon, "eta", 0.05, positive=True)
    return cfg


class _Empty(dict):
    def __init__(self, name):
        super().__init__()
        self.name = name


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("file", f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, os.path.splitext(os.path.basename(path))[0])
