"""Run configuration: INI-style sectioned key-value files.

One file drives every pipeline stage so partial reruns agree on the same
parameters.  Angles accept plain floats or pi fractions like "pi/2" and
"3*pi/4".  See the README for the full grammar.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from .errors import ConfigError

_PI_RE = re.compile(r"^\s*(?:(\d+(?:\.\d+)?)\s*\*?\s*)?pi\s*(?:/\s*(\d+(?:\.\d+)?))?\s*$")

ALL_STAGES = ("validate", "mesh", "solve", "freq", "spectrum", "blowup", "ineq")


def parse_angle(text: str) -> float:
    """Parse '1.57', 'pi', 'pi/2' or '3*pi/4' into radians."""
    text = text.strip().lower()
    m = _PI_RE.match(text)
    if m:
        num = float(m.group(1)) if m.group(1) else 1.0
        den = float(m.group(2)) if m.group(2) else 1.0
        return num * math.pi / den
    try:
        return float(text)
    except ValueError as exc:
        raise ConfigError(f"cannot parse angle '{text}'") from exc


@dataclass
class RunConfig:
    dimension: int = 2
    opening: float = math.pi / 2
    target_h: float = 0.02
    grading_ratio: float = 0.96
    r_min: float = 1e-3
    preset: str = "constant"
    preset_params: dict = dc_field(default_factory=dict)
    outer_data: str = "eigen:2"
    r_lo: float = 0.05
    r_hi: float = 0.8
    r_points: int = 12
    r_geometric: bool = True
    lambdas: tuple = (0.4, 0.2, 0.1)
    spectral_k_max: int = 6
    spectral_grid_n: int = 2000
    seed: int = 42
    threads: int = 1
    ineq_count: int = 100
    stages: tuple = ALL_STAGES
    figures: bool = True
    doubling_ratio: float = 2.0
    solver_tol: float = 1e-10
    solver_max_iter: int = 25
    output_dir: str = "out"

    def r_grid(self) -> np.ndarray:
        if self.r_geometric:
            return np.geomspace(self.r_lo, self.r_hi, self.r_points)
        return np.linspace(self.r_lo, self.r_hi, self.r_points)

    def validate(self) -> None:
        if self.dimension not in (2, 3):
            raise ConfigError(f"[domain] dimension must be 2 or 3, got {self.dimension}")
        if self.r_lo < self.r_min:
            raise ConfigError(
                f"[r_grid] r_lo={self.r_lo} lies below [mesh] r_min={self.r_min}")
        if not self.r_lo < self.r_hi <= 0.8 + 1e-12:
            raise ConfigError(f"[r_grid] range [{self.r_lo}, {self.r_hi}] invalid (hi <= 0.8)")
        if self.r_points < 8:
            raise ConfigError(f"[r_grid] points must be at least 8, got {self.r_points}")
        unknown = set(self.stages) - set(ALL_STAGES)
        if unknown:
            raise ConfigError(f"[run] unknown stages {sorted(unknown)}")
        planar = {"validate", "mesh", "solve", "freq", "blowup", "ineq"}
        if self.dimension == 3 and planar & set(self.stages):
            raise ConfigError("[run] only the spectrum stage runs for dimension 3; "
                              "set stages = spectrum")
        if len(self.lambdas) < 3 and "blowup" in self.stages:
            raise ConfigError("[blowup] needs at least 3 lambda values")
        if any(not self.r_min / 0.8 <= lam <= 0.5 for lam in self.lambdas) \
                and "blowup" in self.stages:
            raise ConfigError(f"[blowup] lambdas {self.lambdas} outside "
                              f"[{self.r_min / 0.8}, 0.5]")
        if self.ineq_count < 1:
            raise ConfigError(f"[run] ineq_count must be positive, got {self.ineq_count}")


def _get(cp: configparser.ConfigParser, section: str, key: str, conv, default):
    if not cp.has_option(section, key):
        return default
    raw = cp.get(section, key)
    try:
        return conv(raw)
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(f"[{section}] {key}={raw!r}: {exc}") from exc


def _bool(raw: str) -> bool:
    val = raw.strip().lower()
    if val in ("1", "true", "yes", "on"):
        return True
    if val in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw}")


def load_config(path: str | Path) -> RunConfig:
    """Parse and validate a run configuration file."""
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise ConfigError(f"config file not found: {path}")
    cfg = RunConfig()
    cfg.dimension = _get(cp, "domain", "dimension", int, cfg.dimension)
    cfg.opening = _get(cp, "domain", "opening", parse_angle, cfg.opening)
    cfg.target_h = _get(cp, "mesh", "target_h", float, cfg.target_h)
    cfg.grading_ratio = _get(cp, "mesh", "grading_ratio", float, cfg.grading_ratio)
    cfg.r_min = _get(cp, "mesh", "r_min", float, cfg.r_min)
    cfg.preset = _get(cp, "coefficients", "preset", str.strip, cfg.preset)
    if cp.has_section("coefficients"):
        for key, raw in cp.items("coefficients"):
            if key != "preset":
                cfg.preset_params[key] = float(raw)
    cfg.outer_data = _get(cp, "outer_data", "spec", str.strip, cfg.outer_data)
    cfg.r_lo = _get(cp, "r_grid", "r_lo", float, cfg.r_lo)
    cfg.r_hi = _get(cp, "r_grid", "r_hi", float, cfg.r_hi)
    cfg.r_points = _get(cp, "r_grid", "points", int, cfg.r_points)
    cfg.r_geometric = _get(cp, "r_grid", "geometric", _bool, cfg.r_geometric)
    cfg.lambdas = _get(cp, "blowup", "lambdas",
                       lambda s: tuple(float(v) for v in s.split(",")), cfg.lambdas)
    cfg.spectral_k_max = _get(cp, "spectral", "k_max", int, cfg.spectral_k_max)
    cfg.spectral_grid_n = _get(cp, "spectral", "grid_n", int, cfg.spectral_grid_n)
    cfg.seed = _get(cp, "run", "seed", int, cfg.seed)
    cfg.threads = _get(cp, "run", "threads", int, cfg.threads)
    cfg.ineq_count = _get(cp, "run", "ineq_count", int, cfg.ineq_count)
    cfg.stages = _get(cp, "run", "stages",
                      lambda s: tuple(v.strip() for v in s.split(",")), cfg.stages)
    cfg.figures = _get(cp, "run", "figures", _bool, cfg.figures)
    cfg.doubling_ratio = _get(cp, "run", "doubling_ratio", float, cfg.doubling_ratio)
    cfg.solver_tol = _get(cp, "solver", "tol", float, cfg.solver_tol)
    cfg.solver_max_iter = _get(cp, "solver", "max_iter", int, cfg.solver_max_iter)
    cfg.output_dir = _get(cp, "output", "directory", str.strip, cfg.output_dir)
    cfg.validate()
    return cfg
