"""Experiment configuration: strict JSON parsing, defaults, provenance hash,
and construction of initial data."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .grid import Field, Grid, read_field_csv
from .params import PhysParams
from .pme import barenblatt_field, barenblatt_params

__all__ = [
    "TentDatum",
    "BarenblattDatum",
    "CsvDatum",
    "StudyConfig",
    "parse_config",
    "load_config",
    "config_hash",
    "build_initial_datum",
    "DEFAULT_CONFIG",
]


@dataclass(frozen=True)
class TentDatum:
    mass: float


@dataclass(frozen=True)
class BarenblattDatum:
    mass: float
    t0: float


@dataclass(frozen=True)
class CsvDatum:
    path: str


InitialDatum = Union[TentDatum, BarenblattDatum, CsvDatum]

DEFAULT_CONFIG = {
    "grid": {"x_min": -8.0, "x_max": 8.0, "n_cells": 2048},
    "params": {"alpha": 1.25, "gamma": 2.0, "pme_coeff": None},
    "eps_values": [1e-1, 3e-2, 1e-2, 3e-3, 1e-3],
    "t_end": 0.5,
    "snapshot_times": [0.125, 0.25, 0.375, 0.5],
    "initial_datum": {"kind": "tent", "mass": 1.0},
    "thresholds": {"support": 1e-6, "floor": 1e-10},
    "output_dir": "out",
    "seed": 0,
}


@dataclass(frozen=True)
class StudyConfig:
    grid: Grid
    alpha: float
    gamma: float
    pme_coeff: float | None
    eps_values: tuple[float, ...]
    t_end: float
    snapshot_times: tuple[float, ...]
    initial_datum: InitialDatum
    support_threshold: float
    floor_frac: float
    output_dir: str
    seed: int

    def params(self, epsilon: float = 0.0) -> PhysParams:
        return PhysParams(alpha=self.alpha, gamma=self.gamma, epsilon=epsilon,
                          pme_coeff=self.pme_coeff)


def _reject_unknown(section: dict, allowed: set[str], where: str) -> None:
    for key in section:
        if key not in allowed:
            raise ValueError(f"unknown key {key!r} in {where}")


def _merged(user: dict, defaults: dict, where: str) -> dict:
    _reject_unknown(user, set(defaults), where)
    out = dict(defaults)
    out.update(user)
    return out


def parse_config(text: str) -> StudyConfig:
    """Parse and fully validate a JSON configuration (strict keys)."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ValueError(f"config parse error at line {e.lineno}, column {e.colno}: {e.msg}")
    if not isinstance(raw, dict):
        raise ValueError("config must be a JSON object")

    top = _merged(raw, DEFAULT_CONFIG, "config")
    gspec = _merged(top["grid"], DEFAULT_CONFIG["grid"], "grid")
    pspec = _merged(top["params"], DEFAULT_CONFIG["params"], "params")
    tspec = _merged(top["thresholds"], DEFAULT_CONFIG["thresholds"], "thresholds")

    grid = Grid(float(gspec["x_min"]), float(gspec["x_max"]), int(gspec["n_cells"]))
    # validates alpha/gamma/pme_coeff invariants with the shared messages
    pme_coeff = pspec["pme_coeff"]
    PhysParams(alpha=float(pspec["alpha"]), gamma=float(pspec["gamma"]),
               epsilon=0.0,
               pme_coeff=None if pme_coeff is None else float(pme_coeff))

    eps_values = tuple(float(e) for e in top["eps_values"])
    for e in eps_values:
        if not (math.isfinite(e) and e >= 0.0):
            raise ValueError(f"eps values must be finite and >= 0, got {e}")

    t_end = float(top["t_end"])
    if not (math.isfinite(t_end) and t_end > 0.0):
        raise ValueError(f"t_end must be positive, got {t_end}")
    snapshot_times = tuple(float(t) for t in top["snapshot_times"])
    if any(t < 0.0 or t > t_end for t in snapshot_times):
        raise ValueError("snapshot_times must lie within [0, t_end]")
    if list(snapshot_times) != sorted(snapshot_times):
        raise ValueError("snapshot_times must be sorted")

    datum = _parse_datum(top["initial_datum"])

    support = float(tspec["support"])
    if not 0.0 < support < 1.0:
        raise ValueError(f"support threshold must lie in (0, 1), got {support}")
    floor = float(tspec["floor"])
    if not 0.0 < floor < 1.0:
        raise ValueError(f"floor fraction must lie in (0, 1), got {floor}")

    seed = top["seed"]
    if int(seed) != seed or seed < 0:
        raise ValueError(f"seed must be a nonnegative integer, got {seed}")

    return StudyConfig(
        grid=grid,
        alpha=float(pspec["alpha"]),
        gamma=float(pspec["gamma"]),
        pme_coeff=None if pme_coeff is None else float(pme_coeff),
        eps_values=eps_values,
        t_end=t_end,
        snapshot_times=snapshot_times,
        initial_datum=datum,
        support_threshold=support,
        floor_frac=floor,
        output_dir=str(top["output_dir"]),
        seed=int(seed),
    )


def _parse_datum(spec: dict) -> InitialDatum:
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ValueError("initial_datum must be an object with a 'kind' key")
    kind = spec["kind"]
    if kind == "tent":
        _reject_unknown(spec, {"kind", "mass"}, "initial_datum")
        mass = float(spec.get("mass", 1.0))
        if not mass > 0.0:
            raise ValueError(f"tent mass must be positive, got {mass}")
        return TentDatum(mass=mass)
    if kind == "barenblatt":
        _reject_unknown(spec, {"kind", "mass", "t0"}, "initial_datum")
        mass = float(spec.get("mass", 1.0))
        t0 = float(spec.get("t0", 0.5))
        if not mass > 0.0:
            raise ValueError(f"barenblatt mass must be positive, got {mass}")
        if not t0 > 0.0:
            raise ValueError(f"barenblatt t0 must be positive, got {t0}")
        return BarenblattDatum(mass=mass, t0=t0)
    if kind == "from_csv":
        _reject_unknown(spec, {"kind", "path"}, "initial_datum")
        if "path" not in spec:
            raise ValueError("from_csv initial_datum needs a 'path'")
        return CsvDatum(path=str(spec["path"]))
    raise ValueError(f"unknown initial_datum kind {kind!r}")


def load_config(path) -> StudyConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except FileNotFoundError:
        raise ValueError(f"config file not found: {path}")
    return parse_config(text)


def _canonical(obj):
    if isinstance(obj, dict):
        return {k: _canonical(obj[k]) for k in sorted(obj)}
    if isinstance(obj, (list, tuple)):
        return [_canonical(v) for v in obj]
    return obj


def config_hash(config: StudyConfig) -> str:
    """Stable short hash of the fully resolved configuration."""
    doc = {
        "grid": {"x_min": config.grid.x_min, "x_max": config.grid.x_max,
                 "n_cells": config.grid.n_cells},
        "alpha": config.alpha,
        "gamma": config.gamma,
        "pme_coeff": config.pme_coeff,
        "eps_values": list(config.eps_values),
        "t_end": config.t_end,
        "snapshot_times": list(config.snapshot_times),
        "initial_datum": repr(config.initial_datum),
        "support_threshold": config.support_threshold,
        "floor_frac": config.floor_frac,
        "seed": config.seed,
    }
    blob = json.dumps(_canonical(doc), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def tent_field(grid: Grid, mass: float) -> Field:
    """Tent profile mass * (1 - |x|)_+, carrying exactly `mass` in the limit."""
    x = grid.centers
    return Field(grid, mass * np.maximum(1.0 - np.abs(x), 0.0))


def build_initial_datum(config: StudyConfig) -> Field:
    datum = config.initial_datum
    if isinstance(datum, TentDatum):
        return tent_field(config.grid, datum.mass)
    if isinstance(datum, BarenblattDatum):
        bb = barenblatt_params(config.alpha, datum.mass, config.params().pme_coeff)
        return barenblatt_field(bb, datum.t0, config.grid)
    if isinstance(datum, CsvDatum):
        field = read_field_csv(datum.path)
        if field.grid != config.grid:
            raise ValueError(
                f"CSV grid {field.grid} does not match the configured grid {config.grid}"
            )
        return field
    raise TypeError(f"unhandled initial datum {datum!r}")
