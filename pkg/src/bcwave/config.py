"""Run configuration: JSON document, schema, defaults and named families."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import jsonschema
import numpy as np

from . import io
from .wave1d import SourceSignal, SpatialGrid, TimeGrid, bump, cfl_number

DEFAULTS: dict[str, Any] = {
    "grid": {"n_x": 401, "dt": None, "t_max": 3.0, "cfl": 0.95, "ds": 0.0125},
    "potential": {"family": "gauss", "amp": 5.0, "center": 0.4, "rate": 50.0},
    "speed": {"family": "constant", "value": 1.0},
    "source": {"kind": "bump", "t_lo": 0.1, "t_hi": 0.3},
    "source2": {"kind": "bump", "t_lo": 0.2, "t_hi": 0.7},
    "control": {
        "M": None,
        "alpha": None,
        "T": 1.2,
        "s_list": [0.3, 0.5, 0.7],
        "knot_spacing": 0.01,
        "T_grid": [1.1, 1.15, 1.2, 1.25, 1.3, 1.35, 1.4, 1.45, 1.5],
        "n_sources": 6,
        "source_width": 0.6,
    },
    "geomoptics": {
        "N": [1, 2],
        "sigma_list": [8, 16, 32, 64, 128],
        "h": 0.005,
        "T": 1.2,
        "chi": [0.1, 0.7],
        "x0": 0.5,
    },
    "lightray": {"phantom": "bump", "T": 2.0, "X": 1.0, "n_t": 33, "n_x": 33, "band": 0.5, "radius": 0.6},
    "noise": 0.0,
    "de_crime": False,
    "workers": 1,
    "out": "out",
}

_family = {
    "type": "object",
    "properties": {
        "family": {"enum": ["zero", "constant", "bump", "gauss", "sinbump", "linear", "file"]},
        "value": {"type": "number"},
        "amp": {"type": "number"},
        "center": {"type": "number"},
        "rate": {"type": "number", "exclusiveMinimum": 0},
        "lo": {"type": "number"},
        "hi": {"type": "number"},
        "slope": {"type": "number"},
        "path": {"type": "string"},
    },
    "required": ["family"],
}

_source = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["bump", "zero"]},
        "t_lo": {"type": "number", "minimum": 0},
        "t_hi": {"type": "number"},
        "amplitude": {"type": "number"},
    },
    "required": ["kind"],
}

_num_list = {"type": "array", "items": {"type": "number"}, "minItems": 1}

SCHEMA = {
    "type": "object",
    "properties": {
        "grid": {
            "type": "object",
            "properties": {
                "n_x": {"type": "integer", "minimum": 3},
                "dt": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "t_max": {"type": "number", "exclusiveMinimum": 0},
                "cfl": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "ds": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "potential": _family,
        "speed": _family,
        "source": _source,
        "source2": _source,
        "control": {
            "type": "object",
            "properties": {
                "M": {"type": ["integer", "null"], "minimum": 4},
                "alpha": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "T": {"type": "number", "exclusiveMinimum": 0},
                "s_list": _num_list,
                "knot_spacing": {"type": "number", "exclusiveMinimum": 0},
                "T_grid": _num_list,
                "n_sources": {"type": "integer", "minimum": 1},
                "source_width": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "geomoptics": {
            "type": "object",
            "properties": {
                "N": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                "sigma_list": _num_list,
                "h": {"type": "number", "exclusiveMinimum": 0},
                "T": {"type": "number", "exclusiveMinimum": 0},
                "chi": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                "x0": {"type": "number"},
            },
            "additionalProperties": False,
        },
        "lightray": {
            "type": "object",
            "properties": {
                "phantom": {"enum": ["bump", "static"]},
                "T": {"type": "number", "exclusiveMinimum": 0},
                "X": {"type": "number", "exclusiveMinimum": 0},
                "n_t": {"type": "integer", "minimum": 5},
                "n_x": {"type": "integer", "minimum": 5},
                "band": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "radius": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "noise": {"type": "number", "minimum": 0},
        "de_crime": {"type": "boolean"},
        "workers": {"type": "integer", "minimum": 1},
        "out": {"type": "string"},
    },
    "additionalProperties": False,
}


class ConfigError(ValueError):
    pass


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k not in ("potential", "speed", "source", "source2"):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass
class RunConfig:
    data: dict
    base_dir: Path

    @classmethod
    def load(cls, path: str | Path | None = None, overrides: dict | None = None) -> "RunConfig":
        raw: dict = {}
        base = Path.cwd()
        if path is not None:
            path = Path(path)
            try:
                raw = json.loads(path.read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from exc
            # a manifest carries the resolved config it was produced from
            if isinstance(raw, dict) and "manifest_version" in raw:
                raw = raw["config"]
            base = path.parent
        return cls.from_dict(raw, base, overrides)

    @classmethod
    def from_dict(cls, raw: dict, base_dir: Path | None = None, overrides: dict | None = None) -> "RunConfig":
        try:
            jsonschema.validate(raw, SCHEMA)
        except jsonschema.ValidationError as exc:
            raise ConfigError(f"invalid config: {exc.message} at {list(exc.absolute_path)}") from exc
        data = _merge(DEFAULTS, raw)
        data = _merge(data, overrides or {})
        cfg = cls(data, base_dir or Path.cwd())
        cfg._validate()
        return cfg

    def _validate(self) -> None:
        for key in ("potential", "speed"):
            spec = self.data[key]
            if spec["family"] == "file":
                p = self.resolve(spec.get("path", ""))
                if not p.is_file():
                    raise ConfigError(f"{key} file {p} does not exist")
        if self.data["grid"]["dt"] is not None:
            sg = self.spatial_grid()
            lam = cfl_number(self.speed(sg), sg, self.time_grid(sg))
            if lam > 1:
                raise ConfigError(f"CFL number {lam:.4g} exceeds 1 for the configured dt")
        for key in ("source", "source2"):
            s = self.data[key]
            if s["kind"] == "bump" and not s.get("t_hi", 0) > s.get("t_lo", 0):
                raise ConfigError(f"{key}: need t_hi > t_lo")

    def resolve(self, p: str) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p

    def __getitem__(self, key):
        return self.data[key]

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.data, sort_keys=True).encode()).hexdigest()

    # -- grids

    def spatial_grid(self, refine: int = 1) -> SpatialGrid:
        return SpatialGrid((self.data["grid"]["n_x"] - 1) * refine + 1)

    def time_grid(self, sg: SpatialGrid | None = None, t_max: float | None = None) -> TimeGrid:
        """Configured ``dt``, or the step aligned to both the s-grid and the T-grid."""
        from .reconstruct import working_time_grid

        g = self.data["grid"]
        t_max = g["t_max"] if t_max is None else t_max
        sg = sg or self.spatial_grid()
        if g["dt"] is not None:
            return TimeGrid.covering(t_max, g["dt"])
        return working_time_grid(sg.dx, t_max=t_max, ds=g["ds"], cfl=g["cfl"])

    # -- profiles

    def profile_fn(self, key: str) -> Callable | None:
        """Analytic callable for ``potential``/``speed``, ``None`` for file data."""
        spec = self.data[key]
        fam = spec["family"]
        if fam == "zero":
            return lambda x: np.zeros_like(np.asarray(x, float))
        if fam == "constant":
            v = spec.get("value", 1.0)
            return lambda x: np.full_like(np.asarray(x, float), v)
        if fam == "bump":
            a, lo, hi = spec.get("amp", 5.0), spec.get("lo", 0.2), spec.get("hi", 0.8)
            return lambda x: a * bump(x, lo, hi)
        if fam == "gauss":
            a, c, r = spec.get("amp", 5.0), spec.get("center", 0.4), spec.get("rate", 50.0)
            return lambda x: a * np.exp(-r * (np.asarray(x, float) - c) ** 2)
        if fam == "sinbump":
            lo, hi = spec.get("lo", 0.1), spec.get("hi", 0.9)
            return lambda x: (2 + np.sin(3 * np.asarray(x, float))) * bump(x, lo, hi)
        if fam == "linear":
            v, b = spec.get("value", 1.0), spec.get("slope", 0.5)
            return lambda x: v + b * np.asarray(x, float)
        return None

    def _profile(self, key: str, sg: SpatialGrid) -> np.ndarray:
        fn = self.profile_fn(key)
        if fn is not None:
            return np.asarray(fn(sg.x), float)
        arr = io.read_grid(self.resolve(self.data[key]["path"]))
        if arr.shape != (sg.n_x,):
            raise ConfigError(f"{key} file has shape {arr.shape}, expected ({sg.n_x},)")
        return arr

    def potential(self, sg: SpatialGrid) -> np.ndarray:
        return self._profile("potential", sg)

    def speed(self, sg: SpatialGrid) -> np.ndarray:
        return self._profile("speed", sg)

    def source(self, key: str = "source") -> SourceSignal:
        s = self.data[key]
        if s["kind"] == "zero":
            return SourceSignal.zero()
        return SourceSignal.make_bump(s["t_lo"], s["t_hi"], s.get("amplitude", 1.0))
