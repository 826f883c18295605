"""Experiment configuration: a sectioned key=value file with a fixed schema.

Every key is validated against ``SCHEMA``; an unknown section or key, or a
value that does not parse, raises ``ConfigError`` naming ``section.key``.
"""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import dataclass, field

from warpcone.errors import ConfigError


def _floats(text):
    return [float(x) for x in text.replace(",", " ").split()]


def _ints(text):
    return [int(x) for x in text.replace(",", " ").split()]


def _vectors(text):
    """Rows separated by ';', entries by spaces or commas."""
    return [_floats(row) for row in text.split(";") if row.strip()]


SCHEMA = {
    "experiment": {"seed": int, "t_coeff": float, "samples": int, "bound": float, "gamma_radius": int,
                   "tower_samples": _ints},
    "space": {"kind": str, "dim": int},
    "group": {"kind": str, "dim": int, "rank": int, "n": int},
    "action": {"kind": str, "angles": _floats, "vectors": _vectors},
    "net": {"eps": float, "eps_scale": float, "weight_samples": int, "probes": int, "mesh_scale": float,
            "spacing": float},
    "sweep": {"t": _floats, "r": _ints, "threshold": float, "K": float, "C": float, "R": float,
              "action_radius": int},
    "tolerances": {"spectral": float, "trivialization": float, "quadrature": float},
    "caps": {"net": int, "maps": int, "gh_budget": int},
    "output": {"dir": str, "prefix": str},
}

DEFAULTS = {
    "experiment": {"seed": 0, "t_coeff": 20.0, "samples": 20000, "bound": 6.0, "gamma_radius": 1,
                   "tower_samples": [1000, 4000, 16000]},
    "space": {"kind": "circle"},
    "group": {"kind": "z", "dim": 1},
    "action": {"kind": "rotation", "angles": [0.41421356237309515]},
    "net": {"eps_scale": 0.1, "weight_samples": 200_000, "probes": 20_000, "mesh_scale": 0.5, "spacing": 1.0},
    "sweep": {"t": [10.0, 20.0, 40.0], "r": [1, 2], "threshold": 1.0, "K": 1.4, "C": 0.5, "R": 1.0,
              "action_radius": 1},
    "tolerances": {"spectral": 1e-6, "trivialization": 0.5, "quadrature": 1e-8},
    "caps": {"net": 20_000, "maps": 2000, "gh_budget": 64},
    "output": {"dir": "out", "prefix": ""},
}


@dataclass
class ExperimentConfig:
    values: dict = field(default_factory=dict)
    source: str = "<defaults>"

    def get(self, section, key, default=None):
        return self.values.get(section, {}).get(key, default)

    def section(self, name) -> dict:
        return dict(self.values.get(name, {}))

    def hashed(self) -> dict:
        """Everything that determines results; the output location is excluded."""
        return {k: v for k, v in self.values.items() if k != "output"}

    def canonical(self) -> str:
        return json.dumps(self.hashed(), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]


def _merge_defaults(parsed: dict) -> dict:
    out = {}
    for sec, keys in DEFAULTS.items():
        out[sec] = dict(keys)
        out[sec].update(parsed.get(sec, {}))
    return out


def parse_config_text(text: str, source: str = "<string>") -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, strict=True)
    parser.optionxform = str  # keys are case sensitive (K and C)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        key = getattr(exc, "option", None) or getattr(exc, "section", None) or "config"
        raise ConfigError(str(key), f"unreadable config: {exc.message if hasattr(exc, 'message') else exc}")
    parsed = {}
    for sec in parser.sections():
        if sec not in SCHEMA:
            raise ConfigError(sec, "unknown section")
        parsed[sec] = {}
        for key, raw in parser.items(sec):
            if key not in SCHEMA[sec]:
                raise ConfigError(f"{sec}.{key}", "unknown key")
            try:
                parsed[sec][key] = SCHEMA[sec][key](raw)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{sec}.{key}", f"malformed value {raw!r} ({exc})")
    return ExperimentConfig(_merge_defaults(parsed), source)


def load_config(path) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig(_merge_defaults({}))
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc.strerror}")
    return parse_config_text(text, str(path))
