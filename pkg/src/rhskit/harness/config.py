"""Experiment configuration: TOML in, validated and fully defaulted config out."""

from __future__ import annotations

import copy
import sys
from dataclasses import dataclass
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..errors import ConfigError

KINDS = ("pattern", "comm", "hdma", "codebook", "radar", "isac", "compare-ris", "cost")

REQUIRED = object()


def _geometry(n=16):
    return {"n_y": n, "n_z": n, "wavelength": 1.0, "spacing": None, "n_g": 1.732, "n_feeds": 1}


_OPT = {"tol": 1e-6, "max_iters": 30}

SCHEMA = {
    "pattern": {
        "geometry": _geometry(),
        "pattern": {
            "theta_deg": REQUIRED,
            "phi_deg": REQUIRED,
            "bits": 0,
            "feed": 0,
            "step_deg": 1.0,
            "theta_range": [0.0, 180.0],
            "phi_range": [-90.0, 90.0],
        },
    },
    "comm": {
        "geometry": _geometry(8),
        "optimizer": dict(_OPT),
        "comm": {
            "mode": "optimize",
            "users": 2,
            "rx_antennas": 2,
            "paths": 3,
            "sigma2": 1.0,
            "P_T": 1.0,
            "scenarios": 4,
            "bits": 0,
            "snr_db": 0.0,
            "user_phi_deg": [-30.0, 25.0],
            "chi": 10.0,
            "n_max": 1024,
        },
        "sweep": {"c": [], "target_rate": []},
    },
    "hdma": {
        "hdma": {"nu": 1.0, "chi": 10.0, "snr_db": 0.0, "user_phi_deg": [-30.0, 25.0]},
        "sweep": {"n_elements": REQUIRED, "beta_ratio": REQUIRED},
    },
    "codebook": {
        "codebook": {"T": 4, "trials": 100, "snr_db": 20.0, "r_min": 20.0, "wavelength": 1.0},
        "sweep": {"N": REQUIRED},
    },
    "radar": {
        "radar": {"p_fa": 0.01, "trials": 100000},
        "sweep": {"gamma_db": REQUIRED},
    },
    "isac": {
        "geometry": {**_geometry(8), "n_feeds": 3},
        "optimizer": dict(_OPT),
        "isac": {
            "users_deg": [[90.0, -40.0], [60.0, 35.0]],
            "targets_deg": [[80.0, 0.0], [110.0, -15.0]],
            "sigma2": 0.02,
            "P_T": 1.0,
            "rho": 0.8,
        },
        "sweep": {"sinr_min_db": REQUIRED},
    },
    "compare-ris": {
        "ris": {
            "kappa": 0.2,
            "feed_distance": 1.0,
            "amplitude": 1.0,
            "decay_alpha": 0.05,
            "divider_loss_db": 0.5,
            "target_theta_deg": 90.0,
            "target_phi_deg": 30.0,
        },
        "sweep": {"freq_hz": REQUIRED, "edge": REQUIRED},
    },
    "cost": {
        "cost": {"nu": 1.0, "chi": 10.0, "K": 1, "P_M": 1.0, "rho": 0.8},
        "sweep": {"delta": REQUIRED, "beta_ratio": REQUIRED},
    },
}

# sweep axes that may not be empty, per kind (comm depends on its mode)
SWEEP_AXES = {
    "hdma": ("n_elements", "beta_ratio"),
    "codebook": ("N",),
    "radar": ("gamma_db",),
    "isac": ("sinr_min_db",),
    "compare-ris": ("freq_hz", "edge"),
    "cost": ("delta", "beta_ratio"),
}

OUTPUT_DEFAULTS = {"dir": "results", "plots": False}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    seed: int
    sections: dict
    output: dict
    source: str | None = None

    def __getitem__(self, section):
        return self.sections[section]

    def materialized(self) -> dict:
        """Run-defining content (output location excluded), used for hashing."""
        return {"kind": self.kind, "seed": self.seed, **copy.deepcopy(self.sections)}


def _check_type(where, default, value):
    if default is None or default is REQUIRED:
        return value
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false, got {value!r}")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    if isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected an array, got {value!r}")
        return value
    return value


def validate(raw: dict, seed_override=None, source=None) -> ExperimentConfig:
    raw = copy.deepcopy(raw)
    if "kind" not in raw:
        raise ConfigError("key 'kind': missing experiment kind")
    kind = raw.pop("kind")
    if kind not in KINDS:
        raise ConfigError(f"key 'kind': unknown experiment kind {kind!r} (expected one of {', '.join(KINDS)})")
    seed = raw.pop("seed", None)
    if seed_override is not None:
        seed = seed_override
    if seed is None:
        raise ConfigError("key 'seed': a seed is required for reproducibility")
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError(f"key 'seed': expected a non-negative integer, got {seed!r}")
    output = dict(OUTPUT_DEFAULTS)
    out_raw = raw.pop("output", {})
    if not isinstance(out_raw, dict):
        raise ConfigError("key 'output': expected a table")
    for k, v in out_raw.items():
        if k not in output:
            raise ConfigError(f"key 'output.{k}': unknown key")
        output[k] = _check_type(f"key 'output.{k}'", OUTPUT_DEFAULTS[k], v)

    schema = SCHEMA[kind]
    sections = {}
    for name, value in raw.items():
        if name not in schema:
            raise ConfigError(f"key '{name}': unknown section for kind {kind!r}")
        if not isinstance(value, dict):
            raise ConfigError(f"key '{name}': expected a table")
    for name, defaults in schema.items():
        given = raw.get(name, {})
        sec = {}
        for k in given:
            if k not in defaults:
                raise ConfigError(f"key '{name}.{k}': unknown key")
        for k, d in defaults.items():
            if k in given:
                sec[k] = _check_type(f"key '{name}.{k}'", d, given[k])
            elif d is REQUIRED:
                raise ConfigError(f"key '{name}.{k}': required")
            else:
                sec[k] = copy.deepcopy(d)
        sections[name] = sec

    if "geometry" in sections:
        g = sections["geometry"]
        if g["wavelength"] <= 0:
            raise ConfigError("key 'geometry.wavelength': must be positive")
        if g["spacing"] is None:
            g["spacing"] = g["wavelength"] / 3
        elif not isinstance(g["spacing"], (int, float)) or g["spacing"] <= 0:
            raise ConfigError("key 'geometry.spacing': must be a positive number")
        g["spacing"] = float(g["spacing"])
        for k in ("n_y", "n_z", "n_feeds"):
            if g[k] < 1:
                raise ConfigError(f"key 'geometry.{k}': must be >= 1")

    axes = SWEEP_AXES.get(kind, ())
    if kind == "comm":
        mode = sections["comm"]["mode"]
        if mode not in ("optimize", "cost-sweep"):
            raise ConfigError(f"key 'comm.mode': unknown mode {mode!r}")
        if mode == "cost-sweep":
            axes = ("c", "target_rate")
    for a in axes:
        v = sections["sweep"][a]
        if not isinstance(v, list) or len(v) == 0:
            raise ConfigError(f"key 'sweep.{a}': sweep axis must be a non-empty array")
    return ExperimentConfig(kind, seed, sections, output, source)


def load_config(path, seed_override=None) -> ExperimentConfig:
    """Parse and validate a TOML experiment file.

    Parse errors keep the parser's line and column; validation errors name
    the offending key.
    """
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {p}: {e.strerror or e}") from e
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{p}: {e}") from e
    return validate(raw, seed_override, str(p))
