"""Run configuration: TOML parsing, validation, defaults.

One config file describes an experiment; CLI flags may override single
keys but the persisted manifest always reflects the effective values.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field as dc_field

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .errors import ConfigurationError
from .grid import GridSpec, make_grid
from .profiles import SolitonFamily

__all__ = ["RunConfig", "parse_config", "config_digest"]


_SCHEMA = {
    "family": {"p", "speeds", "shifts"},
    "grid": {"num_points", "domain_length", "origin"},
    "evolve": {"dt", "record_stride", "dealias", "stability_factor"},
    "horizons": {"S", "t0"},
    "tolerances": {"shoot_tol", "tol_class", "gamma_eff_divisor"},
    "run": {"seed", "output_dir"},
}

_DEFAULTS = {
    "evolve": {"dt": 5e-4, "record_stride": 100, "dealias": True, "stability_factor": 5e6},
    "tolerances": {"shoot_tol": 1e-8, "tol_class": None, "gamma_eff_divisor": 16.0},
    "run": {"seed": 0, "output_dir": "out"},
}


@dataclass(frozen=True)
class RunConfig:
    family: SolitonFamily
    grid: GridSpec
    dt: float
    record_stride: int
    dealias: bool
    stability_factor: float
    horizon: float
    t_near: float
    shoot_tol: float
    tol_class: float | None
    gamma_eff_divisor: float
    seed: int
    output_dir: str
    raw: dict = dc_field(repr=False, default_factory=dict)

    def __post_init__(self):
        if not self.horizon > self.t_near:
            raise ConfigurationError(
                f"horizons.S = {self.horizon} must exceed horizons.t0 = {self.t_near}"
            )
        if not self.shoot_tol > 0:
            raise ConfigurationError("tolerances.shoot_tol must be positive")
        if not self.gamma_eff_divisor > 0:
            raise ConfigurationError("tolerances.gamma_eff_divisor must be positive")


def _require(table: dict, section: str, key: str):
    if key not in table:
        raise ConfigurationError(f"missing required key {section}.{key}")
    return table[key]


def parse_config(text: str) -> RunConfig:
    """Parse and validate a TOML experiment description."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"config parse error: {exc}") from exc

    for section, table in data.items():
        if section not in _SCHEMA:
            raise ConfigurationError(f"unknown config section [{section}]")
        if not isinstance(table, dict):
            raise ConfigurationError(f"[{section}] must be a table")
        for key in table:
            if key not in _SCHEMA[section]:
                raise ConfigurationError(f"unknown key {section}.{key}")

    for section in ("family", "grid", "horizons"):
        if section not in data:
            raise ConfigurationError(f"missing required section [{section}]")

    fam_t = data["family"]
    fam = SolitonFamily.from_lists(
        _require(fam_t, "family", "p"),
        _require(fam_t, "family", "speeds"),
        _require(fam_t, "family", "shifts"),
    )
    grid_t = data["grid"]
    grid = make_grid(
        _require(grid_t, "grid", "num_points"),
        _require(grid_t, "grid", "domain_length"),
        grid_t.get("origin", 0.0),
    )
    ev = {**_DEFAULTS["evolve"], **data.get("evolve", {})}
    tl = {**_DEFAULTS["tolerances"], **data.get("tolerances", {})}
    rn = {**_DEFAULTS["run"], **data.get("run", {})}
    hz = data["horizons"]
    return RunConfig(
        family=fam,
        grid=grid,
        dt=float(ev["dt"]),
        record_stride=int(ev["record_stride"]),
        dealias=bool(ev["dealias"]),
        stability_factor=float(ev["stability_factor"]),
        horizon=float(_require(hz, "horizons", "S")),
        t_near=float(_require(hz, "horizons", "t0")),
        shoot_tol=float(tl["shoot_tol"]),
        tol_class=None if tl["tol_class"] is None else float(tl["tol_class"]),
        gamma_eff_divisor=float(tl["gamma_eff_divisor"]),
        seed=int(rn["seed"]),
        output_dir=str(rn["output_dir"]),
        raw=data,
    )


def config_digest(cfg: RunConfig) -> str:
    """Stable hash of the effective configuration (not the raw text)."""
    eff = asdict(cfg)
    eff.pop("raw", None)
    eff["family"] = {
        "p": cfg.family.p,
        "speeds": list(cfg.family.speeds),
        "shifts": list(cfg.family.shifts),
    }
    eff["grid"] = {
        "num_points": cfg.grid.num_points,
        "domain_length": cfg.grid.domain_length,
        "origin": cfg.grid.origin,
    }
    return hashlib.sha256(
        json.dumps(eff, sort_keys=True, default=str).encode()
    ).hexdigest()
