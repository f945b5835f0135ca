"""Declarative run configuration: YAML in, validated settings out.

Every run is described by one file; initial data and forcing come from
named catalogs so a config never contains code.  Validation errors carry
the dotted key path of the offending entry.
"""

from __future__ import annotations

import math

import numpy as np
import yaml

from .basis import build_basis
from .catalog import DENSITY_KINDS, VELOCITY_KINDS, make_density, make_velocity
from .harness import StudyPlan, density_exponent_limit
from .solver import FORCING_KINDS, ForcingSpec, SolverConfig


class ConfigError(Exception):
    """Invalid or missing configuration entry, with its key path."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


_SOLVER_DEFAULTS = {
    "basis_size": 8,
    "grid_size": 24,
    "dt": 1e-3,
    "t_end": 1.0,
}
_TOP_KEYS = (
    "basis_size",
    "grid_size",
    "dt",
    "t_end",
    "forcing",
    "initial_velocity",
    "initial_density",
    "output",
    "converge",
    "perturb",
)


def _require_mapping(node, path):
    if node is None:
        return {}
    if not isinstance(node, dict):
        raise ConfigError(path, f"expected a mapping, got {type(node).__name__}")
    return node


def _sub(path, key):
    return f"{path}.{key}" if path else key


def _number(section, key, path, default=None, minimum=None, allow_inf=False):
    if key not in section or section[key] is None:
        if default is None:
            raise ConfigError(_sub(path, key), "missing required entry")
        return default
    value = section[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(_sub(path, key), f"expected a number, got {value!r}")
    value = float(value)
    if not np.isfinite(value) and not (allow_inf and value == math.inf):
        raise ConfigError(_sub(path, key), f"must be finite, got {value}")
    if minimum is not None and value < minimum:
        raise ConfigError(
            _sub(path, key), f"must be at least {minimum}, got {value:g}"
        )
    return value


def _integer(section, key, path, default=None, minimum=None):
    if key not in section or section[key] is None:
        if default is None:
            raise ConfigError(_sub(path, key), "missing required entry")
        return default
    value = section[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(_sub(path, key), f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(
            _sub(path, key), f"must be at least {minimum}, got {value}"
        )
    return value


def _number_list(section, key, path, default=None, minimum=None):
    if key not in section or section[key] is None:
        if default is None:
            raise ConfigError(_sub(path, key), "missing required entry")
        return list(default)
    raw = section[key]
    if isinstance(raw, (int, float)) and not isinstance(raw, bool):
        raw = [raw]
    if not isinstance(raw, list) or not raw:
        raise ConfigError(_sub(path, key), f"expected a nonempty list, got {raw!r}")
    out = []
    for i, v in enumerate(raw):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(
                f"{_sub(path, key)}[{i}]", f"expected a number, got {v!r}"
            )
        if minimum is not None and v < minimum:
            raise ConfigError(
                f"{_sub(path, key)}[{i}]", f"must be at least {minimum}, got {v}"
            )
        out.append(float(v))
    return out


def _check_unknown(section, allowed, path):
    for key in section:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}" if path else key, "unknown key")


def parse_config(path: str) -> dict:
    """Load and validate a run description, filling defaults.

    Returns the canonical nested dict; builder functions below turn its
    sections into solver objects.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(path, "config file not found")
    except yaml.YAMLError as exc:
        raise ConfigError(path, f"not valid YAML: {exc}")
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(path, "top level must be a mapping")
    _check_unknown(raw, _TOP_KEYS, "")

    cfg = {}
    cfg["basis_size"] = _integer(raw, "basis_size", "", _SOLVER_DEFAULTS["basis_size"], 1)
    cfg["grid_size"] = _integer(raw, "grid_size", "", _SOLVER_DEFAULTS["grid_size"], 4)
    cfg["dt"] = _number(raw, "dt", "", _SOLVER_DEFAULTS["dt"])
    if cfg["dt"] <= 0:
        raise ConfigError("dt", f"must be positive, got {cfg['dt']:g}")
    cfg["t_end"] = _number(raw, "t_end", "", _SOLVER_DEFAULTS["t_end"], minimum=0.0)

    forcing = _require_mapping(raw.get("forcing"), "forcing")
    _check_unknown(forcing, ("kind", "amplitude", "mode", "omega"), "forcing")
    kind = forcing.get("kind", "zero")
    if kind not in FORCING_KINDS:
        raise ConfigError("forcing.kind", f"unknown kind {kind!r}, expected one of {FORCING_KINDS}")
    amplitude = _number(forcing, "amplitude", "forcing", default=0.0)
    modes = []
    if kind != "zero":
        modes = [
            int(v)
            for v in _number_list(forcing, "mode", "forcing", minimum=0)
        ]
    omega = _number(forcing, "omega", "forcing", default=0.0)
    cfg["forcing"] = {"kind": kind, "amplitude": amplitude, "mode": modes, "omega": omega}

    velocity = _require_mapping(raw.get("initial_velocity"), "initial_velocity")
    _check_unknown(
        velocity,
        ("kind", "amplitude", "coefficients", "seed", "band"),
        "initial_velocity",
    )
    if "coefficients" in velocity and velocity["coefficients"] is not None:
        coeffs = _number_list(velocity, "coefficients", "initial_velocity")
        vkind = velocity.get("kind", "modes")
        if vkind != "modes":
            raise ConfigError(
                "initial_velocity.kind",
                f"coefficient lists require kind 'modes', got {vkind!r}",
            )
        cfg["initial_velocity"] = {"kind": "modes", "coefficients": coeffs}
    else:
        vkind = velocity.get("kind", "zero")
        if vkind not in VELOCITY_KINDS:
            raise ConfigError(
                "initial_velocity.kind",
                f"unknown kind {vkind!r}, expected one of {VELOCITY_KINDS}",
            )
        if vkind == "modes":
            raise ConfigError("initial_velocity.coefficients", "missing required entry")
        entry = {"kind": vkind}
        if vkind != "zero":
            entry["amplitude"] = _number(velocity, "amplitude", "initial_velocity", default=1.0)
        if vkind == "random_band":
            if "seed" in velocity and velocity["seed"] is not None:
                entry["seed"] = _integer(velocity, "seed", "initial_velocity")
            if "band" in velocity and velocity["band"] is not None:
                band = _number_list(velocity, "band", "initial_velocity", minimum=0)
                if len(band) != 2:
                    raise ConfigError(
                        "initial_velocity.band", f"expected two entries, got {len(band)}"
                    )
                entry["band"] = [int(band[0]), int(band[1])]
        cfg["initial_velocity"] = entry

    density = _require_mapping(raw.get("initial_density"), "initial_density")
    _check_unknown(
        density, ("kind", "alpha", "beta", "value", "sharpness"), "initial_density"
    )
    dkind = density.get("kind", "uniform")
    if dkind not in DENSITY_KINDS:
        raise ConfigError(
            "initial_density.kind",
            f"unknown kind {dkind!r}, expected one of {DENSITY_KINDS}",
        )
    alpha = _number(density, "alpha", "initial_density", default=0.5)
    beta = _number(density, "beta", "initial_density", default=1.5)
    if alpha <= 0:
        raise ConfigError("initial_density.alpha", f"must be positive, got {alpha:g}")
    if beta < alpha:
        raise ConfigError(
            "initial_density.beta", f"must be at least alpha = {alpha:g}, got {beta:g}"
        )
    entry = {"kind": dkind, "alpha": alpha, "beta": beta}
    if dkind == "uniform" and density.get("value") is not None:
        entry["value"] = _number(density, "value", "initial_density")
        if not alpha <= entry["value"] <= beta:
            raise ConfigError(
                "initial_density.value",
                f"{entry['value']:g} outside [{alpha:g}, {beta:g}]",
            )
    if dkind == "stratified":
        entry["sharpness"] = _number(
            density, "sharpness", "initial_density", default=3.0
        )
        if entry["sharpness"] <= 0:
            raise ConfigError(
                "initial_density.sharpness",
                f"must be positive, got {entry['sharpness']:g}",
            )
    cfg["initial_density"] = entry

    output = _require_mapping(raw.get("output"), "output")
    _check_unknown(output, ("stride", "directory"), "output")
    directory = output.get("directory", "out")
    if not isinstance(directory, str) or not directory:
        raise ConfigError("output.directory", f"expected a directory name, got {directory!r}")
    cfg["output"] = {
        "stride": _integer(output, "stride", "output", default=1, minimum=1),
        "directory": directory,
    }

    basis = build_basis(cfg["basis_size"])
    if cfg["grid_size"] < 3 * basis.k_max + 1:
        raise ConfigError(
            "grid_size",
            f"{cfg['grid_size']} too small for basis_size {cfg['basis_size']}; "
            f"need at least {3 * basis.k_max + 1}",
        )

    if raw.get("converge") is not None:
        section = _require_mapping(raw["converge"], "converge")
        _check_unknown(
            section,
            ("n_list", "n_ref", "checkpoints", "r_list", "p_exponent"),
            "converge",
        )
        n_list = [
            int(v) for v in _number_list(section, "n_list", "converge", minimum=1)
        ]
        n_ref = _integer(section, "n_ref", "converge", minimum=1)
        checkpoints = _number_list(section, "checkpoints", "converge", minimum=0.0)
        p_exponent = _number(
            section, "p_exponent", "converge", default=6.0, allow_inf=True
        )
        limit = density_exponent_limit(p_exponent)
        r_list = _number_list(section, "r_list", "converge", default=[2.0, 3.0])
        for i, r in enumerate(r_list):
            if not 2.0 <= r <= limit:
                raise ConfigError(
                    f"converge.r_list[{i}]",
                    f"{r:g} outside [2, {limit:g}] for p_exponent {p_exponent:g}",
                )
        cfg["converge"] = {
            "n_list": n_list,
            "n_ref": n_ref,
            "checkpoints": checkpoints,
            "r_list": r_list,
            "p_exponent": p_exponent,
        }

    if raw.get("perturb") is not None:
        section = _require_mapping(raw["perturb"], "perturb")
        _check_unknown(
            section,
            (
                "gradient_bound",
                "roughness_bound",
                "density_bound",
                "p_exponent",
                "seeds",
                "t0",
                "horizon",
                "band",
            ),
            "perturb",
        )
        entry = {
            "gradient_bound": _number(section, "gradient_bound", "perturb"),
            "roughness_bound": _number(section, "roughness_bound", "perturb"),
            "density_bound": _number(section, "density_bound", "perturb"),
            "p_exponent": _number(
                section, "p_exponent", "perturb", default=6.0, allow_inf=True
            ),
            "seeds": [
                int(v)
                for v in _number_list(section, "seeds", "perturb", default=[0], minimum=0)
            ],
            "t0": _number_list(section, "t0", "perturb", default=[0.0], minimum=0.0),
            "horizon": _number(section, "horizon", "perturb"),
        }
        for key in ("gradient_bound", "roughness_bound", "density_bound", "horizon"):
            if entry[key] <= 0:
                raise ConfigError(f"perturb.{key}", f"must be positive, got {entry[key]:g}")
        if entry["p_exponent"] < 6.0:
            raise ConfigError(
                "perturb.p_exponent", f"must be at least 6, got {entry['p_exponent']:g}"
            )
        if "band" in section and section["band"] is not None:
            band = _number_list(section, "band", "perturb", minimum=0)
            if len(band) != 2:
                raise ConfigError("perturb.band", f"expected two entries, got {len(band)}")
            entry["band"] = [int(band[0]), int(band[1])]
        cfg["perturb"] = entry

    return cfg


def emit_config(cfg: dict, path: str) -> None:
    """Write a canonical config back to YAML; parse(emit(c)) == c."""
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(cfg, fh, sort_keys=True, default_flow_style=False)


def build_forcing(cfg: dict) -> ForcingSpec:
    section = cfg["forcing"]
    return ForcingSpec(
        kind=section["kind"],
        amplitude=section["amplitude"],
        modes=tuple(section["mode"]),
        omega=section["omega"],
    )


def build_initial_velocity(cfg: dict, basis_size: int, seed: int = 0):
    section = cfg["initial_velocity"]
    basis = build_basis(basis_size)
    kind = section["kind"]
    try:
        if kind == "modes":
            return make_velocity(basis, "modes", coefficients=section["coefficients"])
        kwargs = {}
        if kind != "zero":
            kwargs["amplitude"] = section.get("amplitude", 1.0)
        if kind == "random_band":
            kwargs["seed"] = section.get("seed", seed)
            if "band" in section:
                kwargs["band"] = tuple(section["band"])
        return make_velocity(basis, kind, **kwargs)
    except ValueError as exc:
        raise ConfigError("initial_velocity", str(exc))


def build_initial_density(cfg: dict):
    section = cfg["initial_density"]
    kwargs = {"alpha": section["alpha"], "beta": section["beta"]}
    if "value" in section:
        kwargs["value"] = section["value"]
    if "sharpness" in section:
        kwargs["sharpness"] = section["sharpness"]
    try:
        return make_density(cfg["grid_size"], section["kind"], **kwargs)
    except ValueError as exc:
        raise ConfigError("initial_density", str(exc))


def build_solver_config(cfg: dict, seed: int = 0, basis_size=None) -> SolverConfig:
    """Assemble the solver settings from a parsed config."""
    n = cfg["basis_size"] if basis_size is None else basis_size
    try:
        return SolverConfig(
            basis_size=n,
            grid_size=cfg["grid_size"],
            dt=cfg["dt"],
            t_end=cfg["t_end"],
            forcing=build_forcing(cfg),
            initial_velocity=build_initial_velocity(cfg, n, seed),
            initial_density=build_initial_density(cfg),
            stride=cfg["output"]["stride"],
        )
    except ValueError as exc:
        raise ConfigError("run", str(exc))


def build_study_plan(cfg: dict, seed: int = 0) -> StudyPlan:
    """Assemble the ladder study from a parsed config's converge block."""
    if "converge" not in cfg:
        raise ConfigError("converge", "missing required section")
    section = cfg["converge"]
    base = build_solver_config(cfg, seed, basis_size=section["n_ref"])
    try:
        return StudyPlan(
            base=base,
            n_list=tuple(section["n_list"]),
            n_ref=section["n_ref"],
            checkpoints=tuple(section["checkpoints"]),
            r_list=tuple(section["r_list"]),
            p_exponent=section["p_exponent"],
        )
    except ValueError as exc:
        raise ConfigError("converge", str(exc))
