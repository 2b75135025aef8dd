import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import yaml

from helmkit_inversion.errors import ConfigError
from helmkit_inversion.forward.scenario import Scenario
from helmkit_inversion.geometry.scatterers import geometry_from_config
from helmkit_inversion.reconstruct.objectives import ObjectiveVariant, parse_variant
from helmkit_inversion.reconstruct.problem import SolverSettings

OUTPUT_DIR_ENV = "HELMKIT_OUTPUT_DIR"

# physics parameters never get defaults
_REQUIRED_SCENARIO_KEYS = (
    "k",
    "q0",
    "q_inclusion",
    "q_min_assumed",
    "n1",
    "noise_level",
    "d_tilde",
    "noise_seed",
    "inversion_h",
    "geometry",
)


_TOP_LEVEL_KEYS = ("scenario", "output_dir", "reconstruct", "negcount", "dtilde", "render")


def load_config(config_path: str) -> Dict[str, Any]:
    """Load configuration from YAML file.

    Args:
        config_path: Path to the configuration YAML (or JSON) file

    Returns:
        Configuration dictionary

    Raises:
        FileNotFoundError: If config file doesn't exist
        yaml.YAMLError: If config file is malformed
    """
    try:
        with open(config_path, "r") as f:
            return yaml.safe_load(f)
    except FileNotFoundError:
        raise FileNotFoundError(f"Configuration file not found: {config_path}")
    except yaml.YAMLError as e:
        raise yaml.YAMLError(f"Error parsing configuration file {config_path}: {e}")


@dataclass(frozen=True)
class RunConfig:
    """Everything one pipeline run needs.

    Attributes:
        scenario: Physical and discretization parameters
        output_dir: Directory for all artifacts, None if unset
        variant: Objective used by the reconstruct command
        settings: Subgradient solver settings
        alpha: Contrast for the negative-count field
        r0_values: Radii swept by the dtilde command
        dtilde_h: Mesh size of the dtilde sweep
        resolution: Raster size of the render command
    """

    scenario: Scenario
    output_dir: Optional[str] = None
    variant: ObjectiveVariant = ObjectiveVariant.EIGSUM_PENALIZED
    settings: SolverSettings = field(default_factory=SolverSettings)
    alpha: float = 0.0
    r0_values: List[float] = field(default_factory=lambda: [1.0])
    dtilde_h: float = 0.05
    resolution: int = 256

    def resolve_output_dir(self, override: Optional[str] = None) -> str:
        """--out flag, then config output_dir, then $HELMKIT_OUTPUT_DIR."""
        out = override or self.output_dir or os.getenv(OUTPUT_DIR_ENV)
        if not out:
            raise ConfigError(
                f"No output directory: pass --out, set output_dir or {OUTPUT_DIR_ENV}"
            )
        return out


def _number(section: Dict[str, Any], key: str, kind=float):
    try:
        value = section[key]
    except KeyError:
        raise ConfigError(f"Missing required key '{key}'")
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"Key '{key}' must be an integer, got {value!r}")
        return value
    try:
        return float(value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Key '{key}' must be a number: {e}")


def parse_scenario(section: Dict[str, Any]) -> Scenario:
    """Build a Scenario from the 'scenario' mapping of a run config.

    Raises:
        ConfigError: If a required key is missing or a value is invalid
    """
    if not isinstance(section, dict):
        raise ConfigError("'scenario' must be a mapping")
    missing = [key for key in _REQUIRED_SCENARIO_KEYS if key not in section]
    if missing:
        raise ConfigError(f"Scenario is missing required keys: {missing}")

    inversion_h = _number(section, "inversion_h")
    forward_h = (
        _number(section, "forward_h") if section.get("forward_h") is not None else inversion_h / 2
    )
    omega0 = section.get("omega0_radius")
    return Scenario(
        k=_number(section, "k"),
        q0=_number(section, "q0"),
        geometry=geometry_from_config(section["geometry"]),
        q_inclusion=_number(section, "q_inclusion"),
        q_min_assumed=_number(section, "q_min_assumed"),
        n1=_number(section, "n1", int),
        noise_level=_number(section, "noise_level"),
        d_tilde=_number(section, "d_tilde", int),
        noise_seed=_number(section, "noise_seed", int),
        inversion_h=inversion_h,
        forward_h=forward_h,
        omega0_radius=None if omega0 is None else float(omega0),
    )


def parse_run_config(config: Dict[str, Any]) -> RunConfig:
    """Validate a loaded config document.

    Args:
        config: Mapping with a 'scenario' section and optional 'output_dir',
            'reconstruct', 'negcount', 'dtilde' and 'render' sections

    Returns:
        RunConfig

    Raises:
        ConfigError: Naming the offending key
    """
    if not isinstance(config, dict) or "scenario" not in config:
        raise ConfigError("Config must be a mapping with a 'scenario' section")
    unknown = set(config) - set(_TOP_LEVEL_KEYS)
    if unknown:
        raise ConfigError(f"Unknown config sections: {sorted(unknown)}")

    recon = config.get("reconstruct") or {}
    settings_keys = set(SolverSettings.__dataclass_fields__)
    unknown = set(recon) - settings_keys - {"variant"}
    if unknown:
        raise ConfigError(f"Unknown reconstruct settings: {sorted(unknown)}")
    settings = SolverSettings(**{k: v for k, v in recon.items() if k in settings_keys})

    dtilde = config.get("dtilde") or {}
    render = config.get("render") or {}
    negcount = config.get("negcount") or {}
    return RunConfig(
        scenario=parse_scenario(config["scenario"]),
        output_dir=config.get("output_dir"),
        variant=parse_variant(recon.get("variant", ObjectiveVariant.EIGSUM_PENALIZED.value)),
        settings=settings,
        alpha=float(negcount.get("alpha", 0.0)),
        r0_values=[float(r) for r in dtilde.get("r0", [1.0])],
        dtilde_h=float(dtilde.get("mesh_h", 0.05)),
        resolution=int(render.get("resolution", 256)),
    )
