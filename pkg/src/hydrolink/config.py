"""Config-file plumbing: JSON sections to dataclasses, env overrides.

A config file is one JSON object with optional sections "spectrum",
"grid", "scenario", "env", "reward", "screen" and "train".  Angles live
in radians; any angular key may instead be given with a "_deg" suffix and
is converted on load.  Environment variables override single keys with
the pattern HYDROLINK_<SECTION>__<FIELD>=<json-value>.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict

from .ddpg import Hyperparams
from .optics import ChannelScenario
from .ray_tracer import ScreenConfig
from .rl_env import EnvConfig, RewardCoeffs
from .sea_surface import SynthesisGrid
from .wave_spectrum import SpectrumParams

ENV_PREFIX = "HYDROLINK_"

_SECTIONS = ("spectrum", "grid", "scenario", "env", "reward", "screen", "train")


def load_config(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ValueError("config root must be a JSON object")
    return cfg


def apply_env_overrides(cfg: dict, environ=None) -> dict:
    """Merge HYDROLINK_SECTION__FIELD=value pairs into a config dict."""
    environ = os.environ if environ is None else environ
    out = {k: dict(v) if isinstance(v, dict) else v for k, v in cfg.items()}
    for key, raw in environ.items():
        if not key.startswith(ENV_PREFIX):
            continue
        rest = key[len(ENV_PREFIX) :]
        if "__" not in rest:
            continue
        section, field_name = rest.split("__", 1)
        section = section.lower()
        if section not in _SECTIONS:
            continue
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        out.setdefault(section, {})[field_name.lower()] = value
    return out


def _convert_degrees(section: dict) -> dict:
    out = {}
    for key, value in section.items():
        if key.endswith("_deg"):
            base = key[: -len("_deg")]
            if isinstance(value, (list, tuple)):
                out[base] = tuple(math.radians(float(v)) for v in value)
            else:
                out[base] = math.radians(float(value))
        else:
            out[key] = value
    return out


def spectrum_from_dict(section: dict | None) -> SpectrumParams:
    section = _convert_degrees(section or {})
    section.setdefault("wind_speed_u10", 12.0)
    section.setdefault("fetch_xf", 2e4)
    return SpectrumParams(**section)


def grid_from_dict(section: dict | None, spectrum: SpectrumParams) -> SynthesisGrid:
    section = dict(section or {})
    if "omega_min" in section and "omega_max" in section:
        return SynthesisGrid(**section)
    return SynthesisGrid.default_for(
        spectrum,
        n_omega=int(section.get("n_omega", 64)),
        n_theta=int(section.get("n_theta", 36)),
    )


def scenario_from_dict(section: dict | None) -> ChannelScenario:
    section = _convert_degrees(section or {})
    if "rx_euler" in section:
        section["rx_euler"] = tuple(section["rx_euler"])
    return ChannelScenario(**section)


def reward_from_dict(section: dict | None) -> RewardCoeffs:
    return RewardCoeffs(**(section or {}))


def screen_from_dict(section: dict | None) -> ScreenConfig:
    return ScreenConfig(**_convert_degrees(section or {}))


def hyperparams_from_dict(section: dict | None) -> Hyperparams:
    section = dict(section or {})
    for key in ("actor_layers", "critic_layers"):
        if key in section:
            section[key] = tuple(section[key])
    return Hyperparams(**section)


def env_config_from_dict(cfg: dict) -> EnvConfig:
    spectrum = spectrum_from_dict(cfg.get("spectrum"))
    grid = grid_from_dict(cfg.get("grid"), spectrum)
    scenario = scenario_from_dict(cfg.get("scenario"))
    reward = reward_from_dict(cfg.get("reward"))
    env = _convert_degrees(cfg.get("env") or {})
    return EnvConfig(
        scenario=scenario, spectrum=spectrum, grid=grid, reward_coeffs=reward, **env
    )


def env_config_to_dict(config: EnvConfig) -> dict:
    """Plain-JSON echo of a full environment config."""
    scenario = asdict(config.scenario)
    scenario["tx_pos"] = list(map(float, scenario["tx_pos"]))
    scenario["rx_pos"] = list(map(float, scenario["rx_pos"]))
    scenario["rx_euler"] = list(map(float, scenario["rx_euler"]))
    return {
        "spectrum": asdict(config.spectrum),
        "grid": asdict(config.grid),
        "scenario": scenario,
        "reward": asdict(config.reward_coeffs),
        "env": {
            "sample_time": config.sample_time,
            "max_steps": config.max_steps,
            "horizontal_offset_frac": config.horizontal_offset_frac,
            "episode_seed_policy": config.episode_seed_policy,
            "theta_max": config.theta_max,
            "acceptance_half_angle": config.acceptance_half_angle,
            "march_step": config.march_step,
        },
    }
