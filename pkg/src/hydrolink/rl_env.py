"""Episodic beam-alignment environment over the simulated channel.

The agent steers the transmitter (pointing up) and receiver (pointing
down) with a 4-entry control vector; the environment advances the sea
surface by one sample interval, senses the received intensity along the
commanded transmitter ray, and shapes it into a reward that stays
informative over many orders of magnitude:

    reward(I) = G * (ln(a I + 1) + log10(b I) + exp(c I)) + B,

with I floored at a small positive value so the logarithm is defined for
missed beams.  Observations are the two unit pointing vectors, the
intensity and the relative episode time (8 entries); every transition is
a pure function of (state, action, config), so fixed seeds reproduce
episodes bit-exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .optics import (
    ChannelScenario,
    PathGeometry,
    arrival_gain,
    fresnel_transmittance,
)
from .ray_tracer import intersect_surface
from .sea_surface import SurfaceModel, SynthesisGrid, normal as surface_normal, synthesize
from .wave_spectrum import SpectrumParams


class InvalidStateError(Exception):
    """step() called on a finished episode."""


@dataclass(frozen=True)
class RewardCoeffs:
    """Scales of the log-exp reward shaping.

    a, b, c weight the three terms so they contribute comparable
    magnitudes for typical intensities; intensity_floor keeps the log
    terms finite when the beam misses entirely.
    """

    gain_G: float = 1.0
    a: float = 1e3
    b: float = 1e3
    c: float = 1.0
    bias_B: float = 0.0
    intensity_floor: float = 1e-12

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0 or self.c <= 0:
            raise ValueError("a, b, c must be > 0")
        if self.intensity_floor <= 0:
            raise ValueError("intensity_floor must be > 0")


@dataclass(frozen=True)
class EnvConfig:
    """Everything needed to build and run one environment instance."""

    scenario: ChannelScenario
    spectrum: SpectrumParams
    grid: SynthesisGrid
    sample_time: float = 0.05
    max_steps: int = 500
    horizontal_offset_frac: float = 0.0
    reward_coeffs: RewardCoeffs = field(default_factory=RewardCoeffs)
    episode_seed_policy: str = "fixed"
    theta_max: float = math.pi / 3
    acceptance_half_angle: float | None = None
    march_step: float = 0.1

    def __post_init__(self):
        if self.sample_time <= 0:
            raise ValueError("sample_time must be > 0")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.horizontal_offset_frac < 0:
            raise ValueError("horizontal_offset_frac must be >= 0")
        if self.episode_seed_policy not in ("fixed", "incrementing"):
            raise ValueError("episode_seed_policy must be 'fixed' or 'incrementing'")
        if not (0.0 < self.theta_max <= math.pi / 2):
            raise ValueError("theta_max must be in (0, pi/2]")

    def accept_angle(self) -> float:
        if self.acceptance_half_angle is not None:
            return self.acceptance_half_angle
        return 2.0 * self.scenario.omega_D

    def effective_scenario(self) -> ChannelScenario:
        """Scenario with the transmitter on the vertical axis and the
        receiver displaced by offset_frac times the vertical separation."""
        tx_z = self.scenario.tx_pos[2]
        rx_z = self.scenario.rx_pos[2]
        sep = abs(tx_z) + rx_z
        return replace(
            self.scenario,
            tx_pos=np.array([0.0, 0.0, tx_z]),
            rx_pos=np.array([self.horizontal_offset_frac * sep, 0.0, rx_z]),
        )


@dataclass(frozen=True)
class Observation:
    """8-entry agent input: tx direction, rx direction, intensity, time."""

    tx_dir: np.ndarray
    rx_dir: np.ndarray
    intensity: float
    rel_time: float

    def to_array(self) -> np.ndarray:
        return np.concatenate(
            [self.tx_dir, self.rx_dir, [self.intensity], [self.rel_time]]
        )


@dataclass(frozen=True)
class EnvState:
    surface: SurfaceModel
    t: float
    step_idx: int
    tx_dir: np.ndarray
    rx_dir: np.ndarray
    last_intensity: float


def clamp_action(action) -> np.ndarray:
    """Coerce to a 4-vector with every entry clipped to [-1, 1]."""
    a = np.asarray(action, dtype=float).reshape(-1)
    if a.shape != (4,):
        raise ValueError("action must have 4 entries")
    return np.clip(a, -1.0, 1.0)


def ctrl_to_direction(ctrl, hemisphere: str, theta_max: float = math.pi / 3) -> np.ndarray:
    """Map two controls in [-1, 1] to a unit pointing vector.

    The first entry sets the azimuth (pi * u), the second the polar angle
    (theta_max * (v + 1) / 2); hemisphere 'up' gives z > 0, 'down' z < 0.
    """
    c = np.clip(np.asarray(ctrl, dtype=float).reshape(-1), -1.0, 1.0)
    if c.shape != (2,):
        raise ValueError("ctrl must have 2 entries")
    phi = math.pi * c[0]
    pol = theta_max * (c[1] + 1.0) / 2.0
    z = math.cos(pol)
    if hemisphere == "down":
        z = -z
    elif hemisphere != "up":
        raise ValueError("hemisphere must be 'up' or 'down'")
    return np.array([math.sin(pol) * math.cos(phi), math.sin(pol) * math.sin(phi), z])


def direction_to_ctrl(direction, hemisphere: str, theta_max: float = math.pi / 3) -> np.ndarray:
    """Inverse of ctrl_to_direction on its open domain (polar angle > 0)."""
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    pol = math.acos(min(1.0, abs(d[2])))
    phi = math.atan2(d[1], d[0])
    u = phi / math.pi
    v = 2.0 * pol / theta_max - 1.0
    del hemisphere  # same encoding either way; kept for call-site clarity
    return np.clip(np.array([u, v]), -1.0, 1.0)


def reward(intensity: float, coeffs: RewardCoeffs) -> float:
    """Log-exp shaping of the received intensity; increasing above the floor."""
    i = max(float(intensity), coeffs.intensity_floor)
    return coeffs.gain_G * (
        math.log(coeffs.a * i + 1.0) + math.log10(coeffs.b * i) + math.exp(coeffs.c * i)
    ) + coeffs.bias_B


def sense_many(
    surface: SurfaceModel,
    scenario: ChannelScenario,
    t: float,
    tx_dirs,
    rx_dir,
    accept_half: float,
    march_step: float = 0.1,
    max_march: float | None = None,
):
    """Received intensity for a batch of candidate transmitter rays.

    Each ray is marched from the transmitter to the surface, refracted
    into the air, and scored with the full channel gain of the geometry it
    realises: the departure angle is zero (the path is the beam axis), the
    arrival angle is measured against rx_dir, and the beam counts as
    received only when the refracted ray passes the receiver within
    accept_half radians.  Total internal reflection, back-facing slopes
    and misses give zero.

    Returns (intensity (n,), dict of per-ray geometry arrays).
    """
    dirs = np.atleast_2d(np.asarray(tx_dirs, dtype=float))
    rx_dir = np.asarray(rx_dir, dtype=float)
    n = dirs.shape[0]
    if max_march is None:
        max_march = 10.0 * (abs(scenario.tx_pos[2]) + scenario.rx_pos[2])
    # deep bisection: the sensed intensity feeds reward and oracle checks,
    # so the hit point is resolved to well below a micrometre
    pts, s_hit, found = intersect_surface(
        scenario.tx_pos, dirs, surface, t, march_step, max_march, bisect_iters=34
    )
    out = np.zeros(n)
    aux = {
        "points": pts,
        "theta_1": np.zeros(n),
        "theta_2": np.zeros(n),
        "alpha_A": np.zeros(n),
        "d_water": s_hit,
        "d_air": np.zeros(n),
        "hit": np.zeros(n, dtype=bool),
        "refracted": np.zeros((n, 3)),
        "pre_arrival": np.zeros(n),
    }
    if not np.any(found):
        return out, aux

    nrm = np.atleast_2d(surface_normal(surface, pts[:, 0], pts[:, 1], t))
    cos_i = np.sum(dirs * nrm, axis=1)
    front = cos_i > 1e-9

    eta = scenario.n_water / scenario.n_air
    kk = 1.0 - eta * eta * (1.0 - cos_i**2)
    transmits = kk > 0.0
    cos_t = np.sqrt(np.where(transmits, kk, 0.0))
    v = eta * dirs - (eta * cos_i - cos_t)[:, None] * nrm

    to_rx = scenario.rx_pos[None, :] - pts
    d_air = np.linalg.norm(to_rx, axis=1)
    ok = found & front & transmits & (d_air > 1e-9)
    u = to_rx / np.where(d_air > 1e-9, d_air, 1.0)[:, None]
    miss = np.arccos(np.clip(np.sum(v * u, axis=1), -1.0, 1.0))
    hit = ok & (miss <= accept_half)

    theta_1 = np.arccos(np.clip(cos_i, -1.0, 1.0))
    theta_2 = np.arccos(np.clip(cos_t, -1.0, 1.0))
    alpha_a = np.arccos(np.clip(np.sum(-v * rx_dir[None, :], axis=1), -1.0, 1.0))

    th1 = np.where(hit, theta_1, 0.0)
    g_ref = fresnel_transmittance(th1, scenario.n_water, scenario.n_air)
    g_path = np.exp(-scenario.absorption * s_hit) / np.where(
        hit, (s_hit + d_air) ** 2, 1.0
    )
    a_in = np.where(hit & (alpha_a <= np.pi / 2), alpha_a, 0.0)
    g_arr = np.where(
        hit & (alpha_a <= np.pi / 2), arrival_gain(a_in, scenario), 0.0
    )
    pre = np.where(hit, g_ref * g_path, 0.0)
    out = pre * g_arr

    aux.update(
        theta_1=theta_1,
        theta_2=theta_2,
        alpha_A=alpha_a,
        d_air=d_air,
        hit=hit,
        refracted=v,
        pre_arrival=pre,
    )
    return out, aux


def sense_intensity(
    surface: SurfaceModel,
    scenario: ChannelScenario,
    t: float,
    tx_dir,
    rx_dir,
    accept_half: float,
    march_step: float = 0.1,
) -> tuple[float, PathGeometry | None]:
    """Single-ray received intensity plus the resolved path geometry."""
    out, aux = sense_many(
        surface, scenario, t, np.asarray(tx_dir)[None, :], rx_dir, accept_half, march_step
    )
    if not aux["hit"][0]:
        return 0.0, None
    geom = PathGeometry(
        alpha_D=0.0,
        alpha_A=min(float(aux["alpha_A"][0]), math.pi / 2),
        theta_1=float(aux["theta_1"][0]),
        theta_2=float(aux["theta_2"][0]),
        d_water=float(aux["d_water"][0]),
        d_air=float(aux["d_air"][0]),
        refraction_point=aux["points"][0],
    )
    return float(out[0]), geom


class WaterAirEnv:
    """Stateful wrapper pairing one surface realisation with the channel.

    reset() synthesises a fresh surface; step() applies an action,
    advances time by one sample interval and returns the
    (observation, reward, isdone, state) quadruple.  Instances are
    independent; a single instance is not thread safe.
    """

    def __init__(self, config: EnvConfig, base_seed: int = 0):
        self.config = config
        self.base_seed = int(base_seed)
        self.scenario = config.effective_scenario()
        self._episode = 0
        self._state: EnvState | None = None

    @property
    def state(self) -> EnvState:
        if self._state is None:
            raise InvalidStateError("reset() must be called first")
        return self._state

    def _episode_seed(self) -> int:
        if self.config.episode_seed_policy == "fixed":
            return self.base_seed
        return self.base_seed + self._episode

    def reset(self, seed: int | None = None) -> tuple[Observation, EnvState]:
        if seed is None:
            seed = self._episode_seed()
        self._episode += 1
        surface = synthesize(self.config.spectrum, self.config.grid, seed=int(seed))
        tx_dir = np.array([0.0, 0.0, 1.0])
        rx_dir = np.array([0.0, 0.0, -1.0])
        intensity, _ = sense_intensity(
            surface,
            self.scenario,
            0.0,
            tx_dir,
            rx_dir,
            self.config.accept_angle(),
            self.config.march_step,
        )
        state = EnvState(
            surface=surface,
            t=0.0,
            step_idx=0,
            tx_dir=tx_dir,
            rx_dir=rx_dir,
            last_intensity=intensity,
        )
        self._state = state
        obs = Observation(tx_dir=tx_dir, rx_dir=rx_dir, intensity=intensity, rel_time=0.0)
        return obs, state

    def transition(
        self, state: EnvState, action
    ) -> tuple[Observation, float, bool, EnvState]:
        """Pure transition function; does not touch the instance state."""
        cfg = self.config
        if state.step_idx >= cfg.max_steps:
            raise InvalidStateError("episode is finished; call reset()")
        act = clamp_action(action)
        tx_dir = ctrl_to_direction(act[:2], "up", cfg.theta_max)
        rx_dir = ctrl_to_direction(act[2:], "down", cfg.theta_max)
        step_idx = state.step_idx + 1
        t_new = step_idx * cfg.sample_time
        intensity, _ = sense_intensity(
            state.surface,
            self.scenario,
            t_new,
            tx_dir,
            rx_dir,
            cfg.accept_angle(),
            cfg.march_step,
        )
        rew = reward(intensity, cfg.reward_coeffs)
        isdone = step_idx >= cfg.max_steps
        new_state = EnvState(
            surface=state.surface,
            t=t_new,
            step_idx=step_idx,
            tx_dir=tx_dir,
            rx_dir=rx_dir,
            last_intensity=intensity,
        )
        obs = Observation(
            tx_dir=tx_dir, rx_dir=rx_dir, intensity=intensity, rel_time=t_new
        )
        return obs, rew, isdone, new_state

    def step(self, action) -> tuple[Observation, float, bool, EnvState]:
        obs, rew, isdone, new_state = self.transition(self.state, action)
        self._state = new_state
        return obs, rew, isdone, new_state
