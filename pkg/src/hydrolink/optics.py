"""Interface refraction and the four multiplicative channel-gain factors.

The received-power proxy for a water-to-air optical path factorises as

    G = G_D(alpha_D) * G_p(d_water, d_air) * G_ref(theta_1) * G_A(alpha_A)

with a beam-pattern departure gain, an absorption/spreading path gain, an
unpolarised Fresnel transmittance at the interface, and an aperture arrival
gain with a hard field-of-view cutoff.  Total internal reflection and
out-of-FOV arrivals map to zero gain, so G is defined for every geometry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class TotalInternalReflection(Exception):
    """Raised when the incidence angle exceeds the critical angle."""


def _as_unit(v, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (3,):
        raise ValueError(f"{name} must be a 3-vector")
    n = np.linalg.norm(v)
    if abs(n - 1.0) > 1e-6:
        raise ValueError(f"{name} must be unit length (|v|={n:.3g})")
    return v / n


@dataclass(frozen=True)
class ChannelScenario:
    """Geometry and optical constants of one link.

    tx_pos sits underwater (z < 0), rx_pos in the air (z > 0).  omega_D and
    omega_A are the maximum accessible half-angles of the emitter and the
    detector [rad].  absorption is the water absorption coefficient [1/m]
    at wavelength_lambda [m].  rx_euler are the Z-X-Z Euler angles mapping
    the receiver-local frame to the absolute frame; the default points the
    receiver boresight straight down.
    """

    tx_pos: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -10.0]))
    rx_pos: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 10.0]))
    n_water: float = 1.33
    n_air: float = 1.0
    wavelength_lambda: float = 532e-9
    absorption: float = 0.05
    omega_D: float = 0.1
    omega_A: float = 0.5
    rx_euler: tuple = (0.0, math.pi, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "tx_pos", np.asarray(self.tx_pos, dtype=float))
        object.__setattr__(self, "rx_pos", np.asarray(self.rx_pos, dtype=float))
        if self.tx_pos.shape != (3,) or self.rx_pos.shape != (3,):
            raise ValueError("positions must be 3-vectors")
        if not (self.tx_pos[2] < 0.0 < self.rx_pos[2]):
            raise ValueError("need tx_pos.z < 0 < rx_pos.z")
        if not (self.n_water > self.n_air >= 1.0):
            raise ValueError("need n_water > n_air >= 1")
        if self.wavelength_lambda <= 0:
            raise ValueError("wavelength must be > 0")
        if self.absorption < 0:
            raise ValueError("absorption must be >= 0")
        if not (0.0 < self.omega_D < math.pi / 2):
            raise ValueError("omega_D must be in (0, pi/2)")
        if not (0.0 < self.omega_A < math.pi / 2):
            raise ValueError("omega_A must be in (0, pi/2)")

    @property
    def critical_angle(self) -> float:
        """Water-side incidence angle beyond which nothing transmits [rad]."""
        return math.asin(self.n_air / self.n_water)


@dataclass(frozen=True)
class PathGeometry:
    """Angles and distances of one resolved optical path.

    alpha_D / alpha_A are measured off the transmitter / receiver axes,
    theta_1 / theta_2 are the water-side / air-side interface angles, all
    in [0, pi/2].  Distances are metres.
    """

    alpha_D: float
    alpha_A: float
    theta_1: float
    theta_2: float
    d_water: float
    d_air: float
    refraction_point: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "refraction_point", np.asarray(self.refraction_point, dtype=float)
        )
        for name in ("alpha_D", "alpha_A", "theta_1", "theta_2"):
            a = getattr(self, name)
            if not (-1e-12 <= a <= math.pi / 2 + 1e-12):
                raise ValueError(f"{name} out of [0, pi/2]: {a}")
        if self.d_water < 0 or self.d_air < 0:
            raise ValueError("distances must be nonnegative")

    def snell_residual(self, scenario: ChannelScenario) -> float:
        """n1 sin(theta_1) - n2 sin(theta_2); ~0 below the critical angle."""
        return scenario.n_water * math.sin(self.theta_1) - scenario.n_air * math.sin(
            self.theta_2
        )


def refract(incident_dir, surface_normal, n1: float, n2: float) -> np.ndarray:
    """Refract a unit direction across an interface with indices n1 -> n2.

    The returned unit vector satisfies n1 sin(theta_1) = n2 sin(theta_2) and
    lies in the plane of incidence.  Raises TotalInternalReflection when
    sin(theta_2) would exceed 1.
    """
    d = _as_unit(incident_dir, "incident_dir")
    n = _as_unit(surface_normal, "surface_normal")
    cos_i = -float(np.dot(d, n))
    if cos_i < 0.0:
        n = -n
        cos_i = -cos_i
    eta = n1 / n2
    k = 1.0 - eta * eta * (1.0 - cos_i * cos_i)
    if k < 0.0:
        raise TotalInternalReflection(
            f"sin(theta_2) = {eta * math.sqrt(1 - cos_i**2):.6f} > 1"
        )
    t = eta * d + (eta * cos_i - math.sqrt(k)) * n
    return t / np.linalg.norm(t)


def fresnel_transmittance(theta_1, n1: float, n2: float):
    """Unpolarised power transmittance for incidence theta_1 from medium n1.

    Averages the two polarisation reflectances; returns 0 at and beyond the
    critical angle so the result is total on [0, pi/2).  Accepts scalars or
    arrays.
    """
    th = np.asarray(theta_1, dtype=float)
    if np.any(th < 0) or np.any(th >= np.pi / 2):
        raise ValueError("theta_1 must be in [0, pi/2)")
    s1 = np.sin(th)
    sin2 = (n1 / n2) * s1
    transmits = sin2 < 1.0
    sin2 = np.where(transmits, sin2, 0.0)
    c1 = np.cos(th)
    c2 = np.sqrt(1.0 - sin2 * sin2)
    r_perp = (n2 * c1 - n1 * c2) / (n2 * c1 + n1 * c2)
    r_par = (n1 * c1 - n2 * c2) / (n1 * c1 + n2 * c2)
    g = 1.0 - 0.5 * (r_perp**2 + r_par**2)
    out = np.where(transmits, g, 0.0)
    return float(out) if np.ndim(theta_1) == 0 else out


def departure_gain(alpha_D, scenario: ChannelScenario):
    """Emitter beam-pattern gain at departure angle alpha_D; 1 on axis."""
    a = np.asarray(alpha_D, dtype=float)
    if np.any(a < 0) or np.any(a > np.pi / 2):
        raise ValueError("alpha_D must be in [0, pi/2]")
    wd2 = scenario.omega_D**2
    lam = scenario.wavelength_lambda
    denom = wd2 * (1.0 + (lam * np.cos(a) / (np.pi * wd2)) ** 2)
    out = np.exp(-2.0 * np.sin(a) ** 2 / denom)
    return float(out) if np.ndim(alpha_D) == 0 else out


def path_gain(d_water, d_air, scenario: ChannelScenario):
    """Absorption and inverse-square spreading over the two media."""
    dw = np.asarray(d_water, dtype=float)
    da = np.asarray(d_air, dtype=float)
    if np.any(dw < 0) or np.any(da < 0):
        raise ValueError("distances must be nonnegative")
    if np.any(dw + da <= 0):
        raise ValueError("total path length must be positive")
    out = np.exp(-scenario.absorption * dw) / (dw + da) ** 2
    scalar = np.ndim(d_water) == 0 and np.ndim(d_air) == 0
    return float(out) if scalar else out


def arrival_gain(alpha_A, scenario: ChannelScenario):
    """Detector aperture gain; zero outside the accessible angle omega_A."""
    a = np.asarray(alpha_A, dtype=float)
    if np.any(a < 0) or np.any(a > np.pi / 2):
        raise ValueError("alpha_A must be in [0, pi/2]")
    peak = scenario.n_air**2 / math.sin(scenario.omega_A) ** 2
    out = np.where(a <= scenario.omega_A, peak * np.cos(a), 0.0)
    return float(out) if np.ndim(alpha_A) == 0 else out


def channel_gain(geom: PathGeometry, scenario: ChannelScenario) -> float:
    """Product of the four gain factors for a resolved path."""
    return float(
        departure_gain(geom.alpha_D, scenario)
        * path_gain(geom.d_water, geom.d_air, scenario)
        * fresnel_transmittance(geom.theta_1, scenario.n_water, scenario.n_air)
        * arrival_gain(geom.alpha_A, scenario)
    )
