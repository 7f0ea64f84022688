"""Fetch-limited wind-wave spectrum and its directional spreading.

The one-sided frequency spectrum follows the empirical North Sea form

    S(w) = a g^2 / w^5 * exp(-1.25 (wp/w)^4) * gamma^r,
    r = exp(-(w - wp)^2 / (2 (sigma wp)^2)),

with the scale coefficient a = 0.076 (U10^2 / (g xf))^0.22 and peak angular
frequency wp = 22 (g^2 / (xf U10))^(1/3), both functions of the 10 m wind
speed U10 and the fetch xf.  The directional spectrum multiplies S(w) by a
cosine-series spreading function supported on a half plane around the wind
bearing.  All frequencies are angular [rad/s] and all angles are radians.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_GRAVITY = 9.81


@dataclass(frozen=True)
class SpectrumParams:
    """Environmental inputs defining one wind-sea spectrum.

    wind_speed_u10: wind speed at 10 m altitude [m/s], > 0.
    fetch_xf: open-water distance the wind has blown over [m], > 0.
    gravity_g: gravitational acceleration [m/s^2].
    gamma: peak-enhancement factor, >= 1.
    sigma_low / sigma_high: spectral width below / above the peak frequency
        (canonical 0.07 / 0.09 two-branch default).
    wind_bearing: direction the wind blows toward [rad]; the spreading
        function is centred on it.
    """

    wind_speed_u10: float
    fetch_xf: float
    gravity_g: float = DEFAULT_GRAVITY
    gamma: float = 3.3
    sigma_low: float = 0.07
    sigma_high: float = 0.09
    wind_bearing: float = 0.0

    def __post_init__(self):
        if self.wind_speed_u10 <= 0:
            raise ValueError("wind_speed_u10 must be > 0")
        if self.fetch_xf <= 0:
            raise ValueError("fetch_xf must be > 0")
        if self.gravity_g <= 0:
            raise ValueError("gravity_g must be > 0")
        if self.gamma < 1.0:
            raise ValueError("gamma must be >= 1")
        if self.sigma_low <= 0 or self.sigma_high <= 0:
            raise ValueError("sigma parameters must be > 0")


def alpha_coefficient(params: SpectrumParams) -> float:
    """Dimensionless scale coefficient a = 0.076 (U10^2 / (g xf))^0.22."""
    p = params
    return 0.076 * (p.wind_speed_u10**2 / (p.gravity_g * p.fetch_xf)) ** 0.22


def peak_frequency(params: SpectrumParams) -> float:
    """Peak angular frequency wp = 22 (g^2 / (xf U10))^(1/3) [rad/s]."""
    p = params
    return 22.0 * (p.gravity_g**2 / (p.fetch_xf * p.wind_speed_u10)) ** (1.0 / 3.0)


def _check_omega(omega):
    om = np.asarray(omega, dtype=float)
    if np.any(om <= 0.0):
        raise ValueError("omega must be > 0")
    return om


def jonswap_2d(omega, params: SpectrumParams):
    """Frequency spectral density S(omega) [m^2 s/rad].

    Accepts a scalar or array of angular frequencies; omega must be > 0.
    The spectral width sigma switches from sigma_low to sigma_high above
    the peak frequency.
    """
    om = _check_omega(omega)
    wp = peak_frequency(params)
    a = alpha_coefficient(params)
    sigma = np.where(om <= wp, params.sigma_low, params.sigma_high)
    shape = np.exp(-((om - wp) ** 2) / (2.0 * (sigma * wp) ** 2))
    s = (
        (a * params.gravity_g**2 / om**5)
        * np.exp(-1.25 * (wp / om) ** 4)
        * params.gamma**shape
    )
    return float(s) if np.ndim(omega) == 0 else s


def directional_spreading(omega, theta, params: SpectrumParams):
    """Spreading function G(omega, theta) [1/rad], zero outside the half plane.

    theta is measured in the absolute frame; the support is
    |theta - wind_bearing| <= pi/2.  Scalar or array inputs broadcast.
    """
    om = _check_omega(omega)
    wp = peak_frequency(params)
    rel = np.asarray(theta, dtype=float) - params.wind_bearing
    rel = np.arctan2(np.sin(rel), np.cos(rel))
    decay = np.exp(-0.5 * (om / wp) ** 4)
    p = 0.5 + 0.82 * decay
    q = 0.32 * decay
    val = (1.0 + p * np.cos(2.0 * rel) + q * np.cos(4.0 * rel)) / np.pi
    out = np.where(np.abs(rel) <= np.pi / 2, val, 0.0)
    scalar = np.ndim(omega) == 0 and np.ndim(theta) == 0
    return float(out) if scalar else out


def jonswap_3d(omega, theta, params: SpectrumParams):
    """Directional spectral density S(omega) G(omega, theta) [m^2 s/rad^2]."""
    s2 = jonswap_2d(omega, params)
    g = directional_spreading(omega, theta, params)
    out = s2 * g
    scalar = np.ndim(omega) == 0 and np.ndim(theta) == 0
    return float(out) if scalar else out
