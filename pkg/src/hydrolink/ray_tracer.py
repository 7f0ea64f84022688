"""Receiver-screen ray tracing through the dynamic interface.

The beam direction seen by the receiver is estimated by placing a virtual
screen one focal constant in front of the receiver, tracing a ray through
every pixel, scoring each ray by the channel physics of the path it finds,
and moving the screen centre to the intensity centroid.  The pixel pitch
then shrinks by a fixed factor and the process repeats until the centre
stops moving, which resolves the direction far below the pitch of the
first screen.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .optics import ChannelScenario, fresnel_transmittance
from .sea_surface import SurfaceModel, normal

# margin added around the wave band when bracketing ray-surface crossings
_BAND_PAD = 0.25


class AllDark(Exception):
    """Every pixel of a screen traced to zero intensity."""


class BeamNotFound(Exception):
    """No screen iteration saw any light; the beam is outside the FOV."""


@dataclass(frozen=True)
class ScreenConfig:
    """Virtual-screen and refinement settings.

    m: pixels per side.  fov: receiver field of view [rad].  z_c: screen
    distance constant [m].  refine_factor: pixel-pitch shrink per
    iteration.  convergence_eps: centre displacement [m on the screen
    plane] below which iteration stops.  march_step: ray-march step [m]
    used to bracket surface crossings.  max_march: march distance cap [m];
    None derives 10x the endpoint depths.  acceptance_half_angle: hit cone
    half-angle at the transmitter [rad]; None means 2 * omega_D.
    coordinate_sum_centroid switches the centroid denominator to the sum of
    pixel coordinates instead of total intensity (comparison only; that
    form is not translation invariant).
    """

    m: int = 16
    fov: float = 1.6
    z_c: float = 1.0
    refine_factor: float = 10.0
    max_iters: int = 8
    convergence_eps: float = 1e-4
    march_step: float = 0.1
    max_march: float | None = None
    acceptance_half_angle: float | None = None
    coordinate_sum_centroid: bool = False

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("m must be >= 2")
        if not (0.0 < self.fov < math.pi):
            raise ValueError("fov must be in (0, pi)")
        if self.z_c <= 0:
            raise ValueError("z_c must be > 0")
        if self.refine_factor <= 1.0:
            raise ValueError("refine_factor must be > 1")
        if self.convergence_eps <= 0:
            raise ValueError("convergence_eps must be > 0")
        if self.march_step <= 0:
            raise ValueError("march_step must be > 0")

    def accept_angle(self, scenario: ChannelScenario) -> float:
        if self.acceptance_half_angle is not None:
            return self.acceptance_half_angle
        return 2.0 * scenario.omega_D

    def march_limit(self, scenario: ChannelScenario) -> float:
        if self.max_march is not None:
            return self.max_march
        return 10.0 * (abs(scenario.tx_pos[2]) + scenario.rx_pos[2])


@dataclass(frozen=True)
class TraceResult:
    """Converged beam estimate in receiver-local and absolute frames."""

    direction_local: np.ndarray
    direction_abs: np.ndarray
    refraction_point: np.ndarray
    intensity: float
    converged: bool
    iterations: int


def rotation_zxz(phi1: float, phi2: float, phi3: float) -> np.ndarray:
    """Rotation matrix R_z(phi1) R_x(phi2) R_z(phi3)."""

    def rz(a):
        c, s = math.cos(a), math.sin(a)
        return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])

    def rx(a):
        c, s = math.cos(a), math.sin(a)
        return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])

    return rz(phi1) @ rx(phi2) @ rz(phi3)


def to_absolute(v_local, rx_orientation) -> np.ndarray:
    """Map a receiver-local vector to the absolute frame (ZXZ Euler angles)."""
    return rotation_zxz(*rx_orientation) @ np.asarray(v_local, dtype=float)


def _surface_band(surface: SurfaceModel) -> float:
    # six standard deviations practically bounds a random-phase cosine sum
    # and is far tighter than the worst-case amplitude sum
    return min(surface.amplitude_sum, 6.0 * surface.height_std) + _BAND_PAD


def intersect_surface(
    origin,
    dirs,
    surface: SurfaceModel,
    t: float,
    step: float,
    max_march: float,
    bisect_iters: int = 10,
):
    """First surface crossing of rays origin + s * dirs, s > 0.

    Marching is confined to the narrow band around z = 0 containing the
    surface.  Along a straight ray every component phase is linear in the
    arc length, so the marched heights come from a three-term cosine
    recurrence instead of per-sample transcendentals.  The bracketed
    crossing is then bisected.  Returns (points (n, 3), s_hit (n,),
    found (n,)).
    """
    origin = np.asarray(origin, dtype=float)
    dirs = np.atleast_2d(np.asarray(dirs, dtype=float))
    n = dirs.shape[0]
    band = _surface_band(surface)
    dz = dirs[:, 2]
    oz = origin[2]

    with np.errstate(divide="ignore", invalid="ignore"):
        if oz > band:
            valid = dz < 0.0
            s_enter = (oz - band) / (-dz)
            s_exit = (oz + band) / (-dz)
        elif oz < -band:
            valid = dz > 0.0
            s_enter = (-band - oz) / dz
            s_exit = (band - oz) / dz
        else:
            valid = dz != 0.0
            s_enter = np.zeros(n)
            s_exit = np.where(
                dz < 0, (oz + band) / (-dz), (band - oz) / np.where(dz == 0, 1.0, dz)
            )
    s_enter = np.where(valid, s_enter, 0.0)
    s_exit = np.where(valid, np.minimum(s_exit, max_march), s_enter)
    valid = valid & (s_exit > s_enter) & (s_enter < max_march)

    found = np.zeros(n, dtype=bool)
    s_lo = np.zeros(n)
    s_hi = np.zeros(n)
    sign0 = np.ones(n)
    if np.any(valid):
        span = float(np.max(s_exit[valid] - s_enter[valid]))
        n_cols = min(int(math.ceil(span / step)) + 1, 8192)
        # past the band the ray is strictly on the far side of the surface,
        # so extra columns beyond a shorter ray's own exit are harmless and
        # guarantee a sign change for every valid ray
        have_waves = surface.n_components > 0
        if have_waves:
            u0 = (
                t * surface.omega
                + surface.phase
                - surface.kx * origin[0]
                - surface.ky * origin[1]
            )
            v = dirs[:, 0:1] * surface.kx[None, :] + dirs[:, 1:2] * surface.ky[None, :]
            th0 = u0[None, :] - s_enter[:, None] * v
            c_prev = np.cos(th0)
            c_curr = np.cos(th0 - step * v)
            mult = 2.0 * np.cos(step * v)
            heights = np.empty((n, n_cols + 1))
            heights[:, 0] = c_prev @ surface.amplitude
            heights[:, 1] = c_curr @ surface.amplitude
            for k in range(2, n_cols + 1):
                np.multiply(mult, c_curr, out=th0)
                th0 -= c_prev
                c_prev, c_curr, th0 = c_curr, th0, c_prev
                heights[:, k] = c_curr @ surface.amplitude
        else:
            heights = np.zeros((n, n_cols + 1))
        s_grid = s_enter[:, None] + step * np.arange(n_cols + 1)[None, :]
        f = origin[2] + s_grid * dz[:, None] - heights
        sign0 = np.where(f[:, 0] >= 0, 1.0, -1.0)
        crossed = ((f * sign0[:, None]) <= 0.0) & valid[:, None]
        crossed[:, 0] = False
        any_cross = crossed.any(axis=1)
        idx = np.argmax(crossed, axis=1)
        found = valid & any_cross
        rows = np.arange(n)
        s_lo = np.where(found, s_grid[rows, np.maximum(idx - 1, 0)], 0.0)
        s_hi = np.where(found, s_grid[rows, idx], 0.0)

        for _ in range(bisect_iters):
            mid = 0.5 * (s_lo + s_hi)
            if have_waves:
                tm = np.cos(u0[None, :] - mid[:, None] * v) @ surface.amplitude
            else:
                tm = 0.0
            fm = origin[2] + mid * dz - tm
            same_side = (fm * sign0) > 0
            s_lo = np.where(found & same_side, mid, s_lo)
            s_hi = np.where(found & ~same_side, mid, s_hi)

    s_hit = 0.5 * (s_lo + s_hi)
    pts = origin[None, :] + s_hit[:, None] * dirs
    return pts, s_hit, found


def trace_rays(
    dirs_abs,
    surface: SurfaceModel,
    scenario: ChannelScenario,
    t: float,
    config: ScreenConfig,
    bisect_iters: int = 10,
):
    """Per-ray intensity of receiver rays cast along dirs_abs (n, 3).

    Each ray is followed to the surface and refracted into the water; the
    pixel scores the path it represents with the channel factors minus the
    arrival gain (the arrival direction is what is being estimated): the
    emitter beam pattern at the angle by which the underwater ray misses
    the transmitter, the interface transmittance, water absorption and
    inverse-square spreading.  Rays that miss the surface, hit a back
    face, or pass the transmitter outside the acceptance cone score zero.

    Returns (intensity (n,), points (n, 3), found (n,)).
    """
    dirs = np.atleast_2d(np.asarray(dirs_abs, dtype=float))
    n = dirs.shape[0]
    pts, s_hit, found = intersect_surface(
        scenario.rx_pos,
        dirs,
        surface,
        t,
        config.march_step,
        config.march_limit(scenario),
        bisect_iters=bisect_iters,
    )
    intensity = np.zeros(n)
    if not np.any(found):
        return intensity, pts, found

    nrm = np.atleast_2d(normal(surface, pts[:, 0], pts[:, 1], t))
    cos_inc = -np.sum(dirs * nrm, axis=1)
    front = cos_inc > 1e-9

    eta = scenario.n_air / scenario.n_water
    kk = 1.0 - eta * eta * (1.0 - cos_inc**2)
    refractable = kk > 0.0
    cos_t = np.sqrt(np.where(refractable, kk, 0.0))
    w = eta * dirs + (eta * cos_inc - cos_t)[:, None] * nrm

    # water-side interface angle of the path this pixel represents
    cos_th1 = np.clip(cos_t, -1.0, 1.0)
    theta_1 = np.arccos(cos_th1)

    to_tx = scenario.tx_pos[None, :] - pts
    d_water = np.linalg.norm(to_tx, axis=1)
    ok = found & front & refractable & (d_water > 1e-9)
    u = to_tx / np.where(d_water > 1e-9, d_water, 1.0)[:, None]
    miss = np.arccos(np.clip(np.sum(w * u, axis=1), -1.0, 1.0))
    accept = ok & (miss <= config.accept_angle(scenario))
    if not np.any(accept):
        return intensity, pts, found

    wd2 = scenario.omega_D**2
    lam = scenario.wavelength_lambda
    m_ang = np.where(accept, miss, 0.0)
    g_d = np.exp(
        -2.0 * np.sin(m_ang) ** 2 / (wd2 * (1.0 + (lam * np.cos(m_ang) / (np.pi * wd2)) ** 2))
    )
    th1 = np.where(accept, theta_1, 0.0)
    g_ref = fresnel_transmittance(th1, scenario.n_water, scenario.n_air)
    g_path = np.exp(-scenario.absorption * d_water) / (d_water + s_hit) ** 2
    intensity = np.where(accept, g_d * g_ref * g_path, 0.0)
    return intensity, pts, found


def trace_pixel(pixel_dir, surface: SurfaceModel, scenario: ChannelScenario, t: float, config: ScreenConfig | None = None) -> float:
    """Intensity of a single receiver ray cast along pixel_dir (absolute frame)."""
    cfg = config if config is not None else ScreenConfig()
    intensity, _, _ = trace_rays(np.asarray(pixel_dir, dtype=float)[None, :], surface, scenario, t, cfg)
    return float(intensity[0])


def centroid(intensities, pixel_x, pixel_y, literal: bool = False):
    """Intensity-weighted screen centre (x_c, y_c).

    intensities is an (m, m) grid indexed [i, j] for pixel (x_i, y_j).
    The default denominator is the total intensity; literal=True divides by
    the summed pixel coordinates instead, for comparison with the
    non-translation-invariant form.
    """
    w = np.asarray(intensities, dtype=float)
    xs = np.asarray(pixel_x, dtype=float)
    ys = np.asarray(pixel_y, dtype=float)
    total = float(np.sum(w))
    if total <= 0.0:
        raise AllDark("all pixel intensities are zero")
    num_x = float(np.sum(w.sum(axis=1) * xs))
    num_y = float(np.sum(w.sum(axis=0) * ys))
    if literal:
        den_x = float(len(ys) * np.sum(xs))
        den_y = float(len(xs) * np.sum(ys))
        if den_x == 0.0 or den_y == 0.0:
            raise ValueError("literal centroid denominator is zero on a centred screen")
        return num_x / den_x, num_y / den_y
    return num_x / total, num_y / total


def find_beam_direction(
    surface: SurfaceModel,
    scenario: ChannelScenario,
    t: float,
    config: ScreenConfig | None = None,
    initial_center=None,
    initial_pitch: float | None = None,
) -> TraceResult:
    """Estimate the beam arrival direction by iterative centroid refinement.

    Starting from a full-FOV screen (or a warm-start centre/pitch), every
    iteration traces all m x m pixels, moves the centre to the intensity
    centroid and shrinks the pitch by refine_factor, until the centre moves
    less than convergence_eps or max_iters is reached.  Raises BeamNotFound
    if no iteration sees light.
    """
    cfg = config if config is not None else ScreenConfig()
    rot = rotation_zxz(*scenario.rx_euler)
    pitch0 = 2.0 * cfg.z_c * math.tan(cfg.fov / 2.0) / cfg.m
    center = np.array([0.0, 0.0] if initial_center is None else initial_center, dtype=float)
    pitch = pitch0 if initial_pitch is None else float(initial_pitch)

    offsets = (np.arange(cfg.m) - (cfg.m - 1) / 2.0)
    lit = False
    converged = False
    iterations = 0
    for _ in range(cfg.max_iters):
        xs = center[0] + offsets * pitch
        ys = center[1] + offsets * pitch
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        local = np.stack([gx.ravel(), gy.ravel(), np.full(cfg.m * cfg.m, cfg.z_c)], axis=1)
        local /= np.linalg.norm(local, axis=1, keepdims=True)
        dirs = local @ rot.T
        intensity, _, _ = trace_rays(dirs, surface, scenario, t, cfg)
        grid = intensity.reshape(cfg.m, cfg.m)
        try:
            xc, yc = centroid(grid, xs, ys, literal=cfg.coordinate_sum_centroid)
        except AllDark:
            if not lit:
                raise BeamNotFound("no pixel intensity in any iteration") from None
            break
        lit = True
        disp = math.hypot(xc - center[0], yc - center[1])
        center = np.array([xc, yc])
        iterations += 1
        pitch /= cfg.refine_factor
        if disp < cfg.convergence_eps:
            converged = True
            break

    if not lit:
        raise BeamNotFound("no pixel intensity in any iteration")

    v_local = np.array([center[0], center[1], cfg.z_c])
    v_local /= np.linalg.norm(v_local)
    v_abs = rot @ v_local
    # full-precision hit so the returned point sits on the surface to <1e-6 m
    final_i, final_p, final_found = trace_rays(
        v_abs[None, :], surface, scenario, t, cfg, bisect_iters=48
    )
    refraction_point = final_p[0] if final_found[0] else np.full(3, np.nan)
    return TraceResult(
        direction_local=v_local,
        direction_abs=v_abs,
        refraction_point=refraction_point,
        intensity=float(final_i[0]),
        converged=converged,
        iterations=iterations,
    )
