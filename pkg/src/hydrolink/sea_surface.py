"""Harmonic-superposition sea surface with analytic derivatives.

A surface realisation is a finite sum of deep-water cosine waves,

    T(x, y, t) = sum_ij a_ij cos(w_i t - k_i (x cos th_j + y sin th_j) + eps_ij),
    k_i = w_i^2 / g,

whose amplitudes a_ij = sqrt(S(w_i, th_j) dw dth) are sampled from the
directional spectrum on a frequency-direction grid and whose phases eps_ij
are drawn uniformly from [0, 2pi) by a seeded PCG64 generator, so identical
(params, grid, seed) give bit-identical surfaces on any platform.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .wave_spectrum import SpectrumParams, jonswap_3d, peak_frequency

# elements per evaluation chunk; bounds transient memory of point queries
_CHUNK_ELEMS = 4_000_000


@dataclass(frozen=True)
class SynthesisGrid:
    """Uniform frequency-direction grid used to discretise the spectrum.

    Frequencies span [omega_min, omega_max] in n_omega cells; directions
    span [-pi/2, pi/2] in n_theta cells.  Components sit at cell centres.
    """

    n_omega: int
    omega_min: float
    omega_max: float
    n_theta: int

    def __post_init__(self):
        if self.n_omega < 2:
            raise ValueError("n_omega must be >= 2")
        if self.n_theta < 1:
            raise ValueError("n_theta must be >= 1")
        if not (0.0 < self.omega_min < self.omega_max):
            raise ValueError("need 0 < omega_min < omega_max")

    @property
    def d_omega(self) -> float:
        return (self.omega_max - self.omega_min) / self.n_omega

    @property
    def d_theta(self) -> float:
        return np.pi / self.n_theta

    @property
    def omega_centers(self) -> np.ndarray:
        return self.omega_min + (np.arange(self.n_omega) + 0.5) * self.d_omega

    @property
    def theta_centers(self) -> np.ndarray:
        return -np.pi / 2 + (np.arange(self.n_theta) + 0.5) * self.d_theta

    @classmethod
    def default_for(
        cls, params: SpectrumParams, n_omega: int = 64, n_theta: int = 36
    ) -> "SynthesisGrid":
        """Grid spanning [0.5, 6] peak frequencies, where nearly all of the
        spectral energy lives."""
        wp = peak_frequency(params)
        return cls(n_omega=n_omega, omega_min=0.5 * wp, omega_max=6.0 * wp, n_theta=n_theta)


@dataclass(frozen=True, eq=False)
class SurfaceModel:
    """Immutable component set realising one sea state.

    Parallel arrays hold amplitude [m], angular frequency [rad/s], travel
    direction [rad] and phase [rad] per component.  Derived wavenumber
    products are cached for fast evaluation.
    """

    amplitude: np.ndarray
    omega: np.ndarray
    theta: np.ndarray
    phase: np.ndarray
    gravity_g: float
    seed: int
    kx: np.ndarray = field(init=False, repr=False)
    ky: np.ndarray = field(init=False, repr=False)
    amplitude_sum: float = field(init=False)
    height_std: float = field(init=False)

    def __post_init__(self):
        for name in ("amplitude", "omega", "theta", "phase"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if np.any(self.amplitude < 0):
            raise ValueError("amplitudes must be nonnegative")
        k = self.omega**2 / self.gravity_g
        object.__setattr__(self, "kx", k * np.cos(self.theta))
        object.__setattr__(self, "ky", k * np.sin(self.theta))
        object.__setattr__(self, "amplitude_sum", float(np.sum(self.amplitude)))
        object.__setattr__(
            self, "height_std", float(np.sqrt(0.5 * np.sum(self.amplitude**2)))
        )

    @property
    def n_components(self) -> int:
        return self.amplitude.size


def flat_surface(gravity_g: float = 9.81) -> SurfaceModel:
    """Degenerate zero-component surface: T(x, y, t) = 0 everywhere."""
    z = np.zeros(0)
    return SurfaceModel(amplitude=z, omega=z, theta=z, phase=z, gravity_g=gravity_g, seed=0)


def synthesize(
    params: SpectrumParams,
    grid: SynthesisGrid,
    seed: int,
    amplitude_factor: float = 1.0,
) -> SurfaceModel:
    """Sample a surface realisation from the directional spectrum.

    amplitude_factor scales every amplitude; 1.0 keeps a_ij =
    sqrt(S dw dth), sqrt(2) switches to the textbook convention.
    """
    om = grid.omega_centers
    th = grid.theta_centers
    dens = jonswap_3d(om[:, None], th[None, :], params)
    amp = amplitude_factor * np.sqrt(dens * grid.d_omega * grid.d_theta)
    rng = np.random.Generator(np.random.PCG64(seed))
    phase = rng.uniform(0.0, 2.0 * np.pi, size=amp.size)
    omega_flat = np.repeat(om, grid.n_theta)
    theta_flat = np.tile(th, grid.n_omega)
    return SurfaceModel(
        amplitude=amp.ravel(),
        omega=omega_flat,
        theta=theta_flat,
        phase=phase,
        gravity_g=params.gravity_g,
        seed=seed,
    )


def _reduce(surface: SurfaceModel, x, y, t, weights) -> np.ndarray:
    """sum_c weights_c f(arg_c) over broadcast points, chunked.

    weights is a list of (per-component weight vector, f) pairs; returns one
    flat array per pair.
    """
    xb, yb, tb = np.broadcast_arrays(
        np.asarray(x, dtype=float), np.asarray(y, dtype=float), np.asarray(t, dtype=float)
    )
    shape = xb.shape
    xf, yf, tf = xb.ravel(), yb.ravel(), tb.ravel()
    n = xf.size
    c = surface.n_components
    outs = [np.zeros(n) for _ in weights]
    if c == 0 or n == 0:
        return [o.reshape(shape) for o in outs]
    step = max(1, _CHUNK_ELEMS // c)
    for lo in range(0, n, step):
        hi = min(n, lo + step)
        arg = (
            tf[lo:hi, None] * surface.omega[None, :]
            - xf[lo:hi, None] * surface.kx[None, :]
            - yf[lo:hi, None] * surface.ky[None, :]
            + surface.phase[None, :]
        )
        for o, (w, f) in zip(outs, weights):
            o[lo:hi] = f(arg) @ w
    return [o.reshape(shape) for o in outs]


def height(surface: SurfaceModel, x, y, t):
    """Surface elevation [m] at (x, y, t); inputs broadcast."""
    (h,) = _reduce(surface, x, y, t, [(surface.amplitude, np.cos)])
    return float(h) if h.ndim == 0 else h


def gradient(surface: SurfaceModel, x, y, t):
    """Spatial slope (dT/dx, dT/dy), dimensionless; inputs broadcast."""
    gx, gy = _reduce(
        surface,
        x,
        y,
        t,
        [(surface.amplitude * surface.kx, np.sin), (surface.amplitude * surface.ky, np.sin)],
    )
    if gx.ndim == 0:
        return float(gx), float(gy)
    return gx, gy


def normal(surface: SurfaceModel, x, y, t) -> np.ndarray:
    """Upward unit normal, stacked on the last axis; inputs broadcast."""
    gx, gy = gradient(surface, x, y, t)
    gx = np.asarray(gx, dtype=float)
    gy = np.asarray(gy, dtype=float)
    n = np.stack([-gx, -gy, np.ones_like(gx)], axis=-1)
    return n / np.linalg.norm(n, axis=-1, keepdims=True)


def height_grid(surface: SurfaceModel, x, y, t) -> np.ndarray:
    """Elevation cube of shape (len(x), len(y), len(t)).

    Separable complex-exponential factorisation turns the evaluation into
    one matrix product per x row, which is far faster than pointwise calls
    for dense space-time sampling.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.zeros((x.size, y.size, t.size))
    if surface.n_components == 0:
        return out
    ax = np.exp(-1j * np.outer(x, surface.kx))
    by = np.exp(-1j * np.outer(y, surface.ky))
    ct = surface.amplitude * np.exp(1j * (np.outer(t, surface.omega) + surface.phase))
    for i in range(x.size):
        out[i] = ((ax[i] * by) @ ct.T).real
    return out
