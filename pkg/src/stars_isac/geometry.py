"""Array geometry, steering vectors and Rician channel generation."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

# Departure angle at the BS and arrival angle at the surface for the fixed
# BS position (radians); the BS sits on the reflection side (y > 0).
BS_AZIMUTH_AT_STARS = np.deg2rad(45.0)
BS_ELEVATION_AT_STARS = 0.0
STARS_ANGLE_AT_BS = np.deg2rad(60.0)
# Users are served on the transmission side (y < 0).
USER_AZIMUTH_RANGE = (np.deg2rad(200.0), np.deg2rad(340.0))
USER_DISTANCE_RANGE = (20.0, 50.0)


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def dbm_to_watts(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def upa_shape(n: int) -> tuple[int, int]:
    """Most-square factorization n = nx * nz with nx >= nz."""
    nz = int(np.floor(np.sqrt(n)))
    while n % nz:
        nz -= 1
    return n // nz, nz


@dataclass(frozen=True)
class ArrayGeometry:
    stars_coords: np.ndarray
    sensor_coords: np.ndarray
    element_spacing: float
    wavelength: float

    def __post_init__(self):
        if self.element_spacing <= 0 or self.wavelength <= 0:
            raise ValueError("element spacing and wavelength must be positive")
        if np.any(self.stars_coords[:, 1] != 0):
            raise ValueError("surface elements must lie in the X-Z plane")
        if np.any(self.sensor_coords[:, 1:] != 0):
            raise ValueError("sensor elements must lie on the X axis")

    @property
    def r_x(self):
        return self.stars_coords[:, 0]

    @property
    def r_z(self):
        return self.stars_coords[:, 2]

    @property
    def rbar_x(self):
        return self.sensor_coords[:, 0]

    @classmethod
    def build(cls, n: int, n_s: int, wavelength: float = 0.1, spacing: float | None = None):
        """UPA surface in the X-Z plane and an X-axis sensor ULA."""
        d = wavelength / 2 if spacing is None else spacing
        nx, nz = upa_shape(n)
        # z index runs fastest, so any contiguous block of elements spans both axes
        ix, iz = np.meshgrid(np.arange(nx), np.arange(nz), indexing="ij")
        stars = np.zeros((n, 3))
        stars[:, 0] = d * ix.ravel()
        stars[:, 2] = d * iz.ravel()
        sensors = np.zeros((n_s, 3))
        sensors[:, 0] = d * np.arange(n_s)
        return cls(stars, sensors, d, wavelength)


def wavenumber(phi_h, phi_v, wavelength):
    if wavelength <= 0:
        raise ValueError("wavelength must be positive")
    k = 2 * np.pi / wavelength
    return k * np.array([np.cos(phi_h) * np.cos(phi_v),
                         np.sin(phi_h) * np.cos(phi_v),
                         np.sin(phi_v)])


def steering_stars(phi_h, phi_v, geom: ArrayGeometry):
    k = 2 * np.pi / geom.wavelength
    phase = k * (geom.r_x * np.cos(phi_h) * np.cos(phi_v) + geom.r_z * np.sin(phi_v))
    return np.exp(-1j * phase)


def steering_sensor(phi_h, phi_v, geom: ArrayGeometry):
    k = 2 * np.pi / geom.wavelength
    return np.exp(-1j * k * geom.rbar_x * np.cos(phi_h) * np.cos(phi_v))


def steering_bs(angle, m: int, wavelength: float, spacing: float | None = None):
    """BS ULA response toward `angle` measured from the array axis."""
    d = wavelength / 2 if spacing is None else spacing
    return np.exp(-1j * 2 * np.pi / wavelength * d * np.arange(m) * np.cos(angle))


@dataclass(frozen=True)
class SystemConfig:
    """Scenario parameters; powers in watts, angles in radians."""

    M: int = 6
    N: int = 8
    N_s: int = 4
    K: int = 2
    P_budget: float = 1.0
    sigma_k_sq: float = 1e-14
    sigma_s_sq: float = 1e-14
    L: int = 100
    gamma_bar: tuple = (1.0, 1.0)
    d_BR: float = 40.0
    d_RT: float = 30.0
    d_RU: tuple | None = None
    alpha_BR: float = 2.0
    alpha_RU: float = 2.0
    rho_0: float = 1e-3
    rician: float = float(10 ** 0.3)
    phi_h: float = float(np.deg2rad(120.0))
    phi_v: float = float(np.deg2rad(30.0))
    seed: int = 0
    wavelength: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "gamma_bar", tuple(float(g) for g in np.atleast_1d(self.gamma_bar)))
        if self.d_RU is not None:
            object.__setattr__(self, "d_RU", tuple(float(d) for d in np.atleast_1d(self.d_RU)))
        if min(self.M, self.N, self.N_s, self.L) < 1 or self.K < 0:
            raise ValueError("array sizes and block length must be >= 1")
        if len(self.gamma_bar) != self.K:
            raise ValueError(f"gamma_bar has {len(self.gamma_bar)} entries, expected K={self.K}")
        if any(g < 0 for g in self.gamma_bar):
            raise ValueError("SINR thresholds must be nonnegative")
        positive = [self.P_budget, self.sigma_k_sq, self.sigma_s_sq, self.d_BR,
                    self.d_RT, self.rho_0, self.rician, self.wavelength]
        if min(positive) <= 0:
            raise ValueError("powers, distances, rician factor and rho_0 must be positive")
        if self.d_RU is not None:
            if len(self.d_RU) != self.K:
                raise ValueError("d_RU must have K entries")
            if any(d <= 0 for d in self.d_RU):
                raise ValueError("distances must be positive")
        if not (0 <= self.phi_h <= np.pi) or not (-np.pi / 2 <= self.phi_v <= np.pi / 2):
            raise ValueError("target DOA outside the search domain")

    def replace(self, **changes) -> "SystemConfig":
        if "K" in changes and "gamma_bar" not in changes:
            g = self.gamma_bar[0] if self.gamma_bar else 1.0
            changes["gamma_bar"] = (g,) * changes["K"]
        if "K" in changes and "d_RU" not in changes and self.d_RU is not None:
            changes["d_RU"] = None
        return dataclasses.replace(self, **changes)

    def with_gamma_db(self, gamma_db: float) -> "SystemConfig":
        return self.replace(gamma_bar=(float(db_to_linear(gamma_db)),) * self.K)

    def geometry(self) -> ArrayGeometry:
        return ArrayGeometry.build(self.N, self.N_s, self.wavelength)


def desk_config(**overrides) -> SystemConfig:
    """Reduced scenario: M=6, N=8, N_s=4, K=2 with the reference powers and DOAs."""
    return SystemConfig(**overrides)


def table_config(**overrides) -> SystemConfig:
    """Full-scale reference scenario (M=10, K=4)."""
    base = dict(M=10, N=10, N_s=5, K=4, gamma_bar=(1.0,) * 4)
    base.update(overrides)
    return SystemConfig(**base)


# File keys carrying units; converted once at parse.
_UNIT_KEYS = {
    "P_budget_dbm": ("P_budget", dbm_to_watts),
    "sigma_k_sq_dbm": ("sigma_k_sq", dbm_to_watts),
    "sigma_s_sq_dbm": ("sigma_s_sq", dbm_to_watts),
    "rho_0_db": ("rho_0", lambda v: 10.0 ** (-float(v) / 10.0)),
    "rician_db": ("rician", db_to_linear),
    "gamma_bar_db": ("gamma_bar", db_to_linear),
    "phi_h": ("phi_h", np.deg2rad),
    "phi_v": ("phi_v", np.deg2rad),
}


def config_from_dict(raw: dict, base: SystemConfig | None = None) -> SystemConfig:
    """Build a config from file-style keys (angles in degrees, dB/dBm suffixes)."""
    fields = {f.name for f in dataclasses.fields(SystemConfig)}
    out = {}
    for key, value in raw.items():
        if key in _UNIT_KEYS:
            name, conv = _UNIT_KEYS[key]
            value = conv(value)
            value = tuple(np.atleast_1d(value)) if name == "gamma_bar" else float(value)
            out[name] = value
        elif key in fields:
            out[key] = value
        else:
            raise ValueError(f"unknown config key {key!r}")
    if "gamma_bar" in out and len(out["gamma_bar"]) == 1:
        k = out.get("K", (base or SystemConfig()).K)
        out["gamma_bar"] = out["gamma_bar"] * k
    if base is None:
        return SystemConfig(**out)
    return base.replace(**out)


def load_config(path, base: SystemConfig | None = None) -> SystemConfig:
    raw = yaml.safe_load(Path(path).read_text()) or {}
    return config_from_dict(raw, base)


@dataclass(frozen=True)
class ChannelSet:
    G: np.ndarray
    h: np.ndarray  # K x N, row k is h_k
    alpha: complex
    d_RU: np.ndarray = field(default_factory=lambda: np.zeros(0))
    user_azimuth: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def K(self):
        return self.h.shape[0]


def _cn(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def gen_channels(config: SystemConfig, rng: np.random.Generator) -> ChannelSet:
    """One Rician realization of G, h_k and the target amplitude.

    Random draws are taken in a fixed order (user placement, G scatter,
    user scatter, target phase) so a seed fully determines the result.
    """
    c = config
    if c.d_BR <= 0 or c.d_RT <= 0:
        raise ValueError("distances must be positive")
    geom = c.geometry()
    if c.d_RU is None:
        d_ru = rng.uniform(*USER_DISTANCE_RANGE, size=c.K)
    else:
        d_ru = np.asarray(c.d_RU, dtype=float)
    if np.any(d_ru <= 0):
        raise ValueError("distances must be positive")
    az = rng.uniform(*USER_AZIMUTH_RANGE, size=c.K)

    los_w = np.sqrt(c.rician / (1 + c.rician))
    nlos_w = np.sqrt(1 / (1 + c.rician))

    g_los = np.outer(steering_stars(BS_AZIMUTH_AT_STARS, BS_ELEVATION_AT_STARS, geom),
                     steering_bs(STARS_ANGLE_AT_BS, c.M, c.wavelength))
    G = np.sqrt(c.rho_0 / c.d_BR ** c.alpha_BR) * (los_w * g_los + nlos_w * _cn(rng, (c.N, c.M)))

    h = np.empty((c.K, c.N), dtype=complex)
    nlos_h = _cn(rng, (c.K, c.N))
    for k in range(c.K):
        h_los = steering_stars(az[k], 0.0, geom)
        h[k] = np.sqrt(c.rho_0 / d_ru[k] ** c.alpha_RU) * (los_w * h_los + nlos_w * nlos_h[k])

    psi = rng.uniform(0, 2 * np.pi)
    alpha = np.sqrt(c.rho_0 ** 2 / c.d_RT ** 4) * np.exp(1j * psi)
    return ChannelSet(G=G, h=h, alpha=complex(alpha), d_RU=d_ru, user_azimuth=az)
