"""Transmit blocks, sensor echoes and the grid maximum-likelihood DOA estimator."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fim import crb, fim_direct, derivative_bundle
from .geometry import ArrayGeometry, ChannelSet, SystemConfig, steering_sensor, steering_stars

DEFAULT_GRID = (361, 181)


class UnsensableError(ValueError):
    pass


@dataclass(frozen=True)
class EchoBlock:
    Y: np.ndarray           # N_s x L received samples
    X: np.ndarray           # M x L transmit block
    alpha: complex
    sigma_s_sq: float


@dataclass(frozen=True)
class MleSpectrum:
    grid_h: np.ndarray
    grid_v: np.ndarray
    values: np.ndarray      # len(grid_v) x len(grid_h), max 1
    argmax: tuple
    alpha_hat: complex

    @property
    def argmax_deg(self):
        return tuple(float(np.rad2deg(a)) for a in self.argmax)


def _cn(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def _psd_sqrt(R):
    R = (R + R.conj().T) / 2
    w, V = np.linalg.eigh(R)
    return (V * np.sqrt(np.clip(w, 0, None))) @ V.conj().T


def _whiten_rows(Z):
    """Rows rescaled and orthogonalized so that Z Z^H / L = I."""
    L = Z.shape[1]
    Q, _ = np.linalg.qr(Z.conj().T)
    return np.sqrt(L) * Q.conj().T


def generate_transmit_block(waveform, L: int, rng, exact_covariance: bool = False):
    """X = P C + S with unit CSCG symbols C and sensing streams S ~ CN(0, R_s).

    With exact_covariance the sample covariance X X^H / L equals R_x to
    rounding.  When L >= K + M the symbols and sensing streams are whitened
    jointly, which keeps the X = P C + S structure; otherwise (M <= L < K + M)
    X is drawn as a whitened block shaped by a square root of R_x.
    """
    P, R_s = np.asarray(waveform.P), np.asarray(waveform.R_s)
    M, K = P.shape
    if exact_covariance and L < M:
        raise ValueError(f"exact covariance needs L >= M ({L} < {M})")
    C = _cn(rng, (K, L))
    S0 = _cn(rng, (M, L))
    if not exact_covariance:
        return P @ C + _psd_sqrt(R_s) @ S0
    if L >= K + M:
        Z = _whiten_rows(np.vstack([C, S0]))
        return P @ Z[:K] + _psd_sqrt(R_s) @ Z[K:]
    return _psd_sqrt(waveform.R_x) @ _whiten_rows(S0)


def simulate_echo(channels: ChannelSet, stars, X, config: SystemConfig, rng) -> EchoBlock:
    """Y = alpha b a^T Theta_r G X + noise."""
    geom = config.geometry()
    a = steering_stars(config.phi_h, config.phi_v, geom)
    b = steering_sensor(config.phi_h, config.phi_v, geom)
    z = (a * stars.theta_r) @ channels.G @ X
    Y = channels.alpha * np.outer(b, z)
    Y = Y + np.sqrt(config.sigma_s_sq) * _cn(rng, Y.shape)
    return EchoBlock(Y=Y, X=np.asarray(X), alpha=channels.alpha, sigma_s_sq=config.sigma_s_sq)


def angle_grid(sizes=DEFAULT_GRID):
    nh, nv = sizes
    if nh < 2 or nv < 2:
        raise ValueError("grid needs at least two points per axis")
    return np.linspace(0, np.pi, nh), np.linspace(-np.pi / 2, np.pi / 2, nv)


def _cell_scores(W, Z, n_s, geom: ArrayGeometry, ph, pv):
    """delta^H y and ||delta||^2 for a flat list of grid cells."""
    k = 2 * np.pi / geom.wavelength
    u = np.cos(ph) * np.cos(pv)
    A = np.exp(-1j * k * (geom.r_x[:, None] * u + geom.r_z[:, None] * np.sin(pv)))
    B = np.exp(-1j * k * geom.rbar_x[:, None] * u)
    corr = np.sum(B.conj() * (W @ A.conj()), axis=0)
    den = n_s * np.real(np.sum(A * (Z @ A.conj()), axis=0))
    return corr, den


def mle_estimate(echo: EchoBlock, G, theta_r, geom: ArrayGeometry, grid_sizes=DEFAULT_GRID,
                 workers: int = 1, chunk: int = 8192) -> MleSpectrum:
    """Concentrated-likelihood grid search.

    For delta = vec(b a^T Theta_r G X) the spectrum is |delta^H y|^2 / ||delta||^2,
    evaluated through W = Y z^H and Z = z z^H with z = Theta_r G X.
    """
    grid_h, grid_v = angle_grid(grid_sizes)
    z = theta_r[:, None] * (G @ echo.X)
    W = echo.Y @ z.conj().T
    Z = z @ z.conj().T
    n_s = echo.Y.shape[0]
    PV, PH = np.meshgrid(grid_v, grid_h, indexing="ij")
    ph, pv = PH.ravel(), PV.ravel()
    bounds = [(i, min(i + chunk, ph.size)) for i in range(0, ph.size, chunk)]

    def work(bd):
        return _cell_scores(W, Z, n_s, geom, ph[bd[0]:bd[1]], pv[bd[0]:bd[1]])

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(work, bounds))
    else:
        parts = [work(bd) for bd in bounds]
    corr = np.concatenate([p[0] for p in parts])
    den = np.concatenate([p[1] for p in parts])
    num = np.abs(corr) ** 2
    scale = max(np.max(den), 1e-300)
    ok = den > 1e-12 * scale
    if not np.any(ok) or np.max(den) <= 0:
        raise UnsensableError("delta vanishes on the whole grid")
    spec = np.where(ok, num / np.where(ok, den, 1.0), 0.0)
    best = int(np.argmax(spec))
    top = spec[best]
    values = (spec / top if top > 0 else np.ones_like(spec)).reshape(PH.shape)
    values = np.clip(values, 0.0, 1.0)
    alpha_hat = corr[best] / den[best]
    return MleSpectrum(grid_h=grid_h, grid_v=grid_v, values=values,
                       argmax=(float(ph[best]), float(pv[best])), alpha_hat=complex(alpha_hat))


def delta_vector(X, G, theta_r, geom, phi_h, phi_v):
    """Explicit vec(b a^T Theta_r G X) (row-major), for checks on single cells."""
    a = steering_stars(phi_h, phi_v, geom)
    b = steering_sensor(phi_h, phi_v, geom)
    return np.outer(b, (a * theta_r) @ G @ X).ravel()


@dataclass(frozen=True)
class MseSummary:
    rmse_deg: tuple         # (h, v)
    root_crb_deg: tuple     # per-angle sqrt of CRB diagonal
    ratio: tuple
    estimates_deg: np.ndarray


def per_angle_root_crb(config: SystemConfig, channels: ChannelSet, stars, waveform):
    comps = fim_direct(stars.theta_r, channels.G, waveform.R_x,
                       derivative_bundle(config.phi_h, config.phi_v, config.geometry()),
                       channels.alpha, config.L, config.sigma_s_sq)
    rep = crb(comps)
    return tuple(float(np.rad2deg(np.sqrt(v))) for v in np.diag(rep.crb_matrix))


def mse_vs_crb(config: SystemConfig, design, trials: int, rng, grid_sizes=DEFAULT_GRID,
               exact_covariance: bool = True, workers: int = 1) -> MseSummary:
    """Monte Carlo RMSE of the grid MLE against the per-angle root CRB.

    `design` is (channels, stars, waveform).  A fresh transmit block and
    noise realization are drawn for each trial.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    channels, stars, waveform = design
    geom = config.geometry()
    est = np.empty((trials, 2))
    for t in range(trials):
        X = generate_transmit_block(waveform, config.L, rng, exact_covariance)
        echo = simulate_echo(channels, stars, X, config, rng)
        spec = mle_estimate(echo, channels.G, stars.theta_r, geom, grid_sizes, workers)
        est[t] = spec.argmax
    err = est - np.array([config.phi_h, config.phi_v])
    rmse = tuple(float(v) for v in np.rad2deg(np.sqrt(np.mean(err ** 2, axis=0))))
    rc = per_angle_root_crb(config, channels, stars, waveform)
    ratio = tuple(r / c if c > 0 else np.inf for r, c in zip(rmse, rc))
    return MseSummary(rmse, rc, ratio, np.rad2deg(est))


def spectrum_to_csv(spec: MleSpectrum, path):
    """Matrix CSV: first row azimuth grid (deg), first column elevation grid (deg)."""
    path = Path(path)
    lines = ["elev_deg\\azim_deg," + ",".join(f"{v:.4f}" for v in np.rad2deg(spec.grid_h))]
    for pv, row in zip(np.rad2deg(spec.grid_v), spec.values):
        lines.append(f"{pv:.4f}," + ",".join(f"{v:.8e}" for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def spectrum_to_pgm(spec: MleSpectrum, path):
    """8-bit binary PGM; rows follow the elevation grid, columns the azimuth grid."""
    path = Path(path)
    img = np.round(255 * spec.values).astype(np.uint8)
    h, w = img.shape
    path.write_bytes(f"P5\n{w} {h}\n255\n".encode() + img.tobytes())
    return path


def read_pgm(path):
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    w, h = (int(v) for v in parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w)
