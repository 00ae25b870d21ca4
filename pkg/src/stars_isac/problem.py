"""Dimensionless form of one design problem (channels + scenario).

Physical quantities span many orders of magnitude (F entries ~1e-6 W,
FIM entries ~1e10), which makes fixed optimizer thresholds meaningless.
All optimization blocks therefore work with

    G_hat = G / g_br,  h_hat_k = h_k / g_ru_k,  R_hat = R_x / P_budget,
    F_hat = F / (P_budget g_br^2),

and FIM entries taken without physical prefactors, with |alpha| = 1 and
divided by `obj_scale`.  The CRB in physical units is recovered exactly
through `fim_scale`.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .fim import (crb, derivative_bundle, fim_direct, fim_entries_to_matrix,
                  fim_linear_map, schur_phi)
from .geometry import ChannelSet, SystemConfig
from .sdp import herm_to_coords


@dataclass(frozen=True)
class NormalizedProblem:
    config: SystemConfig
    channels: ChannelSet
    G: np.ndarray           # normalized BS -> surface channel
    h: np.ndarray           # normalized user channels, K x N
    g_br: float
    g_ru: np.ndarray
    sigma_hat: np.ndarray   # normalized user noise powers
    gamma: np.ndarray       # linear SINR thresholds
    fim_maps: np.ndarray    # (8, N, N) Hermitian coefficient matrices, scaled
    fim_coords: np.ndarray  # (8, N^2) same in Hermitian coordinates
    fim_scale: float
    obj_scale: float
    bundle: object

    @property
    def K(self):
        return self.h.shape[0]

    @property
    def f_unit(self):
        return self.config.P_budget * self.g_br ** 2

    def with_obj_scale(self, obj_scale: float) -> "NormalizedProblem":
        ratio = self.obj_scale / obj_scale
        return dataclasses.replace(self, fim_maps=self.fim_maps * ratio,
                                   fim_coords=self.fim_coords * ratio, obj_scale=obj_scale)

    # model maps -----------------------------------------------------------
    def A(self, theta_r, R_hat):
        TG = theta_r[:, None] * self.G
        F = TG @ R_hat @ TG.conj().T
        return (F + F.conj().T) / 2

    def jhat(self, F_hat):
        e = self.fim_coords @ herm_to_coords(F_hat)
        return fim_entries_to_matrix(e)

    def utility(self, F_hat):
        """tr of the inverse Schur complement of the scaled FIM (inf if singular)."""
        S = schur_phi(self.jhat(F_hat))
        S = (S + S.T) / 2
        w = np.linalg.eigvalsh(S)
        if w[0] <= 1e-12 * max(abs(w[-1]), 1e-300):
            return np.inf
        return float(np.sum(1 / w))

    def penalty(self, F_hat, R_hat, theta_r, Upsilon, rho):
        D = F_hat - self.A(theta_r, R_hat) + rho * Upsilon
        return float(np.sum(np.abs(D) ** 2) / (2 * rho))

    def al_objective(self, F_hat, R_hat, theta_r, Upsilon, rho):
        return self.utility(F_hat) + self.penalty(F_hat, R_hat, theta_r, Upsilon, rho)

    def effective_channels(self, theta_t):
        """K x M array whose row k is u_k^H, u_k = G_hat^H Theta_t^H h_hat_k."""
        return (self.h.conj() * theta_t[None, :]) @ self.G  # row k holds u_k^H

    def sinr(self, theta_t, P_hat, R_s_hat):
        """Normalized SINR of every user for beamformers P_hat (M x K)."""
        uh = self.effective_channels(theta_t)
        gains = np.abs(uh @ P_hat) ** 2
        sens = np.real(np.einsum("km,mn,kn->k", uh, R_s_hat, uh.conj()))
        sig = np.diag(gains)
        return sig / (gains.sum(axis=1) - sig + sens + self.sigma_hat)

    # physical -------------------------------------------------------------
    def crb_report(self, theta_r, R_x):
        c = self.config
        comps = fim_direct(theta_r, self.channels.G, R_x, self.bundle, self.channels.alpha,
                           c.L, c.sigma_s_sq)
        return crb(comps)


def normalize(channels: ChannelSet, config: SystemConfig, obj_scale: float = 1.0) -> NormalizedProblem:
    c = config
    g_br = np.sqrt(c.rho_0 / c.d_BR ** c.alpha_BR)
    d_ru = np.asarray(channels.d_RU, dtype=float)
    if d_ru.size != channels.K:
        d_ru = np.full(channels.K, c.d_BR) if c.d_RU is None else np.asarray(c.d_RU)
    g_ru = np.sqrt(c.rho_0 / d_ru ** c.alpha_RU)
    geom = c.geometry()
    bundle = derivative_bundle(c.phi_h, c.phi_v, geom)
    alpha = channels.alpha
    phase = alpha / abs(alpha) if abs(alpha) > 0 else 1.0
    maps = fim_linear_map(bundle, phase) / obj_scale
    coords = np.array([herm_to_coords(Mi) for Mi in maps])
    fim_scale = 2 * abs(alpha) ** 2 * c.L * c.P_budget * g_br ** 2 / c.sigma_s_sq
    sigma_hat = c.sigma_k_sq / (c.P_budget * g_br ** 2 * g_ru ** 2)
    return NormalizedProblem(
        config=c, channels=channels, G=channels.G / g_br, h=channels.h / g_ru[:, None],
        g_br=float(g_br), g_ru=g_ru, sigma_hat=sigma_hat, gamma=np.asarray(c.gamma_bar, dtype=float),
        fim_maps=maps, fim_coords=coords, fim_scale=float(fim_scale), obj_scale=float(obj_scale),
        bundle=bundle)
