"""Fisher information and Cramer-Rao bound for 2D DOA sensing through the surface."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import ArrayGeometry, steering_sensor, steering_stars

HERMITIAN_TOL = 1e-8
COND_LIMIT = 1e12


class UnidentifiableError(ValueError):
    """The Schur complement of the FIM is singular: the DOA cannot be estimated."""


@dataclass(frozen=True)
class DerivativeBundle:
    B: np.ndarray
    B_dot_h: np.ndarray
    B_dot_v: np.ndarray


@dataclass(frozen=True)
class FimComponents:
    J_phiphi: np.ndarray
    J_phialpha: np.ndarray
    J_alphaalpha: np.ndarray

    def matrix(self):
        """Assembled 4x4 FIM over (phi_h, phi_v, Re alpha, Im alpha)."""
        return np.block([[self.J_phiphi, self.J_phialpha],
                         [self.J_phialpha.T, self.J_alphaalpha]])


@dataclass(frozen=True)
class CrbReport:
    crb_matrix: np.ndarray
    root_crb_deg: float
    trace_crb: float


def derivative_bundle(phi_h, phi_v, geom: ArrayGeometry) -> DerivativeBundle:
    k = 2 * np.pi / geom.wavelength
    a = steering_stars(phi_h, phi_v, geom)
    b = steering_sensor(phi_h, phi_v, geom)
    B = np.outer(b, a)
    # d/dphi of the common x-coordinate phase hits both arrays
    both_x = geom.rbar_x[:, None] * B + B * geom.r_x[None, :]
    B_dot_h = 1j * k * np.sin(phi_h) * np.cos(phi_v) * both_x
    B_dot_v = (1j * k * np.cos(phi_h) * np.sin(phi_v) * both_x
               - 1j * k * np.cos(phi_v) * B * geom.r_z[None, :])
    return DerivativeBundle(B, B_dot_h, B_dot_v)


def _check_hermitian(F):
    F = np.asarray(F, dtype=complex)
    if F.ndim != 2 or F.shape[0] != F.shape[1]:
        raise ValueError("F must be square")
    scale = max(1.0, np.max(np.abs(F), initial=0.0))
    if np.max(np.abs(F - F.conj().T), initial=0.0) > HERMITIAN_TOL * scale:
        raise ValueError("F is not Hermitian")
    return (F + F.conj().T) / 2


def fim_from_F(F, bundle: DerivativeBundle, alpha, L, sigma_s_sq) -> FimComponents:
    """FIM blocks as functions of F = Theta_r G R_x G^H Theta_r^H."""
    if L < 1 or sigma_s_sq <= 0:
        raise ValueError("need L >= 1 and sigma_s_sq > 0")
    F = _check_hermitian(F)
    dots = (bundle.B_dot_h, bundle.B_dot_v)
    c_phi = 2 * abs(alpha) ** 2 * L / sigma_s_sq
    c = 2 * L / sigma_s_sq
    J_pp = np.empty((2, 2))
    for l in range(2):
        for p in range(2):
            J_pp[l, p] = np.real(np.trace(dots[p] @ F @ dots[l].conj().T))
    J_pp = c_phi * (J_pp + J_pp.T) / 2
    J_pa = np.empty((2, 2))
    BF = bundle.B @ F
    for l in range(2):
        t = np.conj(alpha) * np.trace(BF @ dots[l].conj().T)
        J_pa[l] = c * np.array([t.real, -t.imag])  # Re(t * [1, j])
    J_aa = c * np.real(np.trace(BF @ bundle.B.conj().T)) * np.eye(2)
    return FimComponents(J_pp, J_pa, J_aa)


def fim_direct(theta_r, G, R_x, bundle, alpha, L, sigma_s_sq) -> FimComponents:
    TG = theta_r[:, None] * G
    F = TG @ R_x @ TG.conj().T
    return fim_from_F((F + F.conj().T) / 2, bundle, alpha, L, sigma_s_sq)


def fim_linear_map(bundle: DerivativeBundle, alpha_phase=1.0):
    """Hermitian coefficient matrices C_i with entry_i = Re tr(C_i F).

    Order: J_hh, J_hv, J_vv, J_pa[0,0], J_pa[0,1], J_pa[1,0], J_pa[1,1], J_aa,
    each without the physical prefactors and with |alpha| = 1 (alpha_phase
    is the unit-modulus target phase).
    """
    def herm(X):
        return (X + X.conj().T) / 2

    dots = (bundle.B_dot_h, bundle.B_dot_v)
    B = bundle.B
    ac = np.conj(alpha_phase)
    mats = [herm(dots[0].conj().T @ dots[0]),
            herm(dots[1].conj().T @ dots[0]),
            herm(dots[1].conj().T @ dots[1])]
    for l in range(2):
        base = ac * dots[l].conj().T @ B
        mats.append(herm(base))
        mats.append(herm(1j * base))
    mats.append(herm(B.conj().T @ B))
    return np.array(mats)


def fim_entries_to_matrix(e):
    """4x4 FIM from the eight entries produced by fim_linear_map."""
    J = np.empty((4, 4))
    J[0, 0], J[0, 1], J[1, 1] = e[0], e[1], e[2]
    J[1, 0] = e[1]
    J[0, 2], J[0, 3], J[1, 2], J[1, 3] = e[3], e[4], e[5], e[6]
    J[2:, :2] = J[:2, 2:].T
    J[2:, 2:] = e[7] * np.eye(2)
    return J


def schur_phi(J):
    """Schur complement of the alpha block in a 4x4 FIM.

    A zero alpha block (no echo energy along the target direction) forces a
    zero cross block in a PSD FIM, so the pseudo-inverse gives the
    generalized complement.
    """
    try:
        return J[:2, :2] - J[:2, 2:] @ np.linalg.solve(J[2:, 2:], J[2:, :2])
    except np.linalg.LinAlgError:
        return J[:2, :2] - J[:2, 2:] @ np.linalg.pinv(J[2:, 2:]) @ J[2:, :2]


def crb(components: FimComponents) -> CrbReport:
    J_aa = components.J_alphaalpha
    if np.linalg.cond(J_aa) > COND_LIMIT or J_aa[0, 0] <= 0:
        raise UnidentifiableError("unidentifiable parameters: zero echo energy")
    S = components.J_phiphi - components.J_phialpha @ np.linalg.solve(J_aa, components.J_phialpha.T)
    S = (S + S.T) / 2
    if not np.all(np.isfinite(S)) or np.linalg.cond(S) > COND_LIMIT:
        raise UnidentifiableError("unidentifiable parameters: singular Schur complement")
    C = np.linalg.inv(S)
    C = (C + C.T) / 2
    tr = float(np.trace(C))
    if tr <= 0:
        raise UnidentifiableError("unidentifiable parameters: indefinite FIM")
    return CrbReport(C, float(np.sqrt(tr) * 180 / np.pi), tr)


def comm_sinr(k, channels, stars, waveform, sigma_k_sq) -> float:
    """SINR of user k for the given surface profile and waveform."""
    g = (channels.h[k].conj() * stars.theta_t) @ channels.G  # h_k^H Theta_t G
    P = waveform.P
    gains = np.abs(g @ P) ** 2 if P.size else np.zeros(0)
    interf = gains.sum() - (gains[k] if P.size else 0.0)
    sens = np.real(g @ waveform.R_s @ g.conj())
    signal = gains[k] if P.size else 0.0
    return float(signal / (interf + sens + sigma_k_sq))
