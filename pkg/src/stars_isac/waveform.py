"""Waveform block: SDR over (U, F, R_x, P_k) and rank-one beamformer recovery."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fim import schur_phi
from .problem import NormalizedProblem
from .sdp import (ConicProgram, LinExpr, MatExpr, SolverError, Status, coords_to_herm,
                  epigraph_frobenius, epigraph_trace_inverse, herm_to_coords, solve)


class UnservableUserError(ValueError):
    pass


@dataclass(frozen=True)
class Waveform:
    """Physical waveform: beamformers P (M x K) and sensing covariance R_s (watts)."""

    P: np.ndarray
    R_s: np.ndarray

    @property
    def R_x(self):
        R = self.P @ self.P.conj().T + self.R_s
        return (R + R.conj().T) / 2

    def normalized(self, power):
        return self.P / np.sqrt(power), self.R_s / power


@dataclass(frozen=True)
class WaveformBlockSolution:
    U: np.ndarray
    F: np.ndarray           # normalized auxiliary matrix
    waveform: Waveform
    objective: float
    R_hat: np.ndarray       # R_x / P_budget


def recover_beamformers(P_blocks, effective_channels, gamma_bar=None):
    """Rank-one beamformers p_k = P_k u_k / sqrt(u_k^H P_k u_k).

    `effective_channels` is K x M with row k equal to u_k^H.
    """
    uh = np.atleast_2d(effective_channels)
    K = len(P_blocks)
    M = uh.shape[1]
    out = np.zeros((M, K), dtype=complex)
    for k, Pk in enumerate(P_blocks):
        u = uh[k].conj()
        q = np.real(u.conj() @ Pk @ u)
        if q <= 1e-300:
            if gamma_bar is not None and gamma_bar[k] > 0:
                raise UnservableUserError(f"user {k} has zero effective channel power")
            continue
        out[:, k] = Pk @ u / np.sqrt(q)
    return out


def recover_sensing_cov(R_x, P, tol=1e-8):
    R_s = R_x - P @ P.conj().T
    R_s = (R_s + R_s.conj().T) / 2
    w, V = np.linalg.eigh(R_s)
    scale = max(1.0, np.max(np.abs(R_x), initial=0.0))
    if w.size and w[0] < -tol * scale:
        raise ValueError(f"sensing covariance indefinite (min eigenvalue {w[0]:.3e})")
    w = np.clip(w, 0, None)
    return (V * w) @ V.conj().T


def _fim_range_basis(problem: NormalizedProblem):
    """Orthonormal rows spanning the coordinates the FIM functionals can see."""
    _, s, Vt = np.linalg.svd(problem.fim_coords, full_matrices=False)
    keep = s > 1e-12 * s[0]
    return Vt[keep]


def _fim_lmi(problem, U, f_exprs):
    """[[J_pp - U, J_pa], [J_pa^T, J_aa I]] >= 0 from the eight scaled entries."""
    e = f_exprs
    Ue = [[U.inner(np.array([[1.0, 0], [0, 0]])), U.inner(np.array([[0, 0.5], [0.5, 0]]))],
          [None, U.inner(np.array([[0, 0], [0, 1.0]]))]]
    return MatExpr.from_entries([
        [e[0] - Ue[0][0], e[1] - Ue[0][1], e[3], e[4]],
        [None, e[2] - Ue[1][1], e[5], e[6]],
        [None, None, e[7], 0.0],
        [None, None, None, e[7]],
    ])


def build_waveform_program(problem: NormalizedProblem, theta_t, theta_r, Upsilon, rho):
    """Conic program of the waveform block; rho=None ties F to R_x exactly."""
    M, K = problem.G.shape[1], problem.K
    prog = ConicProgram()
    U = prog.add_symmetric("U", 2, psd=False)
    epigraph_trace_inverse(prog, U)
    R = prog.add_hermitian("R", M, psd=False)
    Pk = [prog.add_hermitian(f"P{k}", M) for k in range(K)]
    lmi = R.embed()
    for P in Pk:
        lmi = lmi - P.embed()
    prog.add_lmi(lmi, name="R-sumP")
    prog.add_ineq(R.trace(), "<=", 1.0)

    uh = problem.effective_channels(theta_t)
    for k in range(K):
        g = problem.gamma[k]
        uu = np.outer(uh[k].conj(), uh[k])
        norm = max(np.real(np.trace(uu)), 1e-300)
        lhs = (1 + g) * Pk[k].inner(uu) - g * R.inner(uu)
        prog.add_ineq(lhs * (1 / norm), ">=", g * problem.sigma_hat[k] / norm)

    TG = theta_r[:, None] * problem.G
    # entry_i(F) = <C_i, A(R)> - rho <C_i, Upsilon> + (C E^T w)_i
    f_exprs = [R.inner(TG.conj().T @ Ci @ TG) for Ci in problem.fim_maps]
    if rho is not None:
        E = _fim_range_basis(problem)
        w = prog.add_free("w", E.shape[0])
        ups = problem.fim_coords @ herm_to_coords(Upsilon)
        CE = problem.fim_coords @ E.T
        for i in range(8):
            f_exprs[i] = f_exprs[i] + LinExpr(w.indices, CE[i]) - rho * ups[i]
        epigraph_frobenius(prog, w.linmap(np.eye(E.shape[0])), weight=1 / (2 * rho))
    prog.add_lmi(_fim_lmi(problem, U, f_exprs), name="fim")
    return prog


def solve_waveform_block(problem: NormalizedProblem, stars, Upsilon, rho, tol=1e-8):
    """Optimal (U, F, P, R_s) at fixed surface coefficients.

    `rho=None` switches the penalty off and enforces F = Theta_r G R_x G^H Theta_r^H
    exactly (used for initialization and fixed-surface baselines).
    Raises SolverError(Infeasible) if the SINR targets are unattainable.
    """
    theta_t, theta_r = stars.theta_t, stars.theta_r
    if Upsilon is None:
        Upsilon = np.zeros((problem.G.shape[0],) * 2, dtype=complex)
    prog = build_waveform_program(problem, theta_t, theta_r, Upsilon, rho)
    sol = solve(prog, tol=tol)
    if sol.status != Status.OPTIMAL:
        raise SolverError(sol.status, "waveform block")
    K = problem.K
    R_hat = sol.block_values["R"]
    R_hat = (R_hat + R_hat.conj().T) / 2
    blocks = [sol.block_values[f"P{k}"] for k in range(K)]
    uh = problem.effective_channels(theta_t)
    P_hat = recover_beamformers(blocks, uh, problem.gamma)
    Rs_hat = recover_sensing_cov(R_hat, P_hat)
    A = problem.A(theta_r, R_hat)
    if rho is None:
        F_hat = A
    else:
        E = _fim_range_basis(problem)
        w = sol.linear_values["w"]
        F_hat = A - rho * Upsilon + coords_to_herm(E.T @ w, A.shape[0])
    power = problem.config.P_budget
    wf = Waveform(P_hat * np.sqrt(power), Rs_hat * power)
    R_hat = wf.R_x / power
    U = schur_phi(problem.jhat(F_hat))
    obj = problem.utility(F_hat)
    if rho is not None:
        obj += problem.penalty(F_hat, R_hat, theta_r, Upsilon, rho)
    return WaveformBlockSolution(U=(U + U.T) / 2, F=F_hat, waveform=wf, objective=obj, R_hat=R_hat)


def heuristic_waveform(problem: NormalizedProblem, theta_t, share=0.5):
    """Feasible-point baseline: MRT beamformers plus isotropic sensing, scaled to power."""
    M, K = problem.G.shape[1], problem.K
    uh = problem.effective_channels(theta_t)
    P = np.zeros((M, K), dtype=complex)
    if K:
        for k in range(K):
            u = uh[k].conj()
            P[:, k] = u / max(np.linalg.norm(u), 1e-300)
        P *= np.sqrt(share / K)
        R_s = np.eye(M) * (1 - share) / M
    else:
        R_s = np.eye(M) / M
    return P, R_s
