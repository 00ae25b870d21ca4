"""Surface-coefficient blocks: SDR subproblems, Gaussian randomization and the
closed-form updates for the coupled phase-shift model."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problem import NormalizedProblem
from .sdp import (ConicProgram, LinExpr, SolverError, Status, epigraph_frobenius, herm_basis,
                  herm_to_coords, solve)

INDEPENDENT = "Independent"
COUPLED = "Coupled"
SINR_RTOL = 1e-6


@dataclass(frozen=True)
class StarsProfile:
    """Per-element amplitudes and phases of both sides of the surface."""

    beta_t: np.ndarray
    beta_r: np.ndarray
    phase_t: np.ndarray
    phase_r: np.ndarray
    model: str = INDEPENDENT

    @property
    def theta_t(self):
        return self.beta_t * np.exp(1j * self.phase_t)

    @property
    def theta_r(self):
        return self.beta_r * np.exp(1j * self.phase_r)

    @property
    def N(self):
        return self.beta_t.size

    @classmethod
    def from_theta(cls, theta_t, theta_r, model=INDEPENDENT):
        theta_t, theta_r = np.asarray(theta_t), np.asarray(theta_r)
        return cls(np.abs(theta_t), np.abs(theta_r), np.angle(theta_t), np.angle(theta_r), model)

    @classmethod
    def random(cls, n, rng, model=INDEPENDENT):
        """Unit split 1/sqrt(2) per side and uniform random phases."""
        amp = np.full(n, 1 / np.sqrt(2))
        ph_t = rng.uniform(0, 2 * np.pi, n)
        ph_r = ph_t + np.pi / 2 if model == COUPLED else rng.uniform(0, 2 * np.pi, n)
        return cls(amp, amp.copy(), ph_t, ph_r, model)

    def energy_error(self):
        return float(np.max(np.abs(self.beta_t ** 2 + self.beta_r ** 2 - 1)))

    def coupling_error(self):
        return float(np.max(np.abs(np.cos(self.phase_t - self.phase_r))))


def eig_rank_factor(R_bar, rel_tol=1e-10):
    """Vectors v_j = sqrt(lambda_j) e_j with sum_j v_j v_j^H = R_bar."""
    R_bar = (R_bar + R_bar.conj().T) / 2
    w, V = np.linalg.eigh(R_bar)
    if w[-1] <= 0:
        return []
    keep = w > rel_tol * w[-1]
    return [np.sqrt(wi) * V[:, i] for i, wi in zip(np.flatnonzero(keep), w[keep])]


# ---------------------------------------------------------------- closed forms

def optimal_phases_coupled(u, v):
    """Unit q_t, q_r = +-j q_t minimizing Re(u q_t) + Re(v q_r).

    Works elementwise on arrays; ties go to the q_r = +j q_t branch.
    """
    u, v = np.asarray(u, dtype=complex), np.asarray(v, dtype=complex)
    plus, minus = u + 1j * v, u - 1j * v
    use_plus = np.abs(plus) >= np.abs(minus)
    psi = np.where(use_plus, plus, minus)
    q_t = np.exp(1j * (np.pi - np.angle(psi)))
    q_r = np.where(use_plus, 1j, -1j) * q_t
    return q_t, q_r


def optimal_amplitudes(a, b):
    """(beta_t, beta_r) = (sin w, cos w), w in [0, pi/2], minimizing a beta_t + b beta_r."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    r = np.hypot(a, b)
    sgn = np.where(b >= 0, 1.0, -1.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        psi = sgn * np.arccos(np.clip(np.where(r > 0, a / np.where(r > 0, r, 1), 1.0), -1, 1))
    omega = np.where(psi < -np.pi / 2, -np.pi / 2 - psi,
                     np.where(psi < np.pi / 4, 0.0, np.pi / 2))
    omega = np.where(r > 0, omega, 0.0)
    return np.sin(omega), np.cos(omega)


def tilde_objective(beta_t, beta_r, q_t, q_r, ups_t, ups_r):
    """sum_i Re(ups_i^H diag(beta_i) q_i)."""
    return float(np.sum(np.real(np.conj(ups_t) * beta_t * q_t))
                 + np.sum(np.real(np.conj(ups_r) * beta_r * q_r)))


def solve_tilde_theta(theta_t, theta_r, lambda_t, lambda_r, rho, tol=1e-9, max_sweeps=200,
                      history=None):
    """Closest coupled-feasible pair to (theta - rho lambda) by alternating closed forms."""
    ups_t = -theta_t + rho * lambda_t
    ups_r = -theta_r + rho * lambda_r
    at, ar = np.abs(ups_t), np.abs(ups_r)
    nrm = np.hypot(at, ar)
    safe = np.where(nrm > 0, nrm, 1.0)
    beta_t = np.where(nrm > 0, at / safe, 1 / np.sqrt(2))
    beta_r = np.where(nrm > 0, ar / safe, 1 / np.sqrt(2))
    prev = np.inf
    for _ in range(max_sweeps):
        q_t, q_r = optimal_phases_coupled(np.conj(ups_t) * beta_t, np.conj(ups_r) * beta_r)
        mid = tilde_objective(beta_t, beta_r, q_t, q_r, ups_t, ups_r)
        beta_t, beta_r = optimal_amplitudes(np.real(np.conj(ups_t) * q_t), np.real(np.conj(ups_r) * q_r))
        cur = tilde_objective(beta_t, beta_r, q_t, q_r, ups_t, ups_r)
        if history is not None:
            history.extend([mid, cur])
        if prev - cur < tol:
            break
        prev = cur
    prof = StarsProfile(beta_t, beta_r, np.angle(q_t), np.angle(q_t) + np.where(
        np.isclose(q_r, 1j * q_t), np.pi / 2, -np.pi / 2), COUPLED)
    return prof


# ---------------------------------------------------------------- randomization

@dataclass
class RandomizationResult:
    theta_t: np.ndarray | None
    theta_r: np.ndarray | None
    objective: float
    n_feasible: int
    n_candidates: int
    fallback: bool = False


def _sqrt_psd(Q):
    w, V = np.linalg.eigh((Q + Q.conj().T) / 2)
    return V * np.sqrt(np.clip(w, 0, None))


def _renormalize(x_t, x_r, amp_t=None, amp_r=None):
    """Per-element energy split: from given amplitudes, else from the pair itself."""
    if amp_t is None:
        a_t, a_r = np.abs(x_t), np.abs(x_r)
    else:
        a_t, a_r = np.broadcast_to(amp_t, x_t.shape), np.broadcast_to(amp_r, x_r.shape)
    nrm = np.hypot(a_t, a_r)
    safe = np.where(nrm > 0, nrm, 1.0)
    b_t = np.where(nrm > 0, a_t / safe, 1 / np.sqrt(2))
    b_r = np.where(nrm > 0, a_r / safe, 1 / np.sqrt(2))
    return b_t * np.exp(1j * np.angle(x_t)), b_r * np.exp(1j * np.angle(x_r))


def gaussian_randomize(Q_t, Q_r, feasibility_check, trials, rng, objective=None,
                       fixed_t=None, extra=(), homogeneous=False):
    """Best feasible rank-one candidate drawn from CN(0, Q_t) x CN(0, Q_r).

    Each draw yields two candidates: amplitudes from diag(Q) with the sampled
    phases, and the sampled pair renormalized element by element.  With
    `fixed_t`, an extra family holds theta_t at that vector and samples only
    theta_r.  `extra` holds additional (theta_t, theta_r) candidates such as
    incumbents.  For homogenized (N+1)-blocks every sample is de-homogenized.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    n = Q_t.shape[0]
    St, Sr = _sqrt_psd(Q_t), _sqrt_psd(Q_r)
    z_t = (rng.standard_normal((trials, n)) + 1j * rng.standard_normal((trials, n))) / np.sqrt(2)
    z_r = (rng.standard_normal((trials, n)) + 1j * rng.standard_normal((trials, n))) / np.sqrt(2)
    x_t, x_r = z_t @ St.T, z_r @ Sr.T
    amp_t = np.sqrt(np.clip(np.real(np.diag(Q_t)), 0, None))
    amp_r = np.sqrt(np.clip(np.real(np.diag(Q_r)), 0, None))
    if homogeneous:
        x_t, x_r = dehomogenize(x_t), dehomogenize(x_r)
        amp_t, amp_r = amp_t[:-1], amp_r[:-1]
    cands = [_renormalize(x_t, x_r, amp_t, amp_r), _renormalize(x_t, x_r)]
    if fixed_t is not None:
        ft = np.broadcast_to(fixed_t, x_r.shape)
        a_r = np.sqrt(np.clip(1 - np.abs(fixed_t) ** 2, 0, None))
        cands.append((ft, _renormalize(ft, x_r, np.abs(fixed_t), a_r)[1]))
    if len(extra):
        cands.append((np.array([e[0] for e in extra]), np.array([e[1] for e in extra])))
    T = np.vstack([c[0] for c in cands])
    R = np.vstack([c[1] for c in cands])
    feas = np.asarray(feasibility_check(T, R), dtype=bool)
    n_feas = int(feas.sum())
    if n_feas == 0:
        return RandomizationResult(None, None, np.inf, 0, T.shape[0], fallback=True)
    if objective is None:
        i = int(np.flatnonzero(feas)[0])
        return RandomizationResult(T[i], R[i], np.nan, n_feas, T.shape[0])
    vals = np.where(feas, objective(T, R), np.inf)
    i = int(np.argmin(vals))
    return RandomizationResult(T[i], R[i], float(vals[i]), n_feas, T.shape[0])


def dehomogenize(vartheta):
    """First N entries divided by the last one (removes the common phase)."""
    vartheta = np.asarray(vartheta)
    last = vartheta[..., -1:]
    safe = np.where(np.abs(last) > 0, last, 1.0)
    return vartheta[..., :-1] / safe


def refine_reflection_phases(theta_r, F_bar, R_bar, target=None, sweeps=20, tol=1e-10):
    """Element-wise exact phase updates of theta_r for ||F_bar - R_bar o theta theta^H||^2
    (+ ||theta - target||^2 when given).  Amplitudes are kept, so SINR and
    energy constraints are unaffected.  Never increases the objective."""
    th = np.array(theta_r, dtype=complex)
    W = np.conj(F_bar) * R_bar          # coefficient of theta_n conj(theta_m)
    np.fill_diagonal(W, 0)
    prev = np.inf
    for _ in range(sweeps):
        for n in range(th.size):
            c = W[n] @ np.conj(th)      # objective has -4 Re(theta_n c)
            if target is not None:
                c = c + 0.5 * np.conj(target[n])
            if abs(c) > 0 and abs(th[n]) > 0:
                th[n] = abs(th[n]) * np.exp(-1j * np.angle(c))
        val = _penalty_single(th, F_bar, R_bar, target)
        if prev - val <= tol * max(1.0, abs(val)):
            break
        prev = val
    return th


def _penalty_single(th, F_bar, R_bar, target=None):
    val = float(np.sum(np.abs(F_bar - R_bar * np.outer(th, th.conj())) ** 2))
    if target is not None:
        val += float(np.sum(np.abs(th - target) ** 2))
    return val


def dominant_extraction(Q_t, Q_r, homogeneous=False):
    """Principal-eigenvector phases with diag(Q) amplitudes (randomization fallback)."""
    def top(Q):
        w, V = np.linalg.eigh((Q + Q.conj().T) / 2)
        v = V[:, -1]
        return dehomogenize(v) if homogeneous else v
    cut = -1 if homogeneous else None
    amp_t = np.sqrt(np.clip(np.real(np.diag(Q_t))[:cut], 0, None))
    amp_r = np.sqrt(np.clip(np.real(np.diag(Q_r))[:cut], 0, None))
    return _renormalize(top(Q_t)[None], top(Q_r)[None], amp_t, amp_r)


# ---------------------------------------------------------------- block data

@dataclass
class ThetaBlockResult:
    stars: StarsProfile
    objective: float        # block objective (squared-norm form) at the returned profile
    sdp_bound: float
    n_feasible: int
    fallback: bool
    kept_incumbent: bool


class _ThetaData:
    """Precomputed quantities of the surface block for a fixed waveform."""

    def __init__(self, problem: NormalizedProblem, waveform, F_hat, Upsilon, rho):
        self.p = problem
        power = problem.config.P_budget
        self.P_hat, self.Rs_hat = waveform.normalized(power)
        R_hat = waveform.R_x / power
        R_bar = problem.G @ R_hat @ problem.G.conj().T
        vecs = eig_rank_factor(R_bar)
        self.R_bar = sum((np.outer(v, v.conj()) for v in vecs), np.zeros_like(R_bar))
        self.F_bar = F_hat + rho * Upsilon
        N = problem.G.shape[0]
        GP = problem.G @ self.P_hat                      # N x K
        GRG = problem.G @ self.Rs_hat @ problem.G.conj().T
        self.Phi, self.Psi = [], []
        for k in range(problem.K):
            hk = problem.h[k]
            row = []
            for i in range(problem.K):
                c = np.conj(hk) * GP[:, i]
                row.append(np.outer(np.conj(c), c))   # conj(c c^H)
            self.Phi.append(row)
            self.Psi.append(np.conj(np.conj(hk)[:, None] * GRG * hk[None, :]))
        self.N = N

    def penalty_values(self, theta_r):
        """||F_bar - R_bar o (theta theta^H)||^2 for each row of theta_r."""
        th = np.atleast_2d(theta_r)
        a = np.abs(th) ** 2
        quad = np.einsum("tm,mn,tn->t", a, np.abs(self.R_bar) ** 2, a)
        # <F_bar, R_bar o theta theta^H> = sum conj(F_mn) R_mn theta_m conj(theta_n)
        cross = np.real(np.einsum("tm,mn,tn->t", th, np.conj(self.F_bar) * self.R_bar, th.conj()))
        return np.sum(np.abs(self.F_bar) ** 2) - 2 * cross + quad

    def sinr_ok(self, theta_t):
        th = np.atleast_2d(theta_t)
        if self.p.K == 0:
            return np.ones(th.shape[0], dtype=bool)
        UH = np.einsum("tn,kn,nm->tkm", th, np.conj(self.p.h), self.p.G)
        gains = np.abs(UH @ self.P_hat) ** 2
        sens = np.real(np.einsum("tkm,mn,tkn->tk", UH, self.Rs_hat, UH.conj()))
        sig = np.einsum("tkk->tk", gains)
        denom = gains.sum(axis=2) - sig + sens + self.p.sigma_hat[None, :]
        need = self.p.gamma[None, :] * denom * (1 - SINR_RTOL)
        return np.all(sig >= need, axis=1)

    def hadamard_coords(self, support=None):
        """Matrix mapping coordinates of Q_r (on `support`) to coordinates of R_bar o Q_r."""
        idx = np.arange(self.N) if support is None else np.asarray(support)
        basis = herm_basis(idx.size)
        cols = []
        for E in basis:
            full = np.zeros((self.N, self.N), dtype=complex)
            full[np.ix_(idx, idx)] = E
            cols.append(herm_to_coords(self.R_bar * full))
        return np.array(cols).T

    def add_sinr_rows(self, prog, Qt, support=None):
        idx = np.arange(self.N) if support is None else np.asarray(support)
        for k in range(self.p.K):
            g = self.p.gamma[k]
            if g == 0:
                continue
            C = self.Phi[k][k] - g * (sum(self.Phi[k][i] for i in range(self.p.K) if i != k) + self.Psi[k])
            Cs = np.zeros((Qt.dim, Qt.dim), dtype=complex)
            Cs[:idx.size, :idx.size] = C[np.ix_(idx, idx)]
            nrm = max(np.linalg.norm(Cs), 1e-300)
            prog.add_ineq(Qt.inner(Cs) * (1 / nrm), ">=", g * self.p.sigma_hat[k] / nrm)


def _sinr_feasible_fixed(data, theta_t):
    return bool(data.sinr_ok(theta_t[None])[0])


def solve_theta_independent(problem: NormalizedProblem, waveform, F_hat, Upsilon, rho, rng,
                            incumbent: StarsProfile | None = None, trials=100,
                            frozen_amplitudes=None, tol=1e-8, refine=True) -> ThetaBlockResult:
    """SDR of the surface block (independent phases) plus rank-one extraction.

    frozen_amplitudes=(beta_t, beta_r) fixes the amplitudes and optimizes
    phases only; elements with zero amplitude on a side drop out of that side.
    refine=False returns the best randomization candidate without the
    coordinate-descent pass over the reflection phases.
    """
    data = _ThetaData(problem, waveform, F_hat, Upsilon, rho)
    N = data.N
    prog = ConicProgram()
    if frozen_amplitudes is None:
        sup_t = sup_r = np.arange(N)
    else:
        bt, br = (np.asarray(b, dtype=float) for b in frozen_amplitudes)
        sup_t, sup_r = np.flatnonzero(bt > 0), np.flatnonzero(br > 0)
    Qt = prog.add_hermitian("Qt", max(sup_t.size, 1))
    Qr = prog.add_hermitian("Qr", max(sup_r.size, 1))
    H = data.hadamard_coords(sup_r)
    E = Qr.linmap(H, -herm_to_coords(data.F_bar))
    epigraph_frobenius(prog, E)
    if frozen_amplitudes is None:
        for n in range(N):
            prog.add_eq(Qt.entry_diag(n) + Qr.entry_diag(n), 1.0)
    else:
        for j, n in enumerate(sup_t):
            prog.add_eq(Qt.entry_diag(j), bt[n] ** 2)
        for j, n in enumerate(sup_r):
            prog.add_eq(Qr.entry_diag(j), br[n] ** 2)
    data.add_sinr_rows(prog, Qt, sup_t)
    sol = solve(prog, tol=tol)
    if sol.status != Status.OPTIMAL:
        raise SolverError(sol.status, "surface block")
    bound = sol.objective_value

    def lift(Qs, sup):
        Q = np.zeros((N, N), dtype=complex)
        Q[np.ix_(sup, sup)] = Qs[:sup.size, :sup.size]
        return Q

    Q_t, Q_r = lift(sol.block_values["Qt"], sup_t), lift(sol.block_values["Qr"], sup_r)
    if frozen_amplitudes is None:
        def fix(T, R):
            return T, R
    else:
        def fix(T, R):
            return bt * np.exp(1j * np.angle(T)), br * np.exp(1j * np.angle(R))
    extra = []
    if incumbent is not None:
        extra.append((incumbent.theta_t, incumbent.theta_r))
    res = gaussian_randomize(
        Q_t, Q_r, lambda T, R: data.sinr_ok(fix(T, R)[0]), trials, rng,
        objective=lambda T, R: data.penalty_values(fix(T, R)[1]),
        fixed_t=None if incumbent is None else incumbent.theta_t, extra=extra)
    fallback = res.theta_t is None
    if fallback:
        th_t, th_r = dominant_extraction(Q_t, Q_r)
        th_t, th_r = fix(th_t[0], th_r[0])
        val = float(data.penalty_values(th_r)[0])
    else:
        th_t, th_r = fix(res.theta_t, res.theta_r)
    if refine:
        th_r = refine_reflection_phases(th_r, data.F_bar, data.R_bar)
    val = float(data.penalty_values(th_r)[0])
    kept = False
    if incumbent is not None:
        inc_val = float(data.penalty_values(incumbent.theta_r)[0])
        if val > inc_val or (fallback and not _sinr_feasible_fixed(data, th_t)):
            # polishing the incumbent's own reflection phases keeps it feasible
            ref_r = refine_reflection_phases(incumbent.theta_r, data.F_bar, data.R_bar)
            ref_val = float(data.penalty_values(ref_r)[0])
            th_t = incumbent.theta_t
            if ref_val < inc_val:
                th_r, val = ref_r, ref_val
            else:
                kept = True
                th_r, val = incumbent.theta_r, inc_val
    if kept:
        stars = incumbent
    elif frozen_amplitudes is None:
        stars = StarsProfile.from_theta(th_t, th_r)
    else:
        stars = StarsProfile(bt.copy(), br.copy(), np.angle(th_t), np.angle(th_r))
    return ThetaBlockResult(stars, val, bound, res.n_feasible, fallback, kept)


def solve_theta_coupled_relaxed(problem: NormalizedProblem, waveform, F_hat, Upsilon, tilde_t,
                                tilde_r, lambda_t, lambda_r, rho, rng,
                                incumbent: StarsProfile | None = None, trials=100,
                                tol=1e-8) -> ThetaBlockResult:
    """Homogenized SDR of the surface block with the coupling penalty terms.

    Block objective: ||F_bar - R_bar o Q_r||^2 + sum_i ||theta_i - tilde_i - rho lambda_i||^2.
    """
    data = _ThetaData(problem, waveform, F_hat, Upsilon, rho)
    N = data.N
    prog = ConicProgram()
    Qt = prog.add_hermitian("Qt", N + 1)
    Qr = prog.add_hermitian("Qr", N + 1)
    # objective part 1 on the leading N x N block of Q_r
    H = data.hadamard_coords()
    sub = _leading_block_selector(N)
    E = Qr.linmap(H @ sub, -herm_to_coords(data.F_bar))
    epigraph_frobenius(prog, E)
    consts = 0.0
    for Q, tl, lam in ((Qt, tilde_t, lambda_t), (Qr, tilde_r, lambda_r)):
        ups = -(tl + rho * lam)
        Xi = np.zeros((N + 1, N + 1), dtype=complex)
        Xi[:N, :N] = np.eye(N)
        Xi[:N, N] = ups
        Xi[N, :N] = np.conj(ups)
        prog.minimize(Q.inner(Xi))
        consts += float(np.sum(np.abs(ups) ** 2))
    prog.minimize(LinExpr.constant(consts))
    for n in range(N):
        prog.add_eq(Qt.entry_diag(n) + Qr.entry_diag(n), 1.0)
    prog.add_eq(Qt.entry_diag(N), 1.0)
    prog.add_eq(Qr.entry_diag(N), 1.0)
    data.add_sinr_rows(prog, Qt)
    sol = solve(prog, tol=tol)
    if sol.status != Status.OPTIMAL:
        raise SolverError(sol.status, "coupled surface block")
    bound = sol.objective_value

    def coupling_values(T, R):
        return (np.sum(np.abs(T - (tilde_t + rho * lambda_t)) ** 2, axis=1)
                + np.sum(np.abs(R - (tilde_r + rho * lambda_r)) ** 2, axis=1))

    def objective(T, R):
        return data.penalty_values(R) + coupling_values(T, R)

    Qht, Qhr = sol.block_values["Qt"], sol.block_values["Qr"]
    extra = [(tilde_t, tilde_r)]
    if incumbent is not None:
        extra.append((incumbent.theta_t, incumbent.theta_r))
    res = gaussian_randomize(Qht, Qhr, lambda T, R: data.sinr_ok(T), trials, rng,
                             objective=objective, extra=extra, homogeneous=True,
                             fixed_t=None if incumbent is None else incumbent.theta_t)
    fallback = res.theta_t is None
    if fallback:
        th_t, th_r = dominant_extraction(Qht, Qhr, homogeneous=True)
        th_t, th_r = th_t[0], th_r[0]
        val = float(objective(th_t[None], th_r[None])[0])
    else:
        th_t, th_r = res.theta_t, res.theta_r
    target_r = tilde_r + rho * lambda_r
    th_r = refine_reflection_phases(th_r, data.F_bar, data.R_bar, target=target_r)
    val = float(objective(th_t[None], th_r[None])[0])
    kept = False
    if incumbent is not None:
        inc_val = float(objective(incumbent.theta_t[None], incumbent.theta_r[None])[0])
        if val > inc_val or (fallback and not _sinr_feasible_fixed(data, th_t)):
            ref_r = refine_reflection_phases(incumbent.theta_r, data.F_bar, data.R_bar,
                                             target=target_r)
            ref_val = float(objective(incumbent.theta_t[None], ref_r[None])[0])
            th_t = incumbent.theta_t
            if ref_val < inc_val:
                th_r, val = ref_r, ref_val
            else:
                kept = True
                th_r, val = incumbent.theta_r, inc_val
    stars = incumbent if kept else StarsProfile.from_theta(th_t, th_r)
    return ThetaBlockResult(stars, val, bound, res.n_feasible, fallback, kept)


def _leading_block_selector(N):
    """Coordinates of an (N+1)-block mapped to the coordinates of its leading N x N block."""
    big = herm_basis(N + 1)
    rows = [herm_to_coords(E[:N, :N]) for E in big]
    return np.array(rows).T
