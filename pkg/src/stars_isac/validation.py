"""Self-contained oracle checks, shared by the `validate` command and the test suite.

Each check returns a CheckResult with the worst observed error and the
tolerance it was compared against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fim import derivative_bundle, fim_direct
from .geometry import ArrayGeometry, desk_config, gen_channels, steering_sensor, steering_stars
from .problem import normalize
from .sdp import ConicProgram, LinExpr, Status, check_kkt, epigraph_trace_inverse, herm_to_coords, solve
from .stars import StarsProfile, optimal_amplitudes, optimal_phases_coupled
from .waveform import build_waveform_program, solve_waveform_block


@dataclass(frozen=True)
class CheckResult:
    name: str
    worst: float
    tol: float
    detail: str = ""

    @property
    def passed(self):
        return bool(np.isfinite(self.worst) and self.worst <= self.tol)

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} {self.name}: worst={self.worst:.3e} tol={self.tol:.1e} {self.detail}".rstrip()


def _rand_psd(rng, n, rank=None):
    r = n if rank is None else rank
    A = rng.standard_normal((n, r)) + 1j * rng.standard_normal((n, r))
    return A @ A.conj().T / r


def _whitened(rng, m, L):
    Z = rng.standard_normal((m, L)) + 1j * rng.standard_normal((m, L))
    Q, _ = np.linalg.qr(Z.conj().T)
    return np.sqrt(L) * Q.conj().T


# ---------------------------------------------------------------- FIM

def mean_vector(xi, theta_r, G, X, geom: ArrayGeometry):
    """alpha vec(b a^T Theta_r G X) for xi = (phi_h, phi_v, Re alpha, Im alpha)."""
    a = steering_stars(xi[0], xi[1], geom)
    b = steering_sensor(xi[0], xi[1], geom)
    return (xi[2] + 1j * xi[3]) * np.outer(b, (a * theta_r) @ G @ X).ravel()


def fim_finite_difference(xi, theta_r, G, X, geom, sigma_s_sq, step=1e-5):
    """(2 / sigma^2) Re(D^H D) with D the central-difference Jacobian of the mean."""
    cols = []
    for i in range(4):
        e = np.zeros(4)
        e[i] = step * max(1.0, abs(xi[i]))
        cols.append((mean_vector(xi + e, theta_r, G, X, geom)
                     - mean_vector(xi - e, theta_r, G, X, geom)) / (2 * e[i]))
    D = np.array(cols).T
    return 2 / sigma_s_sq * np.real(D.conj().T @ D)


def check_fim_fd(instances=20, seed=0, tol=1e-4):
    """FIM from the closed form vs the finite-difference oracle on random small instances.

    Entry (i, j) error is measured relative to sqrt(J_ii J_jj).
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        n = int(rng.integers(2, 9))
        n_s = int(rng.integers(1, 5))
        m = int(rng.integers(1, 5))
        L = int(rng.integers(m, 3 * m + 4))
        geom = ArrayGeometry.build(n, n_s)
        phi_h, phi_v = rng.uniform(0.2, np.pi - 0.2), rng.uniform(-1.2, 1.2)
        alpha = complex(rng.standard_normal(), rng.standard_normal())
        theta_r = np.exp(1j * rng.uniform(0, 2 * np.pi, n)) * rng.uniform(0.2, 1, n)
        G = (rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))) / np.sqrt(2)
        R_x = _rand_psd(rng, m)
        X = np.linalg.cholesky(R_x + 1e-12 * np.eye(m)) @ _whitened(rng, m, L)
        R_x = X @ X.conj().T / L
        sigma = float(rng.uniform(0.5, 2))
        J = fim_direct(theta_r, G, R_x, derivative_bundle(phi_h, phi_v, geom), alpha, L,
                       sigma).matrix()
        xi = np.array([phi_h, phi_v, alpha.real, alpha.imag])
        J_fd = fim_finite_difference(xi, theta_r, G, X, geom, sigma)
        scale = np.sqrt(np.outer(np.diag(J), np.diag(J)))
        worst = max(worst, float(np.max(np.abs(J - J_fd) / scale)))
    return CheckResult("fim-vs-finite-difference", worst, tol, f"({instances} instances)")


# ---------------------------------------------------------------- closed forms

def check_phase_closed_form(samples=1000, grid=10_000, seed=0, tol=1e-6):
    """Coupled phase pair vs exhaustive search over q_t with both couplings q_r = +-j q_t."""
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(samples) + 1j * rng.standard_normal(samples)
    v = rng.standard_normal(samples) + 1j * rng.standard_normal(samples)
    q_t, q_r = optimal_phases_coupled(u, v)
    val = np.real(u * q_t) + np.real(v * q_r)
    qs = np.exp(2j * np.pi * np.arange(grid) / grid)
    best = np.full(samples, np.inf)
    for s in (1j, -1j):
        g = np.real(u[:, None] * qs[None, :]) + np.real(v[:, None] * s * qs[None, :])
        best = np.minimum(best, g.min(axis=1))
    worst = float(np.max(val - best))
    coupling = float(np.max(np.abs(np.cos(np.angle(q_t) - np.angle(q_r)))))
    if coupling > 1e-8:
        worst = np.inf
    return CheckResult("coupled-phase-closed-form", worst, tol, f"(samples={samples}, grid={grid})")


def check_amplitude_closed_form(samples=1000, grid=10_000, seed=0, tol=1e-6):
    """Amplitude split vs a grid over omega in [0, pi/2], including the b = 0, a < 0 edge."""
    rng = np.random.default_rng(seed)
    a = rng.standard_normal(samples)
    b = rng.standard_normal(samples)
    a[:3], b[:3] = [-1.0, -2.5, 1.0], [0.0, 0.0, 0.0]
    bt, br = optimal_amplitudes(a, b)
    val = a * bt + b * br
    w = np.linspace(0, np.pi / 2, grid)
    best = (a[:, None] * np.sin(w)[None, :] + b[:, None] * np.cos(w)[None, :]).min(axis=1)
    energy = float(np.max(np.abs(bt ** 2 + br ** 2 - 1)))
    worst = max(float(np.max(val - best)), energy)
    return CheckResult("amplitude-closed-form", worst, tol, f"(samples={samples}, grid={grid})")


# ---------------------------------------------------------------- SDP core

def _kkt_worst(prog, sol):
    rep = check_kkt(prog, sol)
    return max(rep.primal_residual, rep.dual_residual, abs(rep.gap))


def analytic_sdp_cases():
    """Small programs with known optimum: (program, optimal value)."""
    cases = []
    p = ConicProgram()
    X = p.add_hermitian("X", 2)
    p.minimize(X.inner(np.diag([1.0, 2.0])))
    p.add_eq(X.trace(), 1.0)
    cases.append((p, 1.0))
    # max Re x12 with unit diagonal -> X = [[1, 1], [1, 1]], value -1
    p = ConicProgram()
    X = p.add_hermitian("X", 2)
    p.minimize(X.inner(np.array([[0, -0.5], [-0.5, 0]], dtype=complex)))
    p.add_eq(X.entry_diag(0), 1.0)
    p.add_eq(X.entry_diag(1), 1.0)
    cases.append((p, -1.0))
    # complex coupling: min tr(C X) with C = [[1, j], [-j, 1]], tr X = 1 -> min eig 0
    p = ConicProgram()
    X = p.add_hermitian("X", 2)
    p.minimize(X.inner(np.array([[1, 1j], [-1j, 1]])))
    p.add_eq(X.trace(), 1.0)
    cases.append((p, 0.0))
    # trace-inverse epigraph at a fixed 2x2 matrix
    for U0, val in ((np.eye(2), 2.0), (np.diag([2.0, 4.0]), 0.75)):
        p = ConicProgram()
        U = p.add_symmetric("U", 2, psd=False)
        for i, c in enumerate(herm_to_coords(U0, real=True)):
            p.add_eq(LinExpr(np.array([U.offset + i]), np.array([1.0])), c)
        epigraph_trace_inverse(p, U)
        cases.append((p, val))
    return cases


def certificate_instance(rng, n=4, m=5, rank=1):
    """Hermitian SDP with a planted primal-dual pair satisfying strict complementarity.

    Returns (program, optimal value).
    """
    V, _ = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    xs = rng.uniform(0.5, 2, rank)
    zs = rng.uniform(0.5, 2, n - rank)
    X_star = (V[:, :rank] * xs) @ V[:, :rank].conj().T
    Z_star = (V[:, rank:] * zs) @ V[:, rank:].conj().T
    As = []
    for i in range(m):
        A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        As.append((A + A.conj().T) / 2)
    As[0] = np.eye(n)
    y = rng.standard_normal(m)
    C = Z_star + sum(yi * Ai for yi, Ai in zip(y, As))
    p = ConicProgram()
    X = p.add_hermitian("X", n)
    p.minimize(X.inner(C))
    for Ai in As:
        p.add_eq(X.inner(Ai), float(np.real(np.trace(Ai @ X_star))))
    return p, float(np.real(np.trace(C @ X_star)))


def check_sdp_corpus(certificates=20, seed=0, tol=1e-7):
    """KKT residuals, duality gap and optimal value on the analytic and planted corpus."""
    rng = np.random.default_rng(seed)
    corpus = analytic_sdp_cases()
    corpus += [certificate_instance(rng, n=int(rng.integers(2, 6)), m=int(rng.integers(2, 6)),
                                    rank=1) for _ in range(certificates)]
    worst = 0.0
    bad = 0
    for prog, val in corpus:
        sol = solve(prog, tol=1e-9)
        if sol.status != Status.OPTIMAL:
            bad += 1
            worst = np.inf
            continue
        worst = max(worst, _kkt_worst(prog, sol))
    return CheckResult("sdp-kkt-corpus", worst, tol, f"({len(corpus)} programs, {bad} not optimal)")


def check_sdp_values(certificates=20, seed=0, tol=1e-6):
    rng = np.random.default_rng(seed)
    corpus = analytic_sdp_cases()
    corpus += [certificate_instance(rng, n=int(rng.integers(2, 6)), m=int(rng.integers(2, 6)),
                                    rank=1) for _ in range(certificates)]
    worst = 0.0
    for prog, val in corpus:
        sol = solve(prog, tol=1e-9)
        worst = max(worst, abs(sol.objective_value - val) / max(1.0, abs(val)))
    return CheckResult("sdp-optimal-values", worst, tol, f"({len(corpus)} programs)")


def check_trace_inverse(seed=0, tol=1e-6, count=5):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        A = rng.standard_normal((2, 2))
        U0 = A @ A.T + 0.3 * np.eye(2)
        p = ConicProgram()
        U = p.add_symmetric("U", 2, psd=False)
        for i, c in enumerate(herm_to_coords(U0, real=True)):
            p.add_eq(LinExpr(np.array([U.offset + i]), np.array([1.0])), c)
        epigraph_trace_inverse(p, U)
        sol = solve(p, tol=1e-9)
        ref = float(np.trace(np.linalg.inv(U0)))
        worst = max(worst, abs(sol.objective_value - ref) / ref)
    return CheckResult("trace-inverse-epigraph", worst, tol, f"({count} matrices)")


# ---------------------------------------------------------------- beamformer recovery

def check_recovery(instances=20, seed=0, obj_tol=1e-6, sinr_tol=1e-8):
    """Rank-one recovery preserves the SDR objective and every SINR constraint.

    Returns two CheckResults (objective error, worst SINR shortfall).
    """
    rng = np.random.default_rng(seed)
    base = desk_config(M=4, N=6, N_s=3)
    worst_obj = worst_sinr = 0.0
    for _ in range(instances):
        cfg = base.replace(seed=int(rng.integers(1 << 30)))
        cfg = cfg.with_gamma_db(float(rng.uniform(-5, 5)))
        ch = gen_channels(cfg, rng)
        prob = normalize(ch, cfg)
        stars = StarsProfile.random(cfg.N, rng)
        ws = solve_waveform_block(prob, stars, None, None, tol=1e-9)
        prob = prob.with_obj_scale(prob.obj_scale * ws.objective)
        ws = solve_waveform_block(prob, stars, None, None, tol=1e-9)
        sdr = _sdr_value(prob, stars)
        recomputed = prob.utility(prob.A(stars.theta_r, ws.waveform.R_x / cfg.P_budget))
        worst_obj = max(worst_obj, abs(recomputed - sdr) / max(1.0, abs(sdr)))
        P_hat, Rs_hat = ws.waveform.normalized(cfg.P_budget)
        sinr = prob.sinr(stars.theta_t, P_hat, Rs_hat)
        short = np.max(prob.gamma - sinr) / max(1.0, float(np.max(prob.gamma)))
        worst_sinr = max(worst_sinr, float(short))
    return (CheckResult("recovery-objective", worst_obj, obj_tol, f"({instances} instances)"),
            CheckResult("recovery-sinr-slack", max(worst_sinr, 0.0), sinr_tol, f"({instances} instances)"))


def _sdr_value(prob, stars):
    prog = build_waveform_program(prob, stars.theta_t, stars.theta_r, None, None)
    sol = solve(prog, tol=1e-9)
    return sol.objective_value


def run_all(quick=False):
    n = 5 if quick else 20
    m = 200 if quick else 1000
    results = [check_fim_fd(n), check_phase_closed_form(m), check_amplitude_closed_form(m),
               check_sdp_corpus(n), check_sdp_values(n), check_trace_inverse()]
    results.extend(check_recovery(n))
    return results
