"""Penalty dual decomposition: outer dual/penalty updates around BCD sweeps."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace

import numpy as np

from .fim import CrbReport, schur_phi
from .geometry import ChannelSet, SystemConfig
from .problem import NormalizedProblem, normalize
from .sdp import SolverError, Status
from .stars import (COUPLED, INDEPENDENT, StarsProfile, solve_theta_coupled_relaxed,
                    solve_theta_independent, solve_tilde_theta)
from .waveform import Waveform, solve_waveform_block

TRACE_COLUMNS = ("outer", "inner", "objective", "violation", "rho", "root_crb_deg")


class ScenarioInfeasible(RuntimeError):
    """No surface initialization admits a waveform meeting the SINR targets."""


@dataclass(frozen=True)
class PddConfig:
    rho0_scale: float = 1.0
    c: float = 0.8
    eta_factor: float = 0.99
    outer_tol: float = 1e-4
    bcd_tol: float = 1e-3
    max_outer: int = 100
    max_sweeps: int = 50
    trials: int = 100
    init_retries: int = 10
    sdp_tol: float = 1e-8
    polish: bool = True


@dataclass
class PddState:
    problem: NormalizedProblem
    U: np.ndarray
    F: np.ndarray                 # normalized auxiliary matrix
    waveform: Waveform
    stars: StarsProfile
    Upsilon: np.ndarray
    rho: float
    eta: float = np.inf
    tilde: StarsProfile | None = None
    lambda_t: np.ndarray | None = None
    lambda_r: np.ndarray | None = None
    outer_iter: int = 0
    inner_iter: int = 0
    objective_history: list = field(default_factory=list)
    violation_history: list = field(default_factory=list)
    skipped_blocks: int = 0

    @property
    def coupled(self):
        return self.tilde is not None

    @property
    def R_hat(self):
        return self.waveform.R_x / self.problem.config.P_budget


@dataclass(frozen=True)
class TraceRow:
    outer: int
    inner: int
    objective: float
    violation: float
    rho: float
    root_crb_deg: float


@dataclass
class PddResult:
    stars: StarsProfile
    waveform: Waveform
    crb: CrbReport
    trace: list
    converged: bool
    outer_iters: int
    violation: float
    state: PddState | None = None


# ---------------------------------------------------------------- metrics

def f_residual(state: PddState):
    return state.F - state.problem.A(state.stars.theta_r, state.R_hat)


def violation_independent(state: PddState) -> float:
    return float(np.max(np.abs(f_residual(state))))


def violation_coupled(state: PddState) -> float:
    h = violation_independent(state)
    dt = np.max(np.abs(state.tilde.theta_t - state.stars.theta_t))
    dr = np.max(np.abs(state.tilde.theta_r - state.stars.theta_r))
    return float(max(h, dt, dr))


def violation(state: PddState) -> float:
    return violation_coupled(state) if state.coupled else violation_independent(state)


def penalty_value(state: PddState) -> float:
    """(1/2 rho) ||F - Theta_r G R_x G^H Theta_r^H + rho Upsilon||_F^2 (+ coupling terms)."""
    rho = state.rho
    val = np.sum(np.abs(f_residual(state) + rho * state.Upsilon) ** 2)
    if state.coupled:
        for tl, th, lam in ((state.tilde.theta_t, state.stars.theta_t, state.lambda_t),
                            (state.tilde.theta_r, state.stars.theta_r, state.lambda_r)):
            val += np.sum(np.abs(tl - th + rho * lam) ** 2)
    return float(val / (2 * rho))


def al_objective(state: PddState) -> float:
    return state.problem.utility(state.F) + penalty_value(state)


def current_crb(state: PddState) -> CrbReport:
    return state.problem.crb_report(state.stars.theta_r, state.waveform.R_x)


def _root_crb_or_nan(state):
    try:
        return current_crb(state).root_crb_deg
    except ValueError:
        return float("nan")


# ---------------------------------------------------------------- BCD

def _waveform_step(state: PddState, cfg: PddConfig):
    cur = al_objective(state)
    try:
        ws = solve_waveform_block(state.problem, state.stars, state.Upsilon, state.rho, tol=cfg.sdp_tol)
    except SolverError:
        # the incumbent is feasible for this block, so keeping it preserves descent
        state.skipped_blocks += 1
        return state
    trial = replace(state, U=ws.U, F=ws.F, waveform=ws.waveform)
    if al_objective(trial) <= cur:
        return trial
    return state


def _theta_step(state: PddState, cfg: PddConfig, rng, frozen=None):
    try:
        res = _theta_block(state, cfg, rng, frozen)
    except SolverError:
        state.skipped_blocks += 1
        return state
    trial = replace(state, stars=res.stars)
    if al_objective(trial) <= al_objective(state):
        return trial
    return state


def _theta_block(state: PddState, cfg: PddConfig, rng, frozen=None):
    p = state.problem
    if state.coupled:
        return solve_theta_coupled_relaxed(
            p, state.waveform, state.F, state.Upsilon, state.tilde.theta_t, state.tilde.theta_r,
            state.lambda_t, state.lambda_r, state.rho, rng, incumbent=state.stars,
            trials=cfg.trials, tol=cfg.sdp_tol)
    return solve_theta_independent(p, state.waveform, state.F, state.Upsilon, state.rho, rng,
                                   incumbent=state.stars, trials=cfg.trials,
                                   frozen_amplitudes=frozen, tol=cfg.sdp_tol)


def _tilde_step(state: PddState):
    tl = solve_tilde_theta(state.stars.theta_t, state.stars.theta_r, state.lambda_t,
                           state.lambda_r, state.rho)
    trial = replace(state, tilde=tl)
    if al_objective(trial) <= al_objective(state):
        return trial
    return state


def _bcd(state: PddState, cfg: PddConfig, rng, trace, frozen=None) -> PddState:
    prev = al_objective(state)
    for sweep in range(1, cfg.max_sweeps + 1):
        state = _waveform_step(state, cfg)
        state = _theta_step(state, cfg, rng, frozen)
        if state.coupled:
            state = _tilde_step(state)
        cur = al_objective(state)
        state.inner_iter = sweep
        state.objective_history.append(cur)
        h = violation(state)
        trace.append(TraceRow(state.outer_iter, sweep, cur, h, state.rho, _root_crb_or_nan(state)))
        if prev - cur <= cfg.bcd_tol * abs(prev):
            break
        prev = cur
    return state


def bcd_independent(state: PddState, cfg: PddConfig = PddConfig(), rng=None, trace=None,
                    frozen=None) -> PddState:
    """Sweeps over the waveform and surface blocks until the AL objective stalls."""
    rng = np.random.default_rng(0) if rng is None else rng
    return _bcd(state, cfg, rng, [] if trace is None else trace, frozen)


def bcd_coupled(state: PddState, cfg: PddConfig = PddConfig(), rng=None, trace=None) -> PddState:
    """Three-block sweeps: waveform, relaxed surface, coupled auxiliary copy."""
    if not state.coupled:
        raise ValueError("state carries no coupled auxiliary variables")
    rng = np.random.default_rng(0) if rng is None else rng
    return _bcd(state, cfg, rng, [] if trace is None else trace)


# ---------------------------------------------------------------- outer loop

def initial_state(problem: NormalizedProblem, rng, cfg: PddConfig = PddConfig(),
                  model=INDEPENDENT, frozen=None) -> PddState:
    """Random phases (retrying while the SINR targets are unattainable) and a
    waveform solved with F tied exactly to R_x, so the initial violation is zero."""
    last = None
    for _ in range(cfg.init_retries):
        stars = StarsProfile.random(problem.G.shape[0], rng, model)
        if frozen is not None:
            stars = replace(stars, beta_t=np.asarray(frozen[0], float), beta_r=np.asarray(frozen[1], float))
        try:
            ws = solve_waveform_block(problem, stars, None, None, tol=cfg.sdp_tol)
            break
        except SolverError as err:
            last = err
            if err.status != Status.INFEASIBLE:
                raise
    else:
        raise ScenarioInfeasible(f"no feasible initialization in {cfg.init_retries} draws ({last})")
    # rescale the utility to 1 at the start; makes rho and the tolerances dimensionless
    problem = problem.with_obj_scale(problem.obj_scale / ws.objective)
    F = problem.A(stars.theta_r, ws.R_hat)
    N = F.shape[0]
    rho = cfg.rho0_scale / np.linalg.norm(F)
    return PddState(problem=problem, U=schur_phi(problem.jhat(F)), F=F, waveform=ws.waveform,
                    stars=stars, Upsilon=np.zeros((N, N), dtype=complex), rho=rho)


def _outer(state: PddState, cfg: PddConfig, rng, trace, frozen=None):
    converged = False
    for n in range(1, cfg.max_outer + 1):
        state.outer_iter = n
        state = _bcd(state, cfg, rng, trace, frozen)
        h = violation(state)
        state.violation_history.append(h)
        if h <= state.eta:
            state.Upsilon = state.Upsilon + f_residual(state) / state.rho
            if state.coupled:
                state.lambda_t = state.lambda_t + (state.tilde.theta_t - state.stars.theta_t) / state.rho
                state.lambda_r = state.lambda_r + (state.tilde.theta_r - state.stars.theta_r) / state.rho
        else:
            state.rho *= cfg.c
        state.eta = cfg.eta_factor * h
        if h < cfg.outer_tol:
            converged = True
            break
    return state, converged


def _finish(state: PddState, cfg: PddConfig, trace, converged, stars: StarsProfile):
    """Final exact waveform at the returned surface, CRB from the physical model."""
    waveform = state.waveform
    if cfg.polish:
        try:
            ws = solve_waveform_block(state.problem, stars, None, None, tol=cfg.sdp_tol)
            polished = state.problem.crb_report(stars.theta_r, ws.waveform.R_x)
            base = _safe_crb(state.problem, stars, waveform)
            if base is None or polished.trace_crb <= base.trace_crb:
                waveform = ws.waveform
        except SolverError:
            pass
    report = state.problem.crb_report(stars.theta_r, waveform.R_x)
    h = state.violation_history[-1] if state.violation_history else 0.0
    trace.append(TraceRow(state.outer_iter, 0, al_objective(state), h, state.rho, report.root_crb_deg))
    return PddResult(stars=stars, waveform=waveform, crb=report, trace=trace, converged=converged,
                     outer_iters=state.outer_iter, violation=h, state=state)


def _safe_crb(problem, stars, waveform):
    try:
        return problem.crb_report(stars.theta_r, waveform.R_x)
    except ValueError:
        return None


def _problem_and_rng(channels, config, seed):
    rng = np.random.default_rng(np.random.SeedSequence([int(config.seed), int(seed), 7]))
    return normalize(channels, config), rng


def pdd_independent(channels: ChannelSet, config: SystemConfig, cfg: PddConfig = PddConfig(),
                    seed: int = 0, frozen_amplitudes=None) -> PddResult:
    """Joint waveform/surface design under the independent phase model."""
    problem, rng = _problem_and_rng(channels, config, seed)
    state = initial_state(problem, rng, cfg, INDEPENDENT, frozen_amplitudes)
    trace = []
    state, converged = _outer(state, cfg, rng, trace, frozen_amplitudes)
    return _finish(state, cfg, trace, converged, state.stars)


def pdd_coupled(channels: ChannelSet, config: SystemConfig, cfg: PddConfig = PddConfig(),
                seed: int = 0, init_from_independent: bool = True,
                independent: PddResult | None = None) -> PddResult:
    """Joint design under the coupled phase model via an auxiliary coupled copy."""
    problem, rng = _problem_and_rng(channels, config, seed)
    if init_from_independent:
        if independent is None:
            independent = pdd_independent(channels, config, cfg, seed)
        state = replace(independent.state, objective_history=[], violation_history=[])
        rho = cfg.rho0_scale / np.linalg.norm(state.F)
        trace = []
    else:
        state = initial_state(problem, rng, cfg, COUPLED)
        rho = state.rho
        trace = []
    N = state.F.shape[0]
    zero = np.zeros(N, dtype=complex)
    tilde = solve_tilde_theta(state.stars.theta_t, state.stars.theta_r, zero, zero, rho)
    state = replace(state, tilde=tilde, lambda_t=zero.copy(), lambda_r=zero.copy(), rho=rho,
                    eta=np.inf, outer_iter=0, inner_iter=0)
    state, converged = _outer(state, cfg, rng, trace)
    final = solve_tilde_theta(state.stars.theta_t, state.stars.theta_r, zero, zero, 1.0)
    return _finish(state, cfg, trace, converged, final)


def random_phase_design(channels: ChannelSet, config: SystemConfig, cfg: PddConfig = PddConfig(),
                        seed: int = 0) -> PddResult:
    """Random surface phases (equal split) with the optimal waveform for them."""
    problem, rng = _problem_and_rng(channels, config, seed)
    state = initial_state(problem, rng, cfg, INDEPENDENT)
    report = problem.crb_report(state.stars.theta_r, state.waveform.R_x)
    trace = [TraceRow(0, 0, al_objective(state), 0.0, state.rho, report.root_crb_deg)]
    return PddResult(state.stars, state.waveform, report, trace, True, 0, 0.0, state)


def conventional_ris_amplitudes(n: int):
    if n % 2:
        raise ValueError("conventional RIS split needs an even number of elements")
    half = n // 2
    beta_t = np.concatenate([np.ones(half), np.zeros(half)])
    return beta_t, 1 - beta_t


def conventional_ris_design(channels: ChannelSet, config: SystemConfig,
                            cfg: PddConfig = PddConfig(), seed: int = 0) -> PddResult:
    """Transmit-only half plus reflect-only half; only phases are optimized."""
    frozen = conventional_ris_amplitudes(config.N)
    return pdd_independent(channels, config, cfg, seed, frozen_amplitudes=frozen)


def trace_to_csv(trace, path=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for r in trace:
        w.writerow([r.outer, r.inner, repr(float(r.objective)), repr(float(r.violation)),
                    repr(float(r.rho)), repr(float(r.root_crb_deg))])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text
