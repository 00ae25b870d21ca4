"""Batch sweeps over scenario axes, baselines and the spectrum demo."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import SystemConfig, gen_channels
from .mle import (DEFAULT_GRID, generate_transmit_block, mle_estimate, simulate_echo,
                  spectrum_to_csv, spectrum_to_pgm)
from .pdd import (PddConfig, ScenarioInfeasible, conventional_ris_design, pdd_coupled,
                  pdd_independent, random_phase_design)

AXES = ("gamma_bar", "N", "N_s", "split")
MODELS = ("independent", "coupled", "conventional_ris", "random_phase")
SWEEP_COLUMNS = ("model", "axis_value", "trial_seed", "root_crb_deg", "converged",
                 "outer_iters", "wall_time_s")
SUMMARY_COLUMNS = ("model", "axis_value", "mean_root_crb_deg", "n_feasible", "n_converged",
                   "n_trials")
WORKERS_ENV = "STARS_ISAC_WORKERS"


@dataclass(frozen=True)
class SweepSpec:
    base_config: SystemConfig
    axis: str
    values: tuple
    models: tuple = ("independent",)
    trials: int = 10
    output_dir: str = "out"
    split_total: int | None = None
    seed: int = 0
    pdd: PddConfig = field(default_factory=PddConfig)
    record_time: bool = False

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"unknown sweep axis {self.axis!r}; choose from {AXES}")
        bad = [m for m in self.models if m not in MODELS]
        if bad:
            raise ValueError(f"unknown models {bad}; choose from {MODELS}")
        if self.trials < 1 or not self.values:
            raise ValueError("need at least one trial and one axis value")
        for v in self.values:
            cfg = self.config_for(v)
            if "conventional_ris" in self.models and cfg.N % 2:
                raise ValueError(f"conventional RIS baseline needs even N (got {cfg.N})")

    @property
    def total_elements(self):
        c = self.base_config
        return self.split_total if self.split_total is not None else c.N + c.N_s

    def config_for(self, value) -> SystemConfig:
        c = self.base_config
        if self.axis == "gamma_bar":
            return c.with_gamma_db(float(value))
        if self.axis == "N":
            return c.replace(N=int(value))
        if self.axis == "N_s":
            return c.replace(N_s=int(value))
        n = int(value)
        if not 1 <= n < self.total_elements:
            raise ValueError(f"split N={n} leaves no elements for the other side")
        return c.replace(N=n, N_s=self.total_elements - n)

    def trial_seed(self, t: int) -> int:
        return int(self.seed) * 100_000 + t


@dataclass(frozen=True)
class SweepRow:
    model: str
    axis_value: float
    trial_seed: int
    root_crb_deg: float
    converged: bool
    outer_iters: int
    wall_time_s: float

    def cells(self, record_time=False):
        t = repr(round(self.wall_time_s, 3)) if record_time else ""
        return [self.model, _fmt(self.axis_value), str(self.trial_seed), repr(float(self.root_crb_deg)),
                str(int(self.converged)), str(self.outer_iters), t]


def _fmt(v):
    v = float(v)
    return str(int(v)) if v.is_integer() else repr(v)


def run_design(model: str, channels, config: SystemConfig, pdd: PddConfig, seed: int,
               independent=None):
    """Single design of the given model; `independent` seeds the coupled run when given."""
    if model == "independent":
        return pdd_independent(channels, config, pdd, seed)
    if model == "coupled":
        return pdd_coupled(channels, config, pdd, seed, independent=independent)
    if model == "conventional_ris":
        return conventional_ris_design(channels, config, pdd, seed)
    if model == "random_phase":
        return random_phase_design(channels, config, pdd, seed)
    raise ValueError(f"unknown model {model!r}")


def _run_cell(args):
    """All requested models for one (axis value, trial) pair."""
    spec, value, t = args
    config = spec.config_for(value)
    seed = spec.trial_seed(t)
    channels = gen_channels(config, np.random.default_rng(seed))
    rows, indep = [], None
    for model in spec.models:
        start = time.perf_counter()
        try:
            res = run_design(model, channels, config, spec.pdd, seed, independent=indep)
            if model == "independent":
                indep = res
            crb, conv, iters = res.crb.root_crb_deg, res.converged, res.outer_iters
        except ScenarioInfeasible:
            crb, conv, iters = math.nan, False, 0
        rows.append(SweepRow(model, float(value), seed, float(crb), bool(conv), int(iters),
                             time.perf_counter() - start))
    return rows


def worker_count(default=1):
    raw = os.environ.get(WORKERS_ENV, "")
    try:
        return max(1, int(raw)) if raw else default
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None


def _check_writable(out: Path):
    probe = out / ".write_probe"
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise PermissionError(f"output directory {out} is not writable: {exc}") from exc


def sweep_rows(spec: SweepSpec, workers: int | None = None):
    """Run every (model, axis value, trial) and return rows in deterministic order."""
    workers = worker_count() if workers is None else workers
    jobs = [(spec, v, t) for v in spec.values for t in range(spec.trials)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as ex:
            parts = list(ex.map(_run_cell, jobs))
    else:
        parts = [_run_cell(j) for j in jobs]
    rows = [r for part in parts for r in part]
    order = {m: i for i, m in enumerate(spec.models)}
    vidx = {float(v): i for i, v in enumerate(spec.values)}
    rows.sort(key=lambda r: (order[r.model], vidx[r.axis_value], r.trial_seed))
    return rows


def rows_to_csv(rows, record_time=False) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in rows:
        w.writerow(r.cells(record_time))
    return buf.getvalue()


def summarize(rows):
    """Per (model, axis value) mean over feasible trials; infeasible trials are counted only."""
    groups = {}
    for r in rows:
        groups.setdefault((r.model, r.axis_value), []).append(r)
    out = []
    for (model, value), rs in groups.items():
        ok = [r.root_crb_deg for r in rs if math.isfinite(r.root_crb_deg)]
        mean = float(np.mean(ok)) if ok else math.nan
        out.append(dict(model=model, axis_value=value, mean_root_crb_deg=mean, n_feasible=len(ok),
                        n_converged=sum(r.converged for r in rs), n_trials=len(rs)))
    return out


def summary_to_csv(summary) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for s in summary:
        w.writerow([s["model"], _fmt(s["axis_value"]), repr(s["mean_root_crb_deg"]),
                    s["n_feasible"], s["n_converged"], s["n_trials"]])
    return buf.getvalue()


def run_sweep(spec: SweepSpec, workers: int | None = None):
    """Run a sweep and write sweep.csv and summary.csv under spec.output_dir.

    Wall times go to timings.json unless spec.record_time is set, so the CSV
    files are byte-identical across repeated runs.
    """
    out = Path(spec.output_dir)
    _check_writable(out)
    rows = sweep_rows(spec, workers)
    stem = f"sweep_{spec.axis}"
    (out / f"{stem}.csv").write_text(rows_to_csv(rows, spec.record_time))
    summary = summarize(rows)
    (out / f"{stem}_summary.csv").write_text(summary_to_csv(summary))
    if not spec.record_time:
        times = [dict(model=r.model, axis_value=r.axis_value, trial_seed=r.trial_seed,
                      wall_time_s=r.wall_time_s) for r in rows]
        (out / f"{stem}_timings.json").write_text(json.dumps(times, indent=1))
    return rows, summary


def baseline_conventional_ris(channels, config: SystemConfig, pdd: PddConfig = PddConfig(), seed=0):
    """Half transmit-only, half reflect-only elements; phases optimized."""
    return conventional_ris_design(channels, config, pdd, seed)


def run_spectrum_demo(config: SystemConfig, model: str, output_dir, seed: int = 0,
                      grid_sizes=DEFAULT_GRID, pdd: PddConfig = PddConfig(),
                      exact_covariance: bool = False, workers: int = 1):
    """Design under `model`, simulate one echo block, write spectrum CSV and PGM."""
    out = Path(output_dir)
    _check_writable(out)
    channels = gen_channels(config, np.random.default_rng(seed))
    design = run_design(model, channels, config, pdd, seed)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 11]))
    X = generate_transmit_block(design.waveform, config.L, rng, exact_covariance)
    echo = simulate_echo(channels, design.stars, X, config, rng)
    spec = mle_estimate(echo, channels.G, design.stars.theta_r, config.geometry(), grid_sizes, workers)
    spectrum_to_csv(spec, out / f"spectrum_{model}.csv")
    spectrum_to_pgm(spec, out / f"spectrum_{model}.pgm")
    return spec, design
