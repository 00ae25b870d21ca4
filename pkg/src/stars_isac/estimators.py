"""scikit-learn style wrappers over the design and estimation functions."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .experiments import run_design
from .geometry import ChannelSet, SystemConfig, desk_config
from .mle import EchoBlock, mle_estimate
from .pdd import PddConfig


class StarsIsacDesigner(BaseEstimator):
    """Joint waveform / surface design minimizing the DOA CRB under SINR targets.

    fit(channels) sets stars_, waveform_, crb_ (CrbReport), trace_ (list of
    TraceRow), converged_ and result_.
    """

    def __init__(self, model="independent", config=None, rho0_scale=1.0, c=0.8,
                 eta_factor=0.99, outer_tol=1e-4, bcd_tol=1e-3, max_outer=100,
                 max_sweeps=50, trials=100, seed=0):
        self.model = model
        self.config = config
        self.rho0_scale = rho0_scale
        self.c = c
        self.eta_factor = eta_factor
        self.outer_tol = outer_tol
        self.bcd_tol = bcd_tol
        self.max_outer = max_outer
        self.max_sweeps = max_sweeps
        self.trials = trials
        self.seed = seed

    def _pdd_config(self):
        return PddConfig(rho0_scale=self.rho0_scale, c=self.c, eta_factor=self.eta_factor,
                         outer_tol=self.outer_tol, bcd_tol=self.bcd_tol, max_outer=self.max_outer,
                         max_sweeps=self.max_sweeps, trials=self.trials)

    def fit(self, channels: ChannelSet, y=None):
        config = self.config if self.config is not None else desk_config()
        res = run_design(self.model, channels, config, self._pdd_config(), self.seed)
        self.config_ = config
        self.channels_ = channels
        self.result_ = res
        self.stars_ = res.stars
        self.waveform_ = res.waveform
        self.crb_ = res.crb
        self.trace_ = res.trace
        self.converged_ = res.converged
        return self

    @property
    def design_(self):
        self._check()
        return self.channels_, self.stars_, self.waveform_

    def score(self, channels=None, y=None):
        """Negative root CRB in degrees (higher is better)."""
        self._check()
        return -float(self.crb_.root_crb_deg)

    def _check(self):
        if not hasattr(self, "stars_"):
            raise NotFittedError("StarsIsacDesigner is not fitted yet; call fit(channels)")


class MleDoaEstimator(BaseEstimator):
    """Grid maximum-likelihood estimator of (phi_h, phi_v) for a fixed design.

    fit(design) accepts a fitted StarsIsacDesigner or a (channels, stars,
    waveform) tuple; predict(echoes) returns an (n, 2) array of angles in
    radians; transform(echoes) returns the normalized spectra.
    """

    def __init__(self, config=None, grid_h=361, grid_v=181, workers=1):
        self.config = config
        self.grid_h = grid_h
        self.grid_v = grid_v
        self.workers = workers

    def fit(self, design, y=None):
        if isinstance(design, StarsIsacDesigner):
            config = design.config_
            channels, stars, _ = design.design_
        else:
            channels, stars, _ = design
            config = self.config if self.config is not None else desk_config()
        self.config_ = config
        self.G_ = channels.G
        self.theta_r_ = stars.theta_r
        self.geometry_ = config.geometry()
        return self

    def _spectra(self, echoes):
        if not hasattr(self, "G_"):
            raise NotFittedError("MleDoaEstimator is not fitted yet; call fit(design)")
        if isinstance(echoes, EchoBlock):
            echoes = [echoes]
        return [mle_estimate(e, self.G_, self.theta_r_, self.geometry_,
                             (self.grid_h, self.grid_v), self.workers) for e in echoes]

    def predict(self, echoes):
        spectra = self._spectra(echoes)
        self.alpha_hat_ = np.array([s.alpha_hat for s in spectra])
        return np.array([s.argmax for s in spectra])

    def transform(self, echoes):
        return np.array([s.values for s in self._spectra(echoes)])
