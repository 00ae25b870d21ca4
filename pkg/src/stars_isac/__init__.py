"""CRB-driven joint waveform and STARS design for 2D DOA sensing with multiuser communication."""

from .estimators import MleDoaEstimator, StarsIsacDesigner
from .experiments import SweepSpec, run_spectrum_demo, run_sweep
from .fim import crb, fim_direct, fim_from_F
from .geometry import ChannelSet, SystemConfig, desk_config, gen_channels, load_config, table_config
from .mle import generate_transmit_block, mle_estimate, mse_vs_crb, simulate_echo
from .pdd import (PddConfig, conventional_ris_design, pdd_coupled, pdd_independent,
                  random_phase_design)
from .stars import StarsProfile
from .waveform import Waveform

__version__ = "0.1.0"

__all__ = [
    "ChannelSet", "MleDoaEstimator", "PddConfig", "StarsIsacDesigner", "StarsProfile",
    "SweepSpec", "SystemConfig", "Waveform", "conventional_ris_design", "crb", "desk_config",
    "fim_direct", "fim_from_F", "gen_channels", "generate_transmit_block", "load_config",
    "mle_estimate", "mse_vs_crb", "pdd_coupled", "pdd_independent", "random_phase_design",
    "run_spectrum_demo", "run_sweep", "simulate_echo", "table_config",
]
