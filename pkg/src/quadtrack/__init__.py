"""Quad-detector beam tracking and blind OOK detection for an optical
ground-to-UAV link: channel models, receiver algorithms, closed-form
performance analysis, Monte-Carlo simulation, and design sweeps."""

__version__ = "0.1.0"

from .analysis import (CurvePoint, ber_blind, ber_known_csi, floor_blind,
                       q_function, sweep_curve, ter_blind, ter_known_csi)
from .channel import (ChannelDraw, TurbulenceDerived, derive_turbulence,
                      gamma_gamma_params, pdf_h, pdf_h_integral, pdf_h_series,
                      sample_channel, sample_channel_batch,
                      scintillation_index)
from .config import (ConfigError, DerivedConstants, SystemParams,
                     dbm_to_watts, derive_constants, load_config,
                     watts_to_dbm)
from .experiments import (InfeasibleError, OptimumReport, SweepSpec,
                          choose_window_length, sweep_detector_size,
                          sweep_hover_std)
from .geometry import (DetectorGeometry, capture_probability,
                       fbm_probability, fov_solid_angle)
from .link_sim import (SimTally, WindowSignals, run_monte_carlo,
                       synth_window)
from .receiver_dsp import (TrackingOutcome, detect_bits, detection_threshold,
                           estimate_channel_blind, track_blind,
                           track_known_csi)
