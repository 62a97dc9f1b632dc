"""Receiver algorithms: tracking metrics, blind estimation, OOK detection.

All routines operate on a single observation window (an object exposing
``bits``, ``m``, ``r`` (4 x L_s photocurrent matrix) and ``r_sum`` — see
``link_sim.WindowSignals``).  The channel gain ``h`` handled here is the
dimensionless composite gain; the '1'-symbol current amplitude is
``mu * P_t * h`` and the signal shot-noise variance is ``sigma_s_sq * h``
with ``sigma_s_sq = shot_coefficient * P_t`` (see ``config``).

Conventions: quadrants are indexed 1..4; metric ties break to the lowest
index (deterministic, reproducible).  The blind-metric denominator is
clamped below at ``L_s * sigma0_sq`` — at very low SNR the noise can drive
the half-window statistic R negative, which would otherwise flip the
metric sign.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .config import DerivedConstants, SystemParams, derive_constants


@lru_cache(maxsize=None)
def _derived(params: SystemParams) -> DerivedConstants:
    return derive_constants(params)


@dataclass(frozen=True)
class TrackingOutcome:
    """Result of one tracking decision.

    ``chosen_quadrant`` is the argmin of ``metrics`` (1-based); ``h_hat``
    and ``r_stat`` are populated in blind mode only.
    """

    chosen_quadrant: int
    metrics: np.ndarray
    h_hat: Optional[float] = None
    r_stat: Optional[float] = None


def _argmin_lowest(metrics: np.ndarray) -> int:
    """1-based argmin; numpy's argmin already keeps the lowest index on ties."""
    return int(np.argmin(metrics)) + 1


def track_known_csi(w, h: float, m: int, params: SystemParams) -> TrackingOutcome:
    """Genie-aided tracking with known gain h and known ones-count m.

    Metric for quadrant i:
        |r'_i - amp*h*m|^2 / (sigma_s^2*h*m + L_s*sigma0^2)
        + sum_{j != i} |r'_j|^2 / (L_s*sigma0^2),
    minimized over i, ties to the lowest index.
    """
    d = _derived(params)
    ls = len(w.bits)
    amp = d.mu * params.tx_power
    r_sum = np.asarray(w.r_sum, dtype=float)
    noise_den = ls * d.sigma0_sq
    sig_den = d.sigma_s_sq * h * m + noise_den
    total_sq = float(np.sum(r_sum ** 2))
    metrics = ((r_sum - amp * h * m) ** 2 / sig_den
               + (total_sq - r_sum ** 2) / noise_den)
    return TrackingOutcome(chosen_quadrant=_argmin_lowest(metrics),
                           metrics=metrics)


def estimate_channel_blind(w, params: SystemParams) -> tuple[float, float]:
    """Blind gain estimate from the quadrant-summed current.

    Returns (h_hat, R) with R = sum_k r[k] / (mu * P_t) (gain units, so
    that R estimates m*h) and h_hat = 2R/L_s.  Noiseless with m = L_s/2,
    h_hat equals h exactly.
    """
    d = _derived(params)
    ls = len(w.bits)
    amp = d.mu * params.tx_power
    r_stat = float(np.sum(w.r)) / amp
    return 2.0 * r_stat / ls, r_stat


def track_blind(w, h_hat: float, r_stat: float,
                params: SystemParams) -> TrackingOutcome:
    """Blind tracking: the known-CSI metric with (h*m, h) replaced by R.

    Metric for quadrant i:
        |r'_i - amp*R|^2 / max(sigma_s^2*R + L_s*sigma0^2, L_s*sigma0^2)
        + sum_{j != i} |r'_j|^2 / (L_s*sigma0^2).
    """
    d = _derived(params)
    ls = len(w.bits)
    amp = d.mu * params.tx_power
    r_sum = np.asarray(w.r_sum, dtype=float)
    noise_den = ls * d.sigma0_sq
    sig_den = max(d.sigma_s_sq * r_stat + noise_den, noise_den)
    total_sq = float(np.sum(r_sum ** 2))
    metrics = ((r_sum - amp * r_stat) ** 2 / sig_den
               + (total_sq - r_sum ** 2) / noise_den)
    return TrackingOutcome(chosen_quadrant=_argmin_lowest(metrics),
                           metrics=metrics, h_hat=h_hat, r_stat=r_stat)


def detection_threshold(h_or_hhat: float, params: SystemParams) -> float:
    """OOK decision threshold tau(h) = amp*h*sigma0 / (sigma0 + sqrt(h*sigma_s^2 + sigma0^2)).

    Negative (blind) gain estimates are clamped to zero, giving tau = 0.
    With sigma_s^2 = 0 this reduces to the midpoint amp*h/2.
    """
    d = _derived(params)
    h = max(float(h_or_hhat), 0.0)
    amp = d.mu * params.tx_power
    sigma0 = math.sqrt(d.sigma0_sq)
    return amp * h * sigma0 / (sigma0 + math.sqrt(h * d.sigma_s_sq
                                                  + d.sigma0_sq))


def detect_bits(w, i_hat: int, tau_th: float) -> np.ndarray:
    """Threshold detection on the tracked quadrant: s_hat[k] = 1 iff r > tau.

    Monotone in tau_th: raising the threshold never flips a 0 to a 1.
    """
    r_row = np.asarray(w.r, dtype=float)[i_hat - 1]
    return (r_row > tau_th).astype(np.int8)
