"""Window synthesis and the deterministic Monte-Carlo harness."""

import math

import numpy as np
import pytest

from quadtrack.channel import ChannelDraw
from quadtrack.config import SystemParams, derive_constants
from quadtrack.link_sim import (SHARD_SIZE, SimTally, run_monte_carlo,
                                synth_window, tally_row)

PARAMS = SystemParams()
DERIVED = derive_constants(PARAMS)


def _draw(h=0.01, capture=1):
    return ChannelDraw(theta_x=0.0, theta_y=0.0, capture=capture,
                       h_atm=1.0, h_poi=h, h=h)


def test_synth_window_moments():
    """Per-slot currents have mean amp*h*D_i*s[k] and variance
    sigma_s^2*h*D_i*s[k] + sigma0^2 (checked on pooled samples)."""
    rng = np.random.default_rng(1)
    h = 0.01
    amp = DERIVED.mu * PARAMS.tx_power
    ones_sig, ones_cnt = [], 0
    noise = []
    for _ in range(4000):
        w = synth_window(rng, _draw(h=h, capture=2), PARAMS)
        on = w.bits == 1
        ones_sig.extend(w.r[1][on])
        noise.extend(w.r[0])
        ones_cnt += int(on.sum())
    ones_sig = np.array(ones_sig)
    noise = np.array(noise)
    var_on = DERIVED.sigma_s_sq * h + DERIVED.sigma0_sq
    assert ones_sig.mean() == pytest.approx(
        amp * h, abs=4 * math.sqrt(var_on / ones_cnt))
    assert ones_sig.var() == pytest.approx(var_on, rel=0.1)
    assert noise.mean() == pytest.approx(
        0.0, abs=4 * math.sqrt(DERIVED.sigma0_sq / noise.size))
    assert noise.var() == pytest.approx(DERIVED.sigma0_sq, rel=0.1)


def test_synth_window_fbm_is_noise_only():
    rng = np.random.default_rng(2)
    w = synth_window(rng, _draw(h=0.01, capture=0), PARAMS)
    assert np.all(np.abs(w.r) < 10 * math.sqrt(DERIVED.sigma0_sq))
    assert w.r.shape == (4, PARAMS.window_len)
    assert w.m == int(w.bits.sum())
    assert np.allclose(w.r_sum, w.r.sum(axis=1))


def test_tally_addition_and_rates():
    a = SimTally(windows=10, tracking_errors=2, bit_errors=5, bits_total=100,
                 fbm_windows=1)
    b = SimTally(windows=30, tracking_errors=1, bit_errors=0, bits_total=300,
                 fbm_windows=0)
    c = a + b
    assert (c.windows, c.tracking_errors, c.bit_errors, c.bits_total,
            c.fbm_windows) == (40, 3, 5, 400, 1)
    assert c.ter == pytest.approx(3 / 40)
    assert c.ber == pytest.approx(5 / 400)
    assert c.p_fbm_emp == pytest.approx(1 / 40)
    empty = SimTally()
    assert empty.ter == 0.0 and empty.ber == 0.0 and empty.ter_ci == 0.0


def test_run_monte_carlo_zero_and_validation():
    assert run_monte_carlo(PARAMS, 0, "known_csi", seed=0).windows == 0
    with pytest.raises(ValueError, match="mode"):
        run_monte_carlo(PARAMS, 10, "oracle", seed=0)
    with pytest.raises(ValueError):
        run_monte_carlo(PARAMS, -1, "blind", seed=0)


def test_run_monte_carlo_deterministic_across_workers():
    n = SHARD_SIZE + 1234        # force multiple shards
    base = run_monte_carlo(PARAMS, n, "blind", seed=42, workers=1)
    for workers in (2, 4):
        other = run_monte_carlo(PARAMS, n, "blind", seed=42, workers=workers)
        assert other == base
    assert base.windows == n
    assert run_monte_carlo(PARAMS, n, "blind", seed=43) != base


def test_known_csi_all_zero_window_floor():
    """At high SNR the only tracking errors left are the all-zero-window
    ties, correct with probability 1/4: ter -> (3/4) * 2^-L_s."""
    params = PARAMS.with_overrides(tx_power=1.0, window_len=4)
    n = 200_000
    tally = run_monte_carlo(params, n, "known_csi", seed=7)
    expected = 0.75 * 2.0 ** -4
    sigma = math.sqrt(expected * (1 - expected) / n)
    assert abs(tally.ter - expected) < 3 * sigma
    assert tally.fbm_windows == 0    # P_fbm ~ 1e-13 at the defaults


def test_tracking_errors_blind_at_least_known():
    n = 300_000
    params = PARAMS.with_overrides(tx_power=10 ** (-1.2) * 1e-3)  # -12 dBm
    known = run_monte_carlo(params, n, "known_csi", seed=5)
    blind = run_monte_carlo(params, n, "blind", seed=5)
    assert blind.tracking_errors >= known.tracking_errors
    assert blind.bits_total == known.bits_total == n * PARAMS.window_len


def test_tally_row_schema():
    tally = run_monte_carlo(PARAMS, 1000, "blind", seed=3)
    row = tally_row(PARAMS, "blind", tally, seed=3)
    assert row["mode"] == "blind"
    assert row["L_s"] == PARAMS.window_len
    assert row["n_windows"] == 1000
    assert row["P_t_dBm"] == pytest.approx(13.0103, rel=1e-5)
    assert 0.0 <= row["ter"] <= 1.0 and row["ter_ci"] > 0.0
