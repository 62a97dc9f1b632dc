"""Tracking-error and BER curves: closed forms next to Monte Carlo.

Sweeps transmit power for the genie-aided and blind receivers, printing
the closed-form predictions side by side with a Monte-Carlo estimate.
The genie tracking column also shows the exact factorized form, which
tracks the simulation closely; the historical Gaussianized form sits a
factor ~2-4 above it at mid-SNR (see the analysis module docstring).

Run:  python3 demos/performance_curves.py  (about a minute)
"""

from quadtrack.analysis import (ber_blind, ber_known_csi, floor_blind,
                                ter_blind, ter_known_csi)
from quadtrack.config import SystemParams, dbm_to_watts
from quadtrack.link_sim import run_monte_carlo

POWERS_DBM = [-18.0, -15.0, -12.0, -9.0, -6.0]
N_WINDOWS = 200_000
SEED = 7


def main() -> None:
    base = SystemParams()
    print(f"window length L_s = {base.window_len}, "
          f"{N_WINDOWS} windows per Monte-Carlo point")
    print(f"blind tracking floor: "
          f"{floor_blind(base.window_len, 0.0):.3e}\n")

    header = (f"{'P_t':>6} | {'ter gauss':>10} {'ter exact':>10} "
              f"{'ter MC':>10} | {'ber form':>10} {'ber MC':>10}")
    for mode in ("known_csi", "blind"):
        print(f"--- {mode} ---")
        print(header)
        for p_dbm in POWERS_DBM:
            params = base.with_overrides(tx_power=dbm_to_watts(p_dbm))
            if mode == "known_csi":
                gauss = ter_known_csi(params).value
                exact = ter_known_csi(params, variant="exact").value
                ber = ber_known_csi(params).value
            else:
                gauss = ter_blind(params).value
                exact = float("nan")   # exact variant is genie-only
                ber = ber_blind(params).value
            tally = run_monte_carlo(params, N_WINDOWS, mode, seed=SEED,
                                    workers=4)
            print(f"{p_dbm:>6.1f} | {gauss:>10.3e} {exact:>10.3e} "
                  f"{tally.ter:>10.3e} | {ber:>10.3e} {tally.ber:>10.3e}")
        print()


if __name__ == "__main__":
    main()
