"""Design-study tour: detector size, window length, hover jitter.

Three sweeps built on the closed-form evaluators:

1. detector size -- growing the detector widens the field of view but
   collects more background light; the tracking error is U-shaped in
   a/f_c and the optimum moves outward as the hover jitter grows;
2. window length -- the smallest observation window meeting a target
   blind BER under a delay cap, monotone in the target;
3. hover jitter -- tracking-error-vs-power curves for several jitter
   levels.

Run:  python3 demos/design_optimization.py
"""

from quadtrack.config import SystemParams, dbm_to_watts
from quadtrack.experiments import (InfeasibleError, SweepSpec,
                                   choose_window_length, sweep_detector_size,
                                   sweep_hover_std)

PARAMS = SystemParams()


def detector_size_study() -> None:
    print("=== detector-size sweep (objective: ter_blind) ===")
    grid = tuple(0.0015 * 10 ** (i / 6) for i in range(13))
    for sigma_mrad in (3, 5, 7):
        spec = SweepSpec(
            variable="detector_side", grid=grid, objective="ter_blind",
            fixed={"background_power_mode": "geometric",
                   "hover_std_x": sigma_mrad * 1e-3,
                   "hover_std_y": sigma_mrad * 1e-3})
        report = sweep_detector_size(spec, PARAMS)
        print(f"  sigma = {sigma_mrad} mrad: optimum a/f_c = "
              f"{report.argmin:.4f}, ter_blind = "
              f"{report.objective_at_optimum:.3e} "
              f"(interior: {report.interior_minimum})")
    print()


def window_length_study() -> None:
    print("=== window-length chooser (P_t = -3 dBm, delay cap 40) ===")
    params = PARAMS.with_overrides(tx_power=dbm_to_watts(-3.0))
    for target in (1e-3, 1e-4, 1e-5, 1e-9):
        try:
            report = choose_window_length(target, 40, params)
            print(f"  target {target:.0e}: L_s,opt = {int(report.argmin)} "
                  f"(achieved {report.objective_at_optimum:.2e})")
        except InfeasibleError as exc:
            print(f"  target {target:.0e}: infeasible ({exc})")
    print()


def hover_jitter_study() -> None:
    print("=== hover-jitter curves (objective: ter_blind) ===")
    spec = SweepSpec(variable="hover_std",
                     grid=((3e-3, 3e-3), (5e-3, 5e-3), (7e-3, 7e-3)),
                     objective="ter_blind")
    curves = sweep_hover_std(spec, PARAMS, p_t_grid_dbm=[-15, -10, -5, 0])
    powers = [p for p, _ in curves[0][1]]
    print("  P_t [dBm]:      " + "".join(f"{p:>11.0f}" for p in powers))
    for (sx, _), curve in curves:
        values = "".join(f"{v:>11.3e}" for _, v in curve)
        print(f"  sigma={1e3 * sx:.0f} mrad: {values}")
    print()


if __name__ == "__main__":
    detector_size_study()
    window_length_study()
    hover_jitter_study()
