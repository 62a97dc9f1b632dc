"""Design-study sweeps: detector size, observation-window length, hover jitter.

All objectives are closed-form (analysis module); Monte-Carlo spot checks
of a found optimum are left to callers.  Reports are deterministic:
re-running with the same configuration is bit-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from . import analysis, geometry
from .config import SystemParams, dbm_to_watts, watts_to_dbm

SWEEP_VARIABLES = ("detector_side", "window_len", "hover_std", "tx_power")
OBJECTIVES = ("ter_blind", "ber_blind", "ber_known", "ter_known")

_OBJECTIVE_FN = {
    "ter_blind": analysis.ter_blind,
    "ber_blind": analysis.ber_blind,
    "ber_known": analysis.ber_known_csi,
    "ter_known": analysis.ter_known_csi,
}


class InfeasibleError(RuntimeError):
    """No grid value satisfies the constraints; message names the binding one."""


@dataclass(frozen=True)
class SweepSpec:
    """One-dimensional sweep request.

    ``variable="detector_side"`` sweeps the square-detector side as a
    fraction of the focal length (a = b = value * f_c); ``grid`` must be
    strictly increasing.  ``fixed`` holds SystemParams overrides applied
    before sweeping.
    """

    variable: str
    grid: tuple
    objective: str = "ter_blind"
    fixed: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise ValueError(f"variable must be one of {SWEEP_VARIABLES}, "
                             f"got {self.variable!r}")
        if self.objective not in OBJECTIVES:
            raise ValueError(f"objective must be one of {OBJECTIVES}, "
                             f"got {self.objective!r}")
        grid = tuple(self.grid)
        if len(grid) < 1:
            raise ValueError("grid must be non-empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("grid must be strictly increasing")
        object.__setattr__(self, "grid", grid)


@dataclass(frozen=True)
class OptimumReport:
    """Outcome of a sweep: the argmin, its objective, and the full curve."""

    variable: str
    objective: str
    argmin: float
    objective_at_optimum: float
    curve: tuple            # ((grid value, objective value), ...)
    interior_minimum: bool

    def to_text(self) -> str:
        lines = [
            f"sweep variable : {self.variable}",
            f"objective      : {self.objective}",
            f"argmin         : {self.argmin:.6g}",
            f"objective(opt) : {self.objective_at_optimum:.6g}",
            f"interior       : {'yes' if self.interior_minimum else 'no'}",
            "curve          :",
        ]
        lines += [f"  {x:.6g} -> {y:.6g}" for x, y in self.curve]
        return "\n".join(lines)


def _objective_value(name: str, params: SystemParams) -> float:
    return _OBJECTIVE_FN[name](params).value


def sweep_detector_size(spec: SweepSpec, params: SystemParams) -> OptimumReport:
    """Sweep the square-detector side (as a/f_c) and report the optimum.

    Growing the detector widens the field of view (lower misalignment
    probability) but collects more background light (higher noise floor),
    so the objective is U-shaped and an interior optimum exists.  Requires
    the geometric background mode — with a fixed background power the
    trade-off the sweep is meant to expose does not exist.
    """
    if spec.variable != "detector_side":
        raise ValueError("sweep_detector_size needs a detector_side spec")
    base = params.with_overrides(**spec.fixed)
    if base.background_power_mode != "geometric":
        raise ValueError(
            "detector-size sweep requires background_power_mode='geometric'; "
            "a fixed background power removes the size/noise trade-off")
    curve = []
    for ratio in spec.grid:
        side = ratio * base.focal_length
        local = base.with_overrides(detector_side_a=side,
                                    detector_side_b=side)
        curve.append((float(ratio), _objective_value(spec.objective, local)))
    return _report(spec, curve)


def choose_window_length(target_ber: float, delay_cap: int,
                         params: SystemParams) -> OptimumReport:
    """Smallest window length whose blind BER meets the target.

    Necessary condition first: an all-zero window (probability 2^-L_s)
    defeats blind tracking, so 2^-L_s < target_ber must hold before the
    closed form is even consulted.  Raises InfeasibleError when no
    L_s <= delay_cap satisfies both.
    """
    if not 0.0 < target_ber < 1.0:
        raise ValueError("target_ber must be in (0, 1)")
    if delay_cap < 1:
        raise ValueError("delay_cap must be >= 1")
    l_min = math.floor(-math.log2(target_ber)) + 1   # smallest L: 2^-L < target
    if l_min > delay_cap:
        raise InfeasibleError(
            f"all-zero-window floor 2^-L_s exceeds target {target_ber:g} for "
            f"every L_s <= {delay_cap}; need L_s >= {l_min}")
    curve = []
    best = None
    for l_s in range(l_min, delay_cap + 1):
        local = params.with_overrides(window_len=l_s)
        value = analysis.ber_blind(local).value
        curve.append((float(l_s), value))
        if value <= target_ber:
            best = (l_s, value)
            break
    if best is None:
        raise InfeasibleError(
            f"no L_s in [{l_min}, {delay_cap}] reaches blind BER "
            f"{target_ber:g} at P_t = {watts_to_dbm(params.tx_power):.1f} dBm; "
            f"best tried {min(v for _, v in curve):.3g}")
    return OptimumReport(
        variable="window_len", objective="ber_blind",
        argmin=float(best[0]), objective_at_optimum=best[1],
        curve=tuple(curve),
        interior_minimum=l_min < best[0] < delay_cap)


def sweep_hover_std(spec: SweepSpec, params: SystemParams,
                    p_t_grid_dbm=None) -> list:
    """One tracking-error-vs-power curve per (sigma_x, sigma_y) pair.

    ``spec.grid`` holds (sigma_x, sigma_y) pairs ordered by sigma_x; the
    objective is evaluated over ``p_t_grid_dbm`` (default -20..+10 dBm in
    3 dB steps).  Returns a list of (pair, [(P_t_dBm, value), ...]).
    """
    if spec.variable != "hover_std":
        raise ValueError("sweep_hover_std needs a hover_std spec")
    if p_t_grid_dbm is None:
        p_t_grid_dbm = list(range(-20, 11, 3))
    base = params.with_overrides(**spec.fixed)
    curves = []
    for pair in spec.grid:
        sx, sy = (pair if isinstance(pair, (tuple, list)) else (pair, pair))
        local = base.with_overrides(hover_std_x=float(sx),
                                    hover_std_y=float(sy))
        curve = [(float(p_dbm),
                  _objective_value(
                      spec.objective,
                      local.with_overrides(tx_power=dbm_to_watts(p_dbm))))
                 for p_dbm in p_t_grid_dbm]
        curves.append(((float(sx), float(sy)), curve))
    return curves


def _report(spec: SweepSpec, curve: list) -> OptimumReport:
    values = [y for _, y in curve]
    idx = min(range(len(values)), key=values.__getitem__)
    return OptimumReport(
        variable=spec.variable, objective=spec.objective,
        argmin=curve[idx][0], objective_at_optimum=curve[idx][1],
        curve=tuple(curve),
        interior_minimum=0 < idx < len(curve) - 1)
