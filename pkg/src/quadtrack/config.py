"""System parameters, validation, and derived receiver constants.

All quantities are SI unless noted.  Config files are TOML with keys that
mirror the attribute names of :class:`SystemParams`; unknown keys are
rejected and missing keys fall back to the documented defaults.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

SPEED_OF_LIGHT = 299792458.0  # m/s

BACKGROUND_MODES = ("fixed", "geometric")
RYTOV_MODES = ("fixed", "slant")


class ConfigError(ValueError):
    """Raised for invalid or inconsistent system parameters."""


@dataclass(frozen=True)
class SystemParams:
    """Every physical constant, link, geometry, and signaling parameter.

    Defaults correspond to the baseline experiment set; the printed
    Boltzmann constant of some tabulations (1.38e-22) is a typo and the
    physical value is used instead (override via config if needed).
    Focal length, detector sides, and hover standard deviations have no
    tabulated values and carry documented working defaults.
    """

    electron_charge: float = 1.602e-19       # C
    apd_gain: float = 100.0                  # G
    quantum_efficiency: float = 0.9          # eta, in (0, 1]
    ionization_factor: float = 0.028         # k_eff, in (0, 1)
    planck_constant: float = 6.6e-34         # J s
    wavelength: float = 1550e-9              # m
    optical_frequency: float = 1.93e14       # Hz
    boltzmann_constant: float = 1.380649e-23  # J/K
    receiver_temperature: float = 300.0      # K
    load_resistance: float = 1e3             # ohm
    bit_time: float = 1e-9                   # s
    aperture_radius: float = 0.05            # m
    beam_radius_ratio: float = 12.0          # w_L / r
    jitter_ratio: float = 2.0                # sigma_j / r
    background_power_mode: str = "fixed"
    background_power: float = 100e-9         # W, used in "fixed" mode
    # Radiance product N_b * B_o * A_a feeding P_b = 2 a b N_b B_o A_a / f_c^2
    # in "geometric" mode.  Defaults chosen so that the default detector
    # geometry reproduces the fixed-mode 100 nW background power.
    background_radiance: float = 5.5556e-5   # N_b [W / m^2 um sr], see above
    optical_filter_bandwidth: float = 1.0    # B_o [um]
    lens_area: float = 1.0                   # A_a [m^2]
    rytov_mode: str = "fixed"
    rytov_variance: float = 1.0              # chi^2, used in "fixed" mode
    link_length: float = 1000.0              # L [m], "slant" mode
    height_difference: float = 500.0         # x_r [m], "slant" mode
    wind_speed: float = 21.0                 # V [m/s], "slant" mode
    cn2_ground: float = 1e-14                # C_n^2(0) [m^-2/3], "slant" mode
    path_loss: float = 1.0                   # h_l, in (0, 1]
    focal_length: float = 0.05               # f_c [m], working default
    detector_side_a: float = 1.5e-3          # a [m], working default
    detector_side_b: float = 1.5e-3          # b [m], working default
    hover_std_x: float = 4e-3                # sigma_x [rad]
    hover_std_y: float = 4e-3                # sigma_y [rad]
    tx_power: float = 0.02                   # P_t [W]
    window_len: int = 10                     # L_s [bits]

    def __post_init__(self):
        _validate(self)

    @property
    def beam_radius(self) -> float:
        """w_L [m]."""
        return self.beam_radius_ratio * self.aperture_radius

    @property
    def jitter_std(self) -> float:
        """Pointing displacement standard deviation sigma_j [m]."""
        return self.jitter_ratio * self.aperture_radius

    def with_overrides(self, **kwargs) -> "SystemParams":
        return replace(self, **kwargs)


_POSITIVE_FIELDS = (
    "electron_charge", "apd_gain", "quantum_efficiency", "ionization_factor",
    "planck_constant", "wavelength", "optical_frequency",
    "boltzmann_constant", "receiver_temperature", "load_resistance",
    "bit_time", "aperture_radius", "beam_radius_ratio", "jitter_ratio",
    "background_power", "background_radiance", "optical_filter_bandwidth",
    "lens_area", "rytov_variance", "link_length", "height_difference",
    "wind_speed", "cn2_ground", "path_loss", "focal_length",
    "detector_side_a", "detector_side_b", "hover_std_x", "hover_std_y",
    "tx_power",
)


def _validate(p: SystemParams) -> None:
    for name in _POSITIVE_FIELDS:
        value = getattr(p, name)
        if not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ConfigError(f"{name} must be a finite number, got {value!r}")
        if value <= 0:
            raise ConfigError(f"{name} must be strictly positive, got {value}")
    if p.quantum_efficiency > 1:
        raise ConfigError(
            f"quantum_efficiency must be in (0, 1], got {p.quantum_efficiency}")
    if not 0 < p.ionization_factor < 1:
        raise ConfigError(
            f"ionization_factor must be in (0, 1), got {p.ionization_factor}")
    if p.path_loss > 1:
        raise ConfigError(f"path_loss must be in (0, 1], got {p.path_loss}")
    if not isinstance(p.window_len, int) or p.window_len < 1:
        raise ConfigError(
            f"window_len must be an integer >= 1, got {p.window_len!r}")
    if p.background_power_mode not in BACKGROUND_MODES:
        raise ConfigError(
            f"background_power_mode must be one of {BACKGROUND_MODES}, "
            f"got {p.background_power_mode!r}")
    if p.rytov_mode not in RYTOV_MODES:
        raise ConfigError(
            f"rytov_mode must be one of {RYTOV_MODES}, got {p.rytov_mode!r}")
    nu_from_lambda = SPEED_OF_LIGHT / p.wavelength
    if abs(p.optical_frequency - nu_from_lambda) > 0.01 * nu_from_lambda:
        raise ConfigError(
            "optical_frequency inconsistent with wavelength: "
            f"nu={p.optical_frequency:.4g} but c/lambda={nu_from_lambda:.4g}")


@dataclass(frozen=True)
class DerivedConstants:
    """Receiver constants derived from :class:`SystemParams`.

    ``sigma_s_sq`` multiplies h*s[k] (the dimensionless channel gain times
    the OOK bit) to give the signal shot-noise variance; equivalently
    ``shot_coefficient`` multiplies the received optical power in watts.
    """

    mu: float                 # responsivity-gain product [A/W]
    bandwidth: float          # B = 1/T_b [Hz]
    excess_noise: float       # APD excess noise factor F
    sigma_th_sq: float        # thermal noise variance [A^2]
    sigma_b_sq: float         # background shot-noise variance [A^2]
    sigma0_sq: float          # total signal-independent noise variance [A^2]
    sigma_s_sq: float         # shot-noise coefficient per unit h [A^2]
    shot_coefficient: float   # 2 e G F mu B [A^2 / W]
    background_power: float   # P_b actually used [W]


def excess_noise_factor(gain: float, k_eff: float) -> float:
    """McIntyre excess noise factor F = k_eff G + (2 - 1/G)(1 - k_eff)."""
    return k_eff * gain + (2.0 - 1.0 / gain) * (1.0 - k_eff)


def derive_constants(p: SystemParams) -> DerivedConstants:
    """Compute mu, B, F and the receiver noise variances.

    Deterministic and pure: identical inputs give bit-identical outputs.
    """
    mu = (p.electron_charge * p.apd_gain * p.quantum_efficiency
          / (p.planck_constant * p.optical_frequency))
    bandwidth = 1.0 / p.bit_time
    f_excess = excess_noise_factor(p.apd_gain, p.ionization_factor)
    sigma_th_sq = (4.0 * p.boltzmann_constant * p.receiver_temperature
                   * bandwidth / p.load_resistance)
    shot_coefficient = (2.0 * p.electron_charge * p.apd_gain * f_excess
                        * mu * bandwidth)
    if p.background_power_mode == "fixed":
        p_b = p.background_power
    else:
        # Local import keeps config importable without the geometry module
        # at definition time (geometry imports nothing from here).
        from .geometry import background_power_geometric
        p_b = background_power_geometric(
            p.detector_side_a, p.detector_side_b, p.focal_length,
            p.background_radiance, p.optical_filter_bandwidth, p.lens_area)
    sigma_b_sq = shot_coefficient * p_b
    return DerivedConstants(
        mu=mu,
        bandwidth=bandwidth,
        excess_noise=f_excess,
        sigma_th_sq=sigma_th_sq,
        sigma_b_sq=sigma_b_sq,
        sigma0_sq=sigma_b_sq + sigma_th_sq,
        sigma_s_sq=shot_coefficient * p.tx_power,
        shot_coefficient=shot_coefficient,
        background_power=p_b,
    )


_FIELD_NAMES = {f.name for f in fields(SystemParams)}


def load_config(path) -> SystemParams:
    """Load a TOML config, rejecting unknown keys; missing keys use defaults."""
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    unknown = sorted(set(raw) - _FIELD_NAMES)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    if "window_len" in raw:
        wl = raw["window_len"]
        if isinstance(wl, float):
            if wl != int(wl):
                raise ConfigError(f"window_len must be an integer, got {wl}")
            raw["window_len"] = int(wl)
    for key, value in raw.items():
        if key in ("background_power_mode", "rytov_mode"):
            continue
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key} must be a number, got {value!r}")
    try:
        return SystemParams(**raw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def dbm_to_watts(p_dbm: float) -> float:
    return 1e-3 * 10.0 ** (p_dbm / 10.0)


def watts_to_dbm(p_watts: float) -> float:
    return 10.0 * math.log10(p_watts / 1e-3)
