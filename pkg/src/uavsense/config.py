"""Scenario parameters, unit conversions, and the flat config-file format.

All internal math runs in linear SI units. dB-valued inputs (noise density in
dBm/Hz, radar cross-sections in dBsm) are converted once at parse time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

from scipy.constants import c as SPEED_OF_LIGHT

__all__ = [
    "SPEED_OF_LIGHT",
    "ConfigError",
    "ScenarioConfig",
    "RunOptions",
    "SweepSpec",
    "dbsm_to_m2",
    "m2_to_dbsm",
    "dbm_per_hz_to_w_per_hz",
    "w_per_hz_to_dbm_per_hz",
    "parse_config_text",
    "parse_config_file",
    "render_config_text",
]


def dbsm_to_m2(value_dbsm: float) -> float:
    """RCS in dBsm to m^2: sigma = 10^(dBsm/10)."""
    return 10.0 ** (value_dbsm / 10.0)


def m2_to_dbsm(value_m2: float) -> float:
    return 10.0 * math.log10(value_m2)


def dbm_per_hz_to_w_per_hz(value_dbm_hz: float) -> float:
    return 10.0 ** ((value_dbm_hz - 30.0) / 10.0)


def w_per_hz_to_dbm_per_hz(value_w_hz: float) -> float:
    return 10.0 * math.log10(value_w_hz) + 30.0


class ConfigError(ValueError):
    """Invalid or inconsistent scenario parameters; message names the field."""


def _is_perfect_square(n: int) -> bool:
    r = math.isqrt(n)
    return r * r == n


@dataclass(frozen=True)
class ScenarioConfig:
    """All physical and protocol parameters of one sensing scenario.

    Defaults are the common simulation parameters: 1 W transmit power, unit
    transmit gain, a 100 m x 100 m area split into a 20x20 grid, 16 UAVs with
    8x8 receive arrays at 24 GHz / 200 MHz, -174 dBm/Hz noise, ground RCS
    -30 dBsm, target RCS 10 dBsm, 16x64 OFDM frames, static scene.
    """

    transmit_power_w: float = 1.0
    transmit_gain: float = 1.0
    area_side_m: float = 100.0
    uav_count: int = 16
    noise_density_w_hz: float = dbm_per_hz_to_w_per_hz(-174.0)
    ground_rcs_m2: float = dbsm_to_m2(-30.0)
    target_rcs_m2: float = dbsm_to_m2(10.0)
    symbols_per_frame: int = 16
    subcarriers: int = 64
    array_side: int = 8
    carrier_frequency_hz: float = 24.0e9
    bandwidth_hz: float = 200.0e6
    cp_duration_s: float = 2.3e-6
    grid_side: int = 20
    doppler_hz: float = 0.0
    altitude_mode: str = "derived"  # "derived" (from per-UAV coverage) or "explicit"
    altitude_m: float | None = None
    trials: int = 1000
    master_seed: int = 1

    def __post_init__(self):
        pos = [
            ("transmit_power_w", self.transmit_power_w),
            ("transmit_gain", self.transmit_gain),
            ("area_side_m", self.area_side_m),
            ("noise_density_w_hz", self.noise_density_w_hz),
            ("ground_rcs_m2", self.ground_rcs_m2),
            ("target_rcs_m2", self.target_rcs_m2),
            ("carrier_frequency_hz", self.carrier_frequency_hz),
            ("bandwidth_hz", self.bandwidth_hz),
            ("cp_duration_s", self.cp_duration_s),
        ]
        for name, value in pos:
            if not (isinstance(value, (int, float)) and value > 0 and math.isfinite(value)):
                raise ConfigError(f"{name}: must be a finite positive number, got {value!r}")
        for name, value in [
            ("uav_count", self.uav_count),
            ("symbols_per_frame", self.symbols_per_frame),
            ("subcarriers", self.subcarriers),
            ("array_side", self.array_side),
            ("grid_side", self.grid_side),
            ("trials", self.trials),
        ]:
            if not (isinstance(value, int) and value >= 1):
                raise ConfigError(f"{name}: must be a positive integer, got {value!r}")
        if not math.isfinite(self.doppler_hz):
            raise ConfigError(f"doppler_hz: must be finite, got {self.doppler_hz!r}")
        if self.ground_rcs_m2 >= self.target_rcs_m2:
            raise ConfigError(
                "ground_rcs_m2: must be smaller than target_rcs_m2 "
                f"({self.ground_rcs_m2} >= {self.target_rcs_m2})"
            )
        if not _is_perfect_square(self.uav_count):
            raise ConfigError(f"uav_count: must be a perfect square, got {self.uav_count}")
        if self.grid_side % math.isqrt(self.uav_count) != 0:
            raise ConfigError(
                f"grid_side: sqrt(uav_count)={math.isqrt(self.uav_count)} must divide "
                f"grid_side={self.grid_side} for the uniform deployment"
            )
        if self.altitude_mode not in ("derived", "explicit"):
            raise ConfigError(f"altitude_mode: must be 'derived' or 'explicit', got {self.altitude_mode!r}")
        if self.altitude_mode == "explicit":
            if self.altitude_m is None or not (self.altitude_m > 0 and math.isfinite(self.altitude_m)):
                raise ConfigError(f"altitude_m: explicit mode needs a positive altitude, got {self.altitude_m!r}")
        elif self.altitude_m is not None:
            raise ConfigError("altitude_m: only allowed with altitude_mode = explicit")
        if not (isinstance(self.master_seed, int) and 0 <= self.master_seed < 2**64):
            raise ConfigError(f"master_seed: must be a 64-bit unsigned integer, got {self.master_seed!r}")

    # Derived quantities; each recomputation is pure and repeatable.
    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_frequency_hz

    @property
    def subcarrier_spacing_hz(self) -> float:
        return self.bandwidth_hz / self.subcarriers

    @property
    def symbol_duration_s(self) -> float:
        return 1.0 / self.subcarrier_spacing_hz + self.cp_duration_s

    @property
    def cell_size_m(self) -> float:
        return self.area_side_m / self.grid_side

    @property
    def uavs_per_side(self) -> int:
        return math.isqrt(self.uav_count)

    @property
    def cells_per_uav_side(self) -> int:
        return self.grid_side // self.uavs_per_side


@dataclass(frozen=True)
class RunOptions:
    """Processing choices that are not physical scenario parameters."""

    beamformer: str = "capon"  # "ls" or "capon"
    fusion: str = "avg"  # "avg" or "prenorm"
    fast_path: bool = True
    noise: bool = True
    capon_loading: float = 1e-2
    ls_iterations: int = 10

    def __post_init__(self):
        if self.beamformer not in ("ls", "capon"):
            raise ConfigError(f"beamformer: must be 'ls' or 'capon', got {self.beamformer!r}")
        if self.fusion not in ("avg", "prenorm"):
            raise ConfigError(f"fusion: must be 'avg' or 'prenorm', got {self.fusion!r}")
        if not self.capon_loading > 0:
            raise ConfigError(f"capon_loading: must be positive, got {self.capon_loading!r}")
        if self.ls_iterations < 0:
            raise ConfigError(f"ls_iterations: must be >= 0, got {self.ls_iterations!r}")


_SWEEP_PARAMS = (
    "cell_size_constant_coverage",
    "cell_size_constant_area",
    "antennas",
    "altitude",
    "ground_rcs",
)


@dataclass(frozen=True)
class SweepSpec:
    """One swept parameter with per-point processing combinations."""

    parameter: str
    values: tuple[float, ...]
    beamformers: tuple[str, ...] = ("capon",)
    fusions: tuple[str, ...] = ("avg",)
    sigma_g_dbsm: tuple[float, ...] = (-30.0,)
    deltas: tuple[int, ...] = (0, 1, 2)

    def __post_init__(self):
        if self.parameter not in _SWEEP_PARAMS:
            raise ConfigError(f"sweep.parameter: must be one of {_SWEEP_PARAMS}, got {self.parameter!r}")
        if not self.values:
            raise ConfigError("sweep.values: at least one value required")
        for tag in self.beamformers:
            if tag not in ("ls", "capon"):
                raise ConfigError(f"sweep.beamformers: unknown tag {tag!r}")
        for tag in self.fusions:
            if tag not in ("avg", "prenorm"):
                raise ConfigError(f"sweep.fusions: unknown tag {tag!r}")
        for d in self.deltas:
            if not (isinstance(d, int) and d >= 0):
                raise ConfigError(f"sweep.deltas: must be non-negative integers, got {d!r}")


# Flat key-value config format: "section.key = value", '#' comments.
# Scenario dB keys and their linear twins are mutually exclusive; the manifest
# echo uses the linear twins so a round-trip is bit-exact.

_SCENARIO_KEYS = {
    "scenario.transmit_power_w": ("transmit_power_w", float),
    "scenario.transmit_gain": ("transmit_gain", float),
    "scenario.area_side_m": ("area_side_m", float),
    "scenario.uav_count": ("uav_count", int),
    "scenario.noise_density_dbm_hz": ("noise_density_w_hz", lambda s: dbm_per_hz_to_w_per_hz(float(s))),
    "scenario.noise_density_w_hz": ("noise_density_w_hz", float),
    "scenario.ground_rcs_dbsm": ("ground_rcs_m2", lambda s: dbsm_to_m2(float(s))),
    "scenario.ground_rcs_m2": ("ground_rcs_m2", float),
    "scenario.target_rcs_dbsm": ("target_rcs_m2", lambda s: dbsm_to_m2(float(s))),
    "scenario.target_rcs_m2": ("target_rcs_m2", float),
    "scenario.symbols_per_frame": ("symbols_per_frame", int),
    "scenario.subcarriers": ("subcarriers", int),
    "scenario.array_side": ("array_side", int),
    "scenario.carrier_frequency_hz": ("carrier_frequency_hz", float),
    "scenario.bandwidth_hz": ("bandwidth_hz", float),
    "scenario.cp_duration_s": ("cp_duration_s", float),
    "scenario.grid_side": ("grid_side", int),
    "scenario.doppler_hz": ("doppler_hz", float),
    "scenario.altitude_mode": ("altitude_mode", str),
    "scenario.altitude_m": ("altitude_m", float),
    "run.trials": ("trials", int),
    "run.master_seed": ("master_seed", int),
}

_EXCLUSIVE = [
    ("scenario.noise_density_dbm_hz", "scenario.noise_density_w_hz"),
    ("scenario.ground_rcs_dbsm", "scenario.ground_rcs_m2"),
    ("scenario.target_rcs_dbsm", "scenario.target_rcs_m2"),
]

_ONOFF = {"on": True, "off": False, "true": True, "false": False}

_OPTION_KEYS = {
    "run.beamformer": ("beamformer", str),
    "run.fusion": ("fusion", str),
    "run.fast_path": ("fast_path", lambda s: _parse_onoff("run.fast_path", s)),
    "run.noise": ("noise", lambda s: _parse_onoff("run.noise", s)),
    "run.capon_loading": ("capon_loading", float),
    "run.ls_iterations": ("ls_iterations", int),
}

_SWEEP_KEYS = {
    "sweep.parameter": ("parameter", str),
    "sweep.values": ("values", lambda s: tuple(float(x) for x in _split_list(s))),
    "sweep.beamformers": ("beamformers", lambda s: tuple(_split_list(s))),
    "sweep.fusions": ("fusions", lambda s: tuple(_split_list(s))),
    "sweep.sigma_g_dbsm": ("sigma_g_dbsm", lambda s: tuple(float(x) for x in _split_list(s))),
    "sweep.deltas": ("deltas", lambda s: tuple(int(x) for x in _split_list(s))),
}


def _split_list(s: str) -> list[str]:
    return [part.strip() for part in s.split(",") if part.strip()]


def _parse_onoff(key: str, s: str) -> bool:
    try:
        return _ONOFF[s.strip().lower()]
    except KeyError:
        raise ConfigError(f"{key}: expected on/off, got {s!r}") from None


def parse_config_text(text: str, overrides: dict[str, str] | None = None):
    """Parse the flat config format into (ScenarioConfig, RunOptions, SweepSpec | None).

    ``overrides`` maps raw keys to raw string values (CLI flags) and is applied
    after the file contents. Unknown or duplicated keys are rejected.
    """
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line.strip()!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if key in raw:
            raise ConfigError(f"{key}: duplicated in config")
        raw[key] = value
    for key, value in (overrides or {}).items():
        raw[key] = value

    known = set(_SCENARIO_KEYS) | set(_OPTION_KEYS) | set(_SWEEP_KEYS)
    for key in raw:
        if key not in known:
            raise ConfigError(f"{key}: unknown configuration key")
    for a, b in _EXCLUSIVE:
        if a in raw and b in raw:
            raise ConfigError(f"{a}: conflicts with {b}; give exactly one")

    def convert(key, conv, value):
        try:
            return conv(value)
        except ConfigError:
            raise
        except (TypeError, ValueError):
            raise ConfigError(f"{key}: cannot parse value {value!r}") from None

    scen_kwargs = {}
    opt_kwargs = {}
    sweep_kwargs = {}
    for key, value in raw.items():
        if key in _SCENARIO_KEYS:
            field, conv = _SCENARIO_KEYS[key]
            scen_kwargs[field] = convert(key, conv, value)
        elif key in _OPTION_KEYS:
            field, conv = _OPTION_KEYS[key]
            opt_kwargs[field] = convert(key, conv, value)
        else:
            field, conv = _SWEEP_KEYS[key]
            sweep_kwargs[field] = convert(key, conv, value)

    config = ScenarioConfig(**scen_kwargs)
    options = RunOptions(**opt_kwargs)
    sweep = None
    if sweep_kwargs:
        if "parameter" not in sweep_kwargs or "values" not in sweep_kwargs:
            raise ConfigError("sweep.parameter: sweep sections need both sweep.parameter and sweep.values")
        sweep = SweepSpec(**sweep_kwargs)
    return config, options, sweep


def parse_config_file(path, overrides: dict[str, str] | None = None):
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    return parse_config_text(text, overrides)


def render_config_text(config: ScenarioConfig, options: RunOptions, sweep: SweepSpec | None = None) -> str:
    """Canonical flat rendering; feeding it back reproduces identical runs."""
    lines = []
    for name in (
        "transmit_power_w",
        "transmit_gain",
        "area_side_m",
        "uav_count",
        "noise_density_w_hz",
        "ground_rcs_m2",
        "target_rcs_m2",
        "symbols_per_frame",
        "subcarriers",
        "array_side",
        "carrier_frequency_hz",
        "bandwidth_hz",
        "cp_duration_s",
        "grid_side",
        "doppler_hz",
        "altitude_mode",
    ):
        value = getattr(config, name)
        rendered = value if isinstance(value, str) else repr(value)
        lines.append(f"scenario.{name} = {rendered}")
    if config.altitude_m is not None:
        lines.append(f"scenario.altitude_m = {config.altitude_m!r}")
    lines.append(f"run.trials = {config.trials}")
    lines.append(f"run.master_seed = {config.master_seed}")
    lines.append(f"run.beamformer = {options.beamformer}")
    lines.append(f"run.fusion = {options.fusion}")
    lines.append(f"run.fast_path = {'on' if options.fast_path else 'off'}")
    lines.append(f"run.noise = {'on' if options.noise else 'off'}")
    lines.append(f"run.capon_loading = {options.capon_loading!r}")
    lines.append(f"run.ls_iterations = {options.ls_iterations}")
    if sweep is not None:
        lines.append(f"sweep.parameter = {sweep.parameter}")
        lines.append("sweep.values = " + ", ".join(repr(v) for v in sweep.values))
        lines.append("sweep.beamformers = " + ", ".join(sweep.beamformers))
        lines.append("sweep.fusions = " + ", ".join(sweep.fusions))
        lines.append("sweep.sigma_g_dbsm = " + ", ".join(repr(v) for v in sweep.sigma_g_dbsm))
        lines.append("sweep.deltas = " + ", ".join(str(d) for d in sweep.deltas))
    return "\n".join(lines) + "\n"


def config_as_dict(config: ScenarioConfig) -> dict:
    return {f.name: getattr(config, f.name) for f in fields(config)}
