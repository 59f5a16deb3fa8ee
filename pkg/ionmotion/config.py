"""
Run configuration: YAML file with unit-suffixed keys, merged with
DEFAULT_CONFIG, validated and converted to SI records.

config usually in /etc/ionmotion.yaml
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import yaml

from .dynamics import (GRADUATED, IDEAL, RECOIL, UNIFORM, CoolingSchedule, RepumpModel,
                       graduated_start_level)
from .errors import ConfigError, IonMotionError
from .fockstate import COUPLING_MODES, LAMB_DICKE, LOWER, UPPER
from .physcore import (AMU, IonSpecies, NoiseModel, RamanGeometry, TrapConfig,
                       doppler_limit_nbar, hz_to_angular, lamb_dicke)
from .spectroscopy import METHODS, PEAK_RATIO, ProbeConfig, grid_from_khz
from .util import selective_merge, unknown_keys

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = "/etc/ionmotion.yaml"
DEFAULT_SEED = 20040610

DEFAULT_CONFIG = {
    "ion": {
        "name": "111Cd+",
        "mass_amu": 110.904,
        "linewidth_mhz": 47.0,
        "wavelength_nm": 214.5,
        "hyperfine_ghz": 14.53,
    },
    "trap": {
        "label": "",
        "freq_mhz": None,
        "distance_um": None,
        "rf_amplitude_v": None,
        "drive_freq_mhz": None,
        "static_potential_v": None,
    },
    "raman": {
        "beam_angle_deg": 90.0,
        "delta_k_per_um": None,
        "rabi_khz": 100.0,
        "coupling": LAMB_DICKE,
    },
    "noise": {
        "s0_v2_per_m2_hz": 0.0,
        "ref_freq_mhz": None,
        "ref_distance_um": None,
        "alpha": 1.4,
        "p": 4.0,
        "floor_v2_per_m2_hz": 0.0,
        "floor_p": 2.0,
    },
    "probe": {
        "t_probe_us": None,
        "shots": 200,
        "fidelity": 0.997,
        "orders": [LOWER, UPPER],
        "window_khz": 30.0,
        "points": 121,
        "method": PEAK_RATIO,
        "flop_order": LOWER,
        "flop_max_us": 400.0,
        "flop_points": 41,
    },
    "schedule": {
        "cycles": 40,
        "kind": GRADUATED,
        "pulse_us": None,
        "start_level": None,
        "repump": IDEAL,
        "repump_eta": None,
        "photons_per_repump": 3.0,
    },
    "run": {
        "seed": DEFAULT_SEED,
        "jobs": 1,
        "output_dir": ".",
        "delays_ms": [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0],
        "sweep_freqs_mhz": [1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
        "survey_csv": None,
        "thermal_floor_v2_per_m2_hz": None,
    },
}


@dataclass(frozen=True)
class ScheduleSettings:
    kind: str = GRADUATED
    cycles: int = 40
    pulse: Optional[float] = None
    start_level: Optional[int] = None
    repump: RepumpModel = field(default_factory=RepumpModel)


@dataclass(frozen=True)
class RunConfig:
    """
    Validated configuration of one invocation, all in SI units
    """
    ion: IonSpecies
    trap: TrapConfig
    geometry: RamanGeometry
    noise: NoiseModel
    probe: ProbeConfig
    schedule: ScheduleSettings
    mode: str = LAMB_DICKE
    method: str = PEAK_RATIO
    flop_order: int = LOWER
    seed: int = DEFAULT_SEED
    jobs: int = 1
    output_dir: str = "."
    delays: Tuple[float, ...] = ()
    sweep_frequencies: Tuple[float, ...] = ()
    survey_csv: Optional[str] = None
    thermal_floor: Optional[float] = None
    path: Optional[str] = None

    @property
    def eta(self):
        return lamb_dicke(self.geometry, self.ion, self.trap.omega_x)

    def cooling_schedule(self, trap: TrapConfig = None):
        """
        Raman cooling schedule for `trap` (default: the configured one). The
        pulse lengths depend on the Lamb-Dicke parameter at its frequency.
        """
        trap = trap or self.trap
        eta = lamb_dicke(self.geometry, self.ion, trap.omega_x)
        settings = self.schedule
        if settings.kind == UNIFORM:
            if settings.pulse is not None:
                return CoolingSchedule.uniform(settings.cycles, settings.pulse, settings.repump)
            return CoolingSchedule.uniform_pi(settings.cycles, eta, self.geometry.omega0,
                                              settings.repump, self.mode)
        start = settings.start_level
        if start is None:
            start = graduated_start_level(doppler_limit_nbar(self.ion, trap.omega_x))
        return CoolingSchedule.graduated(settings.cycles, eta, self.geometry.omega0, start,
                                         settings.repump, self.mode)

    def with_overrides(self, **changes):
        changes = {k: v for k, v in changes.items() if v is not None}
        shots = changes.pop("shots", None)
        cfg = replace(self, **changes)
        if shots is not None:
            cfg = replace(cfg, probe=cfg.probe.with_shots(shots))
        return cfg


def _line_map(node, prefix="", lines=None):
    """
    Dotted key -> 1-based line number, from a composed YAML node tree
    """
    if lines is None:
        lines = {}
    if isinstance(node, yaml.MappingNode):
        for key_node, value_node in node.value:
            dotted = f"{prefix}{key_node.value}"
            lines[dotted] = key_node.start_mark.line + 1
            _line_map(value_node, f"{dotted}.", lines)
    return lines


def parse_shots(value):
    """
    Shot count from a config value or a command line argument: a positive
    integer or inf
    """
    if isinstance(value, str):
        if value.strip().lower() in ("inf", "infinity", ".inf"):
            return math.inf
        try:
            value = int(value)
        except ValueError:
            raise ValueError(f"shots must be a positive integer or 'inf', got {value!r}") from None
    if isinstance(value, float) and math.isinf(value) and value > 0:
        return math.inf
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ValueError(f"shots must be a positive integer or 'inf', got {value!r}")
    return value


class _Reader:
    """
    Typed access to the merged config dict; every failure names the dotted
    key and its line
    """

    def __init__(self, cfg, lines, path):
        self.cfg = cfg
        self.lines = lines
        self.path = path

    def error(self, key, message):
        return ConfigError(f"{key}: {message}", key=key, line=self.lines.get(key), path=self.path)

    def raw(self, key):
        section, name = key.split(".")
        return self.cfg[section][name]

    def number(self, key, positive=False, non_negative=False, optional=False):
        value = self.raw(key)
        if value is None:
            if optional:
                return None
            raise self.error(key, "missing mandatory value")
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise self.error(key, f"expected a number, got {value!r}")
        value = float(value)
        if not math.isfinite(value):
            raise self.error(key, f"expected a finite number, got {value}")
        if positive and value <= 0:
            raise self.error(key, f"must be positive, got {value:g}")
        if non_negative and value < 0:
            raise self.error(key, f"must be non-negative, got {value:g}")
        return value

    def integer(self, key, minimum=None, optional=False):
        value = self.raw(key)
        if value is None and optional:
            return None
        if isinstance(value, bool) or not isinstance(value, int):
            raise self.error(key, f"expected an integer, got {value!r}")
        if minimum is not None and value < minimum:
            raise self.error(key, f"must be at least {minimum}, got {value}")
        return value

    def text(self, key, choices=None, optional=False):
        value = self.raw(key)
        if value is None and optional:
            return None
        if not isinstance(value, str):
            raise self.error(key, f"expected text, got {value!r}")
        if choices is not None and value not in choices:
            raise self.error(key, f"must be one of {', '.join(choices)}, got {value!r}")
        return value

    def numbers(self, key, non_negative=False, positive=False):
        value = self.raw(key)
        if not isinstance(value, list):
            raise self.error(key, f"expected a list, got {value!r}")
        result = []
        for item in value:
            if isinstance(item, bool) or not isinstance(item, (int, float)) or not math.isfinite(item):
                raise self.error(key, f"expected finite numbers, got {item!r}")
            if positive and item <= 0:
                raise self.error(key, f"entries must be positive, got {item:g}")
            if non_negative and item < 0:
                raise self.error(key, f"entries must be non-negative, got {item:g}")
            result.append(float(item))
        return result


def load_yaml(path):
    """
    Parsed YAML document and its key line map
    """
    try:
        with open(path, "r") as stream:
            text = stream.read()
    except FileNotFoundError:
        raise ConfigError("config file not found", path=path) from None
    except OSError as e:
        raise ConfigError(f"cannot read config file: {e.strerror}", path=path) from None
    try:
        data = yaml.safe_load(text)
        lines = _line_map(yaml.compose(text))
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError(f"YAML parse error: {getattr(e, 'problem', None) or e}",
                          line=line, path=path) from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("top level of the config must be a mapping", line=1, path=path)
    return data, lines


def parse_config(path=DEFAULT_CONFIG_PATH):
    """
    Read, merge with DEFAULT_CONFIG, validate and convert a run config
    """
    data, lines = load_yaml(path)
    return build_config(data, lines, path)


def build_config(data, lines=None, path=None):
    lines = lines or {}
    for section, value in data.items():
        if section in DEFAULT_CONFIG and value is not None and not isinstance(value, dict):
            raise ConfigError(f"section {section} must be a mapping", key=section,
                              line=lines.get(section), path=path)
    data = {k: ({} if v is None and k in DEFAULT_CONFIG else v) for k, v in data.items()}
    unknown = unknown_keys(DEFAULT_CONFIG, data)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}", key=unknown[0],
                          line=lines.get(unknown[0]), path=path)
    cfg = selective_merge(data, DEFAULT_CONFIG)
    reader = _Reader(cfg, lines, path)

    ion = _section(reader, "ion", lambda: IonSpecies(
        name=reader.text("ion.name"),
        mass=reader.number("ion.mass_amu", positive=True) * AMU,
        transition_wavelength=reader.number("ion.wavelength_nm", positive=True) * 1e-9,
        gamma0=hz_to_angular(reader.number("ion.linewidth_mhz", positive=True) * 1e6),
        omega_hf=hz_to_angular(reader.number("ion.hyperfine_ghz", non_negative=True) * 1e9),
    ))
    trap = _section(reader, "trap", lambda: TrapConfig(
        omega_x=hz_to_angular(reader.number("trap.freq_mhz", positive=True) * 1e6),
        electrode_distance=reader.number("trap.distance_um", positive=True) * 1e-6,
        label=reader.text("trap.label"),
        rf_amplitude=reader.number("trap.rf_amplitude_v", optional=True),
        drive_frequency=_scaled(reader.number("trap.drive_freq_mhz", positive=True, optional=True),
                                lambda f: hz_to_angular(f * 1e6)),
        static_potential=reader.number("trap.static_potential_v", optional=True),
    ))

    omega0 = hz_to_angular(reader.number("raman.rabi_khz", non_negative=True) * 1e3)
    delta_k = reader.number("raman.delta_k_per_um", non_negative=True, optional=True)
    if delta_k is not None:
        geometry = _section(reader, "raman", lambda: RamanGeometry(delta_k=delta_k * 1e6, omega0=omega0))
    else:
        angle = reader.number("raman.beam_angle_deg", non_negative=True)
        if angle > 180:
            raise reader.error("raman.beam_angle_deg", f"must lie in [0, 180], got {angle:g}")
        geometry = _section(reader, "raman", lambda: RamanGeometry.from_beam_angle(ion, angle, omega0))
    mode = reader.text("raman.coupling", choices=COUPLING_MODES)

    ref_freq = reader.number("noise.ref_freq_mhz", positive=True, optional=True)
    ref_distance = reader.number("noise.ref_distance_um", positive=True, optional=True)
    noise = _section(reader, "noise", lambda: NoiseModel(
        s0=reader.number("noise.s0_v2_per_m2_hz", non_negative=True),
        omega_ref=trap.omega_x if ref_freq is None else hz_to_angular(ref_freq * 1e6),
        d_ref=trap.electrode_distance if ref_distance is None else ref_distance * 1e-6,
        alpha=reader.number("noise.alpha"),
        p=reader.number("noise.p"),
        floor=reader.number("noise.floor_v2_per_m2_hz", non_negative=True),
        floor_p=reader.number("noise.floor_p"),
    ))

    try:
        shots = parse_shots(reader.raw("probe.shots"))
    except ValueError as e:
        raise reader.error("probe.shots", str(e)) from None
    fidelity = reader.number("probe.fidelity")
    if not 0.5 < fidelity <= 1:
        raise reader.error("probe.fidelity", f"must lie in (0.5, 1], got {fidelity:g}")
    orders = reader.raw("probe.orders")
    if (not isinstance(orders, list) or not orders
            or any(isinstance(s, bool) or not isinstance(s, int) or abs(s) > 2 for s in orders)):
        raise reader.error("probe.orders", f"expected a list of sideband orders in -2..2, got {orders!r}")
    points = reader.integer("probe.points", minimum=2)
    flop_points = reader.integer("probe.flop_points", minimum=2)
    flop_max = reader.number("probe.flop_max_us", positive=True) * 1e-6
    probe = _section(reader, "probe", lambda: ProbeConfig(
        t_probe=_scaled(reader.number("probe.t_probe_us", positive=True, optional=True),
                        lambda t: t * 1e-6),
        detuning_grid=grid_from_khz(trap.omega_x, orders, reader.number("probe.window_khz", positive=True),
                                    points),
        orders=tuple(orders),
        shots=shots,
        detection_fidelity=fidelity,
        flop_times=[flop_max * k / (flop_points - 1) for k in range(flop_points)],
    ))
    method = reader.text("probe.method", choices=METHODS)
    flop_order = reader.integer("probe.flop_order")
    if abs(flop_order) > 2:
        raise reader.error("probe.flop_order", f"must lie in -2..2, got {flop_order}")

    repump_kind = reader.text("schedule.repump", choices=(IDEAL, RECOIL))
    repump_eta = reader.number("schedule.repump_eta", non_negative=True, optional=True)
    if repump_eta is None:
        repump_eta = lamb_dicke(geometry, ion, trap.omega_x) if repump_kind == RECOIL else 0.0
    repump = _section(reader, "schedule", lambda: RepumpModel(
        kind=repump_kind, eta_repump=repump_eta,
        photons_per_repump=reader.number("schedule.photons_per_repump", non_negative=True)))
    pulse = reader.number("schedule.pulse_us", positive=True, optional=True)
    schedule = ScheduleSettings(
        kind=reader.text("schedule.kind", choices=(UNIFORM, GRADUATED)),
        cycles=reader.integer("schedule.cycles", minimum=0),
        pulse=None if pulse is None else pulse * 1e-6,
        start_level=reader.integer("schedule.start_level", minimum=1, optional=True),
        repump=repump,
    )

    delays = reader.numbers("run.delays_ms", non_negative=True)
    if any(b <= a for a, b in zip(delays, delays[1:])):
        raise reader.error("run.delays_ms", "delays must be strictly increasing")
    survey_csv = reader.text("run.survey_csv", optional=True)
    output_dir = reader.text("run.output_dir")

    result = RunConfig(
        ion=ion,
        trap=trap,
        geometry=geometry,
        noise=noise,
        probe=probe,
        schedule=schedule,
        mode=mode,
        method=method,
        flop_order=flop_order,
        seed=reader.integer("run.seed", minimum=0),
        jobs=reader.integer("run.jobs", minimum=1),
        output_dir=output_dir,
        delays=tuple(d * 1e-3 for d in delays),
        sweep_frequencies=tuple(hz_to_angular(f * 1e6)
                                for f in reader.numbers("run.sweep_freqs_mhz", positive=True)),
        survey_csv=survey_csv,
        thermal_floor=reader.number("run.thermal_floor_v2_per_m2_hz", positive=True, optional=True),
        path=path,
    )
    logger.debug("parsed config %s: trap %s at %.4g rad/s", path, trap.label, trap.omega_x)
    return result


def _scaled(value, convert):
    return None if value is None else convert(value)


def _section(reader, section, build):
    """
    Build a record, turning its invariant violations into config errors on
    the section
    """
    try:
        return build()
    except ConfigError:
        raise
    except IonMotionError as e:
        raise ConfigError(f"{section}: {e}", key=section, line=reader.lines.get(section),
                          path=reader.path) from None
