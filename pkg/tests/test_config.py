import math

import pytest

from ionmotion.config import DEFAULT_SEED, parse_config, parse_shots
from ionmotion.dynamics import GRADUATED, UNIFORM
from ionmotion.errors import ConfigError
from ionmotion.physcore import angular_to_hz, hz_to_angular


def test_shipped_config(etc_dir):
    cfg = parse_config(str(etc_dir / "ionmotion.yaml"))
    assert f"{cfg.eta:.2f}" == "0.12"
    assert angular_to_hz(cfg.trap.omega_x) == pytest.approx(5.8e6)
    assert cfg.trap.electrode_distance == pytest.approx(150e-6)
    assert cfg.probe.follows_trap
    t_probe = cfg.probe.resolved(cfg.eta, cfg.geometry.omega0).t_probe
    assert t_probe == pytest.approx(math.pi / (cfg.eta * cfg.geometry.omega0))
    assert t_probe == pytest.approx(43e-6, rel=0.01)
    assert cfg.probe.shots == 200
    assert cfg.probe.detection_fidelity == 0.997
    assert cfg.noise.s0 == 2.735e-12
    assert cfg.delays[-1] == pytest.approx(0.04)


def test_linear_trap_config(etc_dir):
    cfg = parse_config(str(etc_dir / "cd111_linear.yaml"))
    assert cfg.eta == pytest.approx(0.171, abs=0.005)
    assert cfg.trap.label == "Cd linear"
    # noise referenced to the quadrupole trap
    assert cfg.noise.omega_ref == pytest.approx(hz_to_angular(5.8e6))
    assert cfg.noise.d_ref == pytest.approx(150e-6)
    assert cfg.schedule.cycles == 90


def test_defaults_fill_missing_keys(write_config):
    cfg = parse_config(write_config())
    assert cfg.seed == DEFAULT_SEED
    assert cfg.jobs == 1
    assert cfg.probe.t_probe == pytest.approx(43e-6)
    assert cfg.probe.detection_fidelity == 0.997
    assert cfg.schedule.kind == GRADUATED
    assert cfg.schedule.cycles == 40
    assert cfg.delays == pytest.approx((0.0, 0.01, 0.02, 0.03, 0.04))
    assert len(cfg.sweep_frequencies) == 6
    assert cfg.geometry.delta_k == pytest.approx(math.sqrt(2) * cfg.ion.wavenumber)
    assert cfg.survey_csv is None


def test_negative_frequency_names_key_and_line(write_config):
    path = write_config("trap:\n  label: x\n  freq_mhz: -5.8\n  distance_um: 150\n")
    with pytest.raises(ConfigError) as e:
        parse_config(path)
    assert e.value.key == "trap.freq_mhz"
    assert e.value.line == 3
    assert e.value.exit_code == 2
    assert str(e.value).startswith(f"{path}:3: trap.freq_mhz")


def test_unknown_key(write_config):
    path = write_config("trap:\n  freq_mhz: 5.8\n  distance_um: 150\n  colour: red\n")
    with pytest.raises(ConfigError, match="trap.colour") as e:
        parse_config(path)
    assert e.value.line == 4


def test_unknown_section(write_config):
    with pytest.raises(ConfigError, match="laser"):
        parse_config(write_config("laser:\n  power_mw: 3\n"))


def test_section_must_be_mapping(write_config):
    with pytest.raises(ConfigError) as e:
        parse_config(write_config("trap: 5.8\n"))
    assert e.value.key == "trap"


def test_missing_mandatory_value(write_config):
    with pytest.raises(ConfigError, match="trap.freq_mhz: missing mandatory value"):
        parse_config(write_config("trap:\n  distance_um: 150\n"))
    with pytest.raises(ConfigError):
        parse_config(write_config(""))


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="not found") as e:
        parse_config(str(tmp_path / "nowhere.yaml"))
    assert e.value.exit_code == 2


def test_yaml_error_has_line(write_config):
    with pytest.raises(ConfigError, match="YAML") as e:
        parse_config(write_config("trap:\n  freq_mhz: 5.8\n  distance_um: [150\n"))
    assert e.value.line is not None


def test_top_level_must_be_mapping(write_config):
    with pytest.raises(ConfigError, match="mapping"):
        parse_config(write_config("- 5.8\n- 150\n"))


@pytest.mark.parametrize("value", ["inf", ".inf"])
def test_infinite_shots(write_config, value):
    path = write_config(f"trap:\n  freq_mhz: 5.8\n  distance_um: 150\nprobe:\n  shots: {value}\n")
    cfg = parse_config(path)
    assert cfg.probe.shots == math.inf
    assert cfg.probe.noiseless


@pytest.mark.parametrize("value", ["0", "-3", "2.5", "many"])
def test_bad_shots(write_config, value):
    path = write_config(f"trap:\n  freq_mhz: 5.8\n  distance_um: 150\nprobe:\n  shots: {value}\n")
    with pytest.raises(ConfigError) as e:
        parse_config(path)
    assert e.value.key == "probe.shots"
    assert e.value.line == 5


def test_parse_shots():
    assert parse_shots("inf") == math.inf
    assert parse_shots("12") == 12
    assert parse_shots(7) == 7
    for bad in (0, True, 2.5, "x"):
        with pytest.raises(ValueError):
            parse_shots(bad)


def test_fidelity_range(write_config):
    with pytest.raises(ConfigError) as e:
        parse_config(write_config("trap:\n  freq_mhz: 5.8\n  distance_um: 150\nprobe:\n  fidelity: 0.4\n"))
    assert e.value.key == "probe.fidelity"


def test_delays_must_increase(write_config):
    text = "trap:\n  freq_mhz: 5.8\n  distance_um: 150\nrun:\n  delays_ms: [0, 5, 5]\n"
    with pytest.raises(ConfigError) as e:
        parse_config(write_config(text))
    assert e.value.key == "run.delays_ms"


def test_explicit_momentum_transfer(write_config):
    text = "trap:\n  freq_mhz: 5.8\n  distance_um: 150\nraman:\n  delta_k_per_um: 41.4\n"
    cfg = parse_config(write_config(text))
    assert cfg.geometry.delta_k == pytest.approx(41.4e6)


def test_beam_angle_range(write_config):
    text = "trap:\n  freq_mhz: 5.8\n  distance_um: 150\nraman:\n  beam_angle_deg: 200\n"
    with pytest.raises(ConfigError, match="beam_angle_deg"):
        parse_config(write_config(text))


def test_cooling_schedule_kinds(write_config):
    cfg = parse_config(write_config())
    graduated = cfg.cooling_schedule()
    assert graduated.kind == GRADUATED
    assert graduated.cycles == 40
    assert list(graduated.durations) == sorted(graduated.durations)

    text = ("trap:\n  freq_mhz: 5.8\n  distance_um: 150\n"
            "schedule:\n  kind: uniform\n  cycles: 5\n  pulse_us: 20\n")
    uniform = parse_config(write_config(text)).cooling_schedule()
    assert uniform.kind == UNIFORM
    assert uniform.durations == pytest.approx((20e-6,) * 5)


def test_recoil_repump_defaults_to_trap_eta(write_config):
    text = "trap:\n  freq_mhz: 5.8\n  distance_um: 150\nschedule:\n  repump: recoil\n"
    cfg = parse_config(write_config(text))
    assert cfg.schedule.repump.eta_repump == pytest.approx(cfg.eta)
    assert cfg.schedule.repump.kick_probability > 0


def test_overrides(write_config):
    cfg = parse_config(write_config())
    changed = cfg.with_overrides(seed=5, jobs=None, shots=math.inf, output_dir="out")
    assert changed.seed == 5
    assert changed.jobs == cfg.jobs
    assert changed.probe.noiseless
    assert changed.output_dir == "out"
    assert cfg.probe.shots == 2000


def test_unset_probe_time_follows_trap(write_config):
    text = "trap:\n  freq_mhz: 5.8\n  distance_um: 150\nprobe:\n  t_probe_us: ~\n"
    assert parse_config(write_config(text)).probe.follows_trap
    with pytest.raises(ConfigError) as e:
        parse_config(write_config("trap:\n  freq_mhz: 5.8\n  distance_um: 150\nprobe:\n  t_probe_us: 0\n"))
    assert e.value.key == "probe.t_probe_us"
