import json
import re

import numpy as np
import pytest

from ionmotion import datafiles
from ionmotion.commands.ionmotion import main


def run(config, *args, out=None):
    argv = ["--config", config]
    if out is not None:
        argv += ["--out", str(out)]
    return main(argv + list(args))


def test_derive(write_config, capsys):
    assert run(write_config(), "derive") == 0
    output = capsys.readouterr().out
    assert "Lamb-Dicke parameter eta          = 0.1161" in output
    assert "Doppler limit" in output
    assert "heating rate ndot" in output
    assert "probe pulse t_probe               = 43.00 us\n" in output


def test_derive_shipped_config(etc_dir, capsys):
    assert run(str(etc_dir / "cd111_linear.yaml"), "derive") == 0
    output = capsys.readouterr().out
    eta = re.search(r"Lamb-Dicke parameter eta\s+= ([0-9.]+)", output).group(1)
    assert float(eta) == pytest.approx(0.171, abs=0.002)
    assert "(ground-state pi time)" in output


def test_cool(write_config, tmp_path, capsys):
    assert run(write_config(), "--plot", "cool", out=tmp_path / "out") == 0
    nbar, ground = datafiles.read_trajectory(str(tmp_path / "out" / "cooling_trajectory.csv"))
    assert nbar.size == 41
    assert nbar[0] == pytest.approx(4.05, abs=0.01)
    assert nbar[-1] < 0.1
    assert ground[-1] > 0.9
    assert (tmp_path / "out" / "final_distribution.csv").exists()
    assert (tmp_path / "out" / "cooling_trajectory.gp").exists()
    assert "OK" in capsys.readouterr().out


def test_heat_is_reproducible(write_config, tmp_path):
    config = write_config()
    assert run(config, "heat", out=tmp_path / "a") == 0
    assert run(config, "heat", out=tmp_path / "b") == 0
    first = (tmp_path / "a" / "heating_series.csv").read_bytes()
    assert first == (tmp_path / "b" / "heating_series.csv").read_bytes()
    assert run(config, "--seed", "1", "heat", out=tmp_path / "c") == 0
    assert first != (tmp_path / "c" / "heating_series.csv").read_bytes()


def test_heat_does_not_depend_on_jobs(write_config, tmp_path):
    config = write_config()
    assert run(config, "--jobs", "1", "heat", out=tmp_path / "one") == 0
    assert run(config, "--jobs", "2", "heat", out=tmp_path / "two") == 0
    assert ((tmp_path / "one" / "heating_series.csv").read_bytes()
            == (tmp_path / "two" / "heating_series.csv").read_bytes())


def test_heat_without_noise_is_flat(write_config, minimal_config, tmp_path):
    config = write_config(minimal_config.replace("2.735e-12", "0.0"))
    assert run(config, "--shots", "inf", "heat", out=tmp_path) == 0
    series = datafiles.read_heating_series(str(tmp_path / "heating_series.csv"))
    assert np.all(series.nbar == series.nbar[0])
    assert np.all(series.sigma == 0.0)


def test_heat_json_format(write_config, tmp_path):
    assert run(write_config(), "--format", "json", "--shots", "inf", "heat", out=tmp_path) == 0
    series = datafiles.read_heating_series(str(tmp_path / "heating_series.json"))
    slope = np.polyfit(series.delays, series.nbar, 1)[0]
    assert slope == pytest.approx(24.8, rel=0.02)


def test_fit_heating_from_file(write_config, tmp_path, capsys):
    series_path = tmp_path / "measured.csv"
    series_path.write_text("delay_s,nbar,sigma\n0.0,0.03,0.01\n0.01,0.278,0.01\n"
                           "0.02,0.526,0.01\n0.03,0.774,0.01\n")
    assert run(write_config(), "fit-heating", "--series", str(series_path), "--weighted",
               out=tmp_path / "fit") == 0
    with open(tmp_path / "fit" / "heating_fit.json") as stream:
        fit = json.load(stream)
    assert fit["parameters"]["slope"] == pytest.approx(24.8)
    assert fit["weighted"]
    assert fit["units"]["slope"] == "quanta/s"
    assert "quanta/ms" in capsys.readouterr().out


def test_fit_heating_needs_three_points(write_config, tmp_path, capsys):
    series_path = tmp_path / "short.csv"
    series_path.write_text("delay_s,nbar,sigma\n0.0,0.03,0.01\n0.01,0.278,0.01\n")
    assert run(write_config(), "fit-heating", "--series", str(series_path), out=tmp_path) == 4
    assert "ionmotion failed" in capsys.readouterr().err


def test_sweep_frequency(write_config, tmp_path):
    assert run(write_config(), "--plot", "sweep-frequency", out=tmp_path) == 0
    with open(tmp_path / "sweep_fit.json") as stream:
        fit = json.load(stream)
    assert fit["parameters"]["exponent"] == pytest.approx(-2.4, abs=1e-6)
    assert fit["implied_noise_exponent"] == pytest.approx(-1.4, abs=1e-6)
    assert len(datafiles.read_sweep(str(tmp_path / "sweep.csv"))) == 6
    assert (tmp_path / "sweep.dat").exists()


@pytest.mark.slow
def test_measured_sweep_on_shipped_config(etc_dir, tmp_path):
    assert run(str(etc_dir / "ionmotion.yaml"), "--shots", "inf", "sweep-frequency", "--measured",
               out=tmp_path) == 0
    with open(tmp_path / "sweep_fit.json") as stream:
        fit = json.load(stream)
    assert fit["parameters"]["exponent"] == pytest.approx(-2.4, abs=0.15)
    assert all(p.heating_rate > 0 for p in datafiles.read_sweep(str(tmp_path / "sweep.csv")))


def test_survey_with_template(write_config, etc_dir, tmp_path):
    template = str(etc_dir / "survey_template.csv")
    assert run(write_config(), "survey", "--survey", template, out=tmp_path) == 0
    columns, rows = datafiles.read_table(str(tmp_path / "survey.csv"))
    assert len(rows) == 2
    assert float(rows[0][columns.index("s_e_v2_per_m2_hz")]) == pytest.approx(2.735e-12, rel=0.02)
    # two traps are not enough for a distance fit
    assert not (tmp_path / "survey_fit.json").exists()


def test_survey_distance_fit(write_config, minimal_config, tmp_path):
    survey_path = tmp_path / "survey_in.csv"
    survey_path.write_text("system,mass_amu,d_um,freq_mhz,ndot_quanta_per_s,source\n"
                           "a,40,50,1,1600,x\na,40,100,1,100,x\na,40,200,1,6.25,x\n")
    text = minimal_config + "  thermal_floor_v2_per_m2_hz: 1.0e-14\n"
    assert run(write_config(text), "survey", "--survey", str(survey_path), out=tmp_path) == 0
    with open(tmp_path / "survey_fit.json") as stream:
        fit = json.load(stream)
    assert fit["parameters"]["exponent"] == pytest.approx(-4.0)
    assert fit["heating_rate_fit"]["parameters"]["exponent"] == pytest.approx(-4.0)


def test_survey_without_file(write_config, tmp_path):
    assert run(write_config(), "survey", out=tmp_path) == 2


def test_spectrum_and_flop_of_thermal_state(write_config, tmp_path):
    config = write_config()
    assert run(config, "--shots", "inf", "spectrum", "--nbar", "1.0", out=tmp_path) == 0
    spectrum = datafiles.read_spectrum(str(tmp_path / "spectrum.csv"))
    assert spectrum.delta.size == 2 * 121
    assert np.all(spectrum.sigma == 0.0)
    assert run(config, "flop", "--nbar", "0.0", "--order", "1", out=tmp_path) == 0
    trace = datafiles.read_trace(str(tmp_path / "flop_trace.csv"), order=1)
    assert np.all(trace.p_bright <= 0.01)


def test_config_error_exit_code(write_config, capsys):
    config = write_config("trap:\n  freq_mhz: -5.8\n  distance_um: 150\n")
    assert run(config, "derive") == 2
    err = capsys.readouterr().err
    assert "ionmotion failed" in err
    assert "trap.freq_mhz" in err


def test_bad_jobs(write_config):
    assert run(write_config(), "--jobs", "0", "derive") == 2


def test_negative_seed(write_config, tmp_path, capsys):
    assert run(write_config(), "--seed", "-1", "heat", out=tmp_path) == 2
    assert "--seed" in capsys.readouterr().err


def test_unknown_command(write_config):
    with pytest.raises(SystemExit) as e:
        run(write_config(), "teleport")
    assert e.value.code == 2
