#!/usr/bin/env python3

"""
Simulate cooling, heating and sideband thermometry of a trapped ion's motion
and run the heating-rate analysis chain

config usually in /etc/ionmotion.yaml
"""


import argparse
import logging
import math
import os
import sys

from .. import datafiles
from ..analysis import (fit_distance_scaling, fit_heating_rate, fit_power_law,
                        implied_noise_exponent, survey_noise_inference, thermal_floor_ratio)
from ..config import DEFAULT_CONFIG_PATH, parse_config, parse_shots
from ..dynamics import (cool_from_doppler, doppler_cool, run_heating_experiment, sweep_heating_rates,
                        trace_cooling)
from ..errors import ConfigError, IonMotionError
from ..fockstate import mean_occupation, sideband_label, thermal_distribution
from ..physcore import angular_to_hz, derive, evaluate_noise, noise_from_heating_rate
from ..spectroscopy import rabi_flop_trace, synthesize_spectrum
from ..util import as_generator

logger = logging.getLogger("ionmotion")


def build_parser():
    cli = argparse.ArgumentParser(prog="ionmotion")
    cli.add_argument("--config", default=DEFAULT_CONFIG_PATH, help="ionmotion config file location")
    cli.add_argument("--seed", type=int, default=None, help="Seed for all random draws (overrides run.seed)")
    cli.add_argument("--jobs", type=int, default=None,
                     help="Maximum number of delays or sweep points evaluated concurrently")
    cli.add_argument("--shots", type=_shots_arg, default=None,
                     help="Shots per probe point, or 'inf' for exact probabilities")
    cli.add_argument("--out", default=None, help="Output directory (overrides run.output_dir)")
    cli.add_argument("--format", choices=datafiles.FORMATS, default=datafiles.CSV, dest="fmt",
                     help="Table format of the written results")
    cli.add_argument("--plot", action="store_true",
                     help="Additionally write gnuplot column files and scripts")
    cli.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    subp = cli.add_subparsers(dest="mode", required=True)

    for name, text in (("cool", "Doppler cooling followed by the Raman cooling schedule; writes the "
                                "n̄ trajectory and the final distribution"),
                       ("spectrum", "Raman spectrum around the carrier of the cooled (or a thermal) state"),
                       ("flop", "Sideband Rabi-flopping trace of the cooled (or a thermal) state")):
        sub = subp.add_parser(name, help=text)
        if name != "cool":
            sub.add_argument("--nbar", type=float, default=None,
                             help="Probe a thermal state of this mean occupation instead of the cooled one")
        if name == "flop":
            sub.add_argument("--order", type=int, default=None, choices=(-2, -1, 0, 1, 2),
                             help="Sideband order (overrides probe.flop_order)")

    subp.add_parser("heat", help="Synthetic heating-rate measurement over run.delays_ms")
    fitcli = subp.add_parser("fit-heating", help="Linear heating-rate fit of an imported or generated series")
    fitcli.add_argument("--series", default=None, help="Heating series file written by 'heat'")
    fitcli.add_argument("--weighted", action="store_true", help="Inverse-variance weighted fit")

    sweepcli = subp.add_parser("sweep-frequency", help="Heating rate vs. trap frequency and its power law")
    sweepcli.add_argument("--measured", action="store_true",
                          help="Run a synthetic heating experiment per frequency instead of "
                               "evaluating the noise model")

    surveycli = subp.add_parser("survey", help="Noise spectral density inferred from a heating-rate survey")
    surveycli.add_argument("--survey", default=None, help="Survey CSV (overrides run.survey_csv)")

    subp.add_parser("derive", help="Print the closed-form quantities of the configuration")
    return cli


def _shots_arg(value):
    try:
        return parse_shots(value)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))


def main(argv=None):
    """
    Entry point for ionmotion
    """
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(args.config)
        if args.jobs is not None and args.jobs < 1:
            raise ConfigError(f"--jobs must be at least 1, got {args.jobs}", key="run.jobs")
        if args.seed is not None and args.seed < 0:
            raise ConfigError(f"--seed must be non-negative, got {args.seed}", key="run.seed")
        cfg = cfg.with_overrides(seed=args.seed, jobs=args.jobs, shots=args.shots, output_dir=args.out)
        written = dispatch(args, cfg)
    except IonMotionError as e:
        print(f"ionmotion failed: {e}!", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(f"ionmotion failed: {e}!", file=sys.stderr)
        return 3

    for path in written:
        print(f"OK     {path}")
    return 0


def dispatch(args, cfg):
    """
    Run one command; returns the paths of all files written
    """
    if args.mode == "derive":
        print_derived(cfg)
        return []

    os.makedirs(cfg.output_dir, exist_ok=True)
    outputs = Outputs(cfg.output_dir, args.fmt, args.plot)

    if args.mode == "cool":
        cool(cfg, outputs)
    elif args.mode == "spectrum":
        spectrum(cfg, outputs, nbar=args.nbar)
    elif args.mode == "flop":
        flop(cfg, outputs, nbar=args.nbar, order=args.order)
    elif args.mode == "heat":
        heat(cfg, outputs)
    elif args.mode == "fit-heating":
        fit_heating(cfg, outputs, series_path=args.series, weighted=args.weighted)
    elif args.mode == "sweep-frequency":
        sweep_frequency(cfg, outputs, measured=args.measured)
    elif args.mode == "survey":
        survey(cfg, outputs, survey_path=args.survey or cfg.survey_csv)
    else:
        raise Exception("Unknown program mode")
    return outputs.written


class Outputs:
    """
    Collects the files one command writes
    """

    def __init__(self, directory, fmt, plot):
        self.directory = directory
        self.fmt = fmt
        self.plot = plot
        self.written = []

    def path(self, name, ext=None):
        return os.path.join(self.directory, f"{name}.{ext or self.fmt}")

    def table(self, name, writer, *items):
        self.written.append(writer(self.path(name), *items, fmt=self.fmt))

    def json(self, name, fit, extra=None):
        self.written.append(datafiles.write_fit(self.path(name, datafiles.JSON), fit, extra))

    def plot_data(self, name, columns, rows, **kwargs):
        if self.plot:
            self.written.extend(datafiles.write_plot(os.path.join(self.directory, name), columns,
                                                     list(rows), **kwargs))


def _probed_state(cfg, nbar):
    if nbar is not None:
        return thermal_distribution(nbar)
    dist, _ = cool_from_doppler(cfg.ion, cfg.trap, cfg.geometry, cfg.cooling_schedule(), cfg.mode)
    return dist


def cool(cfg, outputs):
    schedule = cfg.cooling_schedule()
    start = doppler_cool(cfg.ion, cfg.trap.omega_x)
    print(f"Cooling from the Doppler limit n̄ = {mean_occupation(start):.4g} with "
          f"{schedule.cycles} {schedule.kind} cycles (eta = {cfg.eta:.4f})...")
    dist, nbar, ground = trace_cooling(start, schedule, cfg.eta, cfg.geometry.omega0, cfg.mode)
    print(f"Final n̄ = {nbar[-1]:.4g}, ground state population {100 * ground[-1]:.1f}%")
    outputs.table("cooling_trajectory", datafiles.write_trajectory, nbar, ground)
    outputs.table("final_distribution", datafiles.write_distribution, dist)
    outputs.plot_data("cooling_trajectory", ("cycle", "nbar"), enumerate(nbar), title="Raman cooling")


def spectrum(cfg, outputs, nbar=None):
    dist = _probed_state(cfg, nbar)
    result = synthesize_spectrum(dist, cfg.eta, cfg.geometry.omega0, cfg.probe, cfg.trap.omega_x,
                                 mode=cfg.mode, rng=as_generator(cfg.seed))
    outputs.table("spectrum", datafiles.write_spectrum, result)
    outputs.plot_data("spectrum", datafiles.SPECTRUM_COLUMNS,
                      zip(angular_to_hz(result.delta).tolist(), result.p_bright.tolist(),
                          result.sigma.tolist()),
                      title=f"Raman spectrum, n̄ = {mean_occupation(dist):.3g}", with_errors=True)


def flop(cfg, outputs, nbar=None, order=None):
    order = cfg.flop_order if order is None else order
    dist = _probed_state(cfg, nbar)
    trace = rabi_flop_trace(dist, order, cfg.eta, cfg.geometry.omega0, cfg.probe.flop_times, cfg.mode,
                            cfg.probe.shots, cfg.probe.detection_fidelity, as_generator(cfg.seed))
    outputs.table("flop_trace", datafiles.write_trace, trace)
    outputs.plot_data("flop_trace", datafiles.TRACE_COLUMNS,
                      zip((trace.times * 1e6).tolist(), trace.p_bright.tolist(), trace.sigma.tolist()),
                      title=f"{sideband_label(order)} sideband flopping", with_errors=True)


def _heating_series(cfg):
    if not cfg.delays:
        raise ConfigError("run.delays_ms must list at least one delay", key="run.delays_ms", path=cfg.path)
    return run_heating_experiment(cfg.ion, cfg.trap, cfg.geometry, cfg.noise, cfg.cooling_schedule(),
                                  cfg.probe, cfg.delays, seed=cfg.seed, method=cfg.method,
                                  mode=cfg.mode, jobs=cfg.jobs)


def heat(cfg, outputs):
    series = _heating_series(cfg)
    outputs.table("heating_series", datafiles.write_heating_series, series)
    outputs.plot_data("heating_series", ("delay_ms", "nbar", "sigma"),
                      [(d * 1e3, n, s) for d, n, s in series.points()],
                      title=f"Heating at {angular_to_hz(cfg.trap.omega_x) / 1e6:.3g} MHz", with_errors=True)


def fit_heating(cfg, outputs, series_path=None, weighted=False):
    if series_path:
        series = datafiles.read_heating_series(series_path)
    else:
        series = _heating_series(cfg)
        outputs.table("heating_series", datafiles.write_heating_series, series)
    fit = fit_heating_rate(series, weighted=weighted)
    slope, sigma = fit.value("slope"), fit.uncertainty("slope")
    print(f"Heating rate: {slope * 1e-3:.4g}({sigma * 1e-3:.2g}) quanta/ms, "
          f"intercept n̄(0) = {fit.value('intercept'):.3g}")
    print(f"Inferred S_E = {noise_from_heating_rate(max(slope, 0.0), cfg.ion, cfg.trap.omega_x):.4g} (V/m)^2/Hz")
    outputs.json("heating_fit", fit, {"units": {"slope": "quanta/s", "intercept": "quanta"}})


def sweep_frequency(cfg, outputs, measured=False):
    if len(cfg.sweep_frequencies) < 3:
        raise ConfigError("run.sweep_freqs_mhz needs at least three frequencies",
                          key="run.sweep_freqs_mhz", path=cfg.path)
    if measured:
        points = sweep_heating_rates(cfg.ion, cfg.trap, cfg.geometry, cfg.noise, cfg.sweep_frequencies,
                                     schedule_for=cfg.cooling_schedule, probe=cfg.probe,
                                     delays=cfg.delays, seed=cfg.seed, method=cfg.method,
                                     mode=cfg.mode, jobs=cfg.jobs)
    else:
        points = sweep_heating_rates(cfg.ion, cfg.trap, cfg.geometry, cfg.noise, cfg.sweep_frequencies)
    sigmas = [p.sigma for p in points] if all(p.sigma > 0 for p in points) else None
    fit = fit_power_law([p.omega_x for p in points], [p.heating_rate for p in points], sigmas)
    exponent = fit.value("exponent")
    print(f"Heating rate scales as omega_x^{exponent:.4g}({fit.uncertainty('exponent'):.2g}); "
          f"implied S_E exponent {implied_noise_exponent(exponent):.4g}")
    outputs.table("sweep", datafiles.write_sweep, points)
    outputs.json("sweep_fit", fit, {"implied_noise_exponent": implied_noise_exponent(exponent)})
    outputs.plot_data("sweep", datafiles.SWEEP_COLUMNS,
                      [(angular_to_hz(p.omega_x) / 1e6, p.heating_rate, p.sigma) for p in points],
                      title="Heating rate vs. trap frequency", logscale=True)


def survey(cfg, outputs, survey_path=None):
    if not survey_path:
        raise ConfigError("no survey file given (--survey or run.survey_csv)", key="run.survey_csv",
                          path=cfg.path)
    rows = survey_noise_inference(datafiles.read_survey(survey_path))
    print("Noise spectral density by electrode distance:")
    for row in rows:
        print(f"\t{row.system_label:<24} d = {row.electrode_distance * 1e6:7.1f} um  "
              f"S_E = {row.s_e:.3g} (V/m)^2/Hz")
    outputs.table("survey", datafiles.write_survey_table, rows)
    if len(rows) >= 3:
        s_e_fit = fit_distance_scaling(rows, "s_e")
        rate_fit = fit_distance_scaling(rows, "heating_rate")
        print(f"S_E scales as d^{s_e_fit.value('exponent'):.3g}({s_e_fit.uncertainty('exponent'):.2g})")
        outputs.json("survey_fit", s_e_fit, {"heating_rate_fit": rate_fit.to_dict()})
    else:
        logger.warning("fewer than three survey rows; skipping the distance fit")
    if cfg.thermal_floor is not None:
        observed = evaluate_noise(cfg.noise, cfg.trap.omega_x, cfg.trap.electrode_distance)
        print(f"Configured trap noise is {thermal_floor_ratio(observed, cfg.thermal_floor):.3g} "
              "times the assumed thermal floor")
    outputs.plot_data("survey", ("d_um", "s_e_v2_per_m2_hz"),
                      [(r.electrode_distance * 1e6, r.s_e) for r in rows],
                      title="Electric field noise vs. electrode distance", logscale=True)


def print_derived(cfg):
    q = derive(cfg.ion, cfg.geometry, cfg.trap, cfg.noise)
    label = cfg.trap.label or "trap"
    print(f"{cfg.ion.name} in {label} at omega_x/2pi = {angular_to_hz(cfg.trap.omega_x) / 1e6:.4g} MHz, "
          f"d = {cfg.trap.electrode_distance * 1e6:.4g} um:")
    print(f"\tLamb-Dicke parameter eta          = {q.eta:.4f}")
    print(f"\trecoil frequency omega_R/2pi      = {angular_to_hz(q.recoil_frequency) / 1e3:.2f} kHz")
    print(f"\tDoppler limit n̄_D                 = {q.doppler_nbar:.3f}")
    print(f"\tcooling threshold /2pi            = {angular_to_hz(q.cooling_threshold) / 1e6:.3f} MHz")
    print(f"\teta^2 n̄_D                         = {q.lamb_dicke_factor:.3f}")
    print(f"\tsideband Rabi eta Omega0/2pi      = {angular_to_hz(q.sideband_rabi) / 1e3:.2f} kHz")
    t_probe = cfg.probe.resolved(cfg.eta, cfg.geometry.omega0, cfg.mode).t_probe
    print(f"\tprobe pulse t_probe               = {t_probe * 1e6:.2f} us"
          f"{' (ground-state pi time)' if cfg.probe.follows_trap else ''}")
    if not math.isnan(q.s_e):
        print(f"\tnoise S_E(omega_x, d)             = {q.s_e:.4g} (V/m)^2/Hz")
        print(f"\theating rate ndot                 = {q.heating_rate:.4g} quanta/s "
              f"({q.heating_rate * 1e-3:.4g} quanta/ms)")
