"""
Import and export of result tables.

Tables are written as CSV (header row, one row per point) or JSON
({"columns": [...], "rows": [[...], ...]}). Floats are written with repr, so
SI columns read back bit-for-bit; columns converted to MHz/kHz/us for
readability round-trip to within a few ulp.

Plot data goes to a whitespace separated .dat file plus a gnuplot .gp
sidecar describing its columns.
"""

import csv
import io
import json
import logging
import os
from typing import List, Sequence

import numpy as np

from .analysis import FitResult, SurveyRecord, SurveyRow
from .dynamics import HeatingSeries, SweepPoint
from .errors import ConfigError, ContractError
from .fockstate import PopulationDistribution
from .physcore import AMU, TWO_PI, angular_to_hz, hz_to_angular
from .spectroscopy import FlopTrace, Spectrum

logger = logging.getLogger(__name__)

CSV = "csv"
JSON = "json"
FORMATS = (CSV, JSON)

DISTRIBUTION_COLUMNS = ("n", "probability")
TRAJECTORY_COLUMNS = ("cycle", "nbar", "ground_state_fraction")
HEATING_COLUMNS = ("delay_s", "nbar", "sigma")
SPECTRUM_COLUMNS = ("delta_hz_from_carrier", "p_bright", "sigma")
TRACE_COLUMNS = ("t_us", "p_bright", "sigma")
SWEEP_COLUMNS = ("freq_mhz", "ndot_quanta_per_s", "sigma")
SURVEY_OUT_COLUMNS = ("system", "d_um", "freq_mhz", "ndot_quanta_per_s", "s_e_v2_per_m2_hz", "source")

SURVEY_COLUMNS = ("system", "mass_amu", "d_um", "freq_mhz", "ndot_quanta_per_s", "source")
# heating-rate column name -> factor to quanta/s
SURVEY_RATE_UNITS = {"ndot_quanta_per_s": 1.0, "ndot_quanta_per_ms": 1e3}


def format_value(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _json_value(value):
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    return value


def format_from_path(path, default=CSV):
    ext = os.path.splitext(path)[1].lower().lstrip(".")
    return ext if ext in FORMATS else default


def write_table(path, columns: Sequence[str], rows, fmt=CSV):
    """
    Write a table in one go; the file either appears complete or not at all
    """
    if fmt not in FORMATS:
        raise ContractError(f"unknown table format {fmt!r}")
    rows = [list(row) for row in rows]
    if any(len(row) != len(columns) for row in rows):
        raise ContractError(f"every row of {path} needs {len(columns)} values")
    if fmt == CSV:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(columns)
        writer.writerows([format_value(v) for v in row] for row in rows)
        text = buffer.getvalue()
    else:
        text = json.dumps({"columns": list(columns),
                           "rows": [[_json_value(v) for v in row] for row in rows]}, indent=2) + "\n"
    _write_atomically(path, text)
    logger.debug("wrote %d rows to %s", len(rows), path)
    return path


def _write_atomically(path, text):
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="") as stream:
        stream.write(text)
    os.replace(tmp, path)


def read_table(path, fmt=None):
    """
    Columns and rows of a table written by write_table. CSV cells stay
    strings; JSON cells keep their JSON types.
    """
    fmt = fmt or format_from_path(path)
    try:
        with open(path, "r", newline="") as stream:
            if fmt == JSON:
                data = json.load(stream)
                return list(data["columns"]), [list(row) for row in data["rows"]]
            rows = [row for row in csv.reader(stream) if row]
    except FileNotFoundError:
        raise ConfigError("data file not found", path=path) from None
    except (ValueError, KeyError, TypeError) as e:
        raise ConfigError(f"malformed {fmt} table: {e}", path=path) from None
    if not rows:
        raise ConfigError("table has no header row", path=path)
    return [c.strip() for c in rows[0]], rows[1:]


def _columns_of(path, expected, fmt=None):
    columns, rows = read_table(path, fmt)
    missing = [c for c in expected if c not in columns]
    if missing:
        raise ConfigError(f"missing columns: {', '.join(missing)}", path=path)
    index = [columns.index(c) for c in expected]
    try:
        return [[float(row[i]) for row in rows] for i in index]
    except (ValueError, TypeError, IndexError) as e:
        raise ConfigError(f"malformed numeric cell: {e}", path=path) from None


# distributions and cooling trajectories

def write_distribution(path, dist: PopulationDistribution, fmt=CSV):
    return write_table(path, DISTRIBUTION_COLUMNS,
                       zip(dist.levels.tolist(), dist.probabilities.tolist()), fmt)


def read_distribution(path, fmt=None):
    _, probs = _columns_of(path, DISTRIBUTION_COLUMNS, fmt)
    return PopulationDistribution(probs)


def write_trajectory(path, trajectory, ground_fractions, fmt=CSV):
    return write_table(path, TRAJECTORY_COLUMNS,
                       zip(range(len(trajectory)), list(map(float, trajectory)),
                           list(map(float, ground_fractions))), fmt)


def read_trajectory(path, fmt=None):
    _, nbar, ground = _columns_of(path, TRAJECTORY_COLUMNS, fmt)
    return np.array(nbar), np.array(ground)


# heating series

def write_heating_series(path, series: HeatingSeries, fmt=CSV):
    return write_table(path, HEATING_COLUMNS, series.points(), fmt)


def read_heating_series(path, fmt=None):
    delays, nbar, sigma = _columns_of(path, HEATING_COLUMNS, fmt)
    try:
        return HeatingSeries(delays=delays, nbar=nbar, sigma=sigma)
    except ContractError as e:
        raise ConfigError(str(e), path=path) from None


# spectra and flopping traces

def write_spectrum(path, spectrum: Spectrum, fmt=CSV):
    return write_table(path, SPECTRUM_COLUMNS,
                       zip(angular_to_hz(spectrum.delta).tolist(), spectrum.p_bright.tolist(),
                           spectrum.sigma.tolist()), fmt)


def read_spectrum(path, fmt=None):
    delta_hz, p_bright, sigma = _columns_of(path, SPECTRUM_COLUMNS, fmt)
    return Spectrum(delta=hz_to_angular(delta_hz), p_bright=p_bright, sigma=sigma)


def write_trace(path, trace: FlopTrace, fmt=CSV):
    return write_table(path, TRACE_COLUMNS,
                       zip((trace.times * 1e6).tolist(), trace.p_bright.tolist(),
                           trace.sigma.tolist()), fmt)


def read_trace(path, order, fmt=None):
    t_us, p_bright, sigma = _columns_of(path, TRACE_COLUMNS, fmt)
    return FlopTrace(order=order, times=np.array(t_us) * 1e-6, p_bright=np.array(p_bright),
                     sigma=np.array(sigma))


# frequency sweeps

def write_sweep(path, points: Sequence[SweepPoint], fmt=CSV):
    return write_table(path, SWEEP_COLUMNS,
                       [(angular_to_hz(p.omega_x) / 1e6, p.heating_rate, p.sigma) for p in points], fmt)


def read_sweep(path, fmt=None):
    freqs, rates, sigmas = _columns_of(path, SWEEP_COLUMNS, fmt)
    return [SweepPoint(hz_to_angular(f * 1e6), r, s) for f, r, s in zip(freqs, rates, sigmas)]


# fits

def write_fit(path, fit: FitResult, extra=None):
    """
    Fit result as JSON with sorted keys; `extra` adds top-level entries
    """
    document = fit.to_dict()
    if extra:
        document.update(extra)
    _write_atomically(path, json.dumps(document, indent=2, sort_keys=True) + "\n")
    return path


def read_fit(path):
    with open(path, "r") as stream:
        data = json.load(stream)
    return FitResult(parameters=data["parameters"], covariance=data["covariance"],
                     residual_norm=data["residual_norm"], weighted=data.get("weighted", False),
                     residuals=data.get("residuals"))


# cross-trap survey

def read_survey(path) -> List[SurveyRecord]:
    """
    Survey CSV with the header system,mass_amu,d_um,freq_mhz,<rate>,source
    where <rate> declares its unit: ndot_quanta_per_s or ndot_quanta_per_ms
    """
    columns, rows = read_table(path, CSV)
    rate_columns = [c for c in columns if c in SURVEY_RATE_UNITS]
    if len(rate_columns) != 1:
        raise ConfigError("survey needs exactly one heating-rate column "
                          f"({' or '.join(SURVEY_RATE_UNITS)})", path=path)
    rate_column = rate_columns[0]
    expected = [c if c != "ndot_quanta_per_s" else rate_column for c in SURVEY_COLUMNS]
    missing = [c for c in expected if c not in columns]
    if missing:
        raise ConfigError(f"missing survey columns: {', '.join(missing)}", path=path)
    index = {c: columns.index(c) for c in expected}
    scale = SURVEY_RATE_UNITS[rate_column]
    records = []
    for line, row in enumerate(rows, start=2):
        try:
            records.append(SurveyRecord(
                system_label=row[index["system"]].strip(),
                ion_mass=float(row[index["mass_amu"]]) * AMU,
                electrode_distance=float(row[index["d_um"]]) * 1e-6,
                trap_frequency=TWO_PI * float(row[index["freq_mhz"]]) * 1e6,
                heating_rate=float(row[index[rate_column]]) * scale,
                source_tag=row[index["source"]].strip(),
            ))
        except (ValueError, IndexError, ContractError) as e:
            raise ConfigError(f"bad survey row: {e}", line=line, path=path) from None
    return records


def write_survey_table(path, rows: Sequence[SurveyRow], fmt=CSV):
    return write_table(path, SURVEY_OUT_COLUMNS, [
        (r.system_label, r.electrode_distance * 1e6, r.trap_frequency / TWO_PI / 1e6,
         r.heating_rate, r.s_e, r.source_tag)
        for r in rows
    ], fmt)


def read_survey_table(path, fmt=None) -> List[SurveyRow]:
    """
    Inferred-noise rows as written by write_survey_table
    """
    fmt = fmt or format_from_path(path)
    columns, rows = read_table(path, fmt)
    missing = [c for c in SURVEY_OUT_COLUMNS if c not in columns]
    if missing:
        raise ConfigError(f"missing columns: {', '.join(missing)}", path=path)
    index = [columns.index(c) for c in SURVEY_OUT_COLUMNS]
    result = []
    for line, row in enumerate(rows, start=2):
        try:
            label, d_um, freq_mhz, rate, s_e, source = (row[i] for i in index)
            result.append(SurveyRow(
                system_label=str(label).strip(),
                electrode_distance=float(d_um) * 1e-6,
                trap_frequency=hz_to_angular(float(freq_mhz) * 1e6),
                heating_rate=float(rate),
                s_e=float(s_e),
                source_tag=str(source).strip(),
            ))
        except (ValueError, TypeError, IndexError) as e:
            raise ConfigError(f"malformed survey table row: {e}", line=line if fmt == CSV else None,
                              path=path) from None
    return result


# plot data

def write_plot(base, columns: Sequence[str], rows, title="", logscale=False, with_errors=False):
    """
    <base>.dat column file and a <base>.gp gnuplot script plotting column 2
    (with column 3 as error bars if requested) against column 1
    """
    dat_path = f"{base}.dat"
    gp_path = f"{base}.gp"
    lines = ["# " + " ".join(columns)]
    lines.extend(" ".join(format_value(v) for v in row) for row in rows)
    _write_atomically(dat_path, "\n".join(lines) + "\n")
    style = "using 1:2:3 with yerrorbars" if with_errors else "using 1:2 with linespoints"
    script = [
        f"set title {json.dumps(title)}",
        f"set xlabel {json.dumps(columns[0])}",
        f"set ylabel {json.dumps(columns[1])}",
    ]
    if logscale:
        script.append("set logscale xy")
    script.append(f"plot {json.dumps(os.path.basename(dat_path))} {style} title {json.dumps(columns[1])}")
    _write_atomically(gp_path, "\n".join(script) + "\n")
    return [dat_path, gp_path]


def read_plot_data(path):
    """
    Numeric rows of a .dat file; comment lines are skipped
    """
    with open(path, "r") as stream:
        rows = [line.split() for line in stream if line.strip() and not line.startswith("#")]
    return np.array([[float(v) for v in row] for row in rows])
