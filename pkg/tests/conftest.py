from pathlib import Path

import pytest

from ionmotion.physcore import CD111, LINEAR_TRAP, QUADRUPOLE_TRAP, standard_geometry

ETC = Path(__file__).resolve().parent.parent / "etc"


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: Monte Carlo checks over many seeds and full frequency sweeps")


@pytest.fixture
def ion():
    return CD111


@pytest.fixture
def geometry():
    return standard_geometry()


@pytest.fixture
def quadrupole():
    return QUADRUPOLE_TRAP


@pytest.fixture
def linear():
    return LINEAR_TRAP


@pytest.fixture
def etc_dir():
    return ETC


MINIMAL_CONFIG = """\
trap:
  label: test trap
  freq_mhz: 5.8
  distance_um: 150.0
noise:
  s0_v2_per_m2_hz: 2.735e-12
probe:
  # pi time of the first sidebands from the ground state
  t_probe_us: 43.0
  shots: 2000
run:
  delays_ms: [0, 10, 20, 30, 40]
"""


@pytest.fixture
def write_config(tmp_path):
    """
    Write a YAML config into tmp_path and return its path
    """
    def write(text=MINIMAL_CONFIG, name="ionmotion.yaml"):
        path = tmp_path / name
        path.write_text(text)
        return str(path)
    return write



@pytest.fixture
def minimal_config():
    return MINIMAL_CONFIG
