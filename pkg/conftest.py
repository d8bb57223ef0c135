import json
import os
import sys

import pytest

sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from src.config_loader import load_sim_config
from src.traffic import CLASS_CODES, DEFAULT_FLEET_MIX, Schedule, ScheduledFlight

# threshold 0; gates 2 and 3 are 800 m out (4 moves of 200 m), gate 4 is 150 m out (1 move)
SMALL_LATTICE = """\
node 0    0.0    0.0 threshold
node 1  400.0    0.0
node 2  800.0    0.0 gate
node 3  400.0  400.0 gate
node 4    0.0  150.0 gate
edge 0 1
edge 1 2
edge 1 3
edge 0 4
"""


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow Monte Carlo checks")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long Monte Carlo check, needs --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def base_config_dict():
    return {
        "lattice": "small.lattice",
        "step_seconds": 30,
        "cvq": {"load_limit": 9},
        "policy": {"alpha": 0.0, "w1": 4.0, "w2": 1.0},
        "traffic": {
            "mode": "top5",
            "n_flights": 40,
            "rate_profile": [3.0, 2.0] + [0.0] * 22,
        },
        "runways": [{"id": "9", "threshold": 0, "p1": 0.5, "p2": 0.3}],
        "taxi": {"p_stop": 0.25, "step_distance_m": 200.0},
        "seeds": {"master_seed": 2006, "n_days": 2},
        "sweep": {"alpha_start": 0.0, "alpha_stop": 1.0, "alpha_step": 0.05},
        "simulation": {"max_extension_steps": 2880},
    }


@pytest.fixture
def write_config(tmp_path):
    """Write the small test config (with section overrides) and return its path."""
    (tmp_path / "small.lattice").write_text(SMALL_LATTICE)

    def _write(**sections):
        config = base_config_dict()
        for name, value in sections.items():
            if isinstance(value, dict) and isinstance(config.get(name), dict):
                config[name] = dict(config[name], **value)
            else:
                config[name] = value
        path = tmp_path / "cvq_config.json"
        path.write_text(json.dumps(config, indent=4))
        return str(path)

    return _write


@pytest.fixture
def make_config(write_config):
    def _make(**sections):
        return load_sim_config(write_config(**sections))
    return _make


@pytest.fixture
def deterministic_config(make_config):
    """No taxi stops and two take-offs every step."""
    return make_config(taxi={"p_stop": 0.0}, runways=[{"id": "9", "threshold": 0, "p1": 1.0, "p2": 1.0}])


def make_schedule(*entries):
    """Entries of (id, airline, class code, gate, ready step)."""
    flights = []
    for flight_id, airline, code, gate, ready_step in entries:
        weight_class = CLASS_CODES[code]
        flights.append(ScheduledFlight(id=flight_id, airline=airline, weight_class=weight_class,
                                       passengers=DEFAULT_FLEET_MIX.seats(weight_class),
                                       gate=gate, ready_step=ready_step))
    return Schedule(flights=tuple(sorted(flights, key=lambda f: f.ready_step)))
