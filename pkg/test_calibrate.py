import json
import math
import os

import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.airside import load_lattice
from src.calibrate import (RunwayCalibrationTarget, TaxiCalibrationTarget, achievable_variance, calibrate,
                           fit_runway_bernoullis, fit_stop_probability, load_calibration_targets,
                           load_taxi_samples, runway_moments, simulate_runway_moments, write_config_fragment)
from src.errors import CalibrationError

REPO = os.path.dirname(os.path.abspath(__file__))


def minutes(steps, n=30):
    return TaxiCalibrationTarget(samples=(steps * 0.5,) * n)


def test_mean_at_deterministic_minimum_means_no_stops():
    fit = fit_stop_probability(minutes(10.0), path_length_m=3000.0, step_distance_m=300.0)
    assert fit.p_stop == 0.0
    assert fit.cells == 10


def test_closed_form_inversion():
    fit = fit_stop_probability(minutes(12.5), path_length_m=3000.0, step_distance_m=300.0)
    assert fit.p_stop == pytest.approx(0.2)
    assert fit.model_var_steps == pytest.approx(10 * 0.2 / 0.8 ** 2)


def test_mean_below_minimum_is_infeasible():
    with pytest.raises(CalibrationError, match="10 steps"):
        fit_stop_probability(minutes(9.0), path_length_m=3000.0, step_distance_m=300.0)


def test_too_few_samples():
    with pytest.raises(CalibrationError):
        TaxiCalibrationTarget(samples=(5.0,) * 10)


def runway_target(mean, variance):
    return RunwayCalibrationTarget(mean_rate=mean, std_rate=math.sqrt(variance))


def test_equal_root_pair():
    assert_allclose(fit_runway_bernoullis(runway_target(0.6, 0.42)), (0.3, 0.3), atol=1e-7)


def test_distinct_root_pair():
    assert_allclose(fit_runway_bernoullis(runway_target(1.0, 0.32)), (0.8, 0.2), atol=1e-9)


def test_unreachable_variance_reports_the_interval():
    with pytest.raises(CalibrationError, match="0.3200"):
        fit_runway_bernoullis(runway_target(0.4, 0.5))


def test_achievable_variance_bounds():
    assert_allclose(achievable_variance(0.4), (0.24, 0.32))
    assert_allclose(achievable_variance(1.5), (0.25, 0.375))


def test_runway_fit_round_trip():
    rng = np.random.default_rng(123)
    for _ in range(1000):
        p = np.sort(rng.random(2))[::-1]
        mean, var = runway_moments(p[0], p[1])
        fitted = fit_runway_bernoullis(RunwayCalibrationTarget(mean_rate=mean, std_rate=math.sqrt(var)))
        assert_allclose(fitted, p, atol=1e-9)


def test_runway_moments_monte_carlo():
    mean, var = simulate_runway_moments(0.3, 0.3, 1_000_000, np.random.default_rng(0))
    assert abs(mean - 0.6) < 3 * math.sqrt(0.42 / 1_000_000)
    assert_allclose(var, 0.42, atol=0.003)


def test_shipped_targets_calibrate(tmp_path):
    targets = load_calibration_targets(os.path.join(REPO, "calibration_targets.json"))
    samples = load_taxi_samples(os.path.join(REPO, targets["taxi"]["samples_path"]))
    graph = load_lattice(os.path.join(REPO, "data", "logan_runway9.lattice"))

    fragment = calibrate(targets, graph, samples)
    assert 0.0 <= fragment["taxi"]["p_stop"] < 1.0
    rw = fragment["runways"][0]
    assert_allclose((rw["p1"], rw["p2"]), (0.2, 0.1), atol=1e-6)

    out = tmp_path / "fragment.json"
    write_config_fragment(fragment, out)
    assert json.loads(out.read_text()) == fragment


def test_bad_sample_line(tmp_path):
    path = tmp_path / "samples.txt"
    path.write_text("6.5\nfast\n")
    with pytest.raises(CalibrationError, match=":2:"):
        load_taxi_samples(path)


def test_malformed_targets_file(tmp_path):
    path = tmp_path / "targets.json"
    path.write_text("{\"taxi\": ")
    with pytest.raises(CalibrationError, match="invalid JSON"):
        load_calibration_targets(path)


def test_targets_missing_keys(tmp_path):
    path = tmp_path / "targets.json"
    path.write_text(json.dumps({"taxi": {"reference_gate": 22, "threshold": 9, "step_distance_m": 200.0},
                                "runways": []}))
    with pytest.raises(CalibrationError, match="samples_path"):
        load_calibration_targets(path)

    path.write_text(json.dumps({"taxi": {"samples_path": "x.txt", "reference_gate": 22, "threshold": 9,
                                         "step_distance_m": 200.0},
                                "runways": [{"id": "9", "threshold": 9, "mean_rate": 0.3}]}))
    with pytest.raises(CalibrationError, match="runway target 0 is missing std_rate"):
        load_calibration_targets(path)
