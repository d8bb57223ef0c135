import logging
from collections import Counter

import numpy as np
import pytest
from scipy.stats import chisquare

from src.errors import ConfigError, ScheduleError
from src.traffic import (AIRLINE_CODES, DEFAULT_FLEET_MIX, WEIGHT_CLASSES, FleetMix, load_custom_distribution,
                         load_schedule, make_airline_distribution, minute_to_step, save_schedule, synth_schedule)

FLAT_PROFILE = [1.0] * 24


def write(tmp_path, text, name="day.sched"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_airline_registry():
    assert AIRLINE_CODES[0] == "AA"
    assert AIRLINE_CODES[-1] == "CP"
    assert len(AIRLINE_CODES) == 68


def test_monopoly():
    dist = make_airline_distribution("monopoly")
    assert dist.shares == (("AA", 1.0),)


def test_top10_renormalises_proportionally():
    dist = make_airline_distribution("top10")
    assert len(dist.airlines) == 10
    assert dist.share_of("AA") == pytest.approx(0.1060 / 0.7417, abs=1e-4)
    assert sum(share for _, share in dist.shares) == pytest.approx(1.0, abs=1e-9)


def test_top5_sums_to_one():
    dist = make_airline_distribution("top5")
    assert dist.airlines == ["AA", "AB", "AC", "AD", "AE"]
    assert abs(sum(share for _, share in dist.shares) - 1.0) < 1e-9


def test_custom_distribution_is_normalised(tmp_path):
    dist = load_custom_distribution(write(tmp_path, '{"shares": {"AA": 1, "AB": 1, "AC": 2}}', "three.json"))
    assert dist.share_of("AC") == pytest.approx(0.5)


@pytest.mark.parametrize("shares", [{}, {"AA": 0}, {"AA": -1, "AB": 2}])
def test_custom_distribution_rejects_unnormalisable_shares(shares):
    with pytest.raises(ConfigError):
        make_airline_distribution("custom", shares)


def test_unknown_mode():
    with pytest.raises(ConfigError):
        make_airline_distribution("top3")


def test_fleet_mix_must_sum_to_one():
    with pytest.raises(ConfigError):
        FleetMix.from_mapping({"Heavy": 0.5, "Large": 0.4}, {"Heavy": 214, "Large": 97})


def test_load_well_formed_schedule(tmp_path):
    path = write(tmp_path, "# morning bank\nflight F1 AA H 2 0.0\nflight F2 AB L 3 1.0\nflight F3 AA S 2 2.5\n")
    schedule = load_schedule(path, gates=[2, 3])
    assert [f.id for f in schedule] == ["F1", "F2", "F3"]
    assert [f.ready_step for f in schedule] == [0, 2, 5]
    assert [f.passengers for f in schedule] == [214, 97, 4]


def test_out_of_order_schedule_is_sorted_with_warning(tmp_path, caplog):
    path = write(tmp_path, "flight F1 AA L 2 10.0\nflight F2 AA L 2 5.0\n")
    with caplog.at_level(logging.WARNING):
        schedule = load_schedule(path)
    assert [f.id for f in schedule] == ["F2", "F1"]
    assert "re-sorted" in caplog.text


def test_unknown_class_names_the_line(tmp_path):
    path = write(tmp_path, "flight F1 AA L 2 1.0\nflight F2 AA MEDIUM-HEAVY 2 2.0\n")
    with pytest.raises(ScheduleError, match="line 2") as excinfo:
        load_schedule(path)
    assert len(excinfo.value.offending) == 1


def test_validation_collects_every_bad_record(tmp_path):
    path = write(tmp_path, "flight F1 AA L 2 -1.0\nflight F2 AA L 99 2.0\nflight F3 AA L 2 3.0\nflight F3 AA L 2 4.0\n")
    with pytest.raises(ScheduleError) as excinfo:
        load_schedule(path, gates=[2])
    offending = excinfo.value.offending
    assert [msg.split(":")[0] for msg in offending] == ["line 1", "line 2", "line 4"]


def test_syntax_error_carries_line_number(tmp_path):
    path = write(tmp_path, "flight F1 AA L 2 1.0\nflight F2 AA L two 2.0\n")
    with pytest.raises(ScheduleError) as excinfo:
        load_schedule(path)
    assert excinfo.value.line_number == 2


def test_empty_schedule():
    assert len(synth_schedule(0, FLAT_PROFILE, DEFAULT_FLEET_MIX, make_airline_distribution("top10"),
                              np.random.default_rng(0), gates=[2])) == 0


def test_all_zero_profile_with_flights_is_rejected():
    with pytest.raises(ScheduleError):
        synth_schedule(5, [0.0] * 24, DEFAULT_FLEET_MIX, make_airline_distribution("top10"),
                       np.random.default_rng(0), gates=[2])


def test_synth_schedule_is_sorted_and_in_profile():
    profile = [0.0] * 24
    profile[7] = 1.0
    schedule = synth_schedule(500, profile, DEFAULT_FLEET_MIX, make_airline_distribution("top5"),
                              np.random.default_rng(1), gates=[2, 3, 4])
    steps = [f.ready_step for f in schedule]
    assert steps == sorted(steps)
    assert min(steps) >= 7 * 120 and max(steps) < 8 * 120
    assert schedule.gates <= {2, 3, 4}
    assert [f.id for f in schedule][:2] == ["F0001", "F0002"]


def test_synth_schedule_is_deterministic():
    args = (200, FLAT_PROFILE, DEFAULT_FLEET_MIX, make_airline_distribution("top10"))
    a = synth_schedule(*args, np.random.default_rng(5), gates=[2, 3])
    b = synth_schedule(*args, np.random.default_rng(5), gates=[2, 3])
    assert a == b


def test_fleet_mix_frequencies():
    n = 100_000
    schedule = synth_schedule(n, FLAT_PROFILE, DEFAULT_FLEET_MIX, make_airline_distribution("top10"),
                              np.random.default_rng(2006), gates=[2])
    counts = Counter(f.weight_class for f in schedule)
    observed = [counts[c] for c in WEIGHT_CLASSES]
    expected = [n * dict(DEFAULT_FLEET_MIX.shares)[c] for c in WEIGHT_CLASSES]
    assert chisquare(observed, expected).pvalue > 0.001

    share = make_airline_distribution("top10").share_of("AA")
    aa = sum(1 for f in schedule if f.airline == "AA") / n
    assert abs(aa - share) < 3 * np.sqrt(share * (1 - share) / n)


def test_save_then_load_round_trip(tmp_path):
    schedule = synth_schedule(50, FLAT_PROFILE, DEFAULT_FLEET_MIX, make_airline_distribution("top5"),
                              np.random.default_rng(3), gates=[2, 3])
    path = tmp_path / "saved.sched"
    save_schedule(schedule, path)
    assert load_schedule(path, gates=[2, 3]) == schedule


def test_minute_to_step():
    assert minute_to_step(0.0, 30) == 0
    assert minute_to_step(0.49, 30) == 0
    assert minute_to_step(0.5, 30) == 1
    assert minute_to_step(0.333333, 20) == 1
