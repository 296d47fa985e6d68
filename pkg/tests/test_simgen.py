import numpy as np
import pytest

from missionprofile.errors import DomainError
from missionprofile.simgen import (
    DayConfig,
    FleetConfig,
    config_to_dict,
    day_config_from_dict,
    device_rng,
    fleet_config_from_dict,
    gen_mileage_fleet,
    gen_temperature_day,
    load_default_config,
    simulate_day_device,
)


def test_shipped_configs_match_defaults():
    assert load_default_config("fleet") == config_to_dict(FleetConfig())
    assert load_default_config("day") == config_to_dict(DayConfig())
    assert fleet_config_from_dict(load_default_config("fleet")) == FleetConfig()
    assert day_config_from_dict(load_default_config("day")) == DayConfig()
    with pytest.raises(DomainError):
        load_default_config("week")


def test_unknown_or_invalid_parameters_rejected():
    with pytest.raises(DomainError, match="unknown"):
        fleet_config_from_dict({"nope": 1})
    with pytest.raises(DomainError):
        FleetConfig(counts={"short": 1})
    with pytest.raises(DomainError):
        DayConfig(max_temp=10.0)
    with pytest.raises(DomainError):
        device_rng(-1, 0, 0)


def test_fleet_layout():
    sim = gen_mileage_fleet(FleetConfig(seed=2))
    assert sim.n == 200 and sim.coordinates == ("mileage",)
    assert [len(sim.group_indices(g)) for g in ("short", "average", "long", "carsharing")] == [50, 100, 36, 14]
    s = sim.series[0][0]
    assert s.q == 365 and s.times[1] == 24.0 and sim.domain_end == 364 * 24.0


def test_noise_free_mileage_is_cumulative():
    sim = gen_mileage_fleet(FleetConfig(noise_sd=0.0, seed=1))
    for dev in sim.series:
        v = dev[0].values
        assert v[0] == 0.0 and np.all(np.diff(v) >= 0)
    final = np.array([dev[0].values[-1] for dev in sim.series])
    means = {g: final[sim.group_indices(g)].mean() for g in ("short", "average", "long", "carsharing")}
    assert means["short"] < means["average"] < means["long"] < means["carsharing"]


def test_generation_is_deterministic_and_device_local():
    a = gen_mileage_fleet(FleetConfig(seed=5))
    b = gen_mileage_fleet(FleetConfig(seed=5))
    c = gen_mileage_fleet(FleetConfig(seed=6))
    np.testing.assert_array_equal(a.series[17][0].values, b.series[17][0].values)
    assert not np.array_equal(a.series[17][0].values, c.series[17][0].values)
    # devices keep their streams when later groups change size
    counts = {"short": 50, "average": 100, "long": 36, "carsharing": 3}
    d = gen_mileage_fleet(FleetConfig(seed=5, counts=counts))
    np.testing.assert_array_equal(a.series[120][0].values, d.series[120][0].values)


def test_day_layout_and_physics():
    cfg = DayConfig(n_regular=6, seed=3)
    sim = gen_temperature_day(cfg)
    assert sim.n == 10 and sim.coordinates == ("temperature", "mileage")
    assert sim.series[0][0].q == 1440 and sim.domain_end == pytest.approx(1439 / 60)
    for idx, group in enumerate(sim.groups):
        temp, mileage, on, n_trips = simulate_day_device(cfg, idx, group)
        amb = cfg.ambient[group]
        assert np.all(temp >= amb - 1e-9) and np.all(temp <= cfg.max_temp)
        assert np.all(np.diff(mileage) >= 0)
        assert n_trips >= cfg.trips_min[group] and on.any()
    cold = sim.group_indices("cold")
    assert sim.series[cold[0]][0].values[0] < 0


def test_carsharing_drives_more():
    cfg = DayConfig(seed=0)
    trips = {g: [] for g in ("regular", "carsharing")}
    for idx in range(40):
        for g in trips:
            trips[g].append(simulate_day_device(cfg, idx, g)[2].sum())
    assert np.mean(trips["carsharing"]) > 1.5 * np.mean(trips["regular"])
