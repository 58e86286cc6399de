from dataclasses import replace

import pytest
from hypothesis import given
from hypothesis import strategies as st

from src.energy import DrainModel, simulate_battery_hours
from src.errors import DomainError
from src.settings import BINS, SETTING_NAMES, SettingsProfile, Switch, parse_profile
from tests import oracles

ALL_ON = parse_profile("ON,ON,ON,100,100,ON")
ALL_OFF = parse_profile("OFF,OFF,OFF,0,0,OFF")
FLAT = DrainModel(base_ma=100.0, bluetooth_ma=0, gps_ma=0, wifi_ma=0, brightness_ma=0)

switches = st.sampled_from([Switch.ON, Switch.OFF])
profiles = st.builds(
    SettingsProfile, switches, switches, switches, st.sampled_from(BINS), st.sampled_from(BINS), switches
)


def test_constant_draw_lasts_capacity_over_current():
    assert simulate_battery_hours([(ALL_ON, 1.0)], 1000.0, FLAT, repeat=True) == pytest.approx(10.0)
    assert simulate_battery_hours([(ALL_ON, 20.0)], 1000.0, FLAT) == pytest.approx(10.0)


def test_short_timeline_is_capped_without_repeat():
    assert simulate_battery_hours([(ALL_OFF, 5.0)], 1000.0, FLAT) == 5.0


def test_drain_model():
    model = DrainModel()
    assert model.drain_ma(ALL_OFF) == model.base_ma
    assert model.drain_ma(ALL_ON) == pytest.approx(8 + 4 + 25 + 12 + 30)
    assert model.drain_ma(parse_profile("OFF,OFF,OFF,50,0,OFF")) == pytest.approx(8 + 15)


def test_everything_off_outlasts_everything_on():
    on = simulate_battery_hours([(ALL_ON, 1.0)], repeat=True)
    off = simulate_battery_hours([(ALL_OFF, 1.0)], repeat=True)
    assert off > on
    assert off == pytest.approx(1500.0 / 8.0)


@given(st.lists(st.tuples(profiles, st.floats(0.0, 5.0)), min_size=1, max_size=12), st.floats(1.0, 500.0))
def test_piecewise_drain_matches_step_integration(timeline, capacity):
    model = DrainModel()
    expected = oracles.integrate_drain([(model.drain_ma(p), h) for p, h in timeline], capacity)
    assert simulate_battery_hours(timeline, capacity, model) == pytest.approx(expected, rel=1e-9, abs=1e-9)


@given(st.lists(st.tuples(profiles, st.floats(0.1, 3.0)), min_size=1, max_size=6), st.floats(100.0, 3000.0))
def test_repeat_matches_unrolled_timeline(timeline, capacity):
    model = DrainModel()
    per_pass = sum(model.drain_ma(p) * h for p, h in timeline)
    passes = int(capacity // per_pass) + 2
    unrolled = [(model.drain_ma(p), h) for p, h in timeline] * passes
    expected = oracles.integrate_drain(unrolled, capacity)
    assert simulate_battery_hours(timeline, capacity, model, repeat=True) == pytest.approx(expected, rel=1e-9)


def test_errors():
    with pytest.raises(DomainError):
        DrainModel(base_ma=0)
    with pytest.raises(DomainError):
        DrainModel(gps_ma=-1)
    with pytest.raises(DomainError):
        simulate_battery_hours([(ALL_ON, 1.0)], capacity_mah=0)
    with pytest.raises(DomainError):
        simulate_battery_hours([(ALL_ON, -1.0)])
    with pytest.raises(DomainError):
        simulate_battery_hours([(ALL_ON, 0.0)], repeat=True)


@st.composite
def lowered_pairs(draw):
    profile = draw(profiles)
    name = draw(st.sampled_from(SETTING_NAMES))
    value = getattr(profile, name)
    if isinstance(value, Switch):
        lower = Switch.OFF
    else:
        lower = draw(st.sampled_from([b for b in BINS if b <= value]))
    return profile, replace(profile, **{name: lower})


@given(lowered_pairs(), st.floats(0.5, 4.0), profiles)
def test_lowering_one_setting_never_shortens_battery_life(pair, hours, other):
    profile, lowered = pair
    assert simulate_battery_hours([(lowered, 1.0)], repeat=True) >= simulate_battery_hours([(profile, 1.0)], repeat=True)
    before = simulate_battery_hours([(other, hours), (profile, hours)], repeat=True)
    after = simulate_battery_hours([(other, hours), (lowered, hours)], repeat=True)
    assert after >= before
