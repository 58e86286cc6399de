import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.context import (
    UNKNOWN_ZONE,
    AttributeRow,
    CallDirection,
    CallRecord,
    ContextAssembler,
    LocationReading,
    SchedulerEvent,
    TimeWindow,
    Zone,
    assess_battery,
    attribute_schema,
    featurize,
    assemble_context,
    load_zones,
    parse_zones,
    planar_distance_m,
    resolve_zone,
    row_values,
    window_calls,
    window_events,
)
from src.errors import ConfigError, DomainError, UsageError

ZONES = (
    Zone("home", 12.9716, 77.5946, 120.0, frozenset({"home-ap"})),
    Zone("office", 12.9352, 77.6245, 200.0, frozenset({"corp-ap-1", "shared-ap"})),
    Zone("annex", 12.9353, 77.6246, 200.0, frozenset({"shared-ap"})),
)

instants = st.integers(0, 10_000)


@given(
    starts=st.lists(instants, max_size=30),
    calls=st.lists(instants, max_size=30),
    now=instants,
    kappa=st.integers(1, 3000),
)
@settings(max_examples=1000)
def test_window_filters_match_set_filters(starts, calls, now, kappa):
    events = [SchedulerEvent("MEETING", s) for s in starts]
    log = [CallRecord(CallDirection.INCOMING, "WORK", at) for at in calls]
    window = TimeWindow(kappa)
    assert window_events(events, now, window) == [e for e in events if abs(e.start - now) <= kappa]
    assert window_calls(log, now, window) == [c for c in log if now - kappa <= c.at <= now]


def test_window_boundaries_are_inclusive():
    window = TimeWindow(1800)
    events = [SchedulerEvent("MEETING", 1000), SchedulerEvent("GYM", 4601)]
    assert [e.category for e in window_events(events, 2800, window)] == ["MEETING"]
    calls = [CallRecord(CallDirection.OUTGOING, "FAMILY", 1000), CallRecord(CallDirection.INCOMING, "WORK", 2801)]
    assert [c.contact_category for c in window_calls(calls, 2800, window)] == ["FAMILY"]


def test_time_window_must_be_positive():
    with pytest.raises(DomainError):
        TimeWindow(0)


def test_assess_battery():
    assert assess_battery(10, 15).crisis
    assert assess_battery(15, 15).crisis
    assert not assess_battery(15.5, 15).crisis
    with pytest.raises(DomainError):
        assess_battery(101, 15)
    with pytest.raises(DomainError):
        assess_battery(50, float("nan"))


@given(st.floats(0, 100), st.floats(0, 100), st.floats(0, 100))
def test_crisis_is_monotone_in_level(level, lower, threshold):
    if assess_battery(level, threshold).crisis:
        assert assess_battery(min(level, lower), threshold).crisis


def test_planar_distance():
    assert planar_distance_m(12.97, 77.59, 12.97, 77.59) == 0.0
    # one thousandth of a degree of latitude is about 111 m
    assert planar_distance_m(12.970, 77.59, 12.971, 77.59) == pytest.approx(111.2, abs=0.5)


def test_resolve_zone_gps():
    assert resolve_zone(LocationReading.gps(12.9716, 77.5946, 0), ZONES) == "home"
    assert resolve_zone(LocationReading.gps(12.96, 77.61, 0), ZONES) == UNKNOWN_ZONE
    # inside both office and annex: nearest center wins
    assert resolve_zone(LocationReading.gps(12.9353, 77.6246, 0), ZONES) == "annex"
    assert resolve_zone(LocationReading.gps(12.9352, 77.6245, 0), ZONES) == "office"


def test_resolve_zone_wifi():
    assert resolve_zone(LocationReading.wifi("corp-ap-1", 0), ZONES) == "office"
    assert resolve_zone(LocationReading.wifi("shared-ap", 0), ZONES) == "annex"
    assert resolve_zone(LocationReading.wifi("cafe", 0), ZONES) == UNKNOWN_ZONE


def test_location_reading_validation():
    with pytest.raises(DomainError):
        LocationReading.gps(91.0, 0.0, 0)
    with pytest.raises(UsageError):
        LocationReading.wifi("", 0)
    with pytest.raises(DomainError):
        LocationReading.gps(0.0, 0.0, -1)


def test_featurize_picks_earliest_event_and_latest_call():
    events = [SchedulerEvent("GYM", 1500), SchedulerEvent("MEETING", 1200), SchedulerEvent("LUNCH", 1200)]
    calls = [
        CallRecord(CallDirection.INCOMING, "WORK", 900),
        CallRecord(CallDirection.OUTGOING, "FAMILY", 950),
        CallRecord(CallDirection.INCOMING, "FRIEND", 950),
    ]
    ctx = assemble_context(LocationReading.wifi("home-ap", 1000), events, calls, 12.0, 15.0, 1000, TimeWindow(1800))
    row = featurize(ctx, ZONES)
    assert row == AttributeRow("home", "MEETING", 3, "FRIEND", 12.0, "YES")


def test_featurize_empty_context():
    ctx = assemble_context(LocationReading.gps(0.0, 0.0, 5000), [], [], 80, 15.0, 5000, TimeWindow())
    assert featurize(ctx, ZONES) == AttributeRow(UNKNOWN_ZONE, "NONE", 0, "NONE", 80.0, "NO")


def test_assembler_capture():
    assembler = ContextAssembler(ZONES, TimeWindow(600), 20.0)
    events = [SchedulerEvent("MEETING", 10_000)]
    _, row = assembler.capture(LocationReading.wifi("corp-ap-1", 9000), events, [], 19.0, 9000)
    assert row.zone_id == "office"
    assert row.event_category == "NONE"
    assert row.crisis == "YES"


def test_attribute_row_validation():
    with pytest.raises(UsageError):
        AttributeRow("home", "NONE", 0, "NONE", 50.0, "MAYBE")
    with pytest.raises(DomainError):
        AttributeRow("home", "NONE", -1, "NONE", 50.0, "NO")
    with pytest.raises(DomainError):
        AttributeRow("home", "NONE", 0, "NONE", 100.5, "NO")
    with pytest.raises(UsageError):
        AttributeRow(" home", "NONE", 0, "NONE", 50.0, "NO")


def test_schema_and_unseen_categories(office_row):
    rows = [office_row, AttributeRow("gym", "GYM", 0, "NONE", 60.0, "NO")]
    schema = attribute_schema(rows, ("OFF", "ON"), ZONES)
    assert schema.attributes[0].values == ("UNKNOWN", "annex", "gym", "home", "office")
    assert schema.attributes[1].values == ("GYM", "MEETING", "NONE")
    assert schema.attributes[5].values == ("NO", "YES")

    values = row_values(AttributeRow("cafe", "LUNCH", 2, "WORK", 33.0, "NO"), schema)
    assert values == (None, None, 2.0, "WORK", 33.0, "NO")


def test_zone_table(tmp_path):
    path = tmp_path / "zones.csv"
    path.write_text("# id,lat,lon,radius[,aps]\nhome,12.97,77.59,120\noffice,12.93,77.62,200,ap-1;ap-2\n")
    zones = load_zones(path)
    assert [z.id for z in zones] == ["home", "office"]
    assert zones[1].wifi_ids == frozenset({"ap-1", "ap-2"})

    with pytest.raises(ConfigError):
        parse_zones(["home,1,2,3", "home,4,5,6"])
    with pytest.raises(ConfigError):
        parse_zones(["UNKNOWN,1,2,3"])
    with pytest.raises(ConfigError):
        parse_zones(["home,1,2,-3"])
    with pytest.raises(ConfigError):
        parse_zones(["home,north,2,3"])


def test_padded_categories_are_trimmed():
    events = [SchedulerEvent("MEETING ", 100)]
    calls = [CallRecord(CallDirection.INCOMING, "WORK\t", 90), CallRecord(CallDirection.OUTGOING, " ", 95)]
    ctx = assemble_context(LocationReading.wifi("home-ap", 100), events, calls[:1], 50.0, 15.0, 100, TimeWindow())
    assert featurize(ctx, ZONES) == AttributeRow("home", "MEETING", 1, "WORK", 50.0, "NO")

    ctx = assemble_context(LocationReading.wifi("home-ap", 100), [], calls, 50.0, 15.0, 100, TimeWindow())
    assert featurize(ctx, ZONES).last_call_category == "NONE"


@pytest.mark.parametrize("category", ["?", "", "  ", "MEET\nING"])
def test_unusable_categories_are_rejected(category):
    with pytest.raises(UsageError):
        SchedulerEvent(category, 100)
    with pytest.raises(UsageError):
        AttributeRow("home", category, 0, "NONE", 50.0, "NO")


def test_missing_marker_is_not_a_token():
    with pytest.raises(UsageError):
        CallRecord(CallDirection.INCOMING, "?", 100)
    with pytest.raises(UsageError):
        AttributeRow("?", "NONE", 0, "NONE", 50.0, "NO")
    with pytest.raises(ConfigError):
        parse_zones(["?,1,2,3"])


def test_resolve_zone_tie_goes_to_smaller_id():
    twins = (Zone("b", 0.0, 0.001, 500.0), Zone("a", 0.0, -0.001, 500.0))
    assert resolve_zone(LocationReading.gps(0.0, 0.0, 0), twins) == "a"
    assert resolve_zone(LocationReading.gps(0.0, 0.0, 0), twins[::-1]) == "a"
    same_ap = (Zone("b", 1.0, 1.0, 50.0, frozenset({"ap"})), Zone("a", 2.0, 2.0, 50.0, frozenset({"ap"})))
    assert resolve_zone(LocationReading.wifi("ap", 0), same_ap) == "a"


@given(
    lat=st.floats(12.92, 12.99),
    lon=st.floats(77.58, 77.64),
    ap=st.sampled_from(["home-ap", "corp-ap-1", "shared-ap", "cafe"]),
    order=st.permutations(range(len(ZONES))),
)
def test_resolve_zone_ignores_table_order(lat, lon, ap, order):
    shuffled = [ZONES[i] for i in order]
    gps = LocationReading.gps(lat, lon, 0)
    wifi = LocationReading.wifi(ap, 0)
    assert resolve_zone(gps, shuffled) == resolve_zone(gps, ZONES)
    assert resolve_zone(wifi, shuffled) == resolve_zone(wifi, ZONES)
