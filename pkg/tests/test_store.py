import pytest

from src.context import AttributeRow
from src.errors import ConfigError
from src.store import STORE_HEADER, ObservationStore


def test_in_memory_store_assigns_increasing_ids(office_row, quiet_profile):
    store = ObservationStore()
    assert store.latest_id == 0
    assert store.append(office_row, quiet_profile, 100) == 1
    assert store.append(office_row, quiet_profile, 200) == 2
    assert len(store) == 2
    assert [obs.at for obs in store] == [100, 200]


def test_snapshot_is_frozen(office_row, quiet_profile):
    store = ObservationStore()
    store.append(office_row, quiet_profile, 1)
    snapshot = store.snapshot()
    store.append(office_row, quiet_profile, 2)
    assert len(snapshot) == 1


def test_file_store_recovers(tmp_path, office_row, quiet_profile, radios_on):
    path = str(tmp_path / "observations.csv")
    store = ObservationStore(path)
    gym = AttributeRow("gym", "GYM", 0, "NONE", 60.0, "NO")
    store.append(office_row, quiet_profile, 100)
    store.append(gym, radios_on, 200)

    with open(path, encoding="utf-8") as f:
        assert f.readline().rstrip("\n") == STORE_HEADER

    reopened = ObservationStore(path)
    assert reopened.snapshot() == store.snapshot()
    assert reopened.append(office_row, quiet_profile, 300) == 3


def test_store_rejects_foreign_file(tmp_path):
    path = tmp_path / "other.csv"
    path.write_text("zone:CAT,battery:NUM|wifi:CAT(OFF;ON)\noffice,80.0,ON\n")
    with pytest.raises(ConfigError):
        ObservationStore(str(path))


def test_store_rejects_bad_records(tmp_path, office_row, quiet_profile):
    path = str(tmp_path / "observations.csv")
    ObservationStore(path).append(office_row, quiet_profile, 100)
    with open(path, encoding="utf-8") as f:
        lines = f.read().splitlines()

    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines + [lines[1]]) + "\n")
    with pytest.raises(ConfigError):
        ObservationStore(path)

    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join([lines[0], lines[1].replace(",72.5,", ",172.5,")]) + "\n")
    with pytest.raises(ConfigError):
        ObservationStore(path)
