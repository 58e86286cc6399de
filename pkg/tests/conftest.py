import pytest

from src.context import AttributeRow
from src.dtree import Attribute, AttributeKind, AttributeSchema, Dataset
from src.protocol import ContextUpload
from src.settings import SettingsProfile, Switch, parse_profile

CAT, NUM = AttributeKind.CATEGORICAL, AttributeKind.CONTINUOUS

# outlook, temperature, humidity, windy -> play
WEATHER = [
    ("sunny", 85.0, 85.0, "false", "no"),
    ("sunny", 80.0, 90.0, "true", "no"),
    ("overcast", 83.0, 86.0, "false", "yes"),
    ("rainy", 70.0, 96.0, "false", "yes"),
    ("rainy", 68.0, 80.0, "false", "yes"),
    ("rainy", 65.0, 70.0, "true", "no"),
    ("overcast", 64.0, 65.0, "true", "yes"),
    ("sunny", 72.0, 95.0, "false", "no"),
    ("sunny", 69.0, 70.0, "false", "yes"),
    ("rainy", 75.0, 80.0, "false", "yes"),
    ("sunny", 75.0, 70.0, "true", "yes"),
    ("overcast", 72.0, 90.0, "true", "yes"),
    ("overcast", 81.0, 75.0, "false", "yes"),
    ("rainy", 71.0, 91.0, "true", "no"),
]


@pytest.fixture
def weather():
    schema = AttributeSchema(
        attributes=(
            Attribute("outlook", CAT, ("overcast", "rainy", "sunny")),
            Attribute("temperature", NUM),
            Attribute("humidity", NUM),
            Attribute("windy", CAT, ("false", "true")),
        ),
        label_domain=("no", "yes"),
    )
    return Dataset(schema, tuple((row[:4], row[4]) for row in WEATHER))


@pytest.fixture
def office_row():
    return AttributeRow("office", "MEETING", 1, "WORK", 72.5, "NO")


@pytest.fixture
def quiet_profile():
    return parse_profile("OFF,OFF,ON,50,0,ON")


@pytest.fixture
def radios_on():
    return SettingsProfile(Switch.ON, Switch.ON, Switch.ON, 100, 75, Switch.OFF)


@pytest.fixture
def upload(office_row, quiet_profile):
    return ContextUpload(office_row, "phone-1", 1700000000, quiet_profile)
