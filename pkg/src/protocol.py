"""
Wire formats: the settings XML document, the context upload XML and the SMS codecs
"""

import math
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Tuple
from xml.sax.saxutils import escape, quoteattr

from .context import CRISIS_NO, CRISIS_YES, AttributeRow
from .errors import CosmosError, ProtocolError, ProtocolErrorKind
from .settings import BINS, SENTINEL_PROFILE, SETTING_NAMES, SWITCH_SETTINGS, SettingsProfile, Switch

VERSION = "1"
SMS_PREFIX = "COSMOS1"
CONTEXT_SMS_PREFIX = "COSMOSC1"
SMS_LIMIT = 160
MAX_SEQUENCE = 2 ** 63 - 1

# wire element names, in their fixed order
ELEMENTS = ("bluetooth", "gps", "wifi", "brightness", "ringvolume", "vibration")
ELEMENT_TO_SETTING = dict(zip(ELEMENTS, SETTING_NAMES))
CONTEXT_ELEMENTS = ("zone", "event", "callcount", "callcat", "battery", "crisis")

SMS_TOKEN = re.compile(r"^[A-Za-z0-9_.-]+$")
# integers as the builders write them, no leading zeros or signs
DIGITS = re.compile(r"^(0|[1-9][0-9]*)$")
OBSERVED_SMS = re.compile(r"^B(.)P(.)W(.)Y([0-9]+)R([0-9]+)V(.)$")

MALFORMED = ProtocolErrorKind.MALFORMED
SCHEMA_VIOLATION = ProtocolErrorKind.SCHEMA_VIOLATION
VALUE_ERROR = ProtocolErrorKind.VALUE_ERROR


class DocumentStatus(str, Enum):
    TRAINED = "trained"
    TRAINING = "training"


@dataclass(frozen=True)
class SettingsDocument:
    profile: SettingsProfile
    status: DocumentStatus
    sequence: int

    def __post_init__(self):
        if isinstance(self.sequence, bool) or not isinstance(self.sequence, int) or not 0 <= self.sequence <= MAX_SEQUENCE:
            raise ProtocolError(VALUE_ERROR, f"sequence out of range: {self.sequence}")
        if self.status is DocumentStatus.TRAINING and self.profile != SENTINEL_PROFILE:
            raise ProtocolError(VALUE_ERROR, "a training document must carry the sentinel profile")

    @classmethod
    def training(cls, sequence: int) -> "SettingsDocument":
        return cls(SENTINEL_PROFILE, DocumentStatus.TRAINING, sequence)


@dataclass(frozen=True)
class ContextUpload:
    row: AttributeRow
    client_id: str
    at: int
    observed_profile: Optional[SettingsProfile] = None

    def __post_init__(self):
        if not self.client_id or self.client_id != self.client_id.strip() or not self.client_id.isprintable():
            raise ProtocolError(VALUE_ERROR, f"bad client id {self.client_id!r}")
        if isinstance(self.at, bool) or not isinstance(self.at, int) or self.at < 0:
            raise ProtocolError(VALUE_ERROR, f"bad timestamp {self.at!r}")


def _wire_value(profile: SettingsProfile, setting: str) -> str:
    value = getattr(profile, setting)
    return value.value.lower() if isinstance(value, Switch) else str(value)


def _settings_lines(profile: SettingsProfile, indent: str) -> List[str]:
    return [
        f"{indent}<{element}>{_wire_value(profile, setting)}</{element}>"
        for element, setting in ELEMENT_TO_SETTING.items()
    ]


def build_settings_xml(doc: SettingsDocument) -> bytes:
    lines = [f'<cosmos version="{VERSION}" seq="{doc.sequence}" status="{doc.status.value}">', "  <settings>"]
    lines += _settings_lines(doc.profile, "    ")
    lines += ["  </settings>", "</cosmos>"]
    return ("\n".join(lines) + "\n").encode("utf-8")


def _parse_root(data: bytes, tag: str) -> ET.Element:
    try:
        root = ET.fromstring(data)
    except ET.ParseError as e:
        raise ProtocolError(MALFORMED, f"not well-formed XML: {e}") from e
    if root.tag != tag:
        raise ProtocolError(SCHEMA_VIOLATION, f"expected <{tag}>, got <{root.tag}>")
    return root


def _check_attributes(element: ET.Element, expected: Tuple[str, ...]) -> Dict[str, str]:
    if set(element.attrib) != set(expected):
        raise ProtocolError(SCHEMA_VIOLATION, f"<{element.tag}> needs attributes {expected}, got {sorted(element.attrib)}")
    return dict(element.attrib)


def _check_blank(text: Optional[str], where: str) -> None:
    if text is not None and text.strip():
        raise ProtocolError(SCHEMA_VIOLATION, f"unexpected text in {where}")


def _children(element: ET.Element, expected: Tuple[str, ...]) -> List[ET.Element]:
    children = list(element)
    tags = tuple(child.tag for child in children)
    if tags != expected:
        raise ProtocolError(SCHEMA_VIOLATION, f"<{element.tag}> must hold {expected} in order, got {tags}")
    _check_blank(element.text, f"<{element.tag}>")
    for child in children:
        _check_blank(child.tail, f"<{element.tag}>")
    return children


def _leaf_text(element: ET.Element) -> str:
    if element.attrib or len(element):
        raise ProtocolError(SCHEMA_VIOLATION, f"<{element.tag}> must be a plain text element")
    return (element.text or "").strip()


def _parse_profile(element: ET.Element) -> SettingsProfile:
    values = {}
    for child in _children(element, ELEMENTS):
        setting = ELEMENT_TO_SETTING[child.tag]
        text = _leaf_text(child)
        if setting in SWITCH_SETTINGS:
            if text not in ("on", "off"):
                raise ProtocolError(VALUE_ERROR, f"<{child.tag}> must be on or off, got {text!r}")
            values[setting] = Switch(text.upper())
        else:
            values[setting] = _parse_bin(text, child.tag)
    return SettingsProfile(**values)


def _parse_bin(text: str, where: str) -> int:
    if text not in tuple(str(b) for b in BINS):
        raise ProtocolError(VALUE_ERROR, f"{where}: {text!r} is not one of {BINS}")
    return int(text)


def _parse_int(text: str, where: str, upper: int = MAX_SEQUENCE) -> int:
    if not DIGITS.fullmatch(text) or int(text) > upper:
        raise ProtocolError(VALUE_ERROR, f"{where}: {text!r} is not a non-negative integer")
    return int(text)


def parse_settings_xml(data: bytes) -> SettingsDocument:
    root = _parse_root(data, "cosmos")
    attrs = _check_attributes(root, ("version", "seq", "status"))
    if attrs["version"] != VERSION:
        raise ProtocolError(VALUE_ERROR, f"unsupported version {attrs['version']!r}")
    sequence = _parse_int(attrs["seq"], "seq")
    try:
        status = DocumentStatus(attrs["status"])
    except ValueError as e:
        raise ProtocolError(VALUE_ERROR, f"unknown status {attrs['status']!r}") from e
    (settings,) = _children(root, ("settings",))
    if settings.attrib:
        raise ProtocolError(SCHEMA_VIOLATION, "<settings> takes no attributes")
    return SettingsDocument(_parse_profile(settings), status, sequence)


def build_context_xml(upload: ContextUpload) -> bytes:
    row = upload.row
    lines = [
        f'<context version="{VERSION}" client={quoteattr(upload.client_id)} at="{upload.at}">',
        f"  <zone>{escape(row.zone_id)}</zone>",
        f"  <event>{escape(row.event_category)}</event>",
        f"  <callcount>{row.call_count}</callcount>",
        f"  <callcat>{escape(row.last_call_category)}</callcat>",
        f"  <battery>{float(row.battery_pct)!r}</battery>",
        f"  <crisis>{row.crisis.lower()}</crisis>",
    ]
    if upload.observed_profile is not None:
        lines.append("  <observed>")
        lines += _settings_lines(upload.observed_profile, "    ")
        lines.append("  </observed>")
    lines.append("</context>")
    return ("\n".join(lines) + "\n").encode("utf-8")


def _parse_battery(text: str) -> float:
    try:
        value = float(text)
    except ValueError as e:
        raise ProtocolError(VALUE_ERROR, f"battery {text!r} is not a number") from e
    if not math.isfinite(value) or not 0 <= value <= 100:
        raise ProtocolError(VALUE_ERROR, f"battery {text!r} outside [0, 100]")
    if text != repr(value):
        raise ProtocolError(VALUE_ERROR, f"battery {text!r} is not in canonical form")
    return value


def _parse_crisis(text: str) -> str:
    if text not in ("yes", "no"):
        raise ProtocolError(VALUE_ERROR, f"crisis must be yes or no, got {text!r}")
    return text.upper()


def _make_row(zone: str, event: str, calls: int, callcat: str, battery: float, crisis: str) -> AttributeRow:
    try:
        return AttributeRow(zone, event, calls, callcat, battery, crisis)
    except CosmosError as e:
        raise ProtocolError(VALUE_ERROR, str(e)) from e


def parse_context_xml(data: bytes) -> ContextUpload:
    root = _parse_root(data, "context")
    attrs = _check_attributes(root, ("version", "client", "at"))
    if attrs["version"] != VERSION:
        raise ProtocolError(VALUE_ERROR, f"unsupported version {attrs['version']!r}")
    at = _parse_int(attrs["at"], "at")
    expected = CONTEXT_ELEMENTS + ("observed",) if len(root) == len(CONTEXT_ELEMENTS) + 1 else CONTEXT_ELEMENTS
    children = _children(root, expected)
    texts = [_leaf_text(child) for child in children[: len(CONTEXT_ELEMENTS)]]
    row = _make_row(
        texts[0],
        texts[1],
        _parse_int(texts[2], "callcount"),
        texts[3],
        _parse_battery(texts[4]),
        _parse_crisis(texts[5]),
    )
    observed = None
    if len(children) > len(CONTEXT_ELEMENTS):
        element = children[-1]
        if element.attrib:
            raise ProtocolError(SCHEMA_VIOLATION, "<observed> takes no attributes")
        observed = _parse_profile(element)
    return ContextUpload(row=row, client_id=attrs["client"], at=at, observed_profile=observed)


def build_error_xml(kind: ProtocolErrorKind, message: str) -> bytes:
    return f'<error kind="{kind.value}">{escape(message)}</error>\n'.encode("utf-8")


def parse_response(data: bytes) -> SettingsDocument:
    """Settings document from a server reply; error replies raise ProtocolError."""
    try:
        root = ET.fromstring(data)
    except ET.ParseError as e:
        raise ProtocolError(MALFORMED, f"not well-formed XML: {e}") from e
    if root.tag == "error":
        try:
            kind = ProtocolErrorKind(root.get("kind", ""))
        except ValueError:
            kind = MALFORMED
        raise ProtocolError(kind, f"server rejected request: {root.text or ''}")
    return parse_settings_xml(data)


def _bit(switch: Switch) -> str:
    return "1" if switch is Switch.ON else "0"


def _profile_sms(profile: SettingsProfile) -> List[str]:
    return [
        f"B{_bit(profile.bluetooth)}",
        f"P{_bit(profile.gps)}",
        f"W{_bit(profile.wifi)}",
        f"Y{profile.brightness}",
        f"R{profile.ring_volume}",
        f"V{_bit(profile.vibration)}",
    ]


def encode_sms(doc: SettingsDocument) -> str:
    status = "T" if doc.status is DocumentStatus.TRAINED else "G"
    return ";".join([SMS_PREFIX, f"S={status}", f"Q={doc.sequence}"] + _profile_sms(doc.profile))


def _parse_bit(text: str, where: str) -> Switch:
    if text not in ("0", "1"):
        raise ProtocolError(VALUE_ERROR, f"{where} must be 0 or 1, got {text!r}")
    return Switch.ON if text == "1" else Switch.OFF


def _sms_fields(text: str, prefix: str, keys: Tuple[str, ...]) -> List[str]:
    parts = text.split(";")
    if parts[0] != prefix:
        raise ProtocolError(MALFORMED, f"SMS must start with {prefix};")
    if len(parts) != len(keys) + 1:
        raise ProtocolError(MALFORMED, f"expected {len(keys)} fields, got {len(parts) - 1}")
    values = []
    for key, part in zip(keys, parts[1:]):
        if not part.startswith(key):
            raise ProtocolError(MALFORMED, f"expected field {key!r}, got {part!r}")
        values.append(part[len(key):])
    return values


def decode_sms(text: str) -> SettingsDocument:
    status, seq, b, p, w, y, r, v = _sms_fields(text, SMS_PREFIX, ("S=", "Q=", "B", "P", "W", "Y", "R", "V"))
    if status not in ("T", "G"):
        raise ProtocolError(VALUE_ERROR, f"status must be T or G, got {status!r}")
    profile = SettingsProfile(
        bluetooth=_parse_bit(b, "B"),
        gps=_parse_bit(p, "P"),
        wifi=_parse_bit(w, "W"),
        brightness=_parse_bin(y, "Y"),
        ring_volume=_parse_bin(r, "R"),
        vibration=_parse_bit(v, "V"),
    )
    return SettingsDocument(
        profile=profile,
        status=DocumentStatus.TRAINED if status == "T" else DocumentStatus.TRAINING,
        sequence=_parse_int(seq, "Q"),
    )


def _sms_token(value: str, where: str) -> str:
    if not SMS_TOKEN.fullmatch(value):
        raise ProtocolError(VALUE_ERROR, f"{where} {value!r} cannot travel by SMS")
    return value


def encode_context_sms(upload: ContextUpload) -> str:
    row = upload.row
    parts = [
        CONTEXT_SMS_PREFIX,
        f"C={_sms_token(upload.client_id, 'client')}",
        f"T={upload.at}",
        f"Z={_sms_token(row.zone_id, 'zone')}",
        f"E={_sms_token(row.event_category, 'event')}",
        f"N={row.call_count}",
        f"L={_sms_token(row.last_call_category, 'call category')}",
        f"D={float(row.battery_pct)!r}",
        f"X={row.crisis[0]}",
    ]
    if upload.observed_profile is not None:
        parts.append("O=" + "".join(_profile_sms(upload.observed_profile)))
    text = ";".join(parts)
    if len(text) > SMS_LIMIT:
        raise ProtocolError(VALUE_ERROR, f"context needs {len(text)} characters, an SMS holds {SMS_LIMIT}")
    return text


CONTEXT_KEYS = ("C=", "T=", "Z=", "E=", "N=", "L=", "D=", "X=")


def decode_context_sms(text: str) -> ContextUpload:
    keys = CONTEXT_KEYS + ("O=",) if text.count(";") == len(CONTEXT_KEYS) + 1 else CONTEXT_KEYS
    fields = _sms_fields(text, CONTEXT_SMS_PREFIX, keys)
    client, at, zone, event, calls, callcat, battery, crisis = fields[:8]
    for value, where in ((client, "client"), (zone, "zone"), (event, "event"), (callcat, "call category")):
        _sms_token(value, where)
    if crisis not in ("Y", "N"):
        raise ProtocolError(VALUE_ERROR, f"X must be Y or N, got {crisis!r}")
    row = _make_row(
        zone, event, _parse_int(calls, "N"), callcat, _parse_battery(battery), CRISIS_YES if crisis == "Y" else CRISIS_NO
    )
    observed = None
    if len(fields) == 9:
        match = OBSERVED_SMS.fullmatch(fields[8])
        if not match:
            raise ProtocolError(MALFORMED, f"bad observed profile {fields[8]!r}")
        b, p, w, y, r, v = match.groups()
        observed = SettingsProfile(
            _parse_bit(b, "B"), _parse_bit(p, "P"), _parse_bit(w, "W"),
            _parse_bin(y, "Y"), _parse_bin(r, "R"), _parse_bit(v, "V"),
        )
    return ContextUpload(row=row, client_id=client, at=_parse_int(at, "T"), observed_profile=observed)


def encode_sms_error(kind: ProtocolErrorKind) -> str:
    return f"ERR;{kind.value}"


def decode_sms_reply(text: str) -> SettingsDocument:
    if text.startswith("ERR;"):
        try:
            kind = ProtocolErrorKind(text[4:])
        except ValueError:
            kind = MALFORMED
        raise ProtocolError(kind, "server rejected SMS request")
    return decode_sms(text)

