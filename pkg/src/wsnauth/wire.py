"""Fixed-width binary codec for every protocol message.

All field widths follow from :class:`SysParams`, so concatenations are
unambiguous without length prefixes. Each message starts with a one-byte
type tag; timestamps are unsigned 8-byte big-endian seconds.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Iterable, Union

from .curve import Point, decode_point
from .errors import LengthMismatch, UnknownType
from .params import DEFAULT_PARAMS, NONCE_LEN, SysParams
from .primitives import MAC_LEN, POINT_LEN, Ciphertext

TS_LEN = 8


def ts_bytes(t: int) -> bytes:
    return int(t).to_bytes(TS_LEN, "big")


@dataclass(frozen=True)
class LoginRequestM1:
    T_U: int
    ID_SN: bytes
    X: Point
    C_U: Ciphertext
    sigma_U: bytes

    msg_type = 0x01
    label = "M1"


@dataclass(frozen=True)
class GatewayToSensorM2:
    ID_GW: bytes
    T_GW: int
    T_U: int
    C_GW: Ciphertext
    sigma_GW: bytes

    msg_type = 0x02
    label = "M2"


@dataclass(frozen=True)
class SensorResponseM3:
    rho_SN: bytes

    msg_type = 0x03
    label = "M3"


@dataclass(frozen=True)
class PwdUpdateRequest:
    T_U: int
    X: Point
    C_U: Ciphertext

    msg_type = 0x04
    label = "PWREQ"


@dataclass(frozen=True)
class PwdUpdateResponse:
    ok: bool
    rho_GW: bytes | None = None

    msg_type = 0x05
    label = "PWRSP"


Message = Union[LoginRequestM1, GatewayToSensorM2, SensorResponseM3,
                PwdUpdateRequest, PwdUpdateResponse]

MESSAGE_TYPES = {cls.msg_type: cls for cls in (
    LoginRequestM1, GatewayToSensorM2, SensorResponseM3,
    PwdUpdateRequest, PwdUpdateResponse)}


def _widths(cls, params: SysParams) -> list[tuple[str, str, int]]:
    """(field, kind, width) for every fixed-layout message type."""
    idl, kb, wb = params.id_len, params.kappa_bytes, params.omega_bytes
    if cls is LoginRequestM1:
        return [("T_U", "ts", TS_LEN), ("ID_SN", "raw", idl), ("X", "point", POINT_LEN),
                ("C_U", "ct", NONCE_LEN + idl + wb + kb), ("sigma_U", "raw", MAC_LEN)]
    if cls is GatewayToSensorM2:
        return [("ID_GW", "raw", idl), ("T_GW", "ts", TS_LEN), ("T_U", "ts", TS_LEN),
                ("C_GW", "ct", NONCE_LEN + kb), ("sigma_GW", "raw", MAC_LEN)]
    if cls is SensorResponseM3:
        return [("rho_SN", "raw", kb)]
    if cls is PwdUpdateRequest:
        return [("T_U", "ts", TS_LEN), ("X", "point", POINT_LEN),
                ("C_U", "ct", NONCE_LEN + idl + wb)]
    raise UnknownType(f"{cls.__name__} has no fixed layout")


def layout(cls, params: SysParams = DEFAULT_PARAMS) -> list[tuple[str, int, int]]:
    """Byte offsets of each field, counting the type tag at offset 0."""
    out, off = [], 1
    for name, _, width in _widths(cls, params):
        out.append((name, off, width))
        off += width
    return out


def encoded_len(cls, params: SysParams = DEFAULT_PARAMS) -> int:
    return 1 + sum(w for _, _, w in _widths(cls, params))


def _encode_field(kind, value, width, name):
    if kind == "ts":
        data = ts_bytes(value)
    elif kind == "point":
        data = value.encode()
    elif kind == "ct":
        data = bytes(value)
    else:
        data = bytes(value)
    if len(data) != width:
        raise LengthMismatch(f"{name}: expected {width} bytes, got {len(data)}")
    return data


def encode(msg: Message, params: SysParams = DEFAULT_PARAMS) -> bytes:
    if isinstance(msg, PwdUpdateResponse):
        if not msg.ok:
            return bytes([msg.msg_type, 0])
        if msg.rho_GW is None or len(msg.rho_GW) != params.kappa_bytes:
            raise LengthMismatch("rho_GW must be kappa/8 bytes on success")
        return bytes([msg.msg_type, 1]) + msg.rho_GW
    parts = [bytes([msg.msg_type])]
    for name, kind, width in _widths(type(msg), params):
        parts.append(_encode_field(kind, getattr(msg, name), width, name))
    return b"".join(parts)


def decode(data: bytes, params: SysParams = DEFAULT_PARAMS) -> Message:
    if not data:
        raise LengthMismatch("empty message")
    cls = MESSAGE_TYPES.get(data[0])
    if cls is None:
        raise UnknownType(f"unknown message type 0x{data[0]:02x}")
    if cls is PwdUpdateResponse:
        return _decode_pwd_response(data, params)
    want = encoded_len(cls, params)
    if len(data) != want:
        raise LengthMismatch(f"{cls.label}: expected {want} bytes, got {len(data)}")
    values, off = {}, 1
    for name, kind, width in _widths(cls, params):
        chunk = bytes(data[off:off + width])
        off += width
        if kind == "ts":
            values[name] = int.from_bytes(chunk, "big")
        elif kind == "point":
            values[name] = decode_point(chunk)
        elif kind == "ct":
            values[name] = Ciphertext.from_bytes(chunk)
        else:
            values[name] = chunk
    return cls(**values)


def _decode_pwd_response(data, params):
    if len(data) < 2:
        raise LengthMismatch("password update response needs a status byte")
    status = data[1]
    if status == 0:
        if len(data) != 2:
            raise LengthMismatch("failure response carries no authenticator")
        return PwdUpdateResponse(False)
    if status == 1:
        if len(data) != 2 + params.kappa_bytes:
            raise LengthMismatch("success response must carry kappa/8 bytes")
        return PwdUpdateResponse(True, bytes(data[2:]))
    raise UnknownType(f"unknown status byte 0x{status:02x}")


def message_fields(msg: Message) -> dict:
    """Field name to wire bytes, for field-by-field transcript comparison."""
    out = {}
    for f in fields(msg):
        v = getattr(msg, f.name)
        if isinstance(v, Point):
            v = v.encode()
        elif isinstance(v, int) and not isinstance(v, bool):
            v = ts_bytes(v)
        elif isinstance(v, Ciphertext):
            v = bytes(v)
        out[f.name] = v
    return out


# -- MAC inputs ---------------------------------------------------------------

def _need(name, value, width):
    if len(value) != width:
        raise LengthMismatch(f"{name}: expected {width} bytes, got {len(value)}")
    return value


def mac_input_m1(ID_GW: bytes, ID_SN: bytes, T_U: int, C_U,
                 params: SysParams = DEFAULT_PARAMS) -> bytes:
    """ID_GW || ID_SN || T_U || C_U"""
    idl = params.id_len
    c = bytes(C_U)
    _need("C_U", c, NONCE_LEN + idl + params.omega_bytes + params.kappa_bytes)
    return _need("ID_GW", ID_GW, idl) + _need("ID_SN", ID_SN, idl) + ts_bytes(T_U) + c


def mac_input_m2(ID_GW: bytes, ID_SN: bytes, T_GW: int, T_U: int, C_GW,
                 params: SysParams = DEFAULT_PARAMS) -> bytes:
    """ID_GW || ID_SN || T_GW || T_U || C_GW"""
    idl = params.id_len
    c = _need("C_GW", bytes(C_GW), NONCE_LEN + params.kappa_bytes)
    return (_need("ID_GW", ID_GW, idl) + _need("ID_SN", ID_SN, idl)
            + ts_bytes(T_GW) + ts_bytes(T_U) + c)


# -- hex-dump transcript log ----------------------------------------------------

def label_of(data: bytes) -> str:
    cls = MESSAGE_TYPES.get(data[0]) if data else None
    return cls.label if cls else f"0x{data[0]:02x}" if data else "EMPTY"


def format_log(entries: Iterable[tuple[str, bytes]]) -> str:
    """One line per message: ``direction  msg_type  hex-bytes``."""
    return "".join(f"{direction}  {label_of(data)}  {data.hex()}\n"
                   for direction, data in entries)


def parse_log(text: str) -> list[tuple[str, bytes]]:
    out = []
    for line in text.splitlines():
        if not line.strip():
            continue
        direction, _label, hexbytes = line.split()
        out.append((direction, bytes.fromhex(hexbytes)))
    return out
