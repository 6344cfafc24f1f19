"""The three protocol parties: gateway, smart-card user and sensor.

Functions here are the protocol steps; dataclasses hold long-lived and
per-session state. A failed check raises a :class:`ProtocolError`
subclass; callers (the harness, the CLI) turn that into a silent abort.
"""

from __future__ import annotations

import hmac
import logging
import threading
from dataclasses import dataclass, field, replace

from .curve import G, Point, decode_point
from .errors import (AlreadyRegistered, BadAuthenticator, BadMac, DecodeError,
                     IdError, IdMismatch, ProtocolError, ReplayDetected,
                     StaleTimestamp, UnknownSensor, UpdateRejected)
from .params import DEFAULT_PARAMS, SysParams, parse_kv
from .primitives import (H, I, J, Ciphertext, base_mult, default_rng, mac_generate,
                         mac_verify, random_scalar, scalar_mult, sym_decrypt,
                         sym_encrypt, xor)
from .wire import (GatewayToSensorM2, LoginRequestM1, PwdUpdateRequest,
                   PwdUpdateResponse, SensorResponseM3, encode, mac_input_m1,
                   mac_input_m2, ts_bytes)

log = logging.getLogger(__name__)


class SessionClosed(ProtocolError):
    """A message arrived for a session that already accepted or aborted."""


def pad_id(ident, params: SysParams = DEFAULT_PARAMS) -> bytes:
    """Right-pad an identity with NUL bytes to ``id_len``."""
    if isinstance(ident, str):
        ident = ident.encode("utf-8")
    ident = bytes(ident)
    if not ident or len(ident) > params.id_len:
        raise IdError(f"identity must be 1..{params.id_len} bytes, got {len(ident)}")
    return ident.ljust(params.id_len, b"\x00")


def unpad_id(ident: bytes) -> str:
    return ident.rstrip(b"\x00").decode("utf-8", errors="replace")


def _pw(pw) -> bytes:
    return pw.encode("utf-8") if isinstance(pw, str) else bytes(pw)


def check_fresh(T: int, now: int, window: int) -> None:
    if abs(now - T) > window:
        raise StaleTimestamp(f"timestamp {T} outside +/-{window}s of {now}")


def derive_k_UG(T_U: int, X: Point, Y: Point, K_UG: Point, params: SysParams) -> bytes:
    return J(ts_bytes(T_U) + X.encode() + Y.encode() + K_UG.encode(), params)


def eid_mask(ID_U: bytes, PW_U, params: SysParams) -> bytes:
    return I(ID_U + _pw(PW_U), params)


# -- long-lived state ------------------------------------------------------------

@dataclass
class GatewaySecrets:
    params: SysParams
    ID_GW: bytes
    y: int
    z: bytes
    Y: Point
    sensor_registry: dict = field(default_factory=dict)  # ID_SN -> k_GS
    replay_cache: dict = field(default_factory=dict)  # (T_U, X bytes) -> T_U
    _lock: threading.RLock = field(default_factory=threading.RLock, repr=False,
                                   compare=False)

    def verifier_table(self) -> dict:
        # No password verifier of any kind is kept; registration never sees PW_U.
        return {}

    def to_text(self) -> str:
        lines = [self.params.to_text(),
                 f"id_gw = {self.ID_GW.hex()}\n",
                 f"y = {self.y:064x}\n",
                 f"z = {self.z.hex()}\n"]
        for sn, k in sorted(self.sensor_registry.items()):
            lines.append(f"sensor.{sn.hex()} = {k.hex()}\n")
        return "".join(lines)

    @classmethod
    def from_text(cls, text: str) -> "GatewaySecrets":
        kv = parse_kv(text)
        params = SysParams.from_mapping(kv)
        y = int(kv["y"], 16)
        registry = {bytes.fromhex(k[len("sensor."):]): bytes.fromhex(v)
                    for k, v in kv.items() if k.startswith("sensor.")}
        return cls(params=params, ID_GW=bytes.fromhex(kv["id_gw"]), y=y,
                   z=bytes.fromhex(kv["z"]), Y=scalar_mult(y, G),
                   sensor_registry=registry)


@dataclass(frozen=True)
class CardPayload:
    """What the gateway hands over on registration, before personalisation."""

    EID_U: bytes
    Y: Point
    ID_GW: bytes
    params: SysParams


@dataclass(frozen=True)
class SmartCard:
    XEID_U: bytes
    Y: Point
    ID_GW: bytes
    params: SysParams = DEFAULT_PARAMS

    def to_bytes(self) -> bytes:
        """Card image: XEID_U || Y || ID_GW || params digest."""
        return self.XEID_U + self.Y.encode() + self.ID_GW + self.params.digest()

    @classmethod
    def from_bytes(cls, data: bytes, params: SysParams = DEFAULT_PARAMS) -> "SmartCard":
        wb, idl = params.omega_bytes, params.id_len
        want = wb + 33 + idl + 32
        if len(data) != want:
            raise DecodeError(f"card image must be {want} bytes, got {len(data)}")
        if data[-32:] != params.digest():
            raise DecodeError("card was issued under different parameters")
        return cls(XEID_U=bytes(data[:wb]), Y=decode_point(data[wb:wb + 33]),
                   ID_GW=bytes(data[wb + 33:wb + 33 + idl]), params=params)


@dataclass(frozen=True)
class UserCredentials:
    ID_U: bytes
    PW_U: bytes

    @classmethod
    def make(cls, ID_U, PW_U, params: SysParams = DEFAULT_PARAMS) -> "UserCredentials":
        return cls(pad_id(ID_U, params), _pw(PW_U))


@dataclass(frozen=True)
class SensorIdentity:
    ID_SN: bytes
    k_GS: bytes
    params: SysParams = DEFAULT_PARAMS

    def to_text(self) -> str:
        return (self.params.to_text() + f"id_sn = {self.ID_SN.hex()}\n"
                f"k_gs = {self.k_GS.hex()}\n")

    @classmethod
    def from_text(cls, text: str) -> "SensorIdentity":
        kv = parse_kv(text)
        return cls(bytes.fromhex(kv["id_sn"]), bytes.fromhex(kv["k_gs"]),
                   SysParams.from_mapping(kv))


@dataclass
class UserSessionState:
    x: int
    k_US: bytes
    k_UG: bytes
    T_U: int
    ID_SN: bytes
    params: SysParams
    status: str = "running"  # running | accepted | aborted
    sk: bytes | None = None


# -- setup and registration ----------------------------------------------------------

def gw_init(params: SysParams = DEFAULT_PARAMS, ID_GW="GW", rng=None) -> GatewaySecrets:
    rng = rng or default_rng()
    y = random_scalar(rng)
    z = rng.randbytes(params.ell_bytes)
    return GatewaySecrets(params=params, ID_GW=pad_id(ID_GW, params), y=y, z=z,
                          Y=base_mult(y))


def gw_register_user(gw: GatewaySecrets, ID_U, rng=None) -> CardPayload:
    ID_U = pad_id(ID_U, gw.params)
    EID_U = bytes(sym_encrypt(gw.z, ID_U + gw.ID_GW, rng))
    return CardPayload(EID_U, gw.Y, gw.ID_GW, gw.params)


def card_personalize(payload: CardPayload, ID_U, PW_U) -> SmartCard:
    ID_U = pad_id(ID_U, payload.params)
    xeid = xor(payload.EID_U, eid_mask(ID_U, PW_U, payload.params))
    return SmartCard(xeid, payload.Y, payload.ID_GW, payload.params)


def gw_register_sensor(gw: GatewaySecrets, ID_SN) -> SensorIdentity:
    ID_SN = pad_id(ID_SN, gw.params)
    with gw._lock:
        if ID_SN in gw.sensor_registry:
            raise AlreadyRegistered(f"sensor {unpad_id(ID_SN)!r} already registered")
        k_GS = J(ID_SN + gw.z, gw.params)
        gw.sensor_registry[ID_SN] = k_GS
    return SensorIdentity(ID_SN, k_GS, gw.params)


# -- authentication and key exchange ------------------------------------------------------

def user_login_start(card: SmartCard, creds: UserCredentials, ID_SN, now: int,
                     rng=None, *, x: int | None = None, k_US: bytes | None = None):
    """Step 1: build M1. Returns ``(m1, state)``.

    A wrong password cannot be noticed here; the card holds no verifier.
    """
    params = card.params
    rng = rng or default_rng()
    ID_SN = pad_id(ID_SN, params)
    x = random_scalar(rng) if x is None else x
    k_US = rng.randbytes(params.kappa_bytes) if k_US is None else k_US
    T_U = int(now)

    X = base_mult(x)
    K_UG = scalar_mult(x, card.Y)
    k_UG = derive_k_UG(T_U, X, card.Y, K_UG, params)
    EID_U = xor(card.XEID_U, eid_mask(creds.ID_U, creds.PW_U, params))
    C_U = sym_encrypt(k_UG, creds.ID_U + EID_U + k_US, rng)
    sigma_U = mac_generate(k_UG, mac_input_m1(card.ID_GW, ID_SN, T_U, C_U, params))

    m1 = LoginRequestM1(T_U, ID_SN, X, C_U, sigma_U)
    state = UserSessionState(x=x, k_US=k_US, k_UG=k_UG, T_U=T_U, ID_SN=ID_SN,
                             params=params)
    return m1, state


def _check_replay(gw: GatewaySecrets, T_U: int, X: Point, now: int) -> tuple:
    window = gw.params.ts_window
    for key, t in list(gw.replay_cache.items()):
        if abs(now - t) > window:
            del gw.replay_cache[key]
    key = (T_U, X.encode())
    if key in gw.replay_cache:
        raise ReplayDetected(f"(T_U, X) already seen at T_U={T_U}")
    return key


def _gw_recover_id(gw: GatewaySecrets, k_UG: bytes, C_U: Ciphertext) -> tuple[bytes, bytes]:
    """Decrypt C_U and the embedded EID_U; return (ID_U, remainder of C_U)."""
    params = gw.params
    idl, wb = params.id_len, params.omega_bytes
    inner = sym_decrypt(k_UG, C_U)
    ID_U, EID_U, rest = inner[:idl], inner[idl:idl + wb], inner[idl + wb:]
    plain = sym_decrypt(gw.z, EID_U)
    same_user = hmac.compare_digest(plain[:idl], ID_U)
    same_gw = hmac.compare_digest(plain[idl:], gw.ID_GW)
    if not (same_user and same_gw):
        raise IdMismatch("Dec_z(EID_U) and Dec_k_UG(C_U) disagree on ID_U")
    return ID_U, rest


def gw_process_m1(gw: GatewaySecrets, m1: LoginRequestM1, now: int, rng=None) -> GatewayToSensorM2:
    """Step 2: authenticate the (anonymous) user and forward k_US to the sensor."""
    params = gw.params
    with gw._lock:
        check_fresh(m1.T_U, now, params.ts_window)
        replay_key = _check_replay(gw, m1.T_U, m1.X, now)

        K_UG = scalar_mult(gw.y, m1.X)
        k_UG = derive_k_UG(m1.T_U, m1.X, gw.Y, K_UG, params)
        if not mac_verify(k_UG, mac_input_m1(gw.ID_GW, m1.ID_SN, m1.T_U, m1.C_U, params),
                          m1.sigma_U):
            raise BadMac("sigma_U does not verify")
        ID_U, k_US = _gw_recover_id(gw, k_UG, m1.C_U)
        k_GS = gw.sensor_registry.get(m1.ID_SN)
        if k_GS is None:
            raise UnknownSensor(f"no sensor {unpad_id(m1.ID_SN)!r}")

        T_GW = int(now)
        C_GW = sym_encrypt(k_GS, k_US, rng)
        sigma_GW = mac_generate(k_GS, mac_input_m2(gw.ID_GW, m1.ID_SN, T_GW, m1.T_U,
                                                   C_GW, params))
        gw.replay_cache[replay_key] = m1.T_U
    log.debug("gateway forwarded session for sensor %s", unpad_id(m1.ID_SN))
    return GatewayToSensorM2(gw.ID_GW, T_GW, m1.T_U, C_GW, sigma_GW)


def sensor_keys(k_US: bytes, T_U: int, ID_SN: bytes, params: SysParams):
    """(sk, rho_SN); the two differ only in argument order."""
    sk = H(k_US + ts_bytes(T_U) + ID_SN, params)
    rho = H(k_US + ID_SN + ts_bytes(T_U), params)
    return sk, rho


def sensor_process_m2(sn: SensorIdentity, m2: GatewayToSensorM2, now: int):
    """Step 3: returns ``(m3, sk)``. Only symmetric operations run here."""
    params = sn.params
    check_fresh(m2.T_GW, now, params.ts_window)
    if not mac_verify(sn.k_GS, mac_input_m2(m2.ID_GW, sn.ID_SN, m2.T_GW, m2.T_U,
                                             m2.C_GW, params), m2.sigma_GW):
        raise BadMac("sigma_GW does not verify")
    k_US = sym_decrypt(sn.k_GS, m2.C_GW)
    sk, rho = sensor_keys(k_US, m2.T_U, sn.ID_SN, params)
    return SensorResponseM3(rho), sk


def user_process_m3(state: UserSessionState, m3: SensorResponseM3) -> bytes:
    """Step 4: check rho_SN, then accept with the session key."""
    if state.status != "running":
        raise SessionClosed(f"session is {state.status}")
    params = state.params
    expected = H(state.k_US + state.ID_SN + ts_bytes(state.T_U), params)
    if not hmac.compare_digest(expected, m3.rho_SN):
        state.status = "aborted"
        raise BadAuthenticator("rho_SN mismatch")
    state.sk = H(state.k_US + ts_bytes(state.T_U) + state.ID_SN, params)
    state.status = "accepted"
    return state.sk


def session_id(m1: LoginRequestM1, m2: GatewayToSensorM2,
               params: SysParams = DEFAULT_PARAMS) -> bytes:
    return H(encode(m1, params) + encode(m2, params), params)


# -- password update ----------------------------------------------------------------

def pwd_update_noninteractive(card: SmartCard, ID_U, PW_old, PW_new) -> SmartCard:
    """Re-mask XEID_U locally. Nothing checks PW_old: a typo bricks the card."""
    ID_U = pad_id(ID_U, card.params)
    params = card.params
    xeid = xor(xor(card.XEID_U, eid_mask(ID_U, PW_old, params)),
               eid_mask(ID_U, PW_new, params))
    return replace(card, XEID_U=xeid)


@dataclass
class PendingPwdUpdate:
    card: SmartCard
    ID_U: bytes
    EID_U: bytes
    X: Point
    k_UG: bytes


def pwd_update_start(card: SmartCard, ID_U, PW_old, now: int, rng=None):
    params = card.params
    rng = rng or default_rng()
    ID_U = pad_id(ID_U, params)
    T_U = int(now)
    x = random_scalar(rng)
    X = base_mult(x)
    K_UG = scalar_mult(x, card.Y)
    k_UG = derive_k_UG(T_U, X, card.Y, K_UG, params)
    EID_U = xor(card.XEID_U, eid_mask(ID_U, PW_old, params))
    C_U = sym_encrypt(k_UG, ID_U + EID_U, rng)
    return PwdUpdateRequest(T_U, X, C_U), PendingPwdUpdate(card, ID_U, EID_U, X, k_UG)


def _rho_gw(ID_GW, ID_U, X: Point, k_UG, params):
    return H(ID_GW + ID_U + X.encode() + k_UG, params)


def gw_process_pwd_update(gw: GatewaySecrets, req: PwdUpdateRequest, now: int) -> PwdUpdateResponse:
    params = gw.params
    try:
        with gw._lock:
            check_fresh(req.T_U, now, params.ts_window)
            replay_key = _check_replay(gw, req.T_U, req.X, now)
            K_UG = scalar_mult(gw.y, req.X)
            k_UG = derive_k_UG(req.T_U, req.X, gw.Y, K_UG, params)
            ID_U, _ = _gw_recover_id(gw, k_UG, req.C_U)
            gw.replay_cache[replay_key] = req.T_U
    except ProtocolError as exc:
        log.info("password update rejected: %s", exc.name)
        return PwdUpdateResponse(False)
    return PwdUpdateResponse(True, _rho_gw(gw.ID_GW, ID_U, req.X, k_UG, params))


def user_finish_pwd_update(pending: PendingPwdUpdate, resp: PwdUpdateResponse, PW_new) -> SmartCard:
    card = pending.card
    if not resp.ok:
        raise UpdateRejected("gateway refused the password update")
    expected = _rho_gw(card.ID_GW, pending.ID_U, pending.X, pending.k_UG, card.params)
    if resp.rho_GW is None or not hmac.compare_digest(expected, resp.rho_GW):
        raise BadAuthenticator("rho_GW mismatch")
    xeid = xor(pending.EID_U, eid_mask(pending.ID_U, PW_new, card.params))
    return replace(card, XEID_U=xeid)
