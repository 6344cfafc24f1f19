"""Offline dictionary attacks on stolen smart cards.

Two sides of the same experiment:

* Jiang et al.'s lightweight scheme, where a stolen card plus one
  eavesdropped login yields the user's identity and password by pure
  hashing;
* this package's scheme, where the same candidate filter finds nothing
  to test against, because every value that would confirm a guess sits
  under ``k_UG`` or ``z``.

A deliberately weakened card that stores ``H(ID_U || PW_U)`` serves as a
control, showing the filter does eliminate candidates when it can.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field

from .errors import NotFound
from .params import DEFAULT_PARAMS, SysParams
from .primitives import H as scheme_H, xor
from .roles import SmartCard, eid_mask, pad_id, _pw
from .wire import decode, message_fields, ts_bytes

_JIANG_TAG = b"\x10"
_ID_LEN = DEFAULT_PARAMS.id_len


def jiang_hash(msg: bytes) -> bytes:
    return hashlib.sha256(_JIANG_TAG + msg).digest()


def _jid(ident) -> bytes:
    return pad_id(ident, DEFAULT_PARAMS)


@dataclass(frozen=True)
class JiangCard:
    TID_U: bytes
    TE_U: int
    PTC_U: bytes
    r: bytes


@dataclass(frozen=True)
class JiangLoginMsg:
    TID_U: bytes
    C_U: bytes
    PKS_U: bytes
    T_U: int


@dataclass
class JiangGateway:
    """Holds MK and the (TID_U, ID_U, TE_U) table; the attack never uses it."""

    MK: bytes
    verification_table: list = field(default_factory=list)


@dataclass
class CandidateSpace:
    pw_dict: list
    id_space: list

    def __post_init__(self):
        if not self.pw_dict or not self.id_space:
            raise ValueError("candidate space needs at least one password and one identity")

    @property
    def size(self) -> int:
        return len(self.pw_dict) * len(self.id_space)


def jiang_register(MK: bytes, ID_U, PW_U, r: bytes, TID_U: bytes, TE_U: int,
                   gateway: JiangGateway | None = None) -> JiangCard:
    ID_U = _jid(ID_U)
    RPW_U = jiang_hash(r + _pw(PW_U))
    TC_U = jiang_hash(MK + ID_U + ts_bytes(TE_U))
    if gateway is not None:
        gateway.verification_table.append((TID_U, ID_U, TE_U))
    return JiangCard(TID_U, TE_U, xor(TC_U, RPW_U), r)


def jiang_login(card: JiangCard, ID_U, PW_U, K_U: bytes, T_U: int) -> JiangLoginMsg:
    ID_U = _jid(ID_U)
    TC_U = xor(card.PTC_U, jiang_hash(card.r + _pw(PW_U)))
    PKS_U = xor(K_U, jiang_hash(TC_U + ts_bytes(T_U)))
    C_U = jiang_hash(ID_U + K_U + TC_U + ts_bytes(T_U))
    return JiangLoginMsg(card.TID_U, C_U, PKS_U, T_U)


@dataclass
class AttackResult:
    ID_U: str
    PW_U: str
    hash_count: int
    elapsed: float = 0.0


def jiang_dictionary_attack(card: JiangCard, msg: JiangLoginMsg,
                            space: CandidateSpace) -> AttackResult:
    """Guess PW, peel TC and K, then test every identity against C_U."""
    start = time.perf_counter()
    T = ts_bytes(msg.T_U)
    ids = [(ident, _jid(ident)) for ident in space.id_space]
    count = 0
    for pw in space.pw_dict:
        TC = xor(card.PTC_U, jiang_hash(card.r + _pw(pw)))
        K = xor(msg.PKS_U, jiang_hash(TC + T))
        count += 2
        tail = K + TC + T
        for ident, padded in ids:
            count += 1
            if jiang_hash(padded + tail) == msg.C_U:
                return AttackResult(str(ident), str(pw), count,
                                    time.perf_counter() - start)
    raise NotFound(f"no candidate among {space.size} matched C_U after {count} hashes")


# -- the same filter against this scheme ---------------------------------------------------

@dataclass(frozen=True)
class WeakenedSmartCard(SmartCard):
    """Control only: a card that also stores H(ID_U || PW_U) as a verifier."""

    verifier: bytes = b""


def weaken(card: SmartCard, ID_U, PW_U) -> WeakenedSmartCard:
    v = scheme_H(pad_id(ID_U, card.params) + _pw(PW_U), card.params)
    return WeakenedSmartCard(card.XEID_U, card.Y, card.ID_GW, card.params, verifier=v)


def _public_values(card: SmartCard, transcript) -> set:
    """Every byte-string an attacker holding the card and transcript can see."""
    params = card.params
    values = {card.XEID_U, card.Y.encode(), card.ID_GW}
    verifier = getattr(card, "verifier", b"")
    if verifier:
        values.add(verifier)
    for item in transcript:
        if isinstance(item, tuple):  # (sender, receiver, bytes) transcript rows
            item = item[-1]
        msg = decode(item, params) if isinstance(item, (bytes, bytearray)) else item
        values.update(v for v in message_fields(msg).values() if isinstance(v, bytes))
    return values


def _derived(card: SmartCard, ID: bytes, pw: bytes):
    """Values an attacker can compute from one (ID', PW') guess."""
    mask = eid_mask(ID, pw, card.params)
    return mask, xor(card.XEID_U, mask), scheme_H(ID + pw, card.params)


def our_scheme_offline_filter(card: SmartCard, transcript, space: CandidateSpace) -> int:
    """Count the candidates an offline attacker cannot rule out.

    A public value acts as a password verifier if some guess reproduces
    it from (ID', PW'). Each such value narrows the survivors to the
    guesses that reproduce it; with no such value, every guess survives.
    """
    public = _public_values(card, transcript)
    hits: dict[bytes, set] = {}
    n = 0
    for ident in space.id_space:
        ID = pad_id(ident, card.params)
        for pw in space.pw_dict:
            for value in _derived(card, ID, _pw(pw)):
                if value in public:
                    hits.setdefault(value, set()).add(n)
            n += 1
    if not hits:
        return n
    return len(set.intersection(*hits.values()))


def default_space(n_pw: int = 1000, n_id: int = 100) -> CandidateSpace:
    return CandidateSpace([f"pw{i:05d}" for i in range(n_pw)],
                          [f"user{i:04d}" for i in range(n_id)])


def read_wordlist(path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        words = [line.rstrip("\r\n") for line in fh]
    return [w for w in words if w]
