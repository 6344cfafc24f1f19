"""Cryptographic building blocks consumed by the protocol roles.

* group: P-256, compressed point encoding (see :mod:`wsnauth.curve`)
* hash functions H, J, I: SHA-256 in counter mode with a one-byte
  domain tag, truncated to kappa, ell and omega bits respectively
* MAC: HMAC-SHA256
* symmetric encryption: AES-CTR with a random 16-byte initial counter
  block prepended to the body, so ciphertext length is plaintext + 16

Every counted operation reports to the active :class:`OpTally` (if one
is installed via :func:`metered`) so the operation audit can observe
the protocol without the roles knowing about it.
"""

from __future__ import annotations

import contextlib
import enum
import hashlib
import hmac
import secrets
from contextvars import ContextVar
from dataclasses import dataclass

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from . import curve
from .curve import G, Point, decode_point
from .errors import DecodeError, InvalidPoint
from .params import DEFAULT_PARAMS, NONCE_LEN, SysParams

MAC_LEN = 32
POINT_LEN = curve.ENCODED_LEN
ORDER = curve.q

_system_rng = secrets.SystemRandom()


def default_rng():
    return _system_rng


# -- operation metering ------------------------------------------------------

class OpTally:
    """Bare counter sink; :class:`wsnauth.opcount.OpCounter` builds on it."""

    __slots__ = ("M", "P", "E", "A", "H")

    def __init__(self):
        self.M = self.P = self.E = self.A = self.H = 0

    def tick(self, kind: str) -> None:
        setattr(self, kind, getattr(self, kind) + 1)


_meter: ContextVar[OpTally | None] = ContextVar("wsnauth_meter", default=None)


@contextlib.contextmanager
def metered(tally: OpTally):
    token = _meter.set(tally)
    try:
        yield tally
    finally:
        _meter.reset(token)


def _tick(kind: str) -> None:
    tally = _meter.get()
    if tally is not None:
        tally.tick(kind)


# -- group -------------------------------------------------------------------

def random_scalar(rng=None) -> int:
    rng = rng or _system_rng
    return rng.randrange(1, ORDER)


def scalar_mult(s: int, Q: Point | bytes) -> Point:
    """``s * Q``. ``Q`` may be given as its compressed encoding."""
    if isinstance(Q, (bytes, bytearray)):
        Q = decode_point(bytes(Q))
    elif not Q.on_curve():
        raise InvalidPoint("point is not on the curve")
    _tick("M")
    return curve.scalar_mult(s, Q)


def base_mult(s: int) -> Point:
    return scalar_mult(s, G)


def decode_element(data: bytes) -> Point:
    """Decode a protocol group element (on-curve, non-identity)."""
    return decode_point(data)


def encode_element(Q: Point) -> bytes:
    return Q.encode()


# -- hashing -----------------------------------------------------------------

class Domain(enum.Enum):
    H = b"H"  # kappa bits: session keys, authenticators
    J = b"J"  # ell bits: MAC / symmetric keys
    I = b"I"  # omega bits: EID mask  # noqa: E741


def out_len(domain: Domain, params: SysParams = DEFAULT_PARAMS) -> int:
    return {
        Domain.H: params.kappa_bytes,
        Domain.J: params.ell_bytes,
        Domain.I: params.omega_bytes,
    }[domain]


def expand(tag: bytes, msg: bytes, n: int) -> bytes:
    """SHA-256 counter-mode expansion: blocks of ``tag || ctr32 || msg``."""
    blocks = []
    for ctr in range(-(-n // 32)):
        blocks.append(hashlib.sha256(tag + ctr.to_bytes(4, "big") + msg).digest())
    return b"".join(blocks)[:n]


def hash(domain: Domain, msg: bytes, params: SysParams = DEFAULT_PARAMS) -> bytes:  # noqa: A001
    _tick("H")
    return expand(domain.value, msg, out_len(domain, params))


def H(msg: bytes, params: SysParams = DEFAULT_PARAMS) -> bytes:
    return hash(Domain.H, msg, params)


def J(msg: bytes, params: SysParams = DEFAULT_PARAMS) -> bytes:
    return hash(Domain.J, msg, params)


def I(msg: bytes, params: SysParams = DEFAULT_PARAMS) -> bytes:  # noqa: E741,E743
    return hash(Domain.I, msg, params)


def xor(x: bytes, y: bytes) -> bytes:
    if len(x) != len(y):
        raise ValueError(f"xor of unequal lengths {len(x)} and {len(y)}")
    return bytes(i ^ j for i, j in zip(x, y))


# -- MAC ---------------------------------------------------------------------

def _check_key(k: bytes) -> None:
    if len(k) not in (16, 24, 32):
        raise ValueError(f"bad key length {len(k)}")


def mac_generate(k: bytes, m: bytes) -> bytes:
    _check_key(k)
    _tick("A")
    return hmac.new(k, m, hashlib.sha256).digest()


def mac_verify(k: bytes, m: bytes, tag: bytes) -> bool:
    _check_key(k)
    if len(tag) != MAC_LEN:
        raise DecodeError(f"MAC tag must be {MAC_LEN} bytes, got {len(tag)}")
    _tick("A")
    return hmac.compare_digest(hmac.new(k, m, hashlib.sha256).digest(), tag)


# -- symmetric encryption ----------------------------------------------------

@dataclass(frozen=True)
class Ciphertext:
    nonce: bytes
    body: bytes

    def __bytes__(self) -> bytes:
        return self.nonce + self.body

    def __len__(self) -> int:
        return len(self.nonce) + len(self.body)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Ciphertext":
        if len(data) < NONCE_LEN:
            raise DecodeError(f"ciphertext shorter than its {NONCE_LEN}-byte nonce")
        return cls(bytes(data[:NONCE_LEN]), bytes(data[NONCE_LEN:]))


def _ctr(k: bytes, nonce: bytes, data: bytes) -> bytes:
    ctx = Cipher(algorithms.AES(k), modes.CTR(nonce)).encryptor()
    return ctx.update(data) + ctx.finalize()


def sym_encrypt(k: bytes, m: bytes, rng=None) -> Ciphertext:
    _check_key(k)
    if not m:
        raise ValueError("refusing to encrypt an empty message")
    rng = rng or _system_rng
    nonce = rng.randbytes(NONCE_LEN)
    _tick("E")
    return Ciphertext(nonce, _ctr(k, nonce, m))


def sym_decrypt(k: bytes, c: Ciphertext | bytes) -> bytes:
    _check_key(k)
    if not isinstance(c, Ciphertext):
        c = Ciphertext.from_bytes(c)
    _tick("E")
    return _ctr(k, c.nonce, c.body)
