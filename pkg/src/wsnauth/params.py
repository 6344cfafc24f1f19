"""System parameters and the ``key = value`` parameter file format."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, asdict

from .errors import ParamError

NONCE_LEN = 16
SUPPORTED_CURVES = ("P-256",)
_FILE_KEYS = ("curve_id", "kappa", "ell", "id_len", "ts_window")


@dataclass(frozen=True)
class SysParams:
    curve_id: str = "P-256"
    kappa: int = 256  # session key bits (H output)
    ell: int = 256  # MAC / symmetric key bits (J output)
    id_len: int = 16  # identity width in bytes
    ts_window: int = 60  # seconds

    def __post_init__(self):
        if self.curve_id not in SUPPORTED_CURVES:
            raise ParamError(f"unsupported curve {self.curve_id!r}")
        for name in ("kappa", "ell"):
            v = getattr(self, name)
            if v <= 0 or v % 8:
                raise ParamError(f"{name} must be a positive multiple of 8, got {v}")
        if self.ell not in (128, 192, 256):
            raise ParamError(f"ell must be an AES key size, got {self.ell}")
        if self.id_len <= 0:
            raise ParamError("id_len must be positive")
        if self.ts_window < 0:
            raise ParamError("ts_window must be non-negative")

    @property
    def nonce_len(self) -> int:
        return NONCE_LEN

    @property
    def omega(self) -> int:
        # EID = Enc_z(ID_U || ID_GW): nonce plus a length-preserving body
        return 8 * (NONCE_LEN + 2 * self.id_len)

    @property
    def kappa_bytes(self) -> int:
        return self.kappa // 8

    @property
    def ell_bytes(self) -> int:
        return self.ell // 8

    @property
    def omega_bytes(self) -> int:
        return self.omega // 8

    def to_text(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in asdict(self).items())

    def digest(self) -> bytes:
        return hashlib.sha256(self.to_text().encode()).digest()

    @classmethod
    def from_mapping(cls, kv: dict) -> "SysParams":
        kwargs = {}
        for key in _FILE_KEYS:
            if key not in kv:
                continue
            raw = kv[key]
            kwargs[key] = raw if key == "curve_id" else _parse_int(key, raw)
        return cls(**kwargs)

    @classmethod
    def from_text(cls, text: str) -> "SysParams":
        return cls.from_mapping(parse_kv(text))


DEFAULT_PARAMS = SysParams()


def _parse_int(key, raw):
    try:
        return int(raw)
    except ValueError:
        raise ParamError(f"{key}: expected an integer, got {raw!r}") from None


def parse_kv(text: str) -> dict:
    """Parse ``key = value`` lines. Blank lines and ``#`` comments are skipped."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ParamError(f"line {lineno}: expected 'key = value'")
        key = key.strip()
        if key in out:
            raise ParamError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def load_params(path) -> SysParams:
    with open(path, encoding="utf-8") as fh:
        return SysParams.from_text(fh.read())
