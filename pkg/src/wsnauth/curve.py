"""NIST P-256 group arithmetic.

Points are kept affine between calls and lifted to Jacobian coordinates
for scalar multiplication. The operation sequence does not depend on the
scalar, but table lookups and Python big-int arithmetic are not constant
time, so do not treat this as side-channel hardened.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import InvalidPoint

# Short names follow SEC 2 / FIPS 186-4.
p = 0xFFFFFFFF00000001000000000000000000000000FFFFFFFFFFFFFFFFFFFFFFFF
a = p - 3
b = 0x5AC635D8AA3A93E7B3EBBD55769886BC651D06B0CC53B0F63BCE3C3E27D2604B
q = 0xFFFFFFFF00000000FFFFFFFFFFFFFFFFBCE6FAADA7179E84F3B9CAC2FC632551
GX = 0x6B17D1F2E12C4247F8BCE6E563A440F277037D812DEB33A0F4A13945D898C296
GY = 0x4FE342E2FE1A7F9B8EE7EB4A7C0F9E162BCE33576B315ECECBB6406837BF51F5

COORD_LEN = 32
ENCODED_LEN = 1 + COORD_LEN
_INF = (1, 1, 0)


@dataclass(frozen=True)
class Point:
    """An affine point; ``None`` coordinates denote the identity."""

    x: int | None
    y: int | None

    @property
    def is_identity(self) -> bool:
        return self.x is None

    def on_curve(self) -> bool:
        if self.is_identity:
            return True
        x, y = self.x, self.y
        if not (0 <= x < p and 0 <= y < p):
            return False
        return (y * y - (x * x * x + a * x + b)) % p == 0

    def encode(self) -> bytes:
        """Compressed SEC1 encoding (``02``/``03`` || x)."""
        if self.is_identity:
            raise InvalidPoint("the identity has no compressed encoding")
        return bytes([2 | (self.y & 1)]) + self.x.to_bytes(COORD_LEN, "big")

    def __neg__(self) -> "Point":
        if self.is_identity:
            return self
        return Point(self.x, (-self.y) % p)

    def __add__(self, other: "Point") -> "Point":
        return _to_affine(_add(_to_jac(self), _to_jac(other)))

    def __rmul__(self, k: int) -> "Point":
        return scalar_mult(k, self)

    def __repr__(self):
        if self.is_identity:
            return "Point(identity)"
        return f"Point({self.encode().hex()})"


IDENTITY = Point(None, None)
G = Point(GX, GY)


def decode_point(data: bytes) -> Point:
    """Decode a compressed point, rejecting anything not in the group.

    P-256 has cofactor 1, so any on-curve point lies in the prime-order
    subgroup. The identity cannot be expressed in compressed form.
    """
    if len(data) != ENCODED_LEN:
        raise InvalidPoint(f"expected {ENCODED_LEN} bytes, got {len(data)}")
    prefix = data[0]
    if prefix not in (2, 3):
        raise InvalidPoint(f"bad point prefix 0x{prefix:02x}")
    x = int.from_bytes(data[1:], "big")
    if x >= p:
        raise InvalidPoint("x coordinate out of range")
    rhs = (x * x * x + a * x + b) % p
    y = pow(rhs, (p + 1) // 4, p)  # p = 3 mod 4
    if y * y % p != rhs:
        raise InvalidPoint("x is not the abscissa of a curve point")
    if (y & 1) != (prefix & 1):
        y = p - y
    return Point(x, y)


def _to_jac(P: Point):
    return _INF if P.is_identity else (P.x, P.y, 1)


def _to_affine(J) -> Point:
    X, Y, Z = J
    if Z == 0:
        return IDENTITY
    zi = pow(Z, -1, p)
    zi2 = zi * zi % p
    return Point(X * zi2 % p, Y * zi2 * zi % p)


def _dbl(J):
    X, Y, Z = J
    if Z == 0 or Y == 0:
        return _INF
    # dbl-2001-b for a = -3
    delta = Z * Z % p
    gamma = Y * Y % p
    beta = X * gamma % p
    alpha = 3 * (X - delta) * (X + delta) % p
    X3 = (alpha * alpha - 8 * beta) % p
    Z3 = ((Y + Z) ** 2 - gamma - delta) % p
    Y3 = (alpha * (4 * beta - X3) - 8 * gamma * gamma) % p
    return (X3, Y3, Z3)


def _add(J1, J2):
    X1, Y1, Z1 = J1
    X2, Y2, Z2 = J2
    if Z1 == 0:
        return J2
    if Z2 == 0:
        return J1
    z1z1 = Z1 * Z1 % p
    z2z2 = Z2 * Z2 % p
    u1 = X1 * z2z2 % p
    u2 = X2 * z1z1 % p
    s1 = Y1 * Z2 * z2z2 % p
    s2 = Y2 * Z1 * z1z1 % p
    h = (u2 - u1) % p
    r = (s2 - s1) % p
    if h == 0:
        return _dbl(J1) if r == 0 else _INF
    hh = h * h % p
    hhh = h * hh % p
    v = u1 * hh % p
    X3 = (r * r - hhh - 2 * v) % p
    Y3 = (r * (v - X3) - s1 * hhh) % p
    Z3 = Z1 * Z2 * h % p
    return (X3, Y3, Z3)


def scalar_mult(k: int, P: Point) -> Point:
    """Return ``k * P`` using a fixed 4-bit window.

    Every scalar runs the same 64 rounds of four doublings and one table
    addition, with the zero digit adding the identity.
    """
    k %= q
    base = _to_jac(P)
    table = [_INF, base]
    for _ in range(14):
        table.append(_add(table[-1], base))
    R = _INF
    for shift in range(252, -1, -4):
        R = _dbl(_dbl(_dbl(_dbl(R))))
        R = _add(R, table[(k >> shift) & 15])
    return _to_affine(R)
