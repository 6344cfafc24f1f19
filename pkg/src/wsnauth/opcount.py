"""Count cryptographic operations per role and compare with the published table.

Operation classes: M scalar-point multiplication, P map-to-point,
E symmetric encryption/decryption, A MAC generation/verification,
H hash evaluation (J and I are counted as H). XORs and point
validation are not counted.
"""

from __future__ import annotations

import random

from .params import DEFAULT_PARAMS, SysParams
from .primitives import OpTally, metered

OPS = ("M", "P", "E", "A", "H")
ROLES = ("u", "gw", "sn")

# Per-role split follows from walking the four steps; the sensor row and
# the totals are the published figures.
EXPECTED = {
    "u": dict(M=2, P=0, E=1, A=1, H=4),
    "gw": dict(M=1, P=0, E=3, A=2, H=1),
    "sn": dict(M=0, P=0, E=1, A=1, H=2),
    "total": dict(M=3, P=0, E=5, A=4, H=7),
}


class OpCounter(OpTally):
    def __init__(self, role: str = "", phase: str = "ake", **counts):
        super().__init__()
        self.role = role
        self.phase = phase
        for k, v in counts.items():
            setattr(self, k, v)

    def as_dict(self) -> dict:
        return {op: getattr(self, op) for op in OPS}

    def __add__(self, other: "OpCounter") -> "OpCounter":
        return OpCounter(self.role, self.phase,
                         **{op: getattr(self, op) + getattr(other, op) for op in OPS})

    def __eq__(self, other):
        if isinstance(other, dict):
            return self.as_dict() == {op: other.get(op, 0) for op in OPS}
        if isinstance(other, OpTally):
            return self.as_dict() == {op: getattr(other, op) for op in OPS}
        return NotImplemented

    def notation(self) -> str:
        """Compact form, e.g. ``3M+5E+4A+7H``."""
        parts = [f"{getattr(self, op)}{op}" for op in OPS if getattr(self, op)]
        return "+".join(parts) or "0"

    def __repr__(self):
        return f"OpCounter({self.role!r}, {self.notation()})"


def audited_session(params: SysParams = DEFAULT_PARAMS, seed: int = 0,
                    now: int = 1_700_000_000) -> dict:
    """Run one honest login and return ``{"u", "gw", "sn", "total"}`` counters.

    Setup and registration run unmetered; only the four login steps count.
    """
    from . import roles

    rng = random.Random(seed)
    gw = roles.gw_init(params, "GW", rng)
    sn = roles.gw_register_sensor(gw, "sensor-1")
    card = roles.card_personalize(roles.gw_register_user(gw, "alice", rng), "alice", "pw")
    creds = roles.UserCredentials.make("alice", "pw", params)

    c = {role: OpCounter(role) for role in ROLES}
    with metered(c["u"]):
        m1, state = roles.user_login_start(card, creds, "sensor-1", now, rng)
    with metered(c["gw"]):
        m2 = roles.gw_process_m1(gw, m1, now, rng)
    with metered(c["sn"]):
        m3, sk_sn = roles.sensor_process_m2(sn, m2, now)
    with metered(c["u"]):
        sk_u = roles.user_process_m3(state, m3)
    if sk_u != sk_sn:
        raise AssertionError("audited session did not agree on a key")

    total = OpCounter("total")
    for role in ROLES:
        total = total + c[role]
    total.role = "total"
    c["total"] = total
    return c


def report(counters: dict, expected: dict = EXPECTED) -> str:
    """Table-1-style rows with PASS/FAIL against the expected counts."""
    lines = [f"{'role':<6} {'counts':<22} {'expected':<22} verdict"]
    for role in (*ROLES, "total"):
        got = counters[role]
        want = OpCounter(role, **expected[role])
        if got == want:
            verdict = "PASS"
        else:
            delta = ", ".join(f"{op}{getattr(got, op) - getattr(want, op):+d}"
                              for op in OPS if getattr(got, op) != getattr(want, op))
            verdict = f"FAIL ({delta})"
        shown = " ".join(f"{op}={getattr(got, op)}" for op in ("M", "E", "A", "H"))
        lines.append(f"{role:<6} {shown:<22} {want.notation():<22} {verdict}")
    return "\n".join(lines) + "\n"


def all_pass(counters: dict, expected: dict = EXPECTED) -> bool:
    return all(counters[r] == OpCounter(r, **expected[r]) for r in (*ROLES, "total"))


def machine_lines(counters: dict) -> str:
    """``role.op = n`` lines."""
    return "".join(f"{role}.{op} = {getattr(counters[role], op)}\n"
                   for role in (*ROLES, "total") for op in OPS)
