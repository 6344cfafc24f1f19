"""In-memory network simulator exposing the security-model oracles.

An :class:`AdversaryContext` owns one gateway, its registered users and
sensors, every protocol instance, a virtual clock and the log of
corruption/reveal queries. It is single threaded and fully deterministic
for a given seed.
"""

from __future__ import annotations

import logging
import random
import shlex
from dataclasses import dataclass, field

from . import roles, wire
from .errors import NotAccepted, UnknownEntity, WsnAuthError
from .params import DEFAULT_PARAMS, SysParams
from .primitives import H

log = logging.getLogger(__name__)

GATEWAY = "gw"


@dataclass(frozen=True)
class Start:
    """The distinguished ``start:(SN, GW)`` input for a user instance."""

    sensor: str


@dataclass
class EntityInstance:
    entity_id: str
    kind: str  # user | sensor | gateway
    instance_no: int
    role_state: object = None
    status: str = "idle"  # idle | running | accepted | done | aborted
    sk: bytes | None = None
    sid: bytes | None = None
    peer: str | None = None
    error: str | None = None
    sent: list = field(default_factory=list)

    @property
    def accepted(self) -> bool:
        return self.status == "accepted"

    @property
    def closed(self) -> bool:
        return self.status in ("accepted", "done", "aborted")

    @property
    def label(self) -> str:
        return f"{self.entity_id}.{self.instance_no}"


class Transcript:
    """Append-only list of ``(sender, receiver, encoded message)``."""

    def __init__(self):
        self._rows: list[tuple[str, str, bytes]] = []

    def append(self, sender: str, receiver: str, data: bytes) -> None:
        self._rows.append((sender, receiver, bytes(data)))

    def __iter__(self):
        return iter(self._rows)

    def __len__(self):
        return len(self._rows)

    def __getitem__(self, i):
        return self._rows[i]

    def messages(self, params: SysParams = DEFAULT_PARAMS) -> list:
        return [wire.decode(data, params) for _, _, data in self._rows]

    def to_log(self) -> str:
        return wire.format_log((f"{s}->{r}", d) for s, r, d in self._rows)


@dataclass
class _User:
    creds: roles.UserCredentials
    card: roles.SmartCard


class AdversaryContext:
    def __init__(self, params: SysParams = DEFAULT_PARAMS, seed: int | None = 0,
                 clock: int = 1_700_000_000, gw_id: str = "GW"):
        self.params = params
        self.rng = random.Random(seed)
        self.clock = clock
        self.gw = roles.gw_init(params, gw_id, self.rng)
        self.users: dict[str, _User] = {}
        self.sensors: dict[str, roles.SensorIdentity] = {}
        self.instances: list[EntityInstance] = []
        self.transcript = Transcript()
        self.events: list[tuple[str, object]] = []  # oracle query log
        self._counters: dict[str, int] = {}
        self._m1_origin: dict[bytes, EntityInstance] = {}
        self._relay: dict[bytes, bytes] = {}  # M1 bytes -> M2 bytes
        self._relay_back: dict[bytes, bytes] = {}  # M2 bytes -> M1 bytes
        self._last: dict[str, bytes] = {}
        self.last_instances: tuple = ()

    # -- setup -----------------------------------------------------------------------
    def register_user(self, uid: str, password) -> roles.SmartCard:
        payload = roles.gw_register_user(self.gw, uid, self.rng)
        card = roles.card_personalize(payload, uid, password)
        self.users[uid] = _User(roles.UserCredentials.make(uid, password, self.params), card)
        return card

    def register_sensor(self, sid: str) -> roles.SensorIdentity:
        self.sensors[sid] = roles.gw_register_sensor(self.gw, sid)
        return self.sensors[sid]

    def advance(self, seconds: int) -> int:
        if seconds < 0:
            raise ValueError("the virtual clock only moves forward")
        self.clock += seconds
        return self.clock

    # -- corruption bookkeeping (derived from the event log) --------------------------------
    def _events(self, op):
        return {arg for o, arg in self.events if o == op}

    @property
    def corrupted_ll_users(self) -> set:
        return self._events("corrupt_ll_user")

    @property
    def corrupted_sc_users(self) -> set:
        return self._events("corrupt_sc")

    @property
    def corrupted_sensors(self) -> set:
        return self._events("corrupt_ll_sensor")

    @property
    def gw_corrupted(self) -> bool:
        return bool(self._events("corrupt_ll_gateway"))

    @property
    def revealed(self) -> set:
        return self._events("reveal")

    # -- instances ------------------------------------------------------------------------
    def _kind(self, entity: str) -> str:
        if entity == GATEWAY:
            return "gateway"
        if entity in self.users:
            return "user"
        if entity in self.sensors:
            return "sensor"
        raise UnknownEntity(entity)

    def new_instance(self, entity: str) -> EntityInstance:
        kind = self._kind(entity)
        n = self._counters.get(entity, 0) + 1
        self._counters[entity] = n
        inst = EntityInstance(entity, kind, n)
        self.instances.append(inst)
        return inst

    def _instance(self, label: str) -> EntityInstance:
        for inst in self.instances:
            if inst.label == label:
                return inst
        raise UnknownEntity(label)

    def _abort(self, inst: EntityInstance, exc: WsnAuthError) -> None:
        inst.status = "aborted"
        inst.error = exc.name
        if isinstance(inst.role_state, roles.UserSessionState):
            inst.role_state.status = "aborted"
        log.info("%s aborted: %s", inst.label, exc.name)

    def _sid(self, m1: bytes | None, m2: bytes | None) -> bytes:
        if m1 and m2:
            return roles.session_id(wire.decode(m1, self.params),
                                    wire.decode(m2, self.params), self.params)
        # one half was never relayed by the gateway: give it a sid no peer can share
        return H(b"unlinked" + (m1 or m2), self.params)

    def send(self, inst: EntityInstance, msg) -> bytes | None:
        """Deliver ``msg`` (bytes or :class:`Start`) and return the reply, if any."""
        if inst.closed:
            return None
        try:
            reply = self._step(inst, msg)
        except WsnAuthError as exc:
            self._abort(inst, exc)
            return None
        if reply is not None:
            inst.sent.append(reply)
        return reply

    def _step(self, inst, msg):
        now = self.clock
        if inst.kind == "user":
            return self._user_step(inst, msg, now)
        if isinstance(msg, Start):
            raise roles.SessionClosed("only user instances can be started")
        decoded = wire.decode(msg, self.params)
        if inst.kind == "gateway":
            if isinstance(decoded, wire.LoginRequestM1):
                m2 = wire.encode(roles.gw_process_m1(self.gw, decoded, now, self.rng),
                                 self.params)
                self._relay[bytes(msg)] = m2
                self._relay_back[m2] = bytes(msg)
                inst.status = "done"
                return m2
            if isinstance(decoded, wire.PwdUpdateRequest):
                resp = roles.gw_process_pwd_update(self.gw, decoded, now)
                inst.status = "done"
                return wire.encode(resp, self.params)
            raise roles.SessionClosed(f"gateway does not accept {type(decoded).__name__}")
        # sensor
        if not isinstance(decoded, wire.GatewayToSensorM2):
            raise roles.SessionClosed(f"sensor does not accept {type(decoded).__name__}")
        m3, sk = roles.sensor_process_m2(self.sensors[inst.entity_id], decoded, now)
        m1 = self._relay_back.get(bytes(msg))
        origin = self._m1_origin.get(m1) if m1 else None
        inst.peer = origin.entity_id if origin else None
        inst.sk, inst.sid, inst.status = sk, self._sid(m1, bytes(msg)), "accepted"
        return wire.encode(m3, self.params)

    def _user_step(self, inst, msg, now):
        user = self.users[inst.entity_id]
        if isinstance(msg, Start):
            if inst.status != "idle":
                raise roles.SessionClosed("user instance already started")
            m1, state = roles.user_login_start(user.card, user.creds, msg.sensor, now, self.rng)
            data = wire.encode(m1, self.params)
            inst.role_state, inst.status, inst.peer = state, "running", msg.sensor
            self._m1_origin[data] = inst
            return data
        if inst.status != "running":
            raise roles.SessionClosed("user instance not started")
        m3 = wire.decode(msg, self.params)
        if not isinstance(m3, wire.SensorResponseM3):
            raise roles.SessionClosed(f"user does not accept {type(m3).__name__}")
        sk = roles.user_process_m3(inst.role_state, m3)
        m1 = inst.sent[0]
        inst.sk, inst.sid, inst.status = sk, self._sid(m1, self._relay.get(m1)), "accepted"
        return None

    def execute(self, U: str, SN: str, GW: str = GATEWAY) -> Transcript:
        """Run one honest session and return its three-message transcript."""
        if GW != GATEWAY:
            raise UnknownEntity(GW)
        u, g, s = self.new_instance(U), self.new_instance(GW), self.new_instance(SN)
        out = Transcript()

        def hop(src, dst, data):
            out.append(src.label, dst.label, data)
            self.transcript.append(src.label, dst.label, data)

        m1 = self.send(u, Start(SN))
        hop(u, g, m1)
        m2 = self.send(g, m1)
        if m2 is None:
            return out
        hop(g, s, m2)
        m3 = self.send(s, m2)
        if m3 is None:
            return out
        hop(s, u, m3)
        self.send(u, m3)
        for (_, _, data), name in zip(out, ("M1", "M2", "M3")):
            self._last[name] = data
        self.last_instances = (u, g, s)
        return out

    # -- oracle queries --------------------------------------------------------------------
    def reveal(self, inst: EntityInstance) -> bytes:
        if not inst.accepted:
            raise NotAccepted(f"{inst.label} has not accepted")
        self.events.append(("reveal", inst.label))
        return inst.sk

    def corrupt_ll_user(self, U: str) -> bytes:
        if U not in self.users:
            raise UnknownEntity(U)
        self.events.append(("corrupt_ll_user", U))
        return self.users[U].creds.PW_U

    def corrupt_sc(self, U: str) -> bytes:
        if U not in self.users:
            raise UnknownEntity(U)
        self.events.append(("corrupt_sc", U))
        return self.users[U].card.to_bytes()

    def corrupt_ll_sensor(self, SN: str) -> bytes:
        if SN not in self.sensors:
            raise UnknownEntity(SN)
        self.events.append(("corrupt_ll_sensor", SN))
        return self.sensors[SN].k_GS

    def corrupt_ll_gateway(self) -> tuple[int, bytes]:
        self.events.append(("corrupt_ll_gateway", GATEWAY))
        return self.gw.y, self.gw.z

    def corrupt_vfr(self) -> dict:
        self.events.append(("corrupt_vfr", GATEWAY))
        return self.gw.verifier_table()

    # -- admissibility predicates -------------------------------------------------------------
    def are_partners(self, a: EntityInstance, b: EntityInstance) -> bool:
        return a is not b and a.accepted and b.accepted and a.sid == b.sid

    def partners_of(self, inst: EntityInstance) -> list[EntityInstance]:
        return [o for o in self.instances if self.are_partners(inst, o)]

    def _session_parties(self, inst):
        """(user, sensor) identities involved in ``inst``'s session, where known."""
        if inst.kind == "user":
            return inst.entity_id, inst.peer
        if inst.kind == "sensor":
            return inst.peer, inst.entity_id
        return None, None

    def is_fresh(self, inst: EntityInstance) -> bool:
        revealed = self.revealed
        if inst.label in revealed or any(p.label in revealed for p in self.partners_of(inst)):
            return False
        user, sensor = self._session_parties(inst)
        if user is not None and user in self.corrupted_ll_users and user in self.corrupted_sc_users:
            return False
        if sensor is not None and sensor in self.corrupted_sensors:
            return False
        return not self.gw_corrupted

    def is_clean(self, U: str) -> bool:
        if U not in self.users:
            raise UnknownEntity(U)
        fully = U in self.corrupted_ll_users and U in self.corrupted_sc_users
        return not (fully or self.gw_corrupted)

    # -- scenario scripts -----------------------------------------------------------------------
    def _latest(self, entity: str, pred=lambda i: True) -> EntityInstance:
        for inst in reversed(self.instances):
            if inst.entity_id == entity and pred(inst):
                return inst
        raise UnknownEntity(f"no matching instance of {entity}")

    def _bytes_arg(self, token: str) -> bytes:
        if token.startswith("@"):
            return self._last[token[1:]]
        return bytes.fromhex(token)

    def run_command(self, line: str) -> str:
        argv = shlex.split(line, comments=True)
        if not argv:
            return ""
        cmd, args = argv[0], argv[1:]
        if cmd == "register":
            kind, ident = args[0], args[1]
            if kind == "user":
                self.register_user(ident, args[2])
            else:
                self.register_sensor(ident)
            return f"registered {kind} {ident}"
        if cmd == "execute":
            t = self.execute(args[0], args[1])
            u, _, s = self.last_instances
            verdict = "MATCH" if u.accepted and s.accepted and u.sk == s.sk else "ABORT"
            return t.to_log() + f"execute {verdict}"
        if cmd == "start":
            inst = self.new_instance(args[0])
            data = self.send(inst, Start(args[1]))
            self._last["M1"] = data
            return f"{inst.label} -> {data.hex()}"
        if cmd == "send":
            target = args[0]
            if self._kind(target) == "user":
                inst = self._latest(target, lambda i: i.status == "running")
            else:
                inst = self.new_instance(target)
            reply = self.send(inst, self._bytes_arg(args[1]))
            if reply is None:
                return f"{inst.label} {inst.status}" + (f" {inst.error}" if inst.error else "")
            return f"{inst.label} -> {reply.hex()}"
        if cmd == "corrupt":
            what = args[0]
            if what == "vfr":
                return f"vfr {self.corrupt_vfr()!r}"
            if what == "sc":
                return f"sc {args[1]} {self.corrupt_sc(args[1]).hex()}"
            target = args[1]
            if target == GATEWAY:
                y, z = self.corrupt_ll_gateway()
                return f"ll gw y={y:064x} z={z.hex()}"
            if self._kind(target) == "user":
                return f"ll {target} {self.corrupt_ll_user(target)!r}"
            return f"ll {target} {self.corrupt_ll_sensor(target).hex()}"
        if cmd == "reveal":
            inst = self._latest(args[0], lambda i: i.accepted)
            return f"reveal {inst.label} {self.reveal(inst).hex()}"
        if cmd == "advance":
            return f"clock {self.advance(int(args[0]))}"
        if cmd == "fresh":
            inst = self._latest(args[0])
            return f"fresh {inst.label} {self.is_fresh(inst)}"
        if cmd == "clean":
            return f"clean {args[0]} {self.is_clean(args[0])}"
        raise ValueError(f"unknown scenario command {cmd!r}")

    def run_script(self, text: str) -> list[str]:
        return [out for out in (self.run_command(line) for line in text.splitlines()) if out]
