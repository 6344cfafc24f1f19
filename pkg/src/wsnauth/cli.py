"""``wsnauth`` command line.

Exit codes: 0 success, 1 protocol abort, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import contextlib
import fcntl
import json
import logging
import os
import random
import sys
import time
from pathlib import Path

from . import attacks, opcount, roles, wire
from .errors import AlreadyRegistered, ParamError, ProtocolError, WsnAuthError
from .params import DEFAULT_PARAMS, load_params

VIRTUAL_EPOCH = 1_700_000_000
GATEWAY_FILE = "gateway.state"


class CliError(Exception):
    def __init__(self, name: str, msg: str, code: int = 2):
        super().__init__(msg)
        self.name, self.code = name, code


class Config:
    def __init__(self, args):
        self.args = args
        self.state_dir = Path(args.state_dir)
        self.seed = args.seed
        self.virtual_clock = args.virtual_clock
        self.as_json = args.json
        self.params = load_params(args.params) if args.params else DEFAULT_PARAMS
        if args.seed is None:
            self.rng = random.SystemRandom()
        else:
            # distinct streams per command, or setup's y would reappear as a login's x
            who = getattr(args, "id", None) or getattr(args, "user", None) or ""
            self.rng = random.Random(f"{args.seed}/{args.command}/{who}")

    def now(self) -> int:
        return VIRTUAL_EPOCH if self.virtual_clock else int(time.time())

    @property
    def gateway_path(self) -> Path:
        return self.state_dir / GATEWAY_FILE

    def card_path(self, uid: str) -> Path:
        return self.state_dir / "cards" / f"{_safe(uid)}.card"

    def sensor_path(self, sid: str) -> Path:
        return self.state_dir / "sensors" / f"{_safe(sid)}.key"

    def load_gateway(self) -> roles.GatewaySecrets:
        if not self.gateway_path.exists():
            raise CliError("NoState", f"no gateway state in {self.state_dir}; run setup first")
        return roles.GatewaySecrets.from_text(self.gateway_path.read_text())

    def save_gateway(self, gw: roles.GatewaySecrets) -> None:
        _write(self.gateway_path, gw.to_text().encode())

    def load_card(self, uid: str, params) -> roles.SmartCard:
        path = self.card_path(uid)
        if not path.exists():
            raise CliError("NoCard", f"no card for {uid!r}")
        return roles.SmartCard.from_bytes(path.read_bytes(), params)

    @contextlib.contextmanager
    def locked(self):
        self.state_dir.mkdir(parents=True, exist_ok=True)
        with open(self.state_dir / ".lock", "w") as fh:
            fcntl.flock(fh, fcntl.LOCK_EX)
            try:
                yield
            finally:
                fcntl.flock(fh, fcntl.LOCK_UN)


def _safe(ident: str) -> str:
    if not ident or "/" in ident or ident in (".", ".."):
        raise CliError("BadId", f"unusable identity {ident!r}")
    return ident


def _write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def _emit(cfg: Config, payload: dict, text: str) -> None:
    if cfg.as_json:
        print(json.dumps(payload, sort_keys=True))
    else:
        print(text, end="" if text.endswith("\n") else "\n")


# -- subcommands -----------------------------------------------------------------------

def cmd_setup(cfg: Config) -> int:
    with cfg.locked():
        if cfg.gateway_path.exists() and not cfg.args.force:
            raise CliError("ExistingState", f"{cfg.gateway_path} exists (use --force)")
        gw = roles.gw_init(cfg.params, cfg.args.gw_id, cfg.rng)
        cfg.save_gateway(gw)
    _emit(cfg, {"curve_id": cfg.params.curve_id, "Y": gw.Y.encode().hex(),
                "id_gw": cfg.args.gw_id},
          cfg.params.to_text() + f"id_gw = {cfg.args.gw_id}\nY = {gw.Y.encode().hex()}\n")
    return 0


def cmd_register(cfg: Config) -> int:
    a = cfg.args
    with cfg.locked():
        gw = cfg.load_gateway()
        if a.kind == "sensor":
            try:
                sn = roles.gw_register_sensor(gw, a.id)
            except AlreadyRegistered as exc:
                raise CliError("DuplicateId", str(exc)) from None
            cfg.save_gateway(gw)
            _write(cfg.sensor_path(a.id), sn.to_text().encode())
            path = cfg.sensor_path(a.id)
        else:
            if a.password is None:
                raise CliError("Usage", "registering a user needs --password")
            path = cfg.card_path(a.id)
            if path.exists() and not a.force:
                raise CliError("DuplicateId", f"user {a.id!r} already holds a card")
            payload = roles.gw_register_user(gw, a.id, cfg.rng)
            card = roles.card_personalize(payload, a.id, a.password)
            _write(path, card.to_bytes())
    _emit(cfg, {"kind": a.kind, "id": a.id, "file": str(path)},
          f"registered {a.kind} {a.id} -> {path}")
    return 0


def cmd_session(cfg: Config) -> int:
    a = cfg.args
    with cfg.locked():
        gw = cfg.load_gateway()
        params = gw.params
        card = cfg.load_card(a.user, params)
        creds = roles.UserCredentials.make(a.user, a.password, params)
        now = cfg.now()
        entries = []
        result = {"user": a.user, "sensor": a.sensor}
        try:
            m1, state = roles.user_login_start(card, creds, a.sensor, now, cfg.rng)
            entries.append(("U->GW", wire.encode(m1, params)))
            m2 = roles.gw_process_m1(gw, m1, now, cfg.rng)
            entries.append(("GW->SN", wire.encode(m2, params)))
            sensor_file = cfg.sensor_path(a.sensor)
            if not sensor_file.exists():
                raise CliError("NoSensorKey", f"no key file for sensor {a.sensor!r}")
            sn = roles.SensorIdentity.from_text(sensor_file.read_text())
            m3, sk_sn = roles.sensor_process_m2(sn, m2, now)
            entries.append(("SN->U", wire.encode(m3, params)))
            sk_u = roles.user_process_m3(state, m3)
        except ProtocolError as exc:
            result.update(verdict="ABORT", error=exc.name,
                          transcript=[(d, h.hex()) for d, h in entries])
            _emit(cfg, result, wire.format_log(entries) + f"ABORT {exc.name}\n")
            return 1
    verdict = "MATCH" if sk_u == sk_sn else "MISMATCH"
    result.update(verdict=verdict, sk_user=sk_u.hex(), sk_sensor=sk_sn.hex(),
                  transcript=[(d, h.hex()) for d, h in entries])
    _emit(cfg, result, wire.format_log(entries)
          + f"user   sk = {sk_u.hex()}\nsensor sk = {sk_sn.hex()}\n{verdict}\n")
    return 0 if verdict == "MATCH" else 1


def cmd_pwd(cfg: Config) -> int:
    a = cfg.args
    with cfg.locked():
        gw = cfg.load_gateway()
        card = cfg.load_card(a.user, gw.params)
        if a.interactive:
            now = cfg.now()
            req, pending = roles.pwd_update_start(card, a.user, a.old, now, cfg.rng)
            # encode/decode both legs so the wire format is exercised as deployed
            req = wire.decode(wire.encode(req, gw.params), gw.params)
            resp = roles.gw_process_pwd_update(gw, req, now)
            resp = wire.decode(wire.encode(resp, gw.params), gw.params)
            try:
                new_card = roles.user_finish_pwd_update(pending, resp, a.new)
            except ProtocolError as exc:
                _emit(cfg, {"status": "FAIL", "error": exc.name}, f"FAIL {exc.name}")
                return 1
        else:
            new_card = roles.pwd_update_noninteractive(card, a.user, a.old, a.new)
        _write(cfg.card_path(a.user), new_card.to_bytes())
    mode = "interactive" if a.interactive else "non-interactive"
    _emit(cfg, {"status": "OK", "mode": mode}, f"OK ({mode})")
    return 0


def cmd_attack_jiang(cfg: Config) -> int:
    a = cfg.args
    if bool(a.dict) != bool(a.ids):
        raise CliError("Usage", "--dict and --ids go together")
    if a.dict:
        pws, ids = attacks.read_wordlist(a.dict), attacks.read_wordlist(a.ids)
        if not pws or not ids:
            raise CliError("Usage", "dictionary and identity files must be non-empty")
        space = attacks.CandidateSpace(pws, ids)
    else:
        space = attacks.default_space()
    rng = cfg.rng
    truth_id, truth_pw = rng.choice(space.id_space), rng.choice(space.pw_dict)
    gw = attacks.JiangGateway(rng.randbytes(32))
    card = attacks.jiang_register(gw.MK, truth_id, truth_pw, rng.randbytes(16),
                                  rng.randbytes(16), cfg.now() + 86400, gw)
    msg = attacks.jiang_login(card, truth_id, truth_pw, rng.randbytes(32), cfg.now())
    bound = len(space.pw_dict) * (2 + len(space.id_space))
    report = {"pw_dict": len(space.pw_dict), "id_space": len(space.id_space),
              "planted": f"{truth_id} / {truth_pw}", "hash_bound": bound}
    try:
        res = attacks.jiang_dictionary_attack(card, msg, space)
    except WsnAuthError as exc:
        report.update(verdict="FAIL", error=exc.name)
        code = 1
    else:
        ok = (res.ID_U, res.PW_U) == (truth_id, truth_pw) and res.hash_count <= bound
        report.update(recovered=f"{res.ID_U} / {res.PW_U}", hash_count=res.hash_count,
                      elapsed_s=0.0 if cfg.virtual_clock else round(res.elapsed, 3),
                      verdict="RECOVERED" if ok else "FAIL")
        code = 0 if ok else 1
    text = "".join(f"{k} = {v}\n" for k, v in report.items())
    _emit(cfg, report, text)
    return code


def cmd_audit(cfg: Config) -> int:
    counters = opcount.audited_session(cfg.params, cfg.seed or 0)
    ok = opcount.all_pass(counters)
    if cfg.as_json:
        print(json.dumps({r: c.as_dict() for r, c in counters.items()} | {"pass": ok},
                         sort_keys=True))
    elif cfg.args.counts:
        print(opcount.machine_lines(counters), end="")
    else:
        print(opcount.report(counters), end="")
    return 0 if ok else 1


def cmd_bench(cfg: Config) -> int:
    """Wall-clock timings; informational only."""
    from .harness import AdversaryContext
    ctx = AdversaryContext(cfg.params, seed=cfg.seed or 0)
    ctx.register_user("u1", "pw")
    ctx.register_sensor("s1")
    n = cfg.args.sessions
    t0 = time.perf_counter()
    for _ in range(n):
        ctx.execute("u1", "s1")
    per = (time.perf_counter() - t0) / n
    _emit(cfg, {"sessions": n, "seconds_per_session": per},
          f"sessions = {n}\nseconds_per_session = {per:.6f}\n")
    return 0


def cmd_scenario(cfg: Config) -> int:
    from .harness import AdversaryContext
    ctx = AdversaryContext(cfg.params, seed=cfg.seed or 0)
    text = Path(cfg.args.file).read_text()
    for line in ctx.run_script(text):
        print(line)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wsnauth", description=__doc__.splitlines()[0])
    p.add_argument("--params", help="parameter file (key = value)")
    p.add_argument("--state-dir", default="wsn-state")
    p.add_argument("--seed", type=int, help="seed every random choice")
    p.add_argument("--virtual-clock", action="store_true",
                   help=f"use the fixed time {VIRTUAL_EPOCH} instead of the wall clock")
    p.add_argument("--force", action="store_true")
    p.add_argument("--json", action="store_true", help="machine-readable JSON output")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("setup", help="create gateway secrets")
    s.add_argument("--gw-id", default="GW")
    s.set_defaults(func=cmd_setup)

    s = sub.add_parser("register", help="issue a smart card or a sensor key")
    s.add_argument("kind", choices=["user", "sensor"])
    s.add_argument("id")
    s.add_argument("--password")
    s.set_defaults(func=cmd_register)

    s = sub.add_parser("session", help="run one login and key exchange")
    s.add_argument("user")
    s.add_argument("--password", required=True)
    s.add_argument("--sensor", required=True)
    s.set_defaults(func=cmd_session)

    s = sub.add_parser("pwd", help="change a card's password")
    s.add_argument("user")
    s.add_argument("--old", required=True)
    s.add_argument("--new", required=True)
    s.add_argument("--interactive", action="store_true")
    s.set_defaults(func=cmd_pwd)

    s = sub.add_parser("attack-jiang", help="offline dictionary attack on Jiang et al.")
    s.add_argument("--dict", help="password candidates, one per line")
    s.add_argument("--ids", help="identity candidates, one per line")
    s.set_defaults(func=cmd_attack_jiang)

    s = sub.add_parser("audit", help="count operations per role")
    s.add_argument("--counts", action="store_true", help="emit role.op = n lines")
    s.set_defaults(func=cmd_audit)

    s = sub.add_parser("bench", help="time honest sessions (not asserted)")
    s.add_argument("--sessions", type=int, default=20)
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("scenario", help="run a harness scenario script")
    s.add_argument("file")
    s.set_defaults(func=cmd_scenario)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(Config(args))
    except CliError as exc:
        print(f"error: {exc.name}: {exc}", file=sys.stderr)
        return exc.code
    except ProtocolError as exc:
        print(f"ABORT {exc.name}: {exc}", file=sys.stderr)
        return 1
    except (WsnAuthError, ParamError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
