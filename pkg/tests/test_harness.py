import pytest

from wsnauth import roles, wire
from wsnauth.errors import NotAccepted, UnknownEntity
from wsnauth.harness import AdversaryContext, Start


@pytest.fixture
def ctx():
    c = AdversaryContext(seed=5)
    c.register_user("u1", "pw1")
    c.register_user("u2", "pw2")
    c.register_sensor("s1")
    c.register_sensor("s2")
    return c


def test_execute_three_messages(ctx):
    t = ctx.execute("u1", "s1")
    assert [type(m) for m in t.messages()] == [wire.LoginRequestM1, wire.GatewayToSensorM2,
                                               wire.SensorResponseM3]
    u, g, s = ctx.last_instances
    assert u.accepted and s.accepted and g.status == "done"
    assert u.sk == s.sk and u.sid == s.sid
    assert ctx.are_partners(u, s)


def test_execute_fresh_each_time(ctx):
    a = ctx.execute("u1", "s1").messages()[0]
    b = ctx.execute("u1", "s1").messages()[0]
    assert bytes(a.C_U) != bytes(b.C_U)


def test_deterministic_under_seed():
    def run():
        c = AdversaryContext(seed=11)
        c.register_user("u1", "pw")
        c.register_sensor("s1")
        return [c.execute("u1", "s1").to_log() for _ in range(3)]
    assert run() == run()


def test_send_start_and_manual_flow(ctx):
    u = ctx.new_instance("u1")
    m1 = ctx.send(u, Start("s1"))
    assert isinstance(wire.decode(m1), wire.LoginRequestM1)
    g, s = ctx.new_instance("gw"), ctx.new_instance("s1")
    m3 = ctx.send(s, ctx.send(g, m1))
    assert ctx.send(u, m3) is None
    assert u.accepted and ctx.are_partners(u, s)
    assert s.peer == "u1" and u.peer == "s1"


def test_bit_flipped_m1_silently_aborts(ctx):
    u = ctx.new_instance("u1")
    m1 = bytearray(ctx.send(u, Start("s1")))
    m1[-1] ^= 1
    g = ctx.new_instance("gw")
    assert ctx.send(g, bytes(m1)) is None
    assert g.status == "aborted" and g.error == "BadMac"
    assert ctx.send(g, bytes(m1)) is None


def test_replayed_m1(ctx):
    m1 = ctx.execute("u1", "s1")[0][2]
    g = ctx.new_instance("gw")
    assert ctx.send(g, m1) is None and g.error == "ReplayDetected"
    ctx.advance(61)
    g = ctx.new_instance("gw")
    assert ctx.send(g, m1) is None and g.error == "StaleTimestamp"


def test_clock_is_advance_only(ctx):
    with pytest.raises(ValueError):
        ctx.advance(-1)


def test_no_emission_after_abort(ctx):
    u = ctx.new_instance("u1")
    ctx.send(u, Start("s1"))
    assert ctx.send(u, bytes(33)) is None  # unknown type 0x00
    assert u.status == "aborted"
    assert ctx.send(u, Start("s1")) is None
    assert len(u.sent) == 1


def test_wrong_message_type_aborts(ctx):
    t = ctx.execute("u1", "s1")
    s = ctx.new_instance("s1")
    assert ctx.send(s, t[0][2]) is None and s.status == "aborted"
    g = ctx.new_instance("gw")
    assert ctx.send(g, Start("s1")) is None and g.status == "aborted"


def test_reveal(ctx):
    ctx.execute("u1", "s1")
    u, _, s = ctx.last_instances
    assert ctx.reveal(u) == ctx.reveal(s) == u.sk
    pending = ctx.new_instance("u1")
    with pytest.raises(NotAccepted):
        ctx.reveal(pending)


def test_corruptions(ctx):
    assert ctx.corrupt_vfr() == {}
    assert ctx.corrupt_ll_user("u1") == b"pw1"
    assert ctx.corrupt_sc("u1") == ctx.users["u1"].card.to_bytes()
    assert ctx.corrupt_ll_sensor("s1") == ctx.sensors["s1"].k_GS
    assert ctx.corrupt_ll_gateway() == (ctx.gw.y, ctx.gw.z)
    for bad in (lambda: ctx.corrupt_ll_user("nobody"), lambda: ctx.corrupt_sc("s1"),
                lambda: ctx.corrupt_ll_sensor("u1"), lambda: ctx.new_instance("zz")):
        with pytest.raises(UnknownEntity):
            bad()


def test_node_capture_cannot_impersonate_other_sensor(ctx):
    """Adversary forges an M2 for s2 using s1's captured key."""
    t = ctx.execute("u1", "s1")
    k_a = ctx.corrupt_ll_sensor("s1")
    honest = wire.decode(t[1][2])
    sn_b = roles.pad_id("s2")
    c = ctx.rng.randbytes(16) + bytes(32)
    from wsnauth.primitives import Ciphertext, mac_generate
    C = Ciphertext.from_bytes(c)
    sig = mac_generate(k_a, wire.mac_input_m2(honest.ID_GW, sn_b, ctx.clock, honest.T_U, C))
    forged = wire.GatewayToSensorM2(honest.ID_GW, ctx.clock, honest.T_U, C, sig)
    s = ctx.new_instance("s2")
    assert ctx.send(s, wire.encode(forged)) is None
    assert s.error == "BadMac"


def test_fresh_definition(ctx):
    ctx.execute("u1", "s1")
    u, g, s = ctx.last_instances
    assert ctx.is_fresh(u) and ctx.is_fresh(s)
    ctx.corrupt_ll_user("u1")
    assert ctx.is_fresh(u) and ctx.is_fresh(s)
    ctx.corrupt_sc("u1")
    assert not ctx.is_fresh(u) and not ctx.is_fresh(s)


def test_fresh_reveal_partner(ctx):
    ctx.execute("u1", "s1")
    u, _, s = ctx.last_instances
    ctx.execute("u2", "s2")
    u2, _, s2 = ctx.last_instances
    ctx.reveal(s)
    assert not ctx.is_fresh(u) and not ctx.is_fresh(s)
    assert ctx.is_fresh(u2) and ctx.is_fresh(s2)


def test_fresh_sensor_corruption(ctx):
    ctx.execute("u1", "s1")
    u, _, s = ctx.last_instances
    ctx.execute("u2", "s2")
    u2, _, _ = ctx.last_instances
    ctx.corrupt_ll_sensor("s1")
    assert not ctx.is_fresh(u) and not ctx.is_fresh(s)
    assert ctx.is_fresh(u2)
    ctx.corrupt_ll_gateway()
    assert not ctx.is_fresh(u2)


def test_clean_definition(ctx):
    assert ctx.is_clean("u1")
    ctx.corrupt_ll_sensor("s1")
    assert ctx.is_clean("u1")
    ctx.corrupt_sc("u1")
    assert ctx.is_clean("u1")
    ctx.corrupt_ll_user("u1")
    assert not ctx.is_clean("u1") and ctx.is_clean("u2")
    ctx.corrupt_ll_gateway()
    assert not any(ctx.is_clean(u) for u in ("u1", "u2"))
    with pytest.raises(UnknownEntity):
        ctx.is_clean("s1")


def test_partnering(ctx):
    ctx.execute("u1", "s1")
    u, _, s = ctx.last_instances
    ctx.execute("u1", "s1")
    u_b, _, s_b = ctx.last_instances
    assert ctx.are_partners(u, s) and not ctx.are_partners(u, s_b)
    assert not ctx.are_partners(u, u)
    aborted = ctx.new_instance("u1")
    ctx.send(aborted, Start("s1"))
    ctx.send(aborted, bytes(33))
    assert not ctx.are_partners(aborted, s)


def test_oracle_verdicts_follow_log(ctx):
    """is_fresh/is_clean depend only on the query log: replaying it reproduces them."""
    ctx.execute("u1", "s1")
    ctx.execute("u2", "s2")
    ctx.corrupt_ll_user("u1")
    ctx.reveal(ctx.last_instances[0])
    ctx.corrupt_sc("u2")
    verdicts = [ctx.is_fresh(i) for i in ctx.instances] + [ctx.is_clean(u) for u in ctx.users]
    log = list(ctx.events)
    ctx.events.clear()
    assert any(not v for v in verdicts)
    assert all(ctx.is_fresh(i) or i.kind == "gateway" for i in ctx.instances)
    ctx.events.extend(log)
    again = [ctx.is_fresh(i) for i in ctx.instances] + [ctx.is_clean(u) for u in ctx.users]
    assert again == verdicts


def test_transcript_log_export(ctx):
    ctx.execute("u1", "s1")
    lines = ctx.transcript.to_log().splitlines()
    assert [line.split()[:2] for line in lines] == [["u1.1->gw.1", "M1"], ["gw.1->s1.1", "M2"],
                                                    ["s1.1->u1.1", "M3"]]


SCRIPT = """\
# replay and freshness walk-through
execute u1 s1
send gw @M1
advance 61
send gw @M1
corrupt vfr
corrupt sc u1
clean u1
corrupt ll u1
clean u1
fresh u1
"""


def test_scenario_script(ctx):
    out = ctx.run_script(SCRIPT)
    assert out[0].endswith("execute MATCH")
    assert out[1] == "gw.2 aborted ReplayDetected"
    assert out[3] == "gw.3 aborted StaleTimestamp"
    assert out[4] == "vfr {}"
    assert out[6:] == ["clean u1 True", "ll u1 b'pw1'", "clean u1 False", "fresh u1.1 False"]


def test_scenario_start_and_send(ctx):
    out = ctx.run_script("start u1 s1\nsend gw @M1")
    assert out[0].startswith("u1.1 -> 01")
    assert out[1].startswith("gw.1 -> 02")
    with pytest.raises(UnknownEntity):
        ctx.run_command("reveal u1")  # still running, nothing accepted
