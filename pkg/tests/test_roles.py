import random

import pytest

from conftest import NOW
from wsnauth import primitives as pr, roles, wire
from wsnauth.curve import q
from wsnauth.errors import (AlreadyRegistered, BadAuthenticator, BadMac, DecodeError,
                            IdError, IdMismatch, ReplayDetected, StaleTimestamp,
                            UnknownSensor, UpdateRejected)
from wsnauth.params import DEFAULT_PARAMS


# -- setup and registration -------------------------------------------------------

def test_gw_init_distinct_and_reproducible():
    a = roles.gw_init(rng=random.Random(1))
    b = roles.gw_init(rng=random.Random(2))
    assert (a.y, a.z) != (b.y, b.z)
    again = roles.gw_init(rng=random.Random(1))
    assert again.to_text() == a.to_text()
    assert a.Y == pr.scalar_mult(a.y, pr.curve.G)
    assert pr.decode_element(a.Y.encode()) == a.Y


def test_register_user_eid(world):
    gw = world.gw
    payload = roles.gw_register_user(gw, "bob", world.rng)
    assert len(payload.EID_U) == DEFAULT_PARAMS.omega_bytes
    assert pr.sym_decrypt(gw.z, payload.EID_U) == roles.pad_id("bob") + gw.ID_GW
    again = roles.gw_register_user(gw, "bob", world.rng)
    assert again.EID_U != payload.EID_U


@pytest.mark.parametrize("ident", ["", "x" * 17, b""])
def test_malformed_ids(world, ident):
    with pytest.raises(IdError):
        roles.gw_register_user(world.gw, ident)


def test_pad_id():
    assert roles.pad_id("ab") == b"ab" + bytes(14)
    assert roles.unpad_id(roles.pad_id("ab")) == "ab"


def test_personalize_masks_eid(world):
    payload = roles.gw_register_user(world.gw, "bob", world.rng)
    card = roles.card_personalize(payload, "bob", "pw")
    ID = roles.pad_id("bob")
    assert pr.xor(card.XEID_U, pr.I(ID + b"pw")) == payload.EID_U
    assert pr.xor(card.XEID_U, pr.I(ID + b"wrong")) != payload.EID_U
    twice = roles.card_personalize(roles.CardPayload(card.XEID_U, card.Y, card.ID_GW,
                                                     card.params), "bob", "pw")
    assert twice.XEID_U == payload.EID_U


def test_register_sensor(world):
    gw = world.gw
    assert world.sensor.k_GS == pr.J(roles.pad_id("s1") + gw.z)
    assert gw.sensor_registry[roles.pad_id("s1")] == world.sensor.k_GS
    assert world.sensor.k_GS != world.other_sensor.k_GS
    with pytest.raises(AlreadyRegistered):
        roles.gw_register_sensor(gw, "s1")


def test_gateway_state_roundtrip(world):
    text = world.gw.to_text()
    back = roles.GatewaySecrets.from_text(text)
    assert (back.y, back.z, back.Y, back.ID_GW) == (world.gw.y, world.gw.z, world.gw.Y,
                                                   world.gw.ID_GW)
    assert back.sensor_registry == world.gw.sensor_registry


def test_gateway_has_nothing_password_derived(world):
    # structural: registration consumed only ID_U, so no field can depend on PW_U
    text = world.gw.to_text()
    assert b"hunter2".hex() not in text
    assert world.gw.verifier_table() == {}
    assert set(vars(world.gw)) == {"params", "ID_GW", "y", "z", "Y", "sensor_registry",
                                   "replay_cache", "_lock"}


def test_card_image_roundtrip_and_contents(world):
    img = world.card.to_bytes()
    assert roles.SmartCard.from_bytes(img) == world.card
    ID = roles.pad_id("alice")
    assert b"alice" not in img
    assert b"hunter2" not in img
    assert pr.I(ID + b"hunter2") not in img
    with pytest.raises(DecodeError):
        roles.SmartCard.from_bytes(img[:-1])
    with pytest.raises(DecodeError):
        roles.SmartCard.from_bytes(img, DEFAULT_PARAMS.__class__(ts_window=5))


def test_sensor_file_roundtrip(world):
    assert roles.SensorIdentity.from_text(world.sensor.to_text()) == world.sensor


# -- login ------------------------------------------------------------------------------

def test_injected_randomness_gateway_agrees(world):
    x, k_US = 12345, bytes(range(32))
    m1, st = roles.user_login_start(world.card, world.creds, "s1", NOW, world.rng,
                                    x=x, k_US=k_US)
    K = pr.scalar_mult(world.gw.y, m1.X)
    assert roles.derive_k_UG(NOW, m1.X, world.gw.Y, K, DEFAULT_PARAMS) == st.k_UG
    assert m1.X == pr.scalar_mult(x, pr.curve.G)
    assert st.k_US == k_US and st.T_U == NOW and st.status == "running"


def test_two_logins_differ(world):
    a, _ = world.login()
    b, _ = world.login()
    assert a.X != b.X and bytes(a.C_U) != bytes(b.C_U) and a.sigma_U != b.sigma_U


def test_login_start_operation_count(world):
    tally = pr.OpTally()
    with pr.metered(tally):
        world.login()
    assert (tally.M, tally.E, tally.A, tally.H) == (2, 1, 1, 2)


def test_happy_path(world):
    m1, m2, m3, st, sk_u, sk_sn = world.full_session()
    assert isinstance(m2, wire.GatewayToSensorM2) and m2.T_U == m1.T_U
    assert sk_u == sk_sn and len(sk_u) == 32
    assert st.status == "accepted" and st.sk == sk_u
    assert m3.rho_SN != sk_sn


def test_key_agreement_100_sessions(world):
    for i in range(100):
        *_, st, sk_u, sk_sn = world.full_session(NOW + i)
        assert sk_u == sk_sn and st.status == "accepted"


def test_stale_timestamp(world):
    m1, _ = world.login(now=NOW - 61)
    with pytest.raises(StaleTimestamp):
        roles.gw_process_m1(world.gw, m1, NOW, world.rng)
    m1, _ = world.login(now=NOW - 60)
    roles.gw_process_m1(world.gw, m1, NOW, world.rng)


def test_future_timestamp_rejected(world):
    m1, _ = world.login(now=NOW + 61)
    with pytest.raises(StaleTimestamp):
        roles.gw_process_m1(world.gw, m1, NOW, world.rng)


def test_replay_then_expiry(world):
    m1, _ = world.login()
    roles.gw_process_m1(world.gw, m1, NOW, world.rng)
    with pytest.raises(ReplayDetected):
        roles.gw_process_m1(world.gw, m1, NOW + 30, world.rng)
    with pytest.raises(StaleTimestamp):
        roles.gw_process_m1(world.gw, m1, NOW + 61, world.rng)


def test_replay_cache_pruned(world):
    m1, _ = world.login()
    roles.gw_process_m1(world.gw, m1, NOW, world.rng)
    m1b, _ = world.login(now=NOW + 200)
    roles.gw_process_m1(world.gw, m1b, NOW + 200, world.rng)
    assert list(world.gw.replay_cache.values()) == [NOW + 200]


def test_rejected_m1_does_not_poison_cache(world):
    m1, _ = world.login()
    bad = wire.LoginRequestM1(m1.T_U, m1.ID_SN, m1.X, m1.C_U, bytes(32))
    with pytest.raises(BadMac):
        roles.gw_process_m1(world.gw, bad, NOW, world.rng)
    roles.gw_process_m1(world.gw, m1, NOW, world.rng)


def test_wrong_password_id_mismatch(world):
    m1, _ = world.login(password="hunter3")
    with pytest.raises(IdMismatch):
        roles.gw_process_m1(world.gw, m1, NOW, world.rng)


def test_unknown_sensor(world):
    m1, _ = world.login(sensor="s9")
    with pytest.raises(UnknownSensor):
        roles.gw_process_m1(world.gw, m1, NOW, world.rng)


def test_card_from_other_gateway(world):
    other = roles.gw_init(rng=random.Random(99))
    card = roles.card_personalize(roles.gw_register_user(other, "alice"), "alice", "hunter2")
    m1, _ = world.login(card=card)
    with pytest.raises(BadMac):
        roles.gw_process_m1(world.gw, m1, NOW, world.rng)


def test_sensor_bit_flip_bad_mac(world):
    m1, _ = world.login()
    m2 = roles.gw_process_m1(world.gw, m1, NOW, world.rng)
    for i in range(32 * 8):
        sig = bytearray(m2.sigma_GW)
        sig[i // 8] ^= 1 << (i % 8)
        bad = wire.GatewayToSensorM2(m2.ID_GW, m2.T_GW, m2.T_U, m2.C_GW, bytes(sig))
        with pytest.raises(BadMac):
            roles.sensor_process_m2(world.sensor, bad, NOW)


def test_sensor_stale_m2(world):
    m1, _ = world.login()
    m2 = roles.gw_process_m1(world.gw, m1, NOW, world.rng)
    with pytest.raises(StaleTimestamp):
        roles.sensor_process_m2(world.sensor, m2, NOW + 61)


def test_cross_sensor_m2_rejected(world):
    m1, _ = world.login()
    m2 = roles.gw_process_m1(world.gw, m1, NOW, world.rng)
    with pytest.raises(BadMac):
        roles.sensor_process_m2(world.other_sensor, m2, NOW)


def test_random_rho_rejected(world):
    m1, st = world.login()
    with pytest.raises(BadAuthenticator):
        roles.user_process_m3(st, wire.SensorResponseM3(bytes(32)))
    assert st.status == "aborted" and st.sk is None
    with pytest.raises(roles.SessionClosed):
        roles.user_process_m3(st, wire.SensorResponseM3(bytes(32)))


def test_old_m3_into_new_session(world):
    *_, m3_old, _, _, _ = world.full_session()
    _, st = world.login(now=NOW + 1)
    with pytest.raises(BadAuthenticator):
        roles.user_process_m3(st, m3_old)


def test_session_id(world):
    m1, m2, *_ = world.full_session()
    sid = roles.session_id(m1, m2)
    assert len(sid) == 32
    assert sid == roles.session_id(wire.decode(wire.encode(m1)), wire.decode(wire.encode(m2)))
    n1, n2, *_ = world.full_session(NOW + 1)
    assert roles.session_id(n1, n2) != sid


# -- password update ---------------------------------------------------------------------

def _login_ok(world, card, password, now):
    m1, st = world.login(now=now, password=password, card=card)
    m2 = roles.gw_process_m1(world.gw, m1, now, world.rng)
    m3, sk = roles.sensor_process_m2(world.sensor, m2, now)
    return roles.user_process_m3(st, m3) == sk


def test_noninteractive_update(world):
    card = roles.pwd_update_noninteractive(world.card, "alice", "hunter2", "newpw")
    assert _login_ok(world, card, "newpw", NOW)


def test_noninteractive_wrong_old_bricks_card(world):
    card = roles.pwd_update_noninteractive(world.card, "alice", "typo", "newpw")
    with pytest.raises(IdMismatch):
        _login_ok(world, card, "newpw", NOW)


def test_noninteractive_same_password_noop(world):
    assert roles.pwd_update_noninteractive(world.card, "alice", "hunter2", "hunter2") == world.card


def _interactive(world, old, new, now=NOW, tamper=None):
    req, pending = roles.pwd_update_start(world.card, "alice", old, now, world.rng)
    req = wire.decode(wire.encode(req))
    resp = roles.gw_process_pwd_update(world.gw, req, now)
    if tamper:
        resp = tamper(resp)
    return resp, roles.user_finish_pwd_update(pending, wire.decode(wire.encode(resp)), new)


def test_interactive_update(world):
    resp, card = _interactive(world, "hunter2", "newpw")
    assert resp.ok
    assert _login_ok(world, card, "newpw", NOW + 1)


def test_interactive_wrong_old_password(world):
    before = world.card.to_bytes()
    with pytest.raises(UpdateRejected):
        _interactive(world, "typo", "newpw")
    assert world.card.to_bytes() == before
    assert _login_ok(world, world.card, "hunter2", NOW + 1)


def test_interactive_stale_request_rejected(world):
    req, pending = roles.pwd_update_start(world.card, "alice", "hunter2", NOW - 100, world.rng)
    assert not roles.gw_process_pwd_update(world.gw, req, NOW).ok


def test_interactive_forged_rho(world):
    with pytest.raises(BadAuthenticator):
        _interactive(world, "hunter2", "newpw",
                     tamper=lambda r: wire.PwdUpdateResponse(True, bytes(32)))
    assert _login_ok(world, world.card, "hunter2", NOW + 1)


def test_scalars_in_range(world):
    _, st = world.login()
    assert 1 <= st.x < q
