import random
from dataclasses import dataclass

import pytest

from wsnauth import roles
from wsnauth.params import DEFAULT_PARAMS

NOW = 1_700_000_000


@dataclass
class World:
    gw: roles.GatewaySecrets
    sensor: roles.SensorIdentity
    other_sensor: roles.SensorIdentity
    card: roles.SmartCard
    creds: roles.UserCredentials
    rng: random.Random

    def login(self, now=NOW, password=None, sensor="s1", card=None):
        creds = self.creds if password is None else roles.UserCredentials.make("alice", password)
        return roles.user_login_start(card or self.card, creds, sensor, now, self.rng)

    def full_session(self, now=NOW):
        m1, st = self.login(now)
        m2 = roles.gw_process_m1(self.gw, m1, now, self.rng)
        m3, sk_sn = roles.sensor_process_m2(self.sensor, m2, now)
        sk_u = roles.user_process_m3(st, m3)
        return m1, m2, m3, st, sk_u, sk_sn


@pytest.fixture
def params():
    return DEFAULT_PARAMS


@pytest.fixture
def rng():
    return random.Random(1234)


@pytest.fixture
def world(rng):
    gw = roles.gw_init(DEFAULT_PARAMS, "GW", rng)
    s1 = roles.gw_register_sensor(gw, "s1")
    s2 = roles.gw_register_sensor(gw, "s2")
    card = roles.card_personalize(roles.gw_register_user(gw, "alice", rng), "alice", "hunter2")
    creds = roles.UserCredentials.make("alice", "hunter2")
    return World(gw, s1, s2, card, creds, rng)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
