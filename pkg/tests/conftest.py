import numpy as np
import pytest

from vams.http_api import create_app
from vams.client import client_for_app
from vams.keys import ed25519_generate, key_fingerprint, x25519_generate
from vams.server import LogServer, ServerConfig


class Parties:
    """One deployment's worth of key material."""

    def __init__(self):
        self.salt = bytes(range(16))
        self.server_seed, self.server_pub = ed25519_generate()
        self.agent_seed, self.agent_pub = ed25519_generate()
        self.broker_seed, self.broker_pub = ed25519_generate()
        self.auditor_sign_seed, self.auditor_sign_pub = ed25519_generate()
        self.user_box_priv, self.user_box_pub = x25519_generate()
        self.auditor_box_priv, self.auditor_box_pub = x25519_generate()
        self.agent_key_id = key_fingerprint(self.agent_pub)
        self.broker_key_id = key_fingerprint(self.broker_pub)
        self.auditor_key_id = key_fingerprint(self.auditor_sign_pub)

    def registry(self):
        return {
            self.agent_key_id: (self.agent_pub, "agent"),
            self.broker_key_id: (self.broker_pub, "broker"),
            self.auditor_key_id: (self.auditor_sign_pub, "auditor"),
        }

    def server_config(self, **overrides) -> ServerConfig:
        kwargs = dict(
            signing_key_seed=self.server_seed,
            kdf_salt=self.salt,
            registry=self.registry(),
            batch_size=1000,
            batch_timeout_ms=60_000,
        )
        kwargs.update(overrides)
        return ServerConfig(**kwargs)


@pytest.fixture(scope="session")
def parties():
    return Parties()


@pytest.fixture()
def server(parties):
    srv = LogServer(parties.server_config())
    yield srv
    srv.close()


@pytest.fixture()
def client(server):
    c = client_for_app(create_app(server))
    yield c
    c.close()


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
