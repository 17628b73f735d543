"""The requesting side: build, sign, and submit an access-request envelope."""

from __future__ import annotations

import hashlib
import json
import os
import struct
import time
from dataclasses import dataclass

from ..client import LogClient
from ..heads import SignedLogRoot
from ..identity import derive_common_id, seal_payload
from ..keys import ed25519_sign
from ..wire import RequestEnvelope


@dataclass(frozen=True)
class SubmitResult:
    index: int
    log_head: SignedLogRoot
    id_c: str
    n: int


def build_envelope(
    id_a: bytes,
    id_dp: bytes,
    n: int,
    body: bytes,
    salt: bytes,
    agent_sign_seed: bytes,
    agent_key_id: str,
    user_public: bytes,
    auditor_public: bytes,
    timestamp_ms: int | None = None,
) -> RequestEnvelope:
    id_c = derive_common_id(id_a, id_dp, n, salt)
    sealed = seal_payload(body, user_public, auditor_public)
    ts = int(time.time() * 1000) if timestamp_ms is None else timestamp_ms
    unsigned = RequestEnvelope(
        id_c=id_c, sealed=sealed, agent_key_id=agent_key_id, timestamp_ms=ts, signature=b""
    )
    return RequestEnvelope(
        id_c=id_c,
        sealed=sealed,
        agent_key_id=agent_key_id,
        timestamp_ms=ts,
        signature=ed25519_sign(agent_sign_seed, unsigned.signed_bytes()),
    )


def request(
    client: LogClient,
    id_a: bytes,
    id_dp: bytes,
    n: int,
    body: bytes,
    salt: bytes,
    agent_sign_seed: bytes,
    agent_key_id: str,
    user_public: bytes,
    auditor_public: bytes,
) -> SubmitResult:
    """Append one access request to the log. Server rejections propagate."""
    envelope = build_envelope(
        id_a, id_dp, n, body, salt, agent_sign_seed, agent_key_id, user_public, auditor_public
    )
    index, head = client.submit_request(envelope)
    return SubmitResult(index=index, log_head=head, id_c=envelope.id_c.hex(), n=n)


class CounterStore:
    """File-backed session counters, one strictly increasing value per pair.

    The stored key is a hash of the pair, so the file leaks nothing about
    the identifiers themselves. Single-writer discipline is assumed.
    """

    def __init__(self, path: str):
        self._path = path
        self._counters: dict[str, int] = {}
        if os.path.exists(path):
            with open(path, "r", encoding="utf-8") as f:
                self._counters = {k: int(v) for k, v in json.load(f).items()}

    @staticmethod
    def _pair_key(id_a: bytes, id_dp: bytes) -> str:
        material = struct.pack(">I", len(id_a)) + id_a + struct.pack(">I", len(id_dp)) + id_dp
        return hashlib.sha256(material).hexdigest()[:32]

    def peek(self, id_a: bytes, id_dp: bytes) -> int:
        return self._counters.get(self._pair_key(id_a, id_dp), 0)

    def allocate(self, id_a: bytes, id_dp: bytes) -> int:
        """Return the next fresh counter value and persist the advance."""
        key = self._pair_key(id_a, id_dp)
        n = self._counters.get(key, 0)
        self._counters[key] = n + 1
        self._save()
        return n

    def _save(self) -> None:
        tmp = self._path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as f:
            json.dump(self._counters, f)
        os.replace(tmp, self._path)
