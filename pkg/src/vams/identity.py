"""Identifier derivation and request-body sealing.

A request's log key is a common identifier derived from the private
agent and data-provider identifiers plus a per-pair session counter:
the pair that shares those secrets (and the user they describe) can
recompute every key, while outsiders see unlinkable ciphertext blocks.
Low-entropy agent identifiers are strengthened through PBKDF2 before
use as an encryption key.

Request bodies are sealed independently to the user and to the
auditors: ephemeral-static X25519, HKDF-SHA256, then AES-256-GCM.
"""

from __future__ import annotations

import hashlib
import os
import struct
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.asymmetric.x25519 import (
    X25519PrivateKey,
    X25519PublicKey,
)
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from .errors import SealError

KDF_ITERATIONS = 100_000
SALT_LEN = 16
COMMON_ID_LEN = 16
# The cipher block is sha256(id_dp)[:10] plus the counter as u48, so the
# session counter must fit in 48 bits.
MAX_SESSION_COUNTER = (1 << 48) - 1

SEAL_INFO = b"vams-seal-v1"
_EPH_LEN = 32
_NONCE_LEN = 12


@dataclass(frozen=True)
class SealedPayload:
    """The same plaintext sealed once per recipient."""

    user_ct: bytes
    auditor_ct: bytes


@lru_cache(maxsize=256)
def _stretch(id_a: bytes, salt: bytes) -> bytes:
    return hashlib.pbkdf2_hmac("sha256", id_a, salt, KDF_ITERATIONS, dklen=32)


def strengthen_key(id_a: bytes, salt: bytes) -> bytes:
    """Stretch a (possibly low-entropy) agent identifier into a 256-bit key.

    Stretched keys are cached per (identifier, salt): a scan over session
    counters costs one key derivation, not one per counter value.
    """
    if not id_a:
        raise ValueError("agent identifier must be nonempty")
    if len(salt) != SALT_LEN:
        raise ValueError(f"salt must be {SALT_LEN} bytes")
    return _stretch(id_a, salt)


def derive_common_id(id_a: bytes, id_dp: bytes, n: int, salt: bytes) -> bytes:
    """Common identifier for request n of the (id_a, id_dp) pair.

    One AES-256 block: the key is the strengthened id_a, the plaintext
    block is sha256(id_dp)[:10] followed by n as u48 big-endian. A fixed
    pair therefore maps each counter value to a distinct 16-byte block.
    """
    if not id_dp:
        raise ValueError("data-provider identifier must be nonempty")
    if not 0 <= n <= MAX_SESSION_COUNTER:
        raise ValueError(f"session counter {n} exceeds padding capacity (u48)")
    key = strengthen_key(id_a, salt)
    block = hashlib.sha256(id_dp).digest()[:10] + n.to_bytes(6, "big")
    encryptor = Cipher(algorithms.AES(key), modes.ECB()).encryptor()  # single block
    return encryptor.update(block) + encryptor.finalize()


def derive_share_id(id_c: bytes, i: int) -> bytes:
    """Share identifier: Hash(id_c, share index), index as u32 big-endian."""
    if i < 1:
        raise ValueError("share index starts at 1")
    return hashlib.sha256(id_c + struct.pack(">I", i)).digest()


def seal_to(recipient_public: bytes, body: bytes) -> bytes:
    """Seal body to one X25519 recipient: eph_pub | nonce | AES-GCM ct."""
    recipient = X25519PublicKey.from_public_bytes(recipient_public)
    eph = X25519PrivateKey.generate()
    eph_pub = eph.public_key().public_bytes_raw()
    shared = eph.exchange(recipient)
    key = HKDF(
        algorithm=hashes.SHA256(),
        length=32,
        salt=eph_pub + recipient_public,
        info=SEAL_INFO,
    ).derive(shared)
    nonce = os.urandom(_NONCE_LEN)
    return eph_pub + nonce + AESGCM(key).encrypt(nonce, body, None)


def open_payload(ciphertext: bytes, recipient_private: bytes) -> bytes:
    """Open a sealed box. Raises SealError on wrong key or tampering."""
    if len(ciphertext) < _EPH_LEN + _NONCE_LEN + 16:
        raise SealError("ciphertext too short")
    eph_pub = ciphertext[:_EPH_LEN]
    nonce = ciphertext[_EPH_LEN : _EPH_LEN + _NONCE_LEN]
    box = ciphertext[_EPH_LEN + _NONCE_LEN :]
    priv = X25519PrivateKey.from_private_bytes(recipient_private)
    recipient_public = priv.public_key().public_bytes_raw()
    try:
        shared = priv.exchange(X25519PublicKey.from_public_bytes(eph_pub))
    except ValueError as exc:
        raise SealError(f"bad ephemeral key: {exc}") from exc
    key = HKDF(
        algorithm=hashes.SHA256(),
        length=32,
        salt=eph_pub + recipient_public,
        info=SEAL_INFO,
    ).derive(shared)
    try:
        return AESGCM(key).decrypt(nonce, box, None)
    except InvalidTag as exc:
        raise SealError("authentication failed") from exc


def seal_payload(body: bytes, user_public: bytes, auditor_public: bytes) -> SealedPayload:
    """Seal the request body independently to the user and the auditors."""
    return SealedPayload(
        user_ct=seal_to(user_public, body),
        auditor_ct=seal_to(auditor_public, body),
    )


def pair_linkability(num_agents: int, num_providers: int) -> Fraction:
    """Chance of guessing the (agent, provider) pair behind an identifier."""
    if num_agents < 1 or num_providers < 1:
        raise ValueError("party set sizes must be at least 1")
    return Fraction(1, num_agents * num_providers)


def brute_force_cost(b: int, session_range: int) -> int:
    """Encryption operations to sweep a b-bit identifier over a counter range."""
    if b < 0 or session_range < 0:
        raise ValueError("bit length and session range must be non-negative")
    return (1 << b) * session_range
