"""Key material handling: Ed25519 signing, X25519 boxes, key files.

Key files hold 32-byte raw keys, hex-encoded, one per line with a role
label: ``<label> <hex>``. The agent registry is a flat file of
``<key_id> <hex public key> <role>`` lines loaded by the server at boot.
"""

from __future__ import annotations

import hashlib
import os

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.asymmetric.x25519 import (
    X25519PrivateKey,
    X25519PublicKey,
)
from cryptography.hazmat.primitives.serialization import (
    Encoding,
    NoEncryption,
    PrivateFormat,
    PublicFormat,
)


def ed25519_generate() -> tuple[bytes, bytes]:
    """Return (private seed, public key), both 32 raw bytes."""
    priv = Ed25519PrivateKey.generate()
    return (
        priv.private_bytes(Encoding.Raw, PrivateFormat.Raw, NoEncryption()),
        priv.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw),
    )


def ed25519_public(private_seed: bytes) -> bytes:
    priv = Ed25519PrivateKey.from_private_bytes(private_seed)
    return priv.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)


def ed25519_sign(private_seed: bytes, message: bytes) -> bytes:
    return Ed25519PrivateKey.from_private_bytes(private_seed).sign(message)


def ed25519_verify(public_key: bytes, signature: bytes, message: bytes) -> bool:
    try:
        Ed25519PublicKey.from_public_bytes(public_key).verify(signature, message)
        return True
    except (InvalidSignature, ValueError):
        return False


def x25519_generate() -> tuple[bytes, bytes]:
    """Return (private, public), both 32 raw bytes."""
    priv = X25519PrivateKey.generate()
    return (
        priv.private_bytes(Encoding.Raw, PrivateFormat.Raw, NoEncryption()),
        priv.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw),
    )


def key_fingerprint(public_key: bytes) -> str:
    """Short stable identifier for a public key (first 8 hash bytes)."""
    return hashlib.sha256(public_key).hexdigest()[:16]


def load_keyfile(path: str) -> dict[str, bytes]:
    keys: dict[str, bytes] = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected '<label> <hex>'")
            keys[parts[0]] = bytes.fromhex(parts[1])
    return keys


def save_keyfile(path: str, keys: dict[str, bytes]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for label, raw in keys.items():
            f.write(f"{label} {raw.hex()}\n")
    os.chmod(path, 0o600)


def load_registry(path: str) -> dict[str, tuple[bytes, str]]:
    """Registry of signing keys admitted by the server: key_id -> (pub, role)."""
    registry: dict[str, tuple[bytes, str]] = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected '<key_id> <hex pub> <role>'")
            key_id, hexpub, role = parts
            registry[key_id] = (bytes.fromhex(hexpub), role)
    return registry


def save_registry(path: str, registry: dict[str, tuple[bytes, str]]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for key_id, (pub, role) in registry.items():
            f.write(f"{key_id} {pub.hex()} {role}\n")
