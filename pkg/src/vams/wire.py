"""Wire formats: envelopes, manifests, log payloads, and map keys.

Signatures cover a canonical big-endian, length-prefixed binary layout
so they are independent of the JSON framing used on the wire and in log
payloads. Log entries are canonical JSON objects tagged with a "type"
field; the map key of an entry is derived with a type-specific prefix
byte, which is what reserves a key namespace for audit manifests.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from typing import Any

from .errors import VamsError
from .identity import COMMON_ID_LEN, SealedPayload

ENVELOPE_SIGN_PREFIX = b"\x10"
MANIFEST_SIGN_PREFIX = b"\x11"

MAP_KEY_REQUEST_PREFIX = b"\x00"
MAP_KEY_MANIFEST_PREFIX = b"\x01"


def canonical_json(obj: Any) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _lp(data: bytes) -> bytes:
    return struct.pack(">I", len(data)) + data


@dataclass(frozen=True)
class RequestEnvelope:
    id_c: bytes
    sealed: SealedPayload
    agent_key_id: str
    timestamp_ms: int
    signature: bytes

    def signed_bytes(self) -> bytes:
        """Canonical bytes the agent signs: (id_c, sealed, timestamp)."""
        return (
            ENVELOPE_SIGN_PREFIX
            + self.id_c
            + _lp(self.sealed.user_ct)
            + _lp(self.sealed.auditor_ct)
            + struct.pack(">Q", self.timestamp_ms)
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "type": "request",
            "id_c": self.id_c.hex(),
            "user_ct": self.sealed.user_ct.hex(),
            "auditor_ct": self.sealed.auditor_ct.hex(),
            "agent_key_id": self.agent_key_id,
            "timestamp": self.timestamp_ms,
            "signature": self.signature.hex(),
        }

    def to_payload(self) -> bytes:
        return canonical_json(self.to_dict())

    @classmethod
    def from_dict(cls, obj: dict[str, Any]) -> "RequestEnvelope":
        try:
            id_c = bytes.fromhex(obj["id_c"])
            sealed = SealedPayload(
                user_ct=bytes.fromhex(obj["user_ct"]),
                auditor_ct=bytes.fromhex(obj["auditor_ct"]),
            )
            return cls(
                id_c=id_c,
                sealed=sealed,
                agent_key_id=str(obj["agent_key_id"]),
                timestamp_ms=int(obj["timestamp"]),
                signature=bytes.fromhex(obj["signature"]),
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise VamsError(f"malformed request envelope: {exc}") from exc

    @classmethod
    def from_payload(cls, payload: bytes) -> "RequestEnvelope":
        obj = decode_entry(payload)
        if obj.get("type") != "request":
            raise VamsError(f"not a request entry: {obj.get('type')!r}")
        return cls.from_dict(obj)


@dataclass(frozen=True)
class ManifestEnvelope:
    """An auditor-signed audit manifest, as appended to the log."""

    manifest: dict[str, Any]
    auditor_key_id: str
    signature: bytes

    def signed_bytes(self) -> bytes:
        return MANIFEST_SIGN_PREFIX + canonical_json(self.manifest)

    def manifest_digest(self) -> bytes:
        return hashlib.sha256(canonical_json(self.manifest)).digest()

    def to_dict(self) -> dict[str, Any]:
        return {
            "type": "audit_manifest",
            "manifest": self.manifest,
            "auditor_key_id": self.auditor_key_id,
            "signature": self.signature.hex(),
        }

    def to_payload(self) -> bytes:
        return canonical_json(self.to_dict())

    @classmethod
    def from_dict(cls, obj: dict[str, Any]) -> "ManifestEnvelope":
        try:
            return cls(
                manifest=dict(obj["manifest"]),
                auditor_key_id=str(obj["auditor_key_id"]),
                signature=bytes.fromhex(obj["signature"]),
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise VamsError(f"malformed audit manifest: {exc}") from exc

    @classmethod
    def from_payload(cls, payload: bytes) -> "ManifestEnvelope":
        obj = decode_entry(payload)
        if obj.get("type") != "audit_manifest":
            raise VamsError(f"not an audit manifest entry: {obj.get('type')!r}")
        return cls.from_dict(obj)


def decode_entry(payload: bytes) -> dict[str, Any]:
    try:
        obj = json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise VamsError(f"undecodable log entry: {exc}") from exc
    if not isinstance(obj, dict):
        raise VamsError("log entry is not an object")
    return obj


def map_key_for_request(id_c: bytes) -> bytes:
    if len(id_c) != COMMON_ID_LEN:
        raise VamsError(f"common identifier must be {COMMON_ID_LEN} bytes")
    return hashlib.sha256(MAP_KEY_REQUEST_PREFIX + id_c).digest()


def map_key_for_manifest(manifest_digest: bytes) -> bytes:
    return hashlib.sha256(MAP_KEY_MANIFEST_PREFIX + manifest_digest).digest()


def map_pair_for_entry(payload: bytes) -> tuple[bytes, bytes]:
    """Map (key, value) a log entry contributes; raises VamsError if invalid.

    The value is the entry payload itself: the map points each common
    identifier (or manifest digest) at the serialized entry.
    """
    obj = decode_entry(payload)
    kind = obj.get("type")
    if kind == "request":
        envelope = RequestEnvelope.from_dict(obj)
        return map_key_for_request(envelope.id_c), payload
    if kind == "audit_manifest":
        manifest = ManifestEnvelope.from_dict(obj)
        return map_key_for_manifest(manifest.manifest_digest()), payload
    raise VamsError(f"unknown log entry type: {kind!r}")


# JSON codecs for heads and proofs (shared by the HTTP API and clients).


def log_head_to_dict(head) -> dict[str, Any]:
    return {
        "version": head.version,
        "tree_size": head.tree_size,
        "timestamp_ms": head.timestamp_ms,
        "root": head.root.hex(),
        "signature": head.signature.hex(),
    }


def log_head_from_dict(obj: dict[str, Any]):
    from .heads import SignedLogRoot

    return SignedLogRoot(
        tree_size=int(obj["tree_size"]),
        root=bytes.fromhex(obj["root"]),
        timestamp_ms=int(obj["timestamp_ms"]),
        signature=bytes.fromhex(obj["signature"]),
        version=int(obj.get("version", 1)),
    )


def map_head_to_dict(head) -> dict[str, Any]:
    return {
        "revision": head.revision,
        "log_size_covered": head.log_size_covered,
        "root": head.root.hex(),
        "signature": head.signature.hex(),
    }


def map_head_from_dict(obj: dict[str, Any]):
    from .heads import SignedMapRoot

    return SignedMapRoot(
        revision=int(obj["revision"]),
        root=bytes.fromhex(obj["root"]),
        log_size_covered=int(obj["log_size_covered"]),
        signature=bytes.fromhex(obj["signature"]),
    )


def inclusion_proof_to_dict(proof) -> dict[str, Any]:
    return {
        "leaf_index": proof.leaf_index,
        "tree_size": proof.tree_size,
        "path": [p.hex() for p in proof.path],
    }


def inclusion_proof_from_dict(obj: dict[str, Any]):
    from .merkle_log import InclusionProof

    return InclusionProof(
        leaf_index=int(obj["leaf_index"]),
        tree_size=int(obj["tree_size"]),
        path=tuple(bytes.fromhex(p) for p in obj["path"]),
    )


def consistency_proof_to_dict(proof) -> dict[str, Any]:
    return {
        "old_size": proof.old_size,
        "new_size": proof.new_size,
        "path": [p.hex() for p in proof.path],
    }


def consistency_proof_from_dict(obj: dict[str, Any]):
    from .merkle_log import ConsistencyProof

    return ConsistencyProof(
        old_size=int(obj["old_size"]),
        new_size=int(obj["new_size"]),
        path=tuple(bytes.fromhex(p) for p in obj["path"]),
    )


def map_proof_to_dict(proof) -> dict[str, Any]:
    return {
        "key": proof.key_digest.hex(),
        "value": None if proof.value is None else proof.value.hex(),
        "revision": proof.revision,
        "path": [p.hex() for p in proof.path],
        "default_mask": proof.default_mask.hex(),
    }


def map_proof_from_dict(obj: dict[str, Any]):
    from .sparse_map import MapProof

    return MapProof(
        key_digest=bytes.fromhex(obj["key"]),
        value=None if obj["value"] is None else bytes.fromhex(obj["value"]),
        revision=int(obj["revision"]),
        path=tuple(bytes.fromhex(p) for p in obj["path"]),
        default_mask=bytes.fromhex(obj["default_mask"]),
    )
