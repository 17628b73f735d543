import pytest

from vams.errors import VamsError
from vams.identity import SealedPayload
from vams.keys import ed25519_generate, ed25519_sign, ed25519_verify
from vams.wire import (
    ManifestEnvelope,
    RequestEnvelope,
    canonical_json,
    decode_entry,
    map_key_for_manifest,
    map_key_for_request,
    map_pair_for_entry,
)


def make_envelope(signature=b"\x01" * 64):
    return RequestEnvelope(
        id_c=bytes(range(16)),
        sealed=SealedPayload(user_ct=b"user-ct", auditor_ct=b"aud-ct"),
        agent_key_id="agent-1",
        timestamp_ms=1_700_000_000_000,
        signature=signature,
    )


def test_envelope_payload_roundtrip():
    env = make_envelope()
    parsed = RequestEnvelope.from_payload(env.to_payload())
    assert parsed == env


def test_envelope_signed_bytes_cover_the_right_fields():
    env = make_envelope()
    seed, pub = ed25519_generate()
    sig = ed25519_sign(seed, env.signed_bytes())
    # same (id_c, sealed, timestamp) but different key id: signature still valid
    relabeled = RequestEnvelope(env.id_c, env.sealed, "other-key", env.timestamp_ms, sig)
    assert ed25519_verify(pub, sig, relabeled.signed_bytes())
    # changing the timestamp breaks it
    shifted = RequestEnvelope(env.id_c, env.sealed, env.agent_key_id, 1, sig)
    assert not ed25519_verify(pub, sig, shifted.signed_bytes())


def test_envelope_from_dict_rejects_malformed():
    with pytest.raises(VamsError):
        RequestEnvelope.from_dict({"id_c": "zz", "user_ct": "", "auditor_ct": "",
                                   "agent_key_id": "a", "timestamp": 0, "signature": ""})
    with pytest.raises(VamsError):
        RequestEnvelope.from_dict({"id_c": "00" * 16})


def test_manifest_roundtrip_and_digest():
    wrapper = ManifestEnvelope(
        manifest={"b": 2, "a": [1, 2]}, auditor_key_id="aud", signature=b"\x02" * 64
    )
    parsed = ManifestEnvelope.from_payload(wrapper.to_payload())
    assert parsed == wrapper
    assert parsed.manifest_digest() == wrapper.manifest_digest()
    # canonical JSON is key-order independent
    assert canonical_json({"b": 2, "a": [1, 2]}) == canonical_json({"a": [1, 2], "b": 2})


def test_map_keys_are_type_separated():
    digest = bytes(range(32))
    assert map_key_for_request(bytes(16)) != map_key_for_manifest(bytes(16) + bytes(16))
    assert len(map_key_for_request(bytes(16))) == 32
    assert len(map_key_for_manifest(digest)) == 32
    with pytest.raises(VamsError):
        map_key_for_request(bytes(8))


def test_map_pair_for_entry_dispatch():
    env = make_envelope()
    key, value = map_pair_for_entry(env.to_payload())
    assert key == map_key_for_request(env.id_c)
    assert value == env.to_payload()

    wrapper = ManifestEnvelope(manifest={"x": 1}, auditor_key_id="aud", signature=b"")
    key2, _ = map_pair_for_entry(wrapper.to_payload())
    assert key2 == map_key_for_manifest(wrapper.manifest_digest())

    with pytest.raises(VamsError):
        map_pair_for_entry(b"\x00\x01garbage")
    with pytest.raises(VamsError):
        map_pair_for_entry(canonical_json({"type": "unknown"}))
    with pytest.raises(VamsError):
        decode_entry(canonical_json([1, 2, 3]))
