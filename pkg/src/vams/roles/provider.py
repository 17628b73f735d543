"""The providing side: answer only requests that are provably on the log."""

from __future__ import annotations

from dataclasses import dataclass

from ..client import LogClient
from ..errors import RequestNotLogged
from ..heads import SignedMapRoot
from ..identity import derive_common_id
from ..sparse_map import MapProof
from ..wire import RequestEnvelope, map_key_for_request


@dataclass(frozen=True)
class ProvideResult:
    envelope: RequestEnvelope
    proof: MapProof
    map_head: SignedMapRoot


def provide(
    client: LogClient,
    id_a: bytes,
    id_dp: bytes,
    n: int,
    salt: bytes,
    server_public_key: bytes,
) -> ProvideResult:
    """Fetch and proof-check the request for session n before answering it.

    Raises RequestNotLogged when the map proves non-inclusion: a provider
    must refuse to answer a request that is not on the log.
    """
    id_c = derive_common_id(id_a, id_dp, n, salt)
    key = map_key_for_request(id_c)
    proof, head = client.verified_map_proof(key, server_public_key)
    client.verified_map_head_in_headlog(head, server_public_key)
    if proof.value is None:
        raise RequestNotLogged(
            f"REQUEST_NOT_LOGGED: no entry for session {n} at map revision {head.revision}"
        )
    envelope = RequestEnvelope.from_payload(proof.value)
    return ProvideResult(envelope=envelope, proof=proof, map_head=head)
