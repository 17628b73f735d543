"""HTTP client for the log server, with verifying fetch helpers.

Roles construct a LogClient from a base URL (or any httpx-compatible
client, which is how tests drive an in-process ASGI app). The verifying
helpers check signatures and Merkle proofs locally and raise
EvidenceSuspected when the server's answers do not hold up.
"""

from __future__ import annotations

from typing import Any

import httpx

from .errors import EvidenceSuspected, SubmissionRejected, VamsError
from .heads import SignedLogRoot, SignedMapRoot
from .merkle_log import verify_inclusion
from .sparse_map import MapProof, verify_map_proof
from .wire import (
    ManifestEnvelope,
    RequestEnvelope,
    consistency_proof_from_dict,
    inclusion_proof_from_dict,
    log_head_from_dict,
    map_head_from_dict,
    map_proof_from_dict,
)


class LogClient:
    def __init__(self, base_url: str | None = None, http: httpx.Client | None = None):
        if http is None:
            if base_url is None:
                raise ValueError("need a base_url or an http client")
            http = httpx.Client(base_url=base_url, timeout=30.0)
        self._http = http

    def close(self) -> None:
        self._http.close()

    def _get(self, path: str, **params: Any) -> dict:
        resp = self._http.get(path, params={k: v for k, v in params.items() if v is not None})
        return self._handle(resp)

    def _post(self, path: str, body: dict | None = None) -> dict:
        resp = self._http.post(path, json=body)
        return self._handle(resp)

    @staticmethod
    def _handle(resp: httpx.Response) -> dict:
        if resp.status_code == 400:
            obj = resp.json()
            raise SubmissionRejected(obj.get("code", "BAD_REQUEST"), obj.get("detail", ""))
        resp.raise_for_status()
        return resp.json()

    # Raw endpoints

    def info(self) -> dict:
        return self._get("/v1/info")

    def submit_request(self, envelope: RequestEnvelope) -> tuple[int, SignedLogRoot]:
        obj = self._post("/v1/request", envelope.to_dict())
        return int(obj["index"]), log_head_from_dict(obj["log_root"])

    def submit_manifest(self, wrapper: ManifestEnvelope) -> tuple[int, SignedLogRoot]:
        obj = self._post("/v1/audit", wrapper.to_dict())
        return int(obj["index"]), log_head_from_dict(obj["log_root"])

    def flush(self) -> SignedMapRoot:
        return map_head_from_dict(self._post("/v1/flush")["map_root"])

    def log_root(self, size: int | None = None) -> SignedLogRoot:
        return log_head_from_dict(self._get("/v1/log/root", size=size))

    def log_entry(self, index: int) -> bytes:
        return bytes.fromhex(self._get(f"/v1/log/entry/{index}")["payload"])

    def log_entries(self, start: int, end: int, page: int = 1000) -> list[bytes]:
        out: list[bytes] = []
        while start < end:
            stop = min(start + page, end)
            obj = self._get("/v1/log/entries", start=start, end=stop)
            out.extend(bytes.fromhex(p) for p in obj["entries"])
            start = stop
        return out

    def log_inclusion(self, index: int, size: int):
        return inclusion_proof_from_dict(self._get("/v1/log/inclusion", index=index, size=size))

    def log_consistency(self, old: int, new: int):
        return consistency_proof_from_dict(self._get("/v1/log/consistency", old=old, new=new))

    def map_root(self, revision: int | None = None) -> SignedMapRoot:
        return map_head_from_dict(self._get("/v1/map/root", revision=revision))

    def map_proof(self, key_digest: bytes, revision: int | None = None) -> MapProof:
        return map_proof_from_dict(
            self._get("/v1/map/proof", key=key_digest.hex(), revision=revision)
        )

    def headlog_root(self, size: int | None = None) -> SignedLogRoot:
        return log_head_from_dict(self._get("/v1/headlog/root", size=size))

    def headlog_entry(self, index: int) -> bytes:
        return bytes.fromhex(self._get(f"/v1/headlog/entry/{index}")["payload"])

    def headlog_inclusion(self, index: int, size: int):
        return inclusion_proof_from_dict(
            self._get("/v1/headlog/inclusion", index=index, size=size)
        )

    def headlog_consistency(self, old: int, new: int):
        return consistency_proof_from_dict(self._get("/v1/headlog/consistency", old=old, new=new))

    # Verifying helpers

    def server_public_key(self) -> bytes:
        return bytes.fromhex(self.info()["server_public_key"])

    def kdf_salt(self) -> bytes:
        return bytes.fromhex(self.info()["kdf_salt"])

    def verified_map_proof(
        self, key_digest: bytes, public_key: bytes, revision: int | None = None
    ) -> tuple[MapProof, SignedMapRoot]:
        """Fetch a map proof plus its signed root and verify both."""
        proof = self.map_proof(key_digest, revision)
        head = self.map_root(proof.revision)
        if not head.verify(public_key):
            raise EvidenceSuspected("map head signature does not verify", material=head)
        if head.revision != proof.revision:
            raise EvidenceSuspected("map head revision mismatch", material=(head, proof))
        if not verify_map_proof(head.root, key_digest, proof):
            raise EvidenceSuspected(
                f"map proof for key {key_digest.hex()[:16]} does not verify",
                material=(head, proof),
            )
        return proof, head

    def verified_map_head_in_headlog(self, head: SignedMapRoot, public_key: bytes) -> None:
        """Check a map head is committed to the map-head log."""
        if head.revision == 0:
            return  # the empty-map head predates the head log
        headlog = self.headlog_root()
        if not headlog.verify(public_key):
            raise EvidenceSuspected("head-log root signature does not verify", material=headlog)
        payload = head.to_log_payload()
        # Revision r is appended as entry r-1; scan only if that guess misses.
        candidates = [head.revision - 1] if 0 <= head.revision - 1 < headlog.tree_size else []
        candidates += [i for i in range(headlog.tree_size) if i not in candidates]
        for index in candidates:
            if self.headlog_entry(index) == payload:
                proof = self.headlog_inclusion(index, headlog.tree_size)
                if not verify_inclusion(payload, proof, headlog.root):
                    raise EvidenceSuspected(
                        "map head inclusion proof does not verify", material=(head, proof)
                    )
                return
        raise EvidenceSuspected("published map head missing from head log", material=head)

    def verified_log_entry(self, index: int, public_key: bytes) -> tuple[bytes, SignedLogRoot]:
        head = self.log_root()
        if not head.verify(public_key):
            raise EvidenceSuspected("log head signature does not verify", material=head)
        payload = self.log_entry(index)
        proof = self.log_inclusion(index, head.tree_size)
        if not verify_inclusion(payload, proof, head.root):
            raise EvidenceSuspected(
                f"inclusion proof for entry {index} does not verify", material=(head, proof)
            )
        return payload, head


def client_for_app(app) -> LogClient:
    """LogClient bound to an in-process ASGI app (for tests and benches)."""
    from fastapi.testclient import TestClient

    return LogClient(http=TestClient(app))
