"""The log server: admits signed requests, derives the map, publishes heads.

Three verifiable structures are maintained: the request log (all
admitted envelopes plus audit manifests, in arrival order), the sparse
map over common identifiers derived from it in batches, and the
map-head log recording every published signed map root.

A single sequencer (one lock) owns appends and batch commits; reads work
against committed snapshots and never block appends for long. The map is
a deterministic function of the request log, so after a crash the server
rebuilds it by replay and checks the result against the persisted map
heads before serving.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field

from .errors import SubmissionRejected, VamsError
from .hashing import MAP_DEFAULTS
from .heads import (
    HEAD_LOG_VERSION,
    REQUEST_LOG_VERSION,
    HeadSigner,
    SignedLogRoot,
    SignedMapRoot,
)
from .identity import COMMON_ID_LEN, SALT_LEN
from .keys import ed25519_public, ed25519_verify, load_keyfile, load_registry
from .merkle_log import ConsistencyProof, InclusionProof, MerkleLog
from .sparse_map import MapProof, SparseMerkleMap
from .storage import FileEntryStore, MemoryEntryStore
from .wire import ManifestEnvelope, RequestEnvelope, map_pair_for_entry

logger = logging.getLogger(__name__)

SERVER_KEY_LABEL = "log-server-sign"
AGENT_ROLES = ("agent", "broker")
DEFAULT_BATCH_SIZE = 300
DEFAULT_BATCH_TIMEOUT_MS = 1000
MAX_CLOCK_SKEW_MS = 24 * 3600 * 1000


@dataclass
class ServerConfig:
    signing_key_seed: bytes
    kdf_salt: bytes
    registry: dict[str, tuple[bytes, str]] = field(default_factory=dict)
    batch_size: int = DEFAULT_BATCH_SIZE
    batch_timeout_ms: int = DEFAULT_BATCH_TIMEOUT_MS
    listen: str = "127.0.0.1:8640"
    data_dir: str | None = None
    max_clock_skew_ms: int = MAX_CLOCK_SKEW_MS

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.batch_timeout_ms < 0:
            raise ValueError("batch_timeout_ms must be >= 0")
        if len(self.kdf_salt) != SALT_LEN:
            raise ValueError(f"kdf_salt must be {SALT_LEN} bytes")

    @classmethod
    def from_file(cls, path: str) -> "ServerConfig":
        """Load config JSON; VAMS_LISTEN and VAMS_DATA_DIR override."""
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
        base = os.path.dirname(os.path.abspath(path))

        def resolve(p: str) -> str:
            return p if os.path.isabs(p) else os.path.join(base, p)

        keys = load_keyfile(resolve(raw["keys_file"]))
        if SERVER_KEY_LABEL not in keys:
            raise ValueError(f"keys file lacks '{SERVER_KEY_LABEL}' entry")
        registry = load_registry(resolve(raw["registry_file"])) if raw.get("registry_file") else {}
        data_dir = os.environ.get("VAMS_DATA_DIR") or raw.get("data_dir")
        return cls(
            signing_key_seed=keys[SERVER_KEY_LABEL],
            kdf_salt=bytes.fromhex(raw["kdf_salt"]),
            registry=registry,
            batch_size=int(raw.get("batch_size", DEFAULT_BATCH_SIZE)),
            batch_timeout_ms=int(raw.get("batch_timeout_ms", DEFAULT_BATCH_TIMEOUT_MS)),
            listen=os.environ.get("VAMS_LISTEN") or raw.get("listen", "127.0.0.1:8640"),
            data_dir=resolve(data_dir) if data_dir else None,
        )


class LogServer:
    def __init__(self, config: ServerConfig):
        self.config = config
        self._signer = HeadSigner(config.signing_key_seed)
        self.public_key = ed25519_public(config.signing_key_seed)
        self._lock = threading.RLock()
        self._batch_cv = threading.Condition(self._lock)

        if config.data_dir:
            os.makedirs(config.data_dir, exist_ok=True)
            self._request_store = FileEntryStore(os.path.join(config.data_dir, "requests"))
            self._head_store = FileEntryStore(os.path.join(config.data_dir, "mapheads"))
        else:
            self._request_store = MemoryEntryStore()
            self._head_store = MemoryEntryStore()

        self._log = MerkleLog([self._request_store.get(i) for i in range(len(self._request_store))])
        self._head_log = MerkleLog([self._head_store.get(i) for i in range(len(self._head_store))])
        self._map = SparseMerkleMap()
        self._map_heads: list[SignedMapRoot] = [
            self._signer.map_root(0, MAP_DEFAULTS[0], 0)
        ]
        self._covered = 0
        self._first_pending_ts: float | None = None
        self._rebuild_map()

        self._latest_log_head = self._signer.log_root(
            self._log.size, self._log.root(), REQUEST_LOG_VERSION
        )
        self._latest_headlog_head = self._signer.log_root(
            self._head_log.size, self._head_log.root(), HEAD_LOG_VERSION
        )
        self._batcher: threading.Thread | None = None
        self._stop = threading.Event()
        if self._log.size > self._covered:
            self._first_pending_ts = time.monotonic()

    def _rebuild_map(self) -> None:
        """Replay the request log against the persisted map heads."""
        heads = []
        for i in range(len(self._head_store)):
            heads.append(SignedMapRoot.from_log_payload(self._head_store.get(i)))
        prev = 0
        for head in heads:
            if head.log_size_covered < prev or head.log_size_covered > self._log.size:
                raise VamsError(
                    f"map head revision {head.revision} covers {head.log_size_covered}, "
                    f"inconsistent with log size {self._log.size}"
                )
            pairs = []
            for index in range(prev, head.log_size_covered):
                payload = self._request_store.get(index)
                try:
                    pairs.append(map_pair_for_entry(payload))
                except VamsError as exc:
                    logger.warning("skipping invalid log entry %d during rebuild: %s", index, exc)
            root = self._map.set_batch(pairs)
            if root != head.root or self._map.revision != head.revision:
                raise VamsError(
                    f"rebuilt map revision {self._map.revision} root does not match "
                    f"persisted head {head.revision}; store corrupt"
                )
            self._map_heads.append(head)
            prev = head.log_size_covered
        self._covered = prev

    # Admission

    def submit_request(self, envelope: RequestEnvelope) -> tuple[int, SignedLogRoot]:
        if len(envelope.id_c) != COMMON_ID_LEN:
            raise SubmissionRejected("REJECTED_FORMAT", "common identifier must be 16 bytes")
        entry = self.config.registry.get(envelope.agent_key_id)
        if entry is None or entry[1] not in AGENT_ROLES:
            raise SubmissionRejected("REJECTED_SIGNATURE", "unknown agent key")
        public_key, _role = entry
        if not ed25519_verify(public_key, envelope.signature, envelope.signed_bytes()):
            raise SubmissionRejected("REJECTED_SIGNATURE", "signature does not verify")
        now_ms = int(time.time() * 1000)
        if abs(envelope.timestamp_ms - now_ms) > self.config.max_clock_skew_ms:
            raise SubmissionRejected("REJECTED_TIMESTAMP", "timestamp outside admission window")
        return self._append(envelope.to_payload())

    def submit_manifest(self, wrapper: ManifestEnvelope) -> tuple[int, SignedLogRoot]:
        entry = self.config.registry.get(wrapper.auditor_key_id)
        if entry is None or entry[1] != "auditor":
            raise SubmissionRejected("REJECTED_SIGNATURE", "unknown auditor key")
        public_key, _role = entry
        if not ed25519_verify(public_key, wrapper.signature, wrapper.signed_bytes()):
            raise SubmissionRejected("REJECTED_SIGNATURE", "manifest signature does not verify")
        return self._append(wrapper.to_payload())

    def _append(self, payload: bytes) -> tuple[int, SignedLogRoot]:
        with self._lock:
            stored = self._request_store.append(payload)
            index = self._log.append(payload)
            assert stored == index
            self._latest_log_head = self._signer.log_root(
                self._log.size, self._log.root(), REQUEST_LOG_VERSION
            )
            if self._first_pending_ts is None:
                self._first_pending_ts = time.monotonic()
            self._batch_cv.notify_all()
            return index, self._latest_log_head

    # Map batching

    def pending_entries(self) -> int:
        with self._lock:
            return self._log.size - self._covered

    def flush(self) -> SignedMapRoot:
        """Commit all pending entries as one map revision (if any)."""
        with self._lock:
            size = self._log.size
            if size > self._covered:
                self._commit_batch(size)
            return self._map_heads[-1]

    def _commit_batch(self, up_to: int) -> None:
        pairs = []
        for index in range(self._covered, up_to):
            payload = self._request_store.get(index)
            try:
                pairs.append(map_pair_for_entry(payload))
            except VamsError as exc:
                logger.warning("log entry %d classed invalid at batch time: %s", index, exc)
        root = self._map.set_batch(pairs)
        head = self._signer.map_root(self._map.revision, root, up_to)
        head_payload = head.to_log_payload()
        self._head_store.append(head_payload)
        self._head_log.append(head_payload)
        self._map_heads.append(head)
        self._covered = up_to
        self._first_pending_ts = None
        self._latest_headlog_head = self._signer.log_root(
            self._head_log.size, self._head_log.root(), HEAD_LOG_VERSION
        )

    def start_batcher(self) -> None:
        if self._batcher is not None:
            return
        self._stop.clear()
        self._batcher = threading.Thread(target=self._batch_loop, daemon=True)
        self._batcher.start()

    def stop_batcher(self) -> None:
        if self._batcher is None:
            return
        self._stop.set()
        with self._batch_cv:
            self._batch_cv.notify_all()
        self._batcher.join()
        self._batcher = None

    def _batch_loop(self) -> None:
        timeout = self.config.batch_timeout_ms / 1000.0
        with self._batch_cv:
            while not self._stop.is_set():
                pending = self._log.size - self._covered
                if pending >= self.config.batch_size:
                    self._commit_batch(self._log.size)
                    continue
                if pending > 0 and self._first_pending_ts is not None:
                    remaining = self._first_pending_ts + timeout - time.monotonic()
                    if remaining <= 0:
                        self._commit_batch(self._log.size)
                        continue
                    self._batch_cv.wait(min(remaining, 0.05))
                else:
                    self._batch_cv.wait(0.05)

    # Read side

    def get_signed_heads(self) -> tuple[SignedLogRoot, SignedMapRoot, SignedLogRoot]:
        with self._lock:
            return self._latest_log_head, self._map_heads[-1], self._latest_headlog_head

    def log_head(self, tree_size: int | None = None) -> SignedLogRoot:
        with self._lock:
            if tree_size is None or tree_size == self._log.size:
                return self._latest_log_head
            return self._signer.log_root(tree_size, self._log.root(tree_size), REQUEST_LOG_VERSION)

    def headlog_head(self, tree_size: int | None = None) -> SignedLogRoot:
        with self._lock:
            if tree_size is None or tree_size == self._head_log.size:
                return self._latest_headlog_head
            return self._signer.log_root(tree_size, self._head_log.root(tree_size), HEAD_LOG_VERSION)

    def map_head(self, revision: int | None = None) -> SignedMapRoot:
        with self._lock:
            if revision is None:
                return self._map_heads[-1]
            if not 0 <= revision < len(self._map_heads):
                raise VamsError(f"unknown map revision {revision}")
            return self._map_heads[revision]

    def entry(self, index: int) -> bytes:
        with self._lock:
            if not 0 <= index < self._log.size:
                raise VamsError(f"entry index {index} out of range")
            return self._request_store.get(index)

    def entries(self, start: int, end: int) -> list[bytes]:
        with self._lock:
            if not 0 <= start <= end <= self._log.size:
                raise VamsError(f"entry range [{start}, {end}) out of range")
            return [self._request_store.get(i) for i in range(start, end)]

    def headlog_entry(self, index: int) -> bytes:
        with self._lock:
            if not 0 <= index < self._head_log.size:
                raise VamsError(f"head-log index {index} out of range")
            return self._head_store.get(index)

    def prove_inclusion(self, index: int, tree_size: int) -> InclusionProof:
        with self._lock:
            return self._log.prove_inclusion(index, tree_size)

    def prove_consistency(self, old_size: int, new_size: int) -> ConsistencyProof:
        with self._lock:
            return self._log.prove_consistency(old_size, new_size)

    def headlog_prove_inclusion(self, index: int, tree_size: int) -> InclusionProof:
        with self._lock:
            return self._head_log.prove_inclusion(index, tree_size)

    def headlog_prove_consistency(self, old_size: int, new_size: int) -> ConsistencyProof:
        with self._lock:
            return self._head_log.prove_consistency(old_size, new_size)

    def map_proof(self, key_digest: bytes, revision: int | None = None) -> MapProof:
        with self._lock:
            if revision is not None and not 0 <= revision < len(self._map_heads):
                raise VamsError(f"unknown map revision {revision}")
            return self._map.get_with_proof(key_digest, revision)

    def close(self) -> None:
        self.stop_batcher()
        self._request_store.close()
        self._head_store.close()
