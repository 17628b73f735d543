"""Signed tree heads, log-to-map replay, and equivocation evidence.

Heads are signed over a canonical binary layout (version u8, two u64
big-endian counters, 32-byte root). The version byte doubles as a domain
tag so a head for one structure can never be replayed as a head for
another: 1 = request log, 2 = map-head log, 3 = map.
"""

from __future__ import annotations

import logging
import struct
import time
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .errors import VamsError
from .keys import ed25519_sign, ed25519_verify
from .merkle_log import ConsistencyProof, verify_consistency
from .sparse_map import SparseMerkleMap

logger = logging.getLogger(__name__)

REQUEST_LOG_VERSION = 1
HEAD_LOG_VERSION = 2
MAP_HEAD_VERSION = 3

SAME_SIZE_FORK = "SAME_SIZE_FORK"
BAD_CONSISTENCY = "BAD_CONSISTENCY"


@dataclass(frozen=True)
class SignedLogRoot:
    tree_size: int
    root: bytes
    timestamp_ms: int
    signature: bytes
    version: int = REQUEST_LOG_VERSION

    def signed_bytes(self) -> bytes:
        return struct.pack(">BQQ", self.version, self.tree_size, self.timestamp_ms) + self.root

    def verify(self, public_key: bytes) -> bool:
        return ed25519_verify(public_key, self.signature, self.signed_bytes())


@dataclass(frozen=True)
class SignedMapRoot:
    revision: int
    root: bytes
    log_size_covered: int
    signature: bytes

    def signed_bytes(self) -> bytes:
        return struct.pack(">BQQ", MAP_HEAD_VERSION, self.revision, self.log_size_covered) + self.root

    def verify(self, public_key: bytes) -> bool:
        return ed25519_verify(public_key, self.signature, self.signed_bytes())

    def to_log_payload(self) -> bytes:
        """Entry appended to the map-head log for this revision."""
        return self.signed_bytes() + self.signature

    @classmethod
    def from_log_payload(cls, payload: bytes) -> "SignedMapRoot":
        if len(payload) != 17 + 32 + 64:
            raise VamsError("malformed map-head log entry")
        version, revision, covered = struct.unpack(">BQQ", payload[:17])
        if version != MAP_HEAD_VERSION:
            raise VamsError(f"unexpected head version {version}")
        return cls(
            revision=revision,
            root=payload[17:49],
            log_size_covered=covered,
            signature=payload[49:],
        )


class HeadSigner:
    """Issues signed heads under the server's Ed25519 key."""

    def __init__(self, private_seed: bytes):
        self._seed = private_seed

    def log_root(self, tree_size: int, root: bytes, version: int = REQUEST_LOG_VERSION) -> SignedLogRoot:
        head = SignedLogRoot(
            tree_size=tree_size,
            root=root,
            timestamp_ms=int(time.time() * 1000),
            signature=b"",
            version=version,
        )
        return SignedLogRoot(
            tree_size=head.tree_size,
            root=head.root,
            timestamp_ms=head.timestamp_ms,
            signature=ed25519_sign(self._seed, head.signed_bytes()),
            version=version,
        )

    def map_root(self, revision: int, root: bytes, log_size_covered: int) -> SignedMapRoot:
        head = SignedMapRoot(revision=revision, root=root, log_size_covered=log_size_covered, signature=b"")
        return SignedMapRoot(
            revision=revision,
            root=root,
            log_size_covered=log_size_covered,
            signature=ed25519_sign(self._seed, head.signed_bytes()),
        )


@dataclass(frozen=True)
class EquivocationEvidence:
    kind: str  # SAME_SIZE_FORK or BAD_CONSISTENCY
    head_a: SignedLogRoot | SignedMapRoot
    head_b: SignedLogRoot | SignedMapRoot
    proof: ConsistencyProof | None = None

    def describe(self) -> str:
        if isinstance(self.head_a, SignedMapRoot):
            at = f"revision {self.head_a.revision}"
        else:
            at = f"size {self.head_a.tree_size} / {self.head_b.tree_size}"
        return f"{self.kind} at {at}: {self.head_a.root.hex()[:16]} vs {self.head_b.root.hex()[:16]}"


ConsistencyOracle = Callable[[SignedLogRoot, SignedLogRoot], ConsistencyProof | None]


def detect_equivocation(
    heads: Iterable[SignedLogRoot | SignedMapRoot],
    consistency_oracle: ConsistencyOracle | None = None,
    public_key: bytes | None = None,
) -> EquivocationEvidence | None:
    """Look for conflicting signed heads of one structure.

    Two heads claiming the same size (or map revision) with different
    roots are direct evidence. For log heads of different sizes, the
    server-supplied consistency proof is checked when an oracle is
    given; a failing proof is evidence, a refused proof is only logged
    as suspicion (absence of cooperation cannot be proven offline).
    """
    log_heads: list[SignedLogRoot] = []
    map_heads: list[SignedMapRoot] = []
    for head in heads:
        if public_key is not None and not head.verify(public_key):
            logger.warning("discarding head with unverifiable signature: %r", head)
            continue
        if isinstance(head, SignedMapRoot):
            map_heads.append(head)
        else:
            log_heads.append(head)

    by_rev: dict[int, SignedMapRoot] = {}
    for mh in map_heads:
        seen = by_rev.setdefault(mh.revision, mh)
        if seen.root != mh.root or seen.log_size_covered != mh.log_size_covered:
            return EquivocationEvidence(kind=SAME_SIZE_FORK, head_a=seen, head_b=mh)

    by_size: dict[tuple[int, int], SignedLogRoot] = {}
    for lh in log_heads:
        seen_lh = by_size.setdefault((lh.version, lh.tree_size), lh)
        if seen_lh.root != lh.root:
            return EquivocationEvidence(kind=SAME_SIZE_FORK, head_a=seen_lh, head_b=lh)

    if consistency_oracle is not None:
        for version in {h.version for h in log_heads}:
            ordered = sorted(
                (h for h in log_heads if h.version == version), key=lambda h: h.tree_size
            )
            for older, newer in zip(ordered, ordered[1:]):
                if older.tree_size == newer.tree_size:
                    continue
                proof = consistency_oracle(older, newer)
                if proof is None:
                    logger.warning(
                        "no consistency proof offered for %d -> %d; recording suspicion",
                        older.tree_size,
                        newer.tree_size,
                    )
                    continue
                if not verify_consistency(
                    older.tree_size, newer.tree_size, older.root, newer.root, proof
                ):
                    return EquivocationEvidence(
                        kind=BAD_CONSISTENCY, head_a=older, head_b=newer, proof=proof
                    )
    return None


@dataclass
class ReplayResult:
    root: bytes
    entries_applied: int
    invalid: list[tuple[int, str]]
    prefix_roots: dict[int, bytes]


def replay_log_to_map(
    entries: Sequence[bytes],
    cut_points: Iterable[int] = (),
    decode: Callable[[bytes], tuple[bytes, bytes]] | None = None,
) -> ReplayResult:
    """Deterministically rebuild the map from a verified log prefix.

    ``decode`` maps an entry payload to its (map key, map value) pair
    and defaults to the protocol codec. Entries it rejects are classed
    as invalid, skipped, and reported in the result. ``cut_points`` asks
    for the map root after consuming exactly that many entries, which is
    what an auditor compares against published map heads.
    """
    if decode is None:
        from .wire import map_pair_for_entry

        decode = map_pair_for_entry
    cuts = sorted(set(cut_points))
    for c in cuts:
        if not 0 <= c <= len(entries):
            raise ValueError(f"cut point {c} outside replayed prefix of {len(entries)}")
    smap = SparseMerkleMap()
    invalid: list[tuple[int, str]] = []
    prefix_roots: dict[int, bytes] = {}
    pending: list[tuple[bytes, bytes]] = []

    def commit() -> None:
        if pending:
            smap.set_batch(pending)
            pending.clear()

    next_cut = 0
    for index, payload in enumerate(entries):
        if next_cut < len(cuts) and cuts[next_cut] == index:
            commit()
            prefix_roots[index] = smap.root()
            next_cut += 1
        try:
            pending.append(decode(payload))
        except VamsError as exc:
            invalid.append((index, str(exc)))
        except (ValueError, KeyError, TypeError) as exc:
            invalid.append((index, f"undecodable entry: {exc}"))
    commit()
    while next_cut < len(cuts):
        prefix_roots[cuts[next_cut]] = smap.root()
        next_cut += 1
    return ReplayResult(
        root=smap.root(),
        entries_applied=len(entries) - len(invalid),
        invalid=invalid,
        prefix_roots=prefix_roots,
    )
