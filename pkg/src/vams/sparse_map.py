"""Sparse Merkle map: a verifiable key-value store over 32-byte keys.

The map is a 256-level binary tree addressed by the bits of the key
digest (most significant bit first). All-empty subtrees hash to
per-depth defaults, so only nodes on the paths of set keys are stored.
Every batch commit bumps a revision; node values are kept per revision,
so proofs can be issued against any historical root. Absence is proven
with the same sibling path, anchored at the default leaf.
"""

from __future__ import annotations

import struct
from bisect import bisect_right
from dataclasses import dataclass
from typing import Iterable, Iterator

from .hashing import DIGEST_LEN, MAP_DEPTH, MAP_DEFAULTS, hash_children, hash_leaf

ABSENT = None


@dataclass(frozen=True)
class MapProof:
    """Sibling path for one key at one revision.

    ``default_mask`` bit i (LSB-first within bytes) marks proof step i,
    counting from the leaf, whose sibling equals the per-depth default;
    those digests are omitted from ``path``.
    """

    key_digest: bytes
    value: bytes | None
    revision: int
    path: tuple[bytes, ...]
    default_mask: bytes


def _mask_bit(mask: bytes, i: int) -> int:
    return (mask[i >> 3] >> (i & 7)) & 1


class SparseMerkleMap:
    def __init__(self) -> None:
        # (depth, prefix) -> [(revision, digest)] ordered by revision
        self._nodes: dict[tuple[int, int], list[tuple[int, bytes]]] = {}
        # key int -> [(revision, value or None)]
        self._values: dict[int, list[tuple[int, bytes | None]]] = {}
        self._revision = 0

    @property
    def revision(self) -> int:
        return self._revision

    def _node(self, depth: int, prefix: int, revision: int) -> bytes:
        history = self._nodes.get((depth, prefix))
        if history:
            i = bisect_right(history, revision, key=lambda e: e[0])
            if i:
                return history[i - 1][1]
        return MAP_DEFAULTS[depth]

    def _put_node(self, depth: int, prefix: int, revision: int, digest: bytes) -> None:
        history = self._nodes.setdefault((depth, prefix), [])
        if history and history[-1][0] == revision:
            history[-1] = (revision, digest)
        else:
            history.append((revision, digest))

    def root(self, revision: int | None = None) -> bytes:
        rev = self._check_revision(revision)
        return self._node(0, 0, rev)

    def _check_revision(self, revision: int | None) -> int:
        if revision is None:
            return self._revision
        if not 0 <= revision <= self._revision:
            raise ValueError(f"unknown revision {revision} (current {self._revision})")
        return revision

    def set_batch(self, pairs: Iterable[tuple[bytes, bytes | None]]) -> bytes:
        """Apply a batch of writes as one new revision and return its root.

        A value of None (or b"") clears the key. Duplicate keys within a
        batch resolve to the last write.
        """
        writes: dict[int, bytes | None] = {}
        for key, value in pairs:
            if len(key) != DIGEST_LEN:
                raise ValueError("map keys must be 32-byte digests")
            writes[int.from_bytes(key, "big")] = value if value else ABSENT
        rev = self._revision + 1
        for key_int, value in writes.items():
            self._values.setdefault(key_int, []).append((rev, value))
            node = MAP_DEFAULTS[MAP_DEPTH] if value is ABSENT else hash_leaf(value)
            prefix = key_int
            self._put_node(MAP_DEPTH, prefix, rev, node)
            for depth in range(MAP_DEPTH, 0, -1):
                sibling = self._node(depth, prefix ^ 1, rev)
                if prefix & 1:
                    node = hash_children(sibling, node)
                else:
                    node = hash_children(node, sibling)
                prefix >>= 1
                self._put_node(depth - 1, prefix, rev, node)
        self._revision = rev
        return self.root()

    def get(self, key_digest: bytes, revision: int | None = None) -> bytes | None:
        rev = self._check_revision(revision)
        history = self._values.get(int.from_bytes(key_digest, "big"))
        if history:
            i = bisect_right(history, rev, key=lambda e: e[0])
            if i:
                return history[i - 1][1]
        return ABSENT

    def get_with_proof(self, key_digest: bytes, revision: int | None = None) -> MapProof:
        rev = self._check_revision(revision)
        if len(key_digest) != DIGEST_LEN:
            raise ValueError("map keys must be 32-byte digests")
        key_int = int.from_bytes(key_digest, "big")
        path: list[bytes] = []
        mask = bytearray(DIGEST_LEN)
        prefix = key_int
        for i, depth in enumerate(range(MAP_DEPTH, 0, -1)):
            sibling = self._node(depth, prefix ^ 1, rev)
            if sibling == MAP_DEFAULTS[depth]:
                mask[i >> 3] |= 1 << (i & 7)
            else:
                path.append(sibling)
            prefix >>= 1
        return MapProof(
            key_digest=key_digest,
            value=self.get(key_digest, rev),
            revision=rev,
            path=tuple(path),
            default_mask=bytes(mask),
        )

    # Node-store export/import: the on-disk shape is (depth, prefix) keyed.

    def iter_nodes(self) -> Iterator[tuple[int, int, int, bytes]]:
        for (depth, prefix), history in self._nodes.items():
            for revision, digest in history:
                yield depth, prefix, revision, digest

    def iter_values(self) -> Iterator[tuple[int, int, bytes | None]]:
        for key_int, history in self._values.items():
            for revision, value in history:
                yield key_int, revision, value

    def save(self, path: str) -> None:
        with open(path, "wb") as f:
            f.write(b"VAMSMAP1" + struct.pack(">I", self._revision))
            for depth, prefix, revision, digest in self.iter_nodes():
                f.write(b"N" + struct.pack(">HI", depth, revision))
                f.write(prefix.to_bytes(DIGEST_LEN, "big") + digest)
            for key_int, revision, value in self.iter_values():
                f.write(b"V" + struct.pack(">I", revision) + key_int.to_bytes(DIGEST_LEN, "big"))
                if value is ABSENT:
                    f.write(struct.pack(">I", 0xFFFFFFFF))
                else:
                    f.write(struct.pack(">I", len(value)) + value)

    @classmethod
    def load(cls, path: str) -> "SparseMerkleMap":
        m = cls()
        with open(path, "rb") as f:
            magic = f.read(8)
            if magic != b"VAMSMAP1":
                raise ValueError("not a map node-store file")
            (m._revision,) = struct.unpack(">I", f.read(4))
            while True:
                tag = f.read(1)
                if not tag:
                    break
                if tag == b"N":
                    depth, revision = struct.unpack(">HI", f.read(6))
                    prefix = int.from_bytes(f.read(DIGEST_LEN), "big")
                    digest = f.read(DIGEST_LEN)
                    m._nodes.setdefault((depth, prefix), []).append((revision, digest))
                elif tag == b"V":
                    (revision,) = struct.unpack(">I", f.read(4))
                    key_int = int.from_bytes(f.read(DIGEST_LEN), "big")
                    (vlen,) = struct.unpack(">I", f.read(4))
                    value = ABSENT if vlen == 0xFFFFFFFF else f.read(vlen)
                    m._values.setdefault(key_int, []).append((revision, value))
                else:
                    raise ValueError(f"corrupt node-store record tag {tag!r}")
        for history in m._nodes.values():
            history.sort(key=lambda e: e[0])
        for vhistory in m._values.values():
            vhistory.sort(key=lambda e: e[0])
        return m


def verify_map_proof(map_root: bytes, key_digest: bytes, proof: MapProof) -> bool:
    """Recompute the sparse-tree root from a proof and compare.

    Accepts both inclusion (value present) and non-inclusion
    (value None) proofs; the two differ only in the leaf hash used.
    """
    if proof.key_digest != key_digest or len(key_digest) != DIGEST_LEN:
        return False
    if len(proof.default_mask) != DIGEST_LEN:
        return False
    if len(proof.path) > MAP_DEPTH:
        return False
    defaults_claimed = sum(_mask_bit(proof.default_mask, i) for i in range(MAP_DEPTH))
    if len(proof.path) != MAP_DEPTH - defaults_claimed:
        return False
    if any(len(p) != DIGEST_LEN for p in proof.path):
        return False
    key_int = int.from_bytes(key_digest, "big")
    node = MAP_DEFAULTS[MAP_DEPTH] if proof.value is ABSENT else hash_leaf(proof.value)
    path_iter = iter(proof.path)
    prefix = key_int
    for i, depth in enumerate(range(MAP_DEPTH, 0, -1)):
        sibling = MAP_DEFAULTS[depth] if _mask_bit(proof.default_mask, i) else next(path_iter)
        if prefix & 1:
            node = hash_children(sibling, node)
        else:
            node = hash_children(node, sibling)
        prefix >>= 1
    return node == map_root
