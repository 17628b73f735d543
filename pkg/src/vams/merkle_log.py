"""Append-only Merkle tree log with inclusion and consistency proofs.

Tree shape and proof algorithms follow RFC 6962/9162: leaves are hashed
with a 0x00 prefix, interior nodes with 0x01, and a tree of size n splits
at the largest power of two strictly less than n. Proof verification is a
pure function of (proof, leaf/roots, index/sizes) and never touches the
tree, so verifiers only need the signed roots.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .hashing import hash_children, hash_empty, hash_leaf


@dataclass(frozen=True)
class InclusionProof:
    leaf_index: int
    tree_size: int
    path: tuple[bytes, ...]


@dataclass(frozen=True)
class ConsistencyProof:
    old_size: int
    new_size: int
    path: tuple[bytes, ...]


def _split_point(n: int) -> int:
    """Largest power of two strictly less than n (n >= 2)."""
    return 1 << (n - 1).bit_length() - 1


class MerkleLog:
    """In-memory Merkle tree over a sequence of leaf hashes.

    Entry payloads live in a caller-supplied store (anything indexable
    with ``append``); the log keeps only leaf hashes plus a memo of
    aligned subtree roots so that proof generation over historical sizes
    stays cheap even when many proofs are requested.
    """

    def __init__(self, payloads: list[bytes] | None = None):
        self._leaves: list[bytes] = []
        self._subtree_memo: dict[tuple[int, int], bytes] = {}
        for p in payloads or []:
            self.append(p)

    def __len__(self) -> int:
        return len(self._leaves)

    @property
    def size(self) -> int:
        return len(self._leaves)

    def append(self, payload: bytes) -> int:
        index = len(self._leaves)
        self._leaves.append(hash_leaf(payload))
        return index

    def root(self, tree_size: int | None = None) -> bytes:
        n = self.size if tree_size is None else tree_size
        if n < 0 or n > self.size:
            raise ValueError(f"tree_size {n} out of range (log has {self.size})")
        if n == 0:
            return hash_empty()
        return self._subtree_root(0, n)

    def _subtree_root(self, lo: int, hi: int) -> bytes:
        if hi - lo == 1:
            return self._leaves[lo]
        cached = self._subtree_memo.get((lo, hi))
        if cached is not None:
            return cached
        k = _split_point(hi - lo)
        node = hash_children(self._subtree_root(lo, lo + k), self._subtree_root(lo + k, hi))
        # Leaves are append-only, so a range's root never changes: safe to memoize.
        self._subtree_memo[(lo, hi)] = node
        return node

    def prove_inclusion(self, index: int, tree_size: int | None = None) -> InclusionProof:
        n = self.size if tree_size is None else tree_size
        if not 0 <= index < n or n > self.size:
            raise ValueError(f"index {index} not in tree of size {n} (log has {self.size})")
        sibling_ranges: list[tuple[int, int]] = []
        lo, hi = 0, n
        while hi - lo > 1:
            k = _split_point(hi - lo)
            if index < lo + k:
                sibling_ranges.append((lo + k, hi))
                hi = lo + k
            else:
                sibling_ranges.append((lo, lo + k))
                lo = lo + k
        # Ranges were collected root-to-leaf; emit digests leaf-to-root.
        digests = tuple(self._subtree_root(a, b) for a, b in reversed(sibling_ranges))
        return InclusionProof(leaf_index=index, tree_size=n, path=digests)

    def prove_consistency(self, old_size: int, new_size: int | None = None) -> ConsistencyProof:
        n = self.size if new_size is None else new_size
        if not 0 <= old_size <= n or n > self.size:
            raise ValueError(f"sizes ({old_size}, {n}) out of range (log has {self.size})")
        if old_size == 0 or old_size == n:
            return ConsistencyProof(old_size=old_size, new_size=n, path=())
        path = self._subproof(old_size, 0, n, True)
        return ConsistencyProof(old_size=old_size, new_size=n, path=tuple(path))

    def _subproof(self, m: int, lo: int, hi: int, whole: bool) -> list[bytes]:
        n = hi - lo
        if m == n:
            return [] if whole else [self._subtree_root(lo, hi)]
        k = _split_point(n)
        if m <= k:
            path = self._subproof(m, lo, lo + k, whole)
            path.append(self._subtree_root(lo + k, hi))
        else:
            path = self._subproof(m - k, lo + k, hi, False)
            path.append(self._subtree_root(lo, lo + k))
        return path


def verify_inclusion(leaf_payload: bytes, proof: InclusionProof, root: bytes) -> bool:
    """Recompute the root from a leaf payload and a sibling path.

    RFC 9162 verification: walk the path while consuming the bits of the
    leaf index against the last index in the tree.
    """
    if proof.tree_size <= 0 or not 0 <= proof.leaf_index < proof.tree_size:
        return False
    fn, sn = proof.leaf_index, proof.tree_size - 1
    r = hash_leaf(leaf_payload)
    for p in proof.path:
        if len(p) != 32 or sn == 0:
            return False
        if fn & 1 or fn == sn:
            r = hash_children(p, r)
            if not fn & 1:
                while True:
                    fn >>= 1
                    sn >>= 1
                    if fn & 1 or fn == 0:
                        break
        else:
            r = hash_children(r, p)
        fn >>= 1
        sn >>= 1
    return sn == 0 and r == root


def verify_consistency(
    old_size: int, new_size: int, old_root: bytes, new_root: bytes, proof: ConsistencyProof
) -> bool:
    """Check that the tree of old_size is a prefix of the tree of new_size."""
    if proof.old_size != old_size or proof.new_size != new_size:
        return False
    if old_size > new_size:
        return False
    if old_size == new_size:
        return not proof.path and old_root == new_root
    if old_size == 0:
        # Nothing to be consistent with; any tree extends the empty tree.
        return not proof.path and old_root == hash_empty()
    path = list(proof.path)
    if old_size & (old_size - 1) == 0:
        # Old tree is a complete subtree of the new one; its root is implied.
        path.insert(0, old_root)
    if not path:
        return False
    fn, sn = old_size - 1, new_size - 1
    while fn & 1:
        fn >>= 1
        sn >>= 1
    fr = sr = path[0]
    for c in path[1:]:
        if len(c) != 32 or sn == 0:
            return False
        if fn & 1 or fn == sn:
            fr = hash_children(c, fr)
            sr = hash_children(c, sr)
            if not fn & 1:
                while True:
                    fn >>= 1
                    sn >>= 1
                    if fn & 1 or fn == 0:
                        break
        else:
            sr = hash_children(sr, c)
        fn >>= 1
        sn >>= 1
    return sn == 0 and fr == old_root and sr == new_root
