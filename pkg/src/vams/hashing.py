"""SHA-256 hashing conventions shared by the log and the map.

Leaf and interior hashes are domain-separated with a prefix byte so a
leaf can never be reinterpreted as an interior node (Certificate
Transparency convention). The sparse map reuses the same two prefixes,
which also makes the hash of an empty leaf (no value) equal to
``sha256(b"\\x00")``.
"""

from __future__ import annotations

import hashlib

DIGEST_LEN = 32
MAP_DEPTH = 256

LEAF_PREFIX = b"\x00"
NODE_PREFIX = b"\x01"


def hash_leaf(payload: bytes) -> bytes:
    return hashlib.sha256(LEAF_PREFIX + payload).digest()


def hash_children(left: bytes, right: bytes) -> bytes:
    return hashlib.sha256(NODE_PREFIX + left + right).digest()


def hash_empty() -> bytes:
    """Root of an empty log (hash of the empty string, per CT)."""
    return hashlib.sha256(b"").digest()


def _compute_map_defaults() -> list[bytes]:
    """Default subtree hashes for the sparse map, indexed by depth.

    ``defaults[d]`` is the hash of an all-empty subtree whose root sits
    at depth ``d`` (depth 0 is the map root, depth 256 the leaves). Only
    non-empty leaves ever need to be computed; everything else falls
    back on this table.
    """
    defaults = [b""] * (MAP_DEPTH + 1)
    defaults[MAP_DEPTH] = hash_leaf(b"")
    for d in range(MAP_DEPTH - 1, -1, -1):
        child = defaults[d + 1]
        defaults[d] = hash_children(child, child)
    return defaults


MAP_DEFAULTS: list[bytes] = _compute_map_defaults()
