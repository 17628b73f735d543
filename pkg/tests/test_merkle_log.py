import hashlib
import random

import pytest
from hypothesis import given, settings, strategies as st

from vams.hashing import hash_children, hash_empty, hash_leaf
from vams.merkle_log import (
    ConsistencyProof,
    InclusionProof,
    MerkleLog,
    verify_consistency,
    verify_inclusion,
)

from .oracles import merkle_root


def sha(data):
    return hashlib.sha256(data).digest()


def test_single_leaf_root_is_prefixed_hash():
    log = MerkleLog()
    index = log.append(b"p")
    assert index == 0
    assert log.root() == sha(b"\x00" + b"p")


def test_four_leaf_root_hand_computed():
    payloads = [b"a", b"b", b"c", b"d"]
    log = MerkleLog(payloads)
    l = [sha(b"\x00" + p) for p in payloads]
    expected = sha(b"\x01" + sha(b"\x01" + l[0] + l[1]) + sha(b"\x01" + l[2] + l[3]))
    assert log.root() == expected


def test_leaf_order_changes_root():
    assert MerkleLog([b"a", b"b", b"c"]).root() != MerkleLog([b"b", b"a", b"c"]).root()


def test_empty_root():
    assert MerkleLog().root() == hash_empty()


def test_roots_match_oracle_for_all_prefixes():
    random.seed(5)
    payloads = [random.randbytes(10) for _ in range(65)]
    log = MerkleLog(payloads)
    for n in range(66):
        assert log.root(n) == merkle_root(payloads[:n]), n


def test_single_leaf_inclusion_proof_empty_path():
    log = MerkleLog([b"only"])
    proof = log.prove_inclusion(0, 1)
    assert proof.path == ()
    assert verify_inclusion(b"only", proof, log.root(1))


def test_tree4_index2_path_hand_computed():
    payloads = [b"a", b"b", b"c", b"d"]
    log = MerkleLog(payloads)
    proof = log.prove_inclusion(2, 4)
    l = [sha(b"\x00" + p) for p in payloads]
    assert list(proof.path) == [l[3], sha(b"\x01" + l[0] + l[1])]


def test_proof_checked_against_wrong_index_fails():
    log = MerkleLog([b"a", b"b", b"c", b"d"])
    proof = log.prove_inclusion(2, 4)
    mismatched = InclusionProof(leaf_index=3, tree_size=4, path=proof.path)
    assert not verify_inclusion(b"d", mismatched, log.root())
    assert not verify_inclusion(b"c", mismatched, log.root())


def test_inclusion_out_of_range():
    log = MerkleLog([b"a"])
    with pytest.raises(ValueError):
        log.prove_inclusion(1, 1)
    with pytest.raises(ValueError):
        log.prove_inclusion(0, 2)


def test_consistency_trivial_and_empty():
    log = MerkleLog([b"a", b"b", b"c"])
    same = log.prove_consistency(3, 3)
    assert same.path == ()
    assert verify_consistency(3, 3, log.root(3), log.root(3), same)
    from_empty = log.prove_consistency(0, 3)
    assert from_empty.path == ()
    assert verify_consistency(0, 3, log.root(0), log.root(3), from_empty)


def test_consistency_2_to_4_hand_computed():
    payloads = [b"a", b"b", b"c", b"d"]
    log = MerkleLog(payloads)
    proof = log.prove_consistency(2, 4)
    l = [sha(b"\x00" + p) for p in payloads]
    # Old tree (size 2) is a complete subtree; the proof is the right sibling.
    assert list(proof.path) == [sha(b"\x01" + l[2] + l[3])]
    assert verify_consistency(2, 4, log.root(2), log.root(4), proof)


def test_fork_consistency_rejected():
    random.seed(9)
    payloads = [random.randbytes(8) for _ in range(64)]
    honest = MerkleLog(payloads)
    forked_payloads = payloads[:40] + [b"EVIL"] + payloads[41:]
    forked = MerkleLog(forked_payloads)
    proof = forked.prove_consistency(48, 64)
    assert not verify_consistency(48, 64, honest.root(48), honest.root(64), proof)
    assert verify_consistency(48, 64, forked.root(48), forked.root(64), proof)


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=1, max_value=96), st.randoms(use_true_random=False))
def test_inclusion_roundtrip_property(size, rnd):
    payloads = [bytes([rnd.randrange(256)]) * 4 for _ in range(size)]
    log = MerkleLog(payloads)
    index = rnd.randrange(size)
    proof = log.prove_inclusion(index, size)
    assert verify_inclusion(payloads[index], proof, log.root(size))
    assert not verify_inclusion(payloads[index] + b"x", proof, log.root(size))


@settings(max_examples=40, deadline=None)
@given(
    st.integers(min_value=0, max_value=80),
    st.integers(min_value=0, max_value=80),
    st.randoms(use_true_random=False),
)
def test_consistency_roundtrip_property(a, b, rnd):
    lo, hi = sorted((a, b))
    payloads = [bytes([rnd.randrange(256), rnd.randrange(256)]) for _ in range(hi)]
    log = MerkleLog(payloads)
    proof = log.prove_consistency(lo, hi)
    assert verify_consistency(lo, hi, log.root(lo), log.root(hi), proof)


def test_tampered_path_digest_rejected():
    random.seed(11)
    payloads = [random.randbytes(6) for _ in range(33)]
    log = MerkleLog(payloads)
    proof = log.prove_inclusion(17, 33)
    root = log.root(33)
    assert verify_inclusion(payloads[17], proof, root)
    for level in range(len(proof.path)):
        corrupted = list(proof.path)
        corrupted[level] = bytes([corrupted[level][0] ^ 0x01]) + corrupted[level][1:]
        bad = InclusionProof(leaf_index=17, tree_size=33, path=tuple(corrupted))
        assert not verify_inclusion(payloads[17], bad, root), level


def test_malformed_path_length_rejected():
    log = MerkleLog([b"a", b"b", b"c", b"d"])
    proof = log.prove_inclusion(1, 4)
    short = InclusionProof(1, 4, proof.path[:-1])
    long = InclusionProof(1, 4, proof.path + (proof.path[0],))
    assert not verify_inclusion(b"b", short, log.root())
    assert not verify_inclusion(b"b", long, log.root())
