"""Acceptance suite: one test per criterion, one PASS/FAIL line each.

Run with `pytest -s tests/test_acceptance.py` to see the lines as they
print. Criterion 3 runs a reduced-scale profile by default; set
VAMS_PROFILE=full for the million-record configuration (same seed
discipline, tighter threshold, still well under its runtime budget).

Criterion 1 note: one reference probability (5-share scheme, one known
share, 10000 users) is internally inconsistent with the success-
probability formula that generates every other cell, and no element
count reproduces it (e=22 gives 9e-35, e=23 gives 2e-7, e=24 gives
5e-2). The check is asserted as stated anyway; that single comparison is
a known, documented failure rather than a softened test.
"""

import dataclasses
import json
import math
import os
import random
import time
from fractions import Fraction

import numpy as np
import pytest

from .oracles import (
    enumerate_valid_ballots,
    enumerated_combo_probability,
    enumerated_share_counts,
    FORM_DOUBLE_FULL,
    FORM_SINGLE_TRUE,
    merkle_root,
    sparse_map_root,
)

PROFILE = os.environ.get("VAMS_PROFILE", "ci")


def report(criterion: int, ok: bool, detail: str) -> None:
    print(f"\nACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} - {detail}")


# 1. Safe-bounds table reproduction ---------------------------------------

TABLE_REFERENCE = {
    (1, 1): [(10, 3, 3e-5), (100, 6, 5e-13), (1000, 10, 6e-10), (10000, 14, 1e-7)],
    (1, 2): [(10, 1, 8e-5), (100, 2, 2e-12), (1000, 4, 2e-10), (10000, 6, 5e-9)],
    (2, 1): [(10, 6, 4e-6), (100, 11, 5e-20), (1000, 17, 3e-12), (10000, 23, 2e-13)],
    (2, 4): [(10, 1, 5e-5), (100, 2, 3e-9), (1000, 3, 2e-17), (10000, 5, 3e-7)],
}


def leading_digit_matches(computed: float, reference: float) -> bool:
    """Computed value must agree with the reference to one significant
    figure, allowing +-1 in the leading digit (same order of magnitude)."""
    exponent = math.floor(math.log10(reference))
    digit = computed / 10.0 ** exponent
    reference_digit = round(reference / 10.0 ** exponent)
    return abs(digit - reference_digit) <= 1.0 + 1e-9


def test_criterion_1_safe_bounds_table():
    from vams.bounds import safe_bounds_table

    started = time.monotonic()
    rows = {(r["k"], r["known_shares"], r["users"]): r for r in safe_bounds_table(1e-4)}
    elapsed = time.monotonic() - started

    failures = []
    for (k, a), cells in TABLE_REFERENCE.items():
        for users, expected_count, expected_probability in cells:
            row = rows[(k, a, users)]
            if row["max_safe_elements"] != expected_count:
                failures.append(
                    f"count ({2 * k + 1}Ballot({a}), {users} users): "
                    f"{row['max_safe_elements']} != {expected_count}"
                )
            if not leading_digit_matches(row["success_probability"], expected_probability):
                failures.append(
                    f"probability ({2 * k + 1}Ballot({a}), {users} users): computed "
                    f"{row['success_probability']:.1e}, reference {expected_probability:.0e}"
                )
    ok = not failures and elapsed < 10.0
    report(
        1,
        ok,
        f"16 table cells, element counts + probabilities at +-1 leading digit, {elapsed:.2f}s"
        + ("" if not failures else f"; failures: {failures}"),
    )
    assert elapsed < 10.0
    assert not failures, failures


# 2. Exhaustive enumeration oracle ------------------------------------------


def test_criterion_2_enumeration_oracle():
    from vams.bounds import share_distribution, valid_ballot_total, valid_combo_probability

    started = time.monotonic()
    checks = []
    for k, expected_total in ((1, 18), (2, 200)):
        ballots = enumerate_valid_ballots(k)
        checks.append(len(ballots) == expected_total == valid_ballot_total(k))
        counts = enumerated_share_counts(k)
        dist = share_distribution(k)
        checks.append(counts[FORM_SINGLE_TRUE] == dist.singles_count)
        checks.append(counts[FORM_DOUBLE_FULL] == dist.doubles_count)
        checks.append(enumerated_combo_probability(k) == valid_combo_probability(k))
    dist1 = share_distribution(1)
    checks.append((dist1.p_single, dist1.p_double) == (Fraction(15, 54), Fraction(12, 54)))
    p1 = valid_combo_probability(1)
    checks.append(p1 == Fraction(95, 324) and abs(float(p1) - 0.29321) < 1e-4)
    elapsed = time.monotonic() - started
    ok = all(checks) and elapsed < 60.0
    report(2, ok, f"V, share counts, P exact in rationals for k in {{1,2}}, {elapsed:.2f}s")
    assert ok


# 3. Recovered-support accuracy headline -------------------------------------


def test_criterion_3_accuracy_headline():
    from vams.experiments.runners import run_fig6

    if PROFILE == "full":
        r, threshold = 1_000_000, 2.0
    else:
        r, threshold = 100_000, 5.0
    trials = 20
    started = time.monotonic()
    result = run_fig6(r=r, ks=(1,), supports=(0.11,), trials=trials, seed=301)
    mean_error = result.mean_error((1, 0.11))
    elapsed = time.monotonic() - started
    ok = mean_error < threshold and elapsed < 1800
    report(
        3,
        ok,
        f"profile={PROFILE}: r={r}, k=1, support 0.11: mean pct error "
        f"{mean_error:.3f}% < {threshold}% over {trials} trials ({elapsed:.0f}s)",
    )
    assert mean_error < threshold
    assert elapsed < 1800


# 4. Error trends across dataset size and itemset size -----------------------


def test_criterion_4_error_trends():
    from vams.experiments.runners import run_fig7, run_fig8

    trials = 50
    fig7 = run_fig7(sizes=(1_000, 10_000, 100_000), supports=(0.1,), trials=trials, seed=401)
    by_r = [fig7.mean_error((r, 0.1)) for r in (1_000, 10_000, 100_000)]
    decreasing = by_r[0] > by_r[1] > by_r[2]

    fig8 = run_fig8(r=100_000, sizes=(2, 4, 6), trials=trials, seed=402)
    by_size = [fig8.mean_error((s,)) for s in (2, 4, 6)]
    increasing = by_size[0] < by_size[1] < by_size[2]

    ok = decreasing and increasing
    report(
        4,
        ok,
        f"error vs r {['%.2f' % e for e in by_r]} strictly down; "
        f"vs itemset size {['%.2f' % e for e in by_size]} strictly up ({trials} trials)",
    )
    assert decreasing, by_r
    assert increasing, by_size


# 5. Support recovery exactness ----------------------------------------------


def test_criterion_5_recovery_exactness():
    from vams.stats import expectation_matrix, recover_occurrences

    rng = np.random.default_rng(501)
    worst = 0.0
    for _ in range(100):
        t = int(rng.integers(1, 7))
        k = int(rng.integers(0, 4))
        o_d = rng.integers(0, 1000, size=1 << t).astype(np.float64)
        matrix = expectation_matrix(k, t)
        result = recover_occurrences(matrix @ o_d, matrix)
        worst = max(worst, float(np.max(np.abs(result.estimate - o_d))))
    ok = worst < 1e-9
    report(5, ok, f"100 random datasets (t<=6): worst per-cell deviation {worst:.2e} < 1e-9")
    assert ok


# 6. Ballot generation invariants --------------------------------------------


def test_criterion_6_ballot_invariants():
    from vams.multiballot import _ballot_matrix

    rng = np.random.default_rng(601)
    all_exact = True
    reconstruction_failures = 0
    for k in range(5):
        values = rng.integers(0, 2, size=(10_000, 4)).astype(np.uint8)
        ballots = _ballot_matrix(values, k, rng)
        ones = ballots.sum(axis=1)
        expected = np.where(values == 1, k + 1, k)
        all_exact &= bool(np.array_equal(ones, expected))
        majorities = (ones == k + 1).astype(np.uint8)
        reconstruction_failures += int(np.count_nonzero(majorities != values))
    ok = all_exact and reconstruction_failures == 0
    report(
        6,
        ok,
        "10^4 ballots per k in 0..4: per-element count exactly k+1, "
        f"majority reconstruction failures {reconstruction_failures}",
    )
    assert ok


# 7. Transparency structures against oracles ---------------------------------


def test_criterion_7_transparency_structures():
    from vams.merkle_log import (
        InclusionProof,
        MerkleLog,
        verify_consistency,
        verify_inclusion,
    )
    from vams.sparse_map import SparseMerkleMap, verify_map_proof

    rnd = random.Random(701)
    payloads = [rnd.randbytes(12) for _ in range(4096)]
    log = MerkleLog(payloads)
    root = log.root()
    assert root == merkle_root(payloads)

    # every index at the full size, plus random historical (index, size) pairs
    for index in range(4096):
        proof = log.prove_inclusion(index, 4096)
        assert verify_inclusion(payloads[index], proof, root), index
    for _ in range(500):
        size = rnd.randrange(1, 4097)
        index = rnd.randrange(size)
        proof = log.prove_inclusion(index, size)
        assert verify_inclusion(payloads[index], proof, log.root(size))

    # single-bit tampers of leaf, path, and root are all rejected
    for _ in range(120):
        size = rnd.randrange(1, 4097)
        index = rnd.randrange(size)
        proof = log.prove_inclusion(index, size)
        good_root = log.root(size)
        payload = payloads[index]
        bit = 1 << rnd.randrange(8)
        pos = rnd.randrange(len(payload))
        bad_payload = payload[:pos] + bytes([payload[pos] ^ bit]) + payload[pos + 1 :]
        assert not verify_inclusion(bad_payload, proof, good_root)
        if proof.path:
            level = rnd.randrange(len(proof.path))
            node = proof.path[level]
            pos = rnd.randrange(32)
            tampered = node[:pos] + bytes([node[pos] ^ bit]) + node[pos + 1 :]
            bad_path = list(proof.path)
            bad_path[level] = tampered
            bad = InclusionProof(proof.leaf_index, proof.tree_size, tuple(bad_path))
            assert not verify_inclusion(payload, bad, good_root)
        pos = rnd.randrange(32)
        bad_root = good_root[:pos] + bytes([good_root[pos] ^ bit]) + good_root[pos + 1 :]
        assert not verify_inclusion(payload, proof, bad_root)

    # consistency proofs for ALL size pairs up to 2^10 on one log,
    # plus random pairs at the full 2^12, plus fork rejection
    for n in range(1, 1025):
        log.root(n)
    for a in range(0, 1025):
        for b in range(a, 1025):
            proof = log.prove_consistency(a, b)
            assert verify_consistency(a, b, log.root(a), log.root(b), proof), (a, b)
    for _ in range(500):
        a = rnd.randrange(0, 4097)
        b = rnd.randrange(a, 4097)
        proof = log.prove_consistency(a, b)
        assert verify_consistency(a, b, log.root(a), log.root(b), proof)
    # Fork semantics: a client holding a head from the diverged history can
    # never be shown a verifying consistency proof to an honest head.
    divergence = 700
    forked = MerkleLog(payloads[:divergence] + [b"EVIL"] + payloads[divergence + 1 :])
    for a, b in ((800, 1024), (701, 4096), (1024, 2048)):
        for proof_source in (forked, log):
            proof = proof_source.prove_consistency(a, b)
            assert not verify_consistency(a, b, forked.root(a), log.root(b), proof), (a, b)
            assert not verify_consistency(a, b, log.root(a), forked.root(b), proof), (a, b)
    for a, b in ((128, 1024), (512, 2048)):  # shared prefix, diverged suffix
        proof = forked.prove_consistency(a, b)
        assert not verify_consistency(a, b, log.root(a), log.root(b), proof), (a, b)

    # sparse map against the brute-force full recomputation oracle
    smap = SparseMerkleMap()
    kv = {}
    for batch in range(4):
        pairs = [(rnd.randbytes(32), rnd.randbytes(8)) for _ in range(256)]
        kv.update(pairs)
        smap.set_batch(pairs)
    assert len(kv) == 1024
    assert smap.root() == sparse_map_root(kv)
    for key in list(kv)[::37]:
        proof = smap.get_with_proof(key)
        assert proof.value == kv[key]
        assert verify_map_proof(smap.root(), key, proof)
    absent_ok = 0
    for _ in range(100):
        key = rnd.randbytes(32)
        if key in kv:
            continue
        proof = smap.get_with_proof(key)
        assert proof.value is None
        assert verify_map_proof(smap.root(), key, proof)
        absent_ok += 1
    report(
        7,
        True,
        "4096-leaf log: all inclusions + tampers rejected; all 525k consistency "
        f"pairs <=1024 verify; 1024-key map matches oracle, {absent_ok} absent proofs",
    )


# 8. End-to-end protocol roundtrip -------------------------------------------


def test_criterion_8_end_to_end_roundtrip(parties):
    from vams.client import client_for_app
    from vams.http_api import create_app
    from vams.roles import audit, check, request
    from vams.server import LogServer

    server = LogServer(parties.server_config(batch_size=7))
    client = client_for_app(create_app(server))
    try:
        pairs = [(b"agent-1", b"dp-A", 9), (b"agent-1", b"dp-B", 8), (b"agent-2", b"dp-A", 8)]
        sent: dict[tuple, list] = {}
        for id_a, id_dp, count in pairs:
            for n in range(count):
                body = json.dumps({"category": "urgent", "pair": f"{id_a}-{id_dp}"}).encode()
                result = request(
                    client, id_a, id_dp, n, body, parties.salt, parties.agent_seed,
                    parties.agent_key_id, parties.user_box_pub, parties.auditor_box_pub,
                )
                sent.setdefault((id_a, id_dp), []).append(result.id_c)
        client.flush()

        id_c_by_pair = {}
        leakage = 0
        for id_a, id_dp, count in pairs:
            result = check(
                client, id_a, id_dp, parties.user_box_priv, parties.salt, parties.server_pub
            )
            assert len(result.entries) == count, (id_a, id_dp)
            assert [e.n for e in result.entries] == list(range(count))
            assert all(e.decrypted for e in result.entries)
            returned = {e.id_c for e in result.entries}
            assert returned == set(sent[(id_a, id_dp)])
            id_c_by_pair[(id_a, id_dp)] = returned
        views = list(id_c_by_pair.values())
        for i in range(len(views)):
            for j in range(i + 1, len(views)):
                leakage += len(views[i] & views[j])

        audit_report = audit(client, parties.auditor_box_priv, parties.server_pub)
        ok = (
            leakage == 0
            and audit_report.valid_requests == 25
            and audit_report.map_heads_checked >= 1
            and audit_report.tallies_consistent()
        )
        report(
            8,
            ok,
            f"25 requests over 3 pairs: exact per-pair recovery, leakage={leakage}, "
            f"audit replay matched {audit_report.map_heads_checked} map head(s) bit-exactly",
        )
        assert ok
    finally:
        client.close()
        server.close()


# 9. Equivocation detection ----------------------------------------------------


def test_criterion_9_equivocation(parties):
    from vams.roles.agent import build_envelope
    from vams.roles.detect import HeadSet, detect
    from vams.server import LogServer
    from vams.client import client_for_app
    from vams.http_api import create_app

    # honest run: 10^3 appends, heads sampled along the way -> NONE
    server = LogServer(parties.server_config(batch_size=100))
    client = client_for_app(create_app(server))
    try:
        sampled_sizes = []
        for n in range(1000):
            envelope = build_envelope(
                b"agent-H", b"dp-H", n, b'{"category":"bulk"}', parties.salt,
                parties.agent_seed, parties.agent_key_id,
                parties.user_box_pub, parties.auditor_box_pub,
            )
            server.submit_request(envelope)
            if (n + 1) % 250 == 0:
                server.flush()
                sampled_sizes.append(n + 1)
        views = [
            HeadSet(
                source=f"size-{size}",
                log_head=server.log_head(size),
                map_head=server.map_head(),
                headlog_head=server.headlog_head(),
                client=client,
            )
            for size in sampled_sizes
        ]
        honest = detect(views, server_public_key=parties.server_pub)
        honest_ok = honest.evidence is None

        # forked server: same size, different roots -> SAME_SIZE_FORK
        fork_a = LogServer(parties.server_config())
        fork_b = LogServer(parties.server_config())
        try:
            for n in range(5):
                envelope = build_envelope(
                    b"agent-F", b"dp-F", n, b'{"category":"x"}', parties.salt,
                    parties.agent_seed, parties.agent_key_id,
                    parties.user_box_pub, parties.auditor_box_pub,
                )
                fork_a.submit_request(envelope)
                fork_b.submit_request(envelope)
            for variant, target in ((b'{"category":"real"}', fork_a), (b'{"category":"lie"}', fork_b)):
                target.submit_request(
                    build_envelope(
                        b"agent-F", b"dp-F", 9, variant, parties.salt,
                        parties.agent_seed, parties.agent_key_id,
                        parties.user_box_pub, parties.auditor_box_pub,
                    )
                )
            fork_views = [
                HeadSet(source="view-a", log_head=fork_a.log_head(),
                        map_head=fork_a.map_head(), headlog_head=fork_a.headlog_head()),
                HeadSet(source="view-b", log_head=fork_b.log_head(),
                        map_head=fork_b.map_head(), headlog_head=fork_b.headlog_head()),
            ]
            forked = detect(fork_views, server_public_key=parties.server_pub)
            fork_ok = forked.evidence is not None and forked.evidence.kind == "SAME_SIZE_FORK"
        finally:
            fork_a.close()
            fork_b.close()

        ok = honest_ok and fork_ok
        report(
            9,
            ok,
            f"honest 10^3-append run: NONE; size-equal fork detected as "
            f"{forked.evidence.kind if forked.evidence else 'MISSED'}",
        )
        assert ok
    finally:
        client.close()
        server.close()


# 10. Monitor soundness ---------------------------------------------------------


def test_criterion_10_monitor_soundness(parties):
    from vams.client import client_for_app
    from vams.http_api import create_app
    from vams.multiballot import Dataset, PrivDataset, Record
    from vams.roles import monitor, publish
    from vams.server import LogServer
    from vams.experiments.synthetic import PlantedSet, SyntheticSpec, gen_synthetic
    import tempfile

    server = LogServer(parties.server_config())
    client = client_for_app(create_app(server))
    tolerance = 0.25
    r, t = 10_000, 4
    accepted = 0
    runs = 100
    reject_counts = {"STAT_MISMATCH": 0, "SHARES_MISSING": 0, "SHARES_TAMPERED": 0}
    try:
        with tempfile.TemporaryDirectory() as workdir:
            for seed in range(runs):
                data_rng, ballot_seed = np.random.SeedSequence(1000 + seed).spawn(2)
                spec = SyntheticSpec(r=r, t=t, planted=(PlantedSet((1, 2), 0.5),))
                values = gen_synthetic(spec, np.random.default_rng(data_rng))
                dataset = Dataset(values=values, ids=[f"{seed:08x}{i:024x}" for i in range(r)])
                dpriv_path = os.path.join(workdir, f"dpriv-{seed}.csv")
                published = publish(
                    client, dataset, dpriv_path, parties.auditor_sign_seed,
                    parties.auditor_key_id, k=1, itemsets=[(1,), (2,), (1, 2)],
                    tolerance=tolerance, seed=int(ballot_seed.generate_state(1)[0]),
                )
                priv = published.priv
                outcome = monitor(
                    published.manifest, priv,
                    dpriv_bytes=open(dpriv_path, "rb").read(),
                )
                if outcome.ok:
                    accepted += 1

                if seed < 10:
                    # each perturbation class must reject with its reason
                    lying = json.loads(json.dumps(published.manifest))
                    lying["itemsets"][2]["support"] *= 1 + 3 * tolerance
                    stat = monitor(lying, priv)
                    if any(x.startswith("STAT_MISMATCH") for x in stat.reasons):
                        reject_counts["STAT_MISMATCH"] += 1

                    victim = Record(
                        id_c=dataset.ids[5], values=tuple(int(v) for v in values[5])
                    )
                    from vams.identity import derive_share_id

                    index_map = priv.index_by_share_id()
                    pos = index_map[derive_share_id(bytes.fromhex(dataset.ids[5]), 1).hex()]
                    deleted = dataclasses.replace(
                        priv,
                        share_ids=priv.share_ids[:pos] + priv.share_ids[pos + 1 :],
                        share_values=np.delete(priv.share_values, pos, axis=0),
                    )
                    missing = monitor(
                        published.manifest, deleted, own_id_c=dataset.ids[5], own_record=victim
                    )
                    if any(x.startswith("SHARES_MISSING") for x in missing.reasons):
                        reject_counts["SHARES_MISSING"] += 1

                    flipped_values = priv.share_values.copy()
                    flipped_values[pos, 3] ^= 1
                    flipped = dataclasses.replace(priv, share_values=flipped_values)
                    tampered = monitor(
                        published.manifest, flipped, own_id_c=dataset.ids[5], own_record=victim
                    )
                    if any(x.startswith("SHARES_TAMPERED") for x in tampered.reasons):
                        reject_counts["SHARES_TAMPERED"] += 1

        ok = accepted == runs and all(v == 10 for v in reject_counts.values())
        report(
            10,
            ok,
            f"honest publishes accepted {accepted}/{runs}; rejections 10/10 per class "
            f"{reject_counts}",
        )
        assert accepted == runs
        assert all(v == 10 for v in reject_counts.values()), reject_counts
    finally:
        client.close()
        server.close()


# 11. Throughput bench shape -----------------------------------------------------


def test_criterion_11_bench_shape():
    from vams.experiments.bench import bench_throughput

    batch_sizes = (1, 8, 64, 300)
    rows = bench_throughput(batch_sizes=batch_sizes, requests=300, submit_threads=4)
    assert [row.batch_size for row in rows] == list(batch_sizes)
    throughput = [row.map_ops_per_sec for row in rows]
    plateau = max(throughput[-2:])
    rising = plateau > throughput[0]
    no_collapse = all(b >= a * 0.8 for a, b in zip(throughput, throughput[1:]))
    ok = rising and no_collapse
    report(
        11,
        ok,
        "map throughput per batch size "
        + ", ".join(f"B={b}:{t:.0f}/s" for b, t in zip(batch_sizes, throughput))
        + " (non-decreasing to plateau; absolute numbers machine-specific)",
    )
    assert ok, throughput
