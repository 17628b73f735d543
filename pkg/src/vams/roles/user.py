"""The user side: find one's own requests, and verify published statistics.

``check`` walks the session counter against a frozen map revision,
verifying every (non-)inclusion proof, until a run of consecutive
misses says the scan is past the last request. ``monitor`` re-derives
published statistics from the share dataset and checks the user's own
shares, rejecting with a distinct reason per failed sub-check.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any

from ..client import LogClient
from ..errors import SealError, UndefinedConfidence, VamsError
from ..heads import SignedMapRoot
from ..identity import derive_common_id, open_payload
from ..merkle_log import verify_inclusion
from ..multiballot import (
    MULTIBALLOT,
    PrivDataset,
    Record,
    check_share_distribution,
    verify_own_shares,
)
from ..sparse_map import MapProof
from ..stats import (
    MAX_MATRIX_ELEMENTS,
    expectation_matrix,
    occurrence_vector,
    recover_occurrences,
    recovered_measures,
)
from ..wire import ManifestEnvelope, RequestEnvelope, canonical_json, map_key_for_request

DEFAULT_LOOKAHEAD = 3
DEFAULT_PARALLELISM = 4

STAT_MISMATCH = "STAT_MISMATCH"
SHARES_MISSING = "SHARES_MISSING"
SHARES_TAMPERED = "SHARES_TAMPERED"
DIGEST_MISMATCH = "DIGEST_MISMATCH"
MANIFEST_NOT_LOGGED = "MANIFEST_NOT_LOGGED"
DISTRIBUTION_ANOMALY = "DISTRIBUTION_ANOMALY"


@dataclass(frozen=True)
class CheckEntry:
    n: int
    id_c: str
    body: bytes | None  # None when the sealed payload would not open
    proof: MapProof
    revision: int

    @property
    def decrypted(self) -> bool:
        return self.body is not None


@dataclass
class CheckResult:
    entries: list[CheckEntry]
    terminal_non_inclusion: MapProof | None
    map_head: SignedMapRoot
    scanned_up_to: int  # first counter value past the lookahead run


def check(
    client: LogClient,
    id_a: bytes,
    id_dp: bytes,
    user_box_private: bytes,
    salt: bytes,
    server_public_key: bytes,
    lookahead: int = DEFAULT_LOOKAHEAD,
    parallelism: int = DEFAULT_PARALLELISM,
) -> CheckResult:
    """Collect all of the pair's logged requests with verified proofs.

    Scans n = 0, 1, 2, ... against one frozen map revision and stops
    after ``lookahead`` consecutive verified non-inclusions. Any proof
    that fails verification aborts with EvidenceSuspected (raised from
    the verifying fetch).
    """
    if lookahead < 1:
        raise ValueError("lookahead must be >= 1")
    head = client.map_root()
    client.verified_map_head_in_headlog(head, server_public_key)
    revision = head.revision

    entries: list[CheckEntry] = []
    terminal: MapProof | None = None
    misses = 0
    n = 0
    with ThreadPoolExecutor(max_workers=max(1, parallelism)) as pool:
        while misses < lookahead:
            wave = list(range(n, n + max(1, parallelism)))
            keys = [
                map_key_for_request(derive_common_id(id_a, id_dp, wave_n, salt))
                for wave_n in wave
            ]
            proofs = list(
                pool.map(
                    lambda key: client.verified_map_proof(key, server_public_key, revision)[0],
                    keys,
                )
            )
            for wave_n, proof in zip(wave, proofs):
                if proof.value is None:
                    misses += 1
                    terminal = proof
                    if misses >= lookahead:
                        n = wave_n + 1
                        break
                else:
                    misses = 0
                    envelope = RequestEnvelope.from_payload(proof.value)
                    try:
                        body: bytes | None = open_payload(
                            envelope.sealed.user_ct, user_box_private
                        )
                    except SealError:
                        body = None
                    entries.append(
                        CheckEntry(
                            n=wave_n,
                            id_c=envelope.id_c.hex(),
                            body=body,
                            proof=proof,
                            revision=revision,
                        )
                    )
            else:
                n = wave[-1] + 1
    return CheckResult(
        entries=entries,
        terminal_non_inclusion=terminal,
        map_head=head,
        scanned_up_to=n,
    )


@dataclass
class MonitorResult:
    ok: bool
    reasons: list[str] = field(default_factory=list)
    details: dict[str, Any] = field(default_factory=dict)


def _measures_match(reported: dict, recovered, tolerance: float) -> str | None:
    supp_reported = float(reported["support"])
    if supp_reported <= 0:
        return f"itemset {reported['elements']}: reported support must be positive"
    if abs(recovered.support - supp_reported) > tolerance * supp_reported:
        return (
            f"itemset {reported['elements']}: support {supp_reported:.6f} vs "
            f"recovered {recovered.support:.6f} beyond tolerance {tolerance}"
        )
    conf_reported = reported.get("confidence")
    if conf_reported is not None and recovered.confidence is not None:
        if abs(recovered.confidence - float(conf_reported)) > tolerance * float(conf_reported):
            return (
                f"itemset {reported['elements']}: confidence {conf_reported:.6f} vs "
                f"recovered {recovered.confidence:.6f} beyond tolerance {tolerance}"
            )
    return None


def monitor(
    manifest: dict,
    priv: PrivDataset,
    dpriv_bytes: bytes | None = None,
    client: LogClient | None = None,
    server_public_key: bytes | None = None,
    log_index: int | None = None,
    own_id_c: str | None = None,
    own_record: Record | None = None,
) -> MonitorResult:
    """Re-verify a published audit from its manifest and share dataset.

    Sub-checks, each with its own reject reason: manifest inclusion on
    the log, share-file digest, re-derived statistics within the
    declared tolerance, the user's own shares, and the share
    distribution. Checks run independently so one failure does not mask
    another.
    """
    result = MonitorResult(ok=True)

    if client is not None and server_public_key is not None and log_index is not None:
        try:
            payload, head = client.verified_log_entry(log_index, server_public_key)
            logged = ManifestEnvelope.from_payload(payload)
            if canonical_json(logged.manifest) != canonical_json(manifest):
                result.reasons.append(
                    f"{MANIFEST_NOT_LOGGED}: entry {log_index} holds a different manifest"
                )
        except VamsError as exc:
            result.reasons.append(f"{MANIFEST_NOT_LOGGED}: {exc}")

    declared_digest = manifest.get("dpriv_digest")
    if declared_digest is not None and dpriv_bytes is not None:
        actual = hashlib.sha256(dpriv_bytes).hexdigest()
        if actual != declared_digest:
            result.reasons.append(
                f"{DIGEST_MISMATCH}: share dataset hashes to {actual[:16]}…, "
                f"manifest says {str(declared_digest)[:16]}…"
            )

    tolerance = float(manifest.get("tolerance", 0.1))
    itemsets = manifest.get("itemsets", [])
    try:
        recovered = recovered_measures(priv, [tuple(i["elements"]) for i in itemsets])
        for reported, rec in zip(itemsets, recovered):
            mismatch = _measures_match(reported, rec, tolerance)
            if mismatch:
                result.reasons.append(f"{STAT_MISMATCH}: {mismatch}")
        result.details["recovered"] = [
            {"elements": list(m.elements), "support": m.support, "confidence": m.confidence}
            for m in recovered
        ]
    except VamsError as exc:
        result.reasons.append(f"{STAT_MISMATCH}: recovery failed: {exc}")

    if own_id_c is not None and own_record is not None:
        own = verify_own_shares(own_id_c, own_record, priv)
        if not own.ok:
            result.reasons.append(f"{own.status}: {own.detail}")

    dist_tolerance = float(manifest.get("distribution_tolerance", 0.1))
    try:
        if priv.kind == MULTIBALLOT:
            if priv.t <= MAX_MATRIX_ELEMENTS:
                o_priv = occurrence_vector(priv.share_values)
                recovery = recover_occurrences(o_priv, expectation_matrix(priv.k, priv.t))
                dist = check_share_distribution(priv, recovery.estimate, dist_tolerance)
                if not dist.ok:
                    result.reasons.append(
                        f"{DISTRIBUTION_ANOMALY}: share-pattern deviation "
                        f"{dist.max_relative_deviation:.4f} over tolerance {dist_tolerance}"
                    )
                result.details["distribution_deviation"] = dist.max_relative_deviation
            else:
                result.details["distribution_deviation"] = None  # too wide for a full check
        else:
            per_element = [
                recovered_measures(priv, [(j,)])[0].support for j in range(1, priv.t + 1)
            ]
            dist = check_share_distribution(priv, per_element, dist_tolerance)
            if not dist.ok:
                result.reasons.append(
                    f"{DISTRIBUTION_ANOMALY}: split-share counts deviate "
                    f"{dist.max_relative_deviation:.4f}"
                )
    except VamsError as exc:
        result.reasons.append(f"{DISTRIBUTION_ANOMALY}: distribution check failed: {exc}")

    result.ok = not result.reasons
    return result
