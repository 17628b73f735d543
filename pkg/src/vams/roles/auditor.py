"""The auditor side: incremental log audits and verifiable publications.

``audit`` verifies the log grew append-only since the last run, replays
it into a map and compares every published map head bit-exactly, then
tallies decryptability of the newly covered request entries.

``publish`` turns a record dataset into a share dataset plus a signed
manifest of statistics, refusing element counts that would exceed the
reconstruction-safety bound for the chosen scheme.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from ..bounds import max_safe_elements
from ..client import LogClient
from ..errors import EvidenceSuspected, SealError, VamsError
from ..heads import SignedMapRoot, replay_log_to_map
from ..identity import open_payload
from ..keys import ed25519_sign
from ..merkle_log import verify_consistency
from ..multiballot import (
    MULTIBALLOT,
    UNIVARIATE,
    Dataset,
    PrivDataset,
    build_priv_dataset,
    build_univariate_dataset,
)
from ..stats import confidence, mine_frequent_itemsets, support
from ..wire import ManifestEnvelope, RequestEnvelope, decode_entry

logger = logging.getLogger(__name__)

CATEGORY_VALID = "valid"
CATEGORY_INVALID = "invalid"
CATEGORY_UNDECRYPTABLE = "undecryptable"
CATEGORY_MANIFEST = "audit_manifest"


@dataclass
class AuditReport:
    covered_log_size: int
    audited_from: int
    valid_requests: int = 0
    invalid_requests: int = 0
    undecryptable_requests: int = 0
    manifests: int = 0
    categories: dict[str, int] = field(default_factory=dict)
    map_heads_checked: int = 0
    replay_root: str = ""

    @property
    def audited_entries(self) -> int:
        return self.covered_log_size - self.audited_from

    def tallies_consistent(self) -> bool:
        return (
            self.valid_requests
            + self.invalid_requests
            + self.undecryptable_requests
            + self.manifests
            == self.audited_entries
        )

    def to_dict(self) -> dict:
        return {
            "covered_log_size": self.covered_log_size,
            "audited_from": self.audited_from,
            "valid": self.valid_requests,
            "invalid": self.invalid_requests,
            "undecryptable": self.undecryptable_requests,
            "manifests": self.manifests,
            "categories": self.categories,
            "map_heads_checked": self.map_heads_checked,
            "replay_root": self.replay_root,
        }


class AuditCursor:
    """Persisted (size, root) of the last audited log head."""

    def __init__(self, path: str | None):
        self._path = path
        self.size = 0
        self.root: bytes | None = None
        if path and os.path.exists(path):
            with open(path, "r", encoding="utf-8") as f:
                obj = json.load(f)
            self.size = int(obj["size"])
            self.root = bytes.fromhex(obj["root"])

    def advance(self, size: int, root: bytes) -> None:
        self.size = size
        self.root = root
        if self._path:
            tmp = self._path + ".tmp"
            with open(tmp, "w", encoding="utf-8") as f:
                json.dump({"size": size, "root": root.hex()}, f)
            os.replace(tmp, self._path)


def audit(
    client: LogClient,
    auditor_box_private: bytes,
    server_public_key: bytes,
    cursor: AuditCursor | None = None,
) -> AuditReport:
    """Full replay check plus decryption tallies over the unaudited suffix.

    Raises EvidenceSuspected when the log fails the append-only check
    against the cursor or any published map head disagrees with replay.
    """
    head = client.log_root()
    if not head.verify(server_public_key):
        raise EvidenceSuspected("log head signature does not verify", material=head)
    from_size = cursor.size if cursor else 0
    if cursor and cursor.root is not None and cursor.size > 0:
        proof = client.log_consistency(cursor.size, head.tree_size)
        if not verify_consistency(cursor.size, head.tree_size, cursor.root, head.root, proof):
            raise EvidenceSuspected(
                f"log is not consistent with audited head at size {cursor.size}",
                material=(cursor.root, head, proof),
            )

    entries = client.log_entries(0, head.tree_size)

    headlog = client.headlog_root()
    if not headlog.verify(server_public_key):
        raise EvidenceSuspected("head-log root signature does not verify", material=headlog)
    published: list[SignedMapRoot] = []
    for index in range(headlog.tree_size):
        payload = client.headlog_entry(index)
        mh = SignedMapRoot.from_log_payload(payload)
        if not mh.verify(server_public_key):
            raise EvidenceSuspected(
                f"published map head {mh.revision} signature does not verify", material=mh
            )
        published.append(mh)

    cuts = sorted({mh.log_size_covered for mh in published if mh.log_size_covered <= len(entries)})
    replay = replay_log_to_map(entries, cut_points=cuts)
    for mh in published:
        if mh.log_size_covered > len(entries):
            continue  # newer than the head we audited against
        if replay.prefix_roots[mh.log_size_covered] != mh.root:
            raise EvidenceSuspected(
                f"map head revision {mh.revision} does not match replay of "
                f"{mh.log_size_covered} entries",
                material=mh,
            )

    report = AuditReport(
        covered_log_size=head.tree_size,
        audited_from=from_size,
        map_heads_checked=len([mh for mh in published if mh.log_size_covered <= len(entries)]),
        replay_root=replay.root.hex(),
    )
    for payload in entries[from_size:]:
        _tally_entry(payload, auditor_box_private, report)
    if cursor:
        cursor.advance(head.tree_size, head.root)
    return report


def _tally_entry(payload: bytes, auditor_box_private: bytes, report: AuditReport) -> None:
    def bump(category: str) -> None:
        report.categories[category] = report.categories.get(category, 0) + 1

    try:
        obj = decode_entry(payload)
        kind = obj.get("type")
        if kind == "audit_manifest":
            ManifestEnvelope.from_dict(obj)
            report.manifests += 1
            bump(CATEGORY_MANIFEST)
            return
        envelope = RequestEnvelope.from_dict(obj)
    except VamsError:
        report.invalid_requests += 1
        bump(CATEGORY_INVALID)
        return
    try:
        body = open_payload(envelope.sealed.auditor_ct, auditor_box_private)
    except SealError:
        report.undecryptable_requests += 1
        bump(CATEGORY_UNDECRYPTABLE)
        return
    report.valid_requests += 1
    try:
        category = json.loads(body.decode("utf-8")).get("category", "uncategorized")
    except (UnicodeDecodeError, json.JSONDecodeError):
        category = "unparseable-body"
    bump(f"request:{category}")


class PublishRefused(VamsError):
    def __init__(self, requested: int, bound: int, detail: str):
        self.requested = requested
        self.max_safe_elements = bound
        super().__init__(detail)


@dataclass
class PublishResult:
    manifest: dict
    wrapper: ManifestEnvelope
    log_index: int
    priv: PrivDataset
    dpriv_path: str


def publish(
    client: LogClient,
    dataset: Dataset,
    dpriv_path: str,
    auditor_sign_seed: bytes,
    auditor_key_id: str,
    k: int | None = 1,
    itemsets: list[tuple[int, ...]] | None = None,
    min_support: float | None = None,
    bound_threshold: float = 1e-4,
    known_shares: int | None = None,
    tolerance: float = 0.1,
    seed: int | None = None,
) -> PublishResult:
    """Build the share dataset, compute statistics, and log the manifest.

    k=None publishes split single-element shares (univariate statistics
    only). Ballot publications are refused when the record width exceeds
    the safe element bound for (k, |dataset|) at ``bound_threshold``,
    assuming the adversary may hold ``known_shares`` (default 2k, the
    worst case).
    """
    if seed is None:
        seed = int.from_bytes(os.urandom(8), "big")
    rng = np.random.default_rng(seed)
    seed_commitment = hashlib.sha256(str(seed).encode()).hexdigest()

    if k is not None:
        if k >= 1:
            a = 2 * k if known_shares is None else known_shares
            bound, _ = max_safe_elements(k, dataset.r, a, bound_threshold)
            if dataset.t > bound:
                raise PublishRefused(
                    dataset.t,
                    bound,
                    f"records carry {dataset.t} elements but max_safe_elements"
                    f"(k={k}, r={dataset.r}, a={a}, threshold={bound_threshold}) = {bound}; "
                    "project the dataset onto fewer elements",
                )
        priv = build_priv_dataset(dataset, k, rng)
    else:
        priv = build_univariate_dataset(dataset, rng)

    priv.save_csv(dpriv_path)
    with open(dpriv_path, "rb") as f:
        dpriv_digest = hashlib.sha256(f.read()).hexdigest()

    if itemsets is None:
        if min_support is None:
            raise VamsError("publish needs explicit itemsets or a min_support to mine with")
        mined = mine_frequent_itemsets(dataset.values, min_support)
        itemsets = sorted(mined.keys())
    if priv.kind == UNIVARIATE and any(len(s) > 1 for s in itemsets):
        raise VamsError("split shares cannot back multi-element statistics")

    reported = []
    for elements in itemsets:
        elements = tuple(sorted(elements))
        entry: dict = {"elements": list(elements), "support": support(dataset.values, elements)}
        if len(elements) >= 2:
            entry["confidence"] = confidence(dataset.values, elements[:-1], elements[-1:])
        reported.append(entry)

    manifest = {
        "scheme": priv.scheme_manifest(seed_commitment),
        "itemsets": reported,
        "tolerance": tolerance,
        "distribution_tolerance": tolerance,
        "dpriv_digest": dpriv_digest,
        "dpriv_location": os.path.abspath(dpriv_path),
    }
    wrapper = ManifestEnvelope(manifest=manifest, auditor_key_id=auditor_key_id, signature=b"")
    wrapper = ManifestEnvelope(
        manifest=manifest,
        auditor_key_id=auditor_key_id,
        signature=ed25519_sign(auditor_sign_seed, wrapper.signed_bytes()),
    )
    index, _head = client.submit_manifest(wrapper)
    return PublishResult(
        manifest=manifest,
        wrapper=wrapper,
        log_index=index,
        priv=priv,
        dpriv_path=dpriv_path,
    )
