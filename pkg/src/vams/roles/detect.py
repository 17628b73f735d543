"""Cross-source equivocation detection over all three head types.

Heads can come from live servers (URLs) or from previously saved head
files, standing in for a gossip exchange. Live sources also serve as
consistency oracles between log heads of different sizes.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

from ..client import LogClient
from ..heads import (
    HEAD_LOG_VERSION,
    REQUEST_LOG_VERSION,
    EquivocationEvidence,
    SignedLogRoot,
    SignedMapRoot,
    detect_equivocation,
)
from ..wire import log_head_from_dict, log_head_to_dict, map_head_from_dict, map_head_to_dict

logger = logging.getLogger(__name__)

INSUFFICIENT_SOURCES = "INSUFFICIENT_SOURCES"


@dataclass
class HeadSet:
    source: str
    log_head: SignedLogRoot
    map_head: SignedMapRoot
    headlog_head: SignedLogRoot
    client: LogClient | None = None  # live sources can answer consistency queries

    def to_dict(self) -> dict:
        return {
            "log_root": log_head_to_dict(self.log_head),
            "map_root": map_head_to_dict(self.map_head),
            "headlog_root": log_head_to_dict(self.headlog_head),
        }


@dataclass
class DetectResult:
    evidence: EquivocationEvidence | None
    warnings: list[str] = field(default_factory=list)
    sources_used: int = 0

    @property
    def ok(self) -> bool:
        return self.evidence is None


def collect_heads(source: str) -> HeadSet:
    """Heads from a URL (live query) or a JSON head file."""
    if source.startswith("http://") or source.startswith("https://"):
        client = LogClient(base_url=source)
        return HeadSet(
            source=source,
            log_head=client.log_root(),
            map_head=client.map_root(),
            headlog_head=client.headlog_root(),
            client=client,
        )
    with open(source, "r", encoding="utf-8") as f:
        obj = json.load(f)
    return HeadSet(
        source=source,
        log_head=log_head_from_dict(obj["log_root"]),
        map_head=map_head_from_dict(obj["map_root"]),
        headlog_head=log_head_from_dict(obj["headlog_root"]),
    )


def detect(
    sources: list[str | HeadSet],
    server_public_key: bytes | None = None,
) -> DetectResult:
    """Compare head views across sources; return evidence or NONE.

    Unreachable sources produce a warning and are skipped. With fewer
    than two usable sources there is nothing to compare and the result
    carries an INSUFFICIENT_SOURCES warning.
    """
    head_sets: list[HeadSet] = []
    warnings: list[str] = []
    for source in sources:
        if isinstance(source, HeadSet):
            head_sets.append(source)
            continue
        try:
            head_sets.append(collect_heads(source))
        except Exception as exc:  # unreachable host, bad file: warn and move on
            warnings.append(f"source {source} unusable: {exc}")
            logger.warning("skipping head source %s: %s", source, exc)
    if len(head_sets) < 2:
        warnings.append(f"{INSUFFICIENT_SOURCES}: {len(head_sets)} usable source(s)")
        return DetectResult(evidence=None, warnings=warnings, sources_used=len(head_sets))

    live = [hs.client for hs in head_sets if hs.client is not None]

    def oracle(older: SignedLogRoot, newer: SignedLogRoot):
        for client in live:
            try:
                if older.version == REQUEST_LOG_VERSION:
                    return client.log_consistency(older.tree_size, newer.tree_size)
                if older.version == HEAD_LOG_VERSION:
                    return client.headlog_consistency(older.tree_size, newer.tree_size)
            except Exception as exc:
                logger.warning("consistency oracle query failed: %s", exc)
        return None

    heads = [h for hs in head_sets for h in (hs.log_head, hs.headlog_head, hs.map_head)]
    evidence = detect_equivocation(
        heads,
        consistency_oracle=oracle if live else None,
        public_key=server_public_key,
    )
    return DetectResult(evidence=evidence, warnings=warnings, sources_used=len(head_sets))
