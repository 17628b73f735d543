"""Throughput microbenchmark of the log server.

Two phases per batch size: all requests are submitted first (batcher
paused) to measure raw admission throughput, then the batcher is
released and the map phase is timed until every entry is covered by a
published revision. Per-revision overhead (signing, head-log append)
amortizes as the batch grows, so map throughput rises with batch size
and plateaus once per-entry map updates dominate; that saturating shape
is the result, the absolute numbers are hardware-specific.

Visibility latency is the wait from a request's submission until the
first published revision covering it, measured against the same
pipeline.
"""

from __future__ import annotations

import csv
import os
import threading
import time
from dataclasses import dataclass

import numpy as np

from ..client import LogClient
from ..identity import derive_common_id, seal_payload
from ..keys import ed25519_generate, ed25519_sign, key_fingerprint, x25519_generate
from ..server import LogServer, ServerConfig
from ..wire import RequestEnvelope

DEFAULT_BATCH_SIZES = (1, 4, 16, 64, 300)


@dataclass(frozen=True)
class BenchRow:
    batch_size: int
    requests: int
    submit_seconds: float
    map_seconds: float
    submit_ops_per_sec: float
    map_ops_per_sec: float
    e2e_ops_per_sec: float
    mean_visibility_ms: float


def _make_envelopes(count: int, salt: bytes, agent_seed: bytes, agent_key_id: str) -> list[RequestEnvelope]:
    user_priv, user_pub = x25519_generate()
    auditor_priv, auditor_pub = x25519_generate()
    body = b'{"category":"bench"}'
    envelopes = []
    for n in range(count):
        id_c = derive_common_id(b"bench-agent", b"bench-provider", n, salt)
        sealed = seal_payload(body, user_pub, auditor_pub)
        envelope = RequestEnvelope(
            id_c=id_c,
            sealed=sealed,
            agent_key_id=agent_key_id,
            timestamp_ms=int(time.time() * 1000),
            signature=b"",
        )
        envelopes.append(
            RequestEnvelope(
                id_c=envelope.id_c,
                sealed=envelope.sealed,
                agent_key_id=agent_key_id,
                timestamp_ms=envelope.timestamp_ms,
                signature=ed25519_sign(agent_seed, envelope.signed_bytes()),
            )
        )
    return envelopes


def bench_throughput(
    batch_sizes: tuple[int, ...] = DEFAULT_BATCH_SIZES,
    requests: int = 300,
    submit_threads: int = 4,
    client_factory=None,
) -> list[BenchRow]:
    """Measure admission and map throughput per batch size.

    Drives an in-process server directly by default; pass a
    client_factory(server) -> LogClient to go over HTTP instead.
    """
    if requests < 1:
        return []  # nothing to measure, empty report
    salt = bytes(16)
    agent_seed, agent_pub = ed25519_generate()
    agent_key_id = key_fingerprint(agent_pub)
    envelopes = _make_envelopes(requests, salt, agent_seed, agent_key_id)

    rows = []
    for batch_size in batch_sizes:
        server_seed, _ = ed25519_generate()
        config = ServerConfig(
            signing_key_seed=server_seed,
            kdf_salt=salt,
            registry={agent_key_id: (agent_pub, "agent")},
            batch_size=batch_size,
            batch_timeout_ms=3_600_000,  # never fire on time during the bench
        )
        server = LogServer(config)
        client = client_factory(server) if client_factory else None

        submit_times = [0.0] * requests
        cursor = iter(range(requests))
        lock = threading.Lock()

        def submit_worker():
            while True:
                with lock:
                    i = next(cursor, None)
                if i is None:
                    return
                submit_times[i] = time.monotonic()
                if client is not None:
                    client.submit_request(envelopes[i])
                else:
                    server.submit_request(envelopes[i])

        submit_start = time.monotonic()
        threads = [threading.Thread(target=submit_worker) for _ in range(max(1, submit_threads))]
        for thread in threads:
            thread.start()
        for thread in threads:
            thread.join()
        submit_end = time.monotonic()

        # map phase: release the batcher and watch coverage grow
        coverage: list[tuple[float, int]] = [(submit_end, 0)]
        server.start_batcher()
        while True:
            head = client.map_root() if client is not None else server.map_head()
            now = time.monotonic()
            if head.log_size_covered > coverage[-1][1]:
                coverage.append((now, head.log_size_covered))
            if head.log_size_covered >= requests:
                break
            if server.pending_entries() and server.pending_entries() < batch_size:
                server.flush()  # tail below the size trigger
            time.sleep(0.0005)
        map_end = time.monotonic()
        server.close()

        visibility = []
        for i, submitted in enumerate(submit_times):
            covered_at = next(ts for ts, size in coverage if size > i)
            visibility.append((covered_at - submitted) * 1000.0)
        submit_seconds = max(submit_end - submit_start, 1e-9)
        map_seconds = max(map_end - submit_end, 1e-9)
        rows.append(
            BenchRow(
                batch_size=batch_size,
                requests=requests,
                submit_seconds=submit_seconds,
                map_seconds=map_seconds,
                submit_ops_per_sec=requests / submit_seconds,
                map_ops_per_sec=requests / map_seconds,
                e2e_ops_per_sec=requests / (submit_seconds + map_seconds),
                mean_visibility_ms=float(np.mean(visibility)),
            )
        )
    return rows


def write_bench_csv(rows: list[BenchRow], out_dir: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "bench.csv")
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(
            [
                "batch_size",
                "requests",
                "submit_seconds",
                "map_seconds",
                "submit_ops_per_sec",
                "map_ops_per_sec",
                "e2e_ops_per_sec",
                "mean_visibility_ms",
            ]
        )
        for row in rows:
            writer.writerow(
                [
                    row.batch_size,
                    row.requests,
                    f"{row.submit_seconds:.4f}",
                    f"{row.map_seconds:.4f}",
                    f"{row.submit_ops_per_sec:.2f}",
                    f"{row.map_ops_per_sec:.2f}",
                    f"{row.e2e_ops_per_sec:.2f}",
                    f"{row.mean_visibility_ms:.2f}",
                ]
            )
    return path
