"""vams command-line interface: server, party roles, and bound queries.

Exit codes: 0 success/accept, 2 reject or evidence found, 1 operational
error (unreachable server, bad arguments, missing files).
"""

from __future__ import annotations

import csv
import json
import os
import sys

import click

from . import __version__
from .bounds import max_safe_elements, safe_bounds_table
from .client import LogClient
from .errors import EvidenceSuspected, RequestNotLogged, SubmissionRejected, VamsError
from .keys import (
    ed25519_generate,
    key_fingerprint,
    load_keyfile,
    save_keyfile,
    save_registry,
    x25519_generate,
)
from .multiballot import Dataset, PrivDataset
from .roles import (
    AuditCursor,
    BrokerPolicy,
    CounterStore,
    PublishRefused,
    audit,
    broker_respond,
    check,
    detect,
    monitor,
    provide,
    publish,
    request,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_REJECT = 2


def _fail(message: str, code: int = EXIT_ERROR):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _client(server: str) -> LogClient:
    return LogClient(base_url=server)


def _load_keys(path: str) -> dict[str, bytes]:
    try:
        return load_keyfile(path)
    except (OSError, ValueError) as exc:
        _fail(f"cannot load keys file: {exc}")


def _need(keys: dict[str, bytes], label: str) -> bytes:
    if label not in keys:
        _fail(f"keys file lacks '{label}'")
    return keys[label]


def _salt(client: LogClient, override: str | None) -> bytes:
    if override:
        return bytes.fromhex(override)
    return client.kdf_salt()


def _server_pub(client: LogClient, keys: dict[str, bytes]) -> bytes:
    if "server-pub" in keys:
        return keys["server-pub"]
    return client.server_public_key()


@click.group()
@click.version_option(__version__)
def main():
    """Transparency log tooling for data-access requests."""


@main.command()
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--listen", default="127.0.0.1:8640", show_default=True)
@click.option("--batch-size", default=300, show_default=True)
@click.option("--batch-timeout-ms", default=1000, show_default=True)
def keygen(out_dir, listen, batch_size, batch_timeout_ms):
    """Generate a full key set, registry, and server config for a deployment."""
    os.makedirs(out_dir, exist_ok=True)
    server_seed, server_pub = ed25519_generate()
    agent_seed, agent_pub = ed25519_generate()
    broker_seed, broker_pub = ed25519_generate()
    auditor_seed, auditor_sign_pub = ed25519_generate()
    user_priv, user_pub = x25519_generate()
    auditor_priv, auditor_pub = x25519_generate()
    agent_id = key_fingerprint(agent_pub)
    broker_id = key_fingerprint(broker_pub)
    auditor_id = key_fingerprint(auditor_sign_pub)
    salt = os.urandom(16)

    save_keyfile(
        os.path.join(out_dir, "server.keys"),
        {"log-server-sign": server_seed},
    )
    save_keyfile(
        os.path.join(out_dir, "client.keys"),
        {
            "server-pub": server_pub,
            f"agent-sign:{agent_id}": agent_seed,
            f"broker-sign:{broker_id}": broker_seed,
            f"auditor-sign:{auditor_id}": auditor_seed,
            "user-box": user_priv,
            "user-box-pub": user_pub,
            "auditor-box": auditor_priv,
            "auditor-box-pub": auditor_pub,
        },
    )
    save_registry(
        os.path.join(out_dir, "registry.txt"),
        {
            agent_id: (agent_pub, "agent"),
            broker_id: (broker_pub, "broker"),
            auditor_id: (auditor_sign_pub, "auditor"),
        },
    )
    config = {
        "keys_file": "server.keys",
        "registry_file": "registry.txt",
        "kdf_salt": salt.hex(),
        "batch_size": batch_size,
        "batch_timeout_ms": batch_timeout_ms,
        "listen": listen,
        "data_dir": "data",
    }
    with open(os.path.join(out_dir, "server.json"), "w", encoding="utf-8") as f:
        json.dump(config, f, indent=2)
    click.echo(f"wrote server.json, server.keys, client.keys, registry.txt to {out_dir}")
    click.echo(f"agent key id: {agent_id}")
    click.echo(f"broker key id: {broker_id}")
    click.echo(f"auditor key id: {auditor_id}")


@main.group()
def server():
    """Log server operations."""


@server.command("run")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
def server_run(config_path):
    """Run the log server (blocking)."""
    from .http_api import run_server
    from .server import LogServer, ServerConfig

    config = ServerConfig.from_file(config_path)
    host, _, port = config.listen.rpartition(":")
    log_server = LogServer(config)
    click.echo(f"serving on {host}:{port} (public key {log_server.public_key.hex()})")
    run_server(log_server, host or "127.0.0.1", int(port))


@main.group()
def agent():
    """Agent role: submit access requests."""


@agent.command("request")
@click.option("--server", "server_url", required=True)
@click.option("--keys", "keys_path", required=True, type=click.Path(exists=True))
@click.option("--id-a", required=True, help="private agent identifier (utf-8)")
@click.option("--id-dp", required=True, help="private data-provider identifier (utf-8)")
@click.option("--body", required=True, help="request body JSON")
@click.option("--n", "n_override", type=int, default=None, help="explicit session counter")
@click.option("--state-dir", default=".vams", show_default=True)
@click.option("--salt", "salt_hex", default=None, help="override the deployment KDF salt (hex)")
def agent_request(server_url, keys_path, id_a, id_dp, body, n_override, state_dir, salt_hex):
    keys = _load_keys(keys_path)
    agent_labels = [label for label in keys if label.startswith("agent-sign:")]
    if not agent_labels:
        _fail("keys file lacks an 'agent-sign:<key_id>' entry")
    agent_key_id = agent_labels[0].split(":", 1)[1]
    client = _client(server_url)
    try:
        salt = _salt(client, salt_hex)
        os.makedirs(state_dir, exist_ok=True)
        counters = CounterStore(os.path.join(state_dir, "counters.json"))
        id_a_b, id_dp_b = id_a.encode(), id_dp.encode()
        n = counters.allocate(id_a_b, id_dp_b) if n_override is None else n_override
        result = request(
            client,
            id_a_b,
            id_dp_b,
            n,
            body.encode(),
            salt,
            keys[agent_labels[0]],
            agent_key_id,
            _need(keys, "user-box-pub"),
            _need(keys, "auditor-box-pub"),
        )
    except SubmissionRejected as exc:
        _fail(f"{exc.code}: {exc.detail}", EXIT_REJECT)
    except (VamsError, OSError) as exc:
        _fail(str(exc))
    click.echo(json.dumps({"index": result.index, "id_c": result.id_c, "n": result.n}))


@main.group()
def provider():
    """Data-provider role: answer logged requests."""


@provider.command("fetch")
@click.option("--server", "server_url", required=True)
@click.option("--keys", "keys_path", required=True, type=click.Path(exists=True))
@click.option("--id-a", required=True)
@click.option("--id-dp", required=True)
@click.option("--n", required=True, type=int)
@click.option("--salt", "salt_hex", default=None)
def provider_fetch(server_url, keys_path, id_a, id_dp, n, salt_hex):
    keys = _load_keys(keys_path)
    client = _client(server_url)
    try:
        result = provide(
            client,
            id_a.encode(),
            id_dp.encode(),
            n,
            _salt(client, salt_hex),
            _server_pub(client, keys),
        )
    except RequestNotLogged as exc:
        _fail(str(exc), EXIT_REJECT)
    except EvidenceSuspected as exc:
        _fail(f"EVIDENCE_SUSPECTED: {exc.reason}", EXIT_REJECT)
    except (VamsError, OSError) as exc:
        _fail(str(exc))
    click.echo(json.dumps(result.envelope.to_dict()))


@main.group()
def user():
    """User role: check one's own requests; monitor published audits."""


@user.command("check")
@click.option("--server", "server_url", required=True)
@click.option("--keys", "keys_path", required=True, type=click.Path(exists=True))
@click.option("--id-a", required=True)
@click.option("--id-dp", required=True)
@click.option("--lookahead", default=3, show_default=True)
@click.option("--parallelism", default=4, show_default=True)
@click.option("--salt", "salt_hex", default=None)
def user_check(server_url, keys_path, id_a, id_dp, lookahead, parallelism, salt_hex):
    keys = _load_keys(keys_path)
    client = _client(server_url)
    try:
        result = check(
            client,
            id_a.encode(),
            id_dp.encode(),
            _need(keys, "user-box"),
            _salt(client, salt_hex),
            _server_pub(client, keys),
            lookahead=lookahead,
            parallelism=parallelism,
        )
    except EvidenceSuspected as exc:
        _fail(f"EVIDENCE_SUSPECTED: {exc.reason}", EXIT_REJECT)
    except (VamsError, OSError) as exc:
        _fail(str(exc))
    out = {
        "map_revision": result.map_head.revision,
        "entries": [
            {
                "n": e.n,
                "id_c": e.id_c,
                "decrypted": e.decrypted,
                "body": e.body.decode("utf-8", "replace") if e.body else None,
            }
            for e in result.entries
        ],
    }
    click.echo(json.dumps(out, indent=2))


@user.command("monitor")
@click.option("--server", "server_url", default=None, help="verify manifest inclusion when given")
@click.option("--keys", "keys_path", default=None, type=click.Path(exists=True))
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--dpriv", "dpriv_path", required=True, type=click.Path(exists=True))
@click.option("--record", "record_path", default=None, type=click.Path(exists=True))
@click.option("--id-c", "id_c", default=None, help="own common identifier (hex)")
@click.option("--log-index", type=int, default=None, help="manifest's log entry index")
def user_monitor(server_url, keys_path, manifest_path, dpriv_path, record_path, id_c, log_index):
    with open(manifest_path, "r", encoding="utf-8") as f:
        manifest_obj = json.load(f)
    manifest = manifest_obj.get("manifest", manifest_obj)
    if log_index is None:
        log_index = manifest_obj.get("log_index")
    scheme = manifest.get("scheme", {})
    try:
        priv = PrivDataset.load_csv(
            dpriv_path,
            k=scheme.get("k") if scheme.get("kind") == "multiballot" else None,
            r=int(scheme.get("r", 0)),
        )
    except VamsError as exc:
        _fail(str(exc))
    with open(dpriv_path, "rb") as f:
        dpriv_bytes = f.read()
    own_record = None
    if record_path:
        if not id_c:
            _fail("--record needs --id-c")
        ds = Dataset.load_csv(record_path)
        match = [rec for rec in ds.to_records() if rec.id_c == id_c]
        if not match:
            _fail(f"record file has no row with id_c {id_c}")
        own_record = match[0]
    client = _client(server_url) if server_url else None
    keys = _load_keys(keys_path) if keys_path else {}
    server_pub = None
    if client is not None:
        server_pub = keys.get("server-pub") or client.server_public_key()
    result = monitor(
        manifest,
        priv,
        dpriv_bytes=dpriv_bytes,
        client=client,
        server_public_key=server_pub,
        log_index=log_index,
        own_id_c=id_c,
        own_record=own_record,
    )
    click.echo(json.dumps({"ok": result.ok, "reasons": result.reasons}, indent=2))
    sys.exit(EXIT_OK if result.ok else EXIT_REJECT)


@main.command("detect")
@click.option("--heads", required=True, help="comma-separated URLs or head files")
@click.option("--keys", "keys_path", default=None, type=click.Path(exists=True))
def detect_cmd(heads, keys_path):
    """Compare head views from several sources; exit 2 on evidence."""
    keys = _load_keys(keys_path) if keys_path else {}
    result = detect(heads.split(","), server_public_key=keys.get("server-pub"))
    for warning in result.warnings:
        click.echo(f"warning: {warning}", err=True)
    if result.evidence is None:
        click.echo("NONE")
        sys.exit(EXIT_OK)
    click.echo(result.evidence.describe())
    sys.exit(EXIT_REJECT)


@main.command("heads")
@click.option("--server", "server_url", required=True)
@click.option("--out", "out_path", default=None, type=click.Path())
def heads_cmd(server_url, out_path):
    """Save a server's current signed heads (for later detect runs)."""
    from .roles.detect import collect_heads

    try:
        head_set = collect_heads(server_url)
    except Exception as exc:
        _fail(f"cannot fetch heads: {exc}")
    payload = json.dumps(head_set.to_dict(), indent=2)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as f:
            f.write(payload)
        click.echo(f"wrote {out_path}")
    else:
        click.echo(payload)


@main.group()
def auditor():
    """Auditor role: audit the log; publish verifiable statistics."""


@auditor.command("audit")
@click.option("--server", "server_url", required=True)
@click.option("--keys", "keys_path", required=True, type=click.Path(exists=True))
@click.option("--state-dir", default=".vams", show_default=True)
@click.option("--from-size", type=int, default=None, help="override the stored audit cursor")
def auditor_audit(server_url, keys_path, state_dir, from_size):
    keys = _load_keys(keys_path)
    client = _client(server_url)
    os.makedirs(state_dir, exist_ok=True)
    cursor = AuditCursor(os.path.join(state_dir, "audit-cursor.json"))
    if from_size is not None:
        cursor.size, cursor.root = from_size, None
    try:
        report = audit(client, _need(keys, "auditor-box"), _server_pub(client, keys), cursor=cursor)
    except EvidenceSuspected as exc:
        _fail(f"EVIDENCE_SUSPECTED: {exc.reason}", EXIT_REJECT)
    except (VamsError, OSError) as exc:
        _fail(str(exc))
    click.echo(json.dumps(report.to_dict(), indent=2))


@auditor.command("publish")
@click.option("--server", "server_url", required=True)
@click.option("--keys", "keys_path", required=True, type=click.Path(exists=True))
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True))
@click.option("--k", type=int, default=1, show_default=True, help="-1 for univariate splitting")
@click.option("--threshold", default=1e-4, show_default=True, help="reconstruction bound")
@click.option("--known-shares", type=int, default=None, help="adversary shares (default 2k)")
@click.option("--min-support", type=float, default=None)
@click.option("--itemsets", "itemsets_json", default=None, help='JSON like "[[1,2],[3]]"')
@click.option("--tolerance", default=0.1, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--dpriv-out", required=True, type=click.Path())
@click.option("--manifest-out", required=True, type=click.Path())
def auditor_publish(
    server_url,
    keys_path,
    dataset_path,
    k,
    threshold,
    known_shares,
    min_support,
    itemsets_json,
    tolerance,
    seed,
    dpriv_out,
    manifest_out,
):
    keys = _load_keys(keys_path)
    labels = [label for label in keys if label.startswith("auditor-sign:")]
    if not labels:
        _fail("keys file lacks an 'auditor-sign:<key_id>' entry")
    auditor_key_id = labels[0].split(":", 1)[1]
    try:
        dataset = Dataset.load_csv(dataset_path)
        itemsets = None
        if itemsets_json:
            itemsets = [tuple(int(e) for e in s) for s in json.loads(itemsets_json)]
        result = publish(
            _client(server_url),
            dataset,
            dpriv_out,
            keys[labels[0]],
            auditor_key_id,
            k=None if k < 0 else k,
            itemsets=itemsets,
            min_support=min_support,
            bound_threshold=threshold,
            known_shares=known_shares,
            tolerance=tolerance,
            seed=seed,
        )
    except PublishRefused as exc:
        _fail(f"refused: {exc} (max_safe_elements={exc.max_safe_elements})", EXIT_REJECT)
    except SubmissionRejected as exc:
        _fail(f"{exc.code}: {exc.detail}", EXIT_REJECT)
    except (VamsError, OSError, json.JSONDecodeError) as exc:
        _fail(str(exc))
    with open(manifest_out, "w", encoding="utf-8") as f:
        json.dump({"manifest": result.manifest, "log_index": result.log_index}, f, indent=2)
    click.echo(
        json.dumps(
            {
                "log_index": result.log_index,
                "shares": result.priv.n_shares,
                "dpriv": dpriv_out,
                "manifest": manifest_out,
            }
        )
    )


@main.group()
def broker():
    """Data-broker role: answer requests per user policy, on the log."""


@broker.command("run")
@click.option("--server", "server_url", required=True)
@click.option("--keys", "keys_path", required=True, type=click.Path(exists=True))
@click.option("--policy", "policy_path", required=True, type=click.Path(exists=True))
@click.option("--id-a", required=True, help="pair identifier held for the subscribed user")
@click.option("--id-dp", required=True)
@click.option("--input", "input_path", default="-", help="JSONL of request metadata")
@click.option("--state-dir", default=".vams", show_default=True)
@click.option("--salt", "salt_hex", default=None)
def broker_run(server_url, keys_path, policy_path, id_a, id_dp, input_path, state_dir, salt_hex):
    keys = _load_keys(keys_path)
    labels = [label for label in keys if label.startswith("broker-sign:")]
    if not labels:
        _fail("keys file lacks a 'broker-sign:<key_id>' entry")
    broker_key_id = labels[0].split(":", 1)[1]
    policy = BrokerPolicy.from_file(policy_path)
    client = _client(server_url)
    os.makedirs(state_dir, exist_ok=True)
    counters = CounterStore(os.path.join(state_dir, "broker-counters.json"))
    stream = sys.stdin if input_path == "-" else open(input_path, "r", encoding="utf-8")
    try:
        salt = _salt(client, salt_hex)
        for line in stream:
            line = line.strip()
            if not line:
                continue
            metadata = json.loads(line)
            decision = broker_respond(
                client,
                policy,
                metadata,
                id_a.encode(),
                id_dp.encode(),
                counters,
                salt,
                keys[labels[0]],
                broker_key_id,
                _need(keys, "user-box-pub"),
                _need(keys, "auditor-box-pub"),
            )
            click.echo(
                json.dumps(
                    {
                        "decision": decision.decision,
                        "category": decision.category,
                        "index": decision.submit.index,
                        "n": decision.submit.n,
                    }
                )
            )
    except (VamsError, OSError, json.JSONDecodeError) as exc:
        _fail(str(exc))
    finally:
        if stream is not sys.stdin:
            stream.close()


@main.command("bounds")
@click.option("--k", type=int, default=1, show_default=True)
@click.option("--users", type=int, default=100, show_default=True)
@click.option("--known", type=int, default=1, show_default=True)
@click.option("--threshold", type=float, default=1e-4, show_default=True)
@click.option("--table2", is_flag=True, help="emit the full safe-bounds grid as CSV")
def bounds_cmd(k, users, known, threshold, table2):
    """Safe element counts against reconstruction attacks."""
    if table2:
        writer = csv.writer(sys.stdout)
        writer.writerow(
            ["scheme", "k", "known_shares", "users", "max_safe_elements", "success_probability"]
        )
        for row in safe_bounds_table(threshold):
            writer.writerow(
                [
                    row["scheme"],
                    row["k"],
                    row["known_shares"],
                    row["users"],
                    row["max_safe_elements"],
                    "" if row["success_probability"] is None else f"{row['success_probability']:.3e}",
                ]
            )
        return
    try:
        e_max, success = max_safe_elements(k, users, known, threshold)
    except (ValueError, ArithmeticError) as exc:
        _fail(str(exc))
    click.echo(
        json.dumps(
            {
                "k": k,
                "users": users,
                "known_shares": known,
                "threshold": threshold,
                "max_safe_elements": e_max,
                "success_probability": success,
            }
        )
    )


if __name__ == "__main__":
    main()
