"""The broker side: decide on requests for a subscribed user, on the log.

Every decision is itself submitted as a logged request under the user's
identifier pair, so the user's ordinary check surfaces the broker's
activity with the same guarantees as any other entry.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from ..client import LogClient
from ..wire import canonical_json
from .agent import CounterStore, SubmitResult, request

CONSENT = "consent"
DENY = "deny"


@dataclass(frozen=True)
class BrokerPolicy:
    """Deterministic predicate over request metadata categories."""

    allowed_categories: frozenset[str]

    @classmethod
    def from_dict(cls, obj: dict) -> "BrokerPolicy":
        return cls(allowed_categories=frozenset(obj.get("allowed_categories", [])))

    @classmethod
    def from_file(cls, path: str) -> "BrokerPolicy":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f))

    def decide(self, metadata: dict) -> str:
        """Consent only to known, allowed categories; anything else is denied."""
        category = metadata.get("category")
        if isinstance(category, str) and category in self.allowed_categories:
            return CONSENT
        return DENY


@dataclass(frozen=True)
class BrokerDecision:
    decision: str
    category: str | None
    submit: SubmitResult


def broker_respond(
    client: LogClient,
    policy: BrokerPolicy,
    metadata: dict,
    id_a: bytes,
    id_dp: bytes,
    counters: CounterStore,
    salt: bytes,
    broker_sign_seed: bytes,
    broker_key_id: str,
    user_public: bytes,
    auditor_public: bytes,
) -> BrokerDecision:
    """Apply the policy and log the decision under the user's pair."""
    decision = policy.decide(metadata)
    body = canonical_json(
        {
            "type": "broker_decision",
            "decision": decision,
            "category": metadata.get("category"),
            "request_ref": metadata.get("ref"),
        }
    )
    n = counters.allocate(id_a, id_dp)
    submit = request(
        client,
        id_a,
        id_dp,
        n,
        body,
        salt,
        broker_sign_seed,
        broker_key_id,
        user_public,
        auditor_public,
    )
    return BrokerDecision(decision=decision, category=metadata.get("category"), submit=submit)
