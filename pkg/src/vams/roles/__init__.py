"""Client-side party functions: request, provide, check, detect, audit,
publish, monitor, and broker responses, all spoken against a log server."""

from .agent import CounterStore, SubmitResult, request
from .auditor import AuditCursor, AuditReport, PublishRefused, PublishResult, audit, publish
from .broker import BrokerDecision, BrokerPolicy, broker_respond
from .detect import DetectResult, collect_heads, detect
from .provider import ProvideResult, provide
from .user import CheckEntry, CheckResult, MonitorResult, check, monitor

__all__ = [
    "AuditCursor",
    "AuditReport",
    "BrokerDecision",
    "BrokerPolicy",
    "CheckEntry",
    "CheckResult",
    "CounterStore",
    "DetectResult",
    "MonitorResult",
    "ProvideResult",
    "PublishRefused",
    "PublishResult",
    "SubmitResult",
    "audit",
    "broker_respond",
    "check",
    "collect_heads",
    "detect",
    "monitor",
    "provide",
    "publish",
    "request",
]
