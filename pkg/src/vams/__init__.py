"""vams: verifiable transparency log for confidential-data access requests.

Agents append signed, dual-encrypted requests keyed by unlinkable common
identifiers to an append-only Merkle log; a sparse Merkle map derived
from the log serves efficient (non-)inclusion proofs; auditors publish
statistics whose accuracy anyone can re-verify from a privacy-preserving
share dataset.
"""

__version__ = "0.1.0"
