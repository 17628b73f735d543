"""Share generation for publishable datasets: splitting and (2k+1)-share ballots.

A record of binary elements becomes either e single-element shares
(univariate splitting: each share carries one element's true value) or a
ballot of 2k+1 full-width shares where, per element, exactly k+1 shares
carry the record's value and k carry the complement. Which shares carry
the true value is drawn independently per element, uniformly over all
(k+1)-subsets. The published dataset is the shuffled union of all
ballots.

Share identifiers are Hash(id_c, i) with the 1-based share index, so the
owning user can locate and check their own shares without revealing the
link to anyone else.

Generation is vectorized over records; a dataset of a million records is
a routine workload.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .errors import VamsError
from .identity import derive_share_id

MULTIBALLOT = "multiballot"
UNIVARIATE = "univariate"

ACCEPT = "ACCEPT"
SHARES_MISSING = "SHARES_MISSING"
SHARES_TAMPERED = "SHARES_TAMPERED"


@dataclass(frozen=True)
class Record:
    """One row of the original dataset: a common identifier plus binary elements."""

    id_c: str  # 32 hex chars
    values: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.values) < 1:
            raise ValueError("records need at least one element")
        if any(v not in (0, 1) for v in self.values):
            raise ValueError("record elements must be binary")


@dataclass(frozen=True)
class Share:
    id_share: str  # 64 hex chars
    values: tuple[int, ...] | None = None  # multivariate
    element_type: int | None = None  # univariate: 1-based element index
    value: int | None = None  # univariate


@dataclass
class Dataset:
    """Binary record matrix with optional per-record common identifiers."""

    values: np.ndarray  # (r, t) uint8
    ids: list[str] | None = None

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.uint8)
        if self.values.ndim != 2 or self.values.shape[1] < 1:
            raise ValueError("dataset must be a non-empty 2-D binary matrix")
        if not np.all((self.values == 0) | (self.values == 1)):
            raise ValueError("dataset values must be binary")
        if self.ids is not None and len(self.ids) != len(self.values):
            raise ValueError("one id_c per record required")

    @property
    def r(self) -> int:
        return len(self.values)

    @property
    def t(self) -> int:
        return int(self.values.shape[1])

    @classmethod
    def from_records(cls, records: Sequence[Record]) -> "Dataset":
        if not records:
            raise VamsError("empty dataset")
        t = len(records[0].values)
        if any(len(rec.values) != t for rec in records):
            raise VamsError("all records must have the same element count")
        return cls(
            values=np.array([rec.values for rec in records], dtype=np.uint8),
            ids=[rec.id_c for rec in records],
        )

    def to_records(self) -> list[Record]:
        if self.ids is None:
            raise VamsError("dataset has no record identifiers")
        return [
            Record(id_c=i, values=tuple(int(v) for v in row))
            for i, row in zip(self.ids, self.values)
        ]

    def save_csv(self, path: str) -> None:
        if self.ids is None:
            raise VamsError("dataset has no record identifiers; cannot serialize")
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(["id_c"] + [f"e{j}" for j in range(1, self.t + 1)])
            for id_c, row in zip(self.ids, self.values):
                writer.writerow([id_c] + [int(v) for v in row])

    @classmethod
    def load_csv(cls, path: str) -> "Dataset":
        with open(path, "r", newline="", encoding="utf-8") as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if not header or header[0] != "id_c":
                raise VamsError("dataset csv must start with an 'id_c' column")
            ids, rows = [], []
            for row in reader:
                if not row:
                    continue
                ids.append(row[0])
                rows.append([int(v) for v in row[1:]])
        if not rows:
            raise VamsError("empty dataset")
        return cls(values=np.array(rows, dtype=np.uint8), ids=ids)


@dataclass
class PrivDataset:
    """The published share dataset, either ballot-based or split."""

    kind: str  # MULTIBALLOT or UNIVARIATE
    t: int
    r: int
    k: int | None = None
    share_ids: list[str] | None = None
    share_values: np.ndarray | None = None  # multiballot: (n, t) uint8
    element_types: np.ndarray | None = None  # univariate: (n,) int, 1-based
    element_values: np.ndarray | None = None  # univariate: (n,) uint8

    @property
    def n_shares(self) -> int:
        if self.kind == MULTIBALLOT:
            return len(self.share_values)
        return len(self.element_values)

    @property
    def shares_per_record(self) -> int:
        return 2 * self.k + 1 if self.kind == MULTIBALLOT else self.t

    def scheme_manifest(self, seed_commitment: str | None = None) -> dict:
        manifest = {"kind": self.kind, "k": self.k, "t": self.t, "r": self.r}
        if seed_commitment is not None:
            manifest["seed_commitment"] = seed_commitment
        return manifest

    def save_csv(self, path: str) -> None:
        if self.share_ids is None:
            raise VamsError("share dataset generated without identifiers; cannot serialize")
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            if self.kind == MULTIBALLOT:
                writer.writerow(["id_share"] + [f"v{j}" for j in range(1, self.t + 1)])
                for sid, row in zip(self.share_ids, self.share_values):
                    writer.writerow([sid] + [int(v) for v in row])
            else:
                writer.writerow(["id_share", "element_type", "value"])
                for sid, et, v in zip(self.share_ids, self.element_types, self.element_values):
                    writer.writerow([sid, int(et), int(v)])

    @classmethod
    def load_csv(cls, path: str, k: int | None, r: int) -> "PrivDataset":
        """Read a share CSV; k=None means a univariate (split) dataset."""
        with open(path, "r", newline="", encoding="utf-8") as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if not header or header[0] != "id_share":
                raise VamsError("share csv must start with an 'id_share' column")
            univariate = header[1:3] == ["element_type", "value"]
            ids, rows = [], []
            for row in reader:
                if not row:
                    continue
                ids.append(row[0])
                rows.append([int(v) for v in row[1:]])
        if not rows:
            raise VamsError("empty share dataset")
        arr = np.array(rows, dtype=np.int64)
        if univariate:
            if k is not None:
                raise VamsError("univariate share csv cannot carry a ballot parameter k")
            t = int(arr[:, 0].max())
            return cls(
                kind=UNIVARIATE,
                t=t,
                r=r,
                share_ids=ids,
                element_types=arr[:, 0],
                element_values=arr[:, 1].astype(np.uint8),
            )
        if k is None:
            raise VamsError("ballot share csv needs the scheme parameter k")
        return cls(
            kind=MULTIBALLOT,
            t=int(arr.shape[1]),
            r=r,
            k=k,
            share_ids=ids,
            share_values=arr.astype(np.uint8),
        )

    def index_by_share_id(self) -> dict[str, int]:
        if self.share_ids is None:
            raise VamsError("share dataset has no identifiers")
        return {sid: i for i, sid in enumerate(self.share_ids)}


def split_univariate(record: Record) -> list[Share]:
    """One single-element share per element, each tagged with its type."""
    id_c = bytes.fromhex(record.id_c)
    return [
        Share(
            id_share=derive_share_id(id_c, i).hex(),
            element_type=i,
            value=record.values[i - 1],
        )
        for i in range(1, len(record.values) + 1)
    ]


def _subset_masks(k: int) -> np.ndarray:
    """All (k+1)-subsets of 2k+1 positions as a (C, 2k+1) boolean table."""
    n = 2 * k + 1
    combos = list(combinations(range(n), k + 1))
    masks = np.zeros((len(combos), n), dtype=bool)
    for row, combo in enumerate(combos):
        masks[row, list(combo)] = True
    return masks


def _ballot_matrix(values: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Shares for each record: (r, 2k+1, t), column invariant by construction."""
    r, t = values.shape
    masks = _subset_masks(k)
    choice = rng.integers(0, len(masks), size=(r, t))
    carry_true = masks[choice]  # (r, t, 2k+1) bools
    carry_true = np.transpose(carry_true, (0, 2, 1))  # (r, 2k+1, t)
    expanded = np.broadcast_to(values[:, None, :], carry_true.shape)
    return np.where(carry_true, expanded, 1 - expanded).astype(np.uint8)


def generate_ballot(record: Record, k: int, rng: np.random.Generator) -> list[Share]:
    """The 2k+1 shares of one record, each with its derived identifier."""
    if k < 0:
        raise ValueError("k must be >= 0")
    values = np.array([record.values], dtype=np.uint8)
    shares = _ballot_matrix(values, k, rng)[0]
    id_c = bytes.fromhex(record.id_c)
    return [
        Share(id_share=derive_share_id(id_c, i + 1).hex(), values=tuple(int(v) for v in row))
        for i, row in enumerate(shares)
    ]


def is_valid_ballot(
    shares: Sequence[Share] | np.ndarray, k: int
) -> tuple[bool, tuple[int, ...] | None]:
    """Check the per-element count rule and reconstruct by majority.

    Per element the majority value must appear exactly k+1 times. Returns
    (valid, reconstruction); the reconstruction is the per-element
    majority and is only meaningful when valid.
    """
    if isinstance(shares, np.ndarray):
        matrix = np.asarray(shares, dtype=np.int64)
    else:
        if any(s.values is None for s in shares):
            raise VamsError("ballot validation needs multivariate shares")
        matrix = np.array([s.values for s in shares], dtype=np.int64)
    if matrix.ndim != 2 or len(matrix) != 2 * k + 1:
        raise VamsError(f"a ballot holds exactly {2 * k + 1} shares")
    ones = matrix.sum(axis=0)
    valid = bool(np.all((ones == k) | (ones == k + 1)))
    reconstruction = tuple(int(c == k + 1) for c in ones)
    return valid, (reconstruction if valid else None)


def build_priv_dataset(
    dataset: Dataset,
    k: int,
    rng: np.random.Generator,
    include_share_ids: bool = True,
) -> PrivDataset:
    """Generate and globally shuffle all ballots of a dataset.

    Deterministic for a fixed generator state. ``include_share_ids=False``
    skips per-share hashing for large-scale statistical runs where shares
    are never individually addressed; such datasets cannot be serialized.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    if dataset.r < 1:
        raise VamsError("empty dataset")
    n = 2 * k + 1
    shares = _ballot_matrix(dataset.values, k, rng).reshape(dataset.r * n, dataset.t)
    share_ids: list[str] | None = None
    if include_share_ids:
        if dataset.ids is None:
            raise VamsError("record identifiers required to derive share identifiers")
        share_ids = [
            derive_share_id(bytes.fromhex(id_c), i).hex()
            for id_c in dataset.ids
            for i in range(1, n + 1)
        ]
    perm = rng.permutation(len(shares))
    return PrivDataset(
        kind=MULTIBALLOT,
        t=dataset.t,
        r=dataset.r,
        k=k,
        share_ids=[share_ids[p] for p in perm] if share_ids is not None else None,
        share_values=shares[perm],
    )


def build_univariate_dataset(dataset: Dataset, rng: np.random.Generator) -> PrivDataset:
    """Split every record into single-element shares and shuffle."""
    if dataset.r < 1:
        raise VamsError("empty dataset")
    if dataset.ids is None:
        raise VamsError("record identifiers required to derive share identifiers")
    r, t = dataset.r, dataset.t
    ids = [
        derive_share_id(bytes.fromhex(id_c), i).hex()
        for id_c in dataset.ids
        for i in range(1, t + 1)
    ]
    types = np.tile(np.arange(1, t + 1), r)
    values = dataset.values.reshape(r * t)
    perm = rng.permutation(r * t)
    return PrivDataset(
        kind=UNIVARIATE,
        t=t,
        r=r,
        share_ids=[ids[p] for p in perm],
        element_types=types[perm],
        element_values=values[perm].copy(),
    )


@dataclass(frozen=True)
class OwnShareResult:
    status: str  # ACCEPT, SHARES_MISSING, SHARES_TAMPERED
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.status == ACCEPT


def verify_own_shares(id_c: str, record: Record, priv: PrivDataset) -> OwnShareResult:
    """Locate a user's shares in the published dataset and validate them.

    All shares derived from id_c must be present; for ballots they must
    form a valid ballot reconstructing the record, for split shares each
    must carry the record's element value under the right type tag.
    """
    index = priv.index_by_share_id()
    id_c_bytes = bytes.fromhex(id_c)
    expected = priv.shares_per_record
    rows = []
    for i in range(1, expected + 1):
        sid = derive_share_id(id_c_bytes, i).hex()
        if sid not in index:
            return OwnShareResult(SHARES_MISSING, f"share {i} of {expected} absent")
        rows.append(index[sid])
    if priv.kind == MULTIBALLOT:
        matrix = priv.share_values[rows]
        valid, reconstruction = is_valid_ballot(matrix, priv.k)
        if not valid:
            return OwnShareResult(SHARES_TAMPERED, "ballot violates the per-element count rule")
        if reconstruction != record.values:
            return OwnShareResult(SHARES_TAMPERED, "ballot reconstructs a different record")
        return OwnShareResult(ACCEPT)
    for i, row in enumerate(rows, start=1):
        if int(priv.element_types[row]) != i:
            return OwnShareResult(SHARES_TAMPERED, f"share {i} carries a foreign type tag")
        if int(priv.element_values[row]) != record.values[i - 1]:
            return OwnShareResult(SHARES_TAMPERED, f"share {i} value differs from the record")
    return OwnShareResult(ACCEPT)


@dataclass(frozen=True)
class DistributionCheck:
    ok: bool
    max_relative_deviation: float
    detail: str = ""


def check_share_distribution(
    priv: PrivDataset, recovered_occurrences: np.ndarray, tolerance: float
) -> DistributionCheck:
    """Compare observed share-pattern counts against their expectation.

    Under honest generation the observed occurrence vector of the share
    dataset equals M times the recovered record occurrences up to the
    mass lost to clamping, so a large deviation flags non-random share
    generation. Deviations are measured relative to the total share
    count. For k=0 shares are records and the match must be exact.
    """
    from .stats import expectation_matrix, occurrence_vector

    if priv.kind == UNIVARIATE:
        # Split shares carry element values verbatim: per-element counts
        # must match the recovered per-element supports exactly.
        worst = 0.0
        for j in range(1, priv.t + 1):
            sel = priv.element_types == j
            if int(sel.sum()) != priv.r:
                return DistributionCheck(False, 1.0, f"element {j} share count != r")
            observed = float(priv.element_values[sel].sum()) / priv.r
            expected = float(recovered_occurrences[j - 1])
            worst = max(worst, abs(observed - expected))
        return DistributionCheck(worst <= tolerance, worst)

    recovered = np.asarray(recovered_occurrences, dtype=np.float64)
    if recovered.shape != (1 << priv.t,):
        raise VamsError(
            f"recovered occurrence vector has shape {recovered.shape}, expected {(1 << priv.t,)}"
        )
    observed = occurrence_vector(priv.share_values).astype(np.float64)
    expected = expectation_matrix(priv.k, priv.t) @ recovered
    deviation = float(np.max(np.abs(observed - expected))) / priv.n_shares
    # k=0 publishes the records themselves: match must be exact (float dust aside).
    effective_tol = 1e-9 if priv.k == 0 else tolerance
    return DistributionCheck(deviation <= effective_tol, deviation)
