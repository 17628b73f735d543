"""Support/confidence measures and their recovery from share datasets.

Records and shares are treated as bitstrings; element j (1-based) maps
to bit j-1, so the all-true record over five elements is index 31. The
occurrence vector counts every pattern. For a (2k+1)-share dataset, a
share matches its record per element with probability p = (k+1)/(2k+1),
so the expected pattern counts are a linear image of the record counts:
one matrix solve recovers the original distribution, and any support or
confidence follows. Measures over a subset of elements are recovered on
the projected pattern space, which keeps the solve small no matter how
wide the records are.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    SingularMatrixError,
    UndefinedConfidence,
    UndefinedPercentError,
    VamsError,
)
from .multiballot import MULTIBALLOT, UNIVARIATE, PrivDataset

MAX_VECTOR_ELEMENTS = 20  # 2^t occurrence vector
MAX_MATRIX_ELEMENTS = 12  # 2^t x 2^t dense expectation matrix
CONDITION_LIMIT = 1e12


def _element_columns(elements: Iterable[int], t: int) -> list[int]:
    cols = sorted(set(int(e) for e in elements))
    if not cols:
        raise VamsError("element set must be nonempty")
    if cols[0] < 1 or cols[-1] > t:
        raise VamsError(f"element indices must lie in [1, {t}]")
    return [c - 1 for c in cols]


def support(values: np.ndarray, elements: Iterable[int]) -> float:
    """Fraction of records whose listed elements are all true."""
    values = np.asarray(values)
    if len(values) == 0:
        raise VamsError("support of an empty dataset is undefined")
    cols = _element_columns(elements, values.shape[1])
    return float(np.all(values[:, cols] == 1, axis=1).mean())


def confidence(values: np.ndarray, antecedent: Iterable[int], consequent: Iterable[int]) -> float:
    """How often the consequent holds among records matching the antecedent."""
    antecedent = list(antecedent)
    joint = set(antecedent) | set(consequent)
    supp_antecedent = support(values, antecedent)
    if supp_antecedent == 0.0:
        raise UndefinedConfidence(f"antecedent {sorted(antecedent)} never occurs")
    return support(values, joint) / supp_antecedent


def occurrence_vector(values: np.ndarray, t: int | None = None) -> np.ndarray:
    """Counts of every bitstring pattern, indexed by the pattern's value."""
    values = np.asarray(values, dtype=np.int64)
    if values.ndim != 2:
        raise VamsError("occurrence vector needs a 2-D binary matrix")
    width = values.shape[1] if t is None else t
    if width != values.shape[1]:
        raise VamsError(f"rows have width {values.shape[1]}, expected {width}")
    if width > MAX_VECTOR_ELEMENTS:
        raise VamsError(
            f"{width} elements would need a 2^{width} vector; project onto the "
            f"published element subset first (limit {MAX_VECTOR_ELEMENTS})"
        )
    indices = values @ (1 << np.arange(width, dtype=np.int64))
    return np.bincount(indices, minlength=1 << width).astype(np.int64)


def expectation_matrix(k: int, t: int) -> np.ndarray:
    """M[observed, original]: expected share-pattern counts per record.

    Each of the 2k+1 shares matches the record independently per element
    with probability p = (k+1)/(2k+1), so M is (2k+1) times the t-fold
    Kronecker power of the single-element match matrix.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    if t < 1:
        raise ValueError("t must be >= 1")
    if t > MAX_MATRIX_ELEMENTS:
        raise VamsError(
            f"dense 2^{t} x 2^{t} expectation matrix refused (limit {MAX_MATRIX_ELEMENTS}); "
            "recover on a projected element subset instead"
        )
    n = 2 * k + 1
    p = (k + 1) / n
    single = np.array([[p, 1 - p], [1 - p, p]], dtype=np.float64)
    return n * reduce(np.kron, [single] * t)


@dataclass(frozen=True)
class RecoveryResult:
    estimate: np.ndarray  # recovered occurrence vector, clamped at zero
    clamped_mass: float  # total negative mass removed by clamping
    condition: float


def recover_occurrences(o_priv: np.ndarray, matrix: np.ndarray) -> RecoveryResult:
    """Solve M x = o_priv for the original occurrence vector.

    Uses a linear solve with partial pivoting rather than an explicit
    inverse. Sampling noise can push entries slightly negative; those are
    clamped to zero and the removed mass is reported so a caller can flag
    anomalies.
    """
    o_priv = np.asarray(o_priv, dtype=np.float64)
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise VamsError("expectation matrix must be square")
    if o_priv.shape != (matrix.shape[0],):
        raise VamsError(
            f"occurrence vector shape {o_priv.shape} does not match matrix {matrix.shape}"
        )
    condition = float(np.linalg.cond(matrix, 1))
    if not np.isfinite(condition) or condition > CONDITION_LIMIT:
        raise SingularMatrixError(f"condition number {condition:.3e} exceeds {CONDITION_LIMIT:.0e}")
    solution = np.linalg.solve(matrix, o_priv)
    # One step of iterative refinement keeps per-cell error near machine
    # precision even at the condition numbers wider schemes produce.
    solution += np.linalg.solve(matrix, o_priv - matrix @ solution)
    negative = solution < 0
    clamped_mass = float(-solution[negative].sum())
    estimate = np.where(negative, 0.0, solution)
    return RecoveryResult(estimate=estimate, clamped_mass=clamped_mass, condition=condition)


def _project_occurrences(values: np.ndarray, cols: Sequence[int]) -> np.ndarray:
    return occurrence_vector(np.asarray(values)[:, list(cols)])


def _marginal_support(estimate: np.ndarray, width: int, bits: Sequence[int], total: float) -> float:
    """Estimated support of the patterns with the given bits all set."""
    if total <= 0:
        raise VamsError("record count must be positive")
    indices = np.arange(len(estimate))
    mask = 0
    for b in bits:
        mask |= 1 << b
    return float(estimate[(indices & mask) == mask].sum()) / total


@dataclass(frozen=True)
class RecoveredMeasure:
    elements: tuple[int, ...]
    support: float
    confidence: float | None
    clamped_mass: float


def recovered_measures(
    priv: PrivDataset, itemsets: Sequence[Iterable[int]]
) -> list[RecoveredMeasure]:
    """Estimate supports (and rule confidences) of itemsets from shares.

    For each itemset the share patterns are projected onto its elements
    and the record distribution over that subspace is recovered; the
    projection is exact because per-element generation is independent.
    For itemsets of size >= 2 the confidence of the rule
    (all but the last element) => (last element) is reported, matching
    the convention used when statistics are published.
    """
    results = []
    for itemset in itemsets:
        elements = tuple(sorted(set(int(e) for e in itemset)))
        if not elements:
            raise VamsError("element set must be nonempty")
        if elements[0] < 1 or elements[-1] > priv.t:
            raise VamsError(f"element indices must lie in [1, {priv.t}]")
        if priv.kind == UNIVARIATE:
            if len(elements) > 1:
                raise VamsError(
                    "split shares support only single-element measures; "
                    f"{elements} spans {len(elements)} elements"
                )
            j = elements[0]
            selector = priv.element_types == j
            count = int(selector.sum())
            if count != priv.r:
                raise VamsError(f"element {j} has {count} shares, expected {priv.r}")
            supp = float(priv.element_values[selector].sum()) / priv.r
            results.append(
                RecoveredMeasure(elements=elements, support=supp, confidence=None, clamped_mass=0.0)
            )
            continue
        cols = [e - 1 for e in elements]
        width = len(cols)
        o_priv = _project_occurrences(priv.share_values, cols)
        recovery = recover_occurrences(o_priv, expectation_matrix(priv.k, width))
        all_bits = list(range(width))
        supp = _marginal_support(recovery.estimate, width, all_bits, priv.r)
        conf: float | None = None
        if width >= 2:
            supp_antecedent = _marginal_support(
                recovery.estimate, width, all_bits[:-1], priv.r
            )
            conf = supp / supp_antecedent if supp_antecedent > 0 else None
        results.append(
            RecoveredMeasure(
                elements=elements,
                support=supp,
                confidence=conf,
                clamped_mass=recovery.clamped_mass,
            )
        )
    return results


def mine_frequent_itemsets(values: np.ndarray, min_support: float) -> dict[tuple[int, ...], float]:
    """Level-wise frequent itemset mining with exact support counting.

    Returns every itemset (1-based element tuples) whose support meets
    the threshold, found by extending frequent sets one element at a
    time and pruning candidates with any infrequent subset.
    """
    if not 0.0 < min_support <= 1.0:
        raise ValueError("min_support must lie in (0, 1]")
    values = np.asarray(values, dtype=np.uint8)
    r, t = values.shape
    if r == 0:
        raise VamsError("cannot mine an empty dataset")
    frequent: dict[tuple[int, ...], float] = {}
    truth = values == 1
    level: dict[tuple[int, ...], np.ndarray] = {}
    for j in range(1, t + 1):
        column = truth[:, j - 1]
        supp = float(column.mean())
        if supp >= min_support:
            level[(j,)] = column
            frequent[(j,)] = supp
    while level:
        keys = sorted(level)
        next_level: dict[tuple[int, ...], np.ndarray] = {}
        for a, b in combinations(keys, 2):
            if a[:-1] != b[:-1]:
                continue
            candidate = a + (b[-1],)
            if any(
                tuple(sub) not in frequent
                for sub in combinations(candidate, len(candidate) - 1)
            ):
                continue
            rows = level[a] & truth[:, candidate[-1] - 1]
            supp = float(rows.mean())
            if supp >= min_support:
                next_level[candidate] = rows
                frequent[candidate] = supp
        level = next_level
    return frequent


def percent_error(reported: float, recovered: float) -> float:
    """Relative deviation of a recovered measure, in percent."""
    if reported == 0:
        raise UndefinedPercentError("percent error against a zero reference")
    return 100.0 * abs(recovered - reported) / abs(reported)
