"""Exact reconstruction-attack bounds for the (2k+1)-share ballot scheme.

Against a published share dataset, an adversary who already holds ``a``
shares of a target ballot tries to complete it by picking the remaining
shares from the dataset. The chance that no spurious completion looks
valid (and the true one stands out) is driven by pure combinatorics over
share forms. Every count and probability here is computed in exact
integer/rational arithmetic; only the final exponentiation leaves
rational space, and it is evaluated in log space to dodge float
underflow.

Share forms follow the mark notation of the ballot analysis: an element
in a single share is one of two "singles" (a mark for one value only) or
two "doubles" (marks for both, or neither). A valid ballot shows k+1
marks for the record's value and k for its complement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction


@dataclass(frozen=True)
class SchemeParams:
    """Attack setting: scheme half-width k, records r, known shares a, elements e."""

    k: int
    r: int
    a: int
    e: int

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1 (the single-share scheme hides nothing)")
        if not 1 <= self.a <= 2 * self.k:
            raise ValueError(f"known shares a={self.a} must lie in [1, 2k]")
        if self.r < 1 or self.e < 1:
            raise ValueError("record count and element count must be >= 1")


@dataclass(frozen=True)
class ShareDistribution:
    """Exact share-form counts and probabilities over all valid ballots."""

    k: int
    total_valid: int  # V: number of valid one-element ballots
    singles_count: int  # occurrences of each single form across valid ballots
    doubles_count: int  # occurrences of each double form
    p_single: Fraction
    p_double: Fraction


def ballot_form_count(k: int, i: int) -> int:
    """Permutations of a valid ballot with i singles of the record's value.

    Such a ballot has i-1 singles of the complement and k+1-i of each
    double form; the count is the multiset permutation formula.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    if not 1 <= i <= k + 1:
        raise ValueError(f"form index i={i} must lie in [1, k+1]")
    f = math.factorial
    return f(2 * k + 1) // (f(i) * f(i - 1) * f(k + 1 - i) ** 2)


def valid_ballot_total(k: int) -> int:
    """V: valid one-element ballots, summed over forms and both values."""
    if k < 0:
        raise ValueError("k must be >= 0")
    total = 2 * sum(ballot_form_count(k, i) for i in range(1, k + 2))
    # Counting identity for the same quantity; kept as a cheap self-check.
    assert total == 2 * math.comb(2 * k + 1, k + 1) * math.comb(2 * k + 1, k)
    return total


def share_distribution(k: int) -> ShareDistribution:
    """Exact probabilities of each share form in a random valid ballot."""
    v = valid_ballot_total(k)
    singles = sum((2 * i - 1) * ballot_form_count(k, i) for i in range(1, k + 2))
    doubles = 2 * sum((k + 1 - i) * ballot_form_count(k, i) for i in range(1, k + 2))
    denominator = (2 * k + 1) * v
    dist = ShareDistribution(
        k=k,
        total_valid=v,
        singles_count=singles,
        doubles_count=doubles,
        p_single=Fraction(singles, denominator),
        p_double=Fraction(doubles, denominator),
    )
    assert 2 * dist.p_single + 2 * dist.p_double == 1
    return dist


def valid_combo_probability(k: int) -> Fraction:
    """P: probability that 2k+1 independently drawn shares form a valid ballot."""
    dist = share_distribution(k)
    p_s, p_d = dist.p_single, dist.p_double
    total = Fraction(0)
    for i in range(1, k + 2):
        total += (
            ballot_form_count(k, i)
            * p_s ** (2 * i - 1)
            * p_d ** (2 * (k + 1 - i))
        )
    return 2 * total


def reconstruction_success(k: int, r: int, a: int, e: int) -> float:
    """S: the adversary's chance of success completing a ballot.

    With a of the 2k+1 shares known, there are N = C((2k+1)r - a, 2k+1 - a)
    candidate completions; S = (1 - P^e)^(N-1) is the probability that
    none of the N-1 spurious ones is valid. Evaluated in log space:
    exp((N-1) * log1p(-P^e)).
    """
    params = SchemeParams(k=k, r=r, a=a, e=e)
    big_n = math.comb((2 * params.k + 1) * params.r - params.a, 2 * params.k + 1 - params.a)
    if big_n <= 1:
        return 1.0
    p = valid_combo_probability(params.k)
    # log P from exact integers, robust even when float(P) would underflow
    ln_p = math.log(p.numerator) - math.log(p.denominator)
    x_log = params.e * ln_p  # ln(P^e)
    if x_log >= 0.0:  # P == 1 and more than one candidate: some spurious combo is valid
        return 0.0
    if x_log > -700.0:
        neg_term = -math.log1p(-math.exp(x_log))  # -ln(1 - P^e) > 0
        log_neg_term = math.log(neg_term)
    else:
        log_neg_term = x_log  # -log1p(-x) ~ x for tiny x
    ln_neg_ln_s = math.log(big_n - 1) + log_neg_term
    if ln_neg_ln_s > 709.0:
        return 0.0
    ln_s = -math.exp(ln_neg_ln_s)
    return math.exp(ln_s) if ln_s > -745.0 else 0.0


def max_safe_elements(k: int, r: int, a: int, threshold: float) -> tuple[int, float | None]:
    """Largest element count keeping reconstruction success below threshold.

    S is nondecreasing in e (more elements make spurious completions less
    plausible, so the true one stands out), which makes a doubling search
    plus bisection exact. Returns (0, None) when even e=1 is unsafe.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    if reconstruction_success(k, r, a, 1) >= threshold:
        return 0, None
    lo = 1  # invariant: S(lo) < threshold
    hi = 2
    while reconstruction_success(k, r, a, hi) < threshold:
        lo = hi
        hi *= 2
        if hi > 1 << 32:
            raise ArithmeticError("safe element bound did not converge")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if reconstruction_success(k, r, a, mid) < threshold:
            lo = mid
        else:
            hi = mid
    return lo, reconstruction_success(k, r, a, lo)


TABLE_SCHEMES: tuple[tuple[int, int], ...] = ((1, 1), (1, 2), (2, 1), (2, 4))
TABLE_USER_COUNTS: tuple[int, ...] = (10, 100, 1000, 10000)


def safe_bounds_table(threshold: float = 1e-4) -> list[dict]:
    """Safe element counts for the 3/5-share schemes across user counts."""
    rows = []
    for k, a in TABLE_SCHEMES:
        for r in TABLE_USER_COUNTS:
            e_max, success = max_safe_elements(k, r, a, threshold)
            rows.append(
                {
                    "scheme": f"{2 * k + 1}Ballot",
                    "k": k,
                    "known_shares": a,
                    "users": r,
                    "max_safe_elements": e_max,
                    "success_probability": success,
                }
            )
    return rows
