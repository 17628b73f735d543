from itertools import combinations

import numpy as np
import pytest

from vams.errors import (
    SingularMatrixError,
    UndefinedConfidence,
    UndefinedPercentError,
    VamsError,
)
from vams.multiballot import Dataset, build_priv_dataset, build_univariate_dataset
from vams.stats import (
    confidence,
    expectation_matrix,
    mine_frequent_itemsets,
    occurrence_vector,
    percent_error,
    recover_occurrences,
    recovered_measures,
    support,
)


def brute_support(values, elements):
    hits = 0
    for row in values:
        if all(row[e - 1] == 1 for e in elements):
            hits += 1
    return hits / len(values)


def test_support_basics():
    values = np.array([[1, 0], [1, 1], [0, 1], [0, 0]], dtype=np.uint8)
    assert support(values, (1,)) == 0.5
    assert support(values, (1, 2)) == 0.25
    assert support(np.ones((4, 3), dtype=np.uint8), (1, 2, 3)) == 1.0
    with pytest.raises(VamsError):
        support(np.zeros((0, 2), dtype=np.uint8), (1,))
    with pytest.raises(VamsError):
        support(values, (0,))
    with pytest.raises(VamsError):
        support(values, (3,))


def test_support_matches_brute_force(rng):
    values = rng.integers(0, 2, size=(100, 5)).astype(np.uint8)
    for size in (1, 2, 3):
        for elements in combinations(range(1, 6), size):
            assert support(values, elements) == pytest.approx(brute_support(values, elements))


def test_confidence_basics(rng):
    values = rng.integers(0, 2, size=(80, 4)).astype(np.uint8)
    values[:, 1] = values[:, 0]  # e2 == e1 always
    assert confidence(values, (1,), (2,)) == 1.0
    # a consequent that never co-occurs
    never = values.copy()
    never[:, 3] = 1 - never[:, 0]
    assert confidence(never, (1,), (4,)) == 0.0
    # matches the ratio of brute-force supports
    c = confidence(values, (1, 3), (2,))
    assert c == pytest.approx(brute_support(values, (1, 2, 3)) / brute_support(values, (1, 3)))
    with pytest.raises(UndefinedConfidence):
        confidence(np.zeros((5, 2), dtype=np.uint8), (1,), (2,))


def test_occurrence_vector_values():
    row = np.array([[1, 1, 1, 1, 1]], dtype=np.uint8)
    vec = occurrence_vector(row)
    assert vec[31] == 1 and vec.sum() == 1
    empty = occurrence_vector(np.zeros((0, 3), dtype=np.uint8))
    assert empty.shape == (8,) and empty.sum() == 0


def test_occurrence_vector_roundtrip(rng):
    values = rng.integers(0, 2, size=(500, 6)).astype(np.uint8)
    vec = occurrence_vector(values)
    assert vec.sum() == 500
    # invertible back to a multiset of bitstrings
    rebuilt = []
    for pattern, count in enumerate(vec):
        rebuilt.extend([pattern] * count)
    original = sorted(values @ (1 << np.arange(6)))
    assert rebuilt == sorted(rebuilt) == original


def test_occurrence_vector_width_cap():
    with pytest.raises(VamsError):
        occurrence_vector(np.zeros((1, 21), dtype=np.uint8))


def test_expectation_matrix_structure():
    assert np.allclose(expectation_matrix(0, 4), np.eye(16))
    assert np.allclose(expectation_matrix(1, 1), [[2, 1], [1, 2]])
    for k in (1, 2, 3):
        for t in (1, 3, 5):
            m = expectation_matrix(k, t)
            assert np.allclose(m.sum(axis=0), 2 * k + 1)
            assert np.all(m > 0)
    with pytest.raises(VamsError):
        expectation_matrix(1, 13)


def test_expectation_matrix_monte_carlo(rng):
    # Expected pattern counts from one record over many generated ballots.
    from vams.multiballot import _ballot_matrix

    k, t = 1, 2
    record = np.array([[1, 0]], dtype=np.uint8)
    trials = 200_000
    ballots = _ballot_matrix(np.repeat(record, trials, axis=0), k, rng)
    observed = occurrence_vector(ballots.reshape(-1, t)).astype(float) / trials
    expected = expectation_matrix(k, t)[:, 1]  # record pattern 01 -> index 1
    sigma = np.sqrt(expected / trials) + 1e-9
    assert np.all(np.abs(observed - expected) < 4 * sigma), (observed, expected)


def test_recovery_exactness_analytic(rng):
    # M x = o_priv with o_priv built analytically recovers x to 1e-9.
    for t in (1, 2, 4, 6):
        for k in (0, 1, 2):
            o_d = rng.integers(0, 100, size=1 << t).astype(np.float64)
            m = expectation_matrix(k, t)
            result = recover_occurrences(m @ o_d, m)
            assert np.max(np.abs(result.estimate - o_d)) < 1e-9
            assert result.clamped_mass < 1e-9  # float dust at most


def test_recovery_clamps_and_reports(rng):
    m = expectation_matrix(1, 1)
    # o_priv impossible under honest generation: solution has a negative cell
    result = recover_occurrences(np.array([0.0, 30.0]), m)
    assert result.clamped_mass > 0
    assert np.all(result.estimate >= 0)


def test_recovery_rejects_singular():
    singular = np.ones((4, 4))
    with pytest.raises(SingularMatrixError):
        recover_occurrences(np.ones(4), singular)
    with pytest.raises(VamsError):
        recover_occurrences(np.ones(3), expectation_matrix(1, 2))


def test_recovered_measures_k0_pass_through(rng):
    values = rng.integers(0, 2, size=(300, 4)).astype(np.uint8)
    ds = Dataset(values=values)
    priv = build_priv_dataset(ds, 0, rng, include_share_ids=False)
    for elements in ((1,), (1, 2), (2, 3, 4)):
        measured = recovered_measures(priv, [elements])[0]
        assert measured.support == pytest.approx(support(values, elements), abs=1e-12)


def test_recovered_measures_projection_consistency(rng):
    # Projecting onto the itemset must equal recovering the full vector
    # and marginalizing it.
    values = rng.integers(0, 2, size=(2000, 4)).astype(np.uint8)
    priv = build_priv_dataset(Dataset(values=values), 1, rng, include_share_ids=False)
    target = (2, 4)
    projected = recovered_measures(priv, [target])[0].support
    full = recover_occurrences(
        occurrence_vector(priv.share_values).astype(float), expectation_matrix(1, 4)
    )
    solution = np.linalg.solve(
        expectation_matrix(1, 4), occurrence_vector(priv.share_values).astype(float)
    )
    indices = np.arange(16)
    mask = (1 << 1) | (1 << 3)
    marginal = solution[(indices & mask) == mask].sum() / priv.r
    assert projected == pytest.approx(marginal, abs=1e-9)


def test_recovered_measures_univariate(rng):
    values = rng.integers(0, 2, size=(400, 3)).astype(np.uint8)
    ds = Dataset(values=values, ids=[f"{i:032x}" for i in range(400)])
    priv = build_univariate_dataset(ds, rng)
    for j in (1, 2, 3):
        measured = recovered_measures(priv, [(j,)])[0]
        assert measured.support == pytest.approx(support(values, (j,)))
    with pytest.raises(VamsError):
        recovered_measures(priv, [(1, 2)])


def test_recovered_confidence_rule_convention(rng):
    values = rng.integers(0, 2, size=(5000, 3)).astype(np.uint8)
    values[:, 2] = values[:, 0] & values[:, 1]  # e3 = e1 AND e2
    priv = build_priv_dataset(Dataset(values=values), 1, rng, include_share_ids=False)
    measured = recovered_measures(priv, [(1, 2, 3)])[0]
    true_conf = confidence(values, (1, 2), (3,))
    assert true_conf == 1.0
    assert measured.confidence == pytest.approx(true_conf, abs=0.15)


def test_mine_frequent_itemsets_exact_oracle(rng):
    values = rng.integers(0, 2, size=(60, 6)).astype(np.uint8)
    for min_support in (0.2, 0.35, 0.6):
        mined = mine_frequent_itemsets(values, min_support)
        brute = {}
        for size in range(1, 7):
            for elements in combinations(range(1, 7), size):
                supp = brute_support(values, elements)
                if supp >= min_support:
                    brute[elements] = pytest.approx(supp)
        assert mined == brute


def test_mine_frequent_itemsets_planted_pair():
    values = np.zeros((40, 5), dtype=np.uint8)
    values[:20, 0] = 1
    values[:20, 1] = 1
    values[20:28, 2] = 1
    mined = mine_frequent_itemsets(values, 0.5)
    assert set(mined) == {(1,), (2,), (1, 2)}
    everything_true = mine_frequent_itemsets(np.ones((10, 2), dtype=np.uint8), 1.0)
    assert set(everything_true) == {(1,), (2,), (1, 2)}


def test_percent_error():
    assert percent_error(0.5, 0.5) == 0.0
    assert percent_error(0.10, 0.11) == pytest.approx(10.0)
    with pytest.raises(UndefinedPercentError):
        percent_error(0.0, 0.1)
