import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sidegraph.alignment import (
    MAX_WITNESSES,
    DegenerateModelError,
    PermutationShape,
    alignment_statistic,
    concentration_bounds,
    expected_statistic,
    map_deanonymize,
    matching_error,
    optimize_alignment,
    permutation_shape,
    preserved_pair_count,
)
from sidegraph.graphs import (
    LabelledGraph,
    Permutation,
    apply_permutation,
    canonicalize,
    enumerate_permutations,
)
from sidegraph.model import independent_model, log_joint_graph_prob, sample_pair, subsampling_model

from . import oracles


def random_graph(rng, n):
    return LabelledGraph(n, 1, tuple(int(x) for x in rng.integers(0, 2, size=n * (n - 1) // 2)))


@st.composite
def unweighted_pair_and_perm(draw, max_n=6):
    n = draw(st.integers(2, max_n))
    m = n * (n - 1) // 2
    a = draw(st.lists(st.integers(0, 1), min_size=m, max_size=m))
    b = draw(st.lists(st.integers(0, 1), min_size=m, max_size=m))
    p = draw(st.permutations(range(n)))
    return LabelledGraph(n, 1, tuple(a)), LabelledGraph(n, 1, tuple(b)), Permutation(tuple(p))


def test_statistic_examples():
    for n in (3, 5):
        k = LabelledGraph.complete(n)
        for p in enumerate_permutations(n):
            assert alignment_statistic(k, k, p) == math.comb(n, 2)
            assert alignment_statistic(LabelledGraph.empty(n), k, p) == 0
    path = LabelledGraph.from_edge_list(3, [(1, 2), (2, 3)])
    swap = Permutation.from_cycles(3, [(1, 3)])
    assert alignment_statistic(path, path, swap) == 2


@settings(max_examples=150, deadline=None)
@given(unweighted_pair_and_perm())
def test_statistic_matches_oracle(case):
    ga, gb, p = case
    images = {u + 1: p(u) + 1 for u in range(ga.n)}
    assert alignment_statistic(ga, gb, p) == oracles.alignment_statistic(oracles.to_dict(ga), oracles.to_dict(gb), images)


@settings(max_examples=150, deadline=None)
@given(unweighted_pair_and_perm())
def test_matching_error_identity(case):
    # |E(a)| + |E(b)| - 2 stat
    ga, gb, p = case
    assert matching_error(ga, gb, p) == ga.edge_count() + gb.edge_count() - 2 * alignment_statistic(ga, gb, p)


def test_matching_error_examples():
    rng = np.random.default_rng(0)
    g = random_graph(rng, 5)
    assert matching_error(g, g, Permutation.identity(5)) == 0
    assert matching_error(LabelledGraph.empty(5), LabelledGraph.complete(5), Permutation.identity(5)) == 10


def test_optimize_examples():
    rng = np.random.default_rng(1)
    for n in (3, 4, 5):
        k = LabelledGraph.complete(n)
        sigma = Permutation(tuple(int(x) for x in rng.permutation(n)))
        assert optimize_alignment(k, apply_permutation(k, sigma)).value == math.comb(n, 2)
        gb = random_graph(rng, n)
        assert optimize_alignment(k, gb, "min").value == gb.edge_count()


@pytest.mark.parametrize("sense", ["max", "min"])
@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_optimize_matches_brute_force(n, sense):
    rng = np.random.default_rng(10 + n)
    d = subsampling_model(0.5, 0.5)
    pick = max if sense == "max" else min
    for _ in range(10):
        ga, gb = sample_pair(d, n, rng)
        stats = {p: alignment_statistic(ga, gb, p) for p in enumerate_permutations(n)}
        best = pick(stats.values())
        for prune in (False, True):
            res = optimize_alignment(ga, gb, sense, prune=prune)
            assert res.value == best
            assert res.count == sum(v == best for v in stats.values())
            optimal = [p for p, v in stats.items() if v == best]  # lexicographic order
            assert list(res.witnesses) == optimal[:MAX_WITNESSES]


def test_optimize_bad_sense():
    with pytest.raises(ValueError):
        optimize_alignment(LabelledGraph.empty(3), LabelledGraph.empty(3), "median")


def test_map_examples():
    d = subsampling_model(0.5, 0.5)
    ga = random_graph(np.random.default_rng(2), 5)
    assert map_deanonymize(ga, canonicalize(LabelledGraph.empty(5)), d) == LabelledGraph.empty(5)
    with pytest.raises(DegenerateModelError):
        map_deanonymize(ga, canonicalize(ga), independent_model([0.5, 0.5], [0.3, 0.7]))


def test_map_returns_a_labelling_of_the_structure():
    d = subsampling_model(0.5, 0.9)
    rng = np.random.default_rng(3)
    for _ in range(10):
        ga, gb = sample_pair(d, 5, rng)
        est = map_deanonymize(ga, canonicalize(gb), d)
        assert canonicalize(est) == canonicalize(gb)


def test_map_maximizes_joint_probability_over_labellings():
    rng = np.random.default_rng(4)
    for d in (subsampling_model(0.5, 0.7), independent_model([0.5, 0.5], [0.5, 0.5])):
        if d.correlation_sign() == 0:
            continue
        for _ in range(10):
            ga, gb = sample_pair(d, 4, rng)
            est = map_deanonymize(ga, canonicalize(gb), d)
            labellings = {apply_permutation(gb, p) for p in enumerate_permutations(4)}
            best = max(float(log_joint_graph_prob(ga, g, d)) for g in labellings)
            assert float(log_joint_graph_prob(ga, est, d)) == pytest.approx(best, abs=1e-12)


def test_map_recovers_most_samples_under_strong_correlation():
    d = subsampling_model(0.5, 0.99)
    rng = np.random.default_rng(5)
    hits = 0
    for _ in range(100):
        ga, gb = sample_pair(d, 6, rng)
        hits += map_deanonymize(ga, canonicalize(gb), d) == gb
    assert hits >= 80


def test_permutation_shape():
    assert permutation_shape(Permutation.identity(3)) == PermutationShape(3, 0)
    assert permutation_shape(Permutation.from_cycles(3, [(1, 2)])) == PermutationShape(1, 1)
    assert permutation_shape(Permutation.from_cycles(3, [(1, 2, 3)])) == PermutationShape(0, 0)
    assert permutation_shape(Permutation.from_cycles(6, [(1, 2), (3, 4, 5)])) == PermutationShape(1, 1)


@pytest.mark.parametrize("n", [3, 4, 5])
def test_preserved_pairs_match_brute_force(n):
    for p in enumerate_permutations(n):
        direct = sum(
            1 for i, j in itertools.combinations(range(n), 2) if {p(i), p(j)} == {i, j}
        )
        assert preserved_pair_count(p) == direct == permutation_shape(p).preserved_pairs


def test_expected_statistic_examples():
    d = subsampling_model(0.5, 0.5)
    cross = (d.p10 + d.p11) * (d.p01 + d.p11)
    assert expected_statistic(PermutationShape(3, 0), d, 3) == pytest.approx(3 * d.p11)
    assert expected_statistic(PermutationShape(1, 1), d, 3) == pytest.approx(d.p11 + 2 * cross)
    assert expected_statistic(PermutationShape(0, 0), d, 3) == pytest.approx(3 * cross)
    with pytest.raises(ValueError):
        expected_statistic(PermutationShape(2, 1), d, 3)


def test_expected_statistic_matches_exact_expectation():
    # full enumeration of all 64 (ga, gb) pairs at n=3
    n = 3
    d = subsampling_model(0.6, 0.7)
    dicts = oracles.all_dicts(n, 1)
    for p in enumerate_permutations(n):
        images = {u + 1: p(u) + 1 for u in range(n)}
        exact = sum(
            oracles.joint_prob(da, db, d.p) * oracles.alignment_statistic(da, db, images)
            for da in dicts
            for db in dicts
        )
        assert expected_statistic(permutation_shape(p), d, n) == pytest.approx(exact, abs=1e-12)


def test_concentration_bound_examples():
    b = concentration_bounds(5, 0.0)
    assert b.single_permutation == 1.0 and b.union == 1.0
    b = concentration_bounds(8, 1.0)
    assert b.single_permutation == pytest.approx(math.exp(-14))
    assert b.union == pytest.approx(min(1.0, math.exp(-(14 - 8 * math.log(8)))))
    d = subsampling_model(0.5, 0.9)
    gap = (math.sqrt(d.p00 * d.p11) - math.sqrt(d.p01 * d.p10)) ** 2
    b = concentration_bounds(40, 0.5, d)
    assert b.map_failure == pytest.approx(min(1.0, 2 ** (-(38 * gap - math.log2(40)))))
