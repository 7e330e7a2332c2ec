import math

import numpy as np
import pytest
from scipy import stats

from sidegraph.alignment import alignment_statistic
from sidegraph.codec import (
    CodecConfig,
    DecodeFailure,
    TypicalSetParams,
    bin_of_symbols,
    decode,
    encode,
    exact_average_error,
    exact_codebook_model,
    exact_error_probability,
    error_bound,
    simulate_error_rate,
    typicality_test,
    unweighted_typicality_decomposed,
)
from sidegraph.graphs import (
    LabelledGraph,
    Permutation,
    apply_permutation,
    canonicalize,
    enumerate_graphs,
    enumerate_permutations,
    enumerate_structures,
)
from sidegraph.model import (
    SourceVariant,
    entropy_report,
    independent_model,
    log_conditional,
    log_joint_graph_prob,
    sample_pair,
    subsampling_model,
)

GG, GS, SG, SS = (
    SourceVariant.GraphGivenGraph,
    SourceVariant.GraphGivenStructure,
    SourceVariant.StructureGivenGraph,
    SourceVariant.StructureGivenStructure,
)


def config(n=4, variant=GS, rate=1.0, delta=0.5, seed=0, dist=None):
    return CodecConfig(n, dist or subsampling_model(0.5, 0.5), variant, rate, delta, seed)


def test_bin_count_from_rate():
    assert config(rate=0.5).bin_count == 8
    assert config(rate=0.0).bin_count == 1
    assert config(rate=1.0 / 6).bin_count == 2
    with pytest.raises(ValueError):
        config(rate=-1.0)
    with pytest.raises(ValueError):
        config(delta=0.0)


def test_single_bin_and_determinism():
    assert bin_of_symbols(3, 1, (0, 1, 1)) == 0
    assert bin_of_symbols(3, 1024, (0, 1, 1)) == bin_of_symbols(3, 1024, (0, 1, 1))
    seeds = {bin_of_symbols(s, 2**32, (0, 1, 1)) for s in range(20)}
    assert len(seeds) > 15


def test_higher_rate_refines_codebook():
    g = (0, 1, 1, 0, 1, 0)
    low, high = bin_of_symbols(5, 2**3, g), bin_of_symbols(5, 2**7, g)
    assert high % 2**3 == low


def test_bin_occupancy_roughly_uniform():
    cfg = config(variant=GG, rate=0.5, seed=11)
    counts = np.bincount([encode(g, cfg) for g in enumerate_graphs(4, 1)], minlength=8)
    assert counts.sum() == 64
    assert stats.chisquare(counts).pvalue > 0.001


def test_encode_is_isomorphism_invariant():
    rng = np.random.default_rng(0)
    for variant in (SG, SS):
        cfg = config(n=5, variant=variant, rate=2.0, seed=9)
        for _ in range(10):
            g = LabelledGraph(5, 1, tuple(int(x) for x in rng.integers(0, 2, size=10)))
            p = Permutation(tuple(int(x) for x in rng.permutation(5)))
            assert encode(g, cfg) == encode(apply_permutation(g, p), cfg) == encode(canonicalize(g), cfg)


def test_encode_kind_mismatch():
    with pytest.raises(TypeError):
        encode(canonicalize(LabelledGraph.empty(4)), config(variant=GS))


def test_typicality_examples():
    d = independent_model([0.7, 0.3], [0.5, 0.5])
    h_a = entropy_report(d).H_A
    cfg = CodecConfig(4, d, GG, 1.0, h_a)
    assert typicality_test(LabelledGraph.empty(4), LabelledGraph.empty(4), cfg)
    det = subsampling_model(0.5, 1.0)
    cfg = CodecConfig(4, det, GG, 1.0, 100.0)
    assert not typicality_test(LabelledGraph.complete(4), LabelledGraph.empty(4), cfg)


def test_decode_unique_and_ambiguous():
    rng = np.random.default_rng(1)
    ga, gb = sample_pair(subsampling_model(0.5, 0.5), 4, rng)
    cfg = config(variant=GG, rate=0.0, delta=100.0)
    res = decode(encode(ga, cfg), gb, cfg)
    assert res.failure is DecodeFailure.Ambiguous and res.candidates > 1
    # injective codebook with a wide window: the true graph is the only typical member of its bin
    cfg = config(variant=GG, rate=10.0, delta=100.0)
    res = decode(encode(ga, cfg), gb, cfg)
    assert res.ok and res.estimate == ga


def test_decode_none_typical():
    det = subsampling_model(0.5, 1.0)
    cfg = CodecConfig(3, det, GG, 10.0, 0.1)
    g = LabelledGraph.complete(3)
    res = decode(encode(g, cfg), LabelledGraph.empty(3), cfg)
    assert res.failure is DecodeFailure.NoneTypical


def test_atypical_probability_matches_direct_enumeration():
    for variant in (GG, GS, SG, SS):
        cfg = config(n=3, variant=variant, delta=0.3)
        model = exact_codebook_model(cfg)
        sources = list(enumerate_structures(3, 1)) if variant.source_is_structure else list(enumerate_graphs(3, 1))
        direct = 0.0
        # independent path: iterate over labelled graph pairs and project per variant
        for ga in enumerate_graphs(3, 1):
            for gb in enumerate_graphs(3, 1):
                ua = canonicalize(ga) if variant.source_is_structure else ga
                ub = canonicalize(gb) if variant.side_is_structure else gb
                lp = log_conditional(ua, ub, variant, cfg.dist)
                pj = log_joint_graph_prob(ga, gb, cfg.dist).prob
                if not typicality_test(ua, ub, cfg):
                    direct += pj
                assert not lp.impossible or pj == 0
        assert model.atypical_probability == pytest.approx(direct, abs=1e-12)
        assert len(sources) == model.joint.shape[0]


@pytest.mark.parametrize("variant", [GG, GS, SG, SS])
@pytest.mark.parametrize("n", [3, 4])
def test_exact_average_error_within_bound(variant, n):
    h = entropy_report(subsampling_model(0.5, 0.5)).H_A_given_B
    delta = 0.5
    cfg = config(n=n, variant=variant, rate=h + 2 * delta, delta=delta)
    model = exact_codebook_model(cfg)
    avg = exact_average_error(cfg, range(200), model)
    assert avg <= error_bound(model, cfg)


def test_exact_error_decomposition():
    cfg = config(n=4, variant=GS, rate=0.6, delta=0.5, seed=4)
    model = exact_codebook_model(cfg)
    err, none_typ, amb = exact_error_probability(model, cfg)
    assert none_typ + amb <= err + 1e-12
    assert 0.0 <= err <= 1.0


def test_simulation_agrees_with_exact_error():
    cfg = config(n=4, variant=GS, rate=0.6, delta=0.5, seed=4)
    model = exact_codebook_model(cfg)
    exact = exact_error_probability(model, cfg)[0]
    sim = simulate_error_rate(cfg, 4000, np.random.default_rng(2), model)
    assert abs(sim.error_rate - exact) <= 4 * math.sqrt(exact * (1 - exact) / 4000) + 1e-9
    assert sim.bound == pytest.approx(error_bound(model, cfg))


def test_injective_configuration_has_zero_error():
    cfg = config(n=4, variant=GS, rate=8.0, delta=0.5)
    model = exact_codebook_model(cfg)
    # widen the window past the largest spectrum deviation so every feasible pair is typical
    dev = np.abs(-np.log2(model.joint / model.joint.sum(axis=0)) / cfg.m - cfg.conditional_entropy)
    delta = float(np.max(dev[model.joint > 0])) + 1e-6
    cfg = config(n=4, variant=GS, rate=8.0, delta=delta)
    model = exact_codebook_model(cfg)
    bins = [bin_of_symbols(cfg.seed, cfg.bin_count, s) for s in model.source_symbols]
    assert len(set(bins)) == len(bins)
    assert exact_error_probability(model, cfg)[0] == 0.0
    assert simulate_error_rate(cfg, 200, np.random.default_rng(3), model).errors == 0


def test_error_non_increasing_in_rate():
    cfg = config(n=4, variant=GS, delta=0.5)
    model = exact_codebook_model(cfg)
    means = [exact_average_error(cfg.with_rate(r), range(20), model) for r in np.linspace(0.1, 1.5, 10)]
    assert all(b <= a + 1e-15 for a, b in zip(means, means[1:]))


# decomposed test

def test_decomposed_clause_flags():
    d = subsampling_model(0.5, 0.5)  # p10 + p11 = 0.25
    params = TypicalSetParams(0.5, 0.1, 1.0, 1.0)
    res = unweighted_typicality_decomposed(LabelledGraph.empty(5), canonicalize(LabelledGraph.empty(5)), d, params)
    assert not res.accepted and res.failed_clauses == ["source_edges"]


def test_decomposed_requires_nondegenerate_model():
    with pytest.raises(ValueError):
        TypicalSetParams.from_model(0.5, independent_model([0.5, 0.5], [0.5, 0.5]))
    with pytest.raises(ValueError):
        TypicalSetParams.from_model(0.5, subsampling_model(0.5, 1.0))


def test_decomposed_alignment_uses_optimum():
    d = subsampling_model(0.5, 0.9)
    rng = np.random.default_rng(5)
    params = TypicalSetParams.from_model(0.3, d)
    for _ in range(5):
        ga, gb = sample_pair(d, 5, rng)
        res = unweighted_typicality_decomposed(ga, canonicalize(gb), d, params)
        best = max(alignment_statistic(ga, gb, p) for p in enumerate_permutations(5))
        assert res.optimum_statistic == best


def test_decomposed_acceptance_implies_exact_typicality():
    d = subsampling_model(0.5, 0.5)
    for delta in (0.1, 0.3, 0.6):
        params = TypicalSetParams.from_model(delta, d)
        cfg = CodecConfig(4, d, GS, 1.0, 3 * delta)
        structures = list(enumerate_structures(4, 1))
        for ga in enumerate_graphs(4, 1):
            for sb in structures:
                if unweighted_typicality_decomposed(ga, sb, d, params).accepted:
                    assert typicality_test(ga, sb, cfg)

