"""Random-binning compression with side information at the decoder.

The encoder sends only the bin of its source object; the decoder returns the
unique candidate in that bin that is conditionally typical with the side
information.  Bins come from a keyed 64-bit hash, so a seed selects one
codebook from the random ensemble.
"""
from __future__ import annotations

import enum
import hashlib
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .alignment import DegenerateModelError, all_statistics
from .graphs import (
    LabelledGraph,
    StructureKey,
    canonicalize,
    check_perm_budget,
    enumerate_graphs,
    enumerate_structures,
    graph_matrix,
    num_pairs,
    structure_index,
)
from .logmath import LogProb
from .model import (
    JointEdgeDistribution,
    SourceVariant,
    entropy_report,
    joint_outcome_table,
    log_conditional,
)


@dataclass(frozen=True)
class CodecConfig:
    n: int
    dist: JointEdgeDistribution
    variant: SourceVariant
    rate_bits_per_pair: float
    delta: float
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.rate_bits_per_pair < 0:
            raise ValueError("rate must be non-negative")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")

    @property
    def m(self) -> int:
        return num_pairs(self.n)

    @property
    def bin_bits(self) -> int:
        # round first so that e.g. 6 * 0.5 is not pushed to 4 by float noise
        return math.ceil(round(self.m * self.rate_bits_per_pair, 9))

    @property
    def bin_count(self) -> int:
        return 2**self.bin_bits

    @property
    def conditional_entropy(self) -> float:
        return entropy_report(self.dist).H_A_given_B

    def with_seed(self, seed: int) -> "CodecConfig":
        return CodecConfig(self.n, self.dist, self.variant, self.rate_bits_per_pair, self.delta, seed)

    def with_rate(self, rate: float) -> "CodecConfig":
        return CodecConfig(self.n, self.dist, self.variant, rate, self.delta, self.seed)


@dataclass(frozen=True)
class BinAssignment:
    seed: int
    bin_count: int

    def __call__(self, symbols) -> int:
        return bin_of_symbols(self.seed, self.bin_count, tuple(symbols))


def bin_of_symbols(seed: int, bin_count: int, symbols: tuple[int, ...]) -> int:
    # bin counts are powers of two reducing one 64-bit hash, so for a fixed seed the
    # codebook at a higher rate refines the one at a lower rate
    if bin_count == 1:
        return 0
    h = hashlib.blake2b(bytes(symbols), digest_size=8, key=seed.to_bytes(8, "little"))
    return int.from_bytes(h.digest(), "little") % bin_count


def _source_symbols(ua, variant: SourceVariant) -> tuple[int, ...]:
    if variant.source_is_structure:
        if isinstance(ua, LabelledGraph):
            ua = canonicalize(ua)
        if not isinstance(ua, StructureKey):
            raise TypeError("structure variants encode a StructureKey or a labelled representative")
        return ua.canonical_edges
    if not isinstance(ua, LabelledGraph):
        raise TypeError(f"{variant.name} encodes a LabelledGraph, got {type(ua).__name__}")
    return ua.edges


def encode(ua, config: CodecConfig) -> int:
    return bin_of_symbols(config.seed, config.bin_count, _source_symbols(ua, config.variant))


def _normalized_self_information(lp: LogProb, m: int) -> float:
    return lp.self_information() / m if m else 0.0


def typicality_test(ua, ub, config: CodecConfig) -> bool:
    lp = log_conditional(ua, ub, config.variant, config.dist)
    if lp.impossible:
        return False
    return abs(_normalized_self_information(lp, config.m) - config.conditional_entropy) <= config.delta


class DecodeFailure(enum.Enum):
    NoneTypical = "none_typical"
    Ambiguous = "ambiguous"


@dataclass(frozen=True)
class DecodeResult:
    estimate: LabelledGraph | StructureKey | None
    failure: DecodeFailure | None = None
    candidates: int = 0  # typical candidates found in the bin

    @property
    def ok(self) -> bool:
        return self.failure is None


def candidate_objects(n: int, k: int, structures: bool):
    return list(enumerate_structures(n, k)) if structures else list(enumerate_graphs(n, k))


def decode(bin_index: int, ub, config: CodecConfig) -> DecodeResult:
    """Scan every candidate of the source kind for typical members of the bin."""
    hits = []
    for cand in candidate_objects(config.n, config.dist.ka, config.variant.source_is_structure):
        if encode(cand, config) == bin_index and typicality_test(cand, ub, config):
            hits.append(cand)
    if not hits:
        return DecodeResult(None, DecodeFailure.NoneTypical, 0)
    if len(hits) > 1:
        return DecodeResult(None, DecodeFailure.Ambiguous, len(hits))
    return DecodeResult(hits[0], None, 1)


# decomposed typicality for unweighted graphs given a structure --------------


@dataclass(frozen=True)
class TypicalSetParams:
    delta: float
    delta1: float
    delta2: float
    delta3: float

    @classmethod
    def from_model(cls, delta: float, dist: JointEdgeDistribution) -> "TypicalSetParams":
        _check_decomposable(dist)
        p00, p01, p10, p11 = dist.p00, dist.p01, dist.p10, dist.p11

        def slack(ratio: float) -> float:
            return delta / abs(math.log2(ratio)) if ratio != 1 else math.inf

        return cls(delta, slack(p10 / p00), slack(p01 / p00), slack(p11 * p00 / (p10 * p01)))


def _check_decomposable(dist: JointEdgeDistribution) -> None:
    if not dist.unweighted:
        raise ValueError("the decomposed test is for unweighted models")
    if min(dist.p00, dist.p01, dist.p10, dist.p11) <= 0:
        raise ValueError("the decomposed test needs all four edge probabilities positive")
    if dist.correlation_sign() == 0:
        raise DegenerateModelError("p11*p00 == p10*p01")


@dataclass(frozen=True)
class DecomposedTypicality:
    accepted: bool
    source_edges_ok: bool
    side_edges_ok: bool
    alignment_ok: bool
    optimum_statistic: int

    @property
    def failed_clauses(self) -> list[str]:
        names = ("source_edges", "side_edges", "alignment")
        flags = (self.source_edges_ok, self.side_edges_ok, self.alignment_ok)
        return [name for name, ok in zip(names, flags) if not ok]


def unweighted_typicality_decomposed(ga: LabelledGraph, sb, dist: JointEdgeDistribution, params: TypicalSetParams) -> DecomposedTypicality:
    _check_decomposable(dist)
    gb = sb.graph() if isinstance(sb, StructureKey) else sb
    m = ga.m
    source = ga.edge_count() / m
    side = gb.edge_count() / m
    stats = all_statistics(ga, gb)
    optimum = int(stats.max() if dist.correlation_sign() > 0 else stats.min())
    ok1 = abs(source - (dist.p10 + dist.p11)) <= params.delta1
    ok2 = abs(side - (dist.p01 + dist.p11)) <= params.delta2
    ok3 = abs(optimum / m - dist.p11) <= params.delta3
    return DecomposedTypicality(ok1 and ok2 and ok3, ok1, ok2, ok3, optimum)


# exact and simulated error rates --------------------------------------------


@dataclass
class ExactCodebookModel:
    """Everything about a codec configuration that does not depend on the seed.

    ``joint[u, v]`` is P(ua=u, ub=v) over enumerated outcomes and
    ``typical[u, v]`` marks membership of the typical set.
    """

    joint: np.ndarray
    typical: np.ndarray
    source_symbols: list[tuple[int, ...]]

    @property
    def atypical_probability(self) -> float:
        return float(self.joint[~self.typical].sum())


def _outcome_symbols(n: int, k: int, structures: bool) -> list[tuple[int, ...]]:
    if structures:
        return [s.canonical_edges for s in structure_index(n, k)[1]]
    return [tuple(int(x) for x in row) for row in graph_matrix(n, k)]


def _outcome_objects(n: int, k: int, structures: bool):
    if structures:
        return structure_index(n, k)[1]
    return [LabelledGraph(n, k, tuple(int(x) for x in row)) for row in graph_matrix(n, k)]


def exact_codebook_model(config: CodecConfig) -> ExactCodebookModel:
    """Enumerate (ua, ub) and evaluate the typicality test on every outcome pair."""
    check_perm_budget(config.n)
    joint = joint_outcome_table(config.n, config.dist, config.variant)
    sources = _outcome_objects(config.n, config.dist.ka, config.variant.source_is_structure)
    sides = _outcome_objects(config.n, config.dist.kb, config.variant.side_is_structure)
    typical = np.zeros(joint.shape, dtype=bool)
    for v, ub in enumerate(sides):
        for u, ua in enumerate(sources):
            typical[u, v] = typicality_test(ua, ub, config)
    symbols = _outcome_symbols(config.n, config.dist.ka, config.variant.source_is_structure)
    return ExactCodebookModel(joint, typical, symbols)


def exact_error_probability(model: ExactCodebookModel, config: CodecConfig) -> tuple[float, float, float]:
    """(error, none_typical, ambiguous) probabilities for the codebook of ``config.seed``."""
    bins = np.array([bin_of_symbols(config.seed, config.bin_count, s) for s in model.source_symbols], dtype=np.uint64)
    error = none_typical = ambiguous = 0.0
    for v in range(model.joint.shape[1]):
        column = model.joint[:, v]
        live = np.flatnonzero(column > 0)
        if len(live) == 0:
            continue
        typ = model.typical[:, v]
        occupancy = _occupancy(bins[typ], bins[live])
        # the true object is recovered iff it is typical and alone among typical candidates
        ok = typ[live] & (occupancy == 1)
        # a lone typical impostor is decoded wrongly without a decoder failure
        error += float(column[live][~ok].sum())
        none_typical += float(column[live][occupancy == 0].sum())
        ambiguous += float(column[live][occupancy > 1].sum())
    return error, none_typical, ambiguous


def _occupancy(filled: np.ndarray, query: np.ndarray) -> np.ndarray:
    """How many entries of ``filled`` share each bin in ``query`` (bin_count may be huge)."""
    keys, counts = np.unique(filled, return_counts=True)
    pos = np.searchsorted(keys, query)
    hit = pos < len(keys)
    hit[hit] = keys[pos[hit]] == query[hit]
    out = np.zeros(len(query), dtype=np.int64)
    out[hit] = counts[pos[hit]]
    return out


def error_bound(model: ExactCodebookModel, config: CodecConfig) -> float:
    """P(not typical) + 2^(-m delta)."""
    return model.atypical_probability + 2.0 ** (-config.m * config.delta)


def exact_average_error(config: CodecConfig, seeds, model: ExactCodebookModel | None = None) -> float:
    """Decoding error averaged exactly over all inputs and over the given codebook seeds."""
    if model is None:
        model = exact_codebook_model(config)
    errors = [exact_error_probability(model, config.with_seed(int(s)))[0] for s in seeds]
    return float(np.mean(errors))


@dataclass(frozen=True)
class SimulationResult:
    trials: int
    errors: int
    none_typical: int
    ambiguous: int
    bound: float

    @property
    def error_rate(self) -> float:
        return self.errors / self.trials

    @property
    def standard_error(self) -> float:
        p = self.error_rate
        return math.sqrt(p * (1 - p) / self.trials)


def simulate_error_rate(config: CodecConfig, trials: int, rng: np.random.Generator, model: ExactCodebookModel | None = None) -> SimulationResult:
    """Monte Carlo encode -> decode over sampled CER pairs for one codebook."""
    from .model import sample_pair_arrays

    if trials < 1:
        raise ValueError("trials must be >= 1")
    if model is None:
        model = exact_codebook_model(config)
    n, dist, variant = config.n, config.dist, config.variant
    bins = np.array([bin_of_symbols(config.seed, config.bin_count, s) for s in model.source_symbols], dtype=np.uint64)
    a_ids = _outcome_ids(n, dist.ka, variant.source_is_structure)
    b_ids = _outcome_ids(n, dist.kb, variant.side_is_structure)
    a_arr, b_arr = sample_pair_arrays(dist, n, rng, size=trials)
    errors = none = amb = 0
    for a, b in zip(a_arr, b_arr):
        u, v = a_ids[_code(a, dist.ka)], b_ids[_code(b, dist.kb)]
        hits = np.flatnonzero(model.typical[:, v] & (bins == bins[u]))
        if len(hits) != 1 or hits[0] != u:
            errors += 1
            none += len(hits) == 0
            amb += len(hits) > 1
    return SimulationResult(trials, errors, none, amb, error_bound(model, config))


def _code(row: np.ndarray, k: int) -> int:
    code = 0
    for x in row:
        code = code * (k + 1) + int(x)
    return code


@lru_cache(maxsize=32)
def _outcome_ids(n: int, k: int, structures: bool) -> np.ndarray:
    if structures:
        return structure_index(n, k)[0]
    return np.arange(len(graph_matrix(n, k)))
