"""Correlated Erdos-Renyi (CER) graph pairs.

Vertex pairs are i.i.d.: each pair carries a symbol pair ``(a, b)`` drawn from
a joint edge distribution ``p[a][b]``.  All log-probabilities are base 2.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .graphs import (
    LIMITS,
    CapabilityError,
    LabelledGraph,
    Permutation,
    StructureKey,
    apply_permutation,
    automorphism_count,
    check_perm_budget,
    graph_count,
    graph_matrix,
    num_pairs,
    pair_permutation_table,
    permutation_array,
    structure_index,
)
from .logmath import NEG_INF, Log2SumAccumulator, LogProb, entropy_bits, h2, log2sumexp

SUM_TOL = 1e-12
# rows of the pair-permutation table processed at once
CHUNK_ROWS = 1 << 16
TIE_SLACK = 1e-9


@dataclass(frozen=True)
class JointEdgeDistribution:
    ka: int
    kb: int
    p: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        rows = tuple(tuple(float(x) for x in row) for row in self.p)
        object.__setattr__(self, "p", rows)
        if len(rows) != self.ka + 1 or any(len(r) != self.kb + 1 for r in rows):
            raise ValueError(f"p must be a {self.ka + 1}x{self.kb + 1} matrix")
        arr = np.array(rows)
        if (arr < 0).any() or not np.isfinite(arr).all():
            raise ValueError("probabilities must be finite and non-negative")
        if abs(arr.sum() - 1.0) > SUM_TOL:
            raise ValueError(f"probabilities sum to {arr.sum()!r}, not 1")

    @classmethod
    def from_matrix(cls, p) -> "JointEdgeDistribution":
        arr = np.asarray(p, dtype=float)
        return cls(arr.shape[0] - 1, arr.shape[1] - 1, tuple(map(tuple, arr.tolist())))

    @classmethod
    def from_json(cls, doc: dict | str | Path) -> "JointEdgeDistribution":
        if isinstance(doc, Path) or (isinstance(doc, str) and not doc.lstrip().startswith("{")):
            doc = json.loads(Path(doc).read_text())
        elif isinstance(doc, str):
            doc = json.loads(doc)
        if doc.get("model") == "subsampling":
            return subsampling_model(float(doc["p"]), float(doc["gamma"]))
        if "model" in doc:
            raise ValueError(f"unknown model {doc['model']!r}")
        dist = cls.from_matrix(doc["p"])
        if ("ka" in doc and doc["ka"] != dist.ka) or ("kb" in doc and doc["kb"] != dist.kb):
            raise ValueError("ka/kb disagree with the shape of p")
        return dist

    def to_json(self) -> dict:
        return {"ka": self.ka, "kb": self.kb, "p": [list(r) for r in self.p]}

    @cached_property
    def matrix(self) -> np.ndarray:
        arr = np.array(self.p)
        arr.setflags(write=False)
        return arr

    @cached_property
    def log_matrix(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            arr = np.log2(self.matrix)
        arr.setflags(write=False)
        return arr

    @cached_property
    def marginal_a(self) -> np.ndarray:
        return self.matrix.sum(axis=1)

    @cached_property
    def marginal_b(self) -> np.ndarray:
        return self.matrix.sum(axis=0)

    def log_marginal(self, side: str) -> np.ndarray:
        marg = self.marginal_a if side == "a" else self.marginal_b
        with np.errstate(divide="ignore"):
            return np.log2(marg)

    @property
    def support(self) -> frozenset[tuple[int, int]]:
        return frozenset(
            (a, b) for a in range(self.ka + 1) for b in range(self.kb + 1) if self.p[a][b] > 0
        )

    @property
    def min_support_prob(self) -> float:
        return min(self.p[a][b] for a, b in self.support)

    @property
    def unweighted(self) -> bool:
        return self.ka == 1 and self.kb == 1

    def _entry(self, a: int, b: int) -> float:
        if not self.unweighted:
            raise ValueError("p00/p01/p10/p11 are defined for unweighted models only")
        return self.p[a][b]

    p00 = property(lambda self: self._entry(0, 0))
    p01 = property(lambda self: self._entry(0, 1))
    p10 = property(lambda self: self._entry(1, 0))
    p11 = property(lambda self: self._entry(1, 1))

    def correlation_sign(self) -> int:
        """Sign of p11 p00 - p10 p01 (+1 favours maximal alignment, -1 minimal)."""
        diff = self.p11 * self.p00 - self.p10 * self.p01
        return (diff > 0) - (diff < 0)


def subsampling_model(p: float, gamma: float) -> JointEdgeDistribution:
    """Both graphs keep each edge of a G(n, p) parent independently with prob. gamma."""
    if not (0.0 <= p <= 1.0 and 0.0 <= gamma <= 1.0):
        raise ValueError("p and gamma must lie in [0, 1]")
    p01 = p * gamma * (1 - gamma)
    p11 = p * gamma**2
    p00 = (1 - p) + p * (1 - gamma) ** 2
    return JointEdgeDistribution(1, 1, ((p00, p01), (p01, p11)))


def independent_model(qa, qb) -> JointEdgeDistribution:
    return JointEdgeDistribution.from_matrix(np.outer(qa, qb))


class SourceVariant(enum.Enum):
    GraphGivenGraph = "GG"
    GraphGivenStructure = "GS"
    StructureGivenGraph = "SG"
    StructureGivenStructure = "SS"

    @property
    def source_is_structure(self) -> bool:
        return self.value[0] == "S"

    @property
    def side_is_structure(self) -> bool:
        return self.value[1] == "S"

    @classmethod
    def parse(cls, text: str) -> "SourceVariant":
        for v in cls:
            if text in (v.name, v.value):
                return v
        raise ValueError(f"unknown variant {text!r}")


@dataclass(frozen=True)
class EntropyReport:
    H_A: float
    H_B: float
    H_AB: float
    H_A_given_B: float
    H_B_given_A: float


def entropy_report(dist: JointEdgeDistribution) -> EntropyReport:
    h_ab = entropy_bits(dist.matrix)
    h_a = entropy_bits(dist.marginal_a)
    h_b = entropy_bits(dist.marginal_b)
    return EntropyReport(h_a, h_b, h_ab, max(h_ab - h_b, 0.0), max(h_ab - h_a, 0.0))


def subsampling_conditional_entropy(p: float, gamma: float) -> float:
    """Closed form of H(A|B) for the subsampling model."""
    pg = p * gamma
    if pg >= 1.0:
        return 0.0
    return pg * h2(gamma) + (1 - pg) * h2(pg * (1 - gamma) / (1 - pg))


# sampling and labelled-graph probabilities ----------------------------------


def sample_pair_arrays(dist: JointEdgeDistribution, n: int, rng: np.random.Generator, size: int | None = None):
    """Raw symbol arrays for ``size`` independent pairs (or one pair if size is None)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    m = num_pairs(n)
    shape = (m,) if size is None else (size, m)
    flat = rng.choice(dist.matrix.size, size=shape, p=dist.matrix.ravel())
    return flat // (dist.kb + 1), flat % (dist.kb + 1)


def sample_pair(dist: JointEdgeDistribution, n: int, rng: np.random.Generator):
    a, b = sample_pair_arrays(dist, n, rng)
    return LabelledGraph(n, dist.ka, tuple(a.tolist())), LabelledGraph(n, dist.kb, tuple(b.tolist()))


def _check_pair(ga: LabelledGraph, gb: LabelledGraph, dist: JointEdgeDistribution) -> None:
    if ga.n != gb.n:
        raise ValueError(f"graphs on {ga.n} and {gb.n} vertices")
    if ga.k > dist.ka or gb.k > dist.kb:
        raise ValueError("graph alphabet exceeds the distribution's alphabet")


def _counted_log_joint(a: np.ndarray, b: np.ndarray, log_matrix: np.ndarray) -> float:
    """sum of log p[a_e][b_e], grouped by symbol pair in a fixed order.

    Pair-count matrices are exact integers, so two edge vectors with the same
    joint type always produce bit-identical results.
    """
    ka1, kb1 = log_matrix.shape
    counts = np.bincount(a.astype(np.int64) * kb1 + b, minlength=ka1 * kb1)
    total = 0.0
    for c, lp in zip(counts.tolist(), log_matrix.ravel().tolist()):
        if c:
            total += c * lp
    return total


def log_joint_graph_prob(ga: LabelledGraph, gb: LabelledGraph, dist: JointEdgeDistribution) -> LogProb:
    _check_pair(ga, gb, dist)
    if ga.m == 0:
        return LogProb(0.0)
    return LogProb.of(_counted_log_joint(ga.as_array(), gb.as_array(), dist.log_matrix))


def log_marginal_graph_prob(g: LabelledGraph, dist: JointEdgeDistribution, side: str = "a") -> LogProb:
    if g.m == 0:
        return LogProb(0.0)
    return LogProb.of(float(dist.log_marginal(side)[g.as_array()].sum()))


def perm_log_joint_chunks(a: np.ndarray, b: np.ndarray, log_matrix: np.ndarray, n: int):
    """Yield ``(offset, values)`` with ``values[r] = log2 P(a, b[T[r]])`` chunk by chunk."""
    table = pair_permutation_table(n)
    if table.shape[1] == 0:
        yield 0, np.zeros(len(table))
        return
    row_logs = log_matrix[a]  # (m, kb+1): log p[a_e][.] for each pair e
    cols = np.arange(len(a))
    linear = row_logs.shape[1] == 2 and np.isfinite(row_logs).all()
    if linear:
        # binary b: log p[a_e][b'] = row_logs[e, 0] + b' * (row_logs[e, 1] - row_logs[e, 0])
        base = float(row_logs[:, 0].sum())
        slope = row_logs[:, 1] - row_logs[:, 0]
    for start in range(0, len(table), CHUNK_ROWS):
        permuted_b = b[table[start : start + CHUNK_ROWS]]
        if linear:
            yield start, base + permuted_b @ slope
        else:
            yield start, row_logs[cols, permuted_b].sum(axis=1)


def perm_log_joint_values(ga: LabelledGraph, gb: LabelledGraph, dist: JointEdgeDistribution) -> np.ndarray:
    """Over all permutations s (lexicographic), log2 P(ga, apply_permutation(gb, s^-1))."""
    _check_pair(ga, gb, dist)
    parts = [v for _, v in perm_log_joint_chunks(ga.as_array(), gb.as_array(), dist.log_matrix, ga.n)]
    return np.concatenate(parts)


def log_perm_sum(ga: LabelledGraph, gb: LabelledGraph, dist: JointEdgeDistribution) -> float:
    """log2 of sum over all pi of P(ga, pi(gb)), streamed."""
    _check_pair(ga, gb, dist)
    acc = Log2SumAccumulator()
    for _, values in perm_log_joint_chunks(ga.as_array(), gb.as_array(), dist.log_matrix, ga.n):
        acc.add(values)
    return acc.result()


def max_perm_log_joint(ga: LabelledGraph, gb: LabelledGraph, dist: JointEdgeDistribution):
    """max over pi of log2 P(ga, apply_permutation(gb, pi)), with a maximising pi."""
    _check_pair(ga, gb, dist)
    a, b = ga.as_array(), gb.as_array()
    table = pair_permutation_table(ga.n)
    best, best_row = NEG_INF, 0
    for start, values in perm_log_joint_chunks(a, b, dist.log_matrix, ga.n):
        top = values.max()
        if top == NEG_INF:
            continue
        # rescore near-ties exactly so the result does not depend on summation order
        for r in np.flatnonzero(values >= top - TIE_SLACK):
            exact = _counted_log_joint(a, b[table[start + r]], dist.log_matrix)
            if exact > best:
                best, best_row = exact, start + int(r)
    sigma = Permutation(tuple(int(x) for x in permutation_array(ga.n)[best_row]))
    return LogProb.of(best), sigma.inverse()


def argmax_perm_log_joint(ga: LabelledGraph, gb: LabelledGraph, dist: JointEdgeDistribution, rtol: float = 1e-12):
    """Every pi attaining the maximum of log2 P(ga, apply_permutation(gb, pi))."""
    values = perm_log_joint_values(ga, gb, dist)
    top = values.max()
    if top == NEG_INF:
        rows = np.arange(len(values))
    else:
        rows = np.flatnonzero(values >= top - rtol * max(1.0, abs(top)))
    perms = permutation_array(ga.n)
    return [Permutation(tuple(int(x) for x in perms[r])).inverse() for r in rows]


def max_two_sided_log_joint(ga: LabelledGraph, gb: LabelledGraph, dist: JointEdgeDistribution) -> LogProb:
    """max over (pi_a, pi_b) of log2 P(pi_a(ga), pi_b(gb)), by direct double enumeration."""
    _check_pair(ga, gb, dist)
    table = pair_permutation_table(ga.n)
    a_orbit = ga.as_array()[table]
    b_orbit = gb.as_array()[table]
    best = NEG_INF
    for row in a_orbit:
        values = dist.log_matrix[row[None, :], b_orbit].sum(axis=1)
        top = values.max()
        if top == NEG_INF:
            continue
        for r in np.flatnonzero(values >= top - TIE_SLACK):
            best = max(best, _counted_log_joint(row, b_orbit[r], dist.log_matrix))
    return LogProb.of(best)


# structures and conditionals -------------------------------------------------


def log_structure_prob(s: StructureKey | LabelledGraph, dist: JointEdgeDistribution, side: str = "a") -> LogProb:
    """log2 P_S(s) = log2[(n!/|Aut|) P_G(g)] for any labelling g of s."""
    g = s.graph() if isinstance(s, StructureKey) else s
    check_perm_budget(g.n)
    lp = log_marginal_graph_prob(g, dist, side)
    if lp.impossible:
        return lp
    return LogProb(lp.bits + math.log2(math.factorial(g.n)) - math.log2(automorphism_count(g)))


def _as_graph(u, want_structure: bool, role: str) -> LabelledGraph:
    if isinstance(u, StructureKey):
        if not want_structure:
            raise TypeError(f"{role} must be a LabelledGraph for this variant, got a StructureKey")
        return u.graph()
    if isinstance(u, LabelledGraph):
        return u
    raise TypeError(f"{role} must be a LabelledGraph or StructureKey")


def log_conditional(ua, ub, variant: SourceVariant, dist: JointEdgeDistribution) -> LogProb:
    """log2 P(ua | ub) for the given source/side-information variant.

    Structure arguments may be passed as a ``StructureKey`` or as any labelled
    representative.  The conditioning event having probability zero yields an
    impossible LogProb.
    """
    ga = _as_graph(ua, variant.source_is_structure, "ua")
    gb = _as_graph(ub, variant.side_is_structure, "ub")
    _check_pair(ga, gb, dist)
    log_pb = log_marginal_graph_prob(gb, dist, "b")
    if log_pb.impossible:
        return LogProb.zero()

    if variant is SourceVariant.GraphGivenGraph:
        joint = log_joint_graph_prob(ga, gb, dist)
        return joint if joint.impossible else LogProb(joint.bits - log_pb.bits)

    check_perm_budget(ga.n)
    total = log_perm_sum(ga, gb, dist)
    if total == NEG_INF:
        return LogProb.zero()
    if variant is SourceVariant.GraphGivenStructure:
        # denominator: sum over pi of P_B(pi(gb)) = n! P_B(gb)
        return LogProb(total - math.log2(math.factorial(ga.n)) - log_pb.bits)
    # Sa|Gb: sum_pi P(pi(ga), gb) = sum_pi P(ga, pi^-1(gb)).
    # Sa|Sb: the (pi_a, pi_b) double sum equals n! times the single sum, which
    # cancels the n! of the denominator sum_pi P_B(pi(gb)).
    return LogProb(total - math.log2(automorphism_count(ga)) - log_pb.bits)


def log_conditional_unweighted_expansion(ga: LabelledGraph, sb: StructureKey | LabelledGraph, dist: JointEdgeDistribution) -> LogProb:
    """log2 P(ga | sb) for unweighted models through the alignment-statistic expansion.

    P(ga|sb) = (1/n!) (p00/(p10+p00))^m (p10/p00)^|E(ga)|
               (p01(p10+p00) / (p00(p01+p11)))^|E(sb)| sum_pi r^{stat(pi)},
    with r = p11 p00 / (p10 p01).  Requires all four entries positive.
    """
    if not dist.unweighted:
        raise ValueError("the expansion is for unweighted models")
    p00, p01, p10, p11 = dist.p00, dist.p01, dist.p10, dist.p11
    if min(p00, p01, p10, p11) <= 0:
        raise ValueError("the expansion needs all four edge probabilities positive")
    gb = sb.graph() if isinstance(sb, StructureKey) else sb
    n, m = ga.n, ga.m
    check_perm_budget(n)
    a = ga.as_array()
    stats = gb.as_array()[pair_permutation_table(n)] @ a if m else np.zeros(math.factorial(n))
    log_r = math.log2(p11 * p00 / (p10 * p01))
    bits = (
        -math.log2(math.factorial(n))
        + m * math.log2(p00 / (p10 + p00))
        + int(a.sum()) * math.log2(p10 / p00)
        + gb.edge_count() * math.log2(p01 * (p10 + p00) / (p00 * (p01 + p11)))
        + log2sumexp(stats * log_r)
    )
    return LogProb(bits)


# exact enumeration of the joint law -----------------------------------------


def joint_graph_table(n: int, dist: JointEdgeDistribution) -> np.ndarray:
    """P(ga, gb) for every enumerated pair: rows follow graph_matrix(n, ka), columns graph_matrix(n, kb)."""
    count = graph_count(n, dist.ka) * graph_count(n, dist.kb)
    if count > LIMITS.max_graph_count:
        raise CapabilityError(f"{count} graph pairs exceed the enumeration budget")
    ga, gb = graph_matrix(n, dist.ka), graph_matrix(n, dist.kb)
    logp = np.zeros((len(ga), len(gb)))
    for e in range(num_pairs(n)):
        logp += dist.log_matrix[ga[:, e][:, None], gb[:, e][None, :]]
    return np.exp2(logp)


def _collapse(n: int, k: int, want_structure: bool):
    """One-hot matrix mapping graphs to (graph | structure) outcomes."""
    count = graph_count(n, k)
    if not want_structure:
        return None
    ids, keys = structure_index(n, k)
    onehot = np.zeros((count, len(keys)))
    onehot[np.arange(count), ids] = 1.0
    return onehot


def joint_outcome_table(n: int, dist: JointEdgeDistribution, variant: SourceVariant, table: np.ndarray | None = None) -> np.ndarray:
    """P(ua, ub) over enumerated outcomes (graphs in lexicographic order, structures by first appearance)."""
    if table is None:
        table = joint_graph_table(n, dist)
    ca = _collapse(n, dist.ka, variant.source_is_structure)
    cb = _collapse(n, dist.kb, variant.side_is_structure)
    out = table if ca is None else ca.T @ table
    return out if cb is None else out @ cb


def conditional_entropy_from_table(joint: np.ndarray) -> float:
    pb = joint.sum(axis=0, keepdims=True)
    mask = joint > 0
    cond = np.where(mask, joint / np.where(pb > 0, pb, 1.0), 1.0)
    return float(-(joint[mask] * np.log2(cond[mask])).sum())


def exact_conditional_entropy(n: int, dist: JointEdgeDistribution, variant: SourceVariant) -> float:
    """H(Ua | Ub) in bits by exhaustive enumeration of the joint law."""
    check_perm_budget(n)
    return conditional_entropy_from_table(joint_outcome_table(n, dist, variant))


def exact_entropy_terms(n: int, dist: JointEdgeDistribution) -> dict[str, float]:
    """Every graph/structure entropy used in the conditional-entropy sandwich, exactly."""
    check_perm_budget(n)
    table = joint_graph_table(n, dist)
    terms: dict[str, float] = {}
    for variant in SourceVariant:
        joint = joint_outcome_table(n, dist, variant, table)
        ua = "S" if variant.source_is_structure else "G"
        ub = "S" if variant.side_is_structure else "G"
        terms[f"H({ua}a|{ub}b)"] = conditional_entropy_from_table(joint)
    pb = table.sum(axis=0)
    pa = table.sum(axis=1)
    cb = _collapse(n, dist.kb, True)
    ca = _collapse(n, dist.ka, True)
    terms["H(Gb)"] = entropy_bits(pb)
    terms["H(Sb)"] = entropy_bits(pb @ cb)
    terms["H(Ga)"] = entropy_bits(pa)
    terms["H(Sa)"] = entropy_bits(pa @ ca)
    terms["H(Gb|Sb)"] = terms["H(Gb)"] - terms["H(Sb)"]
    terms["H(Ga|Sa)"] = terms["H(Ga)"] - terms["H(Sa)"]
    return terms


def marginal_graph_probs(n: int, dist: JointEdgeDistribution, side: str = "a") -> np.ndarray:
    """P_G(g) for every graph of one side, in graph_matrix order."""
    k = dist.ka if side == "a" else dist.kb
    graphs = graph_matrix(n, k)
    if graphs.shape[1] == 0:
        return np.ones(1)
    return np.exp2(dist.log_marginal(side)[graphs].sum(axis=1))


def exact_structure_entropy(n: int, dist: JointEdgeDistribution, side: str = "a") -> float:
    """H(S) for one side's structure, by enumeration."""
    check_perm_budget(n)
    k = dist.ka if side == "a" else dist.kb
    ids, keys = structure_index(n, k)
    probs = np.bincount(ids, weights=marginal_graph_probs(n, dist, side), minlength=len(keys))
    return entropy_bits(probs)
