"""Graph alignment for unweighted graphs.

The alignment statistic of a permutation pi is the number of vertex pairs
with an edge in both graphs after relabelling: sum_{i<j} a_ij b_{pi(i) pi(j)}.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .graphs import (
    LabelledGraph,
    Permutation,
    StructureKey,
    check_perm_budget,
    num_pairs,
    pair_index,
    pair_permutation_table,
    pairs,
    permutation_array,
    _lexmin_rows,
)
from .model import JointEdgeDistribution

MAX_WITNESSES = 64


class DegenerateModelError(ValueError):
    """p11 p00 == p10 p01: every labelling of a structure is equally likely."""


def _require_unweighted(*graphs: LabelledGraph) -> None:
    for g in graphs:
        if g.k != 1:
            raise ValueError("alignment statistics are defined for unweighted graphs (k=1)")
    if len({g.n for g in graphs}) > 1:
        raise ValueError("graphs must have the same number of vertices")


def alignment_statistic(ga: LabelledGraph, gb: LabelledGraph, p: Permutation) -> int:
    _require_unweighted(ga, gb)
    if p.n != ga.n:
        raise ValueError("permutation size mismatch")
    return sum(
        a * gb.edges[pair_index(p(i), p(j), ga.n)]
        for (i, j), a in zip(pairs(ga.n), ga.edges)
        if a
    )


def matching_error(ga: LabelledGraph, gb: LabelledGraph, p: Permutation) -> int:
    _require_unweighted(ga, gb)
    if p.n != ga.n:
        raise ValueError("permutation size mismatch")
    total = 0
    for (i, j), a in zip(pairs(ga.n), ga.edges):
        b = gb.edges[pair_index(p(i), p(j), ga.n)]
        total += (1 - a) * b + a * (1 - b)
    return total


def all_statistics(ga: LabelledGraph, gb: LabelledGraph) -> np.ndarray:
    """Alignment statistic for every permutation in lexicographic order."""
    _require_unweighted(ga, gb)
    check_perm_budget(ga.n)
    table = pair_permutation_table(ga.n)
    if ga.m == 0:
        return np.zeros(len(table), dtype=np.int64)
    return gb.as_array()[table] @ ga.as_array()


@dataclass(frozen=True)
class AlignmentResult:
    value: int
    count: int
    witnesses: tuple[Permutation, ...]  # lexicographically first MAX_WITNESSES maximisers

    @property
    def witness(self) -> Permutation:
        return self.witnesses[0]


def optimize_alignment(ga: LabelledGraph, gb: LabelledGraph, sense: str = "max", prune: bool = False) -> AlignmentResult:
    """Exact optimum of the alignment statistic over all n! permutations."""
    if sense not in ("max", "min"):
        raise ValueError("sense must be 'max' or 'min'")
    if prune:
        return _branch_and_bound(ga, gb, sense)
    stats = all_statistics(ga, gb)
    value = int(stats.max() if sense == "max" else stats.min())
    rows = np.flatnonzero(stats == value)
    perms = permutation_array(ga.n)
    witnesses = tuple(Permutation(tuple(int(x) for x in perms[r])) for r in rows[:MAX_WITNESSES])
    return AlignmentResult(value, len(rows), witnesses)


def _branch_and_bound(ga: LabelledGraph, gb: LabelledGraph, sense: str) -> AlignmentResult:
    """Depth-first search over partial permutations with an optimistic bound.

    Vertices are assigned in order 0..n-1.  Once i and j are both assigned the
    term a_ij b_pi(i)pi(j) is fixed; each open a-edge can still contribute at
    most 1 (max) or at least 0 (min).
    """
    _require_unweighted(ga, gb)
    check_perm_budget(ga.n)
    n = ga.n
    sign = 1 if sense == "max" else -1
    A = np.zeros((n, n), dtype=np.int64)
    B = np.zeros((n, n), dtype=np.int64)
    for (i, j), a, b in zip(pairs(n), ga.edges, gb.edges):
        A[i, j] = A[j, i] = a
        B[i, j] = B[j, i] = b
    # a-edges with the larger endpoint >= v are still open after assigning 0..v-1
    open_edges = [int(np.triu(A)[:, v:].sum()) for v in range(n + 1)]

    best = [None]
    found: list[tuple[int, ...]] = []
    count = [0]
    mapping = [0] * n
    used = [False] * n

    def visit(v: int, score: int) -> None:
        if v == n:
            s = sign * score
            if best[0] is None or s > best[0]:
                best[0] = s
                found.clear()
                count[0] = 0
            if s == best[0]:
                count[0] += 1
                if len(found) < MAX_WITNESSES:
                    found.append(tuple(mapping))
            return
        optimistic = sign * score + (open_edges[v] if sign > 0 else 0)
        if best[0] is not None and optimistic < best[0]:
            return
        for x in range(n):
            if used[x]:
                continue
            gain = sum(A[u, v] * B[mapping[u], x] for u in range(v))
            used[x] = True
            mapping[v] = x
            visit(v + 1, score + gain)
            used[x] = False

    visit(0, 0)
    return AlignmentResult(
        sign * best[0], count[0], tuple(Permutation(m) for m in found)
    )


def map_deanonymize(ga: LabelledGraph, sb: StructureKey | LabelledGraph, dist: JointEdgeDistribution) -> LabelledGraph:
    """MAP labelling of ``sb`` given the correlated labelled graph ``ga``.

    Optimal labellings maximise (p11 p00 > p10 p01) or minimise the alignment
    statistic; ties go to the lexicographically smallest edge sequence.
    """
    gb = sb.graph() if isinstance(sb, StructureKey) else sb
    _require_unweighted(ga, gb)
    if not dist.unweighted:
        raise ValueError("MAP deanonymization needs an unweighted model")
    if min(dist.p00, dist.p01, dist.p10, dist.p11) <= 0:
        raise ValueError("all four edge probabilities must be positive")
    sign = dist.correlation_sign()
    if sign == 0:
        raise DegenerateModelError("p11*p00 == p10*p01: all labellings are equiprobable")
    check_perm_budget(ga.n)
    if ga.m == 0:
        return gb
    labellings = gb.as_array()[pair_permutation_table(ga.n)]
    stats = labellings @ ga.as_array()
    target = stats.max() if sign > 0 else stats.min()
    candidates = labellings[stats == target]
    best = candidates[_lexmin_rows(candidates)[0]]
    return LabelledGraph(ga.n, 1, tuple(int(x) for x in best))


# permutation shapes, expectation and concentration ---------------------------


@dataclass(frozen=True)
class PermutationShape:
    fixed_points: int
    transpositions: int

    @property
    def preserved_pairs(self) -> int:
        return math.comb(self.fixed_points, 2) + self.transpositions

    def validate(self, n: int) -> None:
        if self.fixed_points < 0 or self.transpositions < 0:
            raise ValueError("counts must be non-negative")
        if self.fixed_points + 2 * self.transpositions > n:
            raise ValueError(f"shape does not fit on {n} vertices")


def permutation_shape(p: Permutation) -> PermutationShape:
    fixed = sum(1 for i in range(p.n) if p(i) == i)
    swaps = sum(1 for i in range(p.n) if p(i) > i and p(p(i)) == i)
    return PermutationShape(fixed, swaps)


def preserved_pair_count(p: Permutation) -> int:
    """Direct count of pairs {i, j} with {pi(i), pi(j)} = {i, j}."""
    return sum(1 for i, j in pairs(p.n) if {p(i), p(j)} == {i, j})


def expected_statistic(shape: PermutationShape, dist: JointEdgeDistribution, n: int) -> float:
    """E[sum a_ij b_pi(i)pi(j)] for a permutation of the given shape."""
    shape.validate(n)
    l = shape.preserved_pairs
    m = num_pairs(n)
    independent = (dist.p10 + dist.p11) * (dist.p01 + dist.p11)
    return l * dist.p11 + (m - l) * independent


@dataclass(frozen=True)
class ConcentrationBounds:
    single_permutation: float  # P(stat - E stat > m delta) for one fixed pi
    union: float  # same event for the max over pi, via n! <= n^n
    map_failure: float  # MAP estimator failure bound (unweighted model)


def concentration_bounds(n: int, delta: float, dist: JointEdgeDistribution | None = None) -> ConcentrationBounds:
    m = num_pairs(n)
    exponent = m * delta**2 / 2
    single = min(1.0, math.exp(-exponent))
    union = min(1.0, math.exp(-(exponent - n * math.log(n)))) if n > 0 else 1.0
    map_fail = float("nan")
    if dist is not None and dist.unweighted:
        gap = (math.sqrt(dist.p00 * dist.p11) - math.sqrt(dist.p01 * dist.p10)) ** 2
        map_fail = min(1.0, 2.0 ** (-((n - 2) * gap - math.log2(n))))
    return ConcentrationBounds(single, union, map_fail)
