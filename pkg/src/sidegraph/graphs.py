"""Labelled graphs, vertex relabelling and brute-force canonical structures.

A graph on ``n`` vertices is stored as its upper-triangular symbol vector in
row-major pair order ``(0,1), (0,2), ..., (0,n-1), (1,2), ...``.  Permutations
are 0-based internally; the text formats use 1-based labels.

Everything that touches all ``n!`` relabellings goes through a cached
pair-permutation table so that a whole orbit is a single numpy gather.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np


class CapabilityError(RuntimeError):
    """Raised when an exhaustive computation exceeds its configured budget."""


@dataclass
class Limits:
    max_perm_n: int = 10
    max_graph_count: int = 2**24


LIMITS = Limits()


def num_pairs(n: int) -> int:
    return n * (n - 1) // 2


def pair_index(i: int, j: int, n: int) -> int:
    """Position of the unordered pair {i, j} (0-based) in the edge vector."""
    if i == j:
        raise ValueError("self-loops are not representable")
    if i > j:
        i, j = j, i
    return i * n - i * (i + 1) // 2 + (j - i - 1)


@lru_cache(maxsize=None)
def pairs(n: int) -> tuple[tuple[int, int], ...]:
    return tuple(itertools.combinations(range(n), 2))


def check_perm_budget(n: int) -> None:
    if n > LIMITS.max_perm_n:
        raise CapabilityError(
            f"n={n} exceeds the permutation enumeration limit ({LIMITS.max_perm_n})"
        )


@lru_cache(maxsize=None)
def _pair_lookup(n: int) -> np.ndarray:
    lut = np.zeros((n, n), dtype=np.int64)
    for idx, (i, j) in enumerate(pairs(n)):
        lut[i, j] = lut[j, i] = idx
    return lut


def permutation_array(n: int) -> np.ndarray:
    """All permutations of ``range(n)`` in lexicographic order, shape (n!, n)."""
    check_perm_budget(n)
    return _permutation_array(n)


@lru_cache(maxsize=None)
def _permutation_array(n: int) -> np.ndarray:
    arr = np.array(list(itertools.permutations(range(n))), dtype=np.int8)
    arr.setflags(write=False)
    return arr.reshape(math.factorial(n), n)


def pair_permutation_table(n: int) -> np.ndarray:
    """``T[r, idx(i,j)] = idx(s(i), s(j))`` for the r-th permutation ``s``.

    For an edge vector ``b``, ``b[T[r]]`` is the vector with entries
    ``b[s(i), s(j)]``, i.e. ``apply_permutation(b, s^-1)``.
    """
    check_perm_budget(n)
    return _pair_permutation_table(n)


@lru_cache(maxsize=None)
def _pair_permutation_table(n: int) -> np.ndarray:
    perms = _permutation_array(n).astype(np.int64)
    m = num_pairs(n)
    if m == 0:
        return np.zeros((len(perms), 0), dtype=np.uint8)
    iu, ju = np.array(pairs(n)).T
    table = _pair_lookup(n)[perms[:, iu], perms[:, ju]].astype(np.uint8)
    table.setflags(write=False)
    return table


@dataclass(frozen=True)
class LabelledGraph:
    n: int
    k: int
    edges: tuple[int, ...]

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        edges = tuple(int(s) for s in self.edges)
        object.__setattr__(self, "edges", edges)
        if len(edges) != num_pairs(self.n):
            raise ValueError(
                f"expected {num_pairs(self.n)} symbols for n={self.n}, got {len(edges)}"
            )
        if any(s < 0 or s > self.k for s in edges):
            raise ValueError(f"symbols must lie in 0..{self.k}")

    @classmethod
    def from_edge_list(cls, n: int, edge_list, k: int = 1) -> "LabelledGraph":
        """Build from 1-based ``(i, j)`` or ``(i, j, weight)`` tuples."""
        vec = [0] * num_pairs(n)
        for e in edge_list:
            i, j = e[0], e[1]
            w = e[2] if len(e) > 2 else 1
            vec[pair_index(i - 1, j - 1, n)] = w
        return cls(n, k, tuple(vec))

    @classmethod
    def empty(cls, n: int, k: int = 1) -> "LabelledGraph":
        return cls(n, k, (0,) * num_pairs(n))

    @classmethod
    def complete(cls, n: int, k: int = 1, weight: int = 1) -> "LabelledGraph":
        return cls(n, k, (weight,) * num_pairs(n))

    @property
    def m(self) -> int:
        return num_pairs(self.n)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.edges, dtype=np.int64)

    def edge_count(self) -> int:
        """Number of vertex pairs carrying a nonzero symbol."""
        return sum(1 for s in self.edges if s)

    def weight(self, i: int, j: int) -> int:
        """Symbol on the pair {i, j}, 1-based labels."""
        return self.edges[pair_index(i - 1, j - 1, self.n)]

    def edge_list(self) -> list[tuple[int, int, int]]:
        return [
            (i + 1, j + 1, s) for (i, j), s in zip(pairs(self.n), self.edges) if s
        ]

    def to_text(self) -> str:
        return f"{self.n} {self.k}\n" + " ".join(map(str, self.edges))

    @classmethod
    def from_text(cls, text: str) -> "LabelledGraph":
        tokens = text.split()
        if len(tokens) < 2:
            raise ValueError("graph text needs an 'n k' header")
        n, k = int(tokens[0]), int(tokens[1])
        return cls(n, k, tuple(int(t) for t in tokens[2:]))


@dataclass(frozen=True)
class Permutation:
    """Bijection on vertex labels, stored 0-based: ``mapping[i]`` is the image of i."""

    mapping: tuple[int, ...]

    def __post_init__(self):
        mapping = tuple(int(x) for x in self.mapping)
        object.__setattr__(self, "mapping", mapping)
        if sorted(mapping) != list(range(len(mapping))):
            raise ValueError(f"not a permutation of 0..{len(mapping) - 1}: {mapping}")

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(tuple(range(n)))

    @classmethod
    def from_one_based(cls, images: Sequence[int]) -> "Permutation":
        return cls(tuple(x - 1 for x in images))

    @classmethod
    def from_cycles(cls, n: int, cycles: Sequence[Sequence[int]]) -> "Permutation":
        """Cycle notation with 1-based labels, e.g. ``[(1, 2, 3)]`` for 1->2->3->1."""
        mapping = list(range(n))
        for cyc in cycles:
            for a, b in zip(cyc, list(cyc[1:]) + [cyc[0]]):
                mapping[a - 1] = b - 1
        return cls(tuple(mapping))

    @property
    def n(self) -> int:
        return len(self.mapping)

    def __call__(self, i: int) -> int:
        return self.mapping[i]

    def one_based(self) -> tuple[int, ...]:
        return tuple(x + 1 for x in self.mapping)

    def inverse(self) -> "Permutation":
        inv = [0] * self.n
        for i, x in enumerate(self.mapping):
            inv[x] = i
        return Permutation(tuple(inv))

    def is_identity(self) -> bool:
        return all(i == x for i, x in enumerate(self.mapping))


def compose(q: Permutation, p: Permutation) -> Permutation:
    """``q o p``: apply p first, then q."""
    if q.n != p.n:
        raise ValueError("permutations act on different vertex sets")
    return Permutation(tuple(q.mapping[x] for x in p.mapping))


def apply_permutation(g: LabelledGraph, p: Permutation) -> LabelledGraph:
    """Relabel ``g`` by ``p``: the new pair (i, j) carries g's symbol at (p^-1(i), p^-1(j))."""
    if p.n != g.n:
        raise ValueError(f"permutation on {p.n} labels applied to graph on {g.n}")
    # new (p(u), p(v)) = old (u, v)
    out = [0] * g.m
    for (u, v), s in zip(pairs(g.n), g.edges):
        out[pair_index(p(u), p(v), g.n)] = s
    return LabelledGraph(g.n, g.k, tuple(out))


@dataclass(frozen=True)
class StructureKey:
    n: int
    k: int
    canonical_edges: tuple[int, ...]

    def graph(self) -> LabelledGraph:
        return LabelledGraph(self.n, self.k, self.canonical_edges)

    def edge_count(self) -> int:
        return sum(1 for s in self.canonical_edges if s)

    def to_text(self) -> str:
        return self.graph().to_text()


def orbit_matrix(g: LabelledGraph) -> np.ndarray:
    """All n! relabellings of g as rows (row r is ``apply_permutation(g, s_r^-1)``)."""
    table = pair_permutation_table(g.n)
    return g.as_array()[table]


def _lexmin_rows(rows: np.ndarray) -> np.ndarray:
    """Indices of the lexicographically smallest rows (ties kept)."""
    idx = np.arange(len(rows))
    for col in range(rows.shape[1]):
        column = rows[idx, col]
        idx = idx[column == column.min()]
        if len(idx) == 1:
            break
    return idx


def canonicalize(g: LabelledGraph) -> StructureKey:
    if g.m == 0:
        return StructureKey(g.n, g.k, ())
    rows = orbit_matrix(g)
    best = rows[_lexmin_rows(rows)[0]]
    return StructureKey(g.n, g.k, tuple(int(x) for x in best))


def automorphism_count(g: LabelledGraph) -> int:
    if g.m == 0:
        check_perm_budget(g.n)
        return 1
    rows = orbit_matrix(g)
    return int(np.count_nonzero((rows == g.as_array()).all(axis=1)))


def distinct_labelings(g: LabelledGraph | StructureKey) -> int:
    if isinstance(g, StructureKey):
        g = g.graph()
    total = math.factorial(g.n)
    aut = automorphism_count(g)
    assert total % aut == 0
    return total // aut


def enumerate_permutations(n: int) -> Iterator[Permutation]:
    check_perm_budget(n)
    for mapping in itertools.permutations(range(n)):
        yield Permutation(mapping)


def graph_count(n: int, k: int) -> int:
    return (k + 1) ** num_pairs(n)


def check_graph_budget(n: int, k: int) -> None:
    if graph_count(n, k) > LIMITS.max_graph_count:
        raise CapabilityError(
            f"{graph_count(n, k)} graphs for n={n}, k={k} exceeds the enumeration "
            f"budget ({LIMITS.max_graph_count})"
        )


def graph_matrix(n: int, k: int) -> np.ndarray:
    """Every graph on n vertices with symbols 0..k, one per row, in lexicographic order."""
    check_graph_budget(n, k)
    return _graph_matrix(n, k)


@lru_cache(maxsize=32)
def _graph_matrix(n: int, k: int) -> np.ndarray:
    m = num_pairs(n)
    count = graph_count(n, k)
    codes = np.arange(count, dtype=np.int64)
    out = np.empty((count, m), dtype=np.int64)
    for col in range(m - 1, -1, -1):
        out[:, col] = codes % (k + 1)
        codes //= k + 1
    out.setflags(write=False)
    return out


def enumerate_graphs(n: int, k: int) -> Iterator[LabelledGraph]:
    for row in graph_matrix(n, k):
        yield LabelledGraph(n, k, tuple(int(x) for x in row))


def structure_index(n: int, k: int) -> tuple[np.ndarray, list[StructureKey]]:
    """Map every enumerated graph to the id of its structure.

    Returns ``(ids, keys)`` where ``ids[g]`` indexes into ``keys``; keys are in
    order of first appearance over the lexicographic graph enumeration.
    """
    check_perm_budget(n)
    check_graph_budget(n, k)
    return _structure_index(n, k)


@lru_cache(maxsize=32)
def _structure_index(n: int, k: int) -> tuple[np.ndarray, list[StructureKey]]:
    graphs = _graph_matrix(n, k)
    count, m = graphs.shape
    ids = np.full(count, -1, dtype=np.int64)
    keys: list[StructureKey] = []
    if m == 0:
        ids[:] = 0
        return ids, [StructureKey(n, k, ())]
    table = pair_permutation_table(n).astype(np.int64)
    weights = (k + 1) ** np.arange(m - 1, -1, -1, dtype=np.int64)
    for g in range(count):
        if ids[g] >= 0:
            continue
        rows = graphs[g][table]
        best = rows[_lexmin_rows(rows)[0]]
        members = np.unique(rows @ weights)
        ids[members] = len(keys)
        keys.append(StructureKey(n, k, tuple(int(x) for x in best)))
    return ids, keys


def enumerate_structures(n: int, k: int) -> Iterator[StructureKey]:
    yield from structure_index(n, k)[1]
