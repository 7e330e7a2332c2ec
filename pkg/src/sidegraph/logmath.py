"""Base-2 log-domain arithmetic with an explicit zero-probability tag."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

NEG_INF = float("-inf")


@dataclass(frozen=True, order=True)
class LogProb:
    """A log2-probability.  ``impossible`` marks probability zero; ``bits`` is then unused."""

    bits: float
    impossible: bool = False

    @classmethod
    def zero(cls) -> "LogProb":
        return cls(NEG_INF, True)

    @classmethod
    def of(cls, bits: float) -> "LogProb":
        if math.isnan(bits):
            raise ValueError("log-probability is NaN")
        if bits == NEG_INF:
            return cls.zero()
        return cls(float(bits))

    @property
    def prob(self) -> float:
        return 0.0 if self.impossible else 2.0**self.bits

    def __float__(self) -> float:
        return NEG_INF if self.impossible else self.bits

    def self_information(self) -> float:
        """``-log2 P``; +inf when impossible."""
        return math.inf if self.impossible else -self.bits


def log2sumexp(values, axis=None):
    """log2 of the sum of 2**values, stable against under/overflow.

    All-(-inf) slices return -inf.
    """
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        return NEG_INF if axis is None else np.full(np.delete(x.shape, axis), NEG_INF)
    top = np.max(x, axis=axis, keepdims=True)
    safe_top = np.where(np.isfinite(top), top, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log2(np.sum(np.exp2(x - safe_top), axis=axis, keepdims=True)) + safe_top
    if axis is None:
        return float(out.reshape(()))
    return np.squeeze(out, axis=axis)


class Log2SumAccumulator:
    """Streaming log2-sum-exp over chunks, keeping a running maximum."""

    def __init__(self):
        self.top = NEG_INF
        self.scaled = 0.0

    def add(self, values) -> None:
        x = np.asarray(values, dtype=float).ravel()
        if x.size == 0:
            return
        chunk_top = float(x.max())
        if chunk_top == NEG_INF:
            return
        if chunk_top > self.top:
            if self.top != NEG_INF:
                self.scaled *= 2.0 ** (self.top - chunk_top)
            self.top = chunk_top
        self.scaled += float(np.sum(np.exp2(x - self.top)))

    def result(self) -> float:
        if self.top == NEG_INF:
            return NEG_INF
        return self.top + math.log2(self.scaled)


def h2(x: float) -> float:
    """Binary entropy in bits, with 0 log 0 = 0."""
    if x < 0 or x > 1:
        raise ValueError("h2 argument must lie in [0, 1]")
    return float(sum(-t * math.log2(t) for t in (x, 1 - x) if t > 0))


def entropy_bits(p) -> float:
    p = np.asarray(p, dtype=float).ravel()
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())
