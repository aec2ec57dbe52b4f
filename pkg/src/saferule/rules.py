"""Hyperrectangle rules over discretized samples.

A rule is identified by two integer corner vectors ``lo`` and ``hi``; it
fires on a discretized sample ``x`` iff ``lo[j] <= x[j] <= hi[j]`` for every
feature. Rules are never stored as bitmaps over the grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np


@dataclass(frozen=True, order=True)
class RuleSegment:
    lo: tuple
    hi: tuple

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(int(v) for v in self.lo))
        object.__setattr__(self, "hi", tuple(int(v) for v in self.hi))
        if len(self.lo) != len(self.hi):
            raise ValueError("lo and hi must have the same length")
        if any(a > b or a < 0 for a, b in zip(self.lo, self.hi)):
            raise ValueError(f"empty or negative segment {self.lo}..{self.hi}")

    @property
    def d(self) -> int:
        return len(self.lo)

    @classmethod
    def full(cls, s: Sequence[int]) -> "RuleSegment":
        return cls(tuple(0 for _ in s), tuple(k - 1 for k in s))

    def is_valid(self, s: Sequence[int]) -> bool:
        return len(s) == self.d and all(h <= k - 1 for h, k in zip(self.hi, s))

    def constrained(self, s: Sequence[int]) -> list:
        """Indices of features whose range is narrower than the full alphabet."""
        return [j for j, (a, b) in enumerate(zip(self.lo, self.hi)) if a != 0 or b != s[j] - 1]

    def contains(self, other: "RuleSegment") -> bool:
        """True if ``other`` is a sub-box of this segment."""
        return all(a <= c and d <= b for a, b, c, d in zip(self.lo, self.hi, other.lo, other.hi))

    def format(self, s: Sequence[int]) -> str:
        return format_segment(self, s)


def evaluate(seg: RuleSegment, x) -> int:
    if len(x) != seg.d:
        raise ValueError(f"dimension mismatch: rule has {seg.d} features, sample has {len(x)}")
    return int(all(a <= v <= b for a, v, b in zip(seg.lo, x, seg.hi)))


def matches(seg: RuleSegment, xbar: np.ndarray) -> np.ndarray:
    """Boolean vector over the rows of ``xbar``."""
    xbar = np.asarray(xbar)
    if xbar.shape[1] != seg.d:
        raise ValueError(f"dimension mismatch: rule has {seg.d} features, data has {xbar.shape[1]}")
    lo = np.asarray(seg.lo)
    hi = np.asarray(seg.hi)
    return np.all((xbar >= lo) & (xbar <= hi), axis=1)


def count_all_rules(s: Sequence[int]) -> int:
    """Number of rule segments excluding the all-covering root (exact integer)."""
    if any(int(k) < 1 for k in s):
        raise ValueError("alphabet sizes must be >= 1")
    return math.prod(int(k) * (int(k) + 1) // 2 for k in s) - 1


def volume(seg: RuleSegment) -> int:
    return math.prod(b - a + 1 for a, b in zip(seg.lo, seg.hi))


def intersection_volume(a: RuleSegment, b: RuleSegment) -> int:
    return math.prod(
        max(0, min(ah, bh) - max(al, bl) + 1)
        for al, ah, bl, bh in zip(a.lo, a.hi, b.lo, b.hi)
    )


def jaccard(a: RuleSegment, b: RuleSegment) -> Fraction:
    """Jaccard coefficient between the grid cells covered by two rules (exact)."""
    if a.d != b.d:
        raise ValueError("segments have different dimensions")
    inter = intersection_volume(a, b)
    return Fraction(inter, volume(a) + volume(b) - inter)


def similarity(R1: Sequence[RuleSegment], R2: Sequence[RuleSegment]) -> Fraction:
    """Average over ``R1`` of the best Jaccard match in ``R2``. Not symmetric."""
    R1, R2 = list(R1), list(R2)
    if not R1:
        raise ValueError("first rule set must be non-empty")
    if not R2:
        return Fraction(0)
    total = sum((max(jaccard(a, b) for b in R2) for a in R1), Fraction(0))
    return total / len(R1)


def unique_rules(rules: Iterable[RuleSegment]) -> list:
    """Order-preserving de-duplication."""
    return list(dict.fromkeys(rules))


def format_segment(seg: RuleSegment, s: Sequence[int]) -> str:
    parts = [f"{j}:{seg.lo[j]}..{seg.hi[j]}" for j in seg.constrained(s)]
    return " & ".join(parts) if parts else "*"


def parse_segment(text: str, s: Sequence[int]) -> RuleSegment:
    lo = [0] * len(s)
    hi = [k - 1 for k in s]
    text = text.strip()
    if text != "*":
        for clause in text.split("&"):
            j, _, rng = clause.strip().partition(":")
            a, sep, b = rng.partition("..")
            if not sep:
                raise ValueError(f"malformed clause {clause!r}")
            j = int(j)
            lo[j], hi[j] = int(a), int(b)
    seg = RuleSegment(tuple(lo), tuple(hi))
    if not seg.is_valid(s):
        raise ValueError(f"segment {text!r} does not fit alphabet sizes {tuple(s)}")
    return seg
