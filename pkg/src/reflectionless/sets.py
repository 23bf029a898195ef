"""Finite unions of compact intervals and the set metrics h, |.Δ.| and δ."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .config import get_profile
from .errors import ValidationError


@dataclass(frozen=True, order=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValidationError(f"interval endpoints must be finite, got ({self.lo}, {self.hi})")
        if self.lo > self.hi:
            raise ValidationError(f"interval with lo > hi: ({self.lo}, {self.hi})")

    @property
    def length(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, x: float, tol: float = 0.0) -> bool:
        return self.lo - tol <= x <= self.hi + tol

    def __iter__(self):
        yield self.lo
        yield self.hi


@dataclass(frozen=True)
class FiniteGapSet:
    """A finite union of disjoint compact intervals inside (-radius, radius).

    Bands closer than ``min_separation`` (1e-9 by default) are rejected rather
    than merged, since merging would silently change the gap structure.
    """

    bands: tuple[Interval, ...]
    radius: float

    def __init__(self, bands: Iterable, radius: float, *, min_separation: float | None = None):
        ivs = tuple(sorted(b if isinstance(b, Interval) else Interval(float(b[0]), float(b[1])) for b in bands))
        object.__setattr__(self, "bands", ivs)
        object.__setattr__(self, "radius", float(radius))
        sep = get_profile().min_separation if min_separation is None else min_separation
        if not ivs:
            raise ValidationError("a FiniteGapSet needs at least one band")
        for b in ivs:
            if b.length <= 0:
                raise ValidationError(f"degenerate band [{b.lo}, {b.hi}]")
            if not (-self.radius < b.lo and b.hi < self.radius):
                raise ValidationError(f"band [{b.lo}, {b.hi}] not inside (-{self.radius}, {self.radius})")
        for left, right in zip(ivs, ivs[1:]):
            if right.lo - left.hi < sep:
                raise ValidationError(
                    f"bands [{left.lo}, {left.hi}] and [{right.lo}, {right.hi}] are separated by "
                    f"{right.lo - left.hi:.3g} < {sep:g}"
                )

    @property
    def lo(self) -> float:
        return self.bands[0].lo

    @property
    def hi(self) -> float:
        return self.bands[-1].hi

    @property
    def measure(self) -> float:
        return math.fsum(b.length for b in self.bands)

    def contains(self, x: float, tol: float = 0.0) -> bool:
        return any(b.contains(x, tol) for b in self.bands)

    def endpoints(self) -> np.ndarray:
        return np.array([e for b in self.bands for e in b])

    def shifted(self, c: float) -> "FiniteGapSet":
        return FiniteGapSet([(b.lo + c, b.hi + c) for b in self.bands], self.radius + abs(c))

    def to_dict(self) -> dict:
        return {"radius": self.radius, "bands": [[b.lo, b.hi] for b in self.bands]}

    @classmethod
    def from_dict(cls, d: dict) -> "FiniteGapSet":
        try:
            return cls(d["bands"], d["radius"])
        except (KeyError, TypeError, IndexError) as exc:
            raise ValidationError(f"malformed set JSON: {exc}") from exc

    @classmethod
    def load(cls, path) -> "FiniteGapSet":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def gaps(K: FiniteGapSet) -> list[Interval]:
    """Bounded components of the complement, left to right."""
    return [Interval(a.hi, b.lo) for a, b in zip(K.bands, K.bands[1:])]


def _dist_to_set(x: np.ndarray, K: FiniteGapSet) -> np.ndarray:
    lo = np.array([b.lo for b in K.bands])
    hi = np.array([b.hi for b in K.bands])
    d = np.maximum(lo[None, :] - x[:, None], 0.0) + np.maximum(x[:, None] - hi[None, :], 0.0)
    return d.min(axis=1)


def _directed_hausdorff(K: FiniteGapSet, L: FiniteGapSet) -> float:
    # dist(., L) restricted to a band of K is piecewise linear; its maximum sits
    # at a band endpoint or at the midpoint of a gap of L inside that band.
    mids = np.array([g.mid for g in gaps(L)])
    cand = [K.endpoints()]
    for b in K.bands:
        if mids.size:
            cand.append(mids[(mids >= b.lo) & (mids <= b.hi)])
    return float(_dist_to_set(np.concatenate(cand), L).max())


def hausdorff(K: FiniteGapSet, K2: FiniteGapSet) -> float:
    return max(_directed_hausdorff(K, K2), _directed_hausdorff(K2, K))


def intersection_measure(K: FiniteGapSet, K2: FiniteGapSet) -> float:
    parts = []
    i = j = 0
    A, B = K.bands, K2.bands
    while i < len(A) and j < len(B):
        lo = max(A[i].lo, B[j].lo)
        hi = min(A[i].hi, B[j].hi)
        if hi > lo:
            parts.append(hi - lo)
        if A[i].hi < B[j].hi:
            i += 1
        else:
            j += 1
    return math.fsum(parts)


def lebesgue_symmdiff(K: FiniteGapSet, K2: FiniteGapSet) -> float:
    """Lebesgue measure of the symmetric difference, by an interval sweep."""
    return max(K.measure + K2.measure - 2.0 * intersection_measure(K, K2), 0.0)


def delta_metric(K: FiniteGapSet, K2: FiniteGapSet) -> float:
    return hausdorff(K, K2) + lebesgue_symmdiff(K, K2)

