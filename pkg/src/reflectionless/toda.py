"""Toda flows J' = [P, J] on periodic Jacobi matrices.

P is the antisymmetric part of p(J) for a real polynomial p. Matrices that
commute with the p-shift are stored by diagonals over one period:
``D[k + bw, n] = M(n, n + k)`` for n = 0 .. p-1.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import floquet
from .errors import NumericalError, ValidationError
from .sets import FiniteGapSet

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PeriodicJacobi:
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if a.ndim != 1 or a.shape != b.shape or a.size == 0:
            raise ValidationError("a and b must be non-empty 1-d arrays of equal length (one period)")
        if np.any(a <= 0):
            raise ValidationError("Toda flows need a(n) > 0 for every n")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def period(self) -> int:
        return self.a.size

    def banded(self) -> "Banded":
        p = self.period
        D = np.zeros((3, p))
        D[1] = self.b
        D[2] = self.a  # M(n, n+1) = a(n)
        D[0] = np.roll(self.a, 1)  # M(n, n-1) = a(n-1)
        return Banded(D, 1)

    def periodic_block(self, copies: int = 2) -> np.ndarray:
        """Dense matrix of ``copies`` periods with periodic wrap-around."""
        L = copies * self.period
        M = np.zeros((L, L))
        for i in range(L):
            M[i, i] += self.b[i % self.period]
            j = (i + 1) % L
            M[i, j] += self.a[i % self.period]
            M[j, i] += self.a[i % self.period]
        return M

    def to_dict(self) -> dict:
        return {"a": self.a.tolist(), "b": self.b.tolist(), "offset": 0, "boundary": {"periodic": self.period}}

    @classmethod
    def from_dict(cls, d: dict) -> "PeriodicJacobi":
        try:
            bd = d.get("boundary")
            if isinstance(bd, dict) and int(bd["periodic"]) != len(d["a"]):
                p = int(bd["periodic"])
                return cls(np.asarray(d["a"][:p]), np.asarray(d["b"][:p]))
            return cls(np.asarray(d["a"]), np.asarray(d["b"]))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed periodic Jacobi JSON: {exc}") from exc


@dataclass(frozen=True, eq=False)
class Banded:
    """Shift-periodic banded matrix; ``data[k + bw, n] = M(n, n + k)``."""

    data: np.ndarray
    bw: int

    @property
    def period(self) -> int:
        return self.data.shape[1]

    def diag(self, k: int) -> np.ndarray:
        if abs(k) > self.bw:
            return np.zeros(self.period)
        return self.data[k + self.bw]

    def __matmul__(self, other: "Banded") -> "Banded":
        p = self.period
        if other.period != p:
            raise ValidationError("period mismatch")
        bw = self.bw + other.bw
        out = np.zeros((2 * bw + 1, p))
        n = np.arange(p)
        for j in range(-self.bw, self.bw + 1):
            mj = self.data[j + self.bw]
            shifted = (n + j) % p
            for l in range(-other.bw, other.bw + 1):
                out[j + l + bw] += mj * other.data[l + other.bw, shifted]
        return Banded(out, bw)

    def __add__(self, other: "Banded") -> "Banded":
        bw = max(self.bw, other.bw)
        out = np.zeros((2 * bw + 1, self.period))
        out[bw - self.bw : bw + self.bw + 1] += self.data
        out[bw - other.bw : bw + other.bw + 1] += other.data
        return Banded(out, bw)

    def __sub__(self, other: "Banded") -> "Banded":
        return self + Banded(-other.data, other.bw)

    def scale(self, c: float) -> "Banded":
        return Banded(c * self.data, self.bw)

    @classmethod
    def identity(cls, p: int) -> "Banded":
        return cls(np.ones((1, p)), 0)

    def truncate(self, bw: int) -> "Banded":
        if bw >= self.bw:
            return self
        extra = self.data[: self.bw - bw]
        extra2 = self.data[self.bw + bw + 1 :]
        if np.any(extra != 0) or np.any(extra2 != 0):
            raise ValidationError(f"cannot truncate to bandwidth {bw}: non-zero entries would be lost")
        return Banded(self.data[self.bw - bw : self.bw + bw + 1], bw)

    def asymmetry(self) -> float:
        """max |M(n, n+k) - M(n+k, n)|."""
        p = self.period
        n = np.arange(p)
        worst = 0.0
        for k in range(1, self.bw + 1):
            up = self.diag(k)
            down_T = self.diag(-k)[(n + k) % p]  # M(n+k, n)
            worst = max(worst, float(np.max(np.abs(up - down_T))))
        return worst

    def dense_block(self, copies: int) -> np.ndarray:
        """Dense matrix on ``copies`` periods with wrap-around (entries folded)."""
        p = self.period
        L = copies * p
        M = np.zeros((L, L))
        for i in range(L):
            for k in range(-self.bw, self.bw + 1):
                M[i, (i + k) % L] += self.data[k + self.bw, i % p]
        return M


def poly_of_J(J: PeriodicJacobi, coeffs: Sequence[float], bandwidth: int | None = None) -> Banded:
    """p(J) for p(x) = sum_k coeffs[k] x^k, by Horner's rule on banded matrices."""
    coeffs = [float(c) for c in coeffs]
    deg = len(coeffs) - 1
    if deg < 0:
        raise ValidationError("empty polynomial")
    bw = deg if bandwidth is None else int(bandwidth)
    if bw < deg:
        raise ValidationError(f"bandwidth {bw} < degree {deg}")
    p = J.period
    Jb = J.banded()
    P = Banded.identity(p).scale(coeffs[-1])
    for c in reversed(coeffs[:-1]):
        P = (P @ Jb) + Banded.identity(p).scale(c)
    if P.bw < bw:
        P = P + Banded(np.zeros((2 * bw + 1, p)), bw)
    return P


def antisymmetric_part(M: Banded, tol: float = 1e-12) -> Banded:
    """Keep the upper triangle, negate the lower one, drop the diagonal."""
    scale = max(1.0, float(np.abs(M.data).max()))
    asym = M.asymmetry()
    if asym > tol * scale:
        raise ValidationError(f"matrix is not symmetric (asymmetry {asym:.3g})")
    out = M.data.copy()
    out[: M.bw] *= -1.0
    out[M.bw] = 0.0
    return Banded(out, M.bw)


def toda_rhs(J: PeriodicJacobi, coeffs: Sequence[float]) -> tuple[np.ndarray, np.ndarray, float]:
    """(a', b') from [P, J], plus the asymmetry removed when symmetrising."""
    P = antisymmetric_part(poly_of_J(J, coeffs))
    Jb = J.banded()
    C = (P @ Jb) - (Jb @ P)
    p = J.period
    n = np.arange(p)
    upper = C.diag(1)
    lower_T = C.diag(-1)[(n + 1) % p]
    ad = 0.5 * (upper + lower_T)
    asym = float(np.max(np.abs(upper - lower_T)))
    # the commutator is tridiagonal; anything further out is rounding
    for k in range(2, C.bw + 1):
        asym = max(asym, float(np.abs(C.diag(k)).max()), float(np.abs(C.diag(-k)).max()))
    return ad, C.diag(0).copy(), asym


@dataclass
class TodaTrajectory:
    times: np.ndarray
    a: np.ndarray  # (steps, p)
    b: np.ndarray
    resym: np.ndarray  # symmetrisation magnitude per step
    coeffs: tuple[float, ...] = ()
    band_edges: list = field(default_factory=list)

    def state(self, k: int) -> PeriodicJacobi:
        return PeriodicJacobi(self.a[k], self.b[k])

    @property
    def final(self) -> PeriodicJacobi:
        return self.state(-1)


def toda_flow(
    J0: PeriodicJacobi,
    coeffs: Sequence[float],
    t_end: float,
    dt: float,
    *,
    record_every: int = 1,
    blowup_factor: float = 2.0,
) -> TodaTrajectory:
    """Classical fourth-order Runge-Kutta with fixed step ``dt``."""
    if dt <= 0 or t_end < 0:
        raise ValidationError("need dt > 0 and t_end >= 0")
    steps = int(round(t_end / dt))
    if abs(steps * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise ValidationError(f"t_end={t_end} is not a multiple of dt={dt}")
    a, b = J0.a.copy(), J0.b.copy()
    norm0 = floquet.norm_bound(a, b)
    times, As, Bs, rs = [0.0], [a.copy()], [b.copy()], [0.0]

    def f(a, b):
        return toda_rhs(PeriodicJacobi(a, b), coeffs)

    worst = 0.0
    for k in range(1, steps + 1):
        try:
            k1a, k1b, r1 = f(a, b)
            k2a, k2b, r2 = f(a + 0.5 * dt * k1a, b + 0.5 * dt * k1b)
            k3a, k3b, r3 = f(a + 0.5 * dt * k2a, b + 0.5 * dt * k2b)
            k4a, k4b, r4 = f(a + dt * k3a, b + dt * k3b)
        except ValidationError as exc:
            raise NumericalError(f"Toda flow degenerated at t={k * dt:.6g}: {exc}") from exc
        a = a + dt / 6.0 * (k1a + 2 * k2a + 2 * k3a + k4a)
        b = b + dt / 6.0 * (k1b + 2 * k2b + 2 * k3b + k4b)
        r = max(r1, r2, r3, r4)
        worst = max(worst, r)
        nrm = floquet.norm_bound(a, b)
        if not np.isfinite(nrm) or nrm > blowup_factor * norm0:
            raise NumericalError(
                f"Toda flow blow-up at t={k * dt:.6g}: norm bound {nrm:.3g} exceeds {blowup_factor} x initial {norm0:.3g}"
            )
        if k % record_every == 0 or k == steps:
            times.append(k * dt)
            As.append(a.copy())
            Bs.append(b.copy())
            rs.append(r)
    log.info("toda_flow: %d steps, max symmetrisation correction %.3g", steps, worst)
    return TodaTrajectory(np.array(times), np.array(As), np.array(Bs), np.array(rs), tuple(float(c) for c in coeffs))


def spectrum(J: PeriodicJacobi, closed_gap: float = 1e-9) -> FiniteGapSet:
    """Bands {|discriminant| <= 2}, endpoints refined by bracketing."""
    bands = floquet.band_edges(J.a, J.b, closed_gap)
    return FiniteGapSet(bands, floquet.norm_bound(J.a, J.b) + 1.0)


def invariants(J: PeriodicJacobi) -> tuple[float, float]:
    """Traces of J and J^2 over one period."""
    return float(np.sum(J.b)), float(np.sum(J.b**2 + 2 * J.a**2))


def band_drift(K0: FiniteGapSet, K1: FiniteGapSet) -> float:
    """Largest endpoint displacement; inf when the band count changed."""
    e0, e1 = K0.endpoints(), K1.endpoints()
    if e0.size != e1.size:
        return float("inf")
    return float(np.max(np.abs(e0 - e1)))
