"""Piecewise-constant Krein functions and the Herglotz function they define.

For a step function xi on (-R, R) the exponent of

    H(z) = (z + R) * exp( int xi(t) / (t - z) dt )

is a finite sum of logarithms, so H, its boundary values on the real axis,
the principal-value Hilbert transform of xi and the point masses of the
representing measure all have closed forms. Quadrature only enters when the
absolutely continuous density is tabulated on a band.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .config import get_profile
from .errors import ValidationError
from .monitor import MONITOR
from .sets import FiniteGapSet, gaps

_BP_TOL = 1e-15


@dataclass(frozen=True)
class KreinFunction:
    """Step function on (-radius, radius) with values in [0, 1].

    Adjacent pieces with equal values are merged on construction, so two
    KreinFunctions describing the same function compare equal.
    """

    radius: float
    breakpoints: tuple[float, ...]
    values: tuple[float, ...]

    def __init__(self, radius: float, breakpoints: Sequence[float], values: Sequence[float]):
        R = float(radius)
        bps = [float(t) for t in breakpoints]
        vals = [float(v) for v in values]
        if len(bps) != len(vals) + 1:
            raise ValidationError(f"need len(breakpoints) == len(values) + 1, got {len(bps)} and {len(vals)}")
        if not vals:
            raise ValidationError("a KreinFunction needs at least one piece")
        scale = _BP_TOL * max(R, 1.0)
        if abs(bps[0] + R) > scale or abs(bps[-1] - R) > scale:
            raise ValidationError(f"breakpoints must run from -R={-R} to R={R}, got {bps[0]} .. {bps[-1]}")
        bps[0], bps[-1] = -R, R
        for t0, t1 in zip(bps, bps[1:]):
            if not t1 > t0:
                raise ValidationError(f"breakpoints not strictly increasing at {t0}, {t1}")
        for v in vals:
            if not (0.0 <= v <= 1.0):
                raise ValidationError(f"Krein function value {v} outside [0, 1]")
        # canonical form: merge equal neighbours
        cb, cv = [bps[0]], []
        for k, v in enumerate(vals):
            if cv and cv[-1] == v:
                cb[-1] = bps[k + 1]
            else:
                cv.append(v)
                cb.append(bps[k + 1])
        object.__setattr__(self, "radius", R)
        object.__setattr__(self, "breakpoints", tuple(cb))
        object.__setattr__(self, "values", tuple(cv))

    # -- construction helpers -------------------------------------------

    @classmethod
    def constant(cls, radius: float, value: float) -> "KreinFunction":
        return cls(radius, [-radius, radius], [value])

    @classmethod
    def from_pieces(cls, radius: float, pieces: Iterable[tuple[float, float, float]]) -> "KreinFunction":
        """Build from (lo, hi, value) triples that tile (-radius, radius)."""
        pieces = sorted(pieces)
        bps = [pieces[0][0]]
        vals = []
        for lo, hi, v in pieces:
            if abs(lo - bps[-1]) > _BP_TOL * max(radius, 1.0):
                raise ValidationError(f"pieces do not tile: hole or overlap at {bps[-1]} / {lo}")
            bps.append(hi)
            vals.append(v)
        return cls(radius, bps, vals)

    def overwrite(self, lo: float, hi: float, value: float) -> "KreinFunction":
        """Copy with ``value`` on (lo, hi)."""
        if not (-self.radius <= lo < hi <= self.radius):
            raise ValidationError(f"overwrite interval ({lo}, {hi}) not inside (-R, R)")
        tol = _BP_TOL * max(self.radius, 1.0)
        keep = [t for t in self.breakpoints if t < lo - tol or t > hi + tol]
        bps = sorted(set(keep) | {lo, hi})
        vals = []
        for t0, t1 in zip(bps, bps[1:]):
            m = 0.5 * (t0 + t1)
            vals.append(value if lo <= m <= hi else self(m))
        return KreinFunction(self.radius, bps, vals)

    # -- evaluation -----------------------------------------------------

    @property
    def pieces(self) -> list[tuple[float, float, float]]:
        b = self.breakpoints
        return [(b[k], b[k + 1], v) for k, v in enumerate(self.values)]

    def _bp(self) -> np.ndarray:
        return np.asarray(self.breakpoints)

    def _vals(self) -> np.ndarray:
        return np.asarray(self.values)

    def __call__(self, x):
        """Value at x (right-continuous at breakpoints)."""
        x = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(self._bp(), x, side="right") - 1, 0, len(self.values) - 1)
        out = self._vals()[idx]
        return float(out) if out.ndim == 0 else out

    def integral(self, lo: float | None = None, hi: float | None = None) -> float:
        lo = -self.radius if lo is None else lo
        hi = self.radius if hi is None else hi
        parts = [v * (min(b, hi) - max(a, lo)) for a, b, v in self.pieces if min(b, hi) > max(a, lo)]
        return math.fsum(parts)

    def pieces_in(self, lo: float, hi: float) -> list[tuple[float, float, float]]:
        return [(max(a, lo), min(b, hi), v) for a, b, v in self.pieces if min(b, hi) > max(a, lo)]

    def is_breakpoint(self, x: float, tol: float | None = None) -> bool:
        tol = 1e-13 * max(self.radius, 1.0) if tol is None else tol
        return bool(np.min(np.abs(self._bp() - x)) <= tol)

    def half_set(self) -> FiniteGapSet:
        """The set where xi == 1/2 (closure of those pieces)."""
        return FiniteGapSet([(a, b) for a, b, v in self.pieces if v == 0.5], self.radius)

    # -- io ---------------------------------------------------------------

    def to_dict(self) -> dict:
        return {"radius": self.radius, "breakpoints": list(self.breakpoints), "values": list(self.values)}

    @classmethod
    def from_dict(cls, d: dict) -> "KreinFunction":
        try:
            return cls(d["radius"], d["breakpoints"], d["values"])
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed Krein function JSON: {exc}") from exc

    @classmethod
    def load(cls, path) -> "KreinFunction":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# closed forms on the upper half plane


def _require_upper(z: np.ndarray) -> None:
    if np.any(z.imag <= 0):
        raise ValidationError("argument must lie in the open upper half plane")


def cauchy_integral(xi: KreinFunction, z):
    """int xi(t) / (t - z) dt for Im z > 0, summed piece by piece.

    Each term Log((t_{k+1} - z) / (t_k - z)) uses the principal branch; both
    t - z lie in the lower half plane so the ratio's argument is the
    difference of arguments.
    """
    z = np.asarray(z, dtype=complex)
    _require_upper(z)
    t = xi._bp()
    v = xi._vals()
    zf = z.reshape(-1)
    d = t[:, None] - zf[None, :]
    terms = np.log(d[1:] / d[:-1])
    out = (v[:, None] * terms).sum(axis=0).reshape(z.shape)
    return complex(out) if out.ndim == 0 else out


def eval_H(xi: KreinFunction, z):
    z = np.asarray(z, dtype=complex)
    out = (z + xi.radius) * np.exp(cauchy_integral(xi, z))
    MONITOR.record_many("H", z, out, strict=True)
    return complex(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# real-axis closed forms


def _check_off_breakpoints(xi: KreinFunction, x: np.ndarray) -> None:
    # the closed forms are finite at any x off the breakpoints, however close
    t = xi._bp()
    if np.any(np.min(np.abs(t[:, None] - x.reshape(-1)[None, :]), axis=0) == 0):
        raise ValidationError("boundary value requested at a breakpoint of xi; the limit need not exist")


def hilbert_transform(xi: KreinFunction, x):
    """Principal value of int xi(t) / (t - x) dt over (-R, R)."""
    x = np.asarray(x, dtype=float)
    _check_off_breakpoints(xi, x)
    t = xi._bp()
    d = np.abs(t[:, None] - x.reshape(-1)[None, :])
    out = (xi._vals()[:, None] * (np.log(d[1:]) - np.log(d[:-1]))).sum(axis=0).reshape(x.shape)
    return float(out) if out.ndim == 0 else out


def boundary_modulus(xi: KreinFunction, x):
    x = np.asarray(x, dtype=float)
    return np.abs(x + xi.radius) * np.exp(hilbert_transform(xi, x))


def boundary_H(xi: KreinFunction, x):
    """lim_{y->0+} H(x + iy) for x off the breakpoints.

    Modulus from the principal-value logarithms, argument pi * xi(x).
    """
    x = np.asarray(x, dtype=float)
    mod = boundary_modulus(xi, x)
    v = np.asarray(xi(x), dtype=float)
    phase = np.where(v == 0.5, 1j, np.where(v == 0.0, 1.0, np.where(v == 1.0, -1.0, np.exp(1j * np.pi * v))))
    out = mod * phase
    return complex(out) if np.ndim(out) == 0 else out


def constant_A(xi: KreinFunction) -> float:
    """A in H(z) = z + A + int d rho / (t - z); equals -b(0)."""
    return xi.radius - xi.integral()


def _jump_index(xi: KreinFunction, mu: float) -> int:
    t = xi._bp()
    k = int(np.argmin(np.abs(t - mu)))
    tol = 1e-13 * max(xi.radius, 1.0)
    if abs(t[k] - mu) > tol or k == 0 or k == len(t) - 1:
        raise ValidationError(f"xi has no interior breakpoint at mu={mu}")
    if not (xi.values[k - 1] == 0.0 and xi.values[k] == 1.0):
        raise ValidationError(
            f"xi does not jump from 0 to 1 at mu={mu} (values {xi.values[k - 1]} -> {xi.values[k]}); no point mass"
        )
    return k


def atom_weight(xi: KreinFunction, mu: float) -> float:
    """Point mass of rho at a 0 -> 1 jump of xi, lim y |H(mu + iy)|.

    The piece to the right of mu contributes (t_{k+1} - mu) / y, which cancels
    the factor y; the left piece carries value 0 and contributes nothing.
    """
    k = _jump_index(xi, mu)
    mu = xi.breakpoints[k]
    t = xi._bp()
    v = xi._vals().copy()
    right_len = t[k + 1] - mu
    v[k - 1] = 0.0
    v[k] = 0.0
    with np.errstate(divide="ignore"):
        d = np.abs(t - mu)
        logs = np.log(d[1:]) - np.log(d[:-1])
    mask = v != 0
    expo = float((v[mask] * logs[mask]).sum())
    return float((mu + xi.radius) * right_len * math.exp(expo))


def jump_points(xi: KreinFunction) -> list[float]:
    """Interior breakpoints where xi jumps from 0 to 1 (the point masses of rho)."""
    out = []
    for k in range(1, len(xi.values)):
        if xi.values[k - 1] == 0.0 and xi.values[k] == 1.0:
            out.append(xi.breakpoints[k])
    return out


# ---------------------------------------------------------------------------
# measure extraction


def chebyshev_nodes(lo: float, hi: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes mid + hw cos(theta), theta = (k + 1/2) pi / n, ascending, with weights.

    The weights hw sin(theta) pi / n integrate densities with square-root
    edge behaviour (either sign of exponent) to spectral accuracy.
    """
    theta = (np.arange(n)[::-1] + 0.5) * np.pi / n
    mid, hw = 0.5 * (lo + hi), 0.5 * (hi - lo)
    return mid + hw * np.cos(theta), hw * np.sin(theta) * np.pi / n


def ac_density(xi: KreinFunction, x):
    """(1/pi) Im H(x + i0): the absolutely continuous density of rho."""
    return np.imag(boundary_H(xi, x)) / np.pi


def measure_from_xi(xi: KreinFunction, nodes_per_band: int | None = None):
    """Representing measure of H for an arbitrary step function xi.

    Absolutely continuous parts live on the pieces with 0 < xi < 1; point
    masses sit at the 0 -> 1 jumps. Nothing else can carry mass.
    """
    from .measures import AcBand, SpectralMeasure

    n = nodes_per_band or get_profile().nodes_per_band
    bands = []
    for lo, hi, v in xi.pieces:
        if 0.0 < v < 1.0:
            nodes, _ = chebyshev_nodes(lo, hi, n)
            dens = np.maximum(ac_density(xi, nodes), 0.0)
            bands.append(AcBand(lo, hi, nodes, dens))
    atoms = [(mu, atom_weight(xi, mu)) for mu in jump_points(xi)]
    return SpectralMeasure(atoms, bands)


def check_in_XK(xi: KreinFunction, K: FiniteGapSet, tol: float = 1e-12) -> list[float]:
    """Raise unless xi belongs to X(K); return the gap parameters mu_j."""
    tol = tol * max(xi.radius, 1.0)
    if K.radius > xi.radius + tol:
        raise ValidationError("K extends beyond the domain of xi")

    def const_on(lo, hi, val, what):
        for a, b, v in xi.pieces_in(lo, hi):
            if b - a > tol and v != val:
                raise ValidationError(f"xi not in X(K): {what} requires xi={val} on ({a}, {b}), found {v}")

    const_on(-xi.radius, K.lo, 1.0, "left of K")
    const_on(K.hi, xi.radius, 0.0, "right of K")
    for b in K.bands:
        const_on(b.lo, b.hi, 0.5, f"band [{b.lo}, {b.hi}]")
    mus = []
    for g in gaps(K):
        ps = [p for p in xi.pieces_in(g.lo, g.hi) if p[1] - p[0] > tol]
        vals = [p[2] for p in ps]
        if vals == [0.0]:
            mus.append(g.hi)
        elif vals == [1.0]:
            mus.append(g.lo)
        elif vals == [0.0, 1.0]:
            mus.append(ps[1][0])
        else:
            raise ValidationError(f"xi not in X(K): on gap ({g.lo}, {g.hi}) xi must be a single 0 -> 1 step, found {vals}")
    return mus


def extract_measure(xi: KreinFunction, K: FiniteGapSet, nodes_per_band: int | None = None):
    """Representing measure rho of H for xi in X(K): band densities plus gap atoms."""
    check_in_XK(xi, K)
    return measure_from_xi(xi, nodes_per_band)
