"""Finite measures made of point masses and tabulated band densities.

Band densities are stored at Chebyshev-substituted nodes
``mid + hw*cos(theta_k)``, ``theta_k = (k + 1/2) pi / n``; the matching
quadrature weights are ``hw*sin(theta_k)*pi/n``. Every integral against a
band (mass, Stieltjes transform, cumulative mass) uses that rule.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError
from .monitor import MONITOR
from .sets import FiniteGapSet


def _cheb_layout(lo: float, hi: float, n: int):
    theta = (np.arange(n)[::-1] + 0.5) * np.pi / n
    mid, hw = 0.5 * (lo + hi), 0.5 * (hi - lo)
    edges_theta = np.arange(n + 1)[::-1] * np.pi / n
    return mid + hw * np.cos(theta), hw * np.sin(theta) * np.pi / n, mid + hw * np.cos(edges_theta)


@dataclass(frozen=True, eq=False)
class AcBand:
    lo: float
    hi: float
    nodes: np.ndarray
    density: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        dens = np.asarray(self.density, dtype=float)
        if not self.hi > self.lo:
            raise ValidationError(f"band [{self.lo}, {self.hi}] has no interior")
        if nodes.shape != dens.shape or nodes.ndim != 1 or nodes.size == 0:
            raise ValidationError("band nodes and density must be equal-length 1-d arrays")
        expect, _, _ = _cheb_layout(self.lo, self.hi, nodes.size)
        if not np.allclose(nodes, expect, rtol=0, atol=1e-9 * max(1.0, abs(self.lo), abs(self.hi))):
            raise ValidationError(f"band [{self.lo}, {self.hi}] nodes are not the Chebyshev layout")
        if np.any(dens < 0) or not np.all(np.isfinite(dens)):
            raise ValidationError(f"band [{self.lo}, {self.hi}] has negative or non-finite density")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "density", dens)

    @property
    def weights(self) -> np.ndarray:
        """Quadrature masses attached to each node."""
        return self.density * _cheb_layout(self.lo, self.hi, self.nodes.size)[1]

    @property
    def cell_edges(self) -> np.ndarray:
        return _cheb_layout(self.lo, self.hi, self.nodes.size)[2]

    def mass(self) -> float:
        return math.fsum(self.weights)

    def scaled(self, c: float) -> "AcBand":
        return AcBand(self.lo, self.hi, self.nodes, c * self.density)


@dataclass(frozen=True, eq=False)
class SpectralMeasure:
    """Atoms ``(position, weight)`` plus absolutely continuous bands.

    Zero-weight atoms are dropped. An atom inside a band's interior is only
    accepted with ``coexist=True``.
    """

    atoms: tuple[tuple[float, float], ...] = ()
    ac_bands: tuple[AcBand, ...] = ()
    coexist: bool = False

    def __init__(self, atoms: Iterable = (), ac_bands: Iterable[AcBand] = (), coexist: bool = False):
        merged: dict[float, float] = {}
        for x, w in atoms:
            x, w = float(x), float(w)
            if w < 0 or not math.isfinite(w):
                raise ValidationError(f"atom at {x} has invalid weight {w}")
            if w > 0:
                merged[x] = merged.get(x, 0.0) + w
        ats = tuple(sorted(merged.items()))
        bands = tuple(sorted(ac_bands, key=lambda b: b.lo))
        if not coexist:
            for x, _ in ats:
                for b in bands:
                    if b.lo < x < b.hi:
                        raise ValidationError(f"atom at {x} inside band [{b.lo}, {b.hi}]; pass coexist=True to allow")
        object.__setattr__(self, "atoms", ats)
        object.__setattr__(self, "ac_bands", bands)
        object.__setattr__(self, "coexist", coexist)

    @property
    def atom_positions(self) -> np.ndarray:
        return np.array([x for x, _ in self.atoms])

    @property
    def atom_weights(self) -> np.ndarray:
        return np.array([w for _, w in self.atoms])

    def is_zero(self) -> bool:
        return not self.atoms and all(b.mass() == 0 for b in self.ac_bands)

    def scaled(self, c: float) -> "SpectralMeasure":
        return SpectralMeasure([(x, c * w) for x, w in self.atoms], [b.scaled(c) for b in self.ac_bands], self.coexist)

    def discretize(self) -> tuple[np.ndarray, np.ndarray]:
        """All support points and masses: atoms plus band quadrature nodes."""
        xs = [self.atom_positions] + [b.nodes for b in self.ac_bands]
        ws = [self.atom_weights] + [b.weights for b in self.ac_bands]
        x = np.concatenate(xs) if xs else np.zeros(0)
        w = np.concatenate(ws) if ws else np.zeros(0)
        keep = w > 0
        order = np.argsort(x[keep], kind="stable")
        return x[keep][order], w[keep][order]

    def support_bound(self) -> float:
        pts = [abs(x) for x, _ in self.atoms] + [max(abs(b.lo), abs(b.hi)) for b in self.ac_bands]
        return max(pts, default=0.0)

    def to_dict(self) -> dict:
        return {
            "atoms": [[x, w] for x, w in self.atoms],
            "bands": [
                {"lo": b.lo, "hi": b.hi, "nodes": b.nodes.tolist(), "density": b.density.tolist()}
                for b in self.ac_bands
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SpectralMeasure":
        try:
            bands = [AcBand(b["lo"], b["hi"], b["nodes"], b["density"]) for b in d.get("bands", [])]
            return cls(d.get("atoms", []), bands, bool(d.get("coexist", False)))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed measure JSON: {exc}") from exc

    @classmethod
    def load(cls, path) -> "SpectralMeasure":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


ZERO = SpectralMeasure()


@dataclass(frozen=True)
class SplitSpec:
    """How to divide a measure between the two half lines.

    ``sigma[j]`` sends atom j wholly to the plus side (1) or the minus side
    (0). Atoms sitting on K use the fraction ``g[j]`` instead.
    """

    sigma: tuple[int, ...]
    g: tuple[float, ...] | None = None

    def __init__(self, sigma: Sequence[int], g: Sequence[float] | None = None):
        sig = tuple(int(s) for s in sigma)
        if any(s not in (0, 1) for s in sigma):
            raise ValidationError(f"sigma entries must be 0 or 1, got {list(sigma)}")
        gg = None if g is None else tuple(float(v) for v in g)
        if gg is not None and any(not (0.0 <= v <= 1.0) for v in gg):
            raise ValidationError(f"g entries must lie in [0, 1], got {list(gg)}")
        if gg is not None and len(gg) != len(sig):
            raise ValidationError("g must have one entry per atom")
        object.__setattr__(self, "sigma", sig)
        object.__setattr__(self, "g", gg)


def total_mass(m: SpectralMeasure) -> float:
    return math.fsum([w for _, w in m.atoms] + [b.mass() for b in m.ac_bands])


def stieltjes(m: SpectralMeasure, z):
    """int dm(t) / (t - z) for z off the real axis."""
    z = np.asarray(z, dtype=complex)
    if np.any(z.imag == 0):
        raise ValidationError("Stieltjes transform needs Im z != 0")
    x, w = m.discretize()
    zf = z.reshape(-1)
    if x.size:
        out = (w[:, None] / (x[:, None] - zf[None, :])).sum(axis=0)
    else:
        out = np.zeros_like(zf)
    MONITOR.record_many("stieltjes", zf, out)
    out = out.reshape(z.shape)
    return complex(out) if out.ndim == 0 else out


def herglotz_assemble(A: float, m: SpectralMeasure, z):
    """z + A + int dm(t) / (t - z)."""
    z = np.asarray(z, dtype=complex)
    if np.any(z.imag <= 0):
        raise ValidationError("herglotz_assemble needs Im z > 0")
    out = z + A + stieltjes(m, z)
    return complex(out) if np.ndim(out) == 0 else out


def _band_on_K(b: AcBand, K: FiniteGapSet, tol: float) -> bool:
    return any(kb.lo - tol <= b.lo and b.hi <= kb.hi + tol for kb in K.bands)


def split_nu(m: SpectralMeasure, K: FiniteGapSet, s: SplitSpec, tol: float = 1e-12):
    """Divide ``m`` into (nu_plus, nu_minus).

    Half of the absolutely continuous part on K goes to each side. Atoms in
    gaps go wholly to one side according to ``sigma``; atoms on K are split
    with fraction ``g``.
    """
    if len(s.sigma) != len(m.atoms):
        raise ValidationError(f"split spec has {len(s.sigma)} sigma entries for {len(m.atoms)} atoms")
    fracs = []
    for j, (x, _) in enumerate(m.atoms):
        if K.contains(x, tol):
            if s.g is None:
                raise ValidationError(f"atom at {x} lies on K but the split spec has no g weights")
            fracs.append(s.g[j])
        else:
            fracs.append(float(s.sigma[j]))
    return split_fractional(m, K, fracs, tol)


def split_fractional(m: SpectralMeasure, K: FiniteGapSet, fractions: Sequence[float], tol: float = 1e-12):
    """nu_plus = 1/2 (ac part on K) + sum f_j w_j delta_{x_j}; nu_minus = m - nu_plus.

    Absolutely continuous mass off K goes wholly to nu_minus.
    """
    if len(fractions) != len(m.atoms):
        raise ValidationError(f"{len(fractions)} fractions for {len(m.atoms)} atoms")
    if any(not (0.0 <= f <= 1.0) for f in fractions):
        raise ValidationError("invalid split spec: fractions must lie in [0, 1], otherwise nu_minus would be negative")
    plus_atoms = [(x, f * w) for (x, w), f in zip(m.atoms, fractions)]
    minus_atoms = [(x, w - f * w) for (x, w), f in zip(m.atoms, fractions)]
    plus_bands, minus_bands = [], []
    for b in m.ac_bands:
        frac = 0.5 if _band_on_K(b, K, tol) else 0.0
        plus_bands.append(b.scaled(frac))
        minus_bands.append(AcBand(b.lo, b.hi, b.nodes, b.density - frac * b.density))
    nu_plus = SpectralMeasure(plus_atoms, plus_bands, m.coexist)
    nu_minus = SpectralMeasure(minus_atoms, minus_bands, m.coexist)
    return nu_plus, nu_minus


# ---------------------------------------------------------------------------
# weak-* metric


def _cdf_parts(m: SpectralMeasure):
    x, w = m.atom_positions, m.atom_weights
    order = np.argsort(x)
    atom_x, atom_cum = x[order], np.cumsum(w[order])
    bands = [(b.cell_edges, np.concatenate([[0.0], np.cumsum(b.weights)])) for b in m.ac_bands]
    return atom_x, atom_cum, bands


def _cdf_continuous(bands, xs: np.ndarray) -> np.ndarray:
    out = np.zeros_like(xs)
    for edges, cum in bands:
        out += np.interp(xs, edges, cum, left=0.0, right=cum[-1])
    return out


def _cdf_atoms_right(atom_x, atom_cum, xs: np.ndarray) -> np.ndarray:
    if atom_x.size == 0:
        return np.zeros_like(xs)
    idx = np.searchsorted(atom_x, xs, side="right")
    return np.where(idx > 0, atom_cum[np.maximum(idx - 1, 0)], 0.0)


def weak_star_distance(m1: SpectralMeasure, m2: SpectralMeasure, radius: float | None = None) -> float:
    """L1 distance of cumulative mass functions over [-R-1, R+1].

    Band masses are spread uniformly over their quadrature cells, so both
    cumulative functions are piecewise linear with jumps at atoms and the
    integral is evaluated exactly between consecutive knots.
    """
    R = radius if radius is not None else max(m1.support_bound(), m2.support_bound())
    lo, hi = -R - 1.0, R + 1.0
    p1, p2 = _cdf_parts(m1), _cdf_parts(m2)
    knots = [np.array([lo, hi]), p1[0], p2[0]] + [e for e, _ in p1[2]] + [e for e, _ in p2[2]]
    xs = np.unique(np.clip(np.concatenate(knots), lo, hi))
    dc = _cdf_continuous(p1[2], xs) - _cdf_continuous(p2[2], xs)
    da = _cdf_atoms_right(p1[0], p1[1], xs) - _cdf_atoms_right(p2[0], p2[1], xs)
    v0 = dc[:-1] + da[:-1]
    v1 = dc[1:] + da[:-1]
    dx = np.diff(xs)
    a0, a1 = np.abs(v0), np.abs(v1)
    same = v0 * v1 >= 0
    denom = np.where(a0 + a1 > 0, a0 + a1, 1.0)
    seg = np.where(same, 0.5 * dx * (a0 + a1), 0.5 * dx * (v0**2 + v1**2) / denom)
    return float(math.fsum(seg))
