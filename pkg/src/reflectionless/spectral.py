"""Jacobi matrices, their Green functions, and the maps to and from spectral data.

A :class:`JacobiMatrix` stores a finite window of coefficients. How the
operator continues outside the window is fixed by its boundary policy:

* ``"pad"``: constant continuation by the first/last coefficients. Green
  functions are exact for this padded operator (the constant leads are folded
  in through their closed-form self-energy).
* ``periodic p``: the window holds whole periods and the operator is the
  periodic extension. Green functions come from the Floquet solutions.

Matrices produced by :func:`jacobi_from_torus` additionally carry the exact
Weyl data they were built from. Their Green functions are evaluated from
that data, because a depth-limited window cannot resolve the boundary
behaviour at small imaginary parts.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import eigh_tridiagonal, solve_banded

from . import floquet
from .config import get_profile
from .errors import DegenerateWarning, NumericalError, ValidationError
from .krein import KreinFunction, constant_A, eval_H, extract_measure
from .measures import SpectralMeasure, SplitSpec, split_nu, total_mass
from .monitor import MONITOR
from .sets import FiniteGapSet, gaps


# ---------------------------------------------------------------------------
# data types


@dataclass(frozen=True)
class WeylData:
    """Exact half-line data behind a reconstructed operator.

    ``xi`` determines H; the absolutely continuous part of rho is shared
    equally by the two half lines, and the atom at ``x`` goes to the plus
    side with fraction ``plus_fraction[x]``.
    """

    xi: KreinFunction
    plus_fraction: tuple[tuple[float, float, float], ...]  # (position, weight, fraction)

    def _atom_sums(self, z):
        tot = np.zeros_like(z)
        plus = np.zeros_like(z)
        for x, w, s in self.plus_fraction:
            term = w / (x - z)
            tot = tot + term
            plus = plus + s * term
        return tot, plus

    def plus_m(self, z):
        """a(0)^2 m_+(z)."""
        z = np.asarray(z, dtype=complex)
        H = eval_H(self.xi, z)
        tot, plus = self._atom_sums(z)
        return 0.5 * (H - z - constant_A(self.xi) - tot) + plus

    def minus_m(self, z):
        """a(-1)^2 m_-(z)."""
        z = np.asarray(z, dtype=complex)
        H = eval_H(self.xi, z)
        tot, plus = self._atom_sums(z)
        return 0.5 * (H - z - constant_A(self.xi) - tot) + (tot - plus)

    def to_dict(self) -> dict:
        return {"xi": self.xi.to_dict(), "atoms": [list(t) for t in self.plus_fraction]}

    @classmethod
    def from_dict(cls, d: dict) -> "WeylData":
        return cls(KreinFunction.from_dict(d["xi"]), tuple(tuple(map(float, t)) for t in d["atoms"]))


@dataclass(frozen=True, eq=False)
class JacobiMatrix:
    """Coefficient window: ``b[i] = b(offset + i)``, ``a[i] = a(offset + i)``.

    ``a(n)`` couples sites n and n + 1. With ``boundary="pad"`` the window
    has one more b than a; with an integer period both have the same length,
    a multiple of the period. NaN marks coefficients that are not determined
    by the data (finitely supported half-line measures).
    """

    a: np.ndarray
    b: np.ndarray
    offset: int = 0
    boundary: str | int = "pad"
    weyl: WeylData | None = field(default=None, repr=False)

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        if a.ndim != 1 or b.ndim != 1 or b.size == 0:
            raise ValidationError("a and b must be 1-d arrays, b non-empty")
        if np.any(a[np.isfinite(a)] < 0):
            raise ValidationError("off-diagonal coefficients must be non-negative")
        if np.any(np.isinf(a)) or np.any(np.isinf(b)):
            raise ValidationError("coefficients must be bounded")
        if self.boundary == "pad":
            if a.size != b.size - 1:
                raise ValidationError(f"pad window needs len(a) == len(b) - 1, got {a.size}, {b.size}")
        elif isinstance(self.boundary, (int, np.integer)) and not isinstance(self.boundary, bool):
            p = int(self.boundary)
            if p < 1 or b.size % p or a.size != b.size:
                raise ValidationError(f"periodic window must hold whole periods of length {p} in both a and b")
            if np.any(~np.isfinite(a)) or np.any(~np.isfinite(b)):
                raise ValidationError("periodic coefficients must be finite")
        else:
            raise ValidationError(f"unknown boundary policy {self.boundary!r}")

    # -- constructors ------------------------------------------------------

    @classmethod
    def constant(cls, a: float, b: float, N: int) -> "JacobiMatrix":
        return cls(np.full(2 * N, float(a)), np.full(2 * N + 1, float(b)), -N)

    @classmethod
    def free(cls, N: int | None = None) -> "JacobiMatrix":
        N = get_profile().window // 2 if N is None else N
        return cls.constant(1.0, 0.0, N)

    @classmethod
    def periodic(cls, a: Sequence[float], b: Sequence[float]) -> "JacobiMatrix":
        """Periodic operator with a(n) = a[n mod p], b(n) = b[n mod p]."""
        a = np.asarray(a, dtype=float)
        return cls(a, np.asarray(b, dtype=float), 0, int(a.size))

    # -- coefficient access ------------------------------------------------

    @property
    def is_periodic(self) -> bool:
        return self.boundary != "pad"

    @property
    def n_min(self) -> int:
        return self.offset

    @property
    def n_max(self) -> int:
        return self.offset + self.b.size - 1

    def a_at(self, n: int) -> float:
        if self.is_periodic:
            return float(self.a[(n - self.offset) % self.a.size])
        i = min(max(n - self.offset, 0), self.a.size - 1) if self.a.size else None
        return 0.0 if i is None else float(self.a[i])

    def b_at(self, n: int) -> float:
        if self.is_periodic:
            return float(self.b[(n - self.offset) % self.b.size])
        return float(self.b[min(max(n - self.offset, 0), self.b.size - 1)])

    def period_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """One period of (a, b) starting at site 0."""
        if not self.is_periodic:
            raise ValidationError("period_arrays needs a periodic boundary policy")
        p = int(self.boundary)
        return np.array([self.a_at(n) for n in range(p)]), np.array([self.b_at(n) for n in range(p)])

    def determined_range(self) -> tuple[int, int]:
        """Largest site range around 0 with finite b and finite couplings inside it."""
        if self.is_periodic:
            return self.n_min, self.n_max
        ok_b = np.isfinite(self.b)
        ok_a = np.isfinite(self.a)
        i0 = -self.offset
        if not (0 <= i0 < self.b.size) or not ok_b[i0]:
            return (0, -1)
        lo = i0
        while lo > 0 and ok_b[lo - 1] and ok_a[lo - 1]:
            lo -= 1
        hi = i0
        while hi < self.b.size - 1 and ok_b[hi + 1] and ok_a[hi]:
            hi += 1
        return lo + self.offset, hi + self.offset

    def shifted(self, k: int = 1) -> "JacobiMatrix":
        """(S^k J)(n) = J(n + k): the coefficient sequence translated left by k."""
        return JacobiMatrix(self.a, self.b, self.offset - k, self.boundary)

    def __add__(self, c: float) -> "JacobiMatrix":
        return JacobiMatrix(self.a, self.b + float(c), self.offset, self.boundary)

    def norm_bound(self) -> float:
        a, b = self.a[np.isfinite(self.a)], self.b[np.isfinite(self.b)]
        return float((np.abs(b).max() if b.size else 0.0) + 2.0 * (a.max() if a.size else 0.0))

    def dense(self) -> np.ndarray:
        """The finite window as a dense symmetric matrix (Dirichlet truncation)."""
        lo, hi = self.determined_range()
        i0, i1 = lo - self.offset, hi - self.offset
        b = self.b[i0 : i1 + 1]
        a = self.a[i0:i1]
        return np.diag(b) + np.diag(a, 1) + np.diag(a, -1)

    # -- io ------------------------------------------------------------------

    def to_dict(self) -> dict:
        def enc(v):
            return [None if not math.isfinite(x) else float(x) for x in v]

        d = {
            "a": enc(self.a),
            "b": enc(self.b),
            "offset": int(self.offset),
            "boundary": "pad" if self.boundary == "pad" else {"periodic": int(self.boundary)},
        }
        if self.weyl is not None:
            d["weyl"] = self.weyl.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "JacobiMatrix":
        try:
            bd = d.get("boundary", "pad")
            if isinstance(bd, dict):
                bd = int(bd["periodic"])
            elif bd != "pad":
                raise ValidationError(f"boundary must be 'pad' or {{'periodic': p}}, got {bd!r}")

            def dec(v):
                return np.array([np.nan if x is None else float(x) for x in v])

            weyl = WeylData.from_dict(d["weyl"]) if d.get("weyl") else None
            return cls(dec(d["a"]), dec(d["b"]), int(d.get("offset", 0)), bd, weyl)
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed Jacobi JSON: {exc}") from exc

    @classmethod
    def load(cls, path) -> "JacobiMatrix":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class TorusPoint:
    """Per-gap coordinates (mu_j, sigma_j); sigma is ignored when mu_j is a gap endpoint."""

    mus: tuple[float, ...]
    sigmas: tuple[int, ...]

    def __init__(self, mus: Iterable[float], sigmas: Iterable[int]):
        mus, sigmas = tuple(float(m) for m in mus), tuple(int(s) for s in sigmas)
        if len(mus) != len(sigmas):
            raise ValidationError("need one sigma per mu")
        if any(s not in (0, 1) for s in sigmas):
            raise ValidationError("sigma entries must be 0 or 1")
        object.__setattr__(self, "mus", mus)
        object.__setattr__(self, "sigmas", sigmas)

    def validate(self, K: FiniteGapSet, tol: float = 1e-12) -> None:
        gs = gaps(K)
        if len(gs) != len(self.mus):
            raise ValidationError(f"K has {len(gs)} gaps but the torus point has {len(self.mus)} coordinates")
        for j, (g, mu) in enumerate(zip(gs, self.mus)):
            if not (g.lo - tol <= mu <= g.hi + tol):
                raise ValidationError(f"mu_{j} = {mu} outside gap [{g.lo}, {g.hi}]")

    def to_dict(self) -> dict:
        return {"mu": list(self.mus), "sigma": list(self.sigmas)}

    @classmethod
    def from_dict(cls, d: dict) -> "TorusPoint":
        try:
            return cls(d["mu"], d["sigma"])
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed torus JSON: {exc}") from exc


# ---------------------------------------------------------------------------
# Green functions


def constant_halfline_m(z, a: float, b: float):
    """Stieltjes transform at the end site of a half-line with constant (a, b)."""
    z = np.asarray(z, dtype=complex)
    w = z - b
    return (-w + np.sqrt(w - 2 * a) * np.sqrt(w + 2 * a)) / (2 * a * a)


def _block(J: JacobiMatrix, i: int) -> tuple[int, int]:
    """Window indices [s, e] of the block containing i, cut at zero couplings."""
    a = J.a
    s = i
    while s > 0 and a[s - 1] != 0:
        s -= 1
    e = i
    while e < J.b.size - 1 and a[e] != 0:
        e += 1
    return s, e


def _window_green(J: JacobiMatrix, n: int, z: complex, margin: int) -> complex:
    i = n - J.offset
    if not (0 <= i < J.b.size):
        raise ValidationError(f"site {n} outside the coefficient window [{J.n_min}, {J.n_max}]")
    s, e = _block(J, i)
    b = J.b[s : e + 1]
    a = J.a[s:e]
    if not (np.all(np.isfinite(b)) and np.all(np.isfinite(a))):
        raise ValidationError(f"coefficients near site {n} are undefined")
    left = s == 0 and J.a.size > 0 and J.a[0] > 0
    right = e == J.b.size - 1 and J.a.size > 0 and J.a[-1] > 0
    if (left and i - s < margin) or (right and e - i < margin):
        raise ValidationError(
            f"site {n} is within {margin} sites of a window edge; enlarge the window or lower the margin"
        )
    diag = (b - z).astype(complex)
    if left:
        aL = J.a[0]
        diag[0] -= aL * aL * constant_halfline_m(z, aL, J.b[0])
    if right:
        aR = J.a[-1]
        diag[-1] -= aR * aR * constant_halfline_m(z, aR, J.b[-1])
    m = diag.size
    ab = np.zeros((3, m), dtype=complex)
    ab[0, 1:] = a
    ab[1] = diag
    ab[2, :-1] = a
    rhs = np.zeros(m, dtype=complex)
    rhs[i - s] = 1.0
    return complex(solve_banded((1, 1), ab, rhs)[i - s])


def _weyl_solutions(J: JacobiMatrix, n: int, z: complex):
    """psi_+(n), psi_-(n) and the Wronskian, normalised by psi_+(0) = psi_-(0) = 1."""
    W = J.weyl
    a0, am1, b0 = J.a_at(0), J.a_at(-1), J.b_at(0)
    Mp, Mm = complex(W.plus_m(z)), complex(W.minus_m(z))
    H = z - b0 + Mp + Mm
    if n == 0:
        return 1.0, 1.0, -H
    if n > 0:
        if a0 == 0:
            raise ValidationError("a(0) = 0: sites n > 0 are decoupled from the Weyl data")
        pp = [1.0, -Mp / a0]
        pm = [1.0, (z - b0 + Mm) / a0]
        for k in range(1, n):
            ak, akm1, bk = J.a_at(k), J.a_at(k - 1), J.b_at(k)
            pp.append(((z - bk) * pp[k] - akm1 * pp[k - 1]) / ak)
            pm.append(((z - bk) * pm[k] - akm1 * pm[k - 1]) / ak)
        return pp[n], pm[n], -H
    if am1 == 0:
        raise ValidationError("a(-1) = 0: sites n < 0 are decoupled from the Weyl data")
    pp = [1.0, (z - b0 + Mp) / am1]
    pm = [1.0, -Mm / am1]
    for k in range(1, -n):
        site = -k
        ak, akm1, bk = J.a_at(site), J.a_at(site - 1), J.b_at(site)
        pp.append(((z - bk) * pp[k] - ak * pp[k - 1]) / akm1)
        pm.append(((z - bk) * pm[k] - ak * pm[k - 1]) / akm1)
    return pp[-n], pm[-n], -H


def green_function(J: JacobiMatrix, n: int, z, *, margin: int | None = None):
    """g_n(z) = <delta_n, (J - z)^{-1} delta_n> for Im z > 0."""
    zs = np.atleast_1d(np.asarray(z, dtype=complex))
    if np.any(zs.imag <= 0):
        raise ValidationError("green_function needs Im z > 0")
    if J.is_periodic:
        a, b = J.period_arrays()
        if np.any(a == 0):
            zero = np.isclose(a, 0)
            raise ValidationError(f"periodic operator with vanishing a at {np.flatnonzero(zero).tolist()}")
        out = np.asarray(floquet.green_diagonal(a, b, n, zs))
    elif J.weyl is not None:
        lo, hi = J.determined_range()
        if not (lo <= n - 1 and n + 1 <= hi):
            raise ValidationError(f"site {n} outside the determined range [{lo}, {hi}]")
        vals = []
        for zz in zs:
            pp, pm, Wr = _weyl_solutions(J, n, complex(zz))
            vals.append(pp * pm / Wr)
        out = np.array(vals)
    else:
        margin = get_profile().edge_margin if margin is None else margin
        out = np.array([_window_green(J, n, complex(zz), margin) for zz in zs])
    MONITOR.record_many("g", zs, out, strict=True)
    return complex(out[0]) if np.ndim(z) == 0 else out


def h_function(J: JacobiMatrix, z, **kw):
    """-1 / g_0(z)."""
    out = -1.0 / np.asarray(green_function(J, 0, z, **kw))
    MONITOR.record_many("h", z, out, strict=True)
    return complex(out) if np.ndim(out) == 0 else out


def half_line_m(J: JacobiMatrix, z, side: str):
    """a(0)^2 m_+(z) (side '+') or a(-1)^2 m_-(z) (side '-').

    m_+ is the Stieltjes transform of the spectral measure of delta_1 for J
    restricted to n >= 1, m_- that of delta_{-1} for J restricted to n <= -1.
    """
    if side not in "+-" or len(side) != 1:
        raise ValueError("side must be '+' or '-'")
    z = np.asarray(z, dtype=complex)
    if J.is_periodic:
        a, b = J.period_arrays()
        out = floquet.half_line_m(a, b, z, side)
    elif J.weyl is not None:
        out = J.weyl.plus_m(z) if side == "+" else J.weyl.minus_m(z)
    else:
        # continued fraction from the far end, starting with the constant lead
        if side == "+":
            sites = range(J.n_max, 0, -1)
            a_end, b_end = float(J.a[-1]), float(J.b[-1])
            coupling = lambda k: J.a_at(k - 1)  # noqa: E731  coupling k -> k-1
            a_in = J.a_at(0)
        else:
            sites = range(J.n_min, 0)
            a_end, b_end = float(J.a[0]), float(J.b[0])
            coupling = lambda k: J.a_at(k)  # noqa: E731  coupling k -> k+1
            a_in = J.a_at(-1)
        tail = a_end * a_end * constant_halfline_m(z, a_end, b_end) if a_end > 0 else 0.0 * z
        m = None
        for k in sites:
            m = 1.0 / (J.b_at(k) - z - tail)
            tail = coupling(k) ** 2 * m
        if m is None:
            raise ValidationError(f"window has no sites on the {side} side")
        out = a_in * a_in * m
    MONITOR.record_many("m" + side, z, out)
    return complex(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# forward map: xi from J


def _snap(v: np.ndarray, thr: float) -> np.ndarray:
    out = np.clip(v.copy(), 0.0, 1.0)
    for s in (0.0, 0.5, 1.0):
        out = np.where(np.abs(v - s) <= thr, s, out)
    return out


def xi_from_J(
    J: JacobiMatrix,
    grid=None,
    y: float | None = None,
    *,
    radius: float | None = None,
    snap: float | None = None,
    refine: bool = True,
) -> KreinFunction:
    """Approximate Krein function from (1/pi) arg h(t + iy) sampled on ``grid``.

    Samples within ``snap`` of 0, 1/2 or 1 are snapped; the others are kept
    as free values. Jumps between two snapped values are located by
    bisection on the sampled phase.
    """
    prof = get_profile()
    y = prof.xi_sample_y if y is None else y
    snap = prof.snap_threshold if snap is None else snap
    R = float(radius) if radius is not None else J.norm_bound() + 1.0
    if grid is None:
        grid = np.linspace(-R, R, 2001)[1:-1]
    grid = np.sort(np.asarray(grid, dtype=float))
    if grid[0] <= -R or grid[-1] >= R:
        raise ValidationError("grid must lie inside (-R, R)")

    def phase(t):
        return np.angle(h_function(J, np.asarray(t) + 1j * y)) / np.pi

    raw = np.asarray(phase(grid))
    vals = _snap(raw, snap)
    snapped = np.isin(vals, (0.0, 0.5, 1.0)) & (np.abs(vals - raw) <= snap)
    # a lone unsnapped sample between two snapped ones sits on a jump (e.g. a
    # band edge hit by the grid), and so does a lone 1/2 between 0 and 1 (the
    # phase of a pole passes through 1/2); drop them so the jump is bisected
    lone = np.zeros(grid.size, dtype=bool)
    lone[1:-1] = snapped[:-2] & snapped[2:] & (
        ~snapped[1:-1] | ((vals[:-2] == 0.0) & (vals[1:-1] == 0.5) & (vals[2:] == 1.0))
    )
    grid, vals, snapped = grid[~lone], vals[~lone], snapped[~lone]
    bps, out = [-R], [float(vals[0])]
    for k in range(1, grid.size):
        if vals[k] == vals[k - 1] and snapped[k] and snapped[k - 1]:
            continue
        if vals[k] == out[-1] and snapped[k]:
            continue
        lo, hi = grid[k - 1], grid[k]
        cut = 0.5 * (lo + hi)
        if refine and snapped[k] and snapped[k - 1]:
            thr = 0.5 * (vals[k - 1] + vals[k])
            up = vals[k] > vals[k - 1]
            for _ in range(60):
                if hi - lo <= 1e-12 * max(1.0, abs(cut)):
                    break
                cut = 0.5 * (lo + hi)
                if (float(phase(cut)) > thr) == up:
                    hi = cut
                else:
                    lo = cut
            cut = 0.5 * (lo + hi)
        if cut <= bps[-1]:
            out[-1] = float(vals[k])
            continue
        bps.append(cut)
        out.append(float(vals[k]))
    bps.append(R)
    return KreinFunction(R, bps, out)


# ---------------------------------------------------------------------------
# inverse map: coefficients from half-line measures


def lanczos_recurrence(x: np.ndarray, w: np.ndarray, steps: int, breakdown: float | None = None):
    """Recurrence coefficients of the discrete measure sum w_k delta_{x_k}.

    Tridiagonalises diag(x) from the start vector sqrt(w)/||sqrt(w)|| with
    full (twice applied) Gram-Schmidt reorthogonalisation. Returns
    ``alpha[0:m]`` and ``beta[1:m]`` with m <= steps; m < steps when the
    Krylov space is exhausted (finitely many support points).
    """
    breakdown = get_profile().lanczos_breakdown if breakdown is None else breakdown
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    q = np.sqrt(w)
    q = q / np.linalg.norm(q)
    scale = max(1.0, float(np.abs(x).max()))
    Q = np.zeros((min(steps, x.size), x.size))
    alpha, beta = [], []
    q_prev, b_prev = np.zeros_like(q), 0.0
    for j in range(Q.shape[0]):
        Q[j] = q
        v = x * q
        al = float(q @ v)
        v = v - al * q - b_prev * q_prev
        for _ in range(2):
            v = v - Q[: j + 1].T @ (Q[: j + 1] @ v)
        alpha.append(al)
        if j == steps - 1:
            break
        bt = float(np.linalg.norm(v))
        if bt < breakdown * scale:
            break
        beta.append(bt)
        q_prev, q, b_prev = q, v / bt, bt
    return np.array(alpha), np.array(beta)


def _ac_node_count(m: SpectralMeasure) -> int:
    return sum(b.nodes.size for b in m.ac_bands)


def _half_coeffs(nu: SpectralMeasure, depth: int, ratio: int, side: str):
    """(a_edge, alphas, betas) padded with NaN to ``depth``."""
    alpha = np.full(depth, np.nan)
    beta = np.full(max(depth - 1, 0), np.nan)
    mass = total_mass(nu)
    if mass <= 0:
        warnings.warn(
            f"nu_{side} has zero mass: a({'0' if side == '+' else '-1'}) = 0 and the {side} half line is undetermined",
            DegenerateWarning,
            stacklevel=3,
        )
        return 0.0, alpha, beta
    n_ac = _ac_node_count(nu)
    if n_ac and depth > n_ac // ratio:
        raise ValidationError(
            f"depth {depth} exceeds {n_ac} quadrature nodes / {ratio}; raise nodes_per_band"
        )
    x, w = nu.discretize()
    al, bt = lanczos_recurrence(x, w, depth)
    alpha[: al.size] = al
    beta[: bt.size] = bt
    return math.sqrt(mass), alpha, beta


def reconstruct_from_halfline(
    nu_plus: SpectralMeasure,
    nu_minus: SpectralMeasure,
    A: float,
    depth: int,
    *,
    weyl: WeylData | None = None,
) -> JacobiMatrix:
    """Coefficients a(n), b(n) for |n| <= depth from the half-line measures.

    a(0)^2 and a(-1)^2 are the masses of nu_plus and nu_minus, b(0) = -A,
    and the normalised measures determine the rest through their recurrence
    coefficients. Coefficients beyond the point where a finitely supported
    measure runs out are NaN.
    """
    if depth < 1:
        raise ValidationError("depth must be >= 1")
    ratio = get_profile().depth_ratio
    a0, al_p, bt_p = _half_coeffs(nu_plus, depth, ratio, "+")
    am1, al_m, bt_m = _half_coeffs(nu_minus, depth, ratio, "-")
    D = depth
    b = np.empty(2 * D + 1)
    a = np.empty(2 * D)
    b[D] = -A
    b[D + 1 :] = al_p
    b[:D] = al_m[::-1]
    # a window covers n = -D .. D-1; a(n) sits at index n + D
    a[D] = a0
    a[D + 1 :] = bt_p
    a[D - 1] = am1
    a[: D - 1] = bt_m[::-1]
    return JacobiMatrix(a, b, -D, "pad", weyl)


def half_line_measure(J: JacobiMatrix, side: str = "+") -> SpectralMeasure:
    """Discrete a(0)^2 rho_+ (or a(-1)^2 rho_-) of the determined window.

    Eigen-decomposition of the truncated half-line block; for a window of
    depth D this is the D-point Gauss rule of the half-line measure.
    """
    lo, hi = J.determined_range()
    if side == "+":
        sites = list(range(1, hi + 1))
        edge = J.a_at(0)
        offd = [J.a_at(k) for k in sites[:-1]]
    else:
        sites = list(range(-1, lo - 1, -1))
        edge = J.a_at(-1)
        offd = [J.a_at(k - 1) for k in sites[:-1]]
    if not sites or edge == 0:
        return SpectralMeasure()
    diag = np.array([J.b_at(k) for k in sites])
    if diag.size == 1:
        return SpectralMeasure([(diag[0], edge * edge)])
    ev, vec = eigh_tridiagonal(diag, np.array(offd))
    return SpectralMeasure(list(zip(ev, edge * edge * vec[0] ** 2)))


# ---------------------------------------------------------------------------
# torus coordinates


def xi_from_torus(K: FiniteGapSet, p: TorusPoint, radius: float | None = None) -> KreinFunction:
    """1 left of K, 1/2 on bands, 0 right of K, and chi_(mu_j, b_j) on gap j."""
    p.validate(K)
    R = K.radius if radius is None else float(radius)
    pieces = [(-R, K.lo, 1.0)]
    for j, band in enumerate(K.bands):
        pieces.append((band.lo, band.hi, 0.5))
        if j < len(p.mus):
            g = gaps(K)[j]
            mu = min(max(p.mus[j], g.lo), g.hi)
            pieces += [(g.lo, mu, 0.0), (mu, g.hi, 1.0)]
    pieces.append((K.hi, R, 0.0))
    return KreinFunction.from_pieces(R, [q for q in pieces if q[1] > q[0]])


def jacobi_from_torus(
    K: FiniteGapSet,
    p: TorusPoint,
    depth: int,
    *,
    nodes_per_band: int | None = None,
) -> JacobiMatrix:
    """Reflectionless J with spectrum K and torus coordinates p.

    xi_from_torus -> extract_measure -> split (ac halved, gap atoms by sigma)
    -> reconstruct_from_halfline. The result carries its exact Weyl data.
    """
    prof = get_profile()
    nb = len(K.bands)
    need = -(-prof.depth_ratio * depth // nb) + 1
    nodes = max(nodes_per_band or prof.nodes_per_band, need)
    xi, rho, nu_p, nu_m, sigma = torus_measures(K, p, nodes)
    weyl = WeylData(xi, tuple((x, w, float(s)) for (x, w), s in zip(rho.atoms, sigma)))
    return reconstruct_from_halfline(nu_p, nu_m, constant_A(xi), depth, weyl=weyl)


def torus_measures(K: FiniteGapSet, p: TorusPoint, nodes_per_band: int | None = None, radius: float | None = None):
    """(xi, rho, nu_plus, nu_minus, sigma per atom of rho) for a torus point."""
    xi = xi_from_torus(K, p, radius)
    rho = extract_measure(xi, K, nodes_per_band)
    sigma = []
    for x, _ in rho.atoms:
        j = min(range(len(p.mus)), key=lambda k: abs(p.mus[k] - x))
        sigma.append(p.sigmas[j])
    nu_p, nu_m = split_nu(rho, K, SplitSpec(sigma))
    return xi, rho, nu_p, nu_m, sigma


def torus_from_periodic(J: JacobiMatrix, closed_gap: float = 1e-9) -> tuple[FiniteGapSet, TorusPoint]:
    """Spectrum and torus coordinates of a periodic operator.

    mu_j is the Dirichlet eigenvalue (zero of the monodromy entry m21) in the
    closure of gap j; sigma_j = 1 when the corresponding solution decays to
    the right, i.e. the point mass belongs to the plus half line.
    """
    a, b = J.period_arrays()
    bands = floquet.band_edges(a, b, closed_gap)
    R = floquet.norm_bound(a, b) + 1.0
    K = FiniteGapSet(bands, R)
    mus, sigmas = [], []
    for g in gaps(K):
        def m21(x):
            return float(floquet.dirichlet_entries(a, b, x)[1])

        flo, fhi = m21(g.lo), m21(g.hi)
        if flo == 0 or fhi == 0:
            mu = g.lo if abs(flo) <= abs(fhi) else g.hi
        elif flo * fhi < 0:
            from scipy.optimize import brentq

            mu = brentq(m21, g.lo, g.hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        else:
            mu = g.lo if abs(flo) <= abs(fhi) else g.hi
        m11 = float(floquet.dirichlet_entries(a, b, mu)[0])
        interior = g.lo < mu < g.hi
        mus.append(mu)
        sigmas.append(1 if (interior and abs(m11) < 1) else 0)
    return K, TorusPoint(mus, sigmas)


def torus_circle_encode(K: FiniteGapSet, p: TorusPoint) -> list[complex]:
    """(mu_j, sigma_j) -> exp(i pi x_j), with x_j = +-(mu_j - a_j)/(b_j - a_j).

    mu_j = a_j goes to 1 and mu_j = b_j to -1 whatever sigma_j is.
    """
    p.validate(K)
    out = []
    for g, mu, s in zip(gaps(K), p.mus, p.sigmas):
        x = (mu - g.lo) / (g.hi - g.lo)
        if mu <= g.lo:
            out.append(1.0 + 0j)
        elif mu >= g.hi:
            out.append(-1.0 + 0j)
        else:
            out.append(complex(np.exp(1j * np.pi * (x if s == 1 else -x))))
    return out


def torus_circle_decode(K: FiniteGapSet, zs: Sequence[complex]) -> TorusPoint:
    gs = gaps(K)
    if len(gs) != len(zs):
        raise ValidationError(f"K has {len(gs)} gaps, got {len(zs)} circle coordinates")
    mus, sigmas = [], []
    for g, z in zip(gs, zs):
        if not np.isclose(abs(z), 1.0, atol=1e-9):
            raise ValidationError(f"circle coordinate {z} is not unimodular")
        x = float(np.angle(z)) / np.pi
        if x == 1.0 or x == -1.0:
            mus.append(g.hi)
            sigmas.append(0)
        elif x == 0.0:
            mus.append(g.lo)
            sigmas.append(0)
        else:
            mus.append(g.lo + abs(x) * (g.hi - g.lo))
            sigmas.append(1 if x > 0 else 0)
    return TorusPoint(mus, sigmas)


# ---------------------------------------------------------------------------
# verification


@dataclass
class ReflectionlessReport:
    passed: bool
    max_abs_re: float
    worst_site: int | None
    worst_t: float | None
    n_samples: int
    vacuous: bool
    edge_zone: float
    tol: float
    y: float
    skipped_bands: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def is_reflectionless(
    J: JacobiMatrix,
    B: FiniteGapSet,
    y: float = 1e-3,
    n_range: Iterable[int] = range(-2, 3),
    tol: float = 1e-2,
    *,
    edge_zone: float | None = None,
    samples_per_band: int = 64,
) -> ReflectionlessReport:
    """max |Re g_n(t + iy)| over band interiors of B, with a pass/fail verdict.

    This tests the y-regularised condition. Near a band edge Re g_n(t + iy)
    behaves like y / d^{3/2} (d the distance to the edge) even for reflectionless
    J, so the default edge zone is max(5y, (y/tol)^{2/3}).
    Bands narrower than twice the edge zone contribute no samples; a report
    with no samples at all passes vacuously and says so.
    """
    if not (0 < y <= 0.1):
        raise ValidationError("y must lie in (0, 0.1]")
    ez = max(5 * y, (y / tol) ** (2.0 / 3.0)) if edge_zone is None else float(edge_zone)
    ts, skipped = [], []
    for band in B.bands:
        lo, hi = band.lo + ez, band.hi - ez
        if hi <= lo:
            skipped.append([band.lo, band.hi])
            continue
        ts.append(np.linspace(lo, hi, samples_per_band))
    if not ts:
        return ReflectionlessReport(True, 0.0, None, None, 0, True, ez, tol, y, skipped)
    t = np.concatenate(ts)
    worst, wn, wt = -1.0, None, None
    ns = list(n_range)
    for n in ns:
        re = np.abs(np.real(green_function(J, n, t + 1j * y)))
        k = int(np.argmax(re))
        if re[k] > worst:
            worst, wn, wt = float(re[k]), n, float(t[k])
    return ReflectionlessReport(worst < tol, worst, wn, wt, t.size * len(ns), False, ez, tol, y, skipped)


def jacobi_distance(J1: JacobiMatrix, J2: JacobiMatrix, n_max: int = 60) -> float:
    """sum_n 2^{-|n|} (|a1(n) - a2(n)| + |b1(n) - b2(n)|) over sites where both are defined."""
    tot = []
    for n in range(-n_max, n_max + 1):
        pairs = []
        for get in ("a_at", "b_at"):
            try:
                v1, v2 = getattr(J1, get)(n), getattr(J2, get)(n)
            except IndexError:
                continue
            if math.isfinite(v1) and math.isfinite(v2):
                pairs.append(abs(v1 - v2))
        tot.append(2.0 ** (-abs(n)) * math.fsum(pairs))
    return math.fsum(tot)


@dataclass
class InclusionReport:
    max_distance: float
    n_bulk: int
    n_total: int
    window: tuple[int, int]

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def spectral_inclusion(J: JacobiMatrix, K: FiniteGapSet, central: float = 0.5, weight: float = 0.25) -> InclusionReport:
    """Distance to K of the window eigenvalues whose eigenvectors live in the bulk.

    Dirichlet truncation creates eigenvalues in the gaps whose eigenvectors sit
    at the window edges; only eigenvectors with at least ``weight`` of their
    mass in the central fraction ``central`` of the window are counted.
    """
    M = J.dense()
    if not np.all(np.isfinite(M)):
        raise NumericalError("window contains undefined coefficients")
    ev, vec = np.linalg.eigh(M)
    m = ev.size
    c0 = int(round(m * (1 - central) / 2))
    c1 = m - c0
    bulk = (vec[c0:c1] ** 2).sum(axis=0) >= weight
    lo = np.array([b.lo for b in K.bands])
    hi = np.array([b.hi for b in K.bands])
    x = ev[bulk]
    d = (np.maximum(lo[None, :] - x[:, None], 0) + np.maximum(x[:, None] - hi[None, :], 0)).min(axis=1) if x.size else np.zeros(0)
    return InclusionReport(float(d.max()) if d.size else 0.0, int(bulk.sum()), m, J.determined_range())
