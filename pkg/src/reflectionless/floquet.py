"""Transfer-matrix machinery for periodic Jacobi coefficients.

Conventions: the one-step transfer matrix at site n maps
``(psi(n), psi(n-1)) -> (psi(n+1), psi(n))`` for solutions of
``a(n) psi(n+1) + a(n-1) psi(n-1) + b(n) psi(n) = z psi(n)``; the monodromy
based at site s is the product over one period starting at s + 1, so it maps
``(psi(s+1), psi(s)) -> (psi(s+p+1), psi(s+p))``.
"""

from __future__ import annotations

import numpy as np
from numpy.polynomial import Polynomial
from scipy.optimize import brentq

from .errors import ValidationError


def _check(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or a.size == 0:
        raise ValidationError("periodic coefficients a, b must be equal-length 1-d arrays")
    if np.any(a <= 0):
        raise ValidationError("transfer matrices need a(n) > 0")
    return a, b


def monodromy(a, b, z, base: int = 0):
    """Monodromy matrix entries (m11, m12, m21, m22), vectorised over z."""
    a, b = _check(a, b)
    p = a.size
    z = np.asarray(z)
    m11 = np.ones_like(z, dtype=np.result_type(z, float))
    m12 = np.zeros_like(m11)
    m21 = np.zeros_like(m11)
    m22 = np.ones_like(m11)
    for k in range(1, p + 1):
        n = (base + k) % p
        an, anm1 = a[n], a[(n - 1) % p]
        t11 = (z - b[n]) / an
        t12 = -anm1 / an
        # T @ M with T = [[t11, t12], [1, 0]]
        m11, m12, m21, m22 = t11 * m11 + t12 * m21, t11 * m12 + t12 * m22, m11, m12
    return m11, m12, m21, m22


def discriminant(a, b, z):
    m11, _, _, m22 = monodromy(a, b, z)
    return m11 + m22


def _discriminant_poly(a, b) -> Polynomial:
    a, b = _check(a, b)
    p = a.size
    one, zero = Polynomial([1.0]), Polynomial([0.0])
    M = [[one, zero], [zero, one]]
    for k in range(1, p + 1):
        n = k % p
        t11 = Polynomial([-b[n], 1.0]) / a[n]
        t12 = -a[(n - 1) % p] / a[n]
        M = [[t11 * M[0][0] + t12 * M[1][0], t11 * M[0][1] + t12 * M[1][1]], [M[0][0], M[0][1]]]
    return M[0][0] + M[1][1]


def norm_bound(a, b) -> float:
    return float(np.max(np.abs(b)) + 2.0 * np.max(np.abs(a)))


def band_edges(a, b, closed_gap: float = 1e-9) -> list[tuple[float, float]]:
    """Bands {x : |discriminant(x)| <= 2}, endpoints refined by bracketing.

    The discriminant is monotone between consecutive critical points; each
    monotone stretch carries one band. Bands closer than ``closed_gap`` are
    merged (the gap has closed).
    """
    a, b = _check(a, b)
    L = norm_bound(a, b) + 1.0
    crit = []
    if a.size > 1:
        roots = _discriminant_poly(a, b).deriv().roots()
        crit = sorted(float(r.real) for r in roots if abs(r.imag) < 1e-6 * max(1.0, abs(r)))
    cuts = [-L] + [c for c in crit if -L < c < L] + [L]

    def D(x):
        return float(discriminant(a, b, x))

    bands = []
    for l, r in zip(cuts, cuts[1:]):
        dl, dr = D(l), D(r)
        lo_val, hi_val = max(-2.0, min(dl, dr)), min(2.0, max(dl, dr))
        if lo_val > hi_val:
            continue
        xs = []
        for val in (lo_val, hi_val):
            if val == dl:
                xs.append(l)
            elif val == dr:
                xs.append(r)
            else:
                xs.append(brentq(lambda x: D(x) - val, l, r, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200))
        bands.append([min(xs), max(xs)])
    merged: list[list[float]] = []
    for lo, hi in sorted(bands):
        if merged and lo - merged[-1][1] < closed_gap:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    return [(lo, hi) for lo, hi in merged]


def _weyl_ratios(a, b, z, base: int):
    """psi(base+1)/psi(base) for the solutions decaying at +inf and at -inf."""
    m11, m12, m21, m22 = monodromy(a, b, z, base)
    tr = m11 + m22
    det = m11 * m22 - m12 * m21
    s = np.sqrt(tr * tr - 4 * det + 0j)
    l1, l2 = 0.5 * (tr + s), 0.5 * (tr - s)
    small = np.where(np.abs(l1) < np.abs(l2), l1, l2)
    big = np.where(np.abs(l1) < np.abs(l2), l2, l1)

    def ratio(lam):
        d1, d2 = m21, lam - m11
        return np.where(np.abs(d1) >= np.abs(d2), (lam - m22) / np.where(d1 == 0, 1, d1), m12 / np.where(d2 == 0, 1, d2))

    return ratio(small), ratio(big)


def green_diagonal(a, b, n: int, z):
    """<delta_n, (J - z)^{-1} delta_n> for the whole-line periodic operator."""
    a, b = _check(a, b)
    z = np.asarray(z, dtype=complex)
    if np.any(z.imag == 0):
        raise ValidationError("Floquet Green function is evaluated off the real axis only")
    rp, rm = _weyl_ratios(a, b, z, n)
    out = 1.0 / (a[n % a.size] * (rp - rm))
    return complex(out) if out.ndim == 0 else out


def half_line_m(a, b, z, side: str):
    """a(0)^2 m_+(z) or a(-1)^2 m_-(z) for the periodic operator."""
    a, b = _check(a, b)
    z = np.asarray(z, dtype=complex)
    rp, rm = _weyl_ratios(a, b, z, 0)
    if side == "+":
        out = -a[0] * rp
    elif side == "-":
        out = a[0] * rm - (z - b[0])
    else:
        raise ValueError("side must be '+' or '-'")
    return complex(out) if out.ndim == 0 else out


def dirichlet_entries(a, b, x):
    """(m11, m21) of the monodromy based at 0 on the real axis.

    Zeros of m21 are the points where some solution vanishes at sites 0 and
    p; there, |m11| < 1 means that solution decays towards +inf.
    """
    m11, _, m21, _ = monodromy(a, b, np.asarray(x, dtype=float), 0)
    return m11, m21
