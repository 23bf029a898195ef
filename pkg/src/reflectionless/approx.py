"""Finite-gap approximation of reflectionless operators.

Pipeline per stage: subdivide the gaps of B with tiny bands, replace xi on
every new gap by a single 0 -> 1 step with the same integral, split the gap
point masses that must be shared between the half lines into twin atoms
around an extra band of width delta^2, and reconstruct.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.integrate import quad

from .config import get_profile
from .errors import ValidationError
from .krein import KreinFunction, atom_weight, constant_A, extract_measure, jump_points, measure_from_xi
from .measures import SpectralMeasure, SplitSpec, split_fractional, weak_star_distance
from .sets import FiniteGapSet, Interval, gaps, lebesgue_symmdiff
from .spectral import (
    JacobiMatrix,
    TorusPoint,
    WeylData,
    is_reflectionless,
    jacobi_distance,
    reconstruct_from_halfline,
)


@dataclass(frozen=True)
class SubdivisionPlan:
    n: int
    delta: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValidationError(f"n must be a positive integer, got {self.n}")
        if not self.delta > 0:
            raise ValidationError(f"band size must be positive, got {self.delta}")

    def subgap_length(self, L: float) -> float:
        return (L - (self.n - 1) * self.delta) / self.n


def subdivide(A0: FiniteGapSet, plan: SubdivisionPlan) -> FiniteGapSet:
    """Replace each gap of A0 by n equal sub-gaps separated by bands of width delta."""
    bands = [(b.lo, b.hi) for b in A0.bands]
    for g in gaps(A0):
        s = plan.subgap_length(g.length)
        if s <= 0:
            raise ValidationError(
                f"band size {plan.delta} too large for n={plan.n} in gap ({g.lo}, {g.hi}) of length {g.length}"
            )
        for k in range(1, plan.n):
            lo = g.lo + k * s + (k - 1) * plan.delta
            bands.append((lo, lo + plan.delta))
    return FiniteGapSet(bands, A0.radius, min_separation=0.0)


# ---------------------------------------------------------------------------
# averaged Krein functions


@dataclass
class _Gap:
    lo: float
    hi: float
    mu: float


def _hull_check(xi: KreinFunction, S: FiniteGapSet, tol: float = 1e-12) -> None:
    for a, b, v in xi.pieces_in(-xi.radius, S.lo):
        if b - a > tol and v != 1.0:
            raise ValidationError(f"xi must equal 1 left of the set, found {v} on ({a}, {b})")
    for a, b, v in xi.pieces_in(S.hi, xi.radius):
        if b - a > tol and v != 0.0:
            raise ValidationError(f"xi must equal 0 right of the set, found {v} on ({a}, {b})")


def averaged_xi(
    xi: KreinFunction,
    An: FiniteGapSet,
    protected: Sequence[Interval] | None = None,
    *,
    return_set: bool = False,
):
    """Krein function in X(An') with the same integral as xi over every gap.

    On a gap (a, b): xi_n = chi_(mu, b), mu = b - int_a^b xi. A gap with
    mu = b deletes the (unprotected) band at its right end, with xi_n = 0 on
    it; afterwards a gap with mu = a deletes the unprotected band at its left
    end, with xi_n = 1 on it. Doing the two rules one after the other means a
    band is never claimed twice. Protected bands (by default those on which
    xi is identically 1/2) always survive. An' is returned with
    ``return_set=True``.
    """
    _hull_check(xi, An)
    if protected is None:
        protected = [b for b in An.bands if all(v == 0.5 for _, _, v in xi.pieces_in(b.lo, b.hi))]
    prot = {(b.lo, b.hi) for b in protected}
    bands = [[b.lo, b.hi] for b in An.bands]
    glist = []
    for g in gaps(An):
        integral = xi.integral(g.lo, g.hi)
        glist.append(_Gap(g.lo, g.hi, max(g.lo, g.hi - integral)))
    tol = 1e-14 * max(1.0, xi.radius)

    # rule 1: mu = b, delete the band to the right (xi_n = 0 there)
    j = 0
    while j < len(glist):
        g = glist[j]
        right = bands[j + 1]
        if g.mu >= g.hi - tol and tuple(right) not in prot:
            if j + 1 < len(glist):
                nxt = glist[j + 1]
                glist[j] = _Gap(g.lo, nxt.hi, nxt.mu)
                del glist[j + 1]
            else:
                del glist[j]
            del bands[j + 1]
            continue
        j += 1
    # rule 2: mu = a, delete the band to the left (xi_n = 1 there)
    j = len(glist) - 1
    while j >= 0:
        g = glist[j]
        left = bands[j]
        if g.mu <= g.lo + tol and tuple(left) not in prot:
            if j > 0:
                prv = glist[j - 1]
                glist[j - 1] = _Gap(prv.lo, g.hi, prv.mu)
                del glist[j]
            else:
                del glist[j]
            del bands[j]
        j -= 1
    if not bands:
        raise ValidationError("every band was deleted; protect at least one band")
    R = xi.radius
    pieces = [(-R, bands[0][0], 1.0)]
    for k, (lo, hi) in enumerate(bands):
        pieces.append((lo, hi, 0.5))
        if k < len(glist):
            g = glist[k]
            pieces += [(g.lo, g.mu, 0.0), (g.mu, g.hi, 1.0)]
    pieces.append((bands[-1][1], R, 0.0))
    xin = KreinFunction.from_pieces(R, [p for p in pieces if p[1] > p[0]])
    if return_set:
        return xin, FiniteGapSet(bands, An.radius, min_separation=0.0)
    return xin


# ---------------------------------------------------------------------------
# band weight bound


def lemma32_density(x, A: float, B: float, delta: float, *, R: float | None = None):
    """Density of rho on (0, delta) for the maximising arrangement.

    xi = 0 on (-R, -A), 1 on (-A, 0), 1/2 on (0, delta), 0 on (delta, B),
    1 on (B, R); then (1/pi)|H(x)| = (1/pi)(x+R)(R-x)/(B-x) * h(x) with
    h(x) = sqrt(x(delta - x))/(A + x).
    """
    R = _default_R(A, B) if R is None else R
    x = np.asarray(x, dtype=float)
    return (x + R) * (R - x) / (B - x) * band_factor(x, A, delta) / np.pi


def band_factor(x, A: float, delta: float):
    """h_delta(x) = sqrt(x(delta - x)) / (A + x) on [0, delta]."""
    x = np.asarray(x, dtype=float)
    return np.sqrt(np.clip(x * (delta - x), 0.0, None)) / (A + x)


def _default_R(A: float, B: float) -> float:
    return 2.0 * max(A, B)


def lemma32_band_weight(A: float, B: float, delta: float, *, R: float | None = None) -> float:
    """Largest possible rho([0, delta]) given xi on (-A, B); tends to 0 like delta^2."""
    R = _default_R(A, B) if R is None else R
    if not (0 < delta < B and 0 < A < R and B < R):
        raise ValidationError("need 0 < delta < B and 0 < A, B < R")
    # algebraic weight x^(1/2) (delta - x)^(1/2) handles the square-root edges
    val, _ = quad(
        lambda x: (x + R) * (R - x) / ((B - x) * (A + x)) / np.pi,
        0.0,
        delta,
        weight="alg",
        wvar=(0.5, 0.5),
        epsabs=0.0,
        epsrel=1e-12,
    )
    return float(val)


def lemma32_xi(A: float, B: float, delta: float, *, R: float | None = None) -> KreinFunction:
    """The maximising Krein function of the band-weight bound."""
    R = _default_R(A, B) if R is None else R
    return KreinFunction(R, [-R, -A, 0.0, delta, B, R], [0.0, 1.0, 0.5, 0.0, 1.0])


# ---------------------------------------------------------------------------
# splitting a point mass


def _jump_clearance(xi: KreinFunction, mu: float) -> tuple[float, float]:
    bps = xi.breakpoints
    k = int(np.argmin(np.abs(np.asarray(bps) - mu)))
    atom_weight(xi, mu)  # validates the 0 -> 1 jump
    return mu - bps[k - 1], bps[k + 1] - mu


def split_point_mass(xi: KreinFunction, mu: float, g: float, delta: float) -> KreinFunction:
    """Replace the 0 -> 1 jump at mu by twin jumps at mu - g delta and mu + (1-g) delta.

    xi becomes 1 on (mu - g delta, mu), 1/2 on (mu, mu + delta^2) and 0 on
    (mu + delta^2, mu + (1-g) delta).
    """
    if not (0.0 < g < 1.0):
        raise ValidationError(f"g must lie in (0, 1), got {g}")
    if not (0.0 < delta < 1.0):
        raise ValidationError("delta must lie in (0, 1) so that delta^2 < (1-g) delta is possible")
    if delta * delta >= (1 - g) * delta:
        raise ValidationError(f"delta={delta} too large for g={g}: the band would swallow the right twin")
    left, right = _jump_clearance(xi, mu)
    if left <= delta or right <= delta:
        raise ValidationError(
            f"insufficient clearance around mu={mu}: {left:.3g} left, {right:.3g} right, need > delta={delta}"
        )
    out = xi.overwrite(mu - g * delta, mu, 1.0)
    out = out.overwrite(mu, mu + delta * delta, 0.5)
    return out.overwrite(mu + delta * delta, mu + (1 - g) * delta, 0.0)


def split_weights_closed_form(xi0: KreinFunction, mu: float, g: float, delta: float) -> tuple[float, float]:
    """Twin weights in closed form, with A, B measured from mu to the gap ends.

    w_left  = g^(1/2) (g + delta)^(1/2) (B + g delta) h(mu - g delta)
    w_right = (1-g)^(1/2) (1-g-delta)^(1/2) (B - (1-g) delta) h(mu + (1-g) delta)

    where h(z) = (z + R) exp(int over the complement of the gap of xi/(t - z)).
    The right factor of B uses the distance from mu to the right end of the
    1-piece.
    """
    k = int(np.argmin(np.abs(np.asarray(xi0.breakpoints) - mu)))
    lo, hi = xi0.breakpoints[k - 1], xi0.breakpoints[k + 1]
    B = hi - mu

    def h(x):
        expo = 0.0
        for a, b, v in xi0.pieces:
            if v and (b <= lo or a >= hi):
                expo += v * math.log(abs((b - x) / (a - x)))
        return (x + xi0.radius) * math.exp(expo)

    wl = math.sqrt(g) * math.sqrt(g + delta) * (B + g * delta) * h(mu - g * delta)
    wr = math.sqrt(1 - g) * math.sqrt(1 - g - delta) * (B - (1 - g) * delta) * h(mu + (1 - g) * delta)
    return wl, wr


def greedy_sigma(weights: Sequence[float], fractions: Sequence[float]) -> list[int]:
    """0/1 flags whose weighted sum tracks sum(f_j w_j).

    Atoms are visited by decreasing weight (ties by index, so the order is
    deterministic); an atom is flipped to 1 whenever that moves the running
    sum closer to the target.
    """
    w = np.asarray(weights, dtype=float)
    target = float(np.dot(w, fractions))
    order = sorted(range(w.size), key=lambda k: (-w[k], k))
    sig = [0] * w.size
    s = 0.0
    for k in order:
        if abs(s + w[k] - target) < abs(s - target):
            sig[k] = 1
            s += w[k]
    return sig


# ---------------------------------------------------------------------------
# the pipeline


@dataclass
class StageResult:
    plan: SubdivisionPlan
    P: FiniteGapSet
    xi: KreinFunction
    J: JacobiMatrix
    nu_plus: SpectralMeasure
    diagnostics: dict = field(default_factory=dict)


def _target_fraction(x_new: float, sub: tuple[float, float], atoms: list[tuple[float, float, float]]) -> float:
    """Mass-weighted split fraction of the original atoms lying in ``sub``."""
    inside = [(w, f) for x, w, f in atoms if sub[0] <= x <= sub[1]]
    tot = math.fsum(w for w, _ in inside)
    if tot == 0:
        return 0.0
    return math.fsum(w * f for w, f in inside) / tot


def target_operator(B: FiniteGapSet, xi: KreinFunction, fractions: Sequence[float], depth: int, nodes_per_band: int | None = None):
    """J in R(B): nu_+ = 1/2 (ac part on B) + sum f_j w_j delta_{x_j}."""
    nodes = _nodes(depth, xi, nodes_per_band)
    rho = measure_from_xi(xi, nodes)
    if len(fractions) != len(rho.atoms):
        raise ValidationError(f"split spec has {len(fractions)} entries for {len(rho.atoms)} point masses")
    nu_p, nu_m = split_fractional(rho, B, fractions)
    on_B = all(any(kb.lo - 1e-12 <= b.lo and b.hi <= kb.hi + 1e-12 for kb in B.bands) for b in rho.ac_bands)
    weyl = WeylData(xi, tuple((x, w, float(f)) for (x, w), f in zip(rho.atoms, fractions))) if on_B else None
    return reconstruct_from_halfline(nu_p, nu_m, constant_A(xi), depth, weyl=weyl), nu_p


def _nodes(depth: int, xi: KreinFunction, nodes_per_band: int | None) -> int:
    prof = get_profile()
    nb = max(1, sum(1 for _, _, v in xi.pieces if 0 < v < 1))
    return max(nodes_per_band or prof.nodes_per_band, -(-prof.depth_ratio * depth // nb) + 1)


def _fractions(split: SplitSpec, n_atoms: int) -> list[float]:
    if len(split.sigma) != n_atoms:
        raise ValidationError(f"split spec has {len(split.sigma)} entries for {n_atoms} point masses")
    return list(split.g) if split.g is not None else [float(s) for s in split.sigma]


def approximate_reflectionless(
    B: FiniteGapSet,
    xi: KreinFunction,
    split: SplitSpec,
    schedule: Sequence[SubdivisionPlan],
    *,
    depth: int = 30,
    y: float = 1e-3,
    tol: float = 1e-2,
    n_range: Sequence[int] = range(-2, 3),
    nodes_per_band: int | None = None,
) -> list[StageResult]:
    """Approximants J_n in R_0(P_n) of the J in R(B) given by (xi, split).

    ``split`` carries one entry per point mass of rho (in increasing
    position): ``g`` when present, otherwise ``sigma``, is the fraction that
    goes to nu_plus. The absolutely continuous part on B is halved, and any
    absolutely continuous part off B goes to nu_minus.
    """
    _hull_check(xi, B)
    rho_atoms = [(mu, atom_weight(xi, mu)) for mu in jump_points(xi)]
    fr = _fractions(split, len(rho_atoms))
    orig = [(x, w, f) for (x, w), f in zip(rho_atoms, fr)]
    J_target, nu_target = target_operator(B, xi, fr, depth, nodes_per_band)

    out = []
    for plan in schedule:
        An = subdivide(B, plan)
        xin, An2 = averaged_xi(xi, An, protected=list(B.bands), return_set=True)
        # decide how each remaining gap atom is shared
        splittable, fixed, extra_bands = [], [], []
        for g in gaps(An2):
            for mu in jump_points(xin):
                if g.lo < mu < g.hi:
                    f = _target_fraction(mu, (g.lo, g.hi), orig)
                    if f in (0.0, 1.0):
                        fixed.append((mu, f))
                    else:
                        splittable.append((mu, f))
        xit = xin
        sig_by_pos = {mu: f for mu, f in fixed}
        unsplit = []
        for mu, f in splittable:
            try:
                xit = split_point_mass(xit, mu, f, plan.delta)
            except ValidationError:
                unsplit.append((mu, f))
                continue
            extra_bands.append((mu, mu + plan.delta * plan.delta))
            sig_by_pos[mu - f * plan.delta] = 1.0
            sig_by_pos[mu + (1 - f) * plan.delta] = 0.0
        if unsplit:
            ws = [atom_weight(xit, mu) for mu, _ in unsplit]
            for (mu, _), s in zip(unsplit, greedy_sigma(ws, [f for _, f in unsplit])):
                sig_by_pos[mu] = float(s)
        P = FiniteGapSet([(b.lo, b.hi) for b in An2.bands] + extra_bands, B.radius, min_separation=0.0)
        nodes = _nodes(depth, xit, nodes_per_band)
        rho_n = extract_measure(xit, P, nodes)
        fracs = []
        for x, _ in rho_n.atoms:
            key = min(sig_by_pos, key=lambda m: abs(m - x)) if sig_by_pos else None
            if key is None or abs(key - x) > 1e-9 * max(1.0, abs(x)):
                raise ValidationError(f"internal: no split decision for the point mass at {x}")
            fracs.append(sig_by_pos[key])
        nu_p, nu_m = split_fractional(rho_n, P, fracs)
        weyl = WeylData(xit, tuple((x, w, f) for (x, w), f in zip(rho_n.atoms, fracs)))
        Jn = reconstruct_from_halfline(nu_p, nu_m, constant_A(xit), depth, weyl=weyl)
        rep = is_reflectionless(Jn, P, y, n_range, tol)
        diag = {
            "n": plan.n,
            "delta": plan.delta,
            "d_J": jacobi_distance(Jn, J_target),
            "symmdiff_PB": lebesgue_symmdiff(P, B),
            "weak_star_nu_plus": weak_star_distance(nu_p, nu_target, B.radius),
            "bands": len(P.bands),
            "split_atoms": len(extra_bands),
            "greedy_atoms": len(unsplit),
            "reflectionless_max_re": rep.max_abs_re,
            "reflectionless_pass": rep.passed,
            "reflectionless_vacuous": rep.vacuous,
        }
        out.append(StageResult(plan, P, xit, Jn, nu_p, diag))
    return out


# ---------------------------------------------------------------------------
# moving torus data between nearby sets


def transport_torus_data(K: FiniteGapSet, K2: FiniteGapSet, p: TorusPoint, length_floor: float = 0.0) -> TorusPoint:
    """Carry (mu, sigma) from the gaps of K to the matching gaps of K2.

    Gap (a, b) of K matches gap (a', b') of K2 when |a' - a| + |b' - b| is
    below a tenth of min(mu - a, b - mu), or of b - a when mu is an
    endpoint. Interior mu and sigma are kept, endpoint mu follow their
    endpoint. Gaps of K2 without partner get mu = right endpoint.
    """
    p.validate(K)
    g1, g2 = gaps(K), gaps(K2)
    mus = [g.hi for g in g2]
    sig = [0] * len(g2)
    taken = {}
    for j, (g, mu, s) in enumerate(zip(g1, p.mus, p.sigmas)):
        interior = g.lo < mu < g.hi
        clearance = min(mu - g.lo, g.hi - mu) if interior else g.length
        cands = [k for k, h in enumerate(g2) if abs(h.lo - g.lo) + abs(h.hi - g.hi) < clearance / 10]
        if not cands:
            if g.length < length_floor:
                continue
            raise ValidationError(f"gap {j} ({g.lo}, {g.hi}) of K has no matching gap in K2")
        k = min(cands, key=lambda k: abs(g2[k].lo - g.lo) + abs(g2[k].hi - g.hi))
        if k in taken:
            raise ValidationError(f"gaps {taken[k]} and {j} of K both match gap {k} of K2")
        taken[k] = j
        h = g2[k]
        if interior:
            if not h.lo < mu < h.hi:
                raise ValidationError(f"mu_{j}={mu} falls outside the matched gap ({h.lo}, {h.hi})")
            mus[k], sig[k] = mu, s
        elif mu <= g.lo:
            mus[k], sig[k] = h.lo, 0
        else:
            mus[k], sig[k] = h.hi, 0
    return TorusPoint(mus, sig)
