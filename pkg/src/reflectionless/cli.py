"""Command line front end.

Every subcommand prints a JSON result on stdout. With ``--out DIR`` it also
writes ``result.json``, CSV tables and PNG figures into DIR. Exit codes:
0 success, 1 a verification check failed, 2 invalid input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import approx, plotting, spectral, toda
from .config import ENV_VAR, PROFILES, get_profile
from .errors import NumericalError, ValidationError
from .krein import KreinFunction, constant_A
from .measures import SpectralMeasure, SplitSpec
from .sets import FiniteGapSet, delta_metric, hausdorff, lebesgue_symmdiff

log = logging.getLogger("reflectionless")

EXIT_OK, EXIT_CHECK, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2, 3

COMMANDS = ("forward", "reconstruct", "torus", "approximate", "toda", "metric", "verify")


# ---------------------------------------------------------------------------
# output helpers


def _clean(obj):
    """JSON-safe copy: numpy scalars to python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, complex):
        return [_clean(obj.real), _clean(obj.imag)]
    return obj


def _dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False)


class Output:
    def __init__(self, out: str | None):
        self.dir = Path(out) if out else None
        if self.dir:
            self.dir.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path | None:
        return self.dir / name if self.dir else None

    def csv(self, name: str, header, rows) -> None:
        if not self.dir:
            return
        with open(self.dir / name, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow(["" if isinstance(v, float) and not math.isfinite(v) else _fmt(v) for v in r])

    def figure(self, name: str, fn, *args, **kw) -> None:
        if self.dir:
            fn(*args, self.dir / name, **kw)

    def result(self, obj) -> None:
        text = _dumps(obj)
        print(text)
        if self.dir:
            (self.dir / "result.json").write_text(text + "\n")


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ValidationError(f"input file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from None


def _coef_rows(J):
    rows = []
    for i, n in enumerate(range(J.n_min, J.n_max + 1)):
        a = float(J.a[i]) if i < J.a.size else float("nan")
        rows.append([n, a, float(J.b[i])])
    return rows


def _int_range(text: str) -> range:
    lo, _, hi = text.partition(":")
    return range(int(lo), int(hi or lo) + 1)


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(",", " ").split()] if text else []


# ---------------------------------------------------------------------------
# subcommands


def cmd_forward(args, out: Output) -> int:
    J = spectral.JacobiMatrix.from_dict(_load_json(args.jacobi))
    prof = get_profile()
    y = args.y or prof.xi_sample_y
    R = args.radius or J.norm_bound() + 1.0
    grid = np.linspace(-R, R, args.grid + 2)[1:-1]
    xi = spectral.xi_from_J(J, grid, y, radius=R)
    phase = np.angle(spectral.h_function(J, grid + 1j * y)) / np.pi
    res = {"command": "forward", "xi": xi.to_dict(), "A": constant_A(xi), "b0": 0.0 - constant_A(xi), "y": y}
    K = nu_plus = None
    if J.is_periodic:
        K, tp = spectral.torus_from_periodic(J)
        xi_exact, _, nu_plus, _, _ = spectral.torus_measures(K, tp, radius=R)
        res.update(set=K.to_dict(), torus=tp.to_dict(), xi_exact=xi_exact.to_dict(), nu_plus=nu_plus.to_dict())
    out.csv("phase.csv", ["t", "phase", "xi"], zip(grid, phase, xi(grid)))
    out.figure("xi.png", plotting.plot_xi, xi, samples=(grid, phase), K=K)
    if nu_plus is not None:
        rows = [["atom", x, w] for x, w in nu_plus.atoms]
        rows += [["ac", x, d] for b in nu_plus.ac_bands for x, d in zip(b.nodes, b.density)]
        out.csv("nu_plus.csv", ["kind", "x", "value"], rows)
        out.figure("nu_plus.png", plotting.plot_measure, nu_plus, K=K)
    out.result(res)
    return EXIT_OK


def cmd_reconstruct(args, out: Output) -> int:
    nu_p = SpectralMeasure.from_dict(_load_json(args.nu_plus))
    nu_m = SpectralMeasure.from_dict(_load_json(args.nu_minus))
    J = spectral.reconstruct_from_halfline(nu_p, nu_m, args.A, args.depth)
    out.csv("coefficients.csv", ["n", "a", "b"], _coef_rows(J))
    out.figure("coefficients.png", plotting.plot_coefficients, J)
    out.result({"command": "reconstruct", "jacobi": J.to_dict(), "determined_range": list(J.determined_range())})
    return EXIT_OK


def cmd_torus(args, out: Output) -> int:
    K = FiniteGapSet.from_dict(_load_json(args.set))
    tp = spectral.TorusPoint(args.mu, args.sigma if args.sigma else [0] * len(args.mu))
    J = spectral.jacobi_from_torus(K, tp, args.depth, nodes_per_band=args.nodes)
    zs = spectral.torus_circle_encode(K, tp)
    out.csv("coefficients.csv", ["n", "a", "b"], _coef_rows(J))
    out.figure("coefficients.png", plotting.plot_coefficients, J)
    out.figure("torus.png", plotting.plot_torus, K, zs)
    out.result(
        {
            "command": "torus",
            "jacobi": J.to_dict(),
            "torus": tp.to_dict(),
            "circle": [[z.real, z.imag] for z in zs],
            "xi": spectral.xi_from_torus(K, tp).to_dict(),
        }
    )
    return EXIT_OK


def _parse_schedule(text: str) -> list[approx.SubdivisionPlan]:
    plans = []
    for item in text.split(","):
        n, _, d = item.strip().partition(":")
        if not d:
            raise ValidationError(f"schedule entries look like n:delta, got {item!r}")
        plans.append(approx.SubdivisionPlan(int(n), float(d)))
    return plans


def cmd_approximate(args, out: Output) -> int:
    B = FiniteGapSet.from_dict(_load_json(args.set))
    xi = KreinFunction.from_dict(_load_json(args.xi))
    split = SplitSpec(args.sigma, args.g if args.g else None)
    stages = approx.approximate_reflectionless(
        B, xi, split, _parse_schedule(args.schedule), depth=args.depth, y=args.y, tol=args.tol
    )
    rows = [s.diagnostics for s in stages]
    keys = ["n", "delta", "d_J", "symmdiff_PB", "weak_star_nu_plus", "bands", "split_atoms", "greedy_atoms",
            "reflectionless_max_re", "reflectionless_pass"]
    out.csv("diagnostics.csv", ["stage"] + keys, [[k + 1] + [r[c] for c in keys] for k, r in enumerate(rows)])
    out.figure("stages.png", plotting.plot_stages, rows)
    for k, s in enumerate(stages):
        out.csv(f"stage{k + 1}_coefficients.csv", ["n", "a", "b"], _coef_rows(s.J))
    res = {
        "command": "approximate",
        "stages": [
            {"set": s.P.to_dict(), "xi": s.xi.to_dict(), "jacobi": s.J.to_dict(), "diagnostics": s.diagnostics}
            for s in stages
        ],
    }
    out.result(res)
    return EXIT_OK if all(r["reflectionless_pass"] for r in rows) else EXIT_CHECK


def cmd_toda(args, out: Output) -> int:
    if args.jacobi:
        J0 = toda.PeriodicJacobi.from_dict(_load_json(args.jacobi))
    else:
        J0 = toda.PeriodicJacobi(np.array(_floats(args.a)), np.array(_floats(args.b)))
    coeffs = _floats(args.poly)
    steps = int(round(args.t_end / args.dt))
    every = args.record_every or max(1, steps // 100)
    traj = toda.toda_flow(J0, coeffs, args.t_end, args.dt, record_every=every)
    K0 = toda.spectrum(J0)
    nb = len(K0.bands)
    rows = []
    for k, t in enumerate(traj.times):
        Kt = toda.spectrum(traj.state(k))
        e = Kt.endpoints().tolist() if len(Kt.bands) == nb else [float("nan")] * (2 * nb)
        rows.append([t] + traj.a[k].tolist() + traj.b[k].tolist() + e)
    p = J0.period
    header = ["t"] + [f"a{j}" for j in range(p)] + [f"b{j}" for j in range(p)]
    header += [f"band{j}_{s}" for j in range(nb) for s in ("lo", "hi")]
    out.csv("trajectory.csv", header, rows)
    out.figure("trajectory.png", plotting.plot_toda, traj)
    K1 = toda.spectrum(traj.final)
    res = {
        "command": "toda",
        "poly": coeffs,
        "final": traj.final.to_dict(),
        "spectrum_initial": K0.to_dict(),
        "spectrum_final": K1.to_dict(),
        "band_drift": toda.band_drift(K0, K1),
        "invariants_initial": toda.invariants(J0),
        "invariants_final": toda.invariants(traj.final),
        "max_symmetrisation": float(traj.resym.max()),
    }
    out.result(res)
    return EXIT_OK


def cmd_metric(args, out: Output) -> int:
    K1 = FiniteGapSet.from_dict(_load_json(args.a))
    K2 = FiniteGapSet.from_dict(_load_json(args.b))
    res = {"hausdorff": hausdorff(K1, K2), "symmdiff": lebesgue_symmdiff(K1, K2), "delta": delta_metric(K1, K2)}
    out.csv("metric.csv", ["hausdorff", "symmdiff", "delta"], [[res["hausdorff"], res["symmdiff"], res["delta"]]])
    out.result(res)
    return EXIT_OK


def cmd_verify(args, out: Output) -> int:
    J = spectral.JacobiMatrix.from_dict(_load_json(args.jacobi))
    K = FiniteGapSet.from_dict(_load_json(args.set))
    rep = spectral.is_reflectionless(J, K, args.y, _int_range(args.n_range), args.tol)
    res = {"command": "verify", "reflectionless": rep.to_dict(), "passed": rep.passed}
    out.result(res)
    return EXIT_OK if rep.passed else EXIT_CHECK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="reflectionless", description=__doc__.splitlines()[0])
    p.add_argument("--profile", choices=sorted(PROFILES), help=f"tolerance profile (default from ${ENV_VAR})")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--out", help="directory for result.json, CSV tables and PNG figures")
        sp.add_argument("--seed", type=int, default=0, help="recorded in the output; all runs are deterministic")

    sp = sub.add_parser("forward", help="Krein function (and torus data for periodic J) from coefficients")
    sp.add_argument("--jacobi", required=True)
    sp.add_argument("--y", type=float)
    sp.add_argument("--radius", type=float)
    sp.add_argument("--grid", type=int, default=2001, help="number of interior sample points")
    common(sp)

    sp = sub.add_parser("reconstruct", help="coefficients from half-line measures")
    sp.add_argument("--nu-plus", required=True)
    sp.add_argument("--nu-minus", required=True)
    sp.add_argument("--A", type=float, required=True)
    sp.add_argument("--depth", type=int, default=20)
    common(sp)

    sp = sub.add_parser("torus", help="reflectionless operator from torus coordinates")
    sp.add_argument("--set", required=True)
    sp.add_argument("--mu", type=float, nargs="*", default=[])
    sp.add_argument("--sigma", type=int, nargs="*", default=[])
    sp.add_argument("--depth", type=int, default=30)
    sp.add_argument("--nodes", type=int, help="quadrature nodes per band")
    common(sp)

    sp = sub.add_parser("approximate", help="finite-gap approximation pipeline")
    sp.add_argument("--set", required=True)
    sp.add_argument("--xi", required=True)
    sp.add_argument("--sigma", type=int, nargs="*", default=[])
    sp.add_argument("--g", type=float, nargs="*", default=[])
    sp.add_argument("--schedule", required=True, help="comma separated n:delta pairs, e.g. 4:1e-2,16:1e-3")
    sp.add_argument("--depth", type=int, default=30)
    sp.add_argument("--y", type=float, default=1e-3)
    sp.add_argument("--tol", type=float, default=1e-2)
    common(sp)

    sp = sub.add_parser("toda", help="Toda flow of a periodic Jacobi matrix")
    sp.add_argument("--jacobi", help="JSON with one period (boundary {'periodic': p})")
    sp.add_argument("--a", help="comma separated a over one period (alternative to --jacobi)")
    sp.add_argument("--b", help="comma separated b over one period")
    sp.add_argument("--poly", default="0,1", help="polynomial coefficients, constant term first")
    sp.add_argument("--t-end", type=float, default=1.0)
    sp.add_argument("--dt", type=float, default=1e-3)
    sp.add_argument("--record-every", type=int)
    common(sp)

    sp = sub.add_parser("metric", help="h, |.Delta.| and delta between two sets")
    sp.add_argument("--a", required=True)
    sp.add_argument("--b", required=True)
    common(sp)

    sp = sub.add_parser("verify", help="reflectionless check of J on a set")
    sp.add_argument("--jacobi", required=True)
    sp.add_argument("--set", required=True)
    sp.add_argument("--y", type=float, default=1e-3)
    sp.add_argument("--tol", type=float, default=1e-2)
    sp.add_argument("--n-range", default="-2:2", help="lo:hi sites to test")
    common(sp)

    sp = sub.add_parser("run", help="execute a JSON run descriptor")
    sp.add_argument("--descriptor", required=True)
    sp.add_argument("--out")
    return p


HANDLERS = {
    "forward": cmd_forward,
    "reconstruct": cmd_reconstruct,
    "torus": cmd_torus,
    "approximate": cmd_approximate,
    "toda": cmd_toda,
    "metric": cmd_metric,
    "verify": cmd_verify,
}

# descriptor keys that name input files
_PATH_KEYS = {"jacobi", "set", "xi", "nu_plus", "nu_minus", "a", "b"}


def descriptor_argv(path: str, out: str | None = None) -> list[str]:
    """Translate a run descriptor into the equivalent command line."""
    d = _load_json(path)
    if not isinstance(d, dict) or d.get("command") not in COMMANDS:
        raise ValidationError(f"descriptor needs 'command' in {COMMANDS}")
    base = Path(path).resolve().parent
    argv = [d["command"]]
    for key, val in (d.get("inputs") or {}).items():
        f = Path(val)
        f = f if f.is_absolute() else base / f
        if not f.exists():
            raise ValidationError(f"descriptor input {key!r}: file {f} does not exist")
        argv += [f"--{key.replace('_', '-')}", str(f)]
    for key, val in (d.get("params") or {}).items():
        flag = f"--{key.replace('_', '-')}"
        if isinstance(val, list):
            argv += [flag] + [str(v) for v in val]
        else:
            argv += [flag, str(val)]
    argv += ["--seed", str(int(d.get("seed", 0)))]
    out = out or d.get("out")
    if out:
        o = Path(out)
        argv += ["--out", str(o if o.is_absolute() else base / o)]
    return argv


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    saved = os.environ.get(ENV_VAR)
    if args.profile:
        os.environ[ENV_VAR] = args.profile
    try:
        get_profile()
        if args.command == "run":
            return main(descriptor_argv(args.descriptor, args.out))
        np.random.seed(args.seed)
        return HANDLERS[args.command](args, Output(args.out))
    except (ValidationError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    finally:
        if args.profile:
            if saved is None:
                os.environ.pop(ENV_VAR, None)
            else:
                os.environ[ENV_VAR] = saved


if __name__ == "__main__":
    sys.exit(main())
