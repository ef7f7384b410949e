"""Command-line front end: inspect parameters, solve, verify, sweep.

Exit codes: 0 success/all-pass, 1 usage error, 2 inadmissible or unsupported
type, 3 numerical failure.  All outputs are deterministic: rerunning the
same command reproduces CSV/JSON files byte for byte (run manifests carry a
timestamp but are written alongside the outputs, never inside them).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

from . import __version__
from .barrier import UnsupportedCase, build_region, verify_invariance
from .params import (
    EquilibriumKind,
    InadmissibleType,
    LomseSpec,
    classify_equilibria,
    iter_admissible,
    solvable_case,
    validate_type,
)
from .solver import (
    NoConvergence,
    RegionViolation,
    dirichlet_solve,
    uniqueness_check,
)
from .stable_curve import BracketFailure, NoAdmissiblePair, UndecidedExit

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INADMISSIBLE = 2
EXIT_NUMERICAL = 3

THREAD_CAP_ENV = "EXPANDER_LAB_THREADS"

CSV_COLUMNS = ("r", "f", "f_r", "phi", "psi", "t")

PROFILE_JSON_SCHEMA = {
    "type": "object",
    "required": ["spec", "epsilon", "radius", "columns", "rows", "diagnostics"],
    "properties": {
        "spec": {
            "type": "object",
            "required": ["n", "p", "k", "lambda", "phi0"],
            "properties": {
                "n": {"type": "integer"},
                "p": {"type": "integer"},
                "k": {"type": "integer"},
                "lambda": {"type": "number"},
                "phi0": {"type": "number"},
            },
        },
        "epsilon": {"type": "number"},
        "radius": {"type": "number"},
        "columns": {"type": "array", "items": {"type": "string"}},
        "rows": {
            "type": "array",
            "items": {"type": "array", "items": {"type": "number"}},
        },
        "diagnostics": {
            "type": "object",
            "required": [
                "phi_inf", "phi_inf_error", "max_residual", "k_hat",
                "decay_fit", "envelope_ok", "in_region_ok", "psi_final",
            ],
        },
    },
}


class _Parser(argparse.ArgumentParser):
    """argparse defaults to exit code 2 on usage errors; we reserve 2 for
    inadmissible types and use 1 for usage."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


@dataclasses.dataclass(frozen=True)
class RunManifest:
    """Reproducibility record written alongside every output file."""

    command: str
    n: int
    p: int
    k: int
    epsilon: float | None
    radius: float | None
    tolerances: dict
    seeds: dict
    version: str
    created: float

    def identity(self) -> dict:
        """The fields that determine the outputs (timestamp excluded)."""
        d = dataclasses.asdict(self)
        d.pop("created")
        return d

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True, indent=2) + "\n"


def _fmt(x: float) -> str:
    return repr(float(x))


def _spec_payload(spec: LomseSpec) -> dict:
    eq = classify_equilibria(spec)
    return {
        "n": spec.n,
        "p": spec.p,
        "k": spec.k,
        "lambda": spec.lam,
        "phi0": spec.phi0,
        "origin_eigenvalues": list(eq.origin_eigenvalues),
        "cone_point_eigenvalues": [[z.real, z.imag] for z in eq.cone_point_eigenvalues],
        "kind": eq.kind.value,
        "solvable": solvable_case(spec),
    }


def cmd_params(args) -> int:
    spec = validate_type(args.n, args.p, args.k)
    payload = _spec_payload(spec)
    if args.json:
        print(json.dumps(payload, sort_keys=True))
        return EXIT_OK
    eq = classify_equilibria(spec)
    print(f"spec ({spec.n},{spec.p},{spec.k})")
    print(f"  lambda                 {spec.lam:.12g}")
    print(f"  phi0                   {spec.phi0:.12g}")
    print(f"  origin eigenvalues     {eq.origin_eigenvalues[0]:.12g}, {eq.origin_eigenvalues[1]:.12g}")
    cone = ", ".join(
        f"{z.real:.10g}" if z.imag == 0 else f"{z.real:.10g}{z.imag:+.10g}i"
        for z in eq.cone_point_eigenvalues
    )
    print(f"  cone point eigenvalues {cone}")
    print(f"  classification         {eq.kind.value}")
    print(f"  solvable               {solvable_case(spec)}")
    return EXIT_OK


def _profile_rows(profile) -> list[list[float]]:
    return [
        [float(r), float(f), float(fr), float(ph), float(ps), float(t)]
        for r, f, fr, ph, ps, t in zip(
            profile.r, profile.f, profile.f_r, profile.phi, profile.psi, profile.t
        )
    ]


def _diag_payload(profile) -> dict:
    d = profile.diagnostics
    return {
        "phi_inf": profile.phi_inf,
        "phi_inf_error": d.phi_inf_error,
        "max_residual": d.max_residual,
        "k_hat": d.k_hat,
        "decay_fit": d.decay_fit,
        "envelope_ok": d.envelope_ok,
        "in_region_ok": d.in_region_ok,
        "psi_final": d.psi_final,
    }


def render_profile_csv(profile) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for row in _profile_rows(profile):
        lines.append(",".join(_fmt(v) for v in row))
    for key, value in sorted(_diag_payload(profile).items()):
        lines.append(f"# {key}={value!r}" if isinstance(value, bool) else f"# {key}={_fmt(value)}")
    return "\n".join(lines) + "\n"


def render_profile_json(profile) -> str:
    payload = {
        "spec": {
            "n": profile.spec.n,
            "p": profile.spec.p,
            "k": profile.spec.k,
            "lambda": profile.spec.lam,
            "phi0": profile.spec.phi0,
        },
        "epsilon": profile.eps,
        "radius": profile.R,
        "columns": list(CSV_COLUMNS),
        "rows": _profile_rows(profile),
        "diagnostics": _diag_payload(profile),
    }
    return json.dumps(payload, sort_keys=True) + "\n"


def _manifest_for(args, command: str) -> RunManifest:
    return RunManifest(
        command=command,
        n=args.n,
        p=args.p,
        k=args.k,
        epsilon=getattr(args, "epsilon", None),
        radius=getattr(args, "radius", None),
        tolerances={
            "shoot_rel_tol": 1e-10,
            "forward_rel_tol": 1e-11,
            "match_rel_tol": 1e-10,
        },
        seeds={},
        version=__version__,
        created=time.time(),
    )


def _emit(text: str, out: str | None, manifest: RunManifest | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    if manifest is not None:
        with open(out + ".manifest.json", "w", encoding="utf-8", newline="\n") as fh:
            fh.write(manifest.to_json())


def cmd_solve(args) -> int:
    spec = validate_type(args.n, args.p, args.k)
    profile = dirichlet_solve(spec, args.epsilon, args.radius)
    text = render_profile_json(profile) if args.format == "json" else render_profile_csv(profile)
    _emit(text, args.out, _manifest_for(args, "solve"))
    return EXIT_OK


def _verify_one(spec: LomseSpec, samples: int, quiet: bool = False) -> bool:
    def report(line: str) -> None:
        if not quiet:
            print(line)

    region = build_region(spec)
    inv = verify_invariance(region, t_from=0.0, n_samples=samples)
    report(
        f"  invariance    min_bottom={inv.min_bottom_inflow:.3e} "
        f"min_barrier={inv.min_barrier_inflow:.3e} -> {'pass' if inv.passed else 'FAIL'}"
    )
    eps = 0.05
    R = min(0.25, spec.lam ** (-2.0 / (2 * spec.k - 3)))
    profile = dirichlet_solve(spec, eps, R)
    d = profile.diagnostics
    residual_ok = d.max_residual < 1e-6
    report(f"  residual      sup_rel={d.max_residual:.3e} -> {'pass' if residual_ok else 'FAIL'}")
    report(f"  envelope      psi_final={d.psi_final:.2e} -> {'pass' if d.envelope_ok else 'FAIL'}")
    uniq = uniqueness_check(spec, eps, R)
    report(
        f"  uniqueness    sup_diff={uniq.sup_difference:.3e} tol={uniq.tolerance:.3e} "
        f"-> {'pass' if uniq.passed else 'FAIL'}"
    )
    report(f"  decay         rho={d.decay_fit:.6f} (bound {spec.k - 1.5})")
    decay_ok = d.decay_fit >= spec.k - 1.5
    return bool(inv.passed and residual_ok and d.envelope_ok and uniq.passed and decay_ok and d.in_region_ok)


def cmd_verify(args) -> int:
    if args.all_solvable:
        all_ok = True
        print("n,p,k,invariance,residual,envelope,uniqueness,overall")
        for spec in iter_admissible(args.max_n, args.max_k):
            if not solvable_case(spec):
                continue
            ok = _verify_one(spec, args.samples, quiet=True)
            all_ok = all_ok and ok
            print(f"{spec.n},{spec.p},{spec.k},-,-,-,-,{'pass' if ok else 'FAIL'}")
        return EXIT_OK if all_ok else EXIT_NUMERICAL
    spec = validate_type(args.n, args.p, args.k)
    if not solvable_case(spec):
        kind = classify_equilibria(spec).kind
        print(f"spec ({spec.n},{spec.p},{spec.k}): {kind.value} case unsupported", file=sys.stderr)
        return EXIT_INADMISSIBLE
    print(f"verify ({spec.n},{spec.p},{spec.k})")
    ok = _verify_one(spec, args.samples)
    print("ALL PASS" if ok else "FAILURES PRESENT")
    return EXIT_OK if ok else EXIT_NUMERICAL


def _sweep_row(task: tuple) -> tuple:
    n, p, k, eps, R = task
    spec = validate_type(n, p, k)
    profile = dirichlet_solve(spec, eps, R)
    d = profile.diagnostics
    return (eps, R, profile.phi_inf, d.k_hat, d.max_residual)


def _parse_grid(text: str | None, fallback: float | None) -> list[float]:
    if text:
        items = [piece for piece in text.split(",") if piece.strip()]
        return [float(piece) for piece in items]
    if fallback is not None:
        return [fallback]
    return []


def cmd_sweep(args) -> int:
    validate_type(args.n, args.p, args.k)
    eps_values = _parse_grid(args.epsilon_grid, args.epsilon)
    radius_values = _parse_grid(args.radius_grid, args.radius)
    if not eps_values or not radius_values:
        print("sweep: empty grid (need epsilon and radius values)", file=sys.stderr)
        return EXIT_USAGE
    tasks = [
        (args.n, args.p, args.k, eps, R) for eps in eps_values for R in radius_values
    ]
    jobs = args.jobs
    cap = os.environ.get(THREAD_CAP_ENV)
    if cap is not None:
        jobs = max(1, min(jobs, int(cap)))
    if jobs <= 1 or len(tasks) == 1:
        rows = [_sweep_row(task) for task in tasks]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            rows = list(pool.map(_sweep_row, tasks))
    lines = ["epsilon,radius,phi_inf,k_hat,max_residual"]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    text = "\n".join(lines) + "\n"
    _emit(text, args.out, _manifest_for(args, "sweep"))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="expander-lab", description=__doc__)
    parser.add_argument("--version", action="version", version=f"expander-lab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add_spec_args(p):
        p.add_argument("--n", type=int, required=True, help="sphere dimension")
        p.add_argument("--p", type=int, required=True, help="map rank")
        p.add_argument("--k", type=int, required=True, help="harmonic degree (even)")

    p_params = sub.add_parser("params", help="derived constants and classification")
    add_spec_args(p_params)
    p_params.add_argument("--json", action="store_true", help="machine-readable output")
    p_params.set_defaults(func=cmd_params)

    p_solve = sub.add_parser("solve", help="construct one expander profile")
    add_spec_args(p_solve)
    p_solve.add_argument("--epsilon", type=float, required=True, help="Dirichlet slope f(R)/R")
    p_solve.add_argument("--radius", type=float, required=True, help="Dirichlet radius R")
    p_solve.add_argument("--out", type=str, default=None, help="output file (default stdout)")
    p_solve.add_argument("--format", choices=("csv", "json"), default="csv")
    p_solve.set_defaults(func=cmd_solve)

    p_verify = sub.add_parser("verify", help="run the certification suite for one spec")
    p_verify.add_argument("--n", type=int)
    p_verify.add_argument("--p", type=int)
    p_verify.add_argument("--k", type=int)
    p_verify.add_argument("--samples", type=int, default=10_000)
    p_verify.add_argument("--all-solvable", action="store_true", dest="all_solvable")
    p_verify.add_argument("--max-n", type=int, default=9, dest="max_n")
    p_verify.add_argument("--max-k", type=int, default=4, dest="max_k")
    p_verify.set_defaults(func=cmd_verify)

    p_sweep = sub.add_parser("sweep", help="sweep epsilon and/or radius grids")
    add_spec_args(p_sweep)
    p_sweep.add_argument("--epsilon", type=float, default=None)
    p_sweep.add_argument("--radius", type=float, default=None)
    p_sweep.add_argument("--epsilon-grid", type=str, default=None, dest="epsilon_grid",
                         help="comma-separated epsilon values")
    p_sweep.add_argument("--radius-grid", type=str, default=None, dest="radius_grid",
                         help="comma-separated radius values")
    p_sweep.add_argument("--out", type=str, default=None)
    p_sweep.add_argument("--jobs", type=int, default=1)
    p_sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "verify" and not args.all_solvable:
        if args.n is None or args.p is None or args.k is None:
            parser.error("verify needs --n/--p/--k (or --all-solvable)")
    try:
        return args.func(args)
    except InadmissibleType as exc:
        print(f"inadmissible: {exc}", file=sys.stderr)
        return EXIT_INADMISSIBLE
    except UnsupportedCase as exc:
        print(f"unsupported: {exc}", file=sys.stderr)
        return EXIT_INADMISSIBLE
    except (BracketFailure, UndecidedExit, NoAdmissiblePair, NoConvergence, RegionViolation) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
