"""Command-line front end.

Subcommands: build, solve, classify, match, gamma, export. Every command takes
``--config FILE``, ``--out DIR`` and ``--grid NTxNS``. Exit codes: 0 success,
2 configuration error, 3 admissibility failure, 4 solver failure, 5 scaling violation.
Files written by a failing command are removed.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .calculus import Grid2D, SymFormField
from .errors import ConfigError, DevshellError, NonAdmissibleCurve
from .gammalimit import MaterialModel, ShellSweep, gamma_gap
from .geometry import bending_energy, build_chart, check_admissibility, integrate_darboux
from .io import (SurfaceConfig, load_config, write_csv, write_field_csv, write_json, write_obj,
                 write_profile_csv)
from .isometry import IsometryAB, build_V_from_ab, check_membership, extract_ab, sobolev_J
from .matching import estimate_order, match_to_order, resolved_sweep
from .profiles import parse_profile
from .symgrad import manufactured_solution, solve_symgrad


@dataclass
class RunConfig:
    """Resolved options of one command invocation."""

    command: str
    surface: SurfaceConfig
    out: Path
    options: dict = field(default_factory=dict)
    args: argparse.Namespace | None = None

    def to_json(self) -> dict:
        return {"command": self.command, "surface": self.surface.to_json(),
                "options": dict(sorted(self.options.items()))}


class Outputs:
    """Tracks written files so that a failing command can remove them."""

    def __init__(self, out: Path):
        self.out = out
        self.created_dir = not out.exists()
        self.files: list[Path] = []

    def path(self, name: str) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        p = self.out / name
        self.files.append(p)
        return p

    def rollback(self):
        for p in self.files:
            p.unlink(missing_ok=True)
        if self.created_dir and self.out.exists() and not any(self.out.iterdir()):
            self.out.rmdir()


# --------------------------------------------------------------------------- helpers

def _parse_grid(text: str) -> tuple[int, int]:
    try:
        nt, ns = (int(x) for x in text.lower().split("x"))
    except ValueError as exc:
        raise ConfigError(f"--grid expects NTxNS, got {text!r}") from exc
    return nt, ns


def _floats(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected a comma-separated list of numbers, got {text!r}") from exc
    if not vals:
        raise ConfigError("empty list")
    return vals


def _chart(surface: SurfaceConfig, nt: int | None = None, ns: int | None = None):
    nt = surface.nt if nt is None else nt
    ns = surface.ns if ns is None else ns
    spec = surface.spec
    bad = spec.violations()
    if bad:
        raise NonAdmissibleCurve("; ".join(bad))
    frame = integrate_darboux(spec, nt - 1)
    return build_chart(spec, frame, Grid2D(nt, ns, spec.T, surface.order)), frame


def _ab(args, chart) -> IsometryAB:
    T = chart.spec.T
    a = parse_profile(args.a, T)
    b = parse_profile(args.b, T)
    return IsometryAB.from_profiles(a, b, chart.grid.t_nodes)


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", required=True, help="surface configuration file")
    p.add_argument("--out", default="out", help="output directory (default: out)")
    p.add_argument("--grid", help="grid override NTxNS")
    p.add_argument("--fd-order", type=int, help="finite-difference stencil order override")


def _add_ab(p: argparse.ArgumentParser):
    p.add_argument("--a", default="cos", help="profile a(t) of the normal part a + s b (default: cos)")
    p.add_argument("--b", default="0", help="profile b(t) (default: 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="devshell", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="build the chart and check admissibility")
    _add_common(p)

    p = sub.add_parser("solve", help="solve sym grad w = B")
    _add_common(p)
    p.add_argument("--B", dest="B_file", help="CSV with columns t,sigma,b11,b12,b22 at grid nodes")
    p.add_argument("--manufactured", type=float, default=1.0,
                   help="amplitude of the built-in manufactured solution (used without --B)")

    p = sub.add_parser("classify", help="extract (a, b), J1, J2 and membership")
    _add_common(p)
    _add_ab(p)
    p.add_argument("--v3", help="CSV with columns t,sigma,value: normal part to classify")

    p = sub.add_parser("match", help="matching sweep and defect order")
    _add_common(p)
    _add_ab(p)
    p.add_argument("--order", type=int, default=2, help="matching order N (default 2)")
    p.add_argument("--eps", default="0.1,0.05,0.025,0.0125")
    p.add_argument("--max-nodes", type=int, default=512, help="grid refinement limit per direction")

    p = sub.add_parser("gamma", help="thin-shell energy sweep against the bending limit")
    _add_common(p)
    _add_ab(p)
    p.add_argument("--order", type=int, default=2)
    p.add_argument("--beta", type=float, default=3.5)
    p.add_argument("--h", default="0.0625,0.03125,0.015625")
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--lam", type=float, default=1.0)

    p = sub.add_parser("export", help="OBJ mesh of u or of a deformed u_eps")
    _add_common(p)
    _add_ab(p)
    p.add_argument("--eps", type=float, help="deform by the matched family at this eps")
    p.add_argument("--order", type=int, default=2)
    return parser


def _read_nodal_csv(path, chart, ncols: int) -> np.ndarray:
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    n = chart.grid.nt * chart.grid.ns
    if data.shape != (n, 2 + ncols):
        raise ConfigError(f"{path}: expected {n} rows of {2 + ncols} columns, got {data.shape}")
    t = data[:, 0].reshape(chart.shape)
    sig = data[:, 1].reshape(chart.shape)
    if (np.max(np.abs(t - chart.grid.t_nodes[:, None])) > 1e-9 * chart.spec.T
            or np.max(np.abs(sig - chart.grid.sigma_nodes[None, :])) > 1e-9):
        raise ConfigError(f"{path}: rows must follow the grid nodes (t-major, then sigma)")
    return data[:, 2:].reshape(chart.shape + (ncols,))


# --------------------------------------------------------------------------- commands

def cmd_build(run: RunConfig, outs: Outputs) -> int:
    spec = run.surface.spec
    bad = spec.violations()
    frame = integrate_darboux(spec, run.surface.nt - 1)
    report = check_admissibility(spec, frame)
    payload = {"config": run.to_json(), "admissibility": report.to_json(), "violations": bad}
    if bad or not report.passed:
        sys.stderr.write(f"admissibility failed: {report.to_json()} {bad}\n")
        raise NonAdmissibleCurve("surface is not admissible")
    chart = build_chart(spec, frame, Grid2D(run.surface.nt, run.surface.ns, spec.T, run.surface.order))
    energy = bending_energy(chart)
    payload.update({
        "isometry_defect": chart.isometry_defect(),
        "gauss_defect": chart.gauss_defect(),
        "bending_energy": {"closed_form": energy.closed_form, "hessian": energy.hessian,
                           "rel_diff": energy.rel_diff},
    })
    write_json(outs.path("admissibility.json"), payload)
    write_json(outs.path("chart.json"), {
        "config": run.to_json(), "t": chart.grid.t_nodes, "sigma": chart.grid.sigma_nodes,
        "s": chart.s, "u": chart.u, "grad_u": chart.grad_u,
        "a": {"a11": chart.a.b11, "a12": chart.a.b12, "a22": chart.a.b22}})
    print(f"admissible: True  isometry defect {chart.isometry_defect():.3e}  "
          f"gauss defect {chart.gauss_defect():.3e}")
    return 0


def cmd_solve(run: RunConfig, outs: Outputs) -> int:
    chart, _ = _chart(run.surface)
    exact = None
    if run.args.B_file:
        data = _read_nodal_csv(run.args.B_file, chart, 3)
        B = SymFormField(data[..., 0], data[..., 1], data[..., 2])
    else:
        exact, B = manufactured_solution(chart, run.args.manufactured)
    disp = solve_symgrad(B, chart)
    report = {"config": run.to_json(), "residual": disp.residual, **disp.info,
              "w_norm": float(max(np.max(np.abs(disp.w_prime)), np.max(np.abs(disp.w3)))),
              "B_norm": B.max_abs()}
    if exact is not None:
        report["w3_error"] = float(np.max(np.abs(disp.w3 - exact.w3)))
    write_field_csv(outs.path("displacement.csv"), chart,
                    {"w1": disp.w_prime[..., 0], "w2": disp.w_prime[..., 1], "w3": disp.w3})
    write_json(outs.path("solve.json"), report)
    print(f"residual {disp.residual:.3e}")
    return 0


def cmd_classify(run: RunConfig, outs: Outputs) -> int:
    chart, _ = _chart(run.surface)
    if run.args.v3:
        V3 = _read_nodal_csv(run.args.v3, chart, 1)[..., 0]
        fit = extract_ab(V3, chart)
        V = build_V_from_ab(fit.ab, chart)
        fit_res = fit.residual
        ab = fit.ab
    else:
        V = build_V_from_ab(_ab(run.args, chart), chart)
        fit = extract_ab(V.w3, chart)
        fit_res = fit.residual
        ab = fit.ab
    J1, J2 = sobolev_J(ab, chart)
    mem = check_membership(V, chart)
    member = mem.member and fit_res <= mem.tolerance * mem.scale
    write_profile_csv(outs.path("a.csv"), ab.t, ab.a)
    write_profile_csv(outs.path("b.csv"), ab.t, ab.b)
    write_json(outs.path("classify.json"), {
        "config": run.to_json(), "J1": J1, "J2": J2, "fit_residual": fit_res,
        "symgrad_residual": mem.symgrad_residual, "tolerance": mem.tolerance * mem.scale,
        "member": bool(member)})
    print(f"J1 {J1:.6e}  J2 {J2:.6e}  fit residual {fit_res:.3e}  member {bool(member)}")
    return 0


def cmd_match(run: RunConfig, outs: Outputs) -> int:
    args = run.args
    eps = _floats(args.eps)
    N = args.order
    if N < 1:
        raise ConfigError("--order must be >= 1")

    def build(nt, ns):
        chart, _ = _chart(run.surface, nt, ns)
        return chart, build_V_from_ab(_ab(args, chart), chart)

    sweep = resolved_sweep(build, N, eps, (run.surface.nt, run.surface.ns), max_nodes=args.max_nodes)
    est = estimate_order(sweep.defects)
    write_csv(outs.path("match.csv"), ["eps", "defect", "N"], [(e, d, N) for e, d in sweep.defects])
    write_json(outs.path("match.json"), {
        "config": run.to_json(), "slope": est.slope, "fit_residual": est.residual,
        "grid": list(sweep.chart.shape), "discretization_floor": sweep.floor,
        "first_order_defects": sweep.baseline, "solver_residuals": sweep.family.residuals})
    print(f"slope {est.slope:.4f}  (fit residual {est.residual:.2e}, grid {sweep.chart.shape})")
    return 0


def cmd_gamma(run: RunConfig, outs: Outputs) -> int:
    args = run.args
    sweep = ShellSweep(tuple(_floats(args.h)), args.beta)
    sweep.check_order(args.order)
    model = MaterialModel(args.mu, args.lam)
    chart, _ = _chart(run.surface)
    V = build_V_from_ab(_ab(args, chart), chart)
    fam = match_to_order(V, args.order, chart)
    rows = gamma_gap(fam, sweep, model, chart)
    cols = ["h", "e_h", "eps", "energy", "ratio", "I", "gap", "abs_gap", "Vh_err", "strain_err"]
    write_csv(outs.path("gamma.csv"), cols, [[getattr(r, c) for c in cols] for r in rows])
    gaps = [r.gap for r in rows]
    write_json(outs.path("gamma.json"), {
        "config": run.to_json(), "I": rows[0].I, "rows": [r.as_dict() for r in rows],
        "gap_decreasing": bool(all(b < a for a, b in zip(gaps, gaps[1:])))})
    for r in rows:
        print(f"h {r.h:.6g}  ratio {r.ratio:.6f}  I {r.I:.6f}  gap {r.gap:.3e}")
    return 0


def cmd_export(run: RunConfig, outs: Outputs) -> int:
    args = run.args
    chart, _ = _chart(run.surface)
    if args.eps is None:
        write_obj(outs.path("surface.obj"), chart.u)
        return 0
    V = build_V_from_ab(_ab(args, chart), chart)
    fam = match_to_order(V, args.order, chart)
    write_obj(outs.path("deformed.obj"), fam.deformation(args.eps, chart))
    return 0


COMMANDS = {"build": cmd_build, "solve": cmd_solve, "classify": cmd_classify,
            "match": cmd_match, "gamma": cmd_gamma, "export": cmd_export}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    outs = Outputs(Path(args.out))
    try:
        surface = load_config(args.config)
        if args.grid:
            nt, ns = _parse_grid(args.grid)
            surface = surface.with_grid(nt, ns)
        if args.fd_order is not None:
            surface = surface.with_grid(order=args.fd_order)
        skip = {"command", "config", "out", "grid", "fd_order"}
        opts = {k: v for k, v in vars(args).items() if k not in skip and v is not None}
        run = RunConfig(args.command, surface, outs.out, opts, args)
        return COMMANDS[args.command](run, outs)
    except DevshellError as exc:
        outs.rollback()
        sys.stderr.write(f"error [{type(exc).__name__}]: {exc}\n")
        return exc.exit_code
    except ValueError as exc:
        outs.rollback()
        sys.stderr.write(f"error [ValueError]: {exc}\n")
        return 2
    except BaseException:
        outs.rollback()
        raise


if __name__ == "__main__":
    sys.exit(main())
