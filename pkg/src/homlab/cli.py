"""``homlab`` command line: one subcommand per stage of the homogenization pipeline.

Every subcommand accepts ``--config FILE`` and repeated ``--set section.key=value``
overrides.  Tables and the JSON manifest are written to ``--out`` (or the
``[output] directory`` of a config file); without either, results are printed only.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import platform
import sys
import time
from fractions import Fraction
from importlib import metadata
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config

MIN_GAIN = 0.3
MAX_CONSTANT_RATIO = 2.0


# ---------------------------------------------------------------------------
# helpers


def versions() -> dict:
    out = {"python": platform.python_version(), "homlab": __version__}
    for pkg in ("numpy", "scipy", "pyamg", "matplotlib"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = None
    return out


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        return None if not math.isfinite(float(x)) else float(x)
    if isinstance(x, (np.integer, np.bool_)):
        return x.item()
    if isinstance(x, (int, str, bool)) or x is None:
        return x
    return str(x)


class Run:
    """Collects timings, results and checks for the manifest of one invocation."""

    def __init__(self, command: str, cfg: RunConfig, out: Optional[Path]):
        self.command = command
        self.cfg = cfg
        self.out = out
        self.t0 = time.perf_counter()
        self.timings: dict = {}
        self.results: dict = {}
        self.checks: dict = {}
        self.files: list = []
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Optional[Path]:
        if self.out is None:
            return None
        p = self.out / name
        self.files.append(p.name)
        return p

    def check(self, name: str, ok: bool, detail) -> bool:
        self.checks[name] = {"pass": bool(ok), "detail": detail}
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        return bool(ok)

    @property
    def passed(self) -> bool:
        return all(c["pass"] for c in self.checks.values())

    def finish(self) -> None:
        self.timings["total"] = time.perf_counter() - self.t0
        if self.out is None:
            return
        manifest = {"command": self.command, "config": self.cfg.as_dict(), "config_file": self.cfg.source,
                    "overrides": self.cfg.overrides, "versions": versions(), "timings": self.timings,
                    "results": self.results, "checks": self.checks, "files": self.files}
        with open(self.out / f"{self.command}_manifest.json", "w") as fh:
            json.dump(_jsonable(manifest), fh, indent=2)


def _overrides(pairs) -> dict:
    out = {}
    for item in pairs or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        out[key.strip()] = value.strip()
    return out


def _start(args, command: str) -> Run:
    cfg = load_config(args.config, _overrides(args.set))
    out = Path(args.out) if args.out else (cfg.output_dir if args.config else None)
    return Run(command, cfg, out)


def _write_rows(path, header, rows) -> None:
    if path is None:
        return
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _vector(text: str) -> np.ndarray:
    return np.array([float(eval_fraction(t)) for t in text.replace(",", " ").split()])


def eval_fraction(text: str) -> float:
    """``"1/8"``, ``"0.5"`` or ``"sqrt(2)"``."""
    text = text.strip()
    if text.startswith("sqrt(") and text.endswith(")"):
        return math.sqrt(eval_fraction(text[5:-1]))
    return float(Fraction(text))


# ---------------------------------------------------------------------------
# subcommands


def cmd_cell(args, run: Run) -> int:
    from .cell import PeriodicGrid, homogenized_tensor, solve_correctors
    field = run.cfg.coefficient_field()
    Ns = [int(n) for n in args.N] if args.N else [run.cfg.N]
    rows = []
    for N in Ns:
        t0 = time.perf_counter()
        chi = solve_correctors(field, PeriodicGrid(field.d, N))
        ahat = homogenized_tensor(field, chi).matrix()
        rows.append([N] + [f"{v:.15g}" for v in ahat.ravel()])
        run.timings[f"N={N}"] = time.perf_counter() - t0
        print(f"N={N}: ahat =\n{np.array2string(ahat, precision=10)}")
        run.results[f"ahat_N{N}"] = ahat
        if N == Ns[-1] and run.out is not None:
            chi.to_csv(run.path(f"correctors_N{N}.csv"))
    if len(Ns) >= 3:
        a = np.array([[float(v) for v in r[1:]] for r in rows])
        d1, d2 = a[-3, 0] - a[-2, 0], a[-2, 0] - a[-1, 0]
        if d2 != 0 and d1 / d2 > 0:
            order = math.log2(d1 / d2)
            print(f"observed order (ahat_11) {order:.3f}; Richardson value {a[-1, 0] - d2 / (2 ** order - 1):.12g}")
            run.results["order"] = order
    d = field.d
    _write_rows(run.path("ahat.csv"), ["N"] + [f"a{i + 1}{j + 1}" for i in range(d) for j in range(d)], rows)
    return 0


def cmd_kappa(args, run: Run) -> int:
    from .diophantine import default_mu, kappa
    n = _vector(" ".join(args.direction))
    n = n / np.linalg.norm(n)
    mu = args.mu if args.mu is not None else default_mu(n.size, n.size - 1)
    est = kappa(n, mu, args.R)
    print(f"direction {np.array2string(est.direction, precision=12)}  mu={mu}  R={args.R}")
    print(f"kappa = {est.value:.17g}  witness = {est.witness}" + ("  (partial)" if est.partial else ""))
    run.results.update(kappa=est.value, witness=est.witness, mu=mu, R=args.R)
    return 0


def cmd_geometry(args, run: Run) -> int:
    from .geometry import classify_boundary, gradient_sublevel_exponent, local_graph
    boundary = run.cfg.domain().boundary()
    u, types, deltas = classify_boundary(boundary, n_points=args.points, radius=args.radius)
    values, counts = np.unique(types, return_counts=True)
    print(f"{boundary.name}: length {boundary.length:.10g}, area {boundary.area():.10g}")
    for v, c in zip(values, counts):
        print(f"  type {v}: {c} of {u.size} points")
    rows = []
    for ui, k, dl in zip(u, types, deltas):
        x = boundary.point(ui)
        rows.append([f"{ui:.10g}", f"{x[0]:.10g}", f"{x[1]:.10g}", f"{float(boundary.curvature(ui)):.10g}", int(k),
                     f"{dl:.6g}"])
    _write_rows(run.path("types.csv"), ["u", "x", "y", "curvature", "type", "delta"], rows)
    for ui in args.probe or ():
        fit = gradient_sublevel_exponent(local_graph(boundary, float(ui)))
        print(f"  gradient sublevel exponent at u={ui}: {fit.exponent:.4f} (residual {fit.residual:.2g})")
        run.results[f"sublevel_u{ui}"] = fit.exponent
    run.results["type_counts"] = dict(zip(values.tolist(), counts.tolist()))
    return 0


def cmd_oscint(args, run: Run) -> int:
    from .geometry import decay_fit, sublevel_exponent
    rows = []
    for k in args.k:
        dec = decay_fit(lambda s, k=k: s ** k)
        sub = sublevel_exponent(lambda s, k=k: s ** k)
        print(f"k={k}: decay exponent {dec.exponent:.4f} (target {-1 / k:.4f}), "
              f"sublevel exponent {sub.exponent:.4f} (target {1 / k:.4f})")
        rows.append([k, dec.exponent, dec.residual, sub.exponent, sub.residual])
        run.results[f"k{k}"] = {"decay": dec.exponent, "sublevel": sub.exponent}
    _write_rows(run.path("oscint.csv"), ["k", "decay_exponent", "decay_residual", "sublevel_exponent",
                                         "sublevel_residual"], rows)
    return 0


def cmd_partition(args, run: Run) -> int:
    from .geometry import local_graph
    from .partition import boundary_partition, size_and_sum_checks
    boundary = run.cfg.domain().boundary()
    graph = local_graph(boundary, args.u)
    gamma = args.gamma
    part, _ = boundary_partition(graph, args.tau, gamma)
    st = part.check_structure()
    sz = size_and_sum_checks(part)
    print(f"tau={args.tau} gamma={gamma}: {len(part.cubes)} cubes, levels {part.level_counts()}")
    print(f"  structure: {st}")
    print(f"  sizes/sums: {sz}")
    if run.out is not None:
        part.to_csv(run.path(f"cubes_tau{args.tau:g}.csv"))
    run.results.update(n_cubes=len(part.cubes), structure=st, sizes=sz)
    return 0


def cmd_layer(args, run: Run) -> int:
    from .cell import PeriodicGrid, adjoint_field, solve_correctors
    from .layer import LayerProblem, solve_layer
    field = run.cfg.coefficient_field()
    n = _vector(args.normal)
    n = n / np.linalg.norm(n)
    N = args.N or run.cfg.N
    if args.data == "cos":
        data = lambda th: np.cos(2 * np.pi * th[..., 0])[..., None]  # noqa: E731
        prob = LayerProblem(field, n, data, shape=(N,) * field.d, T=args.T)
    else:
        adj = adjoint_field(field)
        chi = solve_correctors(adj, PeriodicGrid(field.d, N)).chi
        data = -np.einsum("j,jnr...->nr...", n, chi)[0]
        prob = LayerProblem(adj, n, data, shape=(N,) * field.d, T=args.T)
    t0 = time.perf_counter()
    sol = solve_layer(prob)
    run.timings["solve"] = time.perf_counter() - t0
    iters = sol.info.iterations if sol.info else 0
    print(f"layer: shape {prob.shape} x {prob.n_t + 1} levels, T={prob.T:g}, {iters} iterations, "
          f"residual {sol.residual:.2e}")
    print(f"  V_inf = {np.array2string(sol.V_inf, precision=12)}; dtV(0) at the first node "
          f"{sol.dtV0.reshape(sol.dtV0.shape[0], -1)[:, 0]}")
    print(f"  decay monotone past t=1: {sol.decay_is_monotone()}")
    if run.out is not None:
        sol.to_csv(run.path("layer_decay.csv"))
        sol.trace_to_csv(run.path("layer_trace.csv"))
    run.results.update(V_inf=sol.V_inf, iterations=iters, residual=sol.residual, T=prob.T)
    return 0


def cmd_fbar(args, run: Run) -> int:
    from .pipeline import homogenized_data
    boundary = run.cfg.domain().boundary()
    t0 = time.perf_counter()
    hd = homogenized_data(boundary, run.cfg.coefficient_field(), run.cfg.data(), n_samples=args.samples,
                          N=run.cfg.N, flag_threshold=float(run.cfg.get("tolerances", "flag_threshold", 1e-3)),
                          layer_rtol=float(run.cfg.get("tolerances", "layer_rtol", 1e-10)))
    run.timings["fbar"] = time.perf_counter() - t0
    v = hd.values[:, 0]
    print(f"fbar on {boundary.name}: {hd.u.size} samples, {int(hd.flags.sum())} flagged, "
          f"range [{v.min():.6g}, {v.max():.6g}], ahat diag {np.diag(hd.ahat.matrix())}")
    if run.out is not None:
        hd.to_csv(run.path("fbar.csv"))
        with open(run.path("fbar.dat"), "w") as fh:
            fh.write("# arclength fbar flagged\n")
            for s, val, fl in zip(hd.arclength, v, hd.flags):
                fh.write(f"{s:.10g} {val:.12g} {int(fl)}\n")
    run.results.update(info=hd.info, fbar_min=v.min(), fbar_max=v.max())
    return 0


def cmd_alpha(args, run: Run) -> int:
    from .pipeline import rate_exponents
    given = {"p": args.p, "gamma": args.gamma, "k": args.k}
    if sum(v is not None for v in given.values()) != 1:
        raise ConfigError("give exactly one of --p, --gamma, --k")
    kw = {k: (int(v) if k == "k" else Fraction(v)) for k, v in given.items() if v is not None}
    r = rate_exponents(args.d, **kw)
    for k, v in r.as_dict().items():
        print(f"{k:12s} {v}")
    run.results.update(r.as_dict())
    return 0


def cmd_solve(args, run: Run) -> int:
    from .lab.experiments import DEFAULT_EPS
    from .lab.fem import solve_dirichlet
    from .lab.mesh import mesh
    domain = run.cfg.domain()
    field = run.cfg.coefficient_field()
    f = run.cfg.data()
    eps = args.eps if args.eps is not None else min(DEFAULT_EPS)
    h = eps / float(run.cfg.get("grids", "h_factor", 8))
    t0 = time.perf_counter()
    m = mesh(domain, h)
    run.timings["mesh"] = time.perf_counter() - t0
    res = solve_dirichlet(m, field, lambda x: f(x, x / eps)[..., 0], eps=eps, oscillating_data=True,
                          rtol=float(run.cfg.get("tolerances", "rtol", 1e-9)))
    run.timings.update(res.timings)
    print(f"eps={eps:g}: {m.n_nodes} nodes, {m.n_triangles} triangles, {res.iterations} iterations, "
          f"residual {res.residual:.2e}, max|u| {res.linf:.6g} (data max {res.data_max:.6g})")
    run.check("max_principle", res.max_principle_ok(), f"{res.linf:.6g} <= 1.05 * {res.data_max:.6g}")
    p = run.path("solution.dat")
    if p is not None:
        with open(p, "w") as fh:
            fh.write("# x y u\n")
            for (x, y), u in zip(m.points, res.u):
                fh.write(f"{x:.10g} {y:.10g} {u:.12g}\n")
    run.results.update(nodes=m.n_nodes, iterations=res.iterations, linf=res.linf, l2=res.l2)
    return 0


def default_min_slope(kind: str, finite_type: int) -> float:
    """Acceptance floors for the fitted slope of a sweep."""
    if kind == "constant":
        return 1.0 / (2 * finite_type) - 0.05
    return 0.15 if finite_type == 2 else 0.03


def run_experiment(cfg: RunConfig, run: Optional[Run] = None, progress=print) -> dict:
    """Run the configured sweep, write its tables and evaluate the checks; returns the reports."""
    from .lab import experiments as ex
    kind = cfg.kind
    domain = cfg.domain()
    field = cfg.coefficient_field()
    eps = cfg.eps
    N = cfg.N
    h_factor = float(cfg.get("grids", "h_factor", 8))
    show = (lambda *a: progress("  " + "  ".join(f"{v:.6g}" for v in a))) if progress else None
    reports = {}
    if kind == "constant":
        A0 = np.asarray(cfg.get("field", "matrix", 1.0), dtype=float)
        A0 = A0.reshape(2, 2) if A0.size == 4 else float(A0)
        reports["main"] = ex.constant_coeff_experiment(domain, A0, cfg.data(), eps, h=float(cfg.get("grids", "h", 0.05)),
                                                       band_factor=h_factor, N=N, progress=show)
    elif kind == "oscillating":
        reports["main"] = ex.oscillating_coeff_experiment(domain, field, cfg.data(), eps, N=N, h_factor=h_factor,
                                                          n_samples=cfg.get("grids", "samples"), progress=show)
    elif kind == "higher_order":
        coeffs = cfg.get("experiment", "boundary_affine", (1.0, 0.5))
        a, b = float(coeffs[0]), float(coeffs[1])
        unc, cor = ex.higher_order_experiment(domain, field, lambda x: a * x[..., 0] + b * x[..., 1], eps, N=N,
                                              h_factor=float(cfg.get("grids", "h_factor", 16)), progress=show)
        reports["uncorrected"], reports["corrected"] = unc, cor
    else:
        u0 = float(cfg.get("experiment", "u0", 0.1))
        sigma = float(cfg.get("experiment", "sigma", 0.5))
        reports["layer"] = [ex.layer_expansion_check(domain, field, u0, e, sigma, N=N, h_factor=h_factor) for e in eps]
    if run is not None:
        _experiment_outputs(cfg, run, reports)
    return reports


def _experiment_outputs(cfg: RunConfig, run: Run, reports: dict) -> None:
    kind = cfg.kind
    k = cfg.domain().finite_type
    if kind in ("constant", "oscillating"):
        rep = reports["main"]
        print(rep.summary())
        floor = float(cfg.get("tolerances", "min_slope", default_min_slope(kind, k)))
        run.check("errors_strictly_decreasing", rep.strictly_decreasing,
                  ", ".join(f"{e:.4e}" for e in rep.errors))
        run.check("slope_floor", rep.fit.slope >= floor, f"slope {rep.fit.slope:.4f} >= {floor:.4f}")
        run.results[rep.label] = rep.as_dict()
        if run.out is not None:
            rep.to_csv(run.path("experiment.csv"))
            rep.to_dat(run.path("experiment.dat"))
    elif kind == "higher_order":
        unc, cor = reports["uncorrected"], reports["corrected"]
        print(unc.summary())
        print(cor.summary())
        gain = cor.fit.slope - unc.fit.slope
        min_gain = float(cfg.get("tolerances", "min_gain", MIN_GAIN))
        run.check("corrected_below_uncorrected", bool(np.all(cor.errors <= unc.errors)),
                  ", ".join(f"{c:.3e}<={u:.3e}" for c, u in zip(cor.errors, unc.errors)))
        run.check("slope_gain", gain >= min_gain, f"{cor.fit.slope:.4f} - {unc.fit.slope:.4f} = {gain:.4f} >= {min_gain}")
        run.results.update(uncorrected=unc.as_dict(), corrected=cor.as_dict())
        if run.out is not None:
            unc.to_csv(run.path("experiment_uncorrected.csv"))
            cor.to_csv(run.path("experiment.csv"))
            unc.to_dat(run.path("experiment_uncorrected.dat"))
            cor.to_dat(run.path("experiment.dat"))
    else:
        checks = reports["layer"]
        rows = []
        for rep in checks:
            print(rep.summary())
            rows += [[f"{rep.eps:.10g}", f"{r:.10g}", f"{s:.10g}", f"{b:.10g}", f"{q:.6g}"] for r, s, b, q in rep.rows()]
        Cs = [rep.constant for rep in checks]
        ratio = max(Cs) / min(Cs) if len(Cs) > 1 else 1.0
        limit = float(cfg.get("tolerances", "max_constant_ratio", MAX_CONSTANT_RATIO))
        run.check("constant_stable", ratio <= limit, f"C = {', '.join(f'{c:.4g}' for c in Cs)}; ratio {ratio:.3f} <= {limit}")
        run.results["layer_check"] = [{"eps": r.eps, "C": r.constant, "x0": r.x0} for r in checks]
        _write_rows(run.path("layer_check.csv"), ["eps", "r", "sup_grad", "bound", "ratio"], rows)


def cmd_experiment(args, run: Run) -> int:
    cfg = run.cfg
    print(f"experiment {cfg.kind} on {cfg.domain().name} {cfg.domain().params}, eps = {cfg.eps}")
    t0 = time.perf_counter()
    run_experiment(cfg, run)
    run.timings["experiment"] = time.perf_counter() - t0
    if args.check and not run.passed:
        return 1
    return 0


def cmd_rates(args, run: Run) -> int:
    from .lab.experiments import rate_fit
    for path in args.csv:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        eps = [float(r["eps"]) for r in rows]
        err = [float(r[args.column]) for r in rows]
        fit = rate_fit(eps, err)
        print(f"{path}: slope {fit.slope:.4f}, intercept {fit.intercept:.4f}, residual {fit.residual:.3g}")
        run.results[str(path)] = {"slope": fit.slope, "intercept": fit.intercept, "residual": fit.residual}
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI configuration file")
    common.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="override a config entry")
    common.add_argument("--out", help="output directory for tables and the manifest")

    p = argparse.ArgumentParser(prog="homlab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"homlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("cell", parents=[common], help="correctors and the homogenized tensor")
    s.add_argument("--N", nargs="+", help="grid sizes (three or more give an observed order)")
    s.set_defaults(func=cmd_cell)

    s = sub.add_parser("kappa", parents=[common], help="Diophantine constant of a direction")
    s.add_argument("direction", nargs="+", help="components, e.g. 1 sqrt(2)")
    s.add_argument("--mu", type=float)
    s.add_argument("--R", type=int, default=1000)
    s.set_defaults(func=cmd_kappa)

    s = sub.add_parser("geometry", parents=[common], help="finite-type classification of the boundary")
    s.add_argument("--points", type=int, default=64)
    s.add_argument("--radius", type=float, default=0.02)
    s.add_argument("--probe", type=float, nargs="*", help="parameters for gradient sublevel fits")
    s.set_defaults(func=cmd_geometry)

    s = sub.add_parser("oscint", parents=[common], help="oscillatory-integral decay and sublevel exponents")
    s.add_argument("--k", type=int, nargs="+", default=[2, 3, 4])
    s.set_defaults(func=cmd_oscint)

    s = sub.add_parser("partition", parents=[common], help="dyadic stopping-time partition of a boundary patch")
    s.add_argument("--tau", type=float, default=2.0 ** -6)
    s.add_argument("--gamma", type=float, default=1.0)
    s.add_argument("--u", type=float, default=0.1, help="curve parameter of the patch centre")
    s.set_defaults(func=cmd_partition)

    s = sub.add_parser("layer", parents=[common], help="half-space boundary layer")
    s.add_argument("--normal", default="1 sqrt(2)")
    s.add_argument("--data", choices=["cos", "corrector"], default="corrector")
    s.add_argument("--N", type=int)
    s.add_argument("--T", type=float)
    s.set_defaults(func=cmd_layer)

    s = sub.add_parser("fbar", parents=[common], help="homogenized boundary data along the curve")
    s.add_argument("--samples", type=int)
    s.set_defaults(func=cmd_fbar)

    s = sub.add_parser("alpha", parents=[common], help="rate exponents alpha*, q*")
    s.add_argument("--d", type=int, default=2)
    s.add_argument("--p")
    s.add_argument("--gamma")
    s.add_argument("--k")
    s.set_defaults(func=cmd_alpha)

    s = sub.add_parser("solve", parents=[common], help="one oscillating Dirichlet solve")
    s.add_argument("--eps", type=eval_fraction)
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("experiment", parents=[common], help="epsilon sweep with rate fit")
    s.add_argument("--check", action="store_true", help="exit nonzero when a check fails")
    s.set_defaults(func=cmd_experiment)

    s = sub.add_parser("rates", parents=[common], help="fit slopes of eps/error tables")
    s.add_argument("csv", nargs="+")
    s.add_argument("--column", default="l2_error")
    s.set_defaults(func=cmd_rates)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        run = _start(args, args.command)
        code = args.func(args, run)
        run.finish()
    except (ConfigError, ValueError) as exc:
        print(f"homlab {args.command}: {exc}", file=sys.stderr)
        return 2
    return code


if __name__ == "__main__":
    sys.exit(main())
