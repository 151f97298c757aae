"""Command-line surface: reproducible experiments with machine-readable output.

JSON summaries go to stdout; series go to CSV files under --out, each
invocation writing a manifest with parameters and output checksums next to
its artifacts.  Exit code 2 flags validation problems, 1 numerical ones.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, convergence, meanfield, metrics, tables
from . import fixedpoint as fx
from .distributions import parse_distribution
from .errors import SupermarketError, Unstable, Unsupported, ValidationError
from .phasetype import fixed_point_ph, fixed_point_residuals, load_ph
from .simulator import SimConfig, compare_fixed_points, run

_FMT = "%.17g"


def _fmt(v: float) -> str:
    return _FMT % float(v)


class _Command:
    """Collects outputs plus the manifest for one invocation."""

    def __init__(self, name: str, params: dict, out_dir: str | None, seed=None):
        self.name = name
        self.params = params
        self.out_dir = Path(out_dir) if out_dir else None
        self.seed = seed
        self.outputs: dict[str, str] = {}

    def write_csv(self, filename: str, header: list[str], rows) -> str | None:
        if self.out_dir is None:
            return None
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / filename
        lines = [",".join(header)]
        for row in rows:
            lines.append(",".join(_fmt(v) if isinstance(v, float) else str(v) for v in row))
        text = "\n".join(lines) + "\n"
        path.write_text(text)
        self.outputs[filename] = hashlib.sha256(text.encode()).hexdigest()
        return str(path)

    def manifest(self) -> dict:
        man = {
            "command": self.name,
            "parameters": self.params,
            "artifact_version": __version__,
            "outputs": self.outputs,
        }
        if self.seed is not None:
            man["seed"] = self.seed
        return man

    def finish(self, summary: dict) -> None:
        if self.out_dir is not None:
            self.out_dir.mkdir(parents=True, exist_ok=True)
            man_path = self.out_dir / f"{self.name}-manifest.json"
            man_path.write_text(json.dumps(self.manifest(), sort_keys=True, indent=2) + "\n")
        summary["manifest"] = self.manifest()
        json.dump(summary, sys.stdout, sort_keys=True, indent=2)
        sys.stdout.write("\n")


def _parse_sweep(text: str) -> np.ndarray:
    try:
        lo, hi, step = (float(v) for v in text.split(":"))
    except ValueError as exc:
        raise ValidationError(f"sweep must be lo:hi:step, got {text!r}") from exc
    if step <= 0.0 or hi < lo:
        raise ValidationError("sweep needs step > 0 and hi >= lo")
    return np.arange(lo, hi + 0.5 * step, step)


def _parse_window(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError as exc:
        raise ValidationError(f"window must be lo:hi, got {text!r}") from exc
    return lo, hi


def _cmd_theta(args) -> None:
    dist = parse_distribution(args.dist)
    cmd = _Command("theta", {"dist": args.dist, "d": args.d, "mode": args.mode}, args.out)
    value = fx.theta(dist, args.d, args.mode)
    tilde = value * dist.mean() ** args.d
    cmd.finish({
        "theta": value,
        "theta_tilde": tilde,
        "mode": args.mode,
        "dist": dist.describe(),
        "d": args.d,
    })


def _cmd_fixed_point(args) -> None:
    dist = parse_distribution(args.dist)
    fp = fx.FixedPointFamily.build(args.lam, args.d, dist, mode=args.theta_mode)
    cmd = _Command("fixed-point", {"dist": args.dist, "lambda": args.lam, "d": args.d,
                                   "kmax": args.kmax, "theta_mode": args.theta_mode}, args.out)
    rows = [(k, fp.tail(k), fp.log10_tail(k), fp.upper_bound(k) if k >= 1 else 1.0)
            for k in range(args.kmax + 1)]
    path = cmd.write_csv("fixed_point.csv", ["k", "u_k", "log10_u_k", "upper_bound"],
                         [(k, float(u), float(l), float(b)) for k, u, l, b in rows])
    cmd.finish({
        "theta": fp.theta,
        "theta_tilde": fp.theta_tilde,
        "rho": fp.rho,
        "levels": {str(k): u for k, u, _, _ in rows},
        "csv": path,
    })


def _cmd_sojourn(args) -> None:
    dist = parse_distribution(args.dist)
    cmd = _Command("sojourn", {"dist": args.dist, "d": args.d, "lambda": args.lam,
                               "lambda_sweep": args.lambda_sweep}, args.out)
    if args.lambda_sweep:
        lams = _parse_sweep(args.lambda_sweep)
        rows = []
        for lam in lams:
            fp = fx.FixedPointFamily.build(float(lam), args.d, dist, mode=args.theta_mode)
            rows.append((float(lam), metrics.expected_sojourn(fp).e_td))
        path = cmd.write_csv("sojourn_sweep.csv", ["lambda", "e_td"], rows)
        cmd.finish({"points": len(rows), "csv": path,
                    "first": rows[0][1], "last": rows[-1][1]})
        return
    if args.lam is None:
        raise ValidationError("pass --lambda or --lambda-sweep")
    fp = fx.FixedPointFamily.build(args.lam, args.d, dist, mode=args.theta_mode)
    rep = metrics.expected_sojourn(fp)
    cmd.finish({
        "e_x": rep.e_x,
        "e_xr": rep.e_xr,
        "e_td": rep.e_td,
        "e_td_printed_form": rep.e_td_printed_form,
        "forms_agree": rep.forms_agree,
        "series_terms_used": rep.series_terms_used,
        "truncation_error_bound": rep.truncation_error_bound,
        "upper_bound": rep.e_td,
        "upper_bound_asymptotic_in_n": True,
        "theta": fp.theta,
    })


def _cmd_ph(args) -> None:
    rep = load_ph(args.alpha)
    fp = fixed_point_ph(rep, args.lam, args.d, args.method, K=args.kmax)
    cmd = _Command("ph", {"alpha": str(args.alpha), "method": args.method,
                          "lambda": args.lam, "d": args.d, "kmax": args.kmax}, args.out)
    summary = {
        "order": rep.order,
        "mu": rep.mu,
        "rho": fp.rho,
        "theta": fp.theta,
        "method": args.method,
        "masses": [float(v) for v in fp.masses],
    }
    if fp.levels is not None:
        summary["levels"] = {str(k): [float(v) for v in vec] for k, vec in sorted(fp.levels.items())}
        if len(fp.levels) >= 2:
            res = fixed_point_residuals(rep, args.lam, args.d, fp.levels, form="vector")
            proj = fixed_point_residuals(rep, args.lam, args.d, fp.levels, form="projected")
            summary["residuals"] = {
                "vector_sup": float(np.max(res["levels"])),
                "projected_sup": float(np.max(proj["levels"])),
                "throughput": res["throughput"],
            }
    cmd.finish(summary)


def _cmd_ode(args) -> None:
    cmd_params = {"system": args.system, "lambda": args.lam, "d": args.d, "mu": args.mu,
                  "ph": str(args.ph) if args.ph else None, "t_end": args.t_end,
                  "step": args.step, "kmax": args.kmax}
    cmd = _Command("ode", cmd_params, args.out)
    if args.system == "exp":
        if args.mu is None:
            raise ValidationError("exponential system needs --mu")
        rho = args.lam / args.mu
        K = args.kmax or fx.FixedPointFamily.build(
            args.lam, args.d, parse_distribution(f"exponential:mu={args.mu}")).truncation_level(1e-12)
        config = meanfield.MeanFieldConfig(system="exp", lam=args.lam, d=args.d, K=K,
                                           t_end=args.t_end, step=args.step, mu=args.mu)
        traj = meanfield.integrate_meanfield(config)
        rows = []
        for i, t in enumerate(traj.times):
            for k in range(K + 1):
                rows.append((float(t), k, float(traj.states[i, k])))
        path = cmd.write_csv("trajectory.csv", ["t", "k", "u_k"], rows)
        final = {str(k): float(traj.states[-1, k]) for k in range(K + 1)}
        cmd.finish({"K": K, "rho": rho, "csv": path, "final": final})
        return
    if args.ph is None:
        raise ValidationError("phase-type system needs --ph FILE")
    rep = load_ph(args.ph)
    K = args.kmax or 12
    config = meanfield.MeanFieldConfig(system="ph", lam=args.lam, d=args.d, K=K,
                                       t_end=args.t_end, step=args.step, rep=rep)
    traj = meanfield.integrate_meanfield(config)
    masses = meanfield.ph_level_masses(traj, K, rep.order)
    rows = []
    for i, t in enumerate(traj.times):
        S = traj.states[i].reshape(K, rep.order)
        for k in range(1, K + 1):
            rows.append((float(t), k, float(masses[i, k - 1]), *[float(v) for v in S[k - 1]]))
    header = ["t", "k", "u_k"] + [f"phase_{j + 1}" for j in range(rep.order)]
    path = cmd.write_csv("trajectory.csv", header, rows)
    cmd.finish({"K": K, "order": rep.order, "csv": path,
                "final_masses": [float(v) for v in masses[-1]]})


def _cmd_simulate(args) -> None:
    dist = parse_distribution(args.dist)
    config = SimConfig(n=args.n, lam=args.lam, d=args.d, dist=dist, seed=args.seed,
                       horizon=args.horizon, warmup=args.warmup,
                       choice_mode=args.choice_mode, replications=args.reps)
    cmd = _Command("simulate", {
        "n": args.n, "lambda": args.lam, "d": args.d, "dist": args.dist,
        "horizon": config.horizon, "warmup": config.warmup,
        "choice_mode": args.choice_mode, "reps": args.reps, "model": args.model,
    }, args.out, seed=args.seed)
    result = run(config, workers=args.workers)
    summary = result.to_dict()
    if args.model:
        theta_override = 1.0 if args.model == "classical" else None
        fp = fx.FixedPointFamily.build(args.lam, args.d, dist,
                                       theta_override=theta_override)
        k_max = max(result.tails)
        rows = [(k, result.tails[k][0],
                 result.tails[k][1] if not math.isnan(result.tails[k][1]) else 0.0,
                 fp.tail(k)) for k in sorted(result.tails)]
        path = cmd.write_csv("simulate_compare.csv", ["k", "u_k_sim", "ci", "u_k_model"], rows)
        ranking = compare_fixed_points(result, {
            args.model: [fp.tail(k) for k in range(1, k_max + 1)],
        })
        summary["comparison"] = {"csv": path, "max_abs_error": ranking[0]["max_abs_error"]}
    cmd.finish(summary)


def _cmd_convergence(args) -> None:
    cmd = _Command("convergence", {"lambda": args.lam, "mu": args.mu, "d": args.d,
                                   "t_end": args.t_end, "step": args.step,
                                   "window": args.window}, args.out)
    rho = args.lam / args.mu
    if not 0.0 < rho < 1.0:
        raise ValidationError(f"need 0 < rho < 1, got {rho:.6g}")
    dist = parse_distribution(f"exponential:mu={args.mu}")
    fp = fx.FixedPointFamily.build(args.lam, args.d, dist)
    K = args.kmax or fp.truncation_level(1e-12)
    config = meanfield.MeanFieldConfig(system="exp", lam=args.lam, d=args.d, K=K,
                                       t_end=args.t_end, step=args.step, mu=args.mu)
    traj = meanfield.integrate_meanfield(config)
    pi = meanfield.classical_fixed_point(rho, args.d, K)
    phi = convergence.phi_series(traj, pi)
    rows = [(float(t), float(p), float(np.log(p)) if p > 0 else float("-inf"))
            for t, p in zip(traj.times, phi)]
    path = cmd.write_csv("potential.csv", ["t", "phi", "log_phi"], rows)
    window = _parse_window(args.window)
    c0, delta, r2 = convergence.fit_decay(traj, pi, window)
    cmd.finish({"c0": c0, "delta": delta, "r_squared": r2, "K": K, "csv": path,
                "window": {"lo": window[0], "hi": window[1]}})


def _cmd_tables(args) -> None:
    rows = tables.render(args.which)
    cmd = _Command("tables", {"which": args.which}, args.out)
    headers = {1: ["m", "d", "theta_printed", "theta_reproduced", "relative_error",
                   "theta_formula_as_labeled", "theta_generic_standard"],
               2: ["tau", "theta_printed", "theta_reproduced", "relative_error"],
               3: ["d", "alpha", "theta_printed", "theta_reproduced", "relative_error"]}
    csv_rows = []
    for row in rows:
        base = list(row.label.values()) + [row.theta_printed, row.theta_reproduced,
                                           row.relative_error]
        base += [row.extra[k] for k in sorted(row.extra)]
        csv_rows.append(tuple(base))
    path = cmd.write_csv(f"table{args.which}.csv", headers[args.which], csv_rows)
    cmd.finish({
        "which": args.which,
        "rows": [{**row.label, "printed": row.theta_printed,
                  "computed": row.theta_reproduced,
                  "relative_error": row.relative_error} for row in rows],
        "max_relative_error": max(row.relative_error for row in rows),
        "csv": path,
        "note": ("printed Erlang table labels are transposed relative to the printed formula; "
                 "theta_reproduced evaluates the formula at the exchanged pair"
                 if args.which == 1 else ""),
    })


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="supermarket",
                                     description="d-choices load balancing toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("theta", help="tail parameter of a service law")
    p.add_argument("--dist", required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--mode", choices=["generic", "closed-form", "paper-table"], default="generic")
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_theta)

    p = sub.add_parser("fixed-point", help="doubly exponential level family")
    p.add_argument("--dist", required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--kmax", type=int, default=12)
    p.add_argument("--theta-mode", default="generic",
                   choices=["generic", "closed-form", "paper-table"])
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_fixed_point)

    p = sub.add_parser("sojourn", help="expected sojourn time")
    p.add_argument("--dist", required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--lambda-sweep")
    p.add_argument("--theta-mode", default="generic",
                   choices=["generic", "closed-form", "paper-table"])
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_sojourn)

    p = sub.add_parser("ph", help="phase-type fixed point by one of three methods")
    p.add_argument("--alpha", required=True, help="file: alpha line, then T rows")
    p.add_argument("--method", type=int, choices=[1, 2, 3], required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--kmax", type=int)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_ph)

    p = sub.add_parser("ode", help="integrate the mean-field system")
    p.add_argument("--system", choices=["exp", "ph"], required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--mu", type=float)
    p.add_argument("--ph", help="phase-type file for --system ph")
    p.add_argument("--t-end", type=float, required=True)
    p.add_argument("--step", type=float, required=True)
    p.add_argument("--kmax", type=int)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_ode)

    p = sub.add_parser("simulate", help="discrete-event simulation")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--dist", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--horizon", type=float)
    p.add_argument("--warmup", type=float)
    p.add_argument("--choice-mode", default="without-replacement",
                   choices=["without-replacement", "with-replacement"])
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--model", choices=["classical", "generic"],
                   help="emit k,u_k_sim,ci,u_k_model comparison CSV")
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("convergence", help="potential decay of the mean-field flow")
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--t-end", type=float, default=50.0)
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--kmax", type=int)
    p.add_argument("--window", default="5:40")
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_convergence)

    p = sub.add_parser("tables", help="reproduce the printed tail-parameter tables")
    p.add_argument("--which", type=int, choices=[1, 2, 3], required=True)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_tables)

    return parser


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.fn(args)
        return 0
    except (ValidationError, Unstable, Unsupported) as exc:
        # bad inputs: wrong parameters, unstable load, impossible request
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SupermarketError as exc:
        # numerical failure inside a structurally valid request
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
