"""Command-line interface: ``sqdf <subcommand> ...``.

Every subcommand prints a JSON report (or writes it with ``--out``) and,
where the result is tabular, a CSV with ``--csv``.  Usage errors exit 64;
``verify`` exits 1 on an invariant failure and 2 when only an
asymptotic-only check failed.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import counting, dichotomy, mollifier, weyl
from .calibration import load_calibration
from .report import RunReport, check_le, rows_to_csv
from .sets import SetKind, SetSpec, parse_set_arg, realize

EX_USAGE = 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EX_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("output")
    g.add_argument("--out", type=Path, help="write the JSON report here instead of stdout")
    g.add_argument("--csv", type=Path, help="write the tabular part as CSV")
    g.add_argument("--no-timestamp", action="store_true", help="omit timestamps and timings (byte-identical reruns)")
    g.add_argument("--calibration", type=Path, help="calibration sidecar (default: $SQDF_CALIBRATION or bundled)")


def _set_args(p: argparse.ArgumentParser, required: bool = True) -> None:
    p.add_argument("--set", dest="set_spec", required=required,
                   help="random:<density>[:<seed>] | congruence:<m>:<r> | interval:<lo>:<hi> | full | file:<path>; join with '+'")
    p.add_argument("--n", type=int, help="ambient size N")
    p.add_argument("--seed", type=int, help="seed for random sets without an explicit seed")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="sqdf", description="Square-difference numerical laboratory.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("count", help="intersection counts, averages, Varnavides sum")
    _set_args(p)
    p.add_argument("--t", type=int, action="append", help="shift t (repeatable)")
    p.add_argument("--lambda", dest="lam", type=int)
    p.add_argument("--mu", type=int)
    p.add_argument("--varnavides", action="store_true")
    _common(p)

    p = sub.add_parser("weyl", help="Weyl sums, minor-arc scans, calibration")
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--mu", type=float)
    p.add_argument("--q", type=int, default=1)
    p.add_argument("--alpha", type=float, action="append")
    p.add_argument("--eta", type=float, help="scan the minor arcs for this eta")
    p.add_argument("--grid", type=int)
    p.add_argument("--calibrate", action="store_true", help="run the lambda=mu in {200,500,1000} x eta in {0.4,0.2,0.1} grid")
    _common(p)

    p = sub.add_parser("mollifier", help="kernel inspection and support checks")
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--L", type=float, required=True)
    p.add_argument("--profile", choices=[k.value for k in mollifier.ProfileKind], default="FEJER")
    p.add_argument("--alpha", type=float, action="append")
    p.add_argument("--samples", type=int, default=10**4, help="outside points for the support check")
    p.add_argument("--flatness-t", type=int, action="append")
    p.add_argument("--tail-tol", type=float, default=mollifier.DEFAULT_TAIL_TOL)
    _common(p)

    p = sub.add_parser("lambda", help="Lambda_q direct vs Fourier side")
    _set_args(p)
    p.add_argument("--lambda", dest="lam", type=int, required=True)
    p.add_argument("--mu", type=int, required=True)
    p.add_argument("--q", type=int, default=1)
    _common(p)

    for name, helptext in (("dichotomy", "one dichotomy test"), ("iterate", "scale iteration")):
        p = sub.add_parser(name, help=helptext)
        _set_args(p, required=False)
        p.add_argument("--config", type=Path, help="JSON {epsilon, eta_override, mu_factor, n_factor, profile, seeds, set_spec}")
        p.add_argument("--epsilon", type=float)
        p.add_argument("--eta", type=float, help="desk-scale eta override")
        p.add_argument("--mu-factor", type=float)
        p.add_argument("--n-factor", type=float)
        if name == "dichotomy":
            p.add_argument("--lambda", dest="lam", type=int)
            p.add_argument("--mu", type=int)
        else:
            p.add_argument("--j-max", type=int, default=10)
            p.add_argument("--all-scales", action="store_true", help="compute energies at every scale")
        _common(p)

    p = sub.add_parser("census", help="good progressions and the over-count check")
    _set_args(p)
    p.add_argument("--m-len", type=int, required=True)
    p.add_argument("--pairs", type=int, default=0, help="random pairs for the over-count check")
    _common(p)

    p = sub.add_parser("verify", help="run the invariant suite")
    p.add_argument("--quick", action="store_true")
    _common(p)
    return ap


# ------------------------------------------------------------------ helpers


def _realize(args):
    spec = parse_set_arg(args.set_spec, args.n, args.seed)
    return spec, realize(spec)


def _cfg(args) -> dict:
    skip = {"out", "csv", "no_timestamp", "calibration", "command"}
    return {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items() if k not in skip}


def _emit(rep: RunReport, args, csv_text: str | None = None) -> None:
    if args.no_timestamp:
        rep.timings = {}
    rep.stamp(not args.no_timestamp)
    text = rep.dumps()
    if args.out:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    if args.csv and csv_text is not None:
        args.csv.write_text(csv_text)


def _cplx(z) -> dict:
    return {"re": float(z.real), "im": float(z.imag), "abs": float(abs(z))}


# ------------------------------------------------------------------ commands


def cmd_count(args, calib):
    spec, a = _realize(args)
    res = {"set": spec.to_json(), "size": len(a), "density": a.density}
    rows = []
    if args.t:
        res["counts"] = {str(t): counting.intersect_count(a, t) for t in args.t}
        rows = [(t, res["counts"][str(t)]) for t in args.t]
    if args.lam is not None:
        if args.mu is None:
            raise UsageError("--lambda needs --mu")
        res["average"] = counting.average_count(a, args.lam, args.mu)
        rows += [(t, counting.intersect_count(a, t)) for t in range(args.lam + 1, args.lam + args.mu + 1)]
    if args.varnavides:
        res["varnavides_sum"] = counting.varnavides_sum(a)
    if len(res) == 3:
        raise UsageError("nothing to count: give --t, --lambda/--mu or --varnavides")
    return res, [], rows_to_csv(["t", "count"], rows)


CAL_LAMBDAS = (200, 500, 1000)
CAL_ETAS = (0.4, 0.2, 0.1)


def cmd_weyl(args, calib):
    res, checks, rows = {}, [], []
    if args.calibrate:
        recs = [weyl.calibration_record(l, l, weyl.EtaParams(e), timestamp=not args.no_timestamp)
                for l in CAL_LAMBDAS for e in CAL_ETAS]
        res["records"] = recs
        for r in recs:
            if r["sup"] is not None:
                checks.append(check_le(f"sup/eta (lambda=mu={r['lambda']}, eta={r['eta']})", r["sup_over_eta"], calib.c1))
        rows = [(r["eta"], r["lambda"], r["mu"], r["grid_size"], r["sup"], r["sup_over_eta"]) for r in recs]
        return res, checks, rows_to_csv(["eta", "lambda", "mu", "grid_size", "sup", "sup_over_eta"], rows)
    if args.lam is None or args.mu is None:
        raise UsageError("--lambda and --mu are required")
    lam = int(args.lam) if float(args.lam).is_integer() else args.lam
    mu = int(args.mu) if float(args.mu).is_integer() else args.mu
    if args.alpha:
        vals = {}
        for al in args.alpha:
            z = weyl.weyl_sum(lam, mu, al) if args.q == 1 else weyl.weyl_sum_q(lam, mu, args.q, al)
            vals[repr(al)] = _cplx(z)
            rows.append((al, z.real, z.imag, abs(z)))
        res["values"] = vals
    if args.eta is not None:
        e = weyl.EtaParams(args.eta)
        try:
            s = weyl.minor_arc_sup(lam, mu, e, args.grid)
            res["minor_arc_sup"] = s
            res["sup_over_eta"] = s / e.eta
            checks.append(check_le("minor_arc_sup <= c1 eta", s, calib.c1 * e.eta))
        except weyl.NoMinorArcError as exc:
            res["minor_arc_sup"] = None
            res["note"] = str(exc)
    if not res:
        raise UsageError("give --alpha, --eta or --calibrate")
    return res, checks, rows_to_csv(["alpha", "re", "im", "abs"], rows)


def cmd_mollifier(args, calib):
    m = mollifier.DiscreteMollifier(mollifier.make_profile(args.profile), args.q, args.L, tail_tol=args.tail_tol)
    res = {"config": m.to_json(), "tail_bound": m.tail_bound()}
    checks = []
    try:
        res["mass"] = mollifier.kernel_mass(m)
        checks.append(check_le("|mass - 1|", abs(res["mass"] - 1.0), 1e-6))
    except ValueError as exc:
        res["mass"] = None
        res["mass_note"] = str(exc)
    rows = []
    if args.L * args.L > 2 * args.q**2:
        rng = np.random.default_rng(0)
        pts = rng.random(args.samples)
        d = (pts * m.q2 - np.round(pts * m.q2)) / m.q2
        outside = pts[np.abs(d) > 1.0 / args.L**2]
        worst = float(np.max(mollifier.mollifier_hat(m, outside))) if outside.size else 0.0
        tol = 0.0 if m.kind is mollifier.ProfileKind.FEJER else 1e-6
        checks.append(check_le("max psihat outside M_{q,L}", worst, tol))
        centres = np.arange(m.q2) / m.q2
        checks.append(check_le("max |psihat(a/q^2) - 1|", float(np.max(np.abs(mollifier.mollifier_hat(m, centres) - 1))), 1e-12))
        if args.alpha:
            res["hat"] = {repr(a): mollifier.mollifier_hat(m, a) for a in args.alpha}
            rows = [(a, res["hat"][repr(a)]) for a in args.alpha]
    else:
        res["hat_note"] = "periodization terms overlap: L^2 <= 2 q^2"
    if args.flatness_t:
        res["flatness"] = {str(t): mollifier.translation_flatness(m, t) for t in args.flatness_t}
    return res, checks, rows_to_csv(["alpha", "psihat"], rows)


def cmd_lambda(args, calib):
    spec, a = _realize(args)
    p = weyl.WeylParams(args.lam, args.mu, args.q)
    d = counting.lambda_direct(a, a, p)
    f = counting.lambda_fourier(a, a, p)
    rel = abs(d.value - f) / max(1.0, abs(d.value))
    res = {"set": spec.to_json(), "direct": d.value, "fourier": f, "t_count": d.t_count, "empty": d.empty,
           "grid": counting.lambda_fourier_grid(a, a, p)}
    rows = sorted((d.per_t or {}).items())
    return res, [check_le("|direct - fourier| / max(1, |direct|)", rel, 1e-8)], rows_to_csv(["t", "count"], rows)


def _load_config(args) -> dict:
    cfg = json.loads(args.config.read_text()) if args.config else {}
    over = {"epsilon": args.epsilon, "eta_override": args.eta, "mu_factor": args.mu_factor, "n_factor": args.n_factor}
    cfg.update({k: v for k, v in over.items() if v is not None})
    if "epsilon" not in cfg:
        raise UsageError("--epsilon (or config epsilon) is required")
    return cfg


def _config_sets(args, cfg):
    if args.set_spec:
        spec = parse_set_arg(args.set_spec, args.n, args.seed)
    elif "set_spec" in cfg:
        spec = SetSpec.from_json(cfg["set_spec"])
    else:
        raise UsageError("--set or config set_spec is required")
    seeds = cfg.get("seeds")
    if seeds and spec.kind is SetKind.RANDOM:
        return [SetSpec(SetKind.RANDOM, spec.n, density=spec.density, seed=int(s)) for s in seeds]
    return [spec]


def _regime(cfg, calib):
    kw = {k: cfg[k] for k in ("mu_factor", "n_factor", "eta_override") if cfg.get(k) is not None}
    return dichotomy.EpsilonRegime.from_calibration(float(cfg["epsilon"]), calib, **kw)


def cmd_dichotomy(args, calib):
    cfg = _load_config(args)
    reg = _regime(cfg, calib)
    eta = reg.eta
    runs, checks, rows = [], [], []
    for spec in _config_sets(args, cfg):
        a = realize(spec)
        lam = args.lam or math.ceil(reg.mu_factor * eta.q_eta / eta.eta)
        mu = args.mu or lam
        out = dichotomy.dichotomy_test(a, reg, lam, mu, eta, strict=False)
        kind = "invariant" if out.branch is dichotomy.Branch.RANDOM else "asymptotic"
        if out.branch is dichotomy.Branch.RANDOM:
            recount = counting.intersect_count(a, out.witness_t)
            checks.append(check_le(f"threshold < recount (seed {spec.seed})", out.threshold_used, recount - 0.5))
        else:
            checks.append(check_le(f"eps N/10 <= annulus energy (seed {spec.seed})",
                                   out.diagnostics["energy_target"], out.annulus_energy, kind=kind))
        for c in out.diagnostics["preconditions"]:
            if not c["holds"]:
                checks.append(check_le(f"precondition {c['name']}", 0, -1, kind="asymptotic"))
        runs.append({"set": spec.to_json(), "outcome": out.to_json()})
        rows += [(spec.seed, t, c) for t, c in out.diagnostics["counts"].items()]
    res = {"regime": reg.to_json(), "eta": eta.eta, "q": eta.q_eta, "runs": runs}
    return res, checks, rows_to_csv(["seed", "t", "count"], rows)


def cmd_iterate(args, calib):
    cfg = _load_config(args)
    reg = _regime(cfg, calib)
    runs, checks, rows = [], [], []
    for spec in _config_sets(args, cfg):
        a = realize(spec)
        it = dichotomy.scale_iteration(a, reg, args.j_max, stop_at_witness=not args.all_scales)
        checks += it.checks
        if it.witness:
            checks.append(check_le(f"threshold < recount (seed {spec.seed})",
                                   it.outcomes[it.witness_scale - 1].threshold_used,
                                   counting.intersect_count(a, it.witness[0]) - 0.5))
        runs.append({"set": spec.to_json(), "iteration": it.to_json()})
        rows += [(spec.seed, j + 1, lam, it.energies[j] if j < len(it.energies) else "")
                 for j, lam in enumerate(it.scales)]
    res = {"regime": reg.to_json(), "runs": runs}
    return res, checks, rows_to_csv(["seed", "j", "lambda", "energy"], rows)


def cmd_census(args, calib):
    spec, a = _realize(args)
    rec = counting.good_progressions(a, args.m_len)
    res = {"set": spec.to_json(), "census": rec}
    checks = []
    if not rec["degenerate"]:
        checks.append(check_le("target <= good_count", rec["target"], rec["good_count"], kind="asymptotic"))
    rows = []
    if args.pairs:
        lim = counting.ProgressionLimits.for_set(a, args.m_len)
        rng = np.random.default_rng(args.seed or 0)
        smax = math.isqrt(a.n_ambient - 1)
        for _ in range(args.pairs):
            s = int(rng.integers(1, smax + 1))
            n0 = int(rng.integers(1, a.n_ambient - s * s + 1))
            rows.append((n0, s, counting.overcount_bound_check(n0, s, args.m_len, lim)))
        worst = max(r[2] for r in rows)
        res["overcount_max"] = worst
        checks.append(check_le("max overcount <= M^2", worst, args.m_len**2))
    return res, checks, rows_to_csv(["n0", "s", "count"], rows)


COMMANDS = {
    "count": cmd_count,
    "weyl": cmd_weyl,
    "mollifier": cmd_mollifier,
    "lambda": cmd_lambda,
    "dichotomy": cmd_dichotomy,
    "iterate": cmd_iterate,
    "census": cmd_census,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        calib = load_calibration(args.calibration)
        t0 = time.perf_counter()
        if args.command == "verify":
            from .verify import run_suite

            rep = run_suite(quick=args.quick, calib=calib)
            _emit(rep, args, rows_to_csv(["name", "lhs", "relation", "rhs", "holds", "kind"],
                                         [(c.name, c.lhs, c.relation, c.rhs, c.holds, c.kind) for c in rep.checks]))
            return rep.exit_code()
        res, checks, csv_text = COMMANDS[args.command](args, calib)
        rep = RunReport(args.command, _cfg(args), calib.numbers(), res, list(checks))
        rep.timings["total_s"] = time.perf_counter() - t0
        _emit(rep, args, csv_text)
        return 0 if args.command != "dichotomy" and args.command != "iterate" else rep.exit_code()
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"sqdf: error: {exc}", file=sys.stderr)
        return EX_USAGE
    except (ValueError, FileNotFoundError) as exc:
        print(f"sqdf: error: {exc}", file=sys.stderr)
        return EX_USAGE


if __name__ == "__main__":
    sys.exit(main())
