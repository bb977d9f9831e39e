"""Command-line front end.

Exit codes: 0 success / audit pass, 1 audit fail or inconclusive,
2 usage or input error, 3 optimizer did not converge.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .audit import (AuditReport, audit_apx, audit_bic, audit_risk_averse, audit_tie,
                    verify_transform_claims)
from .core import EXACT, MonteCarlo, run
from .errors import ConvergenceError, InputError, UnsupportedMethodError
from .instance_io import parse_instance
from .mechanisms import CoverageAuction
from .transform import estimated_payoff_table, transform, transform_bayesian
from .utility import parse_battery

log = logging.getLogger("riskaudit")

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_CONVERGENCE = 0, 1, 2, 3
MODES = ("tie", "risk-averse", "bic", "apx", "claims")
TRANSFORMS = ("none", "exact", "montecarlo", "bayesian")


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2)


def _emit(doc, out):
    text = _dump(doc) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    return text


def _default_tol(mech):
    base = getattr(mech, "base", mech)
    return 1e-3 if isinstance(base, CoverageAuction) else 1e-9


def _method(args):
    if args.method == "montecarlo":
        return MonteCarlo(args.samples, args.seed)
    return EXACT


def _apply_transform(kind, base, inst, args):
    if kind == "none":
        return base
    if kind == "exact":
        return transform(base, EXACT)
    if kind == "montecarlo":
        return transform(base, MonteCarlo(args.samples, args.seed))
    if inst.instance.prior is None:
        raise InputError("bayesian transform needs a prior in the instance file")
    return transform_bayesian(base, inst.instance.prior, EXACT)


def _perturb(table, spec):
    kind, _, amount = spec.partition(":")
    try:
        amount = float(amount)
    except ValueError:
        raise InputError(f"bad --perturb {spec!r}; use scale:F or shift:D") from None
    if kind == "scale":
        return table.perturbed(lambda key, i, mean: mean * amount)
    if kind == "shift":
        return table.perturbed(lambda key, i, mean: mean + amount)
    raise InputError(f"bad --perturb {spec!r}; use scale:F or shift:D")


def _battery(args, inst):
    return parse_battery(args.battery if args.battery is not None else inst.battery)


def _audit(mode, mech, base, inst, args) -> AuditReport:
    space = inst.type_space()
    tol = args.tol if args.tol is not None else _default_tol(mech)
    method = _method(args)
    if mode == "tie":
        return audit_tie(mech, space, method, tol)
    if mode == "risk-averse":
        return audit_risk_averse(mech, space, _battery(args, inst), method, tol)
    if mode == "bic":
        if inst.instance.prior is None:
            raise InputError("bic audit needs a prior in the instance file")
        return audit_bic(mech, inst.instance.prior, space, method, tol,
                         risk_averse=args.risk_averse,
                         utilities=_battery(args, inst) if args.risk_averse else None)
    if mode == "apx":
        table = estimated_payoff_table(base, list(space.profiles()),
                                       MonteCarlo(args.samples, args.seed))
        if args.perturb:
            table = _perturb(table, args.perturb)
        report = audit_apx(transform(base, table=table), space, _battery(args, inst),
                           args.epsilon, tol)
        report.details["payoff_table"] = table.method
        return report
    if args.tol is None:
        tol = 1e-6 if isinstance(base, CoverageAuction) else 1e-12
    return verify_transform_claims(base, transform(base, EXACT), space,
                                   range(args.claim_seeds), tol)


def _report_doc(report, args, extra=None):
    doc = report.to_dict()
    doc["run"] = {"seed": args.seed, "samples": args.samples, "instance": str(args.instance)}
    if extra:
        doc["run"].update(extra)
    return doc


def _print_summary(report: AuditReport, stream):
    print(f"{report.mode}: {report.verdict.upper()}  worst margin {report.worst_margin:.6g}  "
          f"({report.n_checks} checks, tol {report.tolerance:g}, {report.method})", file=stream)
    for flag in report.flags:
        print(f"  flag: {flag}", file=stream)
    for w in report.witnesses[:10]:
        profile = ", ".join(_short(v) for v in w.true_profile)
        dev = _short(w.deviation) if w.deviation is not None else "-"
        print(f"  witness: player {w.player} true ({profile}) -> {dev} "
              f"[{w.utility}] margin {w.margin:.6g}", file=stream)
    if len(report.witnesses) > 10:
        print(f"  ... {len(report.witnesses) - 10} more witnesses", file=stream)


def _short(v):
    j = v.to_json()
    if j["type"] == "single_item":
        return f"{j['value']:g}"
    return "{" + ",".join(f"{it}:{'+'.join(els) or '0'}" for it, els in j["item_sets"].items()) + \
        " w=" + ",".join(f"{u['id']}={u['weight']:g}" for u in j["universe"]) + "}"


def cmd_run(args):
    inst = parse_instance(args.instance)
    base = inst.build_mechanism()
    mech = _apply_transform(args.transform, base, inst, args)
    r = run(mech, inst.instance.true_valuations, args.seed)
    coin = r.coin.tolist() if isinstance(r.coin, np.ndarray) else r.coin
    doc = {"mechanism": mech.name, "seed": args.seed, "coin": coin,
           "allocation": [sorted(b) for b in r.allocation], "payments": list(r.payments)}
    sys.stdout.write(_emit(doc, args.out))
    return EXIT_OK


def cmd_optimize(args):
    inst = parse_instance(args.instance)
    mech = inst.build_mechanism()
    if not isinstance(mech, CoverageAuction):
        raise InputError("optimize applies to coverage auctions only")
    reports = inst.instance.true_valuations
    x = mech.fractional_allocation(reports)
    doc = {"items": list(mech.items), "x": x.tolist(),
           "win_probabilities": mech.win_probabilities(reports).tolist(),
           "expected_welfare": float(mech.expected_values(reports, x).sum()),
           "payments": list(mech.payments(reports))}
    sys.stdout.write(_emit(doc, args.out))
    return EXIT_OK


def cmd_transform(args):
    inst = parse_instance(args.instance)
    base = inst.build_mechanism()
    kind = args.transform_method
    mech = _apply_transform(kind, base, inst, args)
    truths = inst.instance.true_valuations
    pis = [mech.expected_truthful_payoff(truths, i) for i in range(mech.n_players)]
    if not args.then_audit:
        doc = {"mechanism": mech.name, "method": kind, "expected_truthful_payoff": pis}
        sys.stdout.write(_emit(doc, args.out))
        return EXIT_OK
    if args.then_audit in ("apx", "claims"):
        raise InputError("--then-audit supports tie, risk-averse and bic")
    report = _audit(args.then_audit, mech, base, inst, args)
    _print_summary(report, sys.stdout)
    _emit(_report_doc(report, args, {"transform": kind, "expected_truthful_payoff": pis}),
          args.out)
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_audit(args):
    inst = parse_instance(args.instance)
    base = inst.build_mechanism()
    kind = args.transform
    if args.mode in ("apx", "claims") and kind != "none":
        raise InputError(f"{args.mode} mode builds its own transform; omit --transform")
    mech = _apply_transform(kind, base, inst, args)
    report = _audit(args.mode, mech, base, inst, args)
    _print_summary(report, sys.stdout)
    _emit(_report_doc(report, args, {"transform": kind}), args.out)
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_report(args):
    try:
        doc = json.loads(Path(args.path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise InputError(f"no such report {args.path!r}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"report is not valid JSON: {exc}") from None
    print(f"mode       {doc.get('mode')}")
    print(f"verdict    {doc.get('verdict')}")
    print(f"worst      {doc.get('worst_margin')}")
    print(f"method     {doc.get('method')}   tol {doc.get('tolerance')}")
    print(f"checks     {doc.get('n_checks')}")
    for flag in doc.get("flags", []):
        print(f"flag       {flag}")
    ws = doc.get("witnesses", [])
    if ws:
        print(f"{'player':>6}  {'utility':<26} {'margin':>14}  deviation")
        for w in ws:
            dev = w["deviation"]
            dev = dev.get("value", "coverage") if dev else "-"
            print(f"{w['player']:>6}  {w['utility']:<26} {w['margin']:>14.6g}  {dev}")
    return EXIT_OK


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--instance", "--in", dest="instance", help="instance JSON file")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--samples", type=int, default=10_000)
    common.add_argument("--out", help="write the machine-readable JSON here")

    audit_opts = argparse.ArgumentParser(add_help=False)
    audit_opts.add_argument("--tol", type=float, default=None)
    audit_opts.add_argument("--epsilon", type=float, default=0.0)
    audit_opts.add_argument("--battery", default=None,
                            help="';'-separated utilities, e.g. 'identity;cara:1;log'")
    audit_opts.add_argument("--risk-averse", action="store_true",
                            help="bic mode: check every utility in the battery")
    audit_opts.add_argument("--perturb", help="apx mode: scale:F or shift:D applied to the table")
    audit_opts.add_argument("--claim-seeds", type=int, default=16)

    p = argparse.ArgumentParser(prog="riskaudit", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("run", parents=[common], help="simulate one draw on the true valuations")
    s.add_argument("--transform", choices=TRANSFORMS, default="none")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("optimize", parents=[common], help="print the welfare-maximizing x*")
    s.set_defaults(func=cmd_optimize)

    s = sub.add_parser("transform", parents=[common, audit_opts],
                       help="apply the risk-neutralizing transform")
    s.add_argument("--method", dest="transform_method", choices=TRANSFORMS[1:], default="exact")
    s.add_argument("--audit-method", dest="method", choices=("exact", "montecarlo"),
                   default="exact")
    s.add_argument("--then-audit", choices=("tie", "risk-averse", "bic"))
    s.set_defaults(func=cmd_transform)

    s = sub.add_parser("audit", parents=[common, audit_opts], help="run an incentive audit")
    s.add_argument("--mode", choices=MODES, required=True)
    s.add_argument("--method", choices=("exact", "montecarlo"), default="exact",
                   help="how audits take expectations over coins")
    s.add_argument("--transform", choices=TRANSFORMS, default="none")
    s.set_defaults(func=cmd_audit)

    s = sub.add_parser("report", help="render a saved JSON report")
    s.add_argument("path")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command != "report" and not args.instance:
        print("error: --instance is required", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except ConvergenceError as exc:
        print(f"convergence error: {exc} (residual {exc.residual:.3e})", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (InputError, UnsupportedMethodError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
