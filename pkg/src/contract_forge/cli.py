"""Command-line front end.

Exit codes: 0 success or IC, 1 unreadable input, 2 invalid instance,
3 not implementable or IC violated.
"""
from __future__ import annotations

import argparse
import sys
import time
from typing import Optional, Sequence

from . import documents as docs
from .continuous import (
    AssumptionViolated,
    ContinuousContract,
    NotPiecewiseMonotone,
    NotRegular,
    check_implementable_cont,
    min_payment_contract_cont,
    price_virtual_welfare_rule,
    uniform_optimal_contract,
    verify_continuous_plan,
)
from .discrete import (
    CapExceeded,
    NotNormalized,
    PricedContract,
    brute_force_optimal,
    check_implementable,
    min_payment_contract,
    normalize_allocation,
    optimal_contract,
    verify_correlated_menu,
    verify_deviation_plan,
)
from .model import InstanceViolation

EXIT_OK, EXIT_PARSE, EXIT_INVALID, EXIT_REJECTED = 0, 1, 2, 3
SOLVER = "exact rational two-phase simplex (Bland)"


class _Fail(Exception):
    def __init__(self, code: int, message: str, extra: Optional[dict] = None):
        super().__init__(message)
        self.code = code
        self.extra = extra or {}


def _load_instance(path: str):
    try:
        return docs.parse_instance(docs.load_json(path))
    except docs.DocumentError as exc:
        raise _Fail(EXIT_PARSE, str(exc)) from None
    except InstanceViolation as exc:
        raise _Fail(EXIT_INVALID, str(exc), {"assumption": exc.assumption, "witness": _plain(exc.witness)}) from None


def _plain(value):
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, (int, str)):
        return value
    return docs.q(value)


def _provenance(pivots: int, started: float, args) -> dict:
    out = {"solver": SOLVER, "pivots": pivots}
    if getattr(args, "timing", False):
        out["wall_time_s"] = round(time.perf_counter() - started, 6)
    return out


def _discrete_contract(priced: PricedContract) -> dict:
    return {
        "allocation": docs.allocation_to_doc(priced.contract.allocation),
        "payments": docs.payments_to_doc(priced.contract.payments),
    }


def _continuous_contract(c: ContinuousContract) -> dict:
    return {"rule": docs.rule_to_doc(c.rule), "payments": [[docs.q(t) for t in vec] for vec in c.payments]}


def _continuous_summary(c: ContinuousContract) -> dict:
    return {
        "contract": _continuous_contract(c),
        "revenue": docs.q(c.revenue),
        "expected_payment": docs.q(c.expected_payment),
        "virtual_welfare": docs.q(c.virtual_welfare),
        "top_type_utility": docs.q(c.top_utility),
    }


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_validate(args) -> tuple[int, dict]:
    inst = _load_instance(args.instance)
    summary = {"actions": inst.n + 1, "outcomes": inst.m + 1, "types": inst.types.kind}
    return EXIT_OK, {"command": "validate", "status": "valid", "instance": summary}


def _check_certificate(args, inst, started) -> tuple[int, dict]:
    try:
        plan = docs.parse_certificate(docs.load_json(args.certificate))
        rule_doc = docs.load_json(args.allocation)
        if inst.is_discrete:
            alloc = normalize_allocation(inst, docs.parse_discrete_allocation(rule_doc))
            if not isinstance(plan, docs.DeviationPlan):
                raise docs.DocumentError("discrete instance needs a discrete certificate")
            verdict = verify_deviation_plan(inst, alloc, plan)
        else:
            rule = docs.parse_rule(rule_doc, inst.types.upper)
            if not isinstance(plan, docs.ContinuousDeviationPlan):
                raise docs.DocumentError("continuous instance needs a continuous certificate")
            verdict = verify_continuous_plan(inst, rule, plan)
    except (docs.DocumentError, NotNormalized, NotPiecewiseMonotone, ValueError) as exc:
        raise _Fail(EXIT_PARSE, str(exc)) from None
    out = {
        "command": "check-certificate",
        "status": "valid" if verdict.valid else "invalid",
        "deviation_cost": docs.q(verdict.deviation_cost),
        "truthful_cost": docs.q(verdict.truthful_cost),
        "provenance": _provenance(0, started, args),
    }
    if not verdict.valid:
        out["failed_condition"] = verdict.failed
    return (EXIT_OK if verdict.valid else EXIT_REJECTED), out


def cmd_check(args) -> tuple[int, dict]:
    started = time.perf_counter()
    inst = _load_instance(args.instance)
    if args.certificate:
        return _check_certificate(args, inst, started)
    try:
        rule_doc = docs.load_json(args.allocation)
        if inst.is_discrete:
            rule = normalize_allocation(inst, docs.parse_discrete_allocation(rule_doc))
        else:
            rule = docs.parse_rule(rule_doc, inst.types.upper)
    except NotPiecewiseMonotone as exc:
        out = {"command": "check", "status": "not-implementable", "reason": f"not monotone piecewise constant: {exc}"}
        return EXIT_REJECTED, out
    except (docs.DocumentError, ValueError) as exc:
        raise _Fail(EXIT_PARSE, str(exc)) from None

    if inst.is_discrete:
        verdict = check_implementable(inst, rule)
        if not verdict.implementable:
            out = {
                "command": "check",
                "status": "not-implementable",
                "allocation": docs.allocation_to_doc(rule),
                "certificate": docs.plan_to_doc(verdict.plan),
                "provenance": _provenance(verdict.pivots, started, args),
            }
            return EXIT_REJECTED, out
        priced = min_payment_contract(inst, rule)
        out = {
            "command": "check",
            "status": "implementable",
            "contract": _discrete_contract(priced),
            "revenue": docs.q(priced.revenue),
            "expected_payment": docs.q(priced.expected_payment),
            "provenance": _provenance(verdict.pivots + priced.pivots, started, args),
        }
        return EXIT_OK, out

    verdict = check_implementable_cont(inst, rule)
    if not verdict.implementable:
        out = {
            "command": "check",
            "status": "not-implementable",
            "rule": docs.rule_to_doc(verdict.rule),
            "certificate": docs.continuous_plan_to_doc(verdict.plan),
            "provenance": _provenance(verdict.pivots, started, args),
        }
        return EXIT_REJECTED, out
    priced = min_payment_contract_cont(inst, rule)
    out = {"command": "check", "status": "implementable", **_continuous_summary(priced)}
    out["provenance"] = _provenance(verdict.pivots + priced.pivots, started, args)
    return EXIT_OK, out


def cmd_solve(args) -> tuple[int, dict]:
    started = time.perf_counter()
    inst = _load_instance(args.instance)
    if inst.is_discrete:
        best = optimal_contract(inst, workers=args.workers)
        out = {
            "command": "solve",
            "status": "optimal",
            "contract": _discrete_contract(best),
            "revenue": docs.q(best.revenue),
            "expected_payment": docs.q(best.expected_payment),
            "search": {k: v for k, v in best.metadata.items()},
        }
        pivots = best.pivots
        if args.oracle:
            try:
                oracle = brute_force_optimal(inst, cap=args.cap, workers=args.workers)
                out["oracle"] = {
                    "revenue": docs.q(oracle.revenue),
                    "rules_examined": oracle.metadata["rules_examined"],
                    "agree": oracle.revenue == best.revenue,
                }
                pivots += oracle.pivots
            except CapExceeded as exc:
                out["oracle"] = {"skipped": str(exc)}
        out["provenance"] = _provenance(pivots, started, args)
        return EXIT_OK, out

    try:
        if inst.types.kind == "uniform":
            best = uniform_optimal_contract(inst)
        elif args.uniform_virtual:
            best = price_virtual_welfare_rule(inst)
            if best is None:
                out = {"command": "solve", "status": "not-implementable",
                       "reason": "the virtual-welfare rule admits no payments for this distribution"}
                return EXIT_REJECTED, out
        else:
            raise _Fail(EXIT_INVALID, "no optimal-contract algorithm for tabulated costs; "
                        "pass --uniform-virtual to price the virtual-welfare rule instead")
    except AssumptionViolated as exc:
        raise _Fail(EXIT_INVALID, str(exc), {"assumption": "top-type-opts-out", "witness": {"i": exc.i}}) from None
    except NotRegular as exc:
        raise _Fail(EXIT_INVALID, str(exc), {"assumption": "regular"}) from None
    out = {"command": "solve", "status": "optimal" if inst.types.kind == "uniform" else "priced",
           **_continuous_summary(best), "search": dict(best.metadata)}
    out["provenance"] = _provenance(best.pivots, started, args)
    return EXIT_OK, out


def cmd_verify_menu(args) -> tuple[int, dict]:
    started = time.perf_counter()
    inst = _load_instance(args.instance)
    if not inst.is_discrete:
        raise _Fail(EXIT_INVALID, "menus are verified on discrete type spaces only")
    try:
        menu = docs.parse_menu(docs.load_json(args.menu))
        report = verify_correlated_menu(inst, menu)
    except (docs.DocumentError, ValueError, IndexError) as exc:
        raise _Fail(EXIT_PARSE, str(exc)) from None
    out = {"command": "verify-menu", "status": "ic" if report.is_ic else "violation", "revenue": docs.q(report.revenue)}
    if report.violation is not None:
        v = report.violation
        detail = {
            "type": docs.q(v.true_type),
            "kind": v.kind,
            "report": docs.q(v.report),
            "deviation_utility": docs.q(v.deviation_utility),
            "compliant_utility": docs.q(v.compliant_utility),
        }
        if v.item is not None:
            detail["item"] = v.item
            detail["action"] = v.action
        out["violation"] = detail
    out["provenance"] = _provenance(0, started, args)
    return (EXIT_OK if report.is_ic else EXIT_REJECTED), out


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------


def _render_text(doc: dict, indent: int = 0) -> str:
    lines = []
    pad = "  " * indent
    for key in sorted(doc):
        value = doc[key]
        if isinstance(value, dict):
            lines.append(f"{pad}{key}:")
            lines.append(_render_text(value, indent + 1))
        elif isinstance(value, list) and value and isinstance(value[0], dict):
            lines.append(f"{pad}{key}:")
            for item in value:
                lines.append(pad + "  - " + ", ".join(f"{k}={item[k]}" for k in sorted(item)))
        elif isinstance(value, list):
            lines.append(f"{pad}{key}: " + " ".join(_flat(v) for v in value))
        else:
            lines.append(f"{pad}{key}: {value}")
    return "\n".join(line for line in lines if line)


def _flat(v) -> str:
    if isinstance(v, list):
        return "(" + ", ".join(_flat(x) for x in v) + ")"
    return str(v)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="contract-forge", description="Optimal contracts with private costs.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="emit machine-readable JSON")
    common.add_argument("--timing", action="store_true", help="include wall time in the provenance block")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common], help="validate an instance document")
    p.add_argument("instance")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("check", parents=[common], help="decide implementability of an allocation rule")
    p.add_argument("instance")
    p.add_argument("allocation")
    p.add_argument("--certificate", metavar="PATH", help="re-verify a deviation plan instead of solving")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("solve", parents=[common], help="compute the optimal contract")
    p.add_argument("instance")
    p.add_argument("--oracle", action="store_true", help="also run the exhaustive search and compare")
    p.add_argument("--uniform-virtual", action="store_true", help="price the virtual-welfare rule on tabulated costs")
    p.add_argument("--cap", type=int, default=None, help="largest allocation count for the exhaustive search")
    p.add_argument("--workers", type=int, default=1, help="processes for pricing candidate rules")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify-menu", parents=[common], help="verify a correlated randomized menu")
    p.add_argument("instance")
    p.add_argument("menu")
    p.set_defaults(func=cmd_verify_menu)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        code, out = args.func(args)
    except _Fail as fail:
        code = fail.code
        out = {"command": args.command, "status": "error", "error": str(fail), **fail.extra}
        if code == EXIT_INVALID:
            out["status"] = "invalid"
    if args.json:
        sys.stdout.write(docs.dumps(out))
    else:
        sys.stdout.write(_render_text(out) + "\n")
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
