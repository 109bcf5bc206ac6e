"""JSON documents: parsing inputs and serializing results.

Numbers are read from strings (``"0.25"``, ``"1/4"``) or JSON numbers and are
written back as canonical ``p/q`` strings (integers without a denominator).
"""
from __future__ import annotations

import json
from fractions import Fraction
from typing import Any, Mapping

from .continuous import ContinuousDeviationPlan, PiecewiseConstantRule
from .discrete import CorrelatedMenu, DeviationPlan, MenuItem
from .model import (
    Instance,
    UniformTypes,
    discrete_types,
    tabulated_types,
    to_rational,
    validate_instance,
)


class DocumentError(ValueError):
    """The document is not well-formed (as opposed to describing an invalid instance)."""


def q(x) -> str:
    return str(Fraction(x))


def _num(value, where: str) -> Fraction:
    if isinstance(value, bool) or not isinstance(value, (str, int, float)):
        raise DocumentError(f"{where}: expected a number, got {value!r}")
    try:
        return to_rational(value)
    except (ValueError, ZeroDivisionError) as exc:
        raise DocumentError(f"{where}: {exc}") from None


def _list(doc, key: str, where: str) -> list:
    value = doc.get(key) if isinstance(doc, Mapping) else None
    if not isinstance(value, list):
        raise DocumentError(f"{where}: missing list {key!r}")
    return value


def load_json(path: str) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise DocumentError(f"{path}: invalid JSON ({exc})") from None
    except OSError as exc:
        raise DocumentError(f"{path}: {exc.strerror}") from None


def dumps(doc: Any) -> str:
    return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


# --------------------------------------------------------------------------
# instances
# --------------------------------------------------------------------------


def parse_instance(doc: Any) -> Instance:
    """Raises DocumentError on shape problems, InstanceViolation on broken assumptions."""
    if not isinstance(doc, Mapping):
        raise DocumentError("instance document must be a JSON object")
    gammas = [_num(v, f"gammas[{i}]") for i, v in enumerate(_list(doc, "gammas", "instance"))]
    rewards = [_num(v, f"rewards[{j}]") for j, v in enumerate(_list(doc, "rewards", "instance"))]
    dist = []
    for i, row in enumerate(_list(doc, "dist", "instance")):
        if not isinstance(row, list):
            raise DocumentError(f"dist[{i}]: expected a list")
        dist.append([_num(v, f"dist[{i}][{j}]") for j, v in enumerate(row)])
    types = doc.get("types")
    if not isinstance(types, Mapping):
        raise DocumentError("instance: missing object 'types'")
    kind = types.get("kind")
    if kind == "discrete":
        support = [_num(v, f"types.support[{k}]") for k, v in enumerate(_list(types, "support", "types"))]
        masses = [_num(v, f"types.masses[{k}]") for k, v in enumerate(_list(types, "masses", "types"))]
        ts = discrete_types(support, masses)
    elif kind == "uniform":
        ts = UniformTypes(_num(types.get("upper"), "types.upper"))
    elif kind == "tabulated":
        grid = [_num(v, f"types.grid[{k}]") for k, v in enumerate(_list(types, "grid", "types"))]
        cdf = [_num(v, f"types.cdf[{k}]") for k, v in enumerate(_list(types, "cdf", "types"))]
        dens = [_num(v, f"types.density[{k}]") for k, v in enumerate(_list(types, "density", "types"))]
        ts = tabulated_types(grid, cdf, dens)
    else:
        raise DocumentError(f"types.kind must be discrete, uniform or tabulated, got {kind!r}")
    return validate_instance(gammas, dist, rewards, ts)


def instance_to_doc(inst: Instance) -> dict:
    ts = inst.types
    if ts.kind == "discrete":
        types = {"kind": "discrete", "support": [q(c) for c in ts.support], "masses": [q(p) for p in ts.masses]}
    elif ts.kind == "uniform":
        types = {"kind": "uniform", "upper": q(ts.upper)}
    else:
        types = {
            "kind": "tabulated",
            "grid": [q(c) for c in ts.grid],
            "cdf": [q(v) for v in ts.cdf_values],
            "density": [q(v) for v in ts.density_values],
        }
    return {
        "gammas": [q(g) for g in inst.gammas],
        "rewards": [q(r) for r in inst.rewards],
        "dist": [[q(p) for p in row] for row in inst.dist],
        "types": types,
    }


# --------------------------------------------------------------------------
# rules
# --------------------------------------------------------------------------


def _action(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise DocumentError(f"{where}: action must be an integer")
    return value


def parse_discrete_allocation(doc: Any) -> dict[Fraction, int]:
    alloc = doc.get("allocation") if isinstance(doc, Mapping) else None
    if not isinstance(alloc, Mapping):
        raise DocumentError("allocation document needs an object 'allocation'")
    return {_num(c, f"allocation key {c!r}"): _action(a, f"allocation[{c}]") for c, a in alloc.items()}


def parse_rule(doc: Any, upper: Fraction) -> PiecewiseConstantRule:
    """Accepts interior breakpoints or the full list from 0 to the top cost."""
    if not isinstance(doc, Mapping):
        raise DocumentError("rule document must be a JSON object")
    if "rule" in doc and isinstance(doc["rule"], Mapping):
        doc = doc["rule"]
    z = [_num(v, f"breakpoints[{i}]") for i, v in enumerate(_list(doc, "breakpoints", "rule"))]
    actions = [_action(a, f"actions[{i}]") for i, a in enumerate(_list(doc, "actions", "rule"))]
    if len(z) == len(actions) + 1:
        if z[0] != 0 or z[-1] != upper:
            raise DocumentError(f"full breakpoint list must run from 0 to {upper}")
        return PiecewiseConstantRule.build(z, actions)
    if len(z) != len(actions) - 1:
        raise DocumentError("need one action per interval")
    return PiecewiseConstantRule.build(z, actions, upper)


def rule_to_doc(rule: PiecewiseConstantRule) -> dict:
    return {"breakpoints": [q(z) for z in rule.breakpoints], "actions": list(rule.actions)}


def allocation_to_doc(alloc: Mapping) -> dict:
    return {q(c): a for c, a in alloc.items()}


def payments_to_doc(payments: Mapping) -> dict:
    return {q(c): [q(t) for t in vec] for c, vec in payments.items()}


# --------------------------------------------------------------------------
# certificates
# --------------------------------------------------------------------------


def plan_to_doc(plan: DeviationPlan) -> dict:
    rows = [
        {"type": q(c), "report": q(r), "action": k, "weight": q(w)}
        for (c, r, k), w in sorted(plan.weights.items())
    ]
    return {"kind": "discrete", "weights": rows}


def continuous_plan_to_doc(plan: ContinuousDeviationPlan) -> dict:
    rows = [
        {"side": side, "index": idx, "report": rep, "action": k, "weight": q(w)}
        for (side, idx, rep, k), w in sorted(plan.weights.items())
    ]
    return {"kind": "continuous", "weights": rows}


def parse_certificate(doc: Any):
    """Accepts a bare certificate or any result document carrying one."""
    if isinstance(doc, Mapping) and isinstance(doc.get("certificate"), Mapping):
        doc = doc["certificate"]
    if not isinstance(doc, Mapping):
        raise DocumentError("certificate must be a JSON object")
    rows = _list(doc, "weights", "certificate")
    kind = doc.get("kind")
    weights = {}
    for n, row in enumerate(rows):
        if not isinstance(row, Mapping):
            raise DocumentError(f"weights[{n}] must be an object")
        w = _num(row.get("weight"), f"weights[{n}].weight")
        if kind == "discrete":
            key = (_num(row.get("type"), f"weights[{n}].type"), _num(row.get("report"), f"weights[{n}].report"),
                   _action(row.get("action"), f"weights[{n}].action"))
        elif kind == "continuous":
            side = row.get("side")
            if side not in ("R", "L"):
                raise DocumentError(f"weights[{n}].side must be R or L")
            key = (side, _action(row.get("index"), f"weights[{n}].index"),
                   _action(row.get("report"), f"weights[{n}].report"), _action(row.get("action"), f"weights[{n}].action"))
        else:
            raise DocumentError(f"certificate kind must be discrete or continuous, got {kind!r}")
        weights[key] = weights.get(key, Fraction(0)) + w
    return DeviationPlan(weights) if kind == "discrete" else ContinuousDeviationPlan(weights)


# --------------------------------------------------------------------------
# menus
# --------------------------------------------------------------------------


def parse_menu(doc: Any) -> CorrelatedMenu:
    menu = doc.get("menu") if isinstance(doc, Mapping) else None
    if not isinstance(menu, Mapping):
        raise DocumentError("menu document needs an object 'menu'")
    entries = {}
    for c, items in menu.items():
        if not isinstance(items, list) or not items:
            raise DocumentError(f"menu[{c}] must be a non-empty list")
        parsed = []
        for n, it in enumerate(items):
            if not isinstance(it, Mapping):
                raise DocumentError(f"menu[{c}][{n}] must be an object")
            pay = it.get("payments")
            if not isinstance(pay, list):
                raise DocumentError(f"menu[{c}][{n}].payments must be a list")
            parsed.append(
                MenuItem(
                    _num(it.get("prob"), f"menu[{c}][{n}].prob"),
                    _action(it.get("action"), f"menu[{c}][{n}].action"),
                    tuple(_num(v, f"menu[{c}][{n}].payments") for v in pay),
                )
            )
        entries[_num(c, f"menu key {c!r}")] = tuple(parsed)
    try:
        return CorrelatedMenu(entries)
    except ValueError as exc:
        raise DocumentError(str(exc)) from None
