"""Discrete type spaces: implementability, certificates and optimal contracts."""
from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Mapping, Optional, Sequence, Union

from .lpsolve import GE, LPBuilder, LinearProgram, Status, feasible, solve
from .model import Contract, Instance, expected_transfer

DEFAULT_CAP = 10**6
CAP_ENV = "CONTRACT_FORGE_CAP"

Allocation = Mapping[Fraction, int]
PlanKey = tuple  # (true type, reported type, action)


class CapExceeded(RuntimeError):
    pass


class NotNormalized(ValueError):
    pass


class NotImplementableError(ValueError):
    def __init__(self, plan: "DeviationPlan"):
        self.plan = plan
        super().__init__("allocation rule is not implementable")


@dataclass(frozen=True)
class DeviationPlan:
    """Weights on (true type, reported type, action) triples.

    Only nonzero weights are stored.
    """

    weights: Mapping[PlanKey, Fraction]

    def weight(self, c, c_report, k) -> Fraction:
        return self.weights.get((c, c_report, k), Fraction(0))

    def mass(self, c) -> Fraction:
        return sum((w for (ct, _, _), w in self.weights.items() if ct == c), Fraction(0))


@dataclass(frozen=True)
class Implementable:
    payments: Mapping[Fraction, tuple[Fraction, ...]]
    pivots: int = 0

    implementable = True


@dataclass(frozen=True)
class NotImplementable:
    plan: DeviationPlan
    farkas: tuple[Fraction, ...] = ()
    pivots: int = 0

    implementable = False


@dataclass(frozen=True)
class PlanCheck:
    valid: bool
    failed: Optional[str]
    deviation_cost: Fraction
    truthful_cost: Fraction

    def __bool__(self) -> bool:
        return self.valid


@dataclass(frozen=True)
class PricedContract:
    contract: Contract
    revenue: Fraction
    expected_payment: Fraction
    pivots: int = 0
    metadata: Mapping[str, object] = field(default_factory=dict)


@dataclass(frozen=True)
class ICViolation:
    true_type: Fraction
    report: Fraction
    action: int
    deviation_utility: Fraction
    truthful_utility: Fraction


@dataclass(frozen=True)
class ICReport:
    violation: Optional[ICViolation] = None

    @property
    def is_ic(self) -> bool:
        return self.violation is None

    def __bool__(self) -> bool:
        return self.is_ic


# --------------------------------------------------------------------------
# helpers
# --------------------------------------------------------------------------


def _require_discrete(inst: Instance) -> None:
    if not inst.is_discrete:
        raise TypeError("operation needs a discrete type space")


def normalize_allocation(inst: Instance, alloc: Union[Allocation, Sequence[int]]) -> dict[Fraction, int]:
    """Return ``alloc`` as a dict keyed by the instance's support, in support order."""
    _require_discrete(inst)
    support = inst.support
    if isinstance(alloc, Mapping):
        keyed = {Fraction(c): int(a) for c, a in alloc.items()}
        if set(keyed) != set(support):
            raise ValueError(f"allocation defined on {sorted(keyed)}, support is {list(support)}")
        out = {c: keyed[c] for c in support}
    else:
        if len(alloc) != len(support):
            raise ValueError("allocation length differs from support size")
        out = dict(zip(support, (int(a) for a in alloc)))
    for c, a in out.items():
        if not 0 <= a <= inst.n:
            raise ValueError(f"type {c} allocated unknown action {a}")
    return out


def _var(ci: int, j: int, m: int) -> int:
    return ci * (m + 1) + j


def _payments_from_point(inst: Instance, point) -> dict[Fraction, tuple[Fraction, ...]]:
    width = inst.m + 1
    return {c: tuple(point[ci * width : (ci + 1) * width]) for ci, c in enumerate(inst.support)}


def _expected_payment_terms(inst: Instance, alloc: dict) -> dict[int, Fraction]:
    terms: dict[int, Fraction] = {}
    for ci, c in enumerate(inst.support):
        p = inst.types.masses[ci]
        row = inst.dist[alloc[c]]
        for j in range(inst.m + 1):
            if row[j] and p:
                terms[_var(ci, j, inst.m)] = terms.get(_var(ci, j, inst.m), Fraction(0)) + p * row[j]
    return terms


# --------------------------------------------------------------------------
# the implementability LP
# --------------------------------------------------------------------------


def build_ic_lp(inst: Instance, alloc: Union[Allocation, Sequence[int]], minimize_payment: bool = False) -> LinearProgram:
    """Payment variables ``t[c][j] >= 0`` and one IC row per (type, report, action).

    Row ``(c, c', k)`` reads ``T^c_{x(c)} - T^{c'}_k >= (γ_{x(c)} - γ_k) c``.
    With ``minimize_payment`` the objective is the expected payment
    ``Σ_c G(c) T^c_{x(c)}``; otherwise it is zero.
    """
    alloc = normalize_allocation(inst, alloc)
    support = inst.support
    m = inst.m
    labels = [(c, j) for c in support for j in range(m + 1)]
    lp = LPBuilder(len(support) * (m + 1), labels)
    for ci, c in enumerate(support):
        own = alloc[c]
        for cpi, c_rep in enumerate(support):
            for k in range(inst.n + 1):
                terms: dict[int, Fraction] = {}
                for j in range(m + 1):
                    if inst.dist[own][j]:
                        key = _var(ci, j, m)
                        terms[key] = terms.get(key, Fraction(0)) + inst.dist[own][j]
                    if inst.dist[k][j]:
                        key = _var(cpi, j, m)
                        terms[key] = terms.get(key, Fraction(0)) - inst.dist[k][j]
                rhs = (inst.gammas[own] - inst.gammas[k]) * c
                lp.add(terms, GE, rhs, label=(c, c_rep, k))
    objective = _expected_payment_terms(inst, alloc) if minimize_payment else None
    return lp.build(objective, "min")


def normalize_plan(inst: Instance, alloc: dict, raw: Mapping[PlanKey, Fraction]) -> DeviationPlan:
    """Rescale dual weights so each true type carries total mass one.

    Every weight is divided by the largest per-type mass ``M``; the truthful
    entry ``(c, c, x(c))`` then absorbs the remaining ``1 - (off-diagonal)/M``.
    Both certificate conditions survive the rescaling.
    """
    totals = {c: Fraction(0) for c in inst.support}
    for (c, _, _), w in raw.items():
        totals[c] += w
    M = max(totals.values())
    if M <= 0:
        raise ValueError("dual certificate carries no weight")
    weights: dict[PlanKey, Fraction] = {}
    for c in inst.support:
        diag = (c, c, alloc[c])
        off = sum((w for key, w in raw.items() if key[0] == c and key != diag), Fraction(0))
        for key, w in raw.items():
            if key[0] == c and key != diag and w:
                weights[key] = w / M
        rest = 1 - off / M
        if rest:
            weights[diag] = rest
    return DeviationPlan(weights)


def check_implementable(inst: Instance, alloc: Union[Allocation, Sequence[int]]) -> Union[Implementable, NotImplementable]:
    alloc = normalize_allocation(inst, alloc)
    lp = build_ic_lp(inst, alloc)
    res = feasible(lp)
    if res.feasible:
        return Implementable(_payments_from_point(inst, res.point), pivots=res.pivots)
    raw = {con.label: y for con, y in zip(lp.constraints, res.farkas) if y}
    return NotImplementable(normalize_plan(inst, alloc, raw), farkas=res.farkas, pivots=res.pivots)


def verify_deviation_plan(inst: Instance, alloc: Union[Allocation, Sequence[int]], plan: DeviationPlan) -> PlanCheck:
    """Check both certificate conditions exactly.

    Raises:
        NotNormalized: a true type's weights do not sum to one, or a weight is negative.
    """
    alloc = normalize_allocation(inst, alloc)
    support = inst.support
    for key, w in plan.weights.items():
        if w < 0:
            raise NotNormalized(f"negative weight on {key}")
        if key[0] not in alloc or key[1] not in alloc or not 0 <= key[2] <= inst.n:
            raise NotNormalized(f"weight on unknown triple {key}")
    for c in support:
        if plan.mass(c) != 1:
            raise NotNormalized(f"weights of true type {c} sum to {plan.mass(c)}")

    truthful = sum((inst.gammas[alloc[c]] * c for c in support), Fraction(0))
    deviation = sum((w * inst.gammas[k] * c for (c, _, k), w in plan.weights.items()), Fraction(0))

    for c in support:
        target = inst.dist[alloc[c]]
        for j in range(inst.m + 1):
            produced = sum(
                (w * inst.dist[k][j] for (_, rep, k), w in plan.weights.items() if rep == c),
                Fraction(0),
            )
            if produced < target[j]:
                return PlanCheck(False, "weakly dominant distributions", deviation, truthful)
    if not deviation < truthful:
        return PlanCheck(False, "strictly lower joint cost", deviation, truthful)
    return PlanCheck(True, None, deviation, truthful)


def monotonicity_swap_plan(inst: Instance, alloc: Union[Allocation, Sequence[int]], low, high) -> DeviationPlan:
    """Plan in which types ``low`` and ``high`` trade reports and actions."""
    alloc = normalize_allocation(inst, alloc)
    low, high = Fraction(low), Fraction(high)
    weights = {(c, c, alloc[c]): Fraction(1) for c in inst.support if c not in (low, high)}
    weights[(low, high, alloc[high])] = Fraction(1)
    weights[(high, low, alloc[low])] = Fraction(1)
    return DeviationPlan(weights)


# --------------------------------------------------------------------------
# payments and revenue
# --------------------------------------------------------------------------


def revenue_of(inst: Instance, alloc: dict, payments: Mapping) -> tuple[Fraction, Fraction]:
    """Expected (revenue, payment) of a deterministic contract."""
    pay = Fraction(0)
    rew = Fraction(0)
    for c, p in zip(inst.support, inst.types.masses):
        a = alloc[c]
        pay += p * expected_transfer(inst, payments[c], a)
        rew += p * inst.expected_rewards[a]
    return rew - pay, pay


def min_payment_contract(inst: Instance, alloc: Union[Allocation, Sequence[int]]) -> PricedContract:
    """Cheapest IC payments for ``alloc``.

    Raises:
        NotImplementableError: carrying a normalized deviation plan.
    """
    alloc = normalize_allocation(inst, alloc)
    out = solve(build_ic_lp(inst, alloc, minimize_payment=True))
    if out.status is Status.INFEASIBLE:
        verdict = check_implementable(inst, alloc)
        raise NotImplementableError(verdict.plan)
    payments = _payments_from_point(inst, out.primal)
    revenue, pay = revenue_of(inst, alloc, payments)
    return PricedContract(Contract(alloc, payments), revenue, pay, pivots=out.pivots)


def _priced_or_none(args) -> Optional[PricedContract]:
    inst, rule = args
    out = solve(build_ic_lp(inst, rule, minimize_payment=True))
    if out.status is not Status.OPTIMAL:
        return None
    alloc = normalize_allocation(inst, rule)
    payments = _payments_from_point(inst, out.primal)
    revenue, pay = revenue_of(inst, alloc, payments)
    return PricedContract(Contract(alloc, payments), revenue, pay, pivots=out.pivots)


def _best(inst: Instance, rules: Sequence[tuple[int, ...]], workers: int) -> tuple[PricedContract, int, int]:
    jobs = [(inst, r) for r in rules]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_priced_or_none, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        results = [_priced_or_none(j) for j in jobs]
    best = None
    implementable = 0
    pivots = 0
    for res in results:
        if res is None:
            continue
        implementable += 1
        pivots += res.pivots
        if best is None or res.revenue > best.revenue:
            best = res
    assert best is not None, "the zero allocation is always implementable"
    return best, implementable, pivots


# --------------------------------------------------------------------------
# monotonicity and search
# --------------------------------------------------------------------------


def is_monotone(alloc: Union[Allocation, Sequence[int]], inst: Optional[Instance] = None) -> bool:
    """Lower costs never receive lower actions.

    Mappings are read in increasing order of type; sequences are taken as
    already ordered.  When ``inst`` is given the comparison is on effort
    levels ``γ`` instead of action indices, which only matters when several
    actions share an effort level.
    """
    if isinstance(alloc, Mapping):
        actions = [alloc[c] for c in sorted(alloc)]
    else:
        actions = list(alloc)
    level = (lambda a: inst.gammas[a]) if inst is not None else (lambda a: a)
    return all(level(a) >= level(b) for a, b in zip(actions, actions[1:]))


def enumerate_monotone(inst: Instance) -> Iterator[tuple[int, ...]]:
    """Every index-monotone allocation once, as tuples aligned with the support.

    Yields ``binomial(|C| + n, |C|)`` rules: a monotone rule is determined by
    the multiset of actions it uses.
    """
    _require_discrete(inst)
    yield from itertools.combinations_with_replacement(range(inst.n, -1, -1), len(inst.support))


def enumerate_effort_monotone(inst: Instance) -> Iterator[tuple[int, ...]]:
    """Allocations whose effort level is non-increasing in cost.

    Identical to :func:`enumerate_monotone` when effort levels are distinct;
    with tied levels every action inside a level is tried.
    """
    _require_discrete(inst)
    levels: dict[Fraction, list[int]] = {}
    for a in range(inst.n, -1, -1):
        levels.setdefault(inst.gammas[a], []).append(a)
    ordered = sorted(levels, reverse=True)
    for combo in itertools.combinations_with_replacement(ordered, len(inst.support)):
        yield from itertools.product(*(levels[g] for g in combo))


def monotone_count(num_types: int, n: int) -> int:
    return math.comb(num_types + n, num_types)


def optimal_contract(inst: Instance, workers: int = 1) -> PricedContract:
    """Revenue-optimal contract by pricing every monotone allocation.

    Non-monotone rules are never implementable (a swap of the two offending
    types always certifies it), so the search is exhaustive over the rules that
    matter.  Ties keep the first rule in enumeration order.
    """
    _require_discrete(inst)
    tied = len(set(inst.gammas)) != len(inst.gammas)
    rules = list(enumerate_effort_monotone(inst) if tied else enumerate_monotone(inst))
    best, implementable, pivots = _best(inst, rules, workers)
    meta = {
        "search": "effort-monotone" if tied else "monotone",
        "rules_examined": len(rules),
        "rules_implementable": implementable,
        "justification": "implementable rules are monotone: a non-monotone pair of types admits a cost-lowering swap certificate",
    }
    return PricedContract(best.contract, best.revenue, best.expected_payment, pivots=pivots, metadata=meta)


def resolve_cap(cap: Optional[int] = None) -> int:
    if cap is not None:
        return int(cap)
    env = os.environ.get(CAP_ENV)
    return int(env) if env else DEFAULT_CAP


def brute_force_optimal(inst: Instance, cap: Optional[int] = None, workers: int = 1) -> PricedContract:
    """Oracle: price all ``(n+1)^|C|`` allocations, monotone or not."""
    _require_discrete(inst)
    limit = resolve_cap(cap)
    total = (inst.n + 1) ** len(inst.support)
    if total > limit:
        raise CapExceeded(f"{total} allocations exceed the cap of {limit}")
    rules = list(itertools.product(range(inst.n, -1, -1), repeat=len(inst.support)))
    best, implementable, pivots = _best(inst, rules, workers)
    meta = {"search": "exhaustive", "rules_examined": len(rules), "rules_implementable": implementable}
    return PricedContract(best.contract, best.revenue, best.expected_payment, pivots=pivots, metadata=meta)


# --------------------------------------------------------------------------
# direct IC verification
# --------------------------------------------------------------------------


def ic_check(inst: Instance, contract: Contract) -> ICReport:
    """Enumerate every (report, action) pair for every true type.

    The prescribed pair only has to be among the maximizers; ties are fine.
    The reported violation is the best deviation of the first violating type.
    """
    _require_discrete(inst)
    alloc = normalize_allocation(inst, contract.allocation)
    pay = contract.payments
    support = inst.support
    T = {c: [expected_transfer(inst, pay[c], k) for k in range(inst.n + 1)] for c in support}
    for c in support:
        own = T[c][alloc[c]] - inst.gammas[alloc[c]] * c
        best = None
        for c_rep in support:
            for k in range(inst.n + 1):
                u = T[c_rep][k] - inst.gammas[k] * c
                if best is None or u > best[0]:
                    best = (u, c_rep, k)
        if best[0] > own:
            return ICReport(ICViolation(c, best[1], best[2], best[0], own))
    return ICReport()


# --------------------------------------------------------------------------
# correlated randomized menus
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MenuItem:
    prob: Fraction
    action: int
    payments: tuple[Fraction, ...]


@dataclass(frozen=True)
class CorrelatedMenu:
    entries: Mapping[Fraction, tuple[MenuItem, ...]]

    def __post_init__(self):
        for c, items in self.entries.items():
            if any(it.prob < 0 for it in items) or sum(it.prob for it in items) != 1:
                raise ValueError(f"menu lottery for type {c} is not a distribution")
            for it in items:
                if any(t < 0 for t in it.payments):
                    raise ValueError(f"negative payment in menu of type {c}")


@dataclass(frozen=True)
class MenuViolation:
    true_type: Fraction
    kind: str  # "obedience" or "report"
    report: Fraction
    item: Optional[int]
    action: Optional[int]
    deviation_utility: Fraction
    compliant_utility: Fraction


@dataclass(frozen=True)
class MenuReport:
    revenue: Fraction
    violation: Optional[MenuViolation] = None

    @property
    def is_ic(self) -> bool:
        return self.violation is None

    def __bool__(self) -> bool:
        return self.is_ic


def menu_from_contract(contract: Contract) -> CorrelatedMenu:
    return CorrelatedMenu(
        {c: (MenuItem(Fraction(1), a, tuple(contract.payments[c])),) for c, a in contract.allocation.items()}
    )


def verify_correlated_menu(inst: Instance, menu: CorrelatedMenu) -> MenuReport:
    """IC check for lotteries over (recommended action, payment vector) pairs.

    A compliant agent reports truthfully and follows every realized
    recommendation.  Deviations are a misreport followed by a best response to
    each realized payment vector, or disobedience after truthful reporting.
    """
    _require_discrete(inst)
    support = inst.support
    if set(Fraction(c) for c in menu.entries) != set(support):
        raise ValueError("menu must list every type of the support")
    entries = {Fraction(c): items for c, items in menu.entries.items()}

    def utilities(t, c):
        return [expected_transfer(inst, t, k) - inst.gammas[k] * c for k in range(inst.n + 1)]

    revenue = Fraction(0)
    for c, mass in zip(support, inst.types.masses):
        for it in entries[c]:
            revenue += mass * it.prob * (inst.expected_rewards[it.action] - expected_transfer(inst, it.payments, it.action))

    for c in support:
        compliant = Fraction(0)
        for idx, it in enumerate(entries[c]):
            u = utilities(it.payments, c)
            follow = u[it.action]
            compliant += it.prob * follow
            if it.prob > 0:
                best_k = max(range(inst.n + 1), key=lambda k: (u[k], -k))
                if u[best_k] > follow:
                    return MenuReport(revenue, MenuViolation(c, "obedience", c, idx, best_k, u[best_k], follow))
        for c_rep in support:
            if c_rep == c:
                continue
            dev = sum((it.prob * max(utilities(it.payments, c)) for it in entries[c_rep]), Fraction(0))
            if dev > compliant:
                return MenuReport(revenue, MenuViolation(c, "report", c_rep, None, None, dev, compliant))
    return MenuReport(revenue)
