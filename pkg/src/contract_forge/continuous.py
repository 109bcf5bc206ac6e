"""Continuous type spaces.

Piecewise-constant allocation rules, their implementability LP, virtual costs,
the virtual-welfare rule and the uniform-cost optimal contract.
"""
from __future__ import annotations

import bisect
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Mapping, Optional, Sequence

from .discrete import NotNormalized, PlanCheck, build_ic_lp
from .lpsolve import EQ, GE, Constraint, LinearProgram, LPBuilder, Status, feasible, solve
from .model import (
    DiscreteTypes,
    Instance,
    TabulatedTypes,
    TypeSpace,
    UniformTypes,
    ZeroDensity,
    expected_transfer,
)


class NotPiecewiseMonotone(ValueError):
    pass


class NotRegular(ValueError):
    pass


class NoDmr(ValueError):
    pass


class AssumptionViolated(ValueError):
    def __init__(self, i: int, gamma_cbar: Fraction, reward: Fraction):
        self.i = i
        super().__init__(f"action {i}: γ·c̄ = {gamma_cbar} does not exceed R = {reward}")


class IdentityViolated(ValueError):
    def __init__(self, i: int, lhs: Fraction, rhs: Fraction):
        self.i, self.lhs, self.rhs = i, lhs, rhs
        super().__init__(f"payment jump at breakpoint {i}: {lhs} != {rhs}")


# --------------------------------------------------------------------------
# rules
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PiecewiseConstantRule:
    """``actions[i]`` is allocated on ``[breakpoints[i], breakpoints[i+1])``.

    ``breakpoints`` runs from 0 to the top cost ``c̄``; the top cost itself gets
    the last action.  Construction rejects rules whose actions increase.
    """

    breakpoints: tuple[Fraction, ...]
    actions: tuple[int, ...]

    def __post_init__(self):
        z, a = self.breakpoints, self.actions
        if len(z) < 2 or len(a) != len(z) - 1:
            raise NotPiecewiseMonotone(f"{len(z)} breakpoints need {len(z) - 1} actions, got {len(a)}")
        if z[0] != 0:
            raise NotPiecewiseMonotone("first breakpoint must be 0")
        for i in range(len(z) - 1):
            if not z[i] < z[i + 1]:
                raise NotPiecewiseMonotone(f"breakpoints not strictly increasing at index {i + 1}")
        for i in range(len(a) - 1):
            if a[i] < a[i + 1]:
                raise NotPiecewiseMonotone(f"action rises from {a[i]} to {a[i + 1]} at breakpoint {z[i + 1]}")
        if any(x < 0 for x in a):
            raise NotPiecewiseMonotone("negative action index")

    @classmethod
    def build(cls, breakpoints: Sequence, actions: Sequence[int], upper=None) -> "PiecewiseConstantRule":
        """Accept either interior breakpoints (with ``upper``) or the full list."""
        z = [Fraction(v) for v in breakpoints]
        actions = [int(x) for x in actions]
        if len(z) == len(actions) - 1:
            if upper is None:
                raise NotPiecewiseMonotone("interior breakpoints need the top cost")
            z = [Fraction(0)] + z + [Fraction(upper)]
        return cls(tuple(z), tuple(actions))

    @property
    def ell(self) -> int:
        return len(self.actions) - 1

    @property
    def upper(self) -> Fraction:
        return self.breakpoints[-1]

    @property
    def interior(self) -> tuple[Fraction, ...]:
        return self.breakpoints[1:-1]

    def merged(self) -> "PiecewiseConstantRule":
        z = [self.breakpoints[0]]
        a = [self.actions[0]]
        for zi, ai in zip(self.breakpoints[1:-1], self.actions[1:]):
            if ai != a[-1]:
                z.append(zi)
                a.append(ai)
        z.append(self.upper)
        return PiecewiseConstantRule(tuple(z), tuple(a))

    def interval_of(self, c) -> int:
        c = Fraction(c)
        if not 0 <= c <= self.upper:
            raise ValueError(f"cost {c} outside [0, {self.upper}]")
        return min(bisect.bisect_right(self.breakpoints, c) - 1, self.ell)

    def __call__(self, c) -> int:
        return self.actions[self.interval_of(c)]


def constant_rule(action: int, upper) -> PiecewiseConstantRule:
    return PiecewiseConstantRule((Fraction(0), Fraction(upper)), (action,))


def _upper(ts: TypeSpace) -> Fraction:
    if isinstance(ts, (UniformTypes, TabulatedTypes)):
        return ts.upper
    raise TypeError("operation needs a continuous type space")


def _prepare(inst: Instance, rule: PiecewiseConstantRule) -> PiecewiseConstantRule:
    upper = _upper(inst.types)
    if not isinstance(rule, PiecewiseConstantRule):
        raise NotPiecewiseMonotone("rule must be a PiecewiseConstantRule")
    if rule.upper != upper:
        raise ValueError(f"rule ends at {rule.upper}, type space ends at {upper}")
    if any(a > inst.n for a in rule.actions):
        raise ValueError("rule uses an action the instance does not have")
    return rule.merged()


# --------------------------------------------------------------------------
# implementability LP
# --------------------------------------------------------------------------
#
# Vector t^{z_i} (i = 0..ℓ) serves types in [z_i, z_{i+1}); the top cost reuses
# t^{z_ℓ}.  Every vector is checked against two pseudo-types: the right one at
# cost z_i and the left one at cost z_{i+1}, both prescribed (i, a_i).  The
# left copy at z_{i+1} makes z_{i+1} indifferent across the jump; for i = ℓ it
# is the IC constraint of the top cost.


def _cvar(i: int, j: int, m: int) -> int:
    return i * (m + 1) + j


def build_lp2(
    inst: Instance,
    rule: PiecewiseConstantRule,
    pin_zero_outcome: bool = False,
    minimize_payment: bool = False,
) -> LinearProgram:
    """Rows labelled ``("R", i, i', k)`` at cost ``z_i`` and ``("L", i+1, i', k)`` at cost ``z_{i+1}``.

    Both families have ``(ℓ+1)^2 (n+1)`` rows; pins are labelled ``("pin", i)``.
    """
    rule = _prepare(inst, rule)
    z, a, m, ell = rule.breakpoints, rule.actions, inst.m, rule.ell
    labels = [(i, j) for i in range(ell + 1) for j in range(m + 1)]
    lp = LPBuilder((ell + 1) * (m + 1), labels)

    def add_family(side: str, shift: int):
        for i in range(ell + 1):
            cost = z[i + shift]
            own = a[i]
            for i_rep in range(ell + 1):
                for k in range(inst.n + 1):
                    terms: dict[int, Fraction] = {}
                    for j in range(m + 1):
                        if inst.dist[own][j]:
                            key = _cvar(i, j, m)
                            terms[key] = terms.get(key, Fraction(0)) + inst.dist[own][j]
                        if inst.dist[k][j]:
                            key = _cvar(i_rep, j, m)
                            terms[key] = terms.get(key, Fraction(0)) - inst.dist[k][j]
                    lp.add(terms, GE, (inst.gammas[own] - inst.gammas[k]) * cost, label=(side, i + shift, i_rep, k))

    add_family("R", 0)
    add_family("L", 1)
    if pin_zero_outcome:
        for i in range(ell + 1):
            lp.add({_cvar(i, 0, m): Fraction(1)}, EQ, 0, label=("pin", i))
    objective = None
    if minimize_payment:
        objective = {}
        for i in range(ell + 1):
            mass = inst.types.cdf(z[i + 1]) - inst.types.cdf(z[i])
            for j in range(m + 1):
                if inst.dist[a[i]][j] and mass:
                    objective[_cvar(i, j, m)] = mass * inst.dist[a[i]][j]
    return lp.build(objective, "min")


@dataclass(frozen=True)
class ContinuousDeviationPlan:
    """Weights keyed ``("R", i, i', k)`` and ``("L", i+1, i', k)``; zeros omitted."""

    weights: Mapping[tuple, Fraction]

    def weight(self, key) -> Fraction:
        return self.weights.get(key, Fraction(0))

    def group_mass(self, side: str, index: int) -> Fraction:
        return sum((w for key, w in self.weights.items() if key[0] == side and key[1] == index), Fraction(0))


@dataclass(frozen=True)
class ContinuousImplementable:
    rule: PiecewiseConstantRule
    payments: tuple[tuple[Fraction, ...], ...]
    pivots: int = 0

    implementable = True

    def payment_for(self, c) -> tuple[Fraction, ...]:
        """Payment vector offered to cost ``c``: constant on each interval."""
        return self.payments[self.rule.interval_of(c)]


@dataclass(frozen=True)
class ContinuousNotImplementable:
    rule: PiecewiseConstantRule
    plan: ContinuousDeviationPlan
    farkas: tuple[Fraction, ...] = ()
    pivots: int = 0

    implementable = False


def _split(point, ell: int, m: int) -> tuple[tuple[Fraction, ...], ...]:
    return tuple(tuple(point[i * (m + 1) : (i + 1) * (m + 1)]) for i in range(ell + 1))


def normalize_continuous_plan(rule: PiecewiseConstantRule, raw: Mapping[tuple, Fraction]) -> ContinuousDeviationPlan:
    """Scale by the largest group mass and top up every truthful entry.

    Groups are ``("R", i)`` and ``("L", i+1)``; the truthful entries are
    ``("R", i, i, a_i)`` and ``("L", i+1, i, a_i)``.
    """
    ell, a = rule.ell, rule.actions
    groups = [("R", i, i) for i in range(ell + 1)] + [("L", i + 1, i) for i in range(ell + 1)]
    masses = {}
    for side, idx, _ in groups:
        masses[(side, idx)] = sum((w for key, w in raw.items() if key[0] == side and key[1] == idx), Fraction(0))
    M = max(masses.values())
    if M <= 0:
        raise ValueError("dual certificate carries no weight")
    weights = {}
    for side, idx, own in groups:
        diag = (side, idx, own, a[own])
        off = Fraction(0)
        for key, w in raw.items():
            if key[0] == side and key[1] == idx and key != diag and w:
                weights[key] = w / M
                off += w
        rest = 1 - off / M
        if rest:
            weights[diag] = rest
    return ContinuousDeviationPlan(weights)


def check_implementable_cont(inst: Instance, rule: PiecewiseConstantRule):
    rule = _prepare(inst, rule)
    lp = build_lp2(inst, rule)
    res = feasible(lp)
    if res.feasible:
        return ContinuousImplementable(rule, _split(res.point, rule.ell, inst.m), pivots=res.pivots)
    raw = {con.label: y for con, y in zip(lp.constraints, res.farkas) if y}
    return ContinuousNotImplementable(rule, normalize_continuous_plan(rule, raw), res.farkas, res.pivots)


def verify_continuous_plan(inst: Instance, rule: PiecewiseConstantRule, plan: ContinuousDeviationPlan) -> PlanCheck:
    """Exact check of both certificate conditions for a normalized R/L plan."""
    rule = _prepare(inst, rule)
    z, a, ell = rule.breakpoints, rule.actions, rule.ell
    for key, w in plan.weights.items():
        side, idx, rep, k = key
        if w < 0:
            raise NotNormalized(f"negative weight on {key}")
        valid_idx = range(ell + 1) if side == "R" else range(1, ell + 2)
        if side not in ("R", "L") or idx not in valid_idx or not 0 <= rep <= ell or not 0 <= k <= inst.n:
            raise NotNormalized(f"weight on unknown key {key}")
    for i in range(ell + 1):
        for side, idx in (("R", i), ("L", i + 1)):
            if plan.group_mass(side, idx) != 1:
                raise NotNormalized(f"group {side}{idx} sums to {plan.group_mass(side, idx)}")

    truthful = sum((inst.gammas[a[i]] * (z[i] + z[i + 1]) for i in range(ell + 1)), Fraction(0))
    deviation = Fraction(0)
    for (side, idx, _, k), w in plan.weights.items():
        deviation += w * inst.gammas[k] * z[idx]
    for i in range(ell + 1):
        for j in range(inst.m + 1):
            produced = sum(
                (w * inst.dist[k][j] for (_, _, rep, k), w in plan.weights.items() if rep == i),
                Fraction(0),
            )
            if produced < 2 * inst.dist[a[i]][j]:
                return PlanCheck(False, "weakly dominant distributions", deviation, truthful)
    if not deviation < truthful:
        return PlanCheck(False, "strictly lower joint cost", deviation, truthful)
    return PlanCheck(True, None, deviation, truthful)


def breakpoint_lp(inst: Instance, rule: PiecewiseConstantRule) -> LinearProgram:
    """The discretized formulation: IC on the breakpoint types plus the jump equalities.

    Types are ``z_0 .. z_{ℓ+1}`` (the top cost with its own payment vector and
    the last action); for ``1 <= i <= ℓ`` the rows labelled ``("jump", i)`` ask
    ``T^{z_i}_{a_i} - γ_{a_i} z_i = T^{z_{i-1}}_{a_{i-1}} - γ_{a_{i-1}} z_i``.
    Feasibility of this LP and of :func:`build_lp2` must agree.
    """
    rule = _prepare(inst, rule)
    z, a, m, ell = rule.breakpoints, rule.actions, inst.m, rule.ell
    k = len(z)
    types = DiscreteTypes(tuple(z), tuple(Fraction(1, k) for _ in z))
    disc = Instance(inst.gammas, inst.dist, inst.rewards, types)
    base = build_ic_lp(disc, list(a) + [a[-1]])
    extra = []
    for i in range(1, ell + 1):
        row = [Fraction(0)] * base.num_vars
        for j in range(m + 1):
            row[_cvar(i, j, m)] += inst.dist[a[i]][j]
            row[_cvar(i - 1, j, m)] -= inst.dist[a[i - 1]][j]
        rhs = (inst.gammas[a[i]] - inst.gammas[a[i - 1]]) * z[i]
        extra.append(Constraint(tuple(row), EQ, rhs, ("jump", i)))
    return replace(base, constraints=base.constraints + tuple(extra))


# --------------------------------------------------------------------------
# payments, welfare and revenue
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ContinuousContract:
    rule: PiecewiseConstantRule
    payments: tuple[tuple[Fraction, ...], ...]
    revenue: Fraction
    expected_payment: Fraction
    virtual_welfare: Fraction
    top_utility: Fraction
    pivots: int = 0
    metadata: Mapping[str, object] = field(default_factory=dict)


def _masses(inst: Instance, rule: PiecewiseConstantRule) -> list[Fraction]:
    G = inst.types.cdf
    z = rule.breakpoints
    return [G(z[i + 1]) - G(z[i]) for i in range(rule.ell + 1)]


def expected_virtual_welfare(inst: Instance, rule: PiecewiseConstantRule) -> Fraction:
    """Closed form, using that ``c G(c)`` is an antiderivative of ``φ g``."""
    rule = _prepare(inst, rule)
    G = inst.types.cdf
    z, a = rule.breakpoints, rule.actions
    total = Fraction(0)
    for i in range(rule.ell + 1):
        lo, hi = z[i], z[i + 1]
        total += inst.expected_rewards[a[i]] * (G(hi) - G(lo))
        total -= inst.gammas[a[i]] * (G(hi) * hi - G(lo) * lo)
    return total


def top_type_utility(inst: Instance, rule: PiecewiseConstantRule, payments) -> Fraction:
    rule = _prepare(inst, rule)
    top = rule.actions[-1]
    return expected_transfer(inst, payments[-1], top) - inst.gammas[top] * rule.upper


def expected_revenue_cont(inst: Instance, rule: PiecewiseConstantRule, payments) -> Fraction:
    """Revenue computed from the payments themselves, interval by interval."""
    rule = _prepare(inst, rule)
    if len(payments) != rule.ell + 1:
        raise ValueError(f"need {rule.ell + 1} payment vectors, got {len(payments)}")
    total = Fraction(0)
    for mass, a, t in zip(_masses(inst, rule), rule.actions, payments):
        total += mass * (inst.expected_rewards[a] - expected_transfer(inst, t, a))
    return total


def expected_payment_from_top(inst: Instance, rule: PiecewiseConstantRule, payments, c) -> Fraction:
    """``T^c_{x(c)}`` rebuilt from the top cost's expected payment and the allocation alone."""
    rule = _prepare(inst, rule)
    z, a = rule.breakpoints, rule.actions
    c = Fraction(c)
    value = expected_transfer(inst, payments[-1], a[-1])
    for i in range(1, rule.ell + 1):
        if z[i] > c:
            value += z[i] * (inst.gammas[a[i - 1]] - inst.gammas[a[i]])
    return value


def payment_identity(inst: Instance, rule: PiecewiseConstantRule, payments) -> tuple[Fraction, ...]:
    """Check every payment jump; return the expected payment on each interval.

    Raises:
        IdentityViolated: first breakpoint whose jump is off.
    """
    rule = _prepare(inst, rule)
    if len(payments) != rule.ell + 1:
        raise ValueError(f"need {rule.ell + 1} payment vectors, got {len(payments)}")
    z, a = rule.breakpoints, rule.actions
    T = [expected_transfer(inst, t, ai) for t, ai in zip(payments, a)]
    for i in range(rule.ell):
        lhs = T[i] - T[i + 1]
        rhs = z[i + 1] * (inst.gammas[a[i]] - inst.gammas[a[i + 1]])
        if lhs != rhs:
            raise IdentityViolated(i + 1, lhs, rhs)
    for i in range(rule.ell + 1):
        rebuilt = expected_payment_from_top(inst, rule, payments, z[i])
        if rebuilt != T[i]:
            raise IdentityViolated(i, T[i], rebuilt)
    return tuple(T)


def min_payment_contract_cont(
    inst: Instance, rule: PiecewiseConstantRule, pin_zero_outcome: bool = False
) -> Optional[ContinuousContract]:
    """Cheapest payments implementing ``rule``; ``None`` when there are none."""
    rule = _prepare(inst, rule)
    out = solve(build_lp2(inst, rule, pin_zero_outcome=pin_zero_outcome, minimize_payment=True))
    if out.status is not Status.OPTIMAL:
        return None
    payments = _split(out.primal, rule.ell, inst.m)
    revenue = expected_revenue_cont(inst, rule, payments)
    return ContinuousContract(
        rule=rule,
        payments=payments,
        revenue=revenue,
        expected_payment=out.objective,
        virtual_welfare=expected_virtual_welfare(inst, rule),
        top_utility=top_type_utility(inst, rule, payments),
        pivots=out.pivots,
    )


# --------------------------------------------------------------------------
# virtual costs
# --------------------------------------------------------------------------


def virtual_cost(ts: TypeSpace, c) -> Fraction:
    if isinstance(ts, (UniformTypes, TabulatedTypes)):
        return ts.virtual_cost(Fraction(c))
    raise TypeError("virtual costs need a continuous type space")


def _cell_line(ts: TabulatedTypes, k: int) -> tuple[Fraction, Fraction]:
    """``φ(c) = slope * c + offset`` on cell ``[grid[k], grid[k+1])``."""
    lo, hi = ts.grid[k], ts.grid[k + 1]
    s = (ts.cdf_values[k + 1] - ts.cdf_values[k]) / (hi - lo)
    g = ts.density_values[k]
    if g <= 0:
        raise ZeroDensity(f"density vanishes on cell {k}")
    return 1 + s / g, (ts.cdf_values[k] - s * lo) / g


def is_regular(ts: TypeSpace) -> bool:
    """Is the virtual cost nondecreasing on ``[0, c̄]``?

    Within a tabulated cell φ is linear with positive slope, so only the knots
    (including the top cost, which uses the last density entry) can break it.
    """
    if isinstance(ts, UniformTypes):
        return True
    if not isinstance(ts, TabulatedTypes):
        raise TypeError("regularity needs a continuous type space")
    cells = len(ts.grid) - 1
    for k in range(cells):
        slope, offset = _cell_line(ts, k)
        left_limit = slope * ts.grid[k + 1] + offset
        if left_limit > ts.virtual_cost(ts.grid[k + 1]):
            return False
    return True


def inverse_virtual_cost(ts: TypeSpace, p) -> Fraction:
    """Smallest cost whose virtual cost reaches ``p``, clamped to ``[0, c̄]``.

    Exact on both supported type spaces: uniform inverts ``2c``; tabulated φ
    is linear on every cell, so locating the cell by bisection over the knots
    leaves a single linear equation.
    """
    p = Fraction(p)
    if isinstance(ts, UniformTypes):
        return min(max(p / 2, Fraction(0)), ts.upper)
    if not isinstance(ts, TabulatedTypes):
        raise TypeError("virtual costs need a continuous type space")
    if p <= ts.virtual_cost(Fraction(0)):
        return Fraction(0)
    cells = len(ts.grid) - 1
    # right-limit values at each knot; nondecreasing on a regular tabulation
    starts = [_cell_line(ts, k)[0] * ts.grid[k] + _cell_line(ts, k)[1] for k in range(cells)]
    k = max(bisect.bisect_left(starts, p) - 1, 0)
    slope, offset = _cell_line(ts, k)
    c = (p - offset) / slope
    return min(max(c, ts.grid[k]), ts.grid[k + 1])


def _phi_range(ts: TypeSpace) -> tuple[Fraction, Fraction]:
    if isinstance(ts, UniformTypes):
        return Fraction(0), 2 * ts.upper
    slope, offset = _cell_line(ts, len(ts.grid) - 2)
    return ts.virtual_cost(Fraction(0)), slope * ts.upper + offset


def virtual_welfare_rule(inst: Instance) -> PiecewiseConstantRule:
    """Pointwise maximizer of ``R_i - φ(c) γ_i``.

    Works on the upper envelope of the lines ``p -> R_i - p γ_i`` over the
    range of φ, then maps the envelope's kinks back to costs.  Where two
    actions tie, the breakpoint starts the lower-effort interval.
    """
    ts = inst.types
    upper = _upper(ts)
    if not is_regular(ts):
        raise NotRegular("virtual cost decreases somewhere; the maximizer need not be monotone")
    p_lo, p_hi = _phi_range(ts)
    R, gam = inst.expected_rewards, inst.gammas

    def value(i, p):
        return R[i] - p * gam[i]

    # maximizer just to the right of p_lo: best value, then smallest effort
    first = cur = max(range(inst.n + 1), key=lambda i: (value(i, p_lo), -gam[i], i))
    kinks: list[tuple[Fraction, int]] = []
    p = p_lo
    while True:
        best = None
        for b in range(inst.n + 1):
            if gam[b] < gam[cur]:
                cross = (R[cur] - R[b]) / (gam[cur] - gam[b])
                if cross >= p and (best is None or (cross, gam[b], -R[b]) < (best[0], gam[best[1]], -R[best[1]])):
                    best = (cross, b)
        if best is None or best[0] >= p_hi:
            break
        p, cur = best
        kinks.append((p, cur))

    z = [Fraction(0)]
    actions = [first]
    for p_k, a in kinks:
        c = inverse_virtual_cost(ts, p_k)
        if c >= upper:
            break
        if c == z[-1]:
            actions[-1] = a  # empty interval
            continue
        z.append(c)
        actions.append(a)
    z.append(upper)
    return PiecewiseConstantRule(tuple(z), tuple(actions)).merged()


# --------------------------------------------------------------------------
# the uniform-cost optimal contract
# --------------------------------------------------------------------------


def check_top_type_opts_out(inst: Instance) -> None:
    upper = _upper(inst.types)
    for i in range(1, inst.n + 1):
        if not inst.gammas[i] * upper > inst.expected_rewards[i]:
            raise AssumptionViolated(i, inst.gammas[i] * upper, inst.expected_rewards[i])


def uniform_optimal_contract(inst: Instance) -> ContinuousContract:
    """Virtual-welfare rule with zero payment on the first outcome.

    Raises:
        AssumptionViolated: some effortful action has ``γ_i c̄ <= R_i``.
        RuntimeError: the pinned LP is infeasible (never expected under the guard).
    """
    if not isinstance(inst.types, UniformTypes):
        raise TypeError("uniform_optimal_contract needs uniform costs")
    check_top_type_opts_out(inst)
    rule = virtual_welfare_rule(inst)
    priced = min_payment_contract_cont(inst, rule, pin_zero_outcome=True)
    if priced is None:
        raise RuntimeError("virtual-welfare rule has no pinned implementation")
    meta = {"rule": "virtual-welfare", "pinned_zero_outcome": True}
    return replace(priced, metadata=meta)


def price_virtual_welfare_rule(inst: Instance) -> Optional[ContinuousContract]:
    """Min-payment pricing of the virtual-welfare rule for any regular type space.

    No optimality claim is attached outside the uniform case.
    """
    rule = virtual_welfare_rule(inst)
    priced = min_payment_contract_cont(inst, rule)
    if priced is None:
        return None
    return replace(priced, metadata={"rule": "virtual-welfare", "optimality": "unproven"})


# --------------------------------------------------------------------------
# diminishing marginal returns
# --------------------------------------------------------------------------


def marginal_ratios(inst: Instance) -> list[Optional[Fraction]]:
    """``(R_i - R_{i-1}) / (γ_i - γ_{i-1})`` for ``i = 1..n``; ``None`` stands for an infinite ratio."""
    out = []
    for i in range(1, inst.n + 1):
        dg = inst.gammas[i] - inst.gammas[i - 1]
        out.append(None if dg == 0 else (inst.expected_rewards[i] - inst.expected_rewards[i - 1]) / dg)
    return out


def has_dmr(inst: Instance) -> bool:
    ratios = marginal_ratios(inst)
    if any(r is None for r in ratios):
        return False
    return all(a >= b for a, b in zip(ratios, ratios[1:]))


def dmr_breakpoints(inst: Instance) -> list[tuple[Fraction, Fraction]]:
    """``(z_i, ratio)`` for ``i = 1..n`` where ``φ(z_i)`` equals the ``(n+1-i)``-th ratio.

    Raises:
        NoDmr: marginal returns are not diminishing.
        NotRegular: the virtual cost is not monotone.
    """
    ts = inst.types
    _upper(ts)
    if not has_dmr(inst):
        raise NoDmr("marginal reward per unit of effort increases somewhere")
    if not is_regular(ts):
        raise NotRegular("virtual cost decreases somewhere")
    ratios = marginal_ratios(inst)
    out = []
    for i in range(1, inst.n + 1):
        ratio = ratios[inst.n - i]
        out.append((inverse_virtual_cost(ts, ratio), ratio))
    return out


# --------------------------------------------------------------------------
# joint (virtual) costs of discrete allocations
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class JointCostReport:
    cost_a: Fraction
    cost_b: Fraction
    virtual_cost_a: Fraction
    virtual_cost_b: Fraction

    @property
    def same_order(self) -> bool:
        def sign(x):
            return (x > 0) - (x < 0)

        return sign(self.cost_a - self.cost_b) == sign(self.virtual_cost_a - self.virtual_cost_b)


def joint_virtual_cost_compare(
    inst: Instance,
    alloc_a: Mapping,
    alloc_b: Mapping,
    ts: Optional[TypeSpace] = None,
) -> JointCostReport:
    """``Σ γ_{x(c)} c`` and ``Σ γ_{x(c)} φ(c)`` for two allocations on the same types."""
    ts = ts if ts is not None else inst.types
    a = {Fraction(c): int(v) for c, v in alloc_a.items()}
    b = {Fraction(c): int(v) for c, v in alloc_b.items()}
    if set(a) != set(b):
        raise ValueError("allocations must share their types")

    def joint(alloc, weight):
        return sum((inst.gammas[x] * weight(c) for c, x in alloc.items()), Fraction(0))

    phi = lambda c: virtual_cost(ts, c)  # noqa: E731
    return JointCostReport(joint(a, lambda c: c), joint(b, lambda c: c), joint(a, phi), joint(b, phi))

