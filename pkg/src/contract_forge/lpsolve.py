"""Exact rational linear programming.

A dense two-phase primal simplex with Bland's anti-cycling rule.  All
arithmetic is exact; ``gmpy2.mpq`` is used for speed when it is importable and
:class:`fractions.Fraction` otherwise.  Results are always handed back as
``Fraction``.

Conventions
-----------
* ``dual[i]`` is the shadow price of constraint ``i``: the rate of change of the
  optimal objective when ``rhs[i]`` increases.
* ``farkas[i]`` multiplies constraint ``i`` written in ``<=`` orientation
  (``>=`` rows are negated first).  Inequality multipliers are nonnegative,
  equality multipliers have free sign.  The combined row has nonnegative
  coefficients on nonnegative variables, zero coefficients on free variables
  and a strictly negative right-hand side, which is the contradiction
  ``0 <= combined row . x <= negative``.
"""
from __future__ import annotations

import enum
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

try:  # pragma: no cover - exercised implicitly
    if os.environ.get("CONTRACT_FORGE_PURE_FRACTIONS"):
        raise ImportError
    from gmpy2 import mpq as _num

    def _to_frac(v) -> Fraction:
        return Fraction(int(v.numerator), int(v.denominator))

except ImportError:  # pragma: no cover
    _num = Fraction

    def _to_frac(v) -> Fraction:
        return v


LE, GE, EQ = "<=", ">=", "="
_RELATIONS = (LE, GE, EQ)


class Malformed(ValueError):
    pass


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class Constraint:
    coeffs: tuple[Fraction, ...]
    relation: str
    rhs: Fraction
    label: object = None


@dataclass(frozen=True)
class LinearProgram:
    """``min``/``max`` of ``objective . x`` subject to ``constraints``.

    Variables are nonnegative unless listed in ``free``.
    """

    num_vars: int
    constraints: tuple[Constraint, ...] = ()
    objective: tuple[Fraction, ...] = ()
    sense: str = "min"
    free: frozenset[int] = frozenset()
    var_labels: tuple = ()

    def __post_init__(self):
        if not self.objective:
            object.__setattr__(self, "objective", (Fraction(0),) * self.num_vars)
        if self.sense not in ("min", "max"):
            raise Malformed(f"unknown sense {self.sense!r}")
        if len(self.objective) != self.num_vars:
            raise Malformed(f"objective has {len(self.objective)} entries for {self.num_vars} variables")
        for idx, con in enumerate(self.constraints):
            if len(con.coeffs) != self.num_vars:
                raise Malformed(f"constraint {idx} has {len(con.coeffs)} coefficients for {self.num_vars} variables")
            if con.relation not in _RELATIONS:
                raise Malformed(f"constraint {idx} has unknown relation {con.relation!r}")
        for j in self.free:
            if not 0 <= j < self.num_vars:
                raise Malformed(f"free variable index {j} out of range")

    @property
    def rows(self) -> int:
        return len(self.constraints)


class LPBuilder:
    """Incremental construction of a :class:`LinearProgram` from sparse rows."""

    def __init__(self, num_vars: int, var_labels: Sequence = ()):
        self.num_vars = num_vars
        self.var_labels = tuple(var_labels)
        self._constraints: list[Constraint] = []
        self.free: set[int] = set()

    def add(self, terms: dict[int, Fraction], relation: str, rhs, label=None) -> int:
        row = [Fraction(0)] * self.num_vars
        for j, v in terms.items():
            row[j] += Fraction(v)
        self._constraints.append(Constraint(tuple(row), relation, Fraction(rhs), label))
        return len(self._constraints) - 1

    def build(self, objective: Optional[dict[int, Fraction]] = None, sense: str = "min") -> LinearProgram:
        obj = [Fraction(0)] * self.num_vars
        for j, v in (objective or {}).items():
            obj[j] += Fraction(v)
        return LinearProgram(
            num_vars=self.num_vars,
            constraints=tuple(self._constraints),
            objective=tuple(obj),
            sense=sense,
            free=frozenset(self.free),
            var_labels=self.var_labels,
        )


@dataclass(frozen=True)
class LpOutcome:
    status: Status
    primal: Optional[tuple[Fraction, ...]] = None
    dual: Optional[tuple[Fraction, ...]] = None
    farkas: Optional[tuple[Fraction, ...]] = None
    objective: Optional[Fraction] = None
    pivots: int = 0


@dataclass(frozen=True)
class Feasibility:
    feasible: bool
    point: Optional[tuple[Fraction, ...]] = None
    farkas: Optional[tuple[Fraction, ...]] = None
    pivots: int = 0

    def __bool__(self) -> bool:
        return self.feasible


# --------------------------------------------------------------------------
# tableau machinery
# --------------------------------------------------------------------------


@dataclass
class _Tableau:
    rows: list
    rhs: list
    basis: list
    ncols: int
    struct_map: list  # (original var, sign) per structural column
    n_struct: int
    init_col: list  # column that formed the identity in row i
    sigma: list
    artificial: set = field(default_factory=set)
    pivots: int = 0


def _setup(lp: LinearProgram) -> _Tableau:
    zero, one = _num(0), _num(1)
    struct_map = []
    for j in range(lp.num_vars):
        struct_map.append((j, 1))
        if j in lp.free:
            struct_map.append((j, -1))
    n_struct = len(struct_map)

    m = lp.rows
    sigma = []
    for con in lp.constraints:
        if con.relation == LE:
            sigma.append(1 if con.rhs >= 0 else -1)
        elif con.relation == GE:
            sigma.append(-1 if con.rhs <= 0 else 1)
        else:
            sigma.append(1 if con.rhs >= 0 else -1)

    n_ineq = sum(1 for con in lp.constraints if con.relation != EQ)
    needs_art = []
    for con, s in zip(lp.constraints, sigma):
        if con.relation == EQ:
            needs_art.append(True)
        else:
            slack_sign = s * (1 if con.relation == LE else -1)
            needs_art.append(slack_sign != 1)
    n_art = sum(needs_art)
    ncols = n_struct + n_ineq + n_art

    rows, rhs, basis, init_col = [], [], [], []
    artificial = set()
    slack_at = n_struct
    art_at = n_struct + n_ineq
    for i, con in enumerate(lp.constraints):
        s = sigma[i]
        row = [zero] * ncols
        for c, (j, sign) in enumerate(struct_map):
            a = con.coeffs[j]
            if a:
                row[c] = _num(a) * (s * sign)
        if con.relation != EQ:
            row[slack_at] = _num(s * (1 if con.relation == LE else -1))
            slack_col = slack_at
            slack_at += 1
        if needs_art[i]:
            row[art_at] = one
            basis.append(art_at)
            init_col.append(art_at)
            artificial.add(art_at)
            art_at += 1
        else:
            basis.append(slack_col)
            init_col.append(slack_col)
        rows.append(row)
        rhs.append(_num(con.rhs) * s)
    return _Tableau(rows, rhs, basis, ncols, struct_map, n_struct, init_col, sigma, artificial)


def _pivot(tab: _Tableau, r: int, j: int, d: list) -> None:
    row_r = tab.rows[r]
    piv = row_r[j]
    if piv != 1:
        inv = 1 / piv
        for k in range(tab.ncols):
            if row_r[k]:
                row_r[k] *= inv
        tab.rhs[r] *= inv
    nz = [k for k in range(tab.ncols) if row_r[k]]
    rhs_r = tab.rhs[r]
    for i, row_i in enumerate(tab.rows):
        if i == r:
            continue
        f = row_i[j]
        if f:
            for k in nz:
                row_i[k] -= f * row_r[k]
            tab.rhs[i] -= f * rhs_r
    f = d[j]
    if f:
        for k in nz:
            d[k] -= f * row_r[k]
    tab.basis[r] = j
    tab.pivots += 1


def _reduced_costs(tab: _Tableau, cost: list) -> list:
    d = list(cost)
    for r, b in enumerate(tab.basis):
        cb = cost[b]
        if cb:
            row = tab.rows[r]
            for k in range(tab.ncols):
                if row[k]:
                    d[k] -= cb * row[k]
    return d


def _bland(tab: _Tableau, d: list, allowed: list) -> Status:
    while True:
        entering = -1
        for j in allowed:
            if d[j] < 0:
                entering = j
                break
        if entering < 0:
            return Status.OPTIMAL
        best_r, best_ratio = -1, None
        for r, row in enumerate(tab.rows):
            a = row[entering]
            if a > 0:
                ratio = tab.rhs[r] / a
                if (
                    best_r < 0
                    or ratio < best_ratio
                    or (ratio == best_ratio and tab.basis[r] < tab.basis[best_r])
                ):
                    best_r, best_ratio = r, ratio
        if best_r < 0:
            return Status.UNBOUNDED
        _pivot(tab, best_r, entering, d)


def _phase_one(lp: LinearProgram) -> tuple[_Tableau, Optional[tuple[Fraction, ...]]]:
    """Run phase one; return the tableau and a Farkas vector if infeasible."""
    tab = _setup(lp)
    cost1 = [_num(0)] * tab.ncols
    for a in tab.artificial:
        cost1[a] = _num(1)
    d = _reduced_costs(tab, cost1)
    _bland(tab, d, list(range(tab.ncols)))
    infeas = sum((cost1[b] * tab.rhs[r] for r, b in enumerate(tab.basis)), _num(0))
    if infeas > 0:
        farkas = []
        for i, con in enumerate(lp.constraints):
            col = tab.init_col[i]
            y = cost1[col] - d[col]
            orient = -1 if con.relation == GE else 1
            farkas.append(_to_frac(-y * tab.sigma[i] * orient))
        return tab, tuple(farkas)

    # drive artificials at level zero out of the basis where possible
    for r in range(len(tab.rows)):
        if tab.basis[r] in tab.artificial:
            row = tab.rows[r]
            for j in range(tab.ncols):
                if j not in tab.artificial and row[j]:
                    _pivot(tab, r, j, d)
                    break
    return tab, None


def _primal(lp: LinearProgram, tab: _Tableau) -> tuple[Fraction, ...]:
    x = [Fraction(0)] * lp.num_vars
    for r, b in enumerate(tab.basis):
        if b < tab.n_struct:
            j, sign = tab.struct_map[b]
            x[j] += sign * _to_frac(tab.rhs[r])
    return tuple(x)


def solve(lp: LinearProgram) -> LpOutcome:
    """Solve ``lp`` exactly.

    Returns an :class:`LpOutcome` whose status is optimal (with primal, dual and
    objective), infeasible (with a Farkas certificate) or unbounded.
    """
    tab, farkas = _phase_one(lp)
    if farkas is not None:
        return LpOutcome(Status.INFEASIBLE, farkas=farkas, pivots=tab.pivots)

    flip = -1 if lp.sense == "max" else 1
    cost = [_num(0)] * tab.ncols
    for c, (j, sign) in enumerate(tab.struct_map):
        cost[c] = _num(lp.objective[j]) * (sign * flip)
    d = _reduced_costs(tab, cost)
    allowed = [j for j in range(tab.ncols) if j not in tab.artificial]
    status = _bland(tab, d, allowed)
    if status is Status.UNBOUNDED:
        return LpOutcome(Status.UNBOUNDED, pivots=tab.pivots)

    x = _primal(lp, tab)
    dual = []
    for i in range(lp.rows):
        col = tab.init_col[i]
        y = cost[col] - d[col]
        dual.append(_to_frac(y * tab.sigma[i] * flip))
    value = sum((c * v for c, v in zip(lp.objective, x)), Fraction(0))
    return LpOutcome(Status.OPTIMAL, primal=x, dual=tuple(dual), objective=value, pivots=tab.pivots)


def feasible(lp: LinearProgram) -> Feasibility:
    """Phase-one only: a feasible point, or a Farkas certificate."""
    tab, farkas = _phase_one(lp)
    if farkas is not None:
        return Feasibility(False, farkas=farkas, pivots=tab.pivots)
    return Feasibility(True, point=_primal(lp, tab), pivots=tab.pivots)


# --------------------------------------------------------------------------
# certificate checks (plain Fraction arithmetic, independent of the tableau)
# --------------------------------------------------------------------------


def satisfies(lp: LinearProgram, x: Sequence[Fraction]) -> bool:
    if len(x) != lp.num_vars:
        return False
    for j, v in enumerate(x):
        if j not in lp.free and v < 0:
            return False
    for con in lp.constraints:
        lhs = sum((a * v for a, v in zip(con.coeffs, x)), Fraction(0))
        if con.relation == LE and lhs > con.rhs:
            return False
        if con.relation == GE and lhs < con.rhs:
            return False
        if con.relation == EQ and lhs != con.rhs:
            return False
    return True


def is_farkas_certificate(lp: LinearProgram, y: Sequence[Fraction]) -> bool:
    if len(y) != lp.rows:
        return False
    combined = [Fraction(0)] * lp.num_vars
    rhs = Fraction(0)
    for yi, con in zip(y, lp.constraints):
        if con.relation != EQ and yi < 0:
            return False
        orient = -1 if con.relation == GE else 1
        if yi:
            for j, a in enumerate(con.coeffs):
                if a:
                    combined[j] += yi * orient * a
            rhs += yi * orient * con.rhs
    for j, v in enumerate(combined):
        if j in lp.free:
            if v != 0:
                return False
        elif v < 0:
            return False
    return rhs < 0


def is_dual_optimal(lp: LinearProgram, outcome: LpOutcome) -> bool:
    """Check dual feasibility and zero duality gap of an optimal outcome."""
    if outcome.status is not Status.OPTIMAL or outcome.dual is None:
        return False
    y = outcome.dual
    maximize = lp.sense == "max"
    for yi, con in zip(y, lp.constraints):
        if con.relation == LE and (yi < 0 if maximize else yi > 0):
            return False
        if con.relation == GE and (yi > 0 if maximize else yi < 0):
            return False
    for j in range(lp.num_vars):
        col = sum((yi * con.coeffs[j] for yi, con in zip(y, lp.constraints)), Fraction(0))
        c = lp.objective[j]
        if j in lp.free:
            if col != c:
                return False
        elif (col < c) if maximize else (col > c):
            return False
    dual_value = sum((yi * con.rhs for yi, con in zip(y, lp.constraints)), Fraction(0))
    return dual_value == outcome.objective


def as_rows(values: Iterable) -> tuple[Fraction, ...]:
    return tuple(Fraction(v) for v in values)
