"""Problem instances, type spaces and the elementary expectations.

Every number in an :class:`Instance` is a :class:`fractions.Fraction`. Inputs
arrive as decimal strings (``"0.5"``), fraction strings (``"1/2"``) or ints and
are converted with :func:`to_rational`.
"""
from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence, Union

Rational = Fraction
RawNumber = Union[str, int, float, Fraction]


class InstanceViolation(ValueError):
    """An instance breaks one of the structural modelling assumptions."""

    def __init__(self, assumption: str, witness: Mapping[str, object], message: str = ""):
        self.assumption = assumption
        self.witness = dict(witness)
        text = message or f"{assumption} violated at {self.witness}"
        super().__init__(text)


class ZeroDensity(ValueError):
    pass


def to_rational(value: RawNumber) -> Fraction:
    """Parse a decimal / ``p/q`` string (or int) into an exact rational.

    Floats are accepted through their shortest repr, so ``0.1`` becomes
    ``1/10`` rather than the binary expansion.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"cannot interpret {value!r} as a rational")


def format_rational(q: Fraction) -> str:
    return str(Fraction(q))


# --------------------------------------------------------------------------
# type spaces
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DiscreteTypes:
    support: tuple[Fraction, ...]
    masses: tuple[Fraction, ...]

    kind = "discrete"

    def mass_of(self, c: Fraction) -> Fraction:
        return self.masses[self.support.index(c)]


@dataclass(frozen=True)
class UniformTypes:
    upper: Fraction

    kind = "uniform"

    def cdf(self, c: Fraction) -> Fraction:
        c = Fraction(c)
        if c <= 0:
            return Fraction(0)
        if c >= self.upper:
            return Fraction(1)
        return c / self.upper

    def density(self, c: Fraction) -> Fraction:
        return 1 / self.upper

    def virtual_cost(self, c: Fraction) -> Fraction:
        return 2 * Fraction(c)


@dataclass(frozen=True)
class TabulatedTypes:
    """Continuous types on ``[0, grid[-1]]`` given by tabulated CDF and density.

    The CDF is interpolated linearly between knots; the density is constant on
    each half-open cell ``[grid[k], grid[k+1])`` with value ``density[k]``.
    The last density entry applies at the upper end point itself.
    """

    grid: tuple[Fraction, ...]
    cdf_values: tuple[Fraction, ...]
    density_values: tuple[Fraction, ...]

    kind = "tabulated"

    @property
    def upper(self) -> Fraction:
        return self.grid[-1]

    def _cell(self, c: Fraction) -> int:
        # index k with grid[k] <= c < grid[k+1]; the upper end point maps to the last cell
        k = bisect.bisect_right(self.grid, c) - 1
        return min(max(k, 0), len(self.grid) - 2)

    def cdf(self, c: Fraction) -> Fraction:
        c = Fraction(c)
        if c <= 0:
            return Fraction(0)
        if c >= self.upper:
            return Fraction(1)
        k = self._cell(c)
        lo, hi = self.grid[k], self.grid[k + 1]
        g_lo, g_hi = self.cdf_values[k], self.cdf_values[k + 1]
        return g_lo + (g_hi - g_lo) * (c - lo) / (hi - lo)

    def density(self, c: Fraction) -> Fraction:
        c = Fraction(c)
        if c >= self.upper:
            return self.density_values[-1]
        return self.density_values[self._cell(c)]

    def virtual_cost(self, c: Fraction) -> Fraction:
        c = Fraction(c)
        g = self.density(c)
        if g <= 0:
            raise ZeroDensity(f"density vanishes at c={c}")
        return c + self.cdf(c) / g


TypeSpace = Union[DiscreteTypes, UniformTypes, TabulatedTypes]


# --------------------------------------------------------------------------
# instances and contracts
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Instance:
    gammas: tuple[Fraction, ...]
    dist: tuple[tuple[Fraction, ...], ...]
    rewards: tuple[Fraction, ...]
    types: TypeSpace
    expected_rewards: tuple[Fraction, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(
            self,
            "expected_rewards",
            tuple(sum((p * r for p, r in zip(row, self.rewards)), Fraction(0)) for row in self.dist),
        )

    @property
    def n(self) -> int:
        """Index of the highest action (actions are ``0..n``)."""
        return len(self.gammas) - 1

    @property
    def m(self) -> int:
        """Index of the highest outcome (outcomes are ``0..m``)."""
        return len(self.rewards) - 1

    @property
    def is_discrete(self) -> bool:
        return isinstance(self.types, DiscreteTypes)

    @property
    def support(self) -> tuple[Fraction, ...]:
        if not self.is_discrete:
            raise TypeError("continuous instance has no finite support")
        return self.types.support


@dataclass(frozen=True)
class Contract:
    """An allocation together with one payment vector per type (or breakpoint).

    For discrete instances ``allocation`` maps each type to an action index and
    ``payments`` maps each type to its outcome-contingent transfers.  For
    continuous instances ``allocation`` is a ``PiecewiseConstantRule`` and
    ``payments`` is keyed by the breakpoint index ``0..ℓ``.
    """

    allocation: object
    payments: Mapping[object, tuple[Fraction, ...]]

    def __post_init__(self):
        for key, vector in self.payments.items():
            if any(t < 0 for t in vector):
                raise ValueError(f"negative payment for {key}: limited liability violated")


def expected_reward(inst: Instance, i: int) -> Fraction:
    if not 0 <= i <= inst.n:
        raise IndexError(f"action {i} outside 0..{inst.n}")
    return sum((p * r for p, r in zip(inst.dist[i], inst.rewards)), Fraction(0))


def expected_transfer(inst: Instance, t: Sequence[Fraction], i: int) -> Fraction:
    if not 0 <= i <= inst.n:
        raise IndexError(f"action {i} outside 0..{inst.n}")
    if len(t) != inst.m + 1:
        raise ValueError(f"payment vector needs {inst.m + 1} entries, got {len(t)}")
    return sum((p * Fraction(x) for p, x in zip(inst.dist[i], t)), Fraction(0))


# --------------------------------------------------------------------------
# validation
# --------------------------------------------------------------------------


def _validate_types(types: TypeSpace) -> TypeSpace:
    if isinstance(types, DiscreteTypes):
        if len(types.support) == 0 or len(types.support) != len(types.masses):
            raise InstanceViolation("discrete-support-shape", {"support": len(types.support), "masses": len(types.masses)})
        for a, b in zip(types.support, types.support[1:]):
            if not a < b:
                raise InstanceViolation("discrete-support-increasing", {"values": (str(a), str(b))})
        if types.support[0] < 0:
            raise InstanceViolation("nonnegative-costs", {"c": str(types.support[0])})
        for idx, q in enumerate(types.masses):
            if q < 0:
                raise InstanceViolation("nonnegative-masses", {"index": idx})
        if sum(types.masses) != 1:
            raise InstanceViolation("masses-sum-to-one", {"sum": str(sum(types.masses))})
        return types
    if isinstance(types, UniformTypes):
        if not types.upper > 0:
            raise InstanceViolation("positive-upper-bound", {"upper": str(types.upper)})
        return types
    if isinstance(types, TabulatedTypes):
        grid, cdf, dens = types.grid, types.cdf_values, types.density_values
        if len(grid) < 2 or len(cdf) != len(grid) or len(dens) != len(grid):
            raise InstanceViolation("tabulation-shape", {"grid": len(grid), "cdf": len(cdf), "density": len(dens)})
        if grid[0] != 0:
            raise InstanceViolation("tabulation-starts-at-zero", {"first": str(grid[0])})
        for k in range(len(grid) - 1):
            if not grid[k] < grid[k + 1]:
                raise InstanceViolation("tabulation-grid-increasing", {"index": k + 1})
            if cdf[k + 1] < cdf[k]:
                raise InstanceViolation("cdf-nondecreasing", {"index": k + 1})
        if cdf[0] != 0 or cdf[-1] != 1:
            raise InstanceViolation("cdf-endpoints", {"first": str(cdf[0]), "last": str(cdf[-1])})
        for k, g in enumerate(dens):
            if not g > 0:
                raise InstanceViolation("positive-density", {"index": k})
        return types
    raise TypeError(f"unknown type space {types!r}")


def validate_instance(
    gammas: Sequence[RawNumber],
    dist: Sequence[Sequence[RawNumber]],
    rewards: Sequence[RawNumber],
    types: TypeSpace,
) -> Instance:
    """Build an :class:`Instance`, rejecting the first broken assumption.

    Raises:
        InstanceViolation: names the assumption and the offending indices.
    """
    gammas = tuple(to_rational(g) for g in gammas)
    rewards = tuple(to_rational(r) for r in rewards)
    dist = tuple(tuple(to_rational(p) for p in row) for row in dist)

    if len(gammas) < 1:
        raise InstanceViolation("at-least-one-action", {})
    if gammas[0] != 0:
        raise InstanceViolation("zero-effort-first-action", {"i": 0})
    for i in range(1, len(gammas)):
        if i == 1 and not gammas[0] < gammas[1]:
            raise InstanceViolation("effort-ordering", {"i": 1})
        if gammas[i] < gammas[i - 1]:
            raise InstanceViolation("effort-ordering", {"i": i})

    if len(rewards) < 1 or rewards[0] != 0:
        raise InstanceViolation("zero-reward-first-outcome", {"j": 0})
    for j in range(1, len(rewards)):
        if rewards[j] < rewards[j - 1]:
            raise InstanceViolation("reward-ordering", {"j": j})

    if len(dist) != len(gammas):
        raise InstanceViolation("dist-shape", {"rows": len(dist), "actions": len(gammas)})
    for i, row in enumerate(dist):
        if len(row) != len(rewards):
            raise InstanceViolation("dist-shape", {"i": i, "columns": len(row), "outcomes": len(rewards)})
        for j, p in enumerate(row):
            if p < 0 or p > 1:
                raise InstanceViolation("probability-range", {"i": i, "j": j})
        if sum(row) != 1:
            raise InstanceViolation("row-stochastic", {"i": i, "sum": str(sum(row))})
    if dist[0][0] != 1:
        raise InstanceViolation("opt-out-monitoring", {"i": 0}, "F[0][0] must equal 1")
    for i in range(1, len(dist)):
        if dist[i][0] != 0:
            raise InstanceViolation("opt-out-monitoring", {"i": i}, f"F[{i}][0] must equal 0")

    inst = Instance(gammas=gammas, dist=dist, rewards=rewards, types=_validate_types(types))
    R = inst.expected_rewards
    for i in range(1, len(R)):
        if not R[i - 1] < R[i]:
            raise InstanceViolation("increasing-expected-rewards", {"i": i - 1, "i_next": i})
    return inst


def revalidate(inst: Instance) -> Instance:
    return validate_instance(inst.gammas, inst.dist, inst.rewards, inst.types)


def discrete_types(support: Sequence[RawNumber], masses: Sequence[RawNumber]) -> DiscreteTypes:
    return DiscreteTypes(tuple(to_rational(c) for c in support), tuple(to_rational(q) for q in masses))


def tabulated_types(
    grid: Sequence[RawNumber], cdf: Sequence[RawNumber], density: Sequence[RawNumber]
) -> TabulatedTypes:
    return TabulatedTypes(
        tuple(to_rational(c) for c in grid),
        tuple(to_rational(v) for v in cdf),
        tuple(to_rational(v) for v in density),
    )
