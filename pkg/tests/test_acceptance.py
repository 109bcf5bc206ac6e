"""Acceptance gate: one test per criterion, each printing a single PASS/FAIL line."""
import itertools
import json
import math
import random
import time
from fractions import Fraction
from pathlib import Path

import pytest

from contract_forge.cli import main as cli_main
from contract_forge.continuous import (
    PiecewiseConstantRule,
    breakpoint_lp,
    build_lp2,
    dmr_breakpoints,
    expected_virtual_welfare,
    joint_virtual_cost_compare,
    min_payment_contract_cont,
    uniform_optimal_contract,
    virtual_welfare_rule,
)
from contract_forge.discrete import (
    CorrelatedMenu,
    DeviationPlan,
    MenuItem,
    brute_force_optimal,
    build_ic_lp,
    check_implementable,
    enumerate_monotone,
    ic_check,
    is_monotone,
    optimal_contract,
    verify_correlated_menu,
    verify_deviation_plan,
)
from contract_forge.lpsolve import feasible, satisfies
from contract_forge.model import Contract, discrete_types, expected_transfer, validate_instance

from conftest import HALF
from corpus import random_uniform_instance

DATA = Path(__file__).resolve().parent.parent / "data"


@pytest.fixture
def verdict(capsys):
    def report(number: int, title: str, ok: bool, detail: str = ""):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title}" + (f" ({detail})" if detail else ""))
        assert ok, detail

    return report


def test_criterion_01_running_example_contract(running, verdict):
    start = time.perf_counter()
    one, four = Fraction(1), Fraction(4)
    contract = Contract({one: 3, four: 1}, {one: (0, 0, 14), four: (0, 4, 0)})
    ic = ic_check(running, contract).is_ic
    revenue = sum(p * (running.expected_rewards[contract.allocation[c]]
                       - expected_transfer(running, contract.payments[c], contract.allocation[c]))
                  for c, p in zip(running.support, running.types.masses))
    elapsed = time.perf_counter() - start
    verdict(1, "exhibited contract is IC with revenue exactly 11", ic and revenue == 11 and elapsed < 1,
            f"ic={ic}, revenue={revenue}, {elapsed:.3f}s")


def test_criterion_02_pooling_counterexample(running, verdict):
    start = time.perf_counter()
    alloc = {1: 2, 4: 2}
    result = check_implementable(running, alloc)
    one, four = Fraction(1), Fraction(4)
    plan = DeviationPlan({(one, one, 3): HALF, (one, four, 3): HALF, (four, one, 1): HALF, (four, four, 1): HALF})
    check = verify_deviation_plan(running, alloc, plan)
    elapsed = time.perf_counter() - start
    ok = (not result.implementable and check.valid and check.deviation_cost == 14
          and check.truthful_cost == 15 and elapsed < 1)
    verdict(2, "pooled allocation rejected; swap plan valid with joint costs 14 < 15", ok,
            f"costs {check.deviation_cost} < {check.truthful_cost}, {elapsed:.3f}s")


def test_criterion_03_optimal_matches_oracle(corpus, verdict):
    start = time.perf_counter()
    mismatches = [i for i, inst in enumerate(corpus)
                  if optimal_contract(inst).revenue != brute_force_optimal(inst).revenue]
    elapsed = time.perf_counter() - start
    verdict(3, f"monotone search equals exhaustive search on {len(corpus)} instances",
            len(corpus) >= 200 and not mismatches and elapsed < 60,
            f"{len(mismatches)} mismatches, {elapsed:.1f}s")


def _all_verdicts(corpus):
    for inst in corpus:
        for alloc in itertools.product(range(inst.n + 1), repeat=len(inst.support)):
            yield inst, alloc, check_implementable(inst, alloc)


@pytest.fixture(scope="module")
def corpus_verdicts(corpus):
    return list(_all_verdicts(corpus))


def test_criterion_04_implementable_means_monotone(corpus_verdicts, verdict):
    implementable = [(inst, a) for inst, a, v in corpus_verdicts if v.implementable]
    bad = [a for inst, a in implementable if not is_monotone(a)]
    verdict(4, f"all {len(implementable)} implementable allocations are monotone", not bad,
            f"{len(bad)} counterexamples")


def test_criterion_05_three_type(capsys, three_type, verdict):
    cli_main(["solve", str(DATA / "three_type.json"), "--json"])
    solved = Fraction(json.loads(capsys.readouterr().out)["revenue"])
    one, three = Fraction(1), Fraction(3)
    menu = CorrelatedMenu({
        one: (MenuItem(HALF, 3, (0, 0, 14)), MenuItem(HALF, 2, (0, 1, 5))),
        three: (MenuItem(Fraction(1), 1, (0, 3, 0)),),
    })
    report = verify_correlated_menu(three_type, menu)
    ok = solved == Fraction("19.75") and report.is_ic and report.revenue == Fraction("19.875")
    verdict(5, "deterministic optimum 19.75; randomized menu IC with revenue 19.875", ok,
            f"solve={solved}, menu={report.revenue}")


def test_criterion_06_certificates_and_payments(corpus_verdicts, verdict):
    plans = payments = 0
    failures = []
    for inst, alloc, v in corpus_verdicts:
        if v.implementable:
            payments += 1
            point = [t for c in inst.support for t in v.payments[c]]
            if not satisfies(build_ic_lp(inst, alloc), point):
                failures.append(("payments", alloc))
        else:
            plans += 1
            if not verify_deviation_plan(inst, alloc, v.plan).valid:
                failures.append(("plan", alloc))
    verdict(6, f"{plans} plans re-verify and {payments} payment rules satisfy the LP exactly", not failures,
            f"{len(failures)} failures")


def _random_monotone_rule(rng, inst):
    upper = inst.types.upper
    # rules using every action are the ones most often rejected
    ell = inst.n if rng.random() < 0.5 else rng.randint(0, inst.n)
    pts = sorted({upper * Fraction(rng.randint(1, 47), 48) for _ in range(ell)})
    actions = sorted(rng.sample(range(inst.n + 1), len(pts) + 1), reverse=True)
    return PiecewiseConstantRule.build(pts, actions, upper)


def test_criterion_07_breakpoint_reduction(verdict):
    rng = random.Random(1207)
    start = time.perf_counter()
    pairs = disagreements = infeasible = 0
    while pairs < 150:
        inst = random_uniform_instance(rng)
        rule = _random_monotone_rule(rng, inst)
        a = feasible(build_lp2(inst, rule)).feasible
        b = feasible(breakpoint_lp(inst, rule)).feasible
        pairs += 1
        infeasible += not a
        disagreements += a != b
    elapsed = time.perf_counter() - start
    verdict(7, f"interval LP and breakpoint LP agree on {pairs} pairs ({infeasible} infeasible)",
            disagreements == 0 and elapsed < 60, f"{disagreements} disagreements, {elapsed:.1f}s")


GRID = 50


def _grid_rules(n: int):
    """Monotone rules whose breakpoints come from the grid ``k c̄ / (GRID + 1)``."""
    for ell in range(n + 1):
        for cuts in itertools.combinations(range(1, GRID + 1), ell):
            for acts in itertools.combinations(range(n, -1, -1), ell + 1):
                yield (0,) + cuts + (GRID + 1,), acts


def _grid_welfare_bound(inst) -> tuple[Fraction, tuple]:
    """Largest expected virtual welfare over all grid rules, in exact integer arithmetic."""
    upper, K = inst.types.upper, GRID + 1
    R, g = inst.expected_rewards, inst.gammas
    scale = math.lcm(*(x.denominator for x in R), *((x * upper).denominator for x in g)) * K * K
    # prefix[a][k] = scale * (R_a G(z_k) - γ_a G(z_k) z_k)  with  G(z_k) = k / K
    prefix = [[int(scale * (R[a] * Fraction(k, K) - g[a] * upper * Fraction(k * k, K * K))) for k in range(K + 1)]
              for a in range(inst.n + 1)]
    best, arg = None, None
    for cuts, acts in _grid_rules(inst.n):
        value = sum(prefix[a][cuts[i + 1]] - prefix[a][cuts[i]] for i, a in enumerate(acts))
        if best is None or value > best:
            best, arg = value, (cuts, acts)
    return Fraction(best, scale), arg


def test_criterion_08_uniform_optimum(verdict):
    rng = random.Random(808)
    problems = []
    lp_checks = 0
    instances = 0
    while instances < 50:
        inst = random_uniform_instance(rng, top_opts_out=True)
        instances += 1
        best = uniform_optimal_contract(inst)
        if best.top_utility != 0:
            problems.append(("top utility", best.top_utility))
        if best.revenue != expected_virtual_welfare(inst, best.rule):
            problems.append(("revenue != virtual welfare", best.revenue))
        bound, (cuts, acts) = _grid_welfare_bound(inst)
        if bound > best.revenue:
            problems.append(("grid rule beats optimum", bound, best.revenue))
        upper = inst.types.upper
        sample = [(cuts, acts)] + rng.sample(list(_grid_rules(inst.n)), 3)
        for cuts, acts in sample:
            rule = PiecewiseConstantRule(tuple(upper * Fraction(k, GRID + 1) for k in cuts), acts)
            priced = min_payment_contract_cont(inst, rule)
            if priced is None:
                continue
            lp_checks += 1
            if not priced.revenue <= expected_virtual_welfare(inst, rule) <= best.revenue:
                problems.append(("lp revenue", priced.revenue, best.revenue))
    verdict(8, f"uniform optimum on {instances} instances: zero top utility, revenue = welfare, "
               f"dominates every {GRID}-grid rule ({lp_checks} priced by LP)", not problems, "; ".join(map(str, problems[:3])))


def test_criterion_09_exponential_example(exponential_example, verdict):
    report = joint_virtual_cost_compare(exponential_example, {1: 2, 2: 3}, {1: 4, 2: 1})
    ok = (report.cost_a == 8 and report.cost_b == 9
          and abs(float(report.virtual_cost_a) - 30.6) <= 0.01 and abs(float(report.virtual_cost_b) - 27.41) <= 0.01)
    verdict(9, "joint costs 8 vs 9, joint virtual costs near 30.6 vs 27.41", ok,
            f"{float(report.virtual_cost_a):.4f} vs {float(report.virtual_cost_b):.4f}")


def test_criterion_10_dmr_breakpoints(uniform_running, verdict):
    frozen = (Fraction(5, 7), Fraction(5, 2), Fraction(5))
    # independent grid scan: the argmax must change inside a step bracketing each frozen value
    R, g = uniform_running.expected_rewards, uniform_running.gammas
    step = Fraction(1, 1000)
    choice = [max(range(4), key=lambda i: R[i] - 2 * c * g[i]) for c in (k * step for k in range(12001))]
    changes = [k * step for k in range(1, 12001) if choice[k] != choice[k - 1]]
    bracketed = len(changes) == 3 and all(c - step < z <= c for c, z in zip(changes, frozen))
    dmr = tuple(z for z, _ in dmr_breakpoints(uniform_running))
    vw = virtual_welfare_rule(uniform_running).interior
    verdict(10, "DMR breakpoints equal virtual-welfare breakpoints 5/7, 5/2, 5",
            bracketed and dmr == vw == frozen, f"dmr={list(map(str, dmr))}, vw={list(map(str, vw))}")


def test_criterion_11_enumeration_count(verdict):
    bad = []
    cases = 0
    for k in range(1, 12):
        for n in range(1, 13 - k):
            inst = validate_instance(
                list(range(n + 1)),
                [[int(i == j) for j in range(n + 1)] for i in range(n + 1)],
                list(range(n + 1)),
                discrete_types(list(range(1, k + 1)), [Fraction(1, k)] * k),
            )
            rules = list(enumerate_monotone(inst))
            cases += 1
            if len(rules) != math.comb(k + n, k) or len(set(rules)) != len(rules) or not all(map(is_monotone, rules)):
                bad.append((k, n))
    verdict(11, f"binomial(|C|+n, |C|) distinct monotone rules for all {cases} shapes with |C|+n <= 12",
            not bad, ", ".join(map(str, bad)))
