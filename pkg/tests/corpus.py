"""Seeded generators for small random instances."""
from __future__ import annotations

import random
from fractions import Fraction

from contract_forge.model import InstanceViolation, UniformTypes, discrete_types, validate_instance


def _random_row(rng: random.Random, m: int, denom: int) -> list[Fraction]:
    # split ``denom`` units across outcomes 1..m
    cuts = sorted(rng.randint(0, denom) for _ in range(m - 1))
    parts = [b - a for a, b in zip([0] + cuts, cuts + [denom])]
    return [Fraction(0)] + [Fraction(p, denom) for p in parts]


def _technology(rng: random.Random, n: int, m: int):
    while True:
        gammas = [Fraction(0)]
        for _ in range(n):
            gammas.append(gammas[-1] + Fraction(rng.randint(1, 6), rng.choice((1, 2))))
        rewards = [Fraction(0)]
        for _ in range(m):
            rewards.append(rewards[-1] + rng.randint(1, 12))
        dist = [[Fraction(1)] + [Fraction(0)] * m]
        dist += [_random_row(rng, m, rng.choice((2, 3, 4, 6))) for _ in range(n)]
        expected = [sum(p * r for p, r in zip(row, rewards)) for row in dist]
        if all(a < b for a, b in zip(expected, expected[1:])):
            return gammas, dist, rewards


def random_discrete_instance(rng: random.Random, max_n: int = 3, max_m: int = 3, max_types: int = 3):
    n = rng.randint(1, max_n)
    m = rng.randint(2 if n > 1 else 1, max_m)
    gammas, dist, rewards = _technology(rng, n, m)
    k = rng.randint(1, max_types)
    support = sorted(rng.sample(range(1, 9), k))
    support = [Fraction(c, rng.choice((1, 2))) for c in support]
    support = sorted(set(support))
    weights = [rng.randint(1, 4) for _ in support]
    masses = [Fraction(w, sum(weights)) for w in weights]
    return validate_instance(gammas, dist, rewards, discrete_types(support, masses))


def random_uniform_instance(rng: random.Random, max_n: int = 3, max_m: int = 3, top_opts_out: bool = False):
    while True:
        n = rng.randint(1, max_n)
        m = rng.randint(2 if n > 1 else 1, max_m)
        gammas, dist, rewards = _technology(rng, n, m)
        upper = Fraction(rng.randint(2, 20), rng.choice((1, 2)))
        try:
            inst = validate_instance(gammas, dist, rewards, UniformTypes(upper))
        except InstanceViolation:
            continue
        if top_opts_out and not all(g * upper > r for g, r in zip(inst.gammas[1:], inst.expected_rewards[1:])):
            continue
        return inst


def discrete_corpus(seed: int = 20240611, size: int = 200):
    rng = random.Random(seed)
    return [random_discrete_instance(rng) for _ in range(size)]
