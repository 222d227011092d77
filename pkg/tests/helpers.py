"""Random generators shared by the test modules."""

import random

from starprod.cochain import DiffOperator, EquivalenceSeries
from starprod.polycore import Poly, monomials_up_to, random_poly


def random_diff_operator(rng: random.Random, dim: int, order: int, coeff_degree: int = 1, n_terms: int = 3,
                         with_first_order: bool = True) -> DiffOperator:
    low = 1 if with_first_order else 2
    gammas = [g for g in monomials_up_to(dim, order) if low <= sum(g)]
    table = {}
    for g in rng.sample(gammas, min(n_terms, len(gammas))):
        c = random_poly(rng, dim, coeff_degree, 2)
        if c:
            table[g] = c
    return DiffOperator(dim, table)


def random_equivalence(rng: random.Random, dim: int, nu_order: int, with_first_order: bool = True) -> EquivalenceSeries:
    gens = [random_diff_operator(rng, dim, r + 1, with_first_order=with_first_order) for r in range(1, nu_order + 1)]
    return EquivalenceSeries(nu_order, gens)


def random_vector_field(rng: random.Random, dim: int, degree: int = 2):
    return [random_poly(rng, dim, degree, 2) for _ in range(dim)]


def const(dim, c):
    return Poly.const(dim, c)
