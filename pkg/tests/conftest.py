import random

import pytest

from sama import vphe
from sama.arith import OddPrimePool, StructuredPrime

UNIVERSE = ["doctor", "nurse", "hospitalA", "researcher", "insurer"]


def toy_system():
    pool = OddPrimePool(u=3, factors=(5, 7), bit_budget=4)
    return vphe.system_from_primes(
        pool, StructuredPrime(2311, 11), StructuredPrime(2731, 13)
    )


@pytest.fixture(scope="session")
def toy():
    """(params, strong) for the fixture system n = 2311 * 2731."""
    return toy_system()


@pytest.fixture()
def toy_users(toy):
    """Fresh toy system with three enrolled users (t = 5, 7, 35)."""
    params, strong = toy_system()
    rng = random.Random(99)
    users = [vphe.user_keygen(params, strong, uid, rng) for uid in (1, 2, 3)]
    return params, strong, users, rng
