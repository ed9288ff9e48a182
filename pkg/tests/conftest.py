import random

import pytest

from nphf.domains import DomainSpec, generate_random, make_fixed


@pytest.fixture(scope="session")
def canonical2():
    return make_fixed(2, "canonical")


@pytest.fixture(scope="session")
def canonical3():
    return make_fixed(3, "canonical")


@pytest.fixture(scope="session")
def all3():
    return make_fixed(3, "all")


def random_domain(n: int, seed: int, prob: float = 0.5):
    return generate_random(DomainSpec(n, "random", seed=seed, inclusion_prob=prob))


def rng_for(seed: int) -> random.Random:
    return random.Random(seed)
