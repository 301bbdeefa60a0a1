from math import log, sqrt

import pytest

from flattrace.torus import enumerate_periodic_points, make_automorphism
from flattrace.types import CAT_MAP

GOLDEN = (3 + sqrt(5)) / 2
LOG_GOLDEN = log(GOLDEN)

# |det(A^n - I)| of the cat map, from t_{n+1} = 3 t_n - t_{n-1}.
CAT_COUNTS = {1: 1, 2: 5, 3: 16, 4: 45, 5: 121, 6: 320, 7: 841, 8: 2205, 9: 5776, 10: 15125, 11: 39601, 12: 103680}


def trace_recursion(n: int) -> int:
    a, b = 2, 3
    for _ in range(n - 1):
        a, b = b, 3 * b - a
    return a if n == 0 else b


@pytest.fixture(scope="session")
def cat():
    return make_automorphism(CAT_MAP)


@pytest.fixture(scope="session")
def tables(cat):
    cache = {}

    def get(n: int):
        if n not in cache:
            cache[n] = enumerate_periodic_points(cat, n)
        return cache[n]

    return get
