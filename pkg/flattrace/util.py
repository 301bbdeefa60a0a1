import os
from math import isqrt
from typing import Iterator

import numpy as np

__all__ = "divisors", "mobius", "stream", "default_workers", "fmt", "blocks", "WORKERS_ENV",

WORKERS_ENV = "FLATTRACE_WORKERS"


def divisors(n: int) -> list[int]:
    """List the positive divisors of an integer in increasing order.

    Args:
        n (int): A positive integer.

    Returns:
        list[int]: The divisors of ``n``, ascending.
    """
    if n < 1:
        raise ValueError(f"Expected a positive integer, got {n!r}")
    small, large = [], []
    for d in range(1, isqrt(n) + 1):
        if n % d == 0:
            small.append(d)
            if d != n // d:
                large.append(n // d)
    return small + large[::-1]


def mobius(n: int) -> int:
    """Möbius function of a positive integer."""
    if n < 1:
        raise ValueError(f"Expected a positive integer, got {n!r}")
    sign, p = 1, 2
    while p * p <= n:
        if n % p == 0:
            n //= p
            if n % p == 0:
                return 0
            sign = -sign
        p += 1
    return -sign if n > 1 else sign


def stream(seed: int, *key: int) -> np.random.Generator:
    """Counter-based random stream for ``(seed, *key)``.

    The stream only depends on the seed and the key path, never on the order in which streams
    are requested, so trials and bands can be drawn in any order or in parallel.

    Args:
        seed (int): Master seed.
        *key (int): Stream path, e.g. ``(trial, band)``.

    Returns:
        numpy.random.Generator: A Philox generator keyed by the hashed path.
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def fmt(value: float) -> str:
    """Format a float with 17 significant digits (round-trip exact)."""
    return f"{float(value):.17g}"


def blocks(total: int, size: int) -> Iterator[slice]:
    """Split ``range(total)`` into consecutive slices of at most ``size`` items."""
    size = max(1, int(size))
    for start in range(0, total, size):
        yield slice(start, min(start + size, total))
