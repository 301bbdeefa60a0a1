"""Hyperbolic toral automorphisms and their periodic orbits.

Periodic points of period ``n`` are the solutions of ``(M^n - I) x ∈ Z^d`` modulo ``Z^d``. The
Smith normal form ``D = P (M^n - I) Q`` turns them into ``x = Q D^{-1} z`` with ``0 <= z_i < D_ii``,
so the whole set is generated exactly from integers, with the largest invariant factor as common
denominator.
"""
from fractions import Fraction
from functools import cached_property
from collections import Counter
import logging
from math import fsum, isqrt, log, sqrt
from typing import Sequence

from attrs import define, field
import numpy as np

from .errors import Degenerate, NotHyperbolic, NotUnimodular, PeriodTooLarge
from .lattice import IntMatrix, SmithForm, as_matrix, det, matpow, minus_identity, shortest_vector, smith_normal_form
from .types import DEFAULT_BUDGET, RationalPoint
from .util import divisors, mobius

__all__ = (
    "ToralAutomorphism", "PeriodicOrbit", "OrbitTable",
    "make_automorphism", "enumerate_periodic_points", "birkhoff_sum", "birkhoff_sums", "amplitude",
    "min_periodic_distance", "separation_constant", "primitive_period",
    "periodic_point_count", "primitive_counts", "amplitude_from_counts", "log_amplitude_from_counts",
    "HYPERBOLICITY_TOL",
)

log_ = logging.getLogger(__name__)

HYPERBOLICITY_TOL = 1e-9


def _validate_matrix(instance: "ToralAutomorphism", _, value: IntMatrix):
    if len(value) < 2:
        raise ValueError(f"Torus dimension must be at least 2, got {len(value)}")
    if abs(det(value)) != 1:
        raise NotUnimodular(f"|det| = {abs(det(value))} != 1 for {instance}")
    moduli = np.abs(np.linalg.eigvals(np.array(value, dtype=float)))
    if np.any(np.abs(moduli - 1.0) <= HYPERBOLICITY_TOL):
        raise NotHyperbolic(f"{instance} has an eigenvalue of modulus 1")


@define(frozen=True, slots=False)
class ToralAutomorphism:
    """A hyperbolic automorphism ``x -> M x mod Z^d`` of the flat torus."""
    matrix: IntMatrix = field(converter=as_matrix, validator=_validate_matrix)

    def __str__(self):
        return "T=[" + ",".join("[" + ",".join(map(str, row)) + "]" for row in self.matrix) + "]"

    @property
    def dimension(self) -> int:
        return len(self.matrix)

    @cached_property
    def array(self) -> np.ndarray:
        return np.array(self.matrix, dtype=np.int64)

    @cached_property
    def eigenvalues(self) -> tuple[complex, ...]:
        values = np.linalg.eigvals(self.array.astype(float))
        return tuple(sorted((complex(v) for v in values), key=lambda z: (-abs(z), z.real, z.imag)))

    @cached_property
    def unstable_log_jacobian(self) -> float:
        """``J_u = sum of log|λ|`` over the expanding eigenvalues; constant on the torus."""
        return fsum(log(abs(v)) for v in self.eigenvalues if abs(v) > 1.0)

    @property
    def h_top(self) -> float:
        return self.unstable_log_jacobian

    @cached_property
    def Lambda(self) -> float:
        moduli = [abs(v) for v in self.eigenvalues]
        return max(max(moduli), 1.0 / min(moduli))

    @property
    def entropy_bound(self) -> float:
        return self.dimension / 2 * log(self.Lambda)

    def power(self, n: int) -> IntMatrix:
        return matpow(self.matrix, n)

    def apply(self, point: RationalPoint) -> RationalPoint:
        return point.apply(self.matrix)

    def info(self) -> dict:
        return dict(
            matrix=[list(row) for row in self.matrix],
            h_top=self.h_top,
            Lambda=self.Lambda,
            J_u=self.unstable_log_jacobian,
        )


def make_automorphism(matrix: Sequence[Sequence[int]]) -> ToralAutomorphism:
    """Validate an integer matrix as a hyperbolic unimodular torus map.

    Raises:
        NotUnimodular: when ``|det| != 1``.
        NotHyperbolic: when an eigenvalue has modulus within ``1e-9`` of 1.
    """
    return ToralAutomorphism(matrix)


@define(frozen=True)
class PeriodicOrbit:
    """One T-cycle, starting at its lexicographically smallest point."""
    points: tuple[RationalPoint, ...]
    period: int
    weight: int

    @property
    def m(self) -> int:
        return self.period

    @property
    def representative(self) -> RationalPoint:
        return self.points[0]


@define(frozen=True, slots=False, eq=False)
class OrbitTable:
    """All period-``n`` points of an automorphism, grouped into orbits.

    Points are stored as integer numerators over the common ``denominator``, orbit after
    orbit, each orbit in T-order from its representative. ``starts`` holds the orbit offsets
    (with a trailing total).
    """
    automorphism: ToralAutomorphism
    n: int
    smith: SmithForm
    determinant: int
    denominator: int
    numerators: np.ndarray = field(repr=False)
    starts: np.ndarray = field(repr=False)
    periods: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    def __str__(self):
        return f"{self.automorphism} n={self.n} N={self.total_points} orbits={len(self)}"

    def __len__(self):
        return len(self.periods)

    @property
    def total_points(self) -> int:
        return int(self.starts[-1])

    @property
    def dimension(self) -> int:
        return self.automorphism.dimension

    @cached_property
    def orbit_ids(self) -> np.ndarray:
        return np.repeat(np.arange(len(self.periods)), self.periods)

    @cached_property
    def point_periods(self) -> np.ndarray:
        return np.repeat(self.periods, self.periods)

    @cached_property
    def point_weights(self) -> np.ndarray:
        return np.repeat(self.weights, self.periods)

    @cached_property
    def coordinates(self) -> np.ndarray:
        return np.asarray(self.numerators, dtype=float) / float(self.denominator)

    @cached_property
    def successors(self) -> np.ndarray:
        """Index of ``T(x)`` for every point ``x``."""
        index = np.arange(self.total_points)
        start = self.starts[:-1][self.orbit_ids]
        return start + (index - start + 1) % self.point_periods

    def point(self, index: int) -> RationalPoint:
        return RationalPoint.of(self.numerators[index].tolist(), self.denominator)

    @cached_property
    def orbits(self) -> tuple[PeriodicOrbit, ...]:
        return tuple(
            PeriodicOrbit(
                points=tuple(self.point(i) for i in range(int(start), int(stop))),
                period=int(m),
                weight=int(w),
            )
            for start, stop, m, w in zip(self.starts[:-1], self.starts[1:], self.periods, self.weights)
        )

    @cached_property
    def amplitude(self) -> float:
        return amplitude(self)

    def normalization(self) -> float:
        """``Σ_O m² A_n² / weight²``; equals 1 by construction of ``A_n``."""
        a2 = self.amplitude ** 2
        return fsum(float(m) ** 2 * a2 / float(w) ** 2 for m, w in zip(self.periods, self.weights))

    def info(self) -> dict:
        return dict(
            n=self.n,
            N=self.total_points,
            orbits=len(self),
            A_n=self.amplitude,
            **self.automorphism.info(),
        )


def _int_dtype(bound: int):
    return np.int64 if bound < 2 ** 62 else object


def enumerate_periodic_points(
        automorphism: ToralAutomorphism, n: int, *, budget: int = DEFAULT_BUDGET,
) -> OrbitTable:
    """Enumerate every period-``n`` point exactly and group the points into orbits.

    Args:
        automorphism (ToralAutomorphism): The map.
        n (int): The period, ``n >= 1``.
        budget (int, optional): Refuse when ``|det(M^n - I)|`` exceeds this. Defaults to ``5·10^6``.

    Returns:
        OrbitTable: The exact orbit table.

    Raises:
        PeriodTooLarge: when the point count exceeds ``budget``.
    """
    if n < 1:
        raise ValueError(f"Period must be at least 1, got {n!r}")

    d = automorphism.dimension
    b = minus_identity(automorphism.power(n))
    count = abs(det(b))
    if count > budget:
        raise PeriodTooLarge(f"{automorphism} n={n}: {count} periodic points exceed the budget of {budget}")

    smith = smith_normal_form(b)
    q = smith.diagonal[-1]
    dtype = _int_dtype(q * q * d)

    # x = Q D^{-1} z, written over the common denominator q.
    z = np.indices(smith.diagonal, dtype=np.int64).reshape(d, -1).T.astype(dtype)
    scale = np.array([q // f for f in smith.diagonal], dtype=dtype)
    q_mod = np.array([[v % q for v in row] for row in smith.Q], dtype=dtype)
    points = ((z * scale) @ q_mod.T) % q

    # Lexicographic order, which is also the order of the base-q keys.
    order = np.lexsort(tuple(points[:, i] for i in reversed(range(d))))
    points = points[order]
    key_dtype = _int_dtype(q ** d)
    radix = np.array([q ** (d - 1 - i) for i in range(d)], dtype=key_dtype)
    keys = points.astype(key_dtype) @ radix
    images = (points @ automorphism.array.astype(dtype).T) % q
    successor = np.searchsorted(keys, images.astype(key_dtype) @ radix).tolist()

    visited = bytearray(count)
    cycle_order: list[int] = []
    periods: list[int] = []
    for i in range(count):
        if visited[i]:
            continue
        length, j = 0, i
        while not visited[j]:
            visited[j] = 1
            cycle_order.append(j)
            length += 1
            j = successor[j]
        if n % length:
            raise RuntimeError(f"{automorphism} n={n}: cycle of length {length} does not divide the period")
        periods.append(length)

    periods_arr = np.array(periods, dtype=np.int64)
    table = OrbitTable(
        automorphism=automorphism,
        n=n,
        smith=smith,
        determinant=count,
        denominator=q,
        numerators=points[np.array(cycle_order, dtype=np.int64)],
        starts=np.concatenate(([0], np.cumsum(periods_arr))),
        periods=periods_arr,
        weights=np.full(len(periods), count, dtype=np.int64 if count < 2 ** 62 else object),
    )
    log_.info(f"{automorphism} [enumerate] ++ n={n} N={count} orbits={len(periods)}")
    return table


def birkhoff_sum(values: Sequence[float], n: int, m: int) -> float:
    """Birkhoff sum ``τ^n_O = (n/m) Σ_{x∈O} value(x)`` of one primitive cycle of length ``m``."""
    if n % m:
        raise ValueError(f"Primitive period {m} does not divide {n}")
    return n // m * fsum(values)


def birkhoff_sums(table: OrbitTable, values: np.ndarray) -> np.ndarray:
    """Point-wise Birkhoff sums ``Σ_{k<n} value(T^k x)`` by following the map ``n`` times."""
    values = np.asarray(values, dtype=float)
    total = np.zeros(table.total_points)
    current = np.arange(table.total_points)
    for _ in range(table.n):
        total += values[current]
        current = table.successors[current]
    return total


def amplitude(table: OrbitTable) -> float:
    """``A_n = (Σ_{x∈Per(n)} m_x / weight_x²)^{-1/2}``, summed exactly."""
    if not len(table):
        raise Degenerate("Empty orbit table")
    total = sum(
        (Fraction(int(m) ** 2 * k, int(w) ** 2) for (m, w), k in Counter(zip(table.periods.tolist(), table.weights.tolist())).items()),
        Fraction(0),
    )
    return 1.0 / sqrt(total)


def primitive_period(automorphism: ToralAutomorphism, point: RationalPoint, n: int) -> int:
    """Smallest divisor ``m`` of ``n`` with ``M^m x = x``, tested in increasing order."""
    for m in divisors(n):
        if point.apply(automorphism.power(m)) == point:
            return m
    raise ValueError(f"{point} is not a period-{n} point of {automorphism}")


def min_periodic_distance(table: OrbitTable, *, method: str = "lattice") -> float:
    """Smallest flat-torus distance between two distinct period-``n`` points.

    ``Per(n)`` is the group ``(M^n - I)^{-1} Z^d / Z^d``, so the answer is the shortest nonzero
    vector of that lattice. ``method="pairs"`` compares every pair instead.

    Raises:
        Degenerate: when the table holds fewer than two points.
    """
    if table.total_points < 2:
        raise Degenerate(f"{table}: at least two points are needed")

    q = table.denominator
    if method == "pairs":
        pts = table.numerators.astype(object if _int_dtype(q * q) is object else np.int64)
        best = None
        for i in range(table.total_points - 1):
            diff = (pts[i + 1:] - pts[i]) % q
            diff = np.where(2 * diff > q, diff - q, diff)
            norm = int((diff * diff).sum(axis=1).min())
            best = norm if best is None else min(best, norm)
        return sqrt(best) / q

    if method != "lattice":
        raise ValueError(f"Unknown method {method!r}")
    smith = table.smith
    basis = [
        tuple(smith.Q[row][col] * (q // smith.diagonal[col]) for row in range(table.dimension))
        for col in range(table.dimension)
    ]
    norm, _ = shortest_vector(basis)
    root = isqrt(norm)
    return float(root) / q if root * root == norm else sqrt(norm) / q


def separation_constant(
        automorphism: ToralAutomorphism, periods: Sequence[int], *, ratio: float = 1.05,
        budget: int = DEFAULT_BUDGET,
) -> float:
    """Fitted constant ``C = min_n d_min(n) Λ'^{n/2}`` with ``Λ' = ratio·Λ`` (not certified)."""
    lam = ratio * automorphism.Lambda
    return min(
        min_periodic_distance(enumerate_periodic_points(automorphism, n, budget=budget)) * lam ** (n / 2)
        for n in periods
    )


def periodic_point_count(automorphism: ToralAutomorphism, n: int) -> int:
    """``#Per(n) = |det(M^n - I)|`` as an exact integer."""
    return abs(det(minus_identity(automorphism.power(n))))


def primitive_counts(automorphism: ToralAutomorphism, n: int) -> dict[int, int]:
    """Number of points of primitive period ``m`` for every ``m | n``, by Möbius inversion."""
    counts = {d: periodic_point_count(automorphism, d) for d in divisors(n)}
    return {
        m: sum(mobius(m // d) * counts[d] for d in divisors(m))
        for m in divisors(n)
    }


def log_amplitude_from_counts(automorphism: ToralAutomorphism, n: int) -> float:
    """``log A_n`` from point counts alone, valid for any ``n`` (linear maps have constant weights)."""
    weight = periodic_point_count(automorphism, n)
    total = sum(m * p for m, p in primitive_counts(automorphism, n).items())
    return log(weight) - 0.5 * log(total)


def amplitude_from_counts(automorphism: ToralAutomorphism, n: int) -> float:
    return float(np.exp(log_amplitude_from_counts(automorphism, n)))
