"""Exact integer linear algebra.

Everything here works on tuples of Python ints, so no intermediate ever overflows or rounds:
matrix powers, Bareiss determinants, Smith normal form with its unimodular transforms, and
lattice reduction for shortest-vector queries.
"""
from fractions import Fraction
from math import ceil, floor, sqrt
from typing import Sequence

from attrs import define, field

__all__ = (
    "IntMatrix", "IntVector",
    "as_matrix", "identity", "matmul", "matvec", "matpow", "minus_identity", "det",
    "SmithForm", "smith_normal_form",
    "gauss_reduce", "lll_reduce", "shortest_vector",
)

IntMatrix = tuple[tuple[int, ...], ...]
IntVector = tuple[int, ...]


def as_matrix(rows: Sequence[Sequence[int]]) -> IntMatrix:
    matrix = tuple(tuple(int(value) for value in row) for row in rows)
    if not matrix or any(len(row) != len(matrix) for row in matrix):
        raise ValueError(f"Expected a non-empty square matrix, got {rows!r}")
    for row, original in zip(matrix, rows):
        if any(value != raw for value, raw in zip(row, original)):
            raise ValueError(f"Matrix entries must be integers, got {rows!r}")
    return matrix


def identity(d: int) -> IntMatrix:
    return tuple(tuple(int(i == j) for j in range(d)) for i in range(d))


def matmul(a: IntMatrix, b: IntMatrix) -> IntMatrix:
    columns = tuple(zip(*b))
    return tuple(tuple(sum(x * y for x, y in zip(row, col)) for col in columns) for row in a)


def matvec(a: IntMatrix, v: Sequence[int]) -> IntVector:
    return tuple(sum(x * y for x, y in zip(row, v)) for row in a)


def matpow(a: IntMatrix, n: int) -> IntMatrix:
    """Exact matrix power by repeated squaring (``n >= 0``)."""
    if n < 0:
        raise ValueError(f"Negative power {n!r}")
    result, base = identity(len(a)), a
    while n:
        if n & 1:
            result = matmul(result, base)
        base = matmul(base, base)
        n >>= 1
    return result


def minus_identity(a: IntMatrix) -> IntMatrix:
    return tuple(tuple(x - int(i == j) for j, x in enumerate(row)) for i, row in enumerate(a))


def det(a: IntMatrix) -> int:
    """Determinant by fraction-free Bareiss elimination."""
    m = [list(row) for row in a]
    n, sign, prev = len(m), 1, 1
    for k in range(n - 1):
        if m[k][k] == 0:
            pivot = next((i for i in range(k + 1, n) if m[i][k] != 0), None)
            if pivot is None:
                return 0
            m[k], m[pivot] = m[pivot], m[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) // prev
        prev = m[k][k]
    return sign * m[-1][-1]


@define(frozen=True)
class SmithForm:
    """Smith normal form ``D = P·A·Q`` of a nonsingular square integer matrix.

    ``P`` and ``Q`` are unimodular, ``D`` is diagonal with positive entries, each dividing the next.
    """
    diagonal: IntVector
    P: IntMatrix
    Q: IntMatrix

    @property
    def D(self) -> IntMatrix:
        d = len(self.diagonal)
        return tuple(tuple(self.diagonal[i] if i == j else 0 for j in range(d)) for i in range(d))


def smith_normal_form(a: IntMatrix) -> SmithForm:
    """Compute the Smith normal form of a nonsingular square integer matrix.

    Args:
        a (IntMatrix): Square integer matrix with nonzero determinant.

    Returns:
        SmithForm: Invariant factors with the left and right transforms.
    """
    m = [list(row) for row in a]
    d = len(m)
    left = [list(row) for row in identity(d)]
    right = [list(row) for row in identity(d)]

    def swap_rows(i: int, j: int):
        m[i], m[j] = m[j], m[i]
        left[i], left[j] = left[j], left[i]

    def swap_cols(i: int, j: int):
        for row in m:
            row[i], row[j] = row[j], row[i]
        for row in right:
            row[i], row[j] = row[j], row[i]

    def add_row(dst: int, src: int, factor: int):
        m[dst] = [x + factor * y for x, y in zip(m[dst], m[src])]
        left[dst] = [x + factor * y for x, y in zip(left[dst], left[src])]

    def add_col(dst: int, src: int, factor: int):
        for row in m:
            row[dst] += factor * row[src]
        for row in right:
            row[dst] += factor * row[src]

    for s in range(d):
        while True:
            pivot = min(
                ((abs(m[i][j]), i, j) for i in range(s, d) for j in range(s, d) if m[i][j] != 0),
                default=None,
            )
            if pivot is None:
                raise ValueError("Matrix is singular")
            _, i, j = pivot
            if i != s:
                swap_rows(s, i)
            if j != s:
                swap_cols(s, j)

            clean = True
            for i in range(s + 1, d):
                if m[i][s]:
                    add_row(i, s, -(m[i][s] // m[s][s]))
                    clean = clean and m[i][s] == 0
            for j in range(s + 1, d):
                if m[s][j]:
                    add_col(j, s, -(m[s][j] // m[s][s]))
                    clean = clean and m[s][j] == 0
            if not clean:
                continue

            # Every remaining entry must be a multiple of the pivot.
            stray = next(
                (i for i in range(s + 1, d) for j in range(s + 1, d) if m[i][j] % m[s][s]),
                None,
            )
            if stray is None:
                break
            add_row(s, stray, 1)

        if m[s][s] < 0:
            m[s] = [-x for x in m[s]]
            left[s] = [-x for x in left[s]]

    return SmithForm(
        diagonal=tuple(m[i][i] for i in range(d)),
        P=tuple(map(tuple, left)),
        Q=tuple(map(tuple, right)),
    )


def _dot(u: Sequence, v: Sequence):
    return sum(x * y for x, y in zip(u, v))


def _round_div(num: int, den: int) -> int:
    """Nearest integer to ``num / den`` for ``den > 0``."""
    return (2 * num + den) // (2 * den)


def gauss_reduce(u: IntVector, v: IntVector) -> tuple[IntVector, IntVector]:
    """Lagrange-Gauss reduction of a 2-dimensional lattice basis.

    The first returned vector is a shortest nonzero lattice vector.
    """
    if _dot(u, u) > _dot(v, v):
        u, v = v, u
    while True:
        k = _round_div(_dot(u, v), _dot(u, u))
        v = tuple(y - k * x for x, y in zip(u, v))
        if _dot(v, v) >= _dot(u, u):
            return u, v
        u, v = v, u


def _gram_schmidt(basis: list[list[int]]) -> tuple[list[list[Fraction]], list[list[Fraction]]]:
    stars: list[list[Fraction]] = []
    mu = [[Fraction(0)] * len(basis) for _ in basis]
    for i, b in enumerate(basis):
        star = [Fraction(x) for x in b]
        for j in range(i):
            mu[i][j] = Fraction(_dot(b, stars[j])) / _dot(stars[j], stars[j])
            star = [x - mu[i][j] * y for x, y in zip(star, stars[j])]
        stars.append(star)
    return stars, mu


def lll_reduce(basis: Sequence[IntVector], delta: Fraction = Fraction(3, 4)) -> list[IntVector]:
    """Exact LLL reduction of a lattice basis given as rows."""
    b = [list(v) for v in basis]
    stars, mu = _gram_schmidt(b)
    k = 1
    while k < len(b):
        for j in range(k - 1, -1, -1):
            q = floor(mu[k][j] + Fraction(1, 2))
            if q:
                b[k] = [x - q * y for x, y in zip(b[k], b[j])]
                stars, mu = _gram_schmidt(b)
        if _dot(stars[k], stars[k]) >= (delta - mu[k][k - 1] ** 2) * _dot(stars[k - 1], stars[k - 1]):
            k += 1
        else:
            b[k], b[k - 1] = b[k - 1], b[k]
            stars, mu = _gram_schmidt(b)
            k = max(k - 1, 1)
    return [tuple(v) for v in b]


def shortest_vector(basis: Sequence[IntVector]) -> tuple[int, IntVector]:
    """Shortest nonzero vector of a full-rank integer lattice.

    Two-dimensional lattices use Gauss reduction; higher dimensions run LLL followed by an
    exhaustive Fincke-Pohst enumeration, with candidate norms compared exactly.

    Args:
        basis (Sequence[IntVector]): Lattice basis as rows.

    Returns:
        tuple[int, IntVector]: Squared norm and a shortest vector.
    """
    if len(basis) == 1:
        v = tuple(basis[0])
        return _dot(v, v), v
    if len(basis) == 2:
        u, _ = gauss_reduce(tuple(basis[0]), tuple(basis[1]))
        return _dot(u, u), u

    b = lll_reduce(basis)
    n = len(b)
    best_vec = min(b, key=lambda v: _dot(v, v))
    best = _dot(best_vec, best_vec)
    stars, mu = _gram_schmidt([list(v) for v in b])
    norms = [float(_dot(s, s)) for s in stars]
    mu_f = [[float(x) for x in row] for row in mu]
    coeffs = [0] * n

    def search(i: int, partial: float):
        nonlocal best, best_vec
        centre = -sum(coeffs[j] * mu_f[j][i] for j in range(i + 1, n))
        radius = sqrt(max(best * (1 + 1e-9) - partial, 0.0) / norms[i])
        for x in range(ceil(centre - radius - 1e-9), floor(centre + radius + 1e-9) + 1):
            coeffs[i] = x
            step = partial + (x - centre) ** 2 * norms[i]
            if step > best * (1 + 1e-9):
                continue
            if i:
                search(i - 1, step)
            elif any(coeffs):
                v = tuple(sum(c * b[j][t] for j, c in enumerate(coeffs)) for t in range(len(b[0])))
                if (norm := _dot(v, v)) < best:
                    best, best_vec = norm, v
        coeffs[i] = 0

    search(n - 1, 0.0)
    return best, best_vec
