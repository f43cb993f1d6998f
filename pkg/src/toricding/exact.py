"""Small exact linear algebra over the rationals.

Everything here works on lists of ``int``/``Fraction`` and never touches
floating point.  Matrices are lists of rows.
"""

from __future__ import annotations

from fractions import Fraction
from math import gcd, lcm
from typing import Sequence

Rational = Fraction | int


def as_fraction_matrix(rows: Sequence[Sequence[Rational]]) -> list[list[Fraction]]:
    return [[Fraction(x) for x in row] for row in rows]


def det(rows: Sequence[Sequence[Rational]]) -> Fraction:
    """Determinant by fraction-valued Gaussian elimination."""
    a = as_fraction_matrix(rows)
    n = len(a)
    if n == 0:
        return Fraction(1)
    sign = 1
    result = Fraction(1)
    for col in range(n):
        pivot = next((r for r in range(col, n) if a[r][col] != 0), None)
        if pivot is None:
            return Fraction(0)
        if pivot != col:
            a[col], a[pivot] = a[pivot], a[col]
            sign = -sign
        p = a[col][col]
        result *= p
        for r in range(col + 1, n):
            f = a[r][col] / p
            if f:
                row_r, row_c = a[r], a[col]
                for c in range(col + 1, n):
                    row_r[c] -= f * row_c[c]
    return sign * result


def int_det(rows: Sequence[Sequence[int]]) -> int:
    """Bareiss fraction-free determinant of an integer matrix."""
    a = [list(map(int, row)) for row in rows]
    n = len(a)
    if n == 0:
        return 1
    sign = 1
    prev = 1
    for k in range(n - 1):
        if a[k][k] == 0:
            swap = next((r for r in range(k + 1, n) if a[r][k] != 0), None)
            if swap is None:
                return 0
            a[k], a[swap] = a[swap], a[k]
            sign = -sign
        akk = a[k][k]
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * akk - a[i][k] * a[k][j]) // prev
        prev = akk
    return sign * a[n - 1][n - 1]


def rank(rows: Sequence[Sequence[Rational]]) -> int:
    a = as_fraction_matrix(rows)
    if not a:
        return 0
    m, n = len(a), len(a[0])
    r = 0
    for col in range(n):
        pivot = next((i for i in range(r, m) if a[i][col] != 0), None)
        if pivot is None:
            continue
        a[r], a[pivot] = a[pivot], a[r]
        for i in range(r + 1, m):
            f = a[i][col] / a[r][col]
            if f:
                for c in range(col, n):
                    a[i][c] -= f * a[r][c]
        r += 1
        if r == m:
            break
    return r


def solve(matrix: Sequence[Sequence[Rational]], rhs: Sequence[Rational]) -> list[Fraction]:
    """Solve a square system exactly.  Raises ``ZeroDivisionError`` if singular."""
    n = len(matrix)
    a = [[Fraction(x) for x in row] + [Fraction(b)] for row, b in zip(matrix, rhs)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if a[r][col] != 0), None)
        if pivot is None:
            raise ZeroDivisionError("singular system")
        a[col], a[pivot] = a[pivot], a[col]
        p = a[col][col]
        for r in range(n):
            if r != col and a[r][col] != 0:
                f = a[r][col] / p
                for c in range(col, n + 1):
                    a[r][c] -= f * a[col][c]
    return [a[i][n] / a[i][i] for i in range(n)]


def primitive(vec: Sequence[int]) -> tuple[int, ...]:
    g = 0
    for x in vec:
        g = gcd(g, int(x))
    if g == 0:
        return tuple(int(x) for x in vec)
    return tuple(int(x) // g for x in vec)


def clear_denominators(vec: Sequence[Rational]) -> tuple[int, ...]:
    """Scale a rational vector to an integer vector with the same direction."""
    fr = [Fraction(x) for x in vec]
    m = 1
    for x in fr:
        m = lcm(m, x.denominator)
    return tuple(int(x * m) for x in fr)


def hyperplane_normal(rows: Sequence[Sequence[Rational]], dim: int) -> tuple[int, ...] | None:
    """Primitive integer vector orthogonal to ``dim - 1`` given vectors.

    Uses the generalized cross product (signed maximal minors).  Returns
    ``None`` when the vectors are linearly dependent.
    """
    ints = [clear_denominators(r) for r in rows]
    if len(ints) != dim - 1:
        raise ValueError("need exactly dim - 1 vectors")
    normal = []
    for j in range(dim):
        minor = [[r[c] for c in range(dim) if c != j] for r in ints]
        normal.append((-1) ** j * int_det(minor))
    if not any(normal):
        return None
    return primitive(normal)


def dot(a: Sequence[Rational], b: Sequence[Rational]):
    return sum(x * y for x, y in zip(a, b))
