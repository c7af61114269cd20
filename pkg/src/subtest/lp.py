"""Exact rational linear algebra: a dense simplex tableau with Bland's rule,
rank, and null vectors."""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence


class Unbounded(Exception):
    pass


def maximize(c: Sequence, A: Sequence[Sequence], b: Sequence) -> tuple:
    """Maximize ``c.x`` subject to ``A x <= b``, ``x >= 0`` with ``b >= 0``.

    Returns ``(x, value)`` in exact arithmetic.  The origin is feasible, so a
    single phase suffices; Bland's smallest-index rule prevents cycling.
    """
    m, n = len(A), len(c)
    if any(bi < 0 for bi in b):
        raise ValueError("right-hand side must be nonnegative")
    width = n + m
    rows = []
    for i in range(m):
        row = [Fraction(v) for v in A[i]] + [Fraction(0)] * m + [Fraction(b[i])]
        row[n + i] = Fraction(1)
        rows.append(row)
    # objective row holds reduced costs c_j - z_j; value stored negated at the end
    obj = [Fraction(v) for v in c] + [Fraction(0)] * m + [Fraction(0)]
    basis = [n + i for i in range(m)]

    while True:
        enter = next((j for j in range(width) if obj[j] > 0), None)
        if enter is None:
            break
        leave, best = None, None
        for i in range(m):
            a = rows[i][enter]
            if a > 0:
                ratio = rows[i][-1] / a
                if best is None or ratio < best or (ratio == best and basis[i] < basis[leave]):
                    leave, best = i, ratio
        if leave is None:
            raise Unbounded("objective is unbounded")
        _pivot(rows, obj, leave, enter)
        basis[leave] = enter

    x = [Fraction(0)] * n
    for i, j in enumerate(basis):
        if j < n:
            x[j] = rows[i][-1]
    value = sum((Fraction(ci) * xi for ci, xi in zip(c, x)), Fraction(0))
    return x, value


def _pivot(rows, obj, r, s):
    prow = rows[r]
    piv = prow[s]
    if piv != 1:
        inv = 1 / piv
        prow[:] = [v * inv if v else v for v in prow]
    nz = [j for j, v in enumerate(prow) if v]
    for row in rows + [obj]:
        if row is prow:
            continue
        f = row[s]
        if f:
            for j in nz:
                row[j] -= f * prow[j]


def rref(M: Sequence[Sequence]) -> tuple:
    """Reduced row echelon form and pivot columns of a rational matrix."""
    R = [[Fraction(v) for v in row] for row in M]
    ncols = len(R[0]) if R else 0
    pivots = []
    r = 0
    for col in range(ncols):
        pr = next((i for i in range(r, len(R)) if R[i][col] != 0), None)
        if pr is None:
            continue
        R[r], R[pr] = R[pr], R[r]
        inv = 1 / R[r][col]
        R[r] = [v * inv for v in R[r]]
        for i in range(len(R)):
            if i != r and R[i][col] != 0:
                f = R[i][col]
                R[i] = [a - f * b for a, b in zip(R[i], R[r])]
        pivots.append(col)
        r += 1
        if r == len(R):
            break
    return R, pivots


def rank(M: Sequence[Sequence]) -> int:
    if not M or not M[0]:
        return 0
    return len(rref(M)[1])


def null_vector(M: Sequence[Sequence]):
    """A nonzero rational ``c`` with ``M c = 0``, or ``None`` if columns are independent."""
    if not M:
        return None
    ncols = len(M[0])
    R, pivots = rref(M)
    free = [j for j in range(ncols) if j not in pivots]
    if not free:
        return None
    f = free[0]
    c = [Fraction(0)] * ncols
    c[f] = Fraction(1)
    for i, pc in enumerate(pivots):
        c[pc] = -R[i][f]
    return c
