"""Small fixed-size matrix helpers: cofactor determinants and adjugates.

The regression pipeline applies adj{.} and det{.} to matrices of size at most
6x6 (the extended-regressor accumulator).  Cofactor expansion is used instead
of LU so that the result is a fixed algebraic expression of the entries with
no pivoting branches, satisfying adj{M} M = det{M} I exactly in structure and
to roundoff in floating point.  The inner helpers take explicit row/column
indices so no submatrix copies are made on the hot path.
"""

import numpy as np

from .accel import njit


@njit(cache=True, inline="always")
def _d2(a, r0, r1, c0, c1):
    return a[r0, c0] * a[r1, c1] - a[r0, c1] * a[r1, c0]


@njit(cache=True, inline="always")
def _d3(a, r0, r1, r2, c0, c1, c2):
    return (a[r0, c0] * _d2(a, r1, r2, c1, c2)
            - a[r0, c1] * _d2(a, r1, r2, c0, c2)
            + a[r0, c2] * _d2(a, r1, r2, c0, c1))


@njit(cache=True, inline="always")
def _d4(a, r0, r1, r2, r3, c0, c1, c2, c3):
    return (a[r0, c0] * _d3(a, r1, r2, r3, c1, c2, c3)
            - a[r0, c1] * _d3(a, r1, r2, r3, c0, c2, c3)
            + a[r0, c2] * _d3(a, r1, r2, r3, c0, c1, c3)
            - a[r0, c3] * _d3(a, r1, r2, r3, c0, c1, c2))


@njit(cache=True, inline="always")
def _d5(a, r0, r1, r2, r3, r4, c0, c1, c2, c3, c4):
    return (a[r0, c0] * _d4(a, r1, r2, r3, r4, c1, c2, c3, c4)
            - a[r0, c1] * _d4(a, r1, r2, r3, r4, c0, c2, c3, c4)
            + a[r0, c2] * _d4(a, r1, r2, r3, r4, c0, c1, c3, c4)
            - a[r0, c3] * _d4(a, r1, r2, r3, r4, c0, c1, c2, c4)
            + a[r0, c4] * _d4(a, r1, r2, r3, r4, c0, c1, c2, c3))


@njit(cache=True)
def det_n(a):
    """Determinant of a square matrix of size 1..6 by cofactor expansion."""
    n = a.shape[0]
    if n == 1:
        return a[0, 0]
    if n == 2:
        return _d2(a, 0, 1, 0, 1)
    if n == 3:
        return _d3(a, 0, 1, 2, 0, 1, 2)
    if n == 4:
        return _d4(a, 0, 1, 2, 3, 0, 1, 2, 3)
    if n == 5:
        return _d5(a, 0, 1, 2, 3, 4, 0, 1, 2, 3, 4)
    if n == 6:
        return (a[0, 0] * _d5(a, 1, 2, 3, 4, 5, 1, 2, 3, 4, 5)
                - a[0, 1] * _d5(a, 1, 2, 3, 4, 5, 0, 2, 3, 4, 5)
                + a[0, 2] * _d5(a, 1, 2, 3, 4, 5, 0, 1, 3, 4, 5)
                - a[0, 3] * _d5(a, 1, 2, 3, 4, 5, 0, 1, 2, 4, 5)
                + a[0, 4] * _d5(a, 1, 2, 3, 4, 5, 0, 1, 2, 3, 5)
                - a[0, 5] * _d5(a, 1, 2, 3, 4, 5, 0, 1, 2, 3, 4))
    raise ValueError("det_n supports sizes 1..6 only")


@njit(cache=True, inline="always")
def _minor5(a, i, j):
    # 5x5 minor of a 6x6 matrix, deleting row i and column j
    r0 = 0 + (0 >= i)
    r1 = 1 + (1 >= i)
    r2 = 2 + (2 >= i)
    r3 = 3 + (3 >= i)
    r4 = 4 + (4 >= i)
    c0 = 0 + (0 >= j)
    c1 = 1 + (1 >= j)
    c2 = 2 + (2 >= j)
    c3 = 3 + (3 >= j)
    c4 = 4 + (4 >= j)
    return _d5(a, r0, r1, r2, r3, r4, c0, c1, c2, c3, c4)


@njit(cache=True)
def adj6(a, out):
    """Adjugate of a 6x6 matrix: out[j, i] = (-1)^(i+j) * minor(i, j)."""
    for i in range(6):
        for j in range(6):
            m = _minor5(a, i, j)
            if (i + j) % 2 == 0:
                out[j, i] = m
            else:
                out[j, i] = -m


@njit(cache=True)
def adj_n(a, out):
    """Adjugate of a square matrix of size 1..6 (transpose of cofactors).

    The 1x1 adjugate is [[1]] (empty-minor convention), so adj{M} M = det{M} I
    holds for every size including scalars.
    """
    n = a.shape[0]
    if n == 1:
        out[0, 0] = 1.0
        return
    if n == 6:
        adj6(a, out)
        return
    for i in range(n):
        for j in range(n):
            if n == 2:
                m = a[(1 - i), (1 - j)]
            elif n == 3:
                r0 = 0 + (0 >= i)
                r1 = 1 + (1 >= i)
                c0 = 0 + (0 >= j)
                c1 = 1 + (1 >= j)
                m = _d2(a, r0, r1, c0, c1)
            elif n == 4:
                r0 = 0 + (0 >= i)
                r1 = 1 + (1 >= i)
                r2 = 2 + (2 >= i)
                c0 = 0 + (0 >= j)
                c1 = 1 + (1 >= j)
                c2 = 2 + (2 >= j)
                m = _d3(a, r0, r1, r2, c0, c1, c2)
            else:
                r0 = 0 + (0 >= i)
                r1 = 1 + (1 >= i)
                r2 = 2 + (2 >= i)
                r3 = 3 + (3 >= i)
                c0 = 0 + (0 >= j)
                c1 = 1 + (1 >= j)
                c2 = 2 + (2 >= j)
                c3 = 3 + (3 >= j)
                m = _d4(a, r0, r1, r2, r3, c0, c1, c2, c3)
            if (i + j) % 2 == 0:
                out[j, i] = m
            else:
                out[j, i] = -m


def det_cofactor(a) -> float:
    """Cofactor-expansion determinant (sizes 1..6)."""
    a = np.ascontiguousarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expected a square matrix")
    if a.shape[0] > 6:
        raise ValueError("det_cofactor supports sizes 1..6 only")
    return float(det_n(a))


def adjugate(a) -> np.ndarray:
    """Cofactor-expansion adjugate (sizes 1..6): adj{M} M = det{M} I."""
    a = np.ascontiguousarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expected a square matrix")
    if a.shape[0] > 6:
        raise ValueError("adjugate supports sizes 1..6 only")
    out = np.empty_like(a)
    adj_n(a, out)
    return out
