"""Small dense linear algebra over exact rationals.

Matrices are numpy object arrays holding :class:`fractions.Fraction`.
Floats are converted exactly (every IEEE double is a dyadic rational).
"""

from fractions import Fraction

import numpy as np


def to_fraction(x):
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, str):
        return Fraction(x)
    return Fraction(float(x))


def fraction_array(a):
    """Return ``a`` as an object array of Fractions (exact conversion)."""
    arr = np.asarray(a, dtype=object)
    out = np.empty(arr.shape, dtype=object)
    for idx in np.ndindex(arr.shape):
        out[idx] = to_fraction(arr[idx])
    return out


def is_exact(a):
    arr = np.asarray(a, dtype=object)
    return all(isinstance(v, (Fraction, int, np.integer)) for v in arr.flat)


def det(a):
    """Exact determinant by Gaussian elimination with Fraction pivots."""
    m = fraction_array(a)
    n = m.shape[0]
    if m.shape != (n, n):
        raise ValueError("determinant needs a square matrix")
    m = [list(row) for row in m]
    sign = 1
    result = Fraction(1)
    for col in range(n):
        pivot = next((r for r in range(col, n) if m[r][col] != 0), None)
        if pivot is None:
            return Fraction(0)
        if pivot != col:
            m[col], m[pivot] = m[pivot], m[col]
            sign = -sign
        p = m[col][col]
        result *= p
        for r in range(col + 1, n):
            f = m[r][col]
            if f == 0:
                continue
            f = f / p
            row_r, row_c = m[r], m[col]
            for c in range(col + 1, n):
                row_r[c] -= f * row_c[c]
    return sign * result


def inverse(a):
    """Exact inverse by Gauss-Jordan elimination; raises ZeroDivisionError if singular."""
    m = fraction_array(a)
    n = m.shape[0]
    aug = [list(m[i]) + [Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if pivot is None:
            raise ZeroDivisionError("matrix is singular")
        aug[col], aug[pivot] = aug[pivot], aug[col]
        p = aug[col][col]
        aug[col] = [v / p for v in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [vr - f * vc for vr, vc in zip(aug[r], aug[col])]
    out = np.empty((n, n), dtype=object)
    for i in range(n):
        out[i] = aug[i][n:]
    return out


def rank(a):
    m = [list(row) for row in fraction_array(a)]
    rows = len(m)
    cols = len(m[0]) if rows else 0
    r = 0
    for col in range(cols):
        pivot = next((i for i in range(r, rows) if m[i][col] != 0), None)
        if pivot is None:
            continue
        m[r], m[pivot] = m[pivot], m[r]
        for i in range(r + 1, rows):
            if m[i][col] != 0:
                f = m[i][col] / m[r][col]
                m[i] = [vi - f * vr for vi, vr in zip(m[i], m[r])]
        r += 1
        if r == rows:
            break
    return r


def fraction_str(x):
    """Exact text form ``"p/q"`` (or ``"p"``) of a rational."""
    return str(to_fraction(x))
