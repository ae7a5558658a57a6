"""k-general position of tuples of symplectic matrices.

A tuple ``(s_1, ..., s_d)`` of 2n x 2n symplectic matrices, with
``d = homogeneous_dim(2n, k)``, is k-general when the polynomials
``x_1^k o s_j`` form a basis of the degree-k homogeneous polynomials.  The
test matrix has column ``j`` equal to the coefficient vector of
``(row_1(s_j) . z)^k`` in graded-lex order; membership is ``det != 0``.

Certificates are exact when every matrix entry is rational (ints,
Fractions, or floats converted exactly); the float determinant is only
advisory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.linalg import qr

from . import exact
from .errors import CertificationError, ShapeError
from .jets import homogeneous_dim, multidegrees
from .symplectic import symplectic_defect


def expand_F_sigma(sigma, k: int):
    """Coefficients of ``(row_1(sigma) . z)^k`` over the degree-k monomials.

    Uses the multinomial theorem; exact when ``sigma`` is an object array
    of rationals.
    """
    sigma = np.asarray(sigma)
    row = sigma[0]
    m = row.shape[0]
    exact_mode = sigma.dtype == object
    out = []
    for alpha in multidegrees(m, k, homogeneous=True):
        coeff = math.factorial(k)
        for a in alpha:
            coeff //= math.factorial(a)
        term = Fraction(coeff) if exact_mode else float(coeff)
        for r, a in zip(row, alpha):
            if a:
                term = term * r ** a
        out.append(term)
    return np.array(out, dtype=object if exact_mode else float)


@dataclass
class GkCertificate:
    n: int
    k: int
    matrices: list
    coefficient_matrix: np.ndarray
    determinant: object
    mode: str  # "exact" or "float"
    verdict: bool
    float_determinant: float = 0.0
    times: list = field(default_factory=list)

    def to_json(self):
        def enc(v):
            return exact.fraction_str(v) if self.mode == "exact" else float(v)

        return {
            "n": self.n,
            "k": self.k,
            "d": homogeneous_dim(2 * self.n, self.k),
            "mode": self.mode,
            "verdict": bool(self.verdict),
            "determinant": enc(self.determinant),
            "float_determinant": float(self.float_determinant),
            "times": [enc(t) if self.mode == "exact" else float(t) for t in self.times],
            "matrices": [[[enc(v) for v in row] for row in np.asarray(s)] for s in self.matrices],
            "coefficient_matrix": [[enc(v) for v in row] for row in self.coefficient_matrix],
        }


def _float_det_scale(a):
    a = np.asarray(a, dtype=float)
    norms = np.linalg.norm(a, axis=0)
    return float(np.prod(norms)) if norms.size else 1.0


def is_k_general_tuple(matrices, k: int, exact_mode: bool | None = None, tol=1e-12) -> GkCertificate:
    """Certify whether ``matrices`` is in G_k.

    With ``exact_mode`` unset the mode is exact iff all entries are rational
    objects.  ``exact_mode=True`` converts float entries exactly, giving a
    certificate about the stored numbers.
    """
    mats = [np.asarray(s) for s in matrices]
    if not mats:
        raise ShapeError("empty tuple")
    dim = mats[0].shape[0]
    if dim % 2 or any(s.shape != (dim, dim) for s in mats):
        raise ShapeError("all matrices must be 2n x 2n")
    n = dim // 2
    d = homogeneous_dim(dim, k)
    if len(mats) != d:
        raise ShapeError(f"G_k tuples for n={n}, k={k} have {d} matrices, got {len(mats)}")
    if exact_mode is None:
        exact_mode = all(exact.is_exact(s) for s in mats)
    if exact_mode:
        mats = [exact.fraction_array(s) for s in mats]
    a = np.column_stack([expand_F_sigma(s, k) for s in mats])
    with np.errstate(all="ignore"):
        fdet = float(np.linalg.det(np.asarray(a, dtype=float)))
    if exact_mode:
        det = exact.det(a)
        verdict = det != 0
        mode = "exact"
    else:
        det = fdet
        verdict = abs(fdet) > tol * _float_det_scale(a)
        mode = "float"
    return GkCertificate(n, k, mats, a, det, mode, bool(verdict), fdet)


def witness_exponents(n: int, k: int):
    """Powers ``p_i = sum_{j=0}^{i-2} k^j`` for ``i = 2..2n`` (``a_1 = 1``)."""
    return [sum(k ** j for j in range(i - 1)) for i in range(2, 2 * n + 1)]


def construct_witness(n: int, k: int, t):
    """Block matrix ``[[A, B], [0, A^{-T}]]`` with first row ``(1, t^p_2, ..., t^p_2n)``.

    ``A`` is the identity with first row ``(1, a_2..a_n)``; ``B`` has first
    row ``(a_{n+1}..a_{2n})``, identity lower-right block and first column
    ``(a_{n+1}, b_2..b_n)`` with ``b_i = a_{n+i} - a_i``, which makes
    ``A^{-1} B`` symmetric.  Rational ``t`` gives an exact matrix.
    """
    if t <= 0:
        raise ValueError("witness parameter must be positive")
    exact_mode = isinstance(t, (int, Fraction))
    one = Fraction(1) if exact_mode else 1.0
    zero = Fraction(0) if exact_mode else 0.0
    t = Fraction(t) if exact_mode else float(t)
    a = [None, one] + [t ** p for p in witness_exponents(n, k)]  # 1-based: a[1..2n]
    dtype = object if exact_mode else float
    A = np.array([[one if i == j else zero for j in range(n)] for i in range(n)], dtype=dtype)
    B = np.array([[one if i == j else zero for j in range(n)] for i in range(n)], dtype=dtype)
    for j in range(2, n + 1):
        A[0, j - 1] = a[j]
    B[0, 0] = a[n + 1]
    for j in range(2, n + 1):
        B[0, j - 1] = a[n + j]
        B[j - 1, 0] = a[n + j] - a[j]
    a_inv_t = (exact.inverse(A) if exact_mode else np.linalg.inv(A)).T
    sigma = np.empty((2 * n, 2 * n), dtype=dtype)
    sigma[:n, :n] = A
    sigma[:n, n:] = B
    sigma[n:, :n] = zero
    sigma[n:, n:] = a_inv_t
    defect = symplectic_defect(sigma)
    scale = max(1.0, float(np.max(np.abs(sigma.astype(float))))) ** 2
    if (exact_mode and defect != 0) or (not exact_mode and defect > 1e-12 * scale):
        raise CertificationError(f"witness matrix failed the symplectic check (defect {defect})")
    return sigma


def witness_is_symmetric(n: int, k: int, t) -> bool:
    """Exact check that ``A^{-1} B`` is symmetric for the witness blocks."""
    s = construct_witness(n, k, Fraction(t))
    A, B = s[:n, :n], s[:n, n:]
    c = exact.inverse(A) @ B
    return all(c[i, j] == c[j, i] for i in range(n) for j in range(n))


def find_witness_times(n: int, k: int, budget: int = 200):
    """Search distinct small positive integers ``t_1 < ... < t_d`` until the
    witness tuple is certified k-general (exact determinant).

    Returns ``(times, certificate)``.
    """
    d = homogeneous_dim(2 * n, k)
    candidates = list(range(1, d + 1))
    tried = 0
    nxt = d + 1
    while tried < budget:
        tried += 1
        mats = [construct_witness(n, k, Fraction(t)) for t in candidates]
        cert = is_k_general_tuple(mats, k, exact_mode=True)
        if cert.verdict:
            cert.times = [Fraction(t) for t in candidates]
            return [Fraction(t) for t in candidates], cert
        # swap out the smallest value and retry
        candidates = candidates[1:] + [nxt]
        nxt += 1
    raise CertificationError(f"no k-general witness tuple found within {budget} candidates")


@dataclass
class FamilyVerdict:
    verdict: bool
    rank: int
    d: int
    times: list
    indices: list
    certificate: GkCertificate | None
    pivots: list


def is_k_general_family(samples, k: int, rtol=1e-9, exact_recheck=True) -> FamilyVerdict:
    """Decide whether a sampled family ``[(t, sigma_t), ...]`` is k-general.

    Columns are ranked greedily with column-pivoted QR; the family is
    k-general iff the numerical rank reaches ``d``.  The selected tuple is
    re-certified in exact arithmetic on the stored float entries.
    """
    samples = list(samples)
    if not samples:
        raise ShapeError("no samples")
    dim = np.asarray(samples[0][1]).shape[0]
    d = homogeneous_dim(dim, k)
    if len(samples) < d:
        raise ShapeError(f"need at least d={d} samples, got {len(samples)}")
    cols = np.column_stack([expand_F_sigma(np.asarray(s, dtype=float), k) for _, s in samples])
    scale = np.linalg.norm(cols, axis=0)
    scale[scale == 0] = 1.0
    _, r, piv = qr(cols / scale, pivoting=True, mode="economic")
    diag = np.abs(np.diag(r))
    rank = int(np.sum(diag > rtol * (diag[0] if diag.size and diag[0] > 0 else 1.0)))
    rank = min(rank, d)
    chosen = sorted(int(p) for p in piv[:d])
    times = [samples[i][0] for i in chosen]
    cert = None
    if rank == d and exact_recheck:
        cert = is_k_general_tuple([np.asarray(samples[i][1], dtype=float) for i in chosen], k,
                                  exact_mode=True)
        cert.times = list(times)
    verdict = rank == d and (cert is None or cert.verdict)
    return FamilyVerdict(bool(verdict), rank, d, times, chosen, cert, [float(x) for x in diag])
