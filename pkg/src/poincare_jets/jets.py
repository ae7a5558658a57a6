"""Truncated multivariate polynomials ("jets") and jets of maps fixing the origin.

A :class:`Jet` in ``m`` variables of order ``k`` stores every coefficient of
total degree ``<= k`` in one dense vector.  Monomials are ranked in graded
lexicographic order: by total degree first, then lexicographically
*descending* on the exponent tuple, so in two variables the order is::

    1, x, y, x^2, xy, y^2, x^3, x^2 y, ...

The same order is used by every coefficient vector in the package (G_k
matrices, submersion rows, JSON files).

Coefficients may be ``float64``, ``complex128`` or exact ``Fraction`` objects
(numpy ``object`` arrays).  All values are treated as immutable.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import cached_property, lru_cache

import numpy as np

from . import exact
from .errors import ShapeError, SingularJetError

__all__ = [
    "Basis",
    "Jet",
    "JetMap",
    "basis",
    "homogeneous_dim",
    "multidegrees",
    "jet_mul",
    "jet_compose",
    "jet_invert",
    "homogeneous_component",
    "exp",
    "sin",
    "cos",
    "sqrt",
    "reciprocal",
]


def homogeneous_dim(m: int, k: int) -> int:
    """Number of monomials of total degree ``k`` in ``m`` variables."""
    if m < 1 or k < 0:
        raise ValueError(f"homogeneous_dim needs m >= 1 and k >= 0, got ({m}, {k})")
    return math.comb(m - 1 + k, k)


def _homogeneous_exponents(m, k):
    if m == 1:
        yield (k,)
        return
    for first in range(k, -1, -1):
        for rest in _homogeneous_exponents(m - 1, k - first):
            yield (first,) + rest


def multidegrees(m: int, k: int, homogeneous: bool = False) -> list[tuple[int, ...]]:
    """Exponent tuples in the library's graded-lex order.

    With ``homogeneous=True`` only total degree ``k`` is listed, otherwise
    every degree ``0..k``.
    """
    if homogeneous:
        return list(_homogeneous_exponents(m, k))
    return [e for d in range(k + 1) for e in _homogeneous_exponents(m, d)]


class Basis:
    """Monomial ranking and the index tables used by jet arithmetic."""

    def __init__(self, m: int, k: int):
        if m < 1 or k < 0:
            raise ShapeError(f"invalid jet shape m={m}, k={k}")
        self.m = m
        self.k = k
        exps = multidegrees(m, k)
        self.exponents = np.array(exps, dtype=np.int64).reshape(len(exps), m)
        self.degrees = self.exponents.sum(axis=1)
        self.size = len(exps)
        self.index = {e: i for i, e in enumerate(exps)}
        dims = [homogeneous_dim(m, d) for d in range(k + 1)]
        self.offsets = np.concatenate([[0], np.cumsum(dims)]).astype(np.int64)
        radix = (k + 1) ** np.arange(m, dtype=np.int64)
        self._radix = radix
        self._keys = self.exponents @ radix
        self._key_order = np.argsort(self._keys)
        self._sorted_keys = self._keys[self._key_order]

    def __repr__(self):
        return f"Basis(m={self.m}, k={self.k})"

    def rank_of_keys(self, keys):
        pos = np.searchsorted(self._sorted_keys, keys)
        return self._key_order[pos]

    def degree_slice(self, j):
        return slice(int(self.offsets[j]), int(self.offsets[j + 1]))

    @cached_property
    def mul_table(self):
        """Index triples ``(i, j, out)`` with ``deg i + deg j <= k``."""
        ii, jj = [], []
        for d in range(self.k + 1):
            rows = np.arange(self.offsets[d], self.offsets[d + 1])
            cols = np.arange(self.offsets[self.k - d + 1])
            r, c = np.meshgrid(rows, cols, indexing="ij")
            ii.append(r.ravel())
            jj.append(c.ravel())
        ii = np.concatenate(ii)
        jj = np.concatenate(jj)
        out = self.rank_of_keys(self._keys[ii] + self._keys[jj])
        return ii, jj, out

    @cached_property
    def parents(self):
        """For each nonconstant monomial: (index of monomial / x_var, var)."""
        var = np.argmax(self.exponents > 0, axis=1)
        parent = np.zeros(self.size, dtype=np.int64)
        nz = np.arange(1, self.size)
        parent[nz] = self.rank_of_keys(self._keys[nz] - self._radix[var[nz]])
        return parent, var

    @lru_cache(maxsize=None)
    def derivative_table(self, i):
        src = np.nonzero(self.exponents[:, i] > 0)[0]
        dst = self.rank_of_keys(self._keys[src] - self._radix[i])
        return src, dst, self.exponents[src, i].copy()

    @lru_cache(maxsize=None)
    def antiderivative_table(self, i):
        src = np.nonzero(self.degrees < self.k)[0]
        dst = self.rank_of_keys(self._keys[src] + self._radix[i])
        return src, dst, self.exponents[src, i] + 1


@lru_cache(maxsize=None)
def basis(m: int, k: int) -> Basis:
    return Basis(m, k)


def _zeros(n, dtype):
    if dtype == object:
        return np.array([Fraction(0)] * n, dtype=object)
    return np.zeros(n, dtype=dtype)


def _mul_coeffs(b: Basis, x, y):
    ii, jj, out = b.mul_table
    prod = x[ii] * y[jj]
    if prod.dtype == object:
        res = _zeros(b.size, object)
        np.add.at(res, out, prod)
        return res
    if np.iscomplexobj(prod):
        return (np.bincount(out, prod.real, minlength=b.size)
                + 1j * np.bincount(out, prod.imag, minlength=b.size))
    return np.bincount(out, prod, minlength=b.size)


def _monomial_table(n_vars, g_basis: Basis, g_coeffs):
    """Coefficient rows of every monomial of ``g`` up to ``g_basis.k``.

    ``g_coeffs`` has one row per variable of the outer function and must
    have zero constant terms.
    """
    src = basis(n_vars, g_basis.k)
    parent, var = src.parents
    dtype = g_coeffs.dtype
    mono = np.empty((src.size, g_basis.size), dtype=dtype)
    mono[0] = _zeros(g_basis.size, dtype)
    mono[0, 0] = Fraction(1) if dtype == object else 1
    for idx in range(1, src.size):
        mono[idx] = _mul_coeffs(g_basis, mono[parent[idx]], g_coeffs[var[idx]])
    return mono


def _common_dtype(*arrays):
    if any(a.dtype == object for a in arrays):
        return object
    return np.result_type(*arrays)


def _is_scalar(x):
    return not isinstance(x, (Jet, JetMap))


class Jet:
    """Truncated polynomial in ``m`` variables up to total degree ``k``."""

    __slots__ = ("basis", "coeffs")
    __array_priority__ = 100

    def __init__(self, b: Basis, coeffs):
        coeffs = np.asarray(coeffs)
        if coeffs.shape != (b.size,):
            raise ShapeError(f"{b} expects {b.size} coefficients, got shape {coeffs.shape}")
        self.basis = b
        self.coeffs = coeffs

    # construction -----------------------------------------------------
    @classmethod
    def zeros(cls, m, k, dtype=float):
        b = basis(m, k)
        return cls(b, _zeros(b.size, dtype))

    @classmethod
    def constant(cls, value, m, k, dtype=None):
        b = basis(m, k)
        dtype = dtype or (object if isinstance(value, Fraction) else np.result_type(value, float))
        c = _zeros(b.size, dtype)
        c[0] = value
        return cls(b, c)

    @classmethod
    def variable(cls, i, m, k, value=0.0, dtype=None):
        """The jet of ``x_i`` expanded about ``x_i = value``."""
        b = basis(m, k)
        dtype = dtype or (object if isinstance(value, Fraction) else float)
        c = _zeros(b.size, dtype)
        c[0] = exact.to_fraction(value) if dtype == object else value
        if k >= 1:
            c[1 + i] = Fraction(1) if dtype == object else 1
        return cls(b, c)

    @classmethod
    def from_terms(cls, terms, m, k, dtype=None):
        """Build from ``{exponent tuple: coefficient}``; terms above degree k are dropped."""
        b = basis(m, k)
        if dtype is None:
            vals = list(terms.values())
            dtype = object if any(isinstance(v, Fraction) for v in vals) else (
                complex if any(isinstance(v, complex) for v in vals) else float)
        c = _zeros(b.size, dtype)
        for e, v in terms.items():
            e = tuple(int(x) for x in e)
            if len(e) != m:
                raise ShapeError(f"exponent {e} has wrong length for m={m}")
            if sum(e) <= k:
                c[b.index[e]] += v
        return cls(b, c)

    # shape ---------------------------------------------------------------
    @property
    def var_count(self):
        return self.basis.m

    @property
    def order(self):
        return self.basis.k

    @property
    def constant_term(self):
        return self.coeffs[0]

    def _check(self, other):
        if other.basis is not self.basis:
            raise ShapeError(f"jet shapes differ: {self.basis} vs {other.basis}")

    def terms(self):
        """Nonzero ``(exponents, coefficient)`` pairs in canonical order."""
        ex = self.basis.exponents
        return [(tuple(int(v) for v in ex[i]), self.coeffs[i])
                for i in range(self.basis.size) if self.coeffs[i] != 0]

    # arithmetic ----------------------------------------------------------
    def __add__(self, other):
        if _is_scalar(other):
            c = self.coeffs.copy() if self.coeffs.dtype == object else self.coeffs.astype(
                np.result_type(self.coeffs, other), copy=True)
            c[0] = c[0] + other
            return Jet(self.basis, c)
        self._check(other)
        return Jet(self.basis, self.coeffs + other.coeffs)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.basis, -self.coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if _is_scalar(other):
            return Jet(self.basis, self.coeffs * other)
        self._check(other)
        return Jet(self.basis, _mul_coeffs(self.basis, self.coeffs, other.coeffs))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if _is_scalar(other):
            if self.coeffs.dtype == object and isinstance(other, (int, Fraction)):
                return Jet(self.basis, self.coeffs * Fraction(1) / other)
            return Jet(self.basis, self.coeffs / other)
        return self * reciprocal(other)

    def __rtruediv__(self, other):
        return reciprocal(self) * other

    def __pow__(self, n):
        if not isinstance(n, (int, np.integer)) or n < 0:
            raise ValueError("jets support only non-negative integer powers")
        one = _zeros(self.basis.size, self.coeffs.dtype)
        one[0] = 1
        result = Jet(self.basis, one)
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    # calculus ------------------------------------------------------------
    def derivative(self, i):
        """Partial derivative in ``x_i``; same shape, top degree becomes zero."""
        src, dst, fac = self.basis.derivative_table(i)
        c = _zeros(self.basis.size, self.coeffs.dtype)
        c[dst] = self.coeffs[src] * fac
        return Jet(self.basis, c)

    def integrate(self, i):
        """Antiderivative in ``x_i`` vanishing at ``x_i = 0``, truncated to the same order."""
        src, dst, fac = self.basis.antiderivative_table(i)
        c = _zeros(self.basis.size, self.coeffs.dtype)
        if self.coeffs.dtype == object:
            c[dst] = [v / int(f) for v, f in zip(self.coeffs[src], fac)]
        else:
            c[dst] = self.coeffs[src] / fac
        return Jet(self.basis, c)

    def gradient(self):
        return [self.derivative(i) for i in range(self.var_count)]

    # truncation & components ------------------------------------------------
    def truncate(self, order):
        if order > self.order:
            return self.extend(order)
        b = basis(self.var_count, order)
        return Jet(b, self.coeffs[: b.size].copy())

    def extend(self, order):
        """Same polynomial viewed as a jet of higher order (new coefficients zero)."""
        b = basis(self.var_count, order)
        c = _zeros(b.size, self.coeffs.dtype)
        c[: self.basis.size] = self.coeffs
        return Jet(b, c)

    def homogeneous(self, j):
        return homogeneous_component(self, j)

    def low_order_zero(self, through):
        """True if every coefficient of degree <= ``through`` vanishes."""
        return not np.any(self.coeffs[: self.basis.offsets[through + 1]] != 0)

    # evaluation ------------------------------------------------------------
    def evaluate(self, args):
        """Evaluate the polynomial at ``args`` (numbers or Jets with any constants)."""
        if len(args) != self.var_count:
            raise ShapeError(f"expected {self.var_count} arguments, got {len(args)}")
        parent, var = self.basis.parents
        vals = [None] * self.basis.size
        vals[0] = 1
        total = 0
        if self.coeffs[0] != 0:
            total = self.coeffs[0]
        for idx in range(1, self.basis.size):
            p = vals[parent[idx]]
            a = args[var[idx]]
            vals[idx] = a if parent[idx] == 0 else p * a
            c = self.coeffs[idx]
            if c != 0:
                total = total + c * vals[idx]
        return total

    __call__ = evaluate

    def compose(self, args):
        """Substitute jets with zero constant term for the variables."""
        g = JetMap.from_components(args)
        f = JetMap(self.basis, self.coeffs[None, :])
        return f.compose(g)[0]

    def apply_series(self, series):
        """Return ``sum_j series[j] * (self - self(0))**j`` (Taylor series at the constant)."""
        h = self - self.coeffs[0]
        h.coeffs[0] = 0
        k = self.order
        dtype = np.result_type(self.coeffs.dtype, np.asarray(series[: k + 1]).dtype) \
            if self.coeffs.dtype != object else object
        result = Jet(self.basis, _zeros(self.basis.size, dtype))
        result.coeffs[0] = series[k]
        for j in range(k - 1, -1, -1):
            result = result * h
            result.coeffs[0] += series[j]
        return result

    # comparison & io -----------------------------------------------------
    def max_abs(self):
        return float(np.max(np.abs(self.coeffs.astype(complex)))) if self.basis.size else 0.0

    def allclose(self, other, atol=1e-12):
        self._check(other)
        return float(np.max(np.abs((self.coeffs - other.coeffs).astype(complex)))) <= atol

    def to_json(self):
        exact_mode = self.coeffs.dtype == object
        entries = []
        for e, c in self.terms():
            entries.append([list(e), exact.fraction_str(c) if exact_mode else float(c)])
        return {"var_count": self.var_count, "order": self.order,
                "exact": exact_mode, "entries": entries}

    @classmethod
    def from_json(cls, data):
        exact_mode = bool(data.get("exact", False))
        terms = {}
        for e, c in data["entries"]:
            terms[tuple(e)] = Fraction(c) if exact_mode else float(c)
        return cls.from_terms(terms, int(data["var_count"]), int(data["order"]),
                              dtype=object if exact_mode else float)

    def __repr__(self):
        return f"Jet(m={self.var_count}, k={self.order}, terms={self.terms()!r})"


class JetMap:
    """A tuple of jets sharing one basis: the jet of a map R^m -> R^m'."""

    __slots__ = ("basis", "coeffs")
    __array_priority__ = 100

    def __init__(self, b: Basis, coeffs):
        coeffs = np.asarray(coeffs)
        if coeffs.ndim != 2 or coeffs.shape[1] != b.size:
            raise ShapeError(f"{b} expects (m', {b.size}) coefficients, got {coeffs.shape}")
        self.basis = b
        self.coeffs = coeffs

    @classmethod
    def from_components(cls, comps):
        comps = list(comps)
        if not comps:
            raise ShapeError("a JetMap needs at least one component")
        b = comps[0].basis
        for c in comps:
            if c.basis is not b:
                raise ShapeError("components must share one basis")
        dtype = _common_dtype(*[c.coeffs for c in comps])
        return cls(b, np.array([c.coeffs for c in comps], dtype=dtype))

    @classmethod
    def identity(cls, m, k, dtype=float):
        b = basis(m, k)
        c = np.empty((m, b.size), dtype=dtype)
        for i in range(m):
            c[i] = _zeros(b.size, dtype)
            if k >= 1:
                c[i, 1 + i] = 1
        return cls(b, c)

    @classmethod
    def from_matrix(cls, a, k, constant=None):
        a = np.asarray(a)
        rows, m = a.shape
        b = basis(m, k)
        dtype = object if a.dtype == object else np.result_type(a, float)
        c = np.empty((rows, b.size), dtype=dtype)
        for i in range(rows):
            c[i] = _zeros(b.size, dtype)
            if k >= 1:
                c[i, 1:1 + m] = a[i]
            if constant is not None:
                c[i, 0] = constant[i]
        return cls(b, c)

    @classmethod
    def zeros(cls, rows, m, k, dtype=float):
        b = basis(m, k)
        return cls(b, np.array([_zeros(b.size, dtype) for _ in range(rows)], dtype=dtype))

    @property
    def domain_vars(self):
        return self.basis.m

    @property
    def codomain_vars(self):
        return self.coeffs.shape[0]

    @property
    def order(self):
        return self.basis.k

    def __len__(self):
        return self.coeffs.shape[0]

    def __getitem__(self, i):
        return Jet(self.basis, self.coeffs[i])

    @property
    def components(self):
        return [self[i] for i in range(len(self))]

    @property
    def constant(self):
        return self.coeffs[:, 0]

    def linear_part(self):
        m = self.domain_vars
        if self.order < 1:
            return np.zeros((len(self), m), dtype=self.coeffs.dtype)
        return self.coeffs[:, 1:1 + m].copy()

    def homogeneous(self, j):
        return self.coeffs[:, self.basis.degree_slice(j)].copy()

    def truncate(self, order):
        b = basis(self.domain_vars, order)
        if order <= self.order:
            return JetMap(b, self.coeffs[:, : b.size].copy())
        c = np.array([_zeros(b.size, self.coeffs.dtype) for _ in range(len(self))],
                     dtype=self.coeffs.dtype)
        c[:, : self.basis.size] = self.coeffs
        return JetMap(b, c)

    def without_constant(self):
        c = self.coeffs.copy()
        c[:, 0] = 0
        return JetMap(self.basis, c)

    def with_constant(self, values):
        c = self.coeffs.astype(np.result_type(self.coeffs, np.asarray(values)), copy=True) \
            if self.coeffs.dtype != object else self.coeffs.copy()
        c[:, 0] = values
        return JetMap(self.basis, c)

    def select(self, rows):
        return JetMap(self.basis, self.coeffs[list(rows)].copy())

    # arithmetic -------------------------------------------------------------
    def _check(self, other):
        if other.basis is not self.basis or len(other) != len(self):
            raise ShapeError("JetMap shapes differ")

    def __add__(self, other):
        self._check(other)
        return JetMap(self.basis, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check(other)
        return JetMap(self.basis, self.coeffs - other.coeffs)

    def __neg__(self):
        return JetMap(self.basis, -self.coeffs)

    def __mul__(self, s):
        return JetMap(self.basis, self.coeffs * s)

    __rmul__ = __mul__

    def left_multiply(self, a):
        """Apply the matrix ``a`` to the components (linear map after this one)."""
        a = np.asarray(a)
        return JetMap(self.basis, a @ self.coeffs)

    def compose(self, g: "JetMap") -> "JetMap":
        """``self o g`` truncated at ``g``'s order; ``g`` must fix the origin."""
        if g.codomain_vars != self.domain_vars:
            raise ShapeError(f"cannot compose: inner map has {g.codomain_vars} components, "
                             f"outer map takes {self.domain_vars} variables")
        if np.any(g.coeffs[:, 0] != 0):
            raise ShapeError("inner map of a composition must have zero constant term")
        k = g.order
        f = self if self.order >= k else self.truncate(k)
        f_coeffs = f.coeffs[:, : basis(f.domain_vars, k).size]
        dtype = _common_dtype(f_coeffs, g.coeffs)
        gc = g.coeffs.astype(dtype) if dtype != object else g.coeffs
        mono = _monomial_table(self.domain_vars, g.basis, gc)
        if dtype == object:
            out = f_coeffs.astype(object) @ mono
        else:
            out = f_coeffs.astype(dtype) @ mono
        return JetMap(g.basis, out)

    def jacobian(self):
        """Jets of the partial derivatives: ``out[i][j] = d f_i / d z_j``."""
        return [[c.derivative(j) for j in range(self.domain_vars)] for c in self.components]

    def max_abs(self):
        return float(np.max(np.abs(self.coeffs.astype(complex)))) if self.coeffs.size else 0.0

    def max_abs_diff(self, other):
        self._check(other)
        return float(np.max(np.abs((self.coeffs - other.coeffs).astype(complex))))

    def real(self):
        return JetMap(self.basis, np.real(self.coeffs).copy())

    def to_json(self):
        return {
            "domain_vars": self.domain_vars,
            "codomain_vars": self.codomain_vars,
            "order": self.order,
            "components": [c.to_json() for c in self.components],
        }

    @classmethod
    def from_json(cls, data):
        return cls.from_components([Jet.from_json(c) for c in data["components"]])

    def __repr__(self):
        return f"JetMap({self.domain_vars}->{self.codomain_vars}, k={self.order})"


# module-level operations ---------------------------------------------------------

def jet_mul(a: Jet, b: Jet) -> Jet:
    return a * b


def jet_compose(f: JetMap, g: JetMap) -> JetMap:
    if f.order != g.order:
        raise ShapeError(f"composition needs a common order, got {f.order} and {g.order}")
    return f.compose(g)


def _inverse_matrix(a):
    if a.dtype == object:
        try:
            return exact.inverse(a)
        except ZeroDivisionError:
            raise SingularJetError("linear part is singular") from None
    if a.size and np.linalg.cond(a) > 1e13:
        raise SingularJetError(f"linear part is numerically singular (cond={np.linalg.cond(a):.2e})")
    return np.linalg.inv(a)


def jet_invert(f: JetMap) -> JetMap:
    """Two-sided inverse of a square jet fixing the origin, to the same order."""
    if f.domain_vars != f.codomain_vars:
        raise ShapeError("only square jets can be inverted")
    if np.any(f.coeffs[:, 0] != 0):
        raise ShapeError("jet_invert expects a jet fixing the origin")
    k, m = f.order, f.domain_vars
    a_inv = _inverse_matrix(f.linear_part())
    ident = JetMap.identity(m, k, dtype=f.coeffs.dtype if f.coeffs.dtype == object else float)
    nonlinear = f - JetMap.from_matrix(f.linear_part(), k)
    g = JetMap.from_matrix(a_inv, k)
    # each sweep fixes one more degree
    for _ in range(max(k - 1, 0)):
        g = (ident - nonlinear.compose(g)).left_multiply(a_inv)
    return g


def homogeneous_component(a: Jet, j: int):
    if not 0 <= j <= a.order:
        raise ValueError(f"degree {j} outside 0..{a.order}")
    return a.coeffs[a.basis.degree_slice(j)].copy()


# elementary functions on jets (numbers pass through to numpy) ---------------------

def _series(a, coeff_fn):
    k = a.order
    return a.apply_series([coeff_fn(j) for j in range(k + 1)])


def exp(a):
    if not isinstance(a, Jet):
        return np.exp(a)
    e0 = np.exp(a.coeffs[0])
    return _series(a, lambda j: e0 / math.factorial(j))


def sin(a):
    if not isinstance(a, Jet):
        return np.sin(a)
    a0 = a.coeffs[0]
    s, c = np.sin(a0), np.cos(a0)
    cyc = (s, c, -s, -c)
    return _series(a, lambda j: cyc[j % 4] / math.factorial(j))


def cos(a):
    if not isinstance(a, Jet):
        return np.cos(a)
    a0 = a.coeffs[0]
    s, c = np.sin(a0), np.cos(a0)
    cyc = (c, -s, -c, s)
    return _series(a, lambda j: cyc[j % 4] / math.factorial(j))


def reciprocal(a):
    if not isinstance(a, Jet):
        return 1.0 / a
    a0 = a.coeffs[0]
    if a0 == 0:
        raise ZeroDivisionError("reciprocal of a jet with zero constant term")
    if a.coeffs.dtype == object:
        a0 = Fraction(a0)
    return _series(a, lambda j: (-1) ** j / a0 ** (j + 1))


def sqrt(a):
    if not isinstance(a, Jet):
        return np.sqrt(a)
    a0 = a.coeffs[0]
    if a0 <= 0:
        raise ValueError("sqrt of a jet needs a positive constant term")
    r = np.sqrt(a0)

    def coeff(j):
        binom = 1.0
        for i in range(j):
            binom *= (0.5 - i) / (i + 1)
        return binom * r / a0 ** j

    return _series(a, coeff)
