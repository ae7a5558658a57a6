"""Symplectic matrices, symplectic jets and jets of Hamiltonian vector fields.

Conventions (used everywhere in the package):

* phase coordinates are ordered ``(x_1..x_n, y_1..y_n)``;
* the symplectic form is ``omega = sum dx_i ^ dy_i``, whose matrix is
  ``J = [[0, I], [-I, 0]]``, so ``omega(a, b) = a^T J b``;
* the Hamiltonian field of ``h`` is ``X_h = (dh/dy, -dh/dx) = J grad h``;
* the vector-field bracket is ``[X, Y] = DY.X - DX.Y`` and
  :func:`jet_bracket` returns ``-[X, Y]`` truncated, which for linear
  fields ``Az``, ``Bz`` is the matrix commutator ``(AB - BA) z`` and for
  Hamiltonian fields is the field of the Poisson bracket
  ``{f, g} = grad f . J grad g``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _ode
from .errors import ShapeError
from .jets import Jet, JetMap, basis

__all__ = [
    "standard_form",
    "symplectic_defect",
    "is_symplectic_matrix",
    "SymplecticJet",
    "HamiltonianJetField",
    "hamiltonian_field_from_jet",
    "jet_exp",
    "lie_series_exp",
    "jet_bracket",
    "poisson_bracket",
    "is_symplectic_jet",
]


def standard_form(n: int, dtype=float):
    """The matrix ``J`` of ``sum dx_i ^ dy_i`` in dimension ``2n``."""
    j = np.zeros((2 * n, 2 * n), dtype=dtype)
    for i in range(n):
        j[i, n + i] = 1
        j[n + i, i] = -1
    return j


def symplectic_defect(m) -> float:
    """``max |M^T J M - J|`` (exactly 0 for exact symplectic rational input)."""
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] % 2:
        raise ShapeError(f"symplectic matrices are 2n x 2n, got {m.shape}")
    j = standard_form(m.shape[0] // 2, dtype=object if m.dtype == object else float)
    d = m.T @ j @ m - j
    if m.dtype == object:
        return max(abs(v) for v in d.flat)
    return float(np.max(np.abs(d)))


def is_symplectic_matrix(m, tol=1e-10) -> bool:
    d = symplectic_defect(m)
    return d == 0 if np.asarray(m).dtype == object else d <= tol


def _hamiltonian_components(h: Jet):
    n = h.var_count // 2
    grad = [h.derivative(i) for i in range(2 * n)]
    return [grad[n + i] for i in range(n)] + [-grad[i] for i in range(n)]


@dataclass(frozen=True)
class HamiltonianJetField:
    """k-jet of a Hamiltonian vector field vanishing at the origin.

    ``generator`` is the (k+1)-jet of a Hamiltonian without constant and
    linear terms, when known.
    """

    field: JetMap
    generator: Jet | None = None

    @property
    def order(self):
        return self.field.order

    @property
    def dimension(self):
        return self.field.domain_vars


def hamiltonian_field_from_jet(h: Jet) -> HamiltonianJetField:
    """The k-jet of ``X_h`` from a (k+1)-jet ``h`` with no constant or linear terms."""
    if h.var_count % 2:
        raise ShapeError("a Hamiltonian lives in an even number of variables")
    if h.order < 2:
        raise ShapeError("need at least a 2-jet of the Hamiltonian")
    if not h.low_order_zero(1):
        raise ValueError("Hamiltonian jet must vanish with its gradient at the origin")
    comps = [c.truncate(h.order - 1) for c in _hamiltonian_components(h)]
    return HamiltonianJetField(JetMap.from_components(comps), h)


class SymplecticJet(JetMap):
    """A JetMap in 2n variables checked to be symplectic for ``sum dx ^ dy``.

    ``defect`` holds the measured pullback defect (see :func:`is_symplectic_jet`).
    """

    __slots__ = ("defect",)

    def __init__(self, b, coeffs, defect=None):
        super().__init__(b, coeffs)
        self.defect = defect

    @classmethod
    def certify(cls, f: JetMap, tol=1e-8):
        ok, defect = is_symplectic_jet(f, tol)
        if not ok:
            raise ValueError(f"jet is not symplectic: defect {defect:.3e} > {tol:.1e}")
        return cls(f.basis, f.coeffs, defect)


def is_symplectic_jet(f: JetMap, tol=1e-8):
    """Check ``Df^T J Df = J`` through coefficient order ``k - 1``.

    Returns ``(verdict, defect)`` with ``defect`` the largest coefficient of
    the pullback of the standard form minus the form itself.
    """
    m = f.domain_vars
    if m != f.codomain_vars or m % 2:
        raise ShapeError("symplectic jets are square maps of even dimension")
    n = m // 2
    k = f.order
    if k < 1:
        return True, 0.0
    # coefficient jets of Df have order k-1
    d = [[c.truncate(k - 1) for c in row] for row in f.truncate(k).jacobian()]
    worst = 0.0
    for a in range(m):
        for b in range(a + 1, m):
            acc = None
            for i in range(n):
                term = d[i][a] * d[n + i][b] - d[n + i][a] * d[i][b]
                acc = term if acc is None else acc + term
            target = 1.0 if (b == a + n) else 0.0
            acc = acc - target
            worst = max(worst, acc.max_abs())
    return worst <= tol, worst


def _flatten(jm: JetMap):
    return jm.coeffs.ravel()


def jet_exp(x: HamiltonianJetField | JetMap, t: float, rtol=1e-13, atol=1e-14) -> SymplecticJet | JetMap:
    """k-jet of the time-``t`` flow of a field vanishing at the origin.

    The coefficient ODE ``Phi' = X o Phi``, ``Phi(0) = id`` is integrated
    with an adaptive explicit Runge-Kutta scheme.
    """
    field = x.field if isinstance(x, HamiltonianJetField) else x
    if np.any(field.coeffs[:, 0] != 0):
        raise ValueError("jet_exp needs a field vanishing at the origin")
    m, k = field.domain_vars, field.order
    b = basis(m, k)
    shape = (m, b.size)
    dtype = np.result_type(field.coeffs, float)

    def rhs(_, y):
        phi = JetMap(b, y.reshape(shape))
        return _flatten(field.compose(phi))

    y0 = _flatten(JetMap.identity(m, k, dtype=dtype))
    y1 = _ode.endpoint(rhs, y0, 0.0, float(t), rtol=rtol, atol=atol)
    out = JetMap(b, y1.reshape(shape))
    if isinstance(x, HamiltonianJetField):
        _, defect = is_symplectic_jet(out, np.inf)
        return SymplecticJet(out.basis, out.coeffs, defect)
    return out


def _lie_derivative(g: JetMap, field: JetMap) -> JetMap:
    """``Dg . X`` truncated at the common order."""
    comps = []
    for c in g.components:
        acc = None
        for i in range(g.domain_vars):
            term = c.derivative(i) * field[i]
            acc = term if acc is None else acc + term
        comps.append(acc)
    return JetMap.from_components(comps)


def lie_series_exp(field: JetMap) -> JetMap:
    """Exact time-1 flow jet of a field with no constant or linear terms.

    ``exp(X) = sum_j L_X^j(id) / j!``; the series terminates at the jet order.
    """
    if np.any(field.coeffs[:, : 1 + field.domain_vars] != 0):
        raise ValueError("lie_series_exp needs a field vanishing to second order")
    m, k = field.domain_vars, field.order
    dtype = field.coeffs.dtype
    term = JetMap.identity(m, k, dtype=dtype if dtype == object else np.result_type(dtype, float))
    result = term
    for j in range(1, k):
        term = _lie_derivative(term, field) * (1.0 / j)
        result = result + term
    return result


def poisson_bracket(f: Jet, g: Jet) -> Jet:
    """``{f, g} = grad f . J grad g = sum df/dx dg/dy - df/dy dg/dx``."""
    n = f.var_count // 2
    acc = None
    for i in range(n):
        term = f.derivative(i) * g.derivative(n + i) - f.derivative(n + i) * g.derivative(i)
        acc = term if acc is None else acc + term
    return acc


def jet_bracket(x: HamiltonianJetField, y: HamiltonianJetField) -> HamiltonianJetField:
    """``-[X, Y]`` with ``[X, Y] = DY.X - DX.Y``, truncated at the common order."""
    if x.field.basis is not y.field.basis or len(x.field) != len(y.field):
        raise ShapeError("bracket needs fields of a common shape")
    out = _lie_derivative(x.field, y.field) - _lie_derivative(y.field, x.field)
    gen = None
    if x.generator is not None and y.generator is not None:
        gen = poisson_bracket(x.generator, y.generator)
    return HamiltonianJetField(out, gen)
