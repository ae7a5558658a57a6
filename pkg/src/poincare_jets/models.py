"""Hamiltonian models on flat Darboux charts.

Every model exposes ``hamiltonian(z)`` and ``vector_field(z)`` where ``z``
is a sequence of phase coordinates ``(x_0..x_n, y_0..y_n)``.  The entries
may be floats, complex numbers (for complex-step differentiation) or jets
sharing one basis, so the same code produces point values, variational
equations and high-order jets.
"""

from __future__ import annotations

import math

import numpy as np

from . import jets
from .errors import ShapeError
from .jets import Jet, JetMap

TWO_PI = 2.0 * math.pi


def _dot(coeffs, xs):
    acc = 0.0
    for c, x in zip(coeffs, xs):
        if c != 0:
            acc = acc + c * x
    return acc


def _lift(point, order):
    """Jets of the coordinate functions about ``point``."""
    m = len(point)
    return [Jet.variable(i, m, order, value=float(point[i])) for i in range(m)]


class Potential:
    """A function of the configuration variables only."""

    def value(self, x):
        raise NotImplementedError

    def gradient(self, x):
        raise NotImplementedError

    def __add__(self, other):
        return SumPotential([self, other])


class ZeroPotential(Potential):
    def value(self, x):
        return 0.0

    def gradient(self, x):
        return [0.0] * len(x)


class SumPotential(Potential):
    def __init__(self, parts):
        self.parts = list(parts)

    def value(self, x):
        acc = 0.0
        for p in self.parts:
            acc = acc + p.value(x)
        return acc

    def gradient(self, x):
        acc = [0.0] * len(x)
        for p in self.parts:
            acc = [a + g for a, g in zip(acc, p.gradient(x))]
        return acc


class ScaledPotential(Potential):
    def __init__(self, base: Potential, factor: float):
        self.base = base
        self.factor = factor

    def value(self, x):
        return self.factor * self.base.value(x)

    def gradient(self, x):
        return [self.factor * g for g in self.base.gradient(x)]


class TrigPolynomialPotential(Potential):
    """``V(x) = c + x.Qx/2 + sum_m (a_m cos(m.x) + b_m sin(m.x))``.

    ``terms`` is a list of ``(wavevector, a_m, b_m)``.  Coordinates that
    appear in the quadratic part should not be flagged periodic.
    """

    def __init__(self, dim: int, terms=(), quadratic=None, constant: float = 0.0):
        self.dim = dim
        self.terms = [(np.asarray(m, dtype=float), float(a), float(b)) for m, a, b in terms]
        for m, _, _ in self.terms:
            if m.shape != (dim,):
                raise ShapeError(f"wavevector {m} does not have length {dim}")
        self.quadratic = None if quadratic is None else np.asarray(quadratic, dtype=float)
        if self.quadratic is not None and self.quadratic.shape != (dim, dim):
            raise ShapeError("quadratic part must be dim x dim")
        self.constant = float(constant)

    def value(self, x):
        acc = self.constant
        if self.quadratic is not None:
            for i in range(self.dim):
                row = _dot(self.quadratic[i], x)
                if not (isinstance(row, float) and row == 0.0):
                    acc = acc + 0.5 * x[i] * row
        for m, a, b in self.terms:
            phase = _dot(m, x)
            if a:
                acc = acc + a * jets.cos(phase)
            if b:
                acc = acc + b * jets.sin(phase)
        return acc

    def gradient(self, x):
        grad = [0.0] * self.dim
        if self.quadratic is not None:
            sym = 0.5 * (self.quadratic + self.quadratic.T)
            grad = [_dot(sym[i], x) for i in range(self.dim)]
        for m, a, b in self.terms:
            phase = _dot(m, x)
            s = jets.sin(phase) if a else 0.0
            c = jets.cos(phase) if b else 0.0
            amp = -a * s + b * c
            for i in range(self.dim):
                if m[i]:
                    grad[i] = grad[i] + m[i] * amp
        return grad

    def to_dict(self):
        return {
            "constant": self.constant,
            "quadratic": None if self.quadratic is None else self.quadratic.tolist(),
            "terms": [{"wavevector": m.tolist(), "cos": a, "sin": b} for m, a, b in self.terms],
        }

    @classmethod
    def from_dict(cls, dim, data):
        terms = [(t["wavevector"], t.get("cos", 0.0), t.get("sin", 0.0)) for t in data.get("terms", [])]
        return cls(dim, terms, data.get("quadratic"), data.get("constant", 0.0))


class HamiltonianModel:
    """Base class.  Subclasses provide ``hamiltonian`` and ideally ``vector_field``."""

    name = "model"
    dof = 1
    periods: tuple = ()

    def hamiltonian(self, z):
        raise NotImplementedError

    def vector_field(self, z):
        """``X_H = (dH/dy, -dH/dx)``; generic version via a 1-jet of ``H``."""
        m = 2 * self.dof
        if isinstance(z[0], Jet):
            order = z[0].order
            point = [float(np.real(c.coeffs[0])) for c in z]
            hj = self.jet(point, order + 1)
            field = [c.truncate(order) for c in _symplectic_gradient(hj)]
            dev = [c - c.coeffs[0] for c in z]
            return list(JetMap.from_components(field).compose(JetMap.from_components(dev)).components)
        hj = self.jet([float(v) for v in z], 1)
        return [float(c.coeffs[0]) for c in _symplectic_gradient(hj)][:m]

    # derived quantities -------------------------------------------------
    def energy(self, z) -> float:
        return float(np.real(self.hamiltonian([float(v) for v in z])))

    def jet(self, point, order: int) -> Jet:
        """The ``order``-jet of ``H`` at ``point``."""
        return self.hamiltonian(_lift(point, order))

    def field_array(self, z):
        return np.array([float(np.real(v)) for v in self.vector_field(list(z))])

    def jacobian(self, z):
        """``DX_H`` at ``z`` from a 1-jet of the vector field."""
        vf = self.vector_field(_lift(z, 1))
        m = 2 * self.dof
        return np.array([[c.coeffs[1 + j] for j in range(m)] if isinstance(c, Jet) else [0.0] * m
                         for c in vf])

    def momentum_hessian(self, z):
        h = self.jet(z, 2)
        n = self.dof
        out = np.empty((n, n))
        for i in range(n):
            di = h.derivative(n + i)
            for j in range(n):
                out[i, j] = di.derivative(n + j).coeffs[0]
        return out

    def is_tonelli(self, points) -> bool:
        """Positive definite momentum Hessian at every sampled point."""
        for z in points:
            if np.min(np.linalg.eigvalsh(self.momentum_hessian(z))) <= 0:
                return False
        return True

    def wrap(self, z):
        z = np.array(z, dtype=float)
        for i, p in enumerate(self.periods):
            if p:
                z[i] = np.mod(z[i], p)
        return z

    def describe(self):
        return {"name": self.name, "dof": self.dof, "periods": list(self.periods)}


def _symplectic_gradient(h: Jet):
    n = h.var_count // 2
    grad = [h.derivative(i) for i in range(2 * n)]
    return [grad[n + i] for i in range(n)] + [-grad[i] for i in range(n)]


class MechanicalHamiltonian(HamiltonianModel):
    """``H(x, p) = <A^{-1} p, p>/2 + V(x)`` on ``T^a x R^b`` times momenta."""

    def __init__(self, inv_mass, potential: Potential, periods=None, name="mechanical"):
        self.inv_mass = np.atleast_2d(np.asarray(inv_mass, dtype=float))
        self.dof = self.inv_mass.shape[0]
        if self.inv_mass.shape != (self.dof, self.dof):
            raise ShapeError("kinetic matrix must be square")
        self.potential = potential
        self.periods = tuple(periods) if periods is not None else (None,) * self.dof
        if len(self.periods) != self.dof:
            raise ShapeError("one periodicity flag per configuration variable")
        self.name = name

    def hamiltonian(self, z):
        n = self.dof
        x, p = list(z[:n]), list(z[n:])
        kin = 0.0
        for i in range(n):
            row = _dot(self.inv_mass[i], p)
            kin = kin + 0.5 * p[i] * row
        return kin + self.potential.value(x)

    def vector_field(self, z):
        n = self.dof
        x, p = list(z[:n]), list(z[n:])
        xdot = [_dot(self.inv_mass[i], p) for i in range(n)]
        grad = self.potential.gradient(x)
        return xdot + [-g for g in grad]

    def perturbed(self, u: Potential, name=None):
        """The potential perturbation ``H + u``."""
        return MechanicalHamiltonian(self.inv_mass, SumPotential([self.potential, u]),
                                     self.periods, name or f"{self.name}+u")


class PerturbedModel(HamiltonianModel):
    """``H + u`` for an arbitrary base model and configuration potential ``u``."""

    def __init__(self, base: HamiltonianModel, potential: Potential, name=None):
        self.base = base
        self.potential = potential
        self.dof = base.dof
        self.periods = base.periods
        self.name = name or f"{base.name}+u"

    def hamiltonian(self, z):
        return self.base.hamiltonian(z) + self.potential.value(list(z[: self.dof]))

    def vector_field(self, z):
        n = self.dof
        out = list(self.base.vector_field(z))
        grad = self.potential.gradient(list(z[:n]))
        for i in range(n):
            out[n + i] = out[n + i] - grad[i]
        return out


class TransformedModel(HamiltonianModel):
    """Pull back by a linear symplectic change of variables ``z = C w``."""

    def __init__(self, base: HamiltonianModel, c, name=None):
        self.base = base
        self.c = np.asarray(c, dtype=float)
        self.c_inv = np.linalg.inv(self.c)
        self.dof = base.dof
        self.periods = tuple(None for _ in range(base.dof))
        self.name = name or f"{base.name}@C"

    def _push(self, w):
        return [_dot(row, w) for row in self.c]

    def hamiltonian(self, w):
        return self.base.hamiltonian(self._push(w))

    def vector_field(self, w):
        v = self.base.vector_field(self._push(w))
        return [_dot(row, v) for row in self.c_inv]


class MechanicalLagrangian:
    """``L(x, v) = <A v, v>/2 - V(x)``."""

    def __init__(self, mass, potential: Potential, periods=None, name="mechanical"):
        self.mass = np.atleast_2d(np.asarray(mass, dtype=float))
        self.potential = potential
        self.periods = periods
        self.name = name

    def lagrangian(self, x, v):
        v = np.asarray(v, dtype=float)
        return 0.5 * float(v @ self.mass @ v) - float(self.potential.value(list(x)))

    def perturbed(self, u: Potential):
        """``L - u``, dual to ``H + u``."""
        return MechanicalLagrangian(self.mass, SumPotential([self.potential, u]),
                                    self.periods, f"{self.name}-u")


def legendre_transform(lag: MechanicalLagrangian) -> MechanicalHamiltonian:
    a = lag.mass
    if a.shape[0] != a.shape[1] or not np.allclose(a, a.T):
        raise ValueError("kinetic form must be symmetric")
    try:
        np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        raise ValueError("kinetic form is not positive definite") from None
    return MechanicalHamiltonian(np.linalg.inv(a), lag.potential, lag.periods, lag.name)


# named models ---------------------------------------------------------------

def pendulum_torus() -> MechanicalHamiltonian:
    """``H = (y0^2 + y1^2)/2 + 1 - cos x1`` on ``T^2 x R^2``."""
    v = TrigPolynomialPotential(2, [((0, 1), -1.0, 0.0)], constant=1.0)
    return MechanicalHamiltonian(np.eye(2), v, (TWO_PI, TWO_PI), "pendulum_torus")


def inverted_pendulum_torus() -> MechanicalHamiltonian:
    """Upside-down pendulum: the orbit ``x1 = y1 = 0`` is hyperbolic."""
    v = TrigPolynomialPotential(2, [((0, 1), 1.0, 0.0)], constant=-1.0)
    return MechanicalHamiltonian(np.eye(2), v, (TWO_PI, TWO_PI), "inverted_pendulum_torus")


def harmonic_transverse(omega: float = 1.0) -> MechanicalHamiltonian:
    """``H = (y0^2 + y1^2)/2 + omega^2 x1^2/2`` with ``x0`` periodic."""
    v = TrigPolynomialPotential(2, quadratic=[[0.0, 0.0], [0.0, omega ** 2]])
    return MechanicalHamiltonian(np.eye(2), v, (TWO_PI, None), "harmonic_transverse")


def pendulum_torus_pair(omega2: float = math.sqrt(2.0)) -> MechanicalHamiltonian:
    """Two decoupled transverse pendula on ``T^3``: ``1 - cos x1 + omega2^2 (1 - cos x2)``."""
    w2 = omega2 ** 2
    v = TrigPolynomialPotential(3, [((0, 1, 0), -1.0, 0.0), ((0, 0, 1), -w2, 0.0)],
                                constant=1.0 + w2)
    return MechanicalHamiltonian(np.eye(3), v, (TWO_PI,) * 3, "pendulum_torus_pair")


NAMED_MODELS = {
    "pendulum_torus": pendulum_torus,
    "inverted_pendulum_torus": inverted_pendulum_torus,
    "harmonic_transverse": harmonic_transverse,
    "pendulum_torus_pair": pendulum_torus_pair,
}


def model_from_dict(spec: dict) -> MechanicalHamiltonian:
    """Build a model from a config mapping.

    Either ``{"name": <named model>, "params": {...}}`` or a mechanical
    description ``{"mass": A, "potential": {...}, "periods": [...]}`` which
    goes through the Legendre transform.
    """
    if "mass" not in spec and "inv_mass" not in spec:
        name = spec.get("name")
        if name not in NAMED_MODELS:
            raise KeyError(f"unknown model {name!r}; known: {sorted(NAMED_MODELS)}")
        return NAMED_MODELS[name](**spec.get("params", {}))
    periods = [p if p is None else float(p) for p in spec.get("periods", [])] or None
    if "mass" in spec:
        mass = np.atleast_2d(np.asarray(spec["mass"], dtype=float))
        pot = TrigPolynomialPotential.from_dict(mass.shape[0], spec.get("potential", {}))
        return legendre_transform(MechanicalLagrangian(mass, pot, periods, spec.get("name", "custom")))
    inv = np.atleast_2d(np.asarray(spec["inv_mass"], dtype=float))
    pot = TrigPolynomialPotential.from_dict(inv.shape[0], spec.get("potential", {}))
    return MechanicalHamiltonian(inv, pot, periods, spec.get("name", "custom"))
