"""Localized potential perturbations of a closed orbit and their effect on jets.

A perturbation is ``u(x) = s * delta(x_0) * beta(x_perp)`` where ``x_0`` is
the section coordinate (used as the clock along the orbit) and ``x_perp``
are the remaining positions.  ``delta`` is a unit-mass bump in ``x_0`` and
``beta`` is a homogeneous polynomial of degree ``k + 1`` centred on the
orbit, cut off smoothly outside a ball.  Such a ``u`` has a gradient
vanishing to order ``k - 1`` along the orbit, so it preserves the orbit and
only moves the degree-``k`` part of the return-map jet.

The relevant orbits are those along which ``x_perp`` is constant; the
library checks this on the arc.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import quad, quad_vec

from . import _ode
from . import jets as J
from .errors import CertificationError, ShapeError, SupportError
from .flow import (OrbitRecord, default_arc, energy_embedding,
                   intermediate_section_family, section_transfer,
                   time_to_section)
from .general_position import is_k_general_family
from .jets import Jet, JetMap, basis, homogeneous_dim, jet_invert
from .models import PerturbedModel, Potential
from .symplectic import SymplecticJet, hamiltonian_field_from_jet


# narrow bumps need tighter control than the flow defaults
DEFAULT_RTOL = 1e-13
DEFAULT_ATOL = 1e-14


def _const(v):
    return float(np.real(v.coeffs[0] if isinstance(v, Jet) else v))


def _psi(r):
    """``exp(-1/(1 - r^2))`` on ``|r| < 1``, zero outside."""
    return J.exp(-1.0 / (1.0 - r * r))


@lru_cache(maxsize=None)
def bump_mass() -> float:
    val, _ = quad(lambda r: math.exp(-1.0 / (1.0 - r * r)), -1.0, 1.0, epsabs=0.0, epsrel=1e-13, limit=200)
    return val


def _f(t):
    return J.exp(-1.0 / t)


def cutoff(q):
    """Smooth step in ``q = |x|^2/eps^2``: 1 for ``q <= 1/4``, 0 for ``q >= 1``."""
    q0 = _const(q)
    if q0 <= 0.25:
        return 1.0
    if q0 >= 1.0:
        return 0.0
    a, b = _f(1.0 - q), _f(q - 0.25)
    return a / (a + b)


def cutoff_derivative(q):
    q0 = _const(q)
    if q0 <= 0.25 or q0 >= 1.0:
        return 0.0
    a, b = _f(1.0 - q), _f(q - 0.25)
    da = -a / ((1.0 - q) * (1.0 - q))
    db = b / ((q - 0.25) * (q - 0.25))
    s = a + b
    return (da * b - a * db) / (s * s)


class FkPotential(Potential):
    """``u = amplitude * delta(x_0) * P(x_perp - x_star) * chi(|x_perp - x_star|^2 / eps^2)``."""

    def __init__(self, dof: int, index: int, center: float, half_width: float, leading: Jet,
                 eps: float, amplitude: float = 1.0, x_star=None, period: float | None = 2 * math.pi):
        if leading.var_count != dof - 1:
            raise ShapeError(f"leading polynomial must have {dof - 1} variables")
        if half_width <= 0 or eps <= 0:
            raise SupportError("bump half-width and cutoff radius must be positive")
        self.dof = dof
        self.index = index
        self.center = float(center)
        self.half_width = float(half_width)
        self.leading = leading
        self.eps = float(eps)
        self.amplitude = float(amplitude)
        self.x_star = np.zeros(dof - 1) if x_star is None else np.asarray(x_star, dtype=float)
        self.period = period
        self.transverse = [j for j in range(dof) if j != index]
        self._dp = [leading.derivative(j) for j in range(dof - 1)]

    def scaled(self, amplitude):
        return FkPotential(self.dof, self.index, self.center, self.half_width, self.leading,
                           self.eps, amplitude, self.x_star, self.period)

    @property
    def degree(self):
        degs = {int(sum(e)) for e, _ in self.leading.terms()}
        return degs.pop() if len(degs) == 1 else None

    # time profile ----------------------------------------------------------
    def _r(self, s):
        off = _const(s) - self.center
        if self.period:
            s = s - round(off / self.period) * self.period
        return (s - self.center) / self.half_width

    def delta(self, s):
        r = self._r(s)
        if abs(_const(r)) >= 1.0:
            return 0.0
        return _psi(r) / (self.half_width * bump_mass())

    def delta_prime(self, s):
        r = self._r(s)
        if abs(_const(r)) >= 1.0:
            return 0.0
        one_m = 1.0 - r * r
        return _psi(r) * (-2.0 * r / (one_m * one_m)) / (self.half_width ** 2 * bump_mass())

    # spatial profile -------------------------------------------------------
    def _offsets(self, x):
        return [x[j] - self.x_star[i] for i, j in enumerate(self.transverse)]

    def beta(self, xp):
        q = sum((v * v for v in xp), 0.0) / self.eps ** 2
        chi = cutoff(q)
        if isinstance(chi, float) and chi == 0.0:
            return 0.0
        return self.leading.evaluate(xp) * chi

    def beta_gradient(self, xp):
        q = sum((v * v for v in xp), 0.0) / self.eps ** 2
        chi, dchi = cutoff(q), cutoff_derivative(q)
        if isinstance(chi, float) and chi == 0.0:
            return [0.0] * len(xp)
        p = self.leading.evaluate(xp) if not (isinstance(dchi, float) and dchi == 0.0) else 0.0
        out = []
        for i, v in enumerate(xp):
            g = self._dp[i].evaluate(xp) * chi
            if not (isinstance(dchi, float) and dchi == 0.0):
                g = g + p * dchi * (2.0 / self.eps ** 2) * v
            out.append(g)
        return out

    # Potential interface -------------------------------------------------------
    def value(self, x):
        if self.amplitude == 0.0:
            return 0.0
        d = self.delta(x[self.index])
        if isinstance(d, float) and d == 0.0:
            return 0.0
        return self.amplitude * d * self.beta(self._offsets(x))

    def gradient(self, x):
        grad = [0.0] * self.dof
        if self.amplitude == 0.0:
            return grad
        s = x[self.index]
        d = self.delta(s)
        if isinstance(d, float) and d == 0.0:
            return grad
        xp = self._offsets(x)
        grad[self.index] = self.amplitude * self.delta_prime(s) * self.beta(xp)
        for i, g in enumerate(self.beta_gradient(xp)):
            grad[self.transverse[i]] = self.amplitude * d * g
        return grad

    def describe(self):
        return {"center": self.center, "half_width": self.half_width, "eps": self.eps,
                "amplitude": self.amplitude, "leading": self.leading.to_json(),
                "x_star": self.x_star.tolist(), "index": self.index}


def make_fk_potential(dof: int, center: float, half_width: float, leading: Jet, eps: float,
                      amplitude: float, k: int, arc: float, index: int = 0, x_star=None,
                      period: float | None = 2 * math.pi, check: bool = True) -> FkPotential:
    """A perturbation in the class whose gradient vanishes to order ``k - 1`` on the orbit.

    ``arc`` is the length (in the section coordinate, measured from 0) of the
    orbit segment that must contain the time support.
    """
    u = FkPotential(dof, index, center, half_width, leading, eps, amplitude, x_star, period)
    if check:
        if not (0.0 < center - half_width and center + half_width < arc):
            raise SupportError(f"bump support [{center - half_width}, {center + half_width}] "
                               f"is not inside (0, {arc})")
        if u.degree != k + 1:
            raise SupportError(f"leading polynomial must be homogeneous of degree {k + 1}")
    return u


def x_power(n: int, k: int, var: int = 0) -> Jet:
    """The monomial ``x_var^(k+1)`` as a jet in ``n`` variables."""
    e = [0] * n
    e[var] = k + 1
    return Jet.from_terms({tuple(e): 1.0}, n, k + 1)


def check_orbit_chart(model, record: OrbitRecord, arc: float, samples: int = 16, tol=1e-8):
    """Verify the transverse positions stay constant along the arc; returns them."""
    chart = record.chart
    z0 = np.asarray(record.initial_point)
    pos = [j for j in range(model.dof) if j != chart.index]
    x_star = z0[pos]
    direction = np.sign(model.field_array(z0)[chart.index])
    for s in np.linspace(0.0, arc, samples)[1:]:
        _, z = time_to_section(model, z0, chart.index, chart.value + direction * s)
        if np.max(np.abs(z[pos] - x_star)) > tol:
            raise SupportError("transverse positions are not constant along the arc")
    return x_star


def verify_orbit_preserved(model, u: Potential, record: OrbitRecord, rtol=DEFAULT_RTOL,
                           atol=DEFAULT_ATOL, max_step=None) -> float:
    """Closure residual of the orbit under the perturbed flow ``H + u``."""
    pm = PerturbedModel(model, u)
    if max_step is None and isinstance(u, FkPotential):
        v = abs(model.field_array(record.initial_point)[record.chart.index])
        max_step = u.half_width / (4.0 * v)
    z0 = np.asarray(record.initial_point)
    z1 = _ode.endpoint(lambda _, z: pm.field_array(z), z0, 0.0, record.period, rtol=rtol,
                       atol=atol, max_step=max_step or np.inf)
    d = z1 - z0
    for i, p in enumerate(model.periods):
        if p:
            d[i] = (d[i] + 0.5 * p) % p - 0.5 * p
    return float(np.linalg.norm(d))


@dataclass
class DeviationJet:
    k: int
    jet: SymplecticJet
    lower_defect: float  # max deviation of the (k-1)-jet from the identity
    top: np.ndarray  # degree-k coefficients, one row per component
    meta: dict = field(default_factory=dict)

    @property
    def top_norm(self):
        return float(np.max(np.abs(self.top))) if self.top.size else 0.0

    def flat_top(self):
        return self.top.ravel().copy()

    def to_json(self):
        return {"k": self.k, "lower_defect": self.lower_defect, "top_norm": self.top_norm,
                "top": self.top.tolist(), "jet": self.jet.to_json(), "meta": self.meta}


def _decompose(r: JetMap, k: int) -> DeviationJet:
    m = r.domain_vars
    ident = JetMap.identity(m, k)
    diff = r.coeffs - ident.coeffs
    lower = diff[:, : basis(m, k - 1).size] if k >= 1 else diff[:, :0]
    top = r.homogeneous(k) - ident.homogeneous(k)
    return DeviationJet(k, r if isinstance(r, SymplecticJet) else SymplecticJet(r.basis, r.coeffs),
                        float(np.max(np.abs(lower))) if lower.size else 0.0, top)


def _max_step(model, record, u):
    if isinstance(u, FkPotential):
        v = abs(model.field_array(record.initial_point)[record.chart.index])
        return u.half_width / (4.0 * v)
    return np.inf


def deviation_jet(model, u: Potential, record: OrbitRecord, k: int, arc: float | None = None,
                  full_period: bool = False, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL) -> DeviationJet:
    """k-jet of ``R = P_0^{-1} o P_u`` for the transfer maps over the arc.

    With ``full_period`` the full return maps are used instead; both give the
    same jet when ``u`` is supported inside the arc.
    """
    from .flow import integrate_jet_flow, reduce_to_section

    pm = PerturbedModel(model, u)
    z0 = np.asarray(record.initial_point)
    chart = record.chart
    ms = _max_step(model, record, u)
    if full_period:
        maps = []
        for mdl in (model, pm):
            _, fj = integrate_jet_flow(mdl, z0, record.period, k, rtol, atol, ms)
            maps.append(reduce_to_section(fj, mdl, chart))
        p0, pu = maps
    else:
        arc = default_arc(record) if arc is None else arc
        direction = np.sign(model.field_array(z0)[chart.index])
        p0, _, _ = section_transfer(model, z0, chart, direction * arc, k, rtol, atol, ms)
        pu, _, _ = section_transfer(pm, z0, chart, direction * arc, k, rtol, atol, ms)
    r = jet_invert(p0).compose(pu)
    return _decompose(r, k)


def _linear_transfer_rhs(model):
    m = 2 * model.dof

    def rhs(_, y):
        z = y[:m]
        v = y[m:].reshape(m, m)
        return np.concatenate([model.field_array(z), (model.jacobian(z) @ v).ravel()])

    return rhs


def _reduced_x_rows(model, chart, z, v, e):
    """Rows of the reduced linear transfer map giving the transverse positions."""
    x = model.field_array(z)
    i0 = chart.index
    m = z.size
    proj = np.eye(m) - np.outer(x, np.eye(m)[i0]) / x[i0]
    pos = [j for j in range(model.dof) if j != i0]
    return (proj @ v @ e)[pos]


def _pulled_back_field(u: FkPotential, lx, k, weight):
    """Order-k field of ``weight * P(lx w)`` (homogeneous of degree k+1)."""
    mred = lx.shape[1]
    w = [Jet.variable(i, mred, k + 1) for i in range(mred)]
    xs = [sum((lx[i, j] * w[j] for j in range(mred) if lx[i, j] != 0.0), Jet.zeros(mred, k + 1))
          for i in range(lx.shape[0])]
    g = u.leading.evaluate(xs) * weight
    return hamiltonian_field_from_jet(g).field


def _arc_time(model, record, arc):
    z0 = np.asarray(record.initial_point)
    chart = record.chart
    direction = np.sign(model.field_array(z0)[chart.index])
    t, _ = time_to_section(model, z0, chart.index, chart.value + direction * arc)
    return t


def pullback_flow_jet(model, u: FkPotential, record: OrbitRecord, k: int, arc: float | None = None,
                      rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL) -> SymplecticJet:
    """Time-``a`` jet of the non-autonomous field on the start section generated
    by the perturbation pulled back through the unperturbed linear transfer maps.

    The equation is written in the orbit's own time ``t``, in which the
    Hamiltonian becomes ``amplitude * delta(x_0(t)) * P(L_t w)``.
    """
    arc = default_arc(record) if arc is None else arc
    chart = record.chart.with_base(record.initial_point, record.energy)
    z0 = np.asarray(record.initial_point)
    m = z0.size
    mred = m - 2
    e = energy_embedding(model, chart, 1).linear_part()
    b = basis(mred, k)
    shape = (mred, b.size)
    t_end = _arc_time(model, record, arc)
    lin = _linear_transfer_rhs(model)

    def rhs(t, y):
        zv = y[: m + m * m]
        out = np.zeros_like(y)
        out[: m + m * m] = lin(t, zv)
        z = zv[:m]
        d = u.delta(z[chart.index])
        if d == 0.0 or u.amplitude == 0.0:
            return out
        lx = _reduced_x_rows(model, chart, z, zv[m:].reshape(m, m), e)
        fld = _pulled_back_field(u, lx, k, u.amplitude * d)
        r = JetMap(b, y[m + m * m:].reshape(shape))
        out[m + m * m:] = fld.compose(r).coeffs.ravel()
        return out

    y0 = np.concatenate([z0, np.eye(m).ravel(), JetMap.identity(mred, k).coeffs.ravel()])
    y1 = _ode.endpoint(rhs, y0, 0.0, t_end, rtol=rtol, atol=atol, max_step=_max_step(model, record, u))
    r = JetMap(b, y1[m + m * m:].reshape(shape))
    return SymplecticJet(r.basis, r.coeffs)


def quadrature_row(model, u: FkPotential, record: OrbitRecord, k: int, arc: float | None = None,
                   rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL):
    """``int delta(x_0(t)) j^k X_{P o L_t} dt`` over the bump, flattened (degree-k part)."""
    arc = default_arc(record) if arc is None else arc
    chart = record.chart.with_base(record.initial_point, record.energy)
    z0 = np.asarray(record.initial_point)
    m = z0.size
    mred = m - 2
    e = energy_embedding(model, chart, 1).linear_part()
    sl = basis(mred, k).degree_slice(k)
    if u.amplitude == 0.0:
        return np.zeros(mred * (sl.stop - sl.start))
    direction = np.sign(model.field_array(z0)[chart.index])
    t_lo, _ = time_to_section(model, z0, chart.index, chart.value + direction * (u.center - u.half_width))
    t_hi, _ = time_to_section(model, z0, chart.index, chart.value + direction * (u.center + u.half_width))
    sol = _ode.integrate(_linear_transfer_rhs(model), np.concatenate([z0, np.eye(m).ravel()]), 0.0,
                         t_hi, rtol=rtol, atol=atol, dense_output=True)

    def integrand(t):
        y = sol.sol(t)
        z = y[:m]
        d = u.delta(z[chart.index])
        if d == 0.0:
            return np.zeros(mred * (sl.stop - sl.start))
        lx = _reduced_x_rows(model, chart, z, y[m:].reshape(m, m), e)
        fld = _pulled_back_field(u, lx, k, u.amplitude * d)
        return fld.coeffs[:, sl].ravel()

    val, _ = quad_vec(integrand, t_lo, t_hi, epsabs=1e-13, epsrel=1e-11)
    return val


@dataclass
class SMapDerivative:
    fd: np.ndarray  # Richardson-combined central differences, one row per potential
    quadrature: np.ndarray
    noise: float  # |D_h - D_2h| estimate
    h: float

    @property
    def relative_deviation(self):
        scale = max(float(np.max(np.abs(self.quadrature))), 1e-300)
        return float(np.max(np.abs(self.fd - self.quadrature))) / scale


def s_map_derivative(model, record: OrbitRecord, k: int, potentials, h: float = 1e-4,
                     arc: float | None = None, quadrature: bool = True, rtol=DEFAULT_RTOL,
                     atol=DEFAULT_ATOL) -> SMapDerivative:
    """Derivative of ``u -> j^k R_u`` at ``u = 0`` along each potential.

    Central differences at steps ``h`` and ``2h`` are combined by Richardson
    extrapolation; their difference is reported as the differencing noise.
    """
    rows, rows2, quad_rows = [], [], []
    for u in potentials:
        def top(a):
            return deviation_jet(model, u.scaled(a * u.amplitude), record, k, arc,
                                 rtol=rtol, atol=atol).flat_top()
        d1 = (top(h) - top(-h)) / (2 * h)
        d2 = (top(2 * h) - top(-2 * h)) / (4 * h)
        rows.append((4 * d1 - d2) / 3)
        rows2.append(d1 - d2)
        if quadrature:
            quad_rows.append(quadrature_row(model, u, record, k, arc, rtol, atol))
    fd = np.array(rows)
    noise = float(np.linalg.norm(np.array(rows2)))
    q = np.array(quad_rows) if quadrature else np.zeros_like(fd)
    return SMapDerivative(fd, q, noise, h)


@dataclass
class RankReport:
    rank: int
    d: int
    singular_values: list
    gap: float
    noise: float
    times: list
    half_width: float
    success: bool
    fd_vs_quadrature: float | None = None

    def to_json(self):
        return {k: v for k, v in self.__dict__.items()}


def choose_bump_times(model, record: OrbitRecord, k: int, arc: float | None = None):
    """Pick ``d`` section offsets in ``(0, arc)`` whose transfer family is (k+1)-general.

    Returns ``(times, half_width, verdict)``.
    """
    arc = default_arc(record) if arc is None else arc
    mred = 2 * model.dof - 2
    d = homogeneous_dim(mred, k + 1)
    samples = [arc * (j + 1) / (2 * d + 1) for j in range(2 * d)]
    family = intermediate_section_family(model, record, samples)
    verdict = is_k_general_family(family, k + 1)
    if not verdict.verdict:
        raise CertificationError(f"transfer family is not {k + 1}-general (rank {verdict.rank} < {d})")
    times = sorted(float(t) for t in verdict.times)
    return times, _half_width(times, arc), verdict


def _half_width(times, arc):
    pts = [0.0] + sorted(set(times)) + [arc]
    gaps = [b - a for a, b in zip(pts, pts[1:])]
    return 0.25 * min(gaps)


def submersion_rank_check(model, record: OrbitRecord, k: int, times=None, half_width=None,
                          arc: float | None = None, eps: float = 0.5, leading: Jet | None = None,
                          h: float = 1e-4, rtol: float = 1e-8, gap_threshold: float = 1e3,
                          quadrature: bool = True) -> RankReport:
    """Numerical rank of the derivative of ``u -> j^k R_u`` on ``d`` bump potentials."""
    arc = default_arc(record) if arc is None else arc
    mred = 2 * model.dof - 2
    d = homogeneous_dim(mred, k + 1)
    if times is None:
        times, hw, _ = choose_bump_times(model, record, k, arc)
    else:
        times = [float(t) for t in times]
        hw = _half_width(times, arc)
    half_width = hw if half_width is None else half_width
    if leading is None:
        leading = x_power(model.dof - 1, k)
    x_star = check_orbit_chart(model, record, arc)
    chart = record.chart
    pots = [make_fk_potential(model.dof, t, half_width, leading, eps, 1.0, k, arc, chart.index,
                              x_star, chart.period) for t in times]
    der = s_map_derivative(model, record, k, pots, h, arc, quadrature)
    sv = np.linalg.svd(der.fd, compute_uv=False)
    floor = max(rtol * sv[0], 10.0 * der.noise)
    rank = int(np.sum(sv > floor))
    sd = sv[d - 1] if len(sv) >= d else 0.0
    gap = float(sd / max(der.noise, np.finfo(float).tiny))
    success = rank == d and gap > gap_threshold
    return RankReport(rank, d, [float(s) for s in sv], gap, der.noise, list(times), half_width,
                      bool(success), der.relative_deviation if quadrature else None)


def model_orbit(energy: float = 4.5):
    """The pendulum-on-torus orbit ``x_1 = y_1 = 0`` with ``y_0 = sqrt(2c)``."""
    from .flow import SectionChart, find_closed_orbit
    from .models import pendulum_torus

    model = pendulum_torus()
    rec = find_closed_orbit(model, energy, [0.0, 0.0], SectionChart(0, 0.0, 2 * math.pi),
                            momentum_guess=math.sqrt(2 * energy))
    return model, rec


__all__ = [
    "FkPotential",
    "make_fk_potential",
    "x_power",
    "verify_orbit_preserved",
    "DeviationJet",
    "deviation_jet",
    "pullback_flow_jet",
    "quadrature_row",
    "s_map_derivative",
    "submersion_rank_check",
    "choose_bump_times",
    "check_orbit_chart",
    "model_orbit",
    "bump_mass",
    "cutoff",
]
