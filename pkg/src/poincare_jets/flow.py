"""Jet transport along trajectories, closed orbits and Poincaré-map jets.

A section is ``{x_{i0} = s}`` inside an energy level.  Its reduced
coordinates are the remaining positions followed by their momenta, so the
restricted symplectic form is the standard one in ``2n`` variables.
"""

from __future__ import annotations

import math
import uuid
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from functools import lru_cache

import numpy as np

from . import _ode
from .errors import ConvergenceError, IntegrationError, ShapeError, TransversalityError
from .jets import Jet, JetMap, basis
from .models import HamiltonianModel
from .symplectic import SymplecticJet, is_symplectic_jet

DEFAULT_RTOL = 1e-12
DEFAULT_ATOL = 1e-12
ORBIT_TOL = 1e-10
DEFECT_TOL = 1e-8


@dataclass(frozen=True)
class SectionChart:
    """The section ``x_index = value``; ``period`` is the period of that coordinate."""

    index: int = 0
    value: float = 0.0
    period: float | None = 2.0 * math.pi
    energy: float | None = None
    base_point: tuple | None = None

    def reduced_indices(self, dof: int):
        pos = [j for j in range(dof) if j != self.index]
        return pos + [dof + j for j in pos]

    def with_base(self, z, energy=None):
        return SectionChart(self.index, self.value, self.period, energy,
                            tuple(float(v) for v in z))

    def to_json(self):
        return {"index": self.index, "value": self.value, "period": self.period,
                "energy": self.energy,
                "base_point": None if self.base_point is None else list(self.base_point)}

    @classmethod
    def from_json(cls, d):
        bp = d.get("base_point")
        return cls(int(d.get("index", 0)), float(d.get("value", 0.0)), d.get("period", 2.0 * math.pi),
                   d.get("energy"), None if bp is None else tuple(bp))


def _now():
    return datetime.now(timezone.utc).isoformat()


@dataclass
class OrbitRecord:
    model: str
    energy: float
    initial_point: list
    period: float
    residual: float
    section: dict
    monodromy: list
    degenerate: bool = False
    iterations: int = 0
    energy_drift: float = 0.0
    poincare_order: int | None = None
    poincare_jet: dict | None = None
    classification: dict | None = None
    config_hash: str | None = None
    id: str = field(default_factory=lambda: uuid.uuid4().hex)
    created: str = field(default_factory=_now)

    @property
    def chart(self) -> SectionChart:
        return SectionChart.from_json(self.section)

    @property
    def linear_map(self):
        return np.asarray(self.monodromy, dtype=float)

    def jet(self) -> SymplecticJet | None:
        if self.poincare_jet is None:
            return None
        jm = JetMap.from_json(self.poincare_jet)
        return SymplecticJet(jm.basis, jm.coeffs, self.poincare_jet.get("defect"))

    def to_json(self):
        return asdict(self)

    @classmethod
    def from_json(cls, d):
        return cls(**d)


# helpers ----------------------------------------------------------------------

def _as_coeffs(v, b, dtype=float):
    if isinstance(v, Jet):
        return v.coeffs
    c = np.zeros(b.size, dtype=dtype)
    c[0] = v
    return c


def _field_on_jets(model, comps):
    b = comps[0].basis
    return [v if isinstance(v, Jet) else Jet(b, _as_coeffs(v, b)) for v in model.vector_field(comps)]


def _point_rhs(model):
    def rhs(_, z):
        return model.field_array(z)
    return rhs


def _check_energy(model, z0, z1, tol):
    e0, e1 = model.energy(z0), model.energy(z1)
    drift = abs(e1 - e0)
    if drift > tol * max(1.0, abs(e0)):
        raise IntegrationError(f"energy drift {drift:.3e} exceeds tolerance")
    return drift


def flow_point(model, z0, t, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL):
    return _ode.endpoint(_point_rhs(model), np.asarray(z0, dtype=float), 0.0, float(t),
                         rtol=rtol, atol=atol)


def integrate_jet_flow(model: HamiltonianModel, z0, t: float, k: int, rtol=DEFAULT_RTOL,
                       atol=DEFAULT_ATOL, max_step=np.inf, energy_tol=1e-8):
    """Endpoint and k-jet about ``z0`` of the time-``t`` flow.

    The jet of the trajectory is integrated directly: its coefficients obey
    the jet-level variational system ``Phi' = X o Phi``.
    """
    z0 = np.asarray(z0, dtype=float)
    m = 2 * model.dof
    if z0.shape != (m,):
        raise ShapeError(f"phase point must have {m} entries")
    b = basis(m, k)
    shape = (m, b.size)

    def rhs(_, y):
        comps = [Jet(b, row) for row in y.reshape(shape)]
        return np.concatenate([v.coeffs for v in _field_on_jets(model, comps)])

    y0 = JetMap.identity(m, k).coeffs.copy()
    y0[:, 0] = z0
    y1 = _ode.endpoint(rhs, y0.ravel(), 0.0, float(t), rtol=rtol, atol=atol, max_step=max_step)
    jm = JetMap(b, y1.reshape(shape))
    end = jm.constant.astype(float)
    _check_energy(model, z0, end, energy_tol)
    return end, jm


def solve_momentum(model, z, index: int, energy: float, guess=None, tol=1e-14, max_iter=60):
    """Adjust the momentum conjugate to ``x_index`` so that ``H(z) = energy``."""
    z = [float(v) for v in z]
    p = model.dof + index
    y = float(z[p] if guess is None else guess)
    for _ in range(max_iter):
        args = list(z)
        args[p] = Jet.variable(0, 1, 1, value=y)
        h = model.hamiltonian(args)
        f = float(h.coeffs[0]) - energy
        df = float(h.coeffs[1])
        if df == 0:
            raise TransversalityError("energy is stationary in the transverse momentum")
        step = f / df
        y -= step
        if abs(step) <= tol * max(1.0, abs(y)):
            break
    else:
        raise ConvergenceError("energy equation did not converge")
    z[p] = y
    if abs(model.energy(z) - energy) > 1e-10 * max(1.0, abs(energy)):
        raise ConvergenceError("energy equation did not converge")
    return np.array(z)


def time_to_section(model, z0, index: int, target: float, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL,
                    t_max=None):
    """First positive time at which ``x_index`` reaches ``target``.

    Located by an integrator event and polished with Newton steps along the
    flow.  Returns ``(time, endpoint)``.
    """
    z0 = np.asarray(z0, dtype=float)
    rhs = _point_rhs(model)
    v0 = rhs(0.0, z0)[index]
    if abs(v0) < 1e-12:
        raise TransversalityError("trajectory is tangent to the section")
    if t_max is None:
        t_max = 20.0 * abs(target - z0[index]) / abs(v0) + 1.0

    def event(_, z):
        return z[index] - target

    event.terminal = True
    event.direction = np.sign(target - z0[index])
    sol = _ode.integrate(rhs, z0, 0.0, t_max, rtol=rtol, atol=atol, events=event)
    if not len(sol.t_events[0]):
        raise TransversalityError("trajectory did not reach the section")
    t = float(sol.t_events[0][0])
    z = np.asarray(sol.y_events[0][0], dtype=float)
    for _ in range(4):
        v = rhs(0.0, z)[index]
        if abs(v) < 1e-12:
            raise TransversalityError("loss of transversality at the section")
        dt = (target - z[index]) / v
        if dt == 0.0:
            break
        z = _ode.endpoint(rhs, z, 0.0, dt, rtol=rtol, atol=atol)
        t += dt
        if abs(dt) < 1e-15 * max(1.0, t):
            break
    return t, z


def _return_target(chart: SectionChart, velocity: float):
    if chart.period is None:
        raise ShapeError("a return map needs a periodic section coordinate")
    return chart.value + chart.period * np.sign(velocity)


@lru_cache(maxsize=None)
def _embedding(m: int, k: int):
    small, big = basis(m, k), basis(m + 1, k)
    return np.array([big.index[tuple(e) + (0,)] for e in small.exponents])


def _embed(jm: JetMap) -> JetMap:
    """View a jet in ``m`` variables as a jet in ``m + 1`` (new variable last)."""
    m, k = jm.domain_vars, jm.order
    big = basis(m + 1, k)
    c = np.zeros((len(jm), big.size), dtype=jm.coeffs.dtype)
    c[:, _embedding(m, k)] = jm.coeffs
    return JetMap(big, c)


def _variables(m, k):
    return [Jet.variable(i, m, k) for i in range(m)]


def energy_embedding(model, chart: SectionChart, k: int) -> JetMap:
    """k-jet of the parametrization of the section at its base point.

    Reduced coordinates map to themselves; ``x_index`` is fixed and
    ``y_index`` solves ``H = H(base)`` order by order.
    """
    z0 = np.asarray(chart.base_point, dtype=float)
    dof = model.dof
    m = 2 * dof
    red = chart.reduced_indices(dof)
    i0, p0 = chart.index, dof + chart.index
    w = _variables(len(red), k)
    hy = model.field_array(z0)[i0]
    if abs(hy) < 1e-12:
        raise TransversalityError("dH/dy0 vanishes at the base point")
    zeta = Jet.zeros(len(red), k)
    zero = Jet.zeros(len(red), k)
    for _ in range(k):
        dev = [zero] * m
        for j, r in enumerate(red):
            dev[r] = w[j]
        dev[p0] = zeta
        args = [d + float(c) for d, c in zip(dev, z0)]
        resid = model.hamiltonian(args)
        resid = resid - resid.coeffs[0]
        zeta = zeta - resid / hy
    comps = [zero] * m
    for j, r in enumerate(red):
        comps[r] = w[j]
    comps[p0] = zeta
    return JetMap.from_components(comps)


def reduce_to_section(flow_jet: JetMap, model: HamiltonianModel, chart: SectionChart, target=None,
                      start_chart: SectionChart | None = None) -> SymplecticJet:
    """Reduce a flow jet to the jet of the section-to-section transfer map.

    ``flow_jet`` is the k-jet about ``chart.base_point`` of a flow map whose
    endpoint lies on ``{x_index = target}``.  Energy is eliminated on the
    start section, return time on the target section (both order by order);
    the result lives in reduced coordinates centred at the two base points.
    """
    k = flow_jet.order
    dof = model.dof
    red = chart.reduced_indices(dof)
    i0 = chart.index
    z1 = flow_jet.constant.astype(float)
    if target is None:
        target = _return_target(chart, model.field_array(chart.base_point)[i0])
    if abs(z1[i0] - target) > 1e-8 * max(1.0, abs(target)):
        raise TransversalityError(f"flow endpoint x={z1[i0]} is not on the section {target}")
    g = flow_jet.compose(energy_embedding(model, chart, k))
    mred = len(red)
    # Picard iteration for the flow jet in an extra time variable tau
    base = _embed(g)
    psi = base
    for _ in range(k + 1):
        vf = _field_on_jets(model, list(psi.components))
        psi = base + JetMap.from_components([v.integrate(mred) for v in vf])
    v1 = model.field_array(z1)[i0]
    if abs(v1) < 1e-12:
        raise TransversalityError("flow is tangent to the target section")
    w = _variables(mred, k)
    tau = Jet.zeros(mred, k)
    for _ in range(k):
        q = psi.compose(JetMap.from_components(w + [tau]))
        r = q[i0] - q[i0].coeffs[0]
        tau = tau - r / v1
    q = psi.compose(JetMap.from_components(w + [tau]))
    out = q.select(red).without_constant()
    if np.iscomplexobj(out.coeffs):
        out = out.real()
    _, defect = is_symplectic_jet(out, np.inf)
    return SymplecticJet(out.basis, out.coeffs, defect)


def return_map(model, z0, chart: SectionChart, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL):
    """``(T, z1)`` for the first return of ``z0`` to the section (unwrapped coordinates)."""
    v = model.field_array(z0)[chart.index]
    target = _return_target(chart, v)
    return time_to_section(model, z0, chart.index, target, rtol, atol)


def wrap_difference(d, periods):
    d = np.array(d, dtype=float)
    for i, p in enumerate(periods):
        if p:
            d[i] = (d[i] + 0.5 * p) % p - 0.5 * p
    return d


def _assemble(model, chart, w, energy, momentum):
    dof = model.dof
    z = np.zeros(2 * dof)
    z[chart.index] = chart.value
    z[chart.reduced_indices(dof)] = w
    z[dof + chart.index] = momentum
    return solve_momentum(model, z, chart.index, energy)


def find_closed_orbit(model: HamiltonianModel, energy: float, seed, chart: SectionChart,
                      momentum_guess: float = 1.0, max_iter: int = 30, tol=ORBIT_TOL,
                      degeneracy_tol=1e-7, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL) -> OrbitRecord:
    """Newton shooting for a fixed point of the return map on ``chart``.

    ``seed`` holds the reduced coordinates (other positions, then their
    momenta).  Orbits whose linearized return map has an eigenvalue near 1
    are flagged as degenerate rather than refined.
    """
    dof = model.dof
    red = chart.reduced_indices(dof)
    w = np.asarray(seed, dtype=float).copy()
    if w.shape != (len(red),):
        raise ShapeError(f"seed must have {len(red)} reduced coordinates")
    periods = [model.periods[j] if j < dof else None for j in red]
    y = momentum_guess
    for it in range(1, max_iter + 1):
        z0 = _assemble(model, chart, w, energy, y)
        y = z0[dof + chart.index]
        t, z1 = return_map(model, z0, chart, rtol, atol)
        diff = wrap_difference(z1[red] - w, periods)
        res = float(np.linalg.norm(diff))
        dp = reduced_linear_map(model, z0, t, chart, rtol=rtol, atol=atol)
        a = dp - np.eye(len(red))
        smin = float(np.linalg.svd(a, compute_uv=False)[-1])
        if res < tol:
            break
        if smin < degeneracy_tol:
            raise ConvergenceError(f"degenerate orbit: return map has eigenvalue 1 (sigma_min {smin:.2e})")
        w = w - np.linalg.solve(a, diff)
        for j, p in enumerate(periods):
            if p:
                w[j] = (w[j] + 0.5 * p) % p - 0.5 * p
    else:
        raise ConvergenceError(f"Newton did not converge in {max_iter} iterations (residual {res:.3e})")
    drift = abs(model.energy(z1) - model.energy(z0))
    c = chart.with_base(z0, energy)
    return OrbitRecord(model=model.name, energy=float(energy), initial_point=z0.tolist(), period=t,
                       residual=res, section=c.to_json(), monodromy=dp.tolist(),
                       degenerate=smin < degeneracy_tol, iterations=it, energy_drift=drift)


def orbit_closure_residual(model, record: OrbitRecord, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL):
    z0 = np.asarray(record.initial_point)
    z1 = flow_point(model, z0, record.period, rtol, atol)
    return float(np.linalg.norm(wrap_difference(z1 - z0, list(model.periods) + [None] * model.dof)))


def poincare_jet(model: HamiltonianModel, record: OrbitRecord, k: int, rtol=DEFAULT_RTOL,
                 atol=DEFAULT_ATOL, max_step=np.inf, defect_tol=DEFECT_TOL) -> SymplecticJet:
    """k-jet of the return map at the orbit; stored on the record."""
    if record.residual > 1e3 * ORBIT_TOL:
        raise ConvergenceError("orbit residual too large for a Poincaré jet")
    chart = record.chart
    _, fj = integrate_jet_flow(model, record.initial_point, record.period, k, rtol, atol, max_step)
    p = reduce_to_section(fj, model, chart)
    if p.defect > defect_tol:
        raise IntegrationError(f"Poincaré jet symplectic defect {p.defect:.2e} above {defect_tol:.0e}")
    data = p.to_json()
    data["defect"] = p.defect
    record.poincare_order = k
    record.poincare_jet = data
    return p


def section_transfer(model, z0, chart: SectionChart, s: float, k: int = 1, rtol=DEFAULT_RTOL,
                     atol=DEFAULT_ATOL, max_step=np.inf):
    """Jet of the transfer map from ``x_i = chart.value`` to ``x_i = chart.value + s``."""
    chart = chart.with_base(z0, chart.energy)
    if s == 0:
        return SymplecticJet(*_identity_parts(2 * model.dof - 2, k), 0.0), 0.0, np.asarray(z0, float)
    target = chart.value + s
    t, _ = time_to_section(model, z0, chart.index, target, rtol, atol)
    end, fj = integrate_jet_flow(model, z0, t, k, rtol, atol, max_step)
    return reduce_to_section(fj, model, chart, target), t, end


def _identity_parts(m, k):
    jm = JetMap.identity(m, k)
    return jm.basis, jm.coeffs


def intermediate_section_family(model, record: OrbitRecord, samples, rtol=DEFAULT_RTOL,
                                atol=DEFAULT_ATOL):
    """Linearized transfer maps to the intermediate sections ``x_i = value + s``.

    ``samples`` are section offsets ``s`` in units of the section coordinate.
    Returns ``[(s, matrix), ...]``.
    """
    out = []
    z0 = np.asarray(record.initial_point)
    direction = np.sign(model.field_array(z0)[record.chart.index])
    for s in samples:
        p, _, _ = section_transfer(model, z0, record.chart, direction * float(s), 1, rtol, atol)
        out.append((float(s), p.linear_part()))
    return out


def default_arc(record: OrbitRecord) -> float:
    """Default arc length (in the section coordinate) for perturbation windows."""
    period = record.chart.period
    return 0.25 * (period if period else 1.0)


# independent linear oracle ---------------------------------------------------------

def complex_step_jacobian(model, z, h=1e-20):
    z = np.asarray(z, dtype=float)
    m = z.size
    out = np.empty((m, m))
    for j in range(m):
        zc = z.astype(complex)
        zc[j] += 1j * h
        out[:, j] = np.imag(np.array(model.vector_field(list(zc)), dtype=complex)) / h
    return out


def monodromy_matrix(model, z0, t, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL):
    """Fundamental matrix of the variational equation (complex-step Jacobians)."""
    z0 = np.asarray(z0, dtype=float)
    m = z0.size

    def rhs(_, y):
        z = y[:m]
        v = y[m:].reshape(m, m)
        return np.concatenate([model.field_array(z), (complex_step_jacobian(model, z) @ v).ravel()])

    y = _ode.endpoint(rhs, np.concatenate([z0, np.eye(m).ravel()]), 0.0, float(t), rtol=rtol, atol=atol)
    return y[:m], y[m:].reshape(m, m)


def reduced_linear_map(model, z0, t, chart: SectionChart, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL):
    """Linear reduction of the monodromy matrix to the section (energy and time eliminated)."""
    dof = model.dof
    red = chart.reduced_indices(dof)
    i0, p0 = chart.index, dof + chart.index
    z1, mono = monodromy_matrix(model, z0, t, rtol, atol)
    m = 2 * dof
    x0 = model.field_array(z0)
    grad_h = np.concatenate([-x0[dof:], x0[:dof]])  # X = (dH/dy, -dH/dx)
    e = np.zeros((m, len(red)))
    for j, r in enumerate(red):
        e[r, j] = 1.0
        e[p0, j] = -grad_h[r] / grad_h[p0]
    x1 = model.field_array(z1)
    proj = np.eye(m) - np.outer(x1, np.eye(m)[i0]) / x1[i0]
    return (proj @ mono @ e)[red]
