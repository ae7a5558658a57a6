"""Spectral classification, resonance checks and the degree-3 Birkhoff normal form.

Orientation convention.  After the symplectic splitting each elliptic pair
gets coordinates ``(x_k, y_k)`` with ``omega = dx ^ dy`` and complex
coordinate ``z_k = x_k + i y_k``.  The normal form reads

    F_k(z) = exp(2 pi i phi_k(z)) z_k + O(|z|^4),
    phi_k(z) = a_k + sum_l beta_kl |z_l|^2,

so the time-1 map of ``K = 2 pi (a I + b I^2)``, ``I = (x^2 + y^2)/2``,
has rotation number ``-a mod 1`` and ``beta = -b``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.linalg import null_space

from .errors import ResonanceError, ShapeError
from .jets import JetMap
from .symplectic import is_symplectic_jet, lie_series_exp, standard_form, symplectic_defect

UNIT_TOL = 1e-9
RESONANCE_TOL = 1e-9
REPEAT_TOL = 1e-6


@dataclass
class SpectralClass:
    eigenvalues: list
    tag: str  # "hyperbolic", "q_elliptic" or "degenerate"
    q: int
    unit_tol: float
    pairing_defect: float
    reason: str | None = None

    @property
    def label(self):
        return f"{self.q}-elliptic" if self.tag == "q_elliptic" else self.tag

    def to_json(self):
        d = asdict(self)
        d["eigenvalues"] = [[float(np.real(v)), float(np.imag(v))] for v in self.eigenvalues]
        return d


def _pairing_defect(vals):
    vals = np.asarray(vals, dtype=complex)
    recip = 1.0 / vals
    # greedy matching of the spectrum with its reciprocals
    left = list(recip)
    worst = 0.0
    for v in vals:
        j = int(np.argmin([abs(v - r) for r in left]))
        worst = max(worst, abs(v - left[j]) / max(1.0, abs(v)))
        left.pop(j)
    return worst


def spectrum_classify(m, unit_tol=UNIT_TOL, repeat_tol=REPEAT_TOL, symplectic_tol=1e-6) -> SpectralClass:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] % 2:
        raise ShapeError("expected a 2n x 2n matrix")
    if symplectic_defect(m) > symplectic_tol * max(1.0, float(np.max(np.abs(m)))) ** 2:
        raise ValueError("matrix is not symplectic within tolerance")
    vals = np.linalg.eigvals(m)
    pairing = _pairing_defect(vals)
    on_circle = [v for v in vals if abs(abs(v) - 1.0) < unit_tol]
    near_one = [v for v in vals if min(abs(v - 1.0), abs(v + 1.0)) < unit_tol]
    elliptic = [v for v in on_circle if abs(v.imag) > unit_tol and v.imag > 0]
    reason = None
    if near_one:
        reason = "eigenvalue +-1"
    else:
        for a, b in itertools.combinations(elliptic, 2):
            if abs(a - b) < repeat_tol:
                reason = "repeated unit-circle pair"
                break
    if reason:
        return SpectralClass(list(vals), "degenerate", len(elliptic), unit_tol, pairing, reason)
    q = len(elliptic)
    tag = "q_elliptic" if q else "hyperbolic"
    return SpectralClass(list(vals), tag, q, unit_tol, pairing)


def resonance_vectors(q: int, order: int = 4):
    """Integer vectors with ``1 <= sum|m_i| <= order``, one from each ``+-m`` pair.

    Ordered by total order, then lexicographically.
    """
    out = []
    for total in range(1, order + 1):
        level = []
        for m in itertools.product(range(-total, total + 1), repeat=q):
            if sum(abs(v) for v in m) != total:
                continue
            first = next(v for v in m if v)
            if first > 0:
                level.append(m)
        out.extend(sorted(level))
    return out


def _dist_to_int(x):
    return abs(x - round(x))


def is_4_elementary(angles, tol=RESONANCE_TOL):
    """``(True, None)`` if no ``sum m_i a_i`` lies within ``tol`` of an integer
    for ``1 <= sum|m_i| <= 4``; otherwise ``(False, m)`` with the first offender."""
    a = [float(v) for v in np.atleast_1d(angles)]
    for m in resonance_vectors(len(a), 4):
        if _dist_to_int(sum(mi * ai for mi, ai in zip(m, a))) < tol:
            return False, m
    return True, None


# symplectic splitting ------------------------------------------------------------

@dataclass
class Splitting:
    matrix: np.ndarray  # symplectic, columns (u_1..u_q, e.., w_1..w_q, f..)
    multipliers: np.ndarray  # mu_k with z_k -> mu_k z_k
    q: int


def _symplectic_gram_schmidt(vectors, j):
    vs = [np.asarray(v, dtype=float) for v in vectors]
    es, fs = [], []
    while vs:
        e = vs.pop(0)
        om = [e @ j @ v for v in vs]
        if not om:
            raise ValueError("odd-dimensional complement")
        k = int(np.argmax(np.abs(om)))
        if abs(om[k]) < 1e-12:
            raise ValueError("complement is not symplectic")
        f = vs.pop(k) / om[k]
        vs = [v - (v @ j @ f) * e + (v @ j @ e) * f for v in vs]
        es.append(e)
        fs.append(f)
    return es, fs


def symplectic_splitting(lin, unit_tol=UNIT_TOL) -> Splitting:
    """Symplectic basis adapted to elliptic pairs followed by their omega-complement."""
    lin = np.asarray(lin, dtype=float)
    dim = lin.shape[0]
    n = dim // 2
    j = standard_form(n)
    vals, vecs = np.linalg.eig(lin)
    centre = []
    for i, lam in enumerate(vals):
        if abs(abs(lam) - 1.0) < unit_tol and abs(lam.imag) > unit_tol:
            v = vecs[:, i]
            u, w = v.real, v.imag
            om = u @ j @ w
            if om > 0:
                s = math.sqrt(om)
                centre.append((np.conj(lam), u / s, w / s))
    centre.sort(key=lambda c: np.angle(c[0]) % (2 * math.pi))
    q = len(centre)
    us = [c[1] for c in centre]
    ws = [c[2] for c in centre]
    es, fs = [], []
    if q < n:
        if q:
            comp = null_space(np.array(us + ws) @ j)
        else:
            comp = np.eye(dim)
        es, fs = _symplectic_gram_schmidt(list(comp.T), j)
    s = np.column_stack(us + es + ws + fs)
    return Splitting(s, np.array([c[0] for c in centre]), q)


# normal form -------------------------------------------------------------------

@dataclass
class NormalFormReport:
    rotation_numbers: list
    beta: list
    det_beta: float
    elementary: bool
    violating: list | None
    residual: float
    coupling: float
    symmetry_defect: float
    unit_tol: float = UNIT_TOL
    resonance_tol: float = RESONANCE_TOL
    multipliers: list = field(default_factory=list)
    transformed: object = field(default=None, repr=False, compare=False)

    def to_json(self):
        d = asdict(self)
        d.pop("transformed")
        d["multipliers"] = [[float(np.real(v)), float(np.imag(v))] for v in self.multipliers]
        return d


def _complexifier(q):
    eye = np.eye(q)
    a = np.block([[eye, 1j * eye], [eye, -1j * eye]])
    return a, np.linalg.inv(a)


def _resonant_cubic(exps, j, q):
    """True for ``z_j |z_l|^2`` in component ``j`` (or its conjugate in ``q + j``)."""
    target = np.zeros(2 * q, dtype=int)
    jj = j % q
    shift = 0 if j < q else q
    target[jj + shift] = 1
    for l in range(q):
        t = target.copy()
        t[l] += 1
        t[q + l] += 1
        if np.array_equal(exps, t):
            return True
    return False


def _normalize_degree(g: JetMap, nu, degree, q, tol):
    b = g.basis
    sl = b.degree_slice(degree)
    y = np.zeros_like(g.coeffs)
    for idx in range(sl.start, sl.stop):
        exps = b.exponents[idx]
        mono = np.prod(nu ** exps)
        for comp in range(2 * q):
            if degree == 3 and _resonant_cubic(exps, comp, q):
                continue
            den = mono - nu[comp]
            if abs(den) < tol:
                raise ResonanceError(f"resonant term of degree {degree} in component {comp}",
                                     index=tuple(int(e) for e in exps))
            y[comp, idx] = g.coeffs[comp, idx] / den
    gen = JetMap(b, y)
    phi = lie_series_exp(gen)
    phi_inv = lie_series_exp(-gen)
    return phi_inv.compose(g.compose(phi))


def _centre_restriction(f: JetMap, n, q):
    k = f.order
    centre_idx = list(range(q)) + list(range(n, n + q))
    emb = np.zeros((2 * n, 2 * q))
    for a, i in enumerate(centre_idx):
        emb[i, a] = 1.0
    on_centre = f.compose(JetMap.from_matrix(emb, k))
    other = [i for i in range(2 * n) if i not in centre_idx]
    coupling = 0.0
    if other:
        hi = on_centre.select(other).coeffs[:, 1 + 2 * q:]
        coupling = float(np.max(np.abs(hi))) if hi.size else 0.0
    return on_centre.select(centre_idx), coupling


def birkhoff_normal_form(p: JetMap, unit_tol=UNIT_TOL, resonance_tol=RESONANCE_TOL,
                         symplectic_tol=1e-8) -> NormalFormReport:
    """Degree-3 Birkhoff normal form on the elliptic block of a symplectic jet."""
    if p.order < 3:
        raise ShapeError("the normal form needs a jet of order >= 3")
    p = p.truncate(3)
    if np.any(p.coeffs[:, 0] != 0):
        raise ShapeError("jet must fix the origin")
    ok, defect = is_symplectic_jet(p, symplectic_tol)
    if not ok:
        raise ValueError(f"input jet is not symplectic (defect {defect:.2e})")
    n = p.domain_vars // 2
    split = symplectic_splitting(p.linear_part(), unit_tol)
    q = split.q
    if q == 0:
        raise ShapeError("no elliptic block")
    angles = [(np.angle(mu) / (2 * math.pi)) % 1.0 for mu in split.multipliers]
    elementary, bad = is_4_elementary(angles, resonance_tol)
    if not elementary:
        raise ResonanceError(f"rotation numbers {angles} are resonant", index=bad)
    s = split.matrix
    conj = JetMap.from_matrix(s, 3)
    f = p.compose(conj).left_multiply(np.linalg.inv(s))
    fc, coupling = _centre_restriction(f, n, q)
    a, a_inv = _complexifier(q)
    g = fc.compose(JetMap.from_matrix(a_inv, 3)).left_multiply(a)
    nu = np.concatenate([split.multipliers, np.conj(split.multipliers)])
    g = _normalize_degree(g, nu, 2, q, resonance_tol)
    g = _normalize_degree(g, nu, 3, q, resonance_tol)
    b = g.basis
    beta = np.zeros((q, q), dtype=complex)
    for k in range(q):
        for l in range(q):
            e = [0] * (2 * q)
            e[k] += 1
            e[l] += 1
            e[q + l] += 1
            beta[k, l] = g.coeffs[k, b.index[tuple(e)]] / (2j * math.pi * nu[k])
    residual = 0.0
    sl2 = b.degree_slice(2)
    residual = max(residual, float(np.max(np.abs(g.coeffs[:, sl2]))))
    sl3 = b.degree_slice(3)
    for idx in range(sl3.start, sl3.stop):
        for comp in range(2 * q):
            if not _resonant_cubic(b.exponents[idx], comp, q):
                residual = max(residual, abs(g.coeffs[comp, idx]))
    scale = max(1.0, float(np.max(np.abs(beta))))
    sym = float(max(np.max(np.abs(beta.imag)), np.max(np.abs(beta - beta.T)))) / scale
    if sym > 1e-6:
        raise ValueError(f"twist matrix is not real symmetric (defect {sym:.2e})")
    beta = beta.real
    return NormalFormReport(angles, beta.tolist(), float(np.linalg.det(beta)), True, None,
                            residual, coupling, sym, unit_tol, resonance_tol,
                            list(split.multipliers), g)


def is_weakly_monotonous(report: NormalFormReport, tol=1e-8) -> bool:
    return abs(report.det_beta) > tol


# pipeline ----------------------------------------------------------------------

@dataclass
class Classification:
    verdict: str  # "hyperbolic", "weakly_monotonous_quasi_elliptic" or "other"
    reason: str | None
    spectrum: SpectralClass
    normal_form: NormalFormReport | None = None
    violating: list | None = None
    coupled: bool = False

    def to_json(self):
        return {
            "verdict": self.verdict,
            "reason": self.reason,
            "spectral_class": self.spectrum.label,
            "spectrum": self.spectrum.to_json(),
            "normal_form": None if self.normal_form is None else self.normal_form.to_json(),
            "violating": None if self.violating is None else list(self.violating),
            "coupled": self.coupled,
        }


def classify_jet(p: JetMap, unit_tol=UNIT_TOL, resonance_tol=RESONANCE_TOL, twist_tol=1e-8,
                 coupling_tol=1e-8) -> Classification:
    spec = spectrum_classify(p.linear_part(), unit_tol)
    if spec.tag == "degenerate":
        return Classification("other", "degenerate", spec)
    if spec.tag == "hyperbolic":
        return Classification("hyperbolic", None, spec)
    split = symplectic_splitting(p.linear_part(), unit_tol)
    angles = [(np.angle(mu) / (2 * math.pi)) % 1.0 for mu in split.multipliers]
    ok, bad = is_4_elementary(angles, resonance_tol)
    if not ok:
        return Classification("other", "resonant", spec, violating=list(bad))
    report = birkhoff_normal_form(p, unit_tol, resonance_tol)
    coupled = report.coupling > coupling_tol
    if is_weakly_monotonous(report, twist_tol):
        return Classification("weakly_monotonous_quasi_elliptic", None, spec, report, coupled=coupled)
    return Classification("other", "zero-twist", spec, report, coupled=coupled)


def classify_orbit(record, model=None, k: int = 3, unit_tol=UNIT_TOL, resonance_tol=RESONANCE_TOL,
                   twist_tol=1e-8) -> Classification:
    """Classify a closed orbit; computes its Poincaré jet if the record lacks one."""
    from .flow import poincare_jet

    p = record.jet()
    if p is None or (record.poincare_order or 0) < 3:
        if model is None:
            raise ShapeError("record has no Poincaré jet of order >= 3 and no model was given")
        p = poincare_jet(model, record, max(k, 3))
    result = classify_jet(p, unit_tol, resonance_tol, twist_tol)
    record.classification = result.to_json()
    return result


__all__ = [
    "SpectralClass",
    "spectrum_classify",
    "is_4_elementary",
    "resonance_vectors",
    "symplectic_splitting",
    "NormalFormReport",
    "birkhoff_normal_form",
    "is_weakly_monotonous",
    "Classification",
    "classify_jet",
    "classify_orbit",
]
