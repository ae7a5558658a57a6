import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from poincare_jets.classify import (birkhoff_normal_form, classify_jet, classify_orbit, is_4_elementary,
                                    is_weakly_monotonous, resonance_vectors, spectrum_classify,
                                    symplectic_splitting)
from poincare_jets.errors import ResonanceError, ShapeError
from poincare_jets.flow import OrbitRecord, find_closed_orbit
from poincare_jets.jets import Jet, JetMap
from poincare_jets.models import inverted_pendulum_torus, pendulum_torus_pair
from poincare_jets.symplectic import hamiltonian_field_from_jet, jet_exp, symplectic_defect


def rot(t):
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, s], [-s, c]])


def twist_map(a, b, order=3):
    """Time-1 map of K = 2 pi (a I + b I^2), I = (x^2 + y^2)/2."""
    x, y = Jet.variable(0, 2, order + 1), Jet.variable(1, 2, order + 1)
    i = (x * x + y * y) * 0.5
    return jet_exp(hamiltonian_field_from_jet(2 * math.pi * (a * i + b * i * i)), 1.0)


def twist_pair(a1, b1, a2, b2, c):
    v = [Jet.variable(i, 4, 4) for i in range(4)]
    i1 = (v[0] * v[0] + v[2] * v[2]) * 0.5
    i2 = (v[1] * v[1] + v[3] * v[3]) * 0.5
    k = 2 * math.pi * (a1 * i1 + b1 * i1 * i1 + a2 * i2 + b2 * i2 * i2 + c * i1 * i2)
    return jet_exp(hamiltonian_field_from_jet(k), 1.0)


def random_symplectic(rng, n):
    a = rng.normal(size=(n, n)) + 2 * np.eye(n)
    s = rng.normal(size=(n, n))
    s = s + s.T
    upper = np.block([[np.eye(n), s], [np.zeros((n, n)), np.eye(n)]])
    diag = np.block([[a, np.zeros((n, n))], [np.zeros((n, n)), np.linalg.inv(a).T]])
    return upper @ diag


# spectra ----------------------------------------------------------------------

def test_spectrum_examples():
    assert spectrum_classify(np.eye(2)).tag == "degenerate"
    assert spectrum_classify(np.diag([2.0, 0.5])).tag == "hyperbolic"
    c = spectrum_classify(rot(2 * math.pi / 3))
    assert c.label == "1-elliptic" and c.q == 1
    assert c.pairing_defect < 1e-12


def test_spectrum_mixed_and_repeated():
    m = np.zeros((4, 4))
    m[np.ix_([0, 2], [0, 2])] = rot(1.0)
    m[np.ix_([1, 3], [1, 3])] = np.diag([3.0, 1 / 3])
    c = spectrum_classify(m)
    assert c.tag == "q_elliptic" and c.q == 1
    m[np.ix_([1, 3], [1, 3])] = rot(1.0)
    assert spectrum_classify(m).reason == "repeated unit-circle pair"


def test_spectrum_rejects_non_symplectic():
    with pytest.raises(ValueError):
        spectrum_classify(np.diag([2.0, 1.0]))
    with pytest.raises(ShapeError):
        spectrum_classify(np.eye(3))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_spectrum_pairs_under_conjugation(seed):
    rng = np.random.default_rng(seed)
    s = random_symplectic(rng, 2)
    m = np.zeros((4, 4))
    m[np.ix_([0, 2], [0, 2])] = rot(rng.uniform(0.3, 2.8))
    m[np.ix_([1, 3], [1, 3])] = rot(rng.uniform(0.3, 2.8))
    c = spectrum_classify(np.linalg.inv(s) @ m @ s, unit_tol=1e-7)
    assert c.pairing_defect < 1e-7


def test_splitting_is_symplectic():
    rng = np.random.default_rng(3)
    s = random_symplectic(rng, 2)
    m = np.zeros((4, 4))
    m[np.ix_([0, 2], [0, 2])] = rot(0.7)
    m[np.ix_([1, 3], [1, 3])] = np.diag([2.0, 0.5])
    split = symplectic_splitting(np.linalg.inv(s) @ m @ s)
    assert split.q == 1
    assert symplectic_defect(split.matrix) < 1e-9


# resonances ----------------------------------------------------------------------

def test_resonance_vector_order():
    assert resonance_vectors(1) == [(1,), (2,), (3,), (4,)]
    vs = resonance_vectors(2, 2)
    assert vs == [(0, 1), (1, 0), (0, 2), (1, -1), (1, 1), (2, 0)]


def test_is_4_elementary_examples():
    assert is_4_elementary([0.25]) == (False, (4,))
    assert is_4_elementary([math.sqrt(2) - 1]) == (True, None)
    assert is_4_elementary([0.3, 0.1]) == (False, (1, -3))
    assert is_4_elementary([1 / 3])[1] == (3,)


def brute_force_resonant(angles, tol=1e-9):
    q = len(angles)
    for m in itertools.product(range(-4, 5), repeat=q):
        total = sum(abs(v) for v in m)
        if 1 <= total <= 4:
            s = sum(mi * ai for mi, ai in zip(m, angles))
            if abs(s - round(s)) < tol:
                return True
    return False


angle = st.one_of(
    st.builds(lambda p, q: p / q, st.integers(0, 12), st.integers(1, 6)),
    st.floats(0.0, 1.0, allow_nan=False),
)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 3).flatmap(lambda q: st.lists(angle, min_size=q, max_size=q)))
def test_is_4_elementary_matches_brute_force(angles):
    ok, m = is_4_elementary(angles)
    assert ok == (not brute_force_resonant(angles))
    if m is not None:
        s = sum(mi * ai for mi, ai in zip(m, angles))
        assert abs(s - round(s)) < 1e-9


# normal form -------------------------------------------------------------------

@pytest.mark.parametrize("a,b", [(0.13, 0.2), (0.77, -0.5), (0.41, 1.3)])
def test_normal_form_twist_oracle(a, b):
    r = birkhoff_normal_form(twist_map(a, b))
    assert r.rotation_numbers[0] == pytest.approx((-a) % 1.0, abs=1e-10)
    assert r.beta[0][0] == pytest.approx(-b, abs=1e-8)
    assert r.residual < 1e-8
    assert is_weakly_monotonous(r)


def test_normal_form_two_modes_cross_term():
    r = birkhoff_normal_form(twist_pair(0.13, 0.2, 0.31, -0.4, 0.3))
    beta = np.array(r.beta)
    # elliptic pairs are sorted by angle: (-0.31) % 1 < (-0.13) % 1
    assert np.allclose(beta, [[0.4, -0.15], [-0.15, -0.2]], atol=1e-8)
    assert r.residual < 1e-8


def test_normal_form_invariant_under_conjugation():
    p = twist_pair(0.13, 0.2, 0.31, -0.4, 0.3)
    base = birkhoff_normal_form(p)
    rng = np.random.default_rng(4)
    s = random_symplectic(rng, 2)
    pc = JetMap.from_matrix(np.linalg.inv(s), 3).compose(p.compose(JetMap.from_matrix(s, 3)))
    r = birkhoff_normal_form(pc)
    assert np.allclose(r.rotation_numbers, base.rotation_numbers, atol=1e-9)
    assert np.allclose(r.beta, base.beta, atol=1e-7)


def test_normal_form_resonance_and_shape_errors():
    with pytest.raises(ResonanceError) as info:
        birkhoff_normal_form(twist_map(0.25, 0.3))
    assert info.value.index == (4,)
    with pytest.raises(ShapeError):
        birkhoff_normal_form(twist_map(0.13, 0.2).truncate(2))


def test_zero_twist_is_other():
    c = classify_jet(twist_map(0.13, 0.0))
    assert c.verdict == "other" and c.reason == "zero-twist"


# orbits -------------------------------------------------------------------------

def test_classify_resonant_orbit(orbit_45, pendulum):
    c = classify_orbit(orbit_45, pendulum)
    assert c.verdict == "other" and c.reason == "resonant" and c.violating == [3]
    assert orbit_45.classification["verdict"] == "other"


def test_classify_twist_orbit(orbit_23, pendulum):
    c = classify_orbit(orbit_23, pendulum)
    assert c.verdict == "weakly_monotonous_quasi_elliptic"
    assert c.normal_form.beta[0][0] < 0
    assert c.normal_form.residual < 1e-8


def test_classify_hyperbolic(chart):
    m = inverted_pendulum_torus()
    rec = find_closed_orbit(m, 4.5, [0.0, 0.0], chart, momentum_guess=3.0)
    assert classify_orbit(rec, m).verdict == "hyperbolic"


def test_classify_pair(chart):
    m = pendulum_torus_pair()
    rec = find_closed_orbit(m, 2.3, [0, 0, 0, 0], chart, momentum_guess=2.0)
    c = classify_orbit(rec, m)
    assert c.spectrum.q == 2
    assert c.verdict == "weakly_monotonous_quasi_elliptic"


def test_classify_needs_jet_or_model(orbit_45):
    bare = OrbitRecord.from_json({**orbit_45.to_json(), "poincare_jet": None, "poincare_order": None})
    with pytest.raises(ShapeError):
        classify_orbit(bare)
