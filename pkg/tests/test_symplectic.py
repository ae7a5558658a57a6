import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from poincare_jets import jets
from poincare_jets.errors import ShapeError
from poincare_jets.jets import Jet, JetMap
from poincare_jets.symplectic import (SymplecticJet, hamiltonian_field_from_jet, is_symplectic_jet,
                                      is_symplectic_matrix, jet_bracket, jet_exp, lie_series_exp,
                                      poisson_bracket, standard_form)


def random_hamiltonian(rng, n, k, low=2, scale=1.0):
    """(k+1)-jet in 2n variables with only degrees low..k+1."""
    b = jets.basis(2 * n, k + 1)
    c = np.zeros(b.size)
    lo = b.offsets[low]
    c[lo:] = rng.normal(scale=scale, size=b.size - lo)
    return Jet(b, c)


def test_standard_form():
    j = standard_form(1)
    assert np.array_equal(j, [[0, 1], [-1, 0]])


def test_harmonic_field():
    h = Jet.from_terms({(2, 0): 0.5, (0, 2): 0.5}, 2, 2)
    x = hamiltonian_field_from_jet(h).field
    assert np.allclose(x.linear_part(), [[0, 1], [-1, 0]])


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_monomial_field(k):
    # h = x1^(k+1) in two degrees of freedom: only the y1 slot is nonzero
    e = [0, 0, 0, 0]
    e[0] = k + 1
    h = Jet.from_terms({tuple(e): 1.0}, 4, k + 1)
    x = hamiltonian_field_from_jet(h).field
    want = [0, 0, 0, 0]
    want[0] = k
    assert dict(x[2].terms()) == {tuple(want): -(k + 1)}
    for i in (0, 1, 3):
        assert x[i].max_abs() == 0


def test_field_rejects_bad_input():
    with pytest.raises(ShapeError):
        hamiltonian_field_from_jet(Jet.variable(0, 3, 3) ** 2)
    with pytest.raises(ValueError):
        hamiltonian_field_from_jet(Jet.variable(0, 2, 3))


def test_quadratic_flows_match_expm():
    rng = np.random.default_rng(10)
    for _ in range(10):
        n = int(rng.integers(1, 3))
        h = random_hamiltonian(rng, n, 1)
        f = hamiltonian_field_from_jet(h)
        t = float(rng.uniform(0.2, 1.5))
        phi = jet_exp(f, t)
        a = f.field.linear_part()
        assert np.max(np.abs(phi.linear_part() - expm(t * a))) < 1e-10
        assert isinstance(phi, SymplecticJet) and phi.defect < 1e-10


def test_cubic_flow_closed_form():
    # h = x^3: x' = 0, y' = -3x^2, flow (x, y - 3 t x^2)
    h = Jet.from_terms({(3, 0): 1.0}, 2, 3)
    t = 0.7
    phi = jet_exp(hamiltonian_field_from_jet(h), t)
    want = JetMap.from_components([Jet.from_terms({(1, 0): 1.0}, 2, 2),
                                   Jet.from_terms({(0, 1): 1.0, (2, 0): -3 * t}, 2, 2)])
    assert phi.max_abs_diff(want) < 1e-12


def test_lie_series_matches_integrated_flow():
    rng = np.random.default_rng(11)
    h = random_hamiltonian(rng, 2, 3, low=3, scale=0.3)
    f = hamiltonian_field_from_jet(h)
    assert lie_series_exp(f.field).max_abs_diff(jet_exp(f, 1.0)) < 1e-11


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 2), st.integers(1, 3), st.integers(0, 10_000))
def test_hamiltonian_flows_are_symplectic(n, k, seed):
    rng = np.random.default_rng(seed)
    f = hamiltonian_field_from_jet(random_hamiltonian(rng, n, k, scale=0.5))
    phi = jet_exp(f, 0.5)
    ok, defect = is_symplectic_jet(phi, 1e-9)
    assert ok, defect


def test_bracket_linear_commutator():
    rng = np.random.default_rng(12)
    a = hamiltonian_field_from_jet(random_hamiltonian(rng, 2, 1))
    b = hamiltonian_field_from_jet(random_hamiltonian(rng, 2, 1))
    ma, mb = a.field.linear_part(), b.field.linear_part()
    c = jet_bracket(a, b).field.linear_part()
    assert np.allclose(c, ma @ mb - mb @ ma)


def test_bracket_jacobi_identity():
    rng = np.random.default_rng(13)
    x, y, z = (hamiltonian_field_from_jet(random_hamiltonian(rng, 1, 3)) for _ in range(3))
    total = (jet_bracket(x, jet_bracket(y, z)).field + jet_bracket(y, jet_bracket(z, x)).field
             + jet_bracket(z, jet_bracket(x, y)).field)
    assert np.max(np.abs(total.coeffs)) < 1e-10


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 2), st.integers(2, 3), st.integers(0, 10_000))
def test_bracket_is_poisson_field(n, k, seed):
    rng = np.random.default_rng(seed)
    f, g = random_hamiltonian(rng, n, k), random_hamiltonian(rng, n, k)
    br = jet_bracket(hamiltonian_field_from_jet(f), hamiltonian_field_from_jet(g))
    # {f, g} is exact through degree k, so its field is exact through k - 1
    via_pb = hamiltonian_field_from_jet(poisson_bracket(f, g).truncate(k)).field
    assert br.field.truncate(k - 1).max_abs_diff(via_pb) < 1e-10


def test_is_symplectic_examples():
    shear = JetMap.from_components([Jet.variable(0, 2, 3),
                                    Jet.variable(1, 2, 3) + Jet.variable(0, 2, 3) ** 2])
    ok, defect = is_symplectic_jet(shear)
    assert ok and defect == 0
    stretch = JetMap.from_matrix(np.diag([2.0, 1.0]), 2)
    ok, defect = is_symplectic_jet(stretch)
    assert not ok and defect == pytest.approx(1.0)
    with pytest.raises(ValueError):
        SymplecticJet.certify(stretch)


def test_is_symplectic_matrix():
    assert is_symplectic_matrix(expm(np.array([[0.0, 1.0], [-2.0, 0.0]])))
    assert not is_symplectic_matrix(np.diag([1.0, 2.0]))
