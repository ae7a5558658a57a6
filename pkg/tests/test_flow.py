import math

import numpy as np
import pytest
from scipy.linalg import expm

from poincare_jets.errors import ShapeError
from poincare_jets.flow import (OrbitRecord, SectionChart, find_closed_orbit, flow_point,
                                integrate_jet_flow, intermediate_section_family, orbit_closure_residual,
                                poincare_jet, reduced_linear_map, return_map, solve_momentum)
from poincare_jets.general_position import is_k_general_family
from poincare_jets.jets import JetMap
from poincare_jets.models import (MechanicalHamiltonian, TransformedModel, TrigPolynomialPotential,
                                  harmonic_transverse, inverted_pendulum_torus, pendulum_torus_pair)
from poincare_jets.symplectic import is_symplectic_matrix


def test_harmonic_flow_full_period_is_identity():
    h = MechanicalHamiltonian([[1.0]], TrigPolynomialPotential(1, quadratic=[[1.0]]))
    end, jm = integrate_jet_flow(h, [0.0, 0.0], 2 * math.pi, 3)
    assert np.allclose(end, 0, atol=1e-12)
    assert jm.max_abs_diff(JetMap.identity(2, 3)) < 1e-10


def test_quadratic_flow_matches_expm():
    q = np.array([[2.0, 0.5], [0.5, 1.0]])
    inv = np.array([[1.0, 0.2], [0.2, 0.7]])
    h = MechanicalHamiltonian(inv, TrigPolynomialPotential(2, quadratic=q))
    a = np.block([[np.zeros((2, 2)), inv], [-q, np.zeros((2, 2))]])
    _, jm = integrate_jet_flow(h, np.zeros(4), 1.3, 2)
    assert np.max(np.abs(jm.linear_part() - expm(1.3 * a))) < 1e-10
    assert np.max(np.abs(jm.coeffs[:, 5:])) < 1e-12


def test_jet_flow_matches_point_flow(pendulum):
    z0 = np.array([0.1, 0.4, 1.5, -0.3])
    end, jm = integrate_jet_flow(pendulum, z0, 1.7, 2)
    assert np.allclose(end, flow_point(pendulum, z0, 1.7), atol=1e-11)
    dz = np.array([1e-3, -2e-3, 5e-4, 1e-3])
    taylor = np.array([c.evaluate(list(dz)) for c in jm.components])
    assert np.max(np.abs(taylor - flow_point(pendulum, z0 + dz, 1.7))) < 1e-7


def test_bad_point_shape(pendulum):
    with pytest.raises(ShapeError):
        integrate_jet_flow(pendulum, [0.0, 1.0], 1.0, 1)


def test_solve_momentum(pendulum):
    z = solve_momentum(pendulum, [0.0, 0.5, 2.0, 0.1], 0, 3.0)
    assert pendulum.energy(z) == pytest.approx(3.0, abs=1e-13)


def test_pendulum_orbit(orbit_45, pendulum):
    assert orbit_45.residual < 1e-10
    assert abs(orbit_45.period - 2 * math.pi / 3) < 1e-8
    assert orbit_45.initial_point[2] == pytest.approx(3.0)
    assert not orbit_45.degenerate
    ev = np.sort_complex(np.linalg.eigvals(orbit_45.linear_map))
    want = np.sort_complex(np.exp([2j * math.pi / 3, -2j * math.pi / 3]))
    assert np.max(np.abs(ev - want)) < 1e-6
    assert orbit_closure_residual(pendulum, orbit_45) < 1e-10


def test_orbit_recovered_from_perturbed_seed(chart):
    h = harmonic_transverse(1.3)
    rec = find_closed_orbit(h, 2.0, [0.01, -0.01], chart, momentum_guess=2.0)
    assert rec.residual < 1e-10
    assert np.allclose(rec.initial_point[1], 0, atol=1e-10)
    assert np.allclose(rec.initial_point[3], 0, atol=1e-10)


def test_degenerate_orbit_flagged(pendulum, chart):
    # y0 = 1 gives period 2 pi, exactly one transverse oscillation: linear map = identity
    rec = find_closed_orbit(pendulum, 0.5, [0.0, 0.0], chart, momentum_guess=1.0)
    assert rec.degenerate
    assert np.allclose(rec.linear_map, np.eye(2), atol=1e-8)


def test_hyperbolic_orbit(chart):
    rec = find_closed_orbit(inverted_pendulum_torus(), 4.5, [0.0, 0.0], chart, momentum_guess=3.0)
    ev = np.abs(np.linalg.eigvals(rec.linear_map))
    assert ev.max() > 1.5 and ev.min() < 1 / 1.5


def test_pair_model_block_rotation(chart):
    rec = find_closed_orbit(pendulum_torus_pair(), 4.5, [0, 0, 0, 0], chart, momentum_guess=3.0)
    lin = np.asarray(rec.linear_map)
    assert is_symplectic_matrix(lin, 1e-9)
    angles = sorted(np.abs(np.angle(np.linalg.eigvals(lin))))
    # transverse frequencies 1 and sqrt(2) over the period 2 pi / 3, folded to [0, pi]
    folded = [abs(math.remainder(w * 2 * math.pi / 3, 2 * math.pi)) for w in (1.0, math.sqrt(2))]
    want = sorted(folded * 2)
    assert np.allclose(angles, want, atol=1e-8)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_poincare_jet_is_symplectic(orbit_45, pendulum, k):
    p = poincare_jet(pendulum, orbit_45, k)
    assert p.defect < 1e-8
    assert orbit_45.poincare_jet["defect"] == p.defect


def test_poincare_linear_part_matches_monodromy_oracle(orbit_45, pendulum):
    p = poincare_jet(pendulum, orbit_45, 1)
    oracle = reduced_linear_map(pendulum, orbit_45.initial_point, orbit_45.period, orbit_45.chart)
    assert np.max(np.abs(p.linear_part() - oracle)) < 1e-9


def test_projection_naturality(orbit_45, pendulum):
    p3 = poincare_jet(pendulum, orbit_45, 3)
    p2 = poincare_jet(pendulum, orbit_45, 2)
    assert p3.truncate(2).max_abs_diff(p2) < 1e-10


def test_halving_tolerance_is_stable(orbit_45, pendulum):
    a = poincare_jet(pendulum, orbit_45, 3, rtol=1e-11, atol=1e-11)
    b = poincare_jet(pendulum, orbit_45, 3, rtol=5e-12, atol=5e-12)
    assert a.max_abs_diff(b) < 1e-8


def test_poincare_jet_matches_numerical_return_map(orbit_45, pendulum, chart):
    p = poincare_jet(pendulum, orbit_45, 3)
    z0 = np.array(orbit_45.initial_point)
    for w in ([1e-2, -2e-2], [3e-2, 1e-2]):
        z = z0.copy()
        z[[1, 3]] = w
        z = solve_momentum(pendulum, z, 0, 4.5)
        _, z1 = return_map(pendulum, z, chart)
        taylor = np.array([c.evaluate(list(w)) for c in p.components])
        assert np.max(np.abs(z1[[1, 3]] - taylor)) < 50 * np.max(np.abs(w)) ** 4


def test_chart_independence(orbit_45, pendulum, chart):
    th = 0.4
    s = np.array([[math.cos(th), math.sin(th)], [-math.sin(th), math.cos(th)]])
    c = np.eye(4)
    c[np.ix_([1, 3], [1, 3])] = s
    conj = TransformedModel(pendulum, c)
    rec = find_closed_orbit(conj, 4.5, [0.0, 0.0], chart, momentum_guess=3.0)
    pt = poincare_jet(conj, rec, 3)
    p = poincare_jet(pendulum, orbit_45, 3)
    sj, si = JetMap.from_matrix(s, 3), JetMap.from_matrix(np.linalg.inv(s), 3)
    assert si.compose(p).compose(sj).max_abs_diff(pt) < 1e-9


def test_record_json_round_trip(orbit_45, pendulum):
    poincare_jet(pendulum, orbit_45, 2)
    back = OrbitRecord.from_json(orbit_45.to_json())
    assert back.jet().max_abs_diff(orbit_45.jet()) == 0
    assert back.chart.base_point == orbit_45.chart.base_point


def test_intermediate_family(orbit_45, pendulum):
    fam = intermediate_section_family(pendulum, orbit_45, [0.0, 0.5, 1.0])
    assert np.array_equal(fam[0][1], np.eye(2))
    # transverse pendulum linearization: rotation by angle s / y0
    for s, m in fam[1:]:
        th = s / 3.0
        want = np.array([[math.cos(th), math.sin(th)], [-math.sin(th), math.cos(th)]])
        assert np.allclose(m, want, atol=1e-9)


def test_pendulum_family_is_k_general(orbit_45, pendulum):
    samples = intermediate_section_family(pendulum, orbit_45, np.linspace(0.2, 1.6, 8))
    v = is_k_general_family(samples, 3)
    assert v.verdict and v.rank == 4


def test_return_map_needs_periodic_chart(pendulum):
    with pytest.raises(ShapeError):
        return_map(pendulum, [0.0, 0.0, 3.0, 0.0], SectionChart(0, 0.0, None))
