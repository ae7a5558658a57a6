"""Taylor jets of Poincaré return maps along periodic Hamiltonian trajectories.

Submodules:

* ``jets`` / ``exact``: truncated multivariate power series (float, complex
  or exact rational coefficients) and small exact linear algebra;
* ``symplectic``: symplectic jets, Hamiltonian jet fields, flows, brackets;
* ``general_position``: k-general position certificates for tuples of
  symplectic matrices;
* ``models`` / ``flow``: model Hamiltonians, jet transport, closed orbits and
  section reduction;
* ``classify``: spectra, resonances and the degree-3 Birkhoff normal form;
* ``perturbation``: localized potential perturbations and their jet effects;
* ``config`` / ``db`` / ``cli``: command-line front end.
"""

from .jets import Jet, JetMap, homogeneous_dim, jet_compose, jet_invert, jet_mul, multidegrees
from .symplectic import (HamiltonianJetField, SymplecticJet, hamiltonian_field_from_jet, is_symplectic_jet,
                         jet_bracket, jet_exp)
from .general_position import construct_witness, find_witness_times, is_k_general_family, is_k_general_tuple
from .flow import (OrbitRecord, SectionChart, find_closed_orbit, integrate_jet_flow,
                   intermediate_section_family, poincare_jet, reduce_to_section)
from .classify import (birkhoff_normal_form, classify_orbit, is_4_elementary, is_weakly_monotonous,
                       spectrum_classify)

__version__ = "0.1.0"

__all__ = [
    "Jet",
    "JetMap",
    "homogeneous_dim",
    "multidegrees",
    "jet_mul",
    "jet_compose",
    "jet_invert",
    "SymplecticJet",
    "HamiltonianJetField",
    "hamiltonian_field_from_jet",
    "jet_exp",
    "jet_bracket",
    "is_symplectic_jet",
    "is_k_general_tuple",
    "construct_witness",
    "find_witness_times",
    "is_k_general_family",
    "SectionChart",
    "OrbitRecord",
    "integrate_jet_flow",
    "find_closed_orbit",
    "reduce_to_section",
    "poincare_jet",
    "intermediate_section_family",
    "spectrum_classify",
    "is_4_elementary",
    "birkhoff_normal_form",
    "is_weakly_monotonous",
    "classify_orbit",
]
