from __future__ import annotations

import pytest

import property_suites as ps


def test_gamma_annihilates_stoichiometry():
    assert ps.conservation_suite() == []


def test_support_rule_on_random_states():
    assert ps.support_suite(n_states=1000) == []


def test_closure_algorithms_agree():
    assert ps.closure_suite(n_graphs=100, max_n=50) == []


def test_inverse_network_duality():
    assert ps.duality_suite(n_pairs=1000) == []


def test_additive_witness_replay():
    assert ps.additive_suite(n_triples=100) == []


@pytest.mark.slow
def test_all_certificates_verify():
    assert ps.certificate_suite() == []
