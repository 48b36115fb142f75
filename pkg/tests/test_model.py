from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crnspace.io import corpus_names, load_corpus
from crnspace.model import (
    AssumptionViolated,
    GuardedExpression,
    MassAction,
    Permutation,
    ReactionNetwork,
    compile_propensities,
    conservation_data,
    inverse_network,
    permute_network,
    propensity_eval,
    validate_support_rule,
)
from crnspace.expr import parse_expression


def two_s():
    return ReactionNetwork(("S",), [[0, 2]], [[2, 0]], (MassAction(Fraction(1)), MassAction(Fraction(1))))


def test_network_shape_and_stoichiometry():
    net = two_s()
    assert (net.d, net.K) == (1, 2)
    assert net.stoichiometry.tolist() == [[2, -2]]
    with pytest.raises(ValueError):
        net.reactants[0, 0] = 5


def test_invalid_networks_are_rejected():
    with pytest.raises(ValueError):
        ReactionNetwork(("S", "S"), [[1], [0]], [[0], [0]], (MassAction(Fraction(1)),))
    with pytest.raises(ValueError):
        ReactionNetwork(("S",), [[-1]], [[0]], (MassAction(Fraction(1)),))
    with pytest.raises(ValueError):
        MassAction(Fraction(0))


def test_mass_action_uses_binomial_counts():
    net = two_s()
    assert propensity_eval(net, 1, [5]) == math.comb(5, 2)
    assert propensity_eval(net, 1, [1]) == 0
    assert propensity_eval(net, 0, [0]) == 1


def test_guarded_expression_is_zero_below_reactants():
    net = ReactionNetwork(
        ("M", "P"), [[1], [1]], [[1], [2]],
        (GuardedExpression(parse_expression("x[M] * 2 * x[P]^2 / (10 + x[P]^2)")),),
    )
    assert propensity_eval(net, 0, [0, 3]) == 0
    assert propensity_eval(net, 0, [1, 0]) == 0
    assert propensity_eval(net, 0, [1, 1]) == Fraction(2, 11)


@pytest.mark.parametrize("name", corpus_names())
def test_gamma_annihilates_stoichiometry(name):
    nf = load_corpus(name)
    cd = conservation_data(nf.network, nf.x0)
    assert not (cd.gamma.T @ nf.network.stoichiometry).any()
    assert (cd.c == cd.gamma.T @ np.array(nf.x0)).all()


@pytest.mark.parametrize("name", corpus_names())
def test_corpus_support_rule(name):
    rep = validate_support_rule(load_corpus(name).network, sample_budget=1000)
    assert rep.ok and rep.checked >= 1000


def test_support_rule_violation_is_reported():
    bad = ReactionNetwork(("S",), [[1]], [[0]], (GuardedExpression(parse_expression("x[S] - 1")),))
    rep = validate_support_rule(bad, strict=False)
    assert not rep.ok
    k, x, _ = rep.violations[0]
    assert k == 0 and x == (1,)
    with pytest.raises(AssumptionViolated):
        rep.raise_if_violated()


def test_compiled_propensities_match_exact():
    net = load_corpus("vilar").network
    rng = np.random.default_rng(1)
    X = rng.integers(0, 5, size=(50, net.d))
    F = compile_propensities(net)(X)
    for x, row in zip(X, F):
        exact = [float(propensity_eval(net, k, x)) for k in range(net.K)]
        assert np.allclose(row, exact, rtol=1e-13, atol=0)


perms = st.integers(1, 6).flatmap(lambda d: st.permutations(list(range(d))))


@settings(max_examples=100, deadline=None)
@given(perms, perms)
def test_permutation_algebra(a, b):
    if len(a) != len(b):
        return
    p, q = Permutation(tuple(a)), Permutation(tuple(b))
    x = np.arange(len(a)) * 10
    assert (p.unapply(p.apply(x)) == x).all()
    assert (p.matrix() @ x == p.apply(x)).all()
    assert (p.compose(q).apply(x) == p.apply(q.apply(x))).all()
    assert p.compose(p.inverse()) == Permutation.identity(len(a))
    assert Permutation.from_one_based(p.one_based()) == p


def test_permuted_network_is_dynamically_equivalent():
    net = load_corpus("gene3").network
    sigma = Permutation((2, 0, 3, 1))
    pn = permute_network(net, sigma)
    rng = np.random.default_rng(0)
    for _ in range(20):
        x = rng.integers(0, 4, size=net.d)
        for k in range(net.K):
            assert propensity_eval(net, k, x) == propensity_eval(pn, k, sigma.apply(x))
    assert (pn.stoichiometry == sigma.matrix() @ net.stoichiometry).all()


def test_inverse_network_flips_arrows():
    net = load_corpus("atp").network
    inv = inverse_network(net)
    assert (inv.stoichiometry == -net.stoichiometry).all()
    assert inverse_network(inv).reactants.tolist() == net.reactants.tolist()
