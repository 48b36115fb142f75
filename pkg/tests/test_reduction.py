from __future__ import annotations

from fractions import Fraction

import pytest

from crnspace.decomposition import find_decomposed_state_space
from crnspace.io import parse_network
from crnspace.model import GuardedExpression, propensity_eval
from crnspace.reduction import IncompatibleMap, StateSet, augment_state, reduce_network

from conftest import analyse


def test_toxin_fast_reduction_substitutes_phi():
    a = analyse("toxin_fast")  # M=2, y=-2: A = T + 2
    red = a.reduced
    assert red.base.species == ("M", "T")
    assert red.restricted_names == ("A",)
    prop = red.base.propensities[1]
    assert isinstance(prop, GuardedExpression)
    for t in range(5):
        # 10 * T * A with A = T + 2
        assert propensity_eval(red.base, 1, (2, t)) == 10 * t * (t + 2)
    assert augment_state(red, (2, 3)) == (2, 3, 5)


def test_reduced_propensities_agree_with_original_on_graph():
    a = analyse("atp", (1, 4))
    red, net = a.reduced, a.dss.permuted
    for x1 in range(6):
        full = augment_state(red, (x1,))
        for k in range(net.K):
            assert propensity_eval(red.base, k, (x1,)) == propensity_eval(net, k, full)


def test_d_r_zero_is_identity():
    a = analyse("gene4")
    assert a.reduced.base == a.dss.permuted


def test_incompatible_map_refused():
    nf = parse_network("species A B\nreaction 0 -> 2 A + 3 B @ mass_action(1)\n")
    with pytest.raises(IncompatibleMap):
        reduce_network(find_decomposed_state_space(nf.network, nf.x0))


def test_state_set_membership_is_order_free():
    s = StateSet(("G_off", "G_on"), ((1, 0),), ("M",), ("P",))
    assert s.contains(("G_off", "G_on", "M", "P"), (1, 0, 7, 0))
    assert s.contains(("P", "M", "G_on", "G_off"), (0, 7, 0, 1))
    assert not s.contains(("G_off", "G_on", "M", "P"), (1, 0, 7, 1))
    assert not s.contains(("G_off", "G_on", "M", "P"), (0, 1, 7, 0))
    box = list(s.states_in_box(("G_off", "G_on", "M", "P"), 3))
    assert box == [(1, 0, m, 0) for m in range(4)]


def test_lifted_certificate_carries_phi():
    cert = analyse("toxin_fast").result.certificates[0]
    s = cert.state_set
    assert s.restricted_names == ("A",)
    assert s.contains(("M", "T", "A"), (2, 4, 6))
    assert not s.contains(("M", "T", "A"), (2, 4, 5))
    assert s.restricted_values({"M": 2, "T": 1}) == (Fraction(3),)
