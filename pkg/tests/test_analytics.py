import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dblab.adversary import bruteforce_round_match
from dblab.analytics import (
    EXACT,
    UPPER_BOUND,
    atp_collision_prob,
    best_source,
    closed_form,
    closed_form_distance,
    closed_form_mafia,
    generic_distance_bound,
    graph_collision_prob,
    graph_mafia,
    kap_mafia,
    response_match_prob,
)
from dblab.errors import DomainError, InvalidParameterError
from dblab.protocols import ProtocolKind


def test_match_prob_spot_value():
    assert response_match_prob(3, 1, 2, 1) == 0.625


def test_match_prob_regimes():
    # same round before the mismatch is certain, any other round a coin
    assert response_match_prob(4, 1, 1, 2) == 1.0
    assert response_match_prob(4, 1, 3, 2) == 0.5
    # harvested before the mismatch, needed after it
    assert response_match_prob(4, 3, 1, 2) == 0.5
    # at the mismatch round, the walks sit on different nodes
    assert response_match_prob(4, 1, 1, 1) == 0.5


@pytest.mark.parametrize("n", [1, 2, 3])
def test_match_prob_against_enumeration(n):
    for t in range(1, n + 1):
        for i in range(1, n + 1):
            for j in range(1, n + 1):
                exact = bruteforce_round_match(n, i, j, t)
                assert abs(response_match_prob(n, i, j, t) - float(exact)) < 1e-12, (i, j, t)


@given(st.integers(1, 24), st.data())
def test_match_prob_symmetric_after_mismatch(n, data):
    t = data.draw(st.integers(1, n))
    i = data.draw(st.integers(t, n))
    j = data.draw(st.integers(t, n))
    assert math.isclose(response_match_prob(n, i, j, t), response_match_prob(n, j, i, t), abs_tol=1e-12)


def test_match_prob_domain():
    with pytest.raises(InvalidParameterError):
        response_match_prob(3, 4, 1, 1)
    with pytest.raises(InvalidParameterError):
        response_match_prob(3, 1, 1, 0)


def test_best_source_examples():
    for n in range(2, 12):
        assert best_source(n, 1, 1) == 2
    assert best_source(5, 1, 3) == 1
    n, i, t = 3, 3, 2
    j = best_source(n, i, t)
    assert all(response_match_prob(n, i, j, t) >= response_match_prob(n, i, k, t) - 1e-12
               for k in range(1, n + 1))


def test_generic_bound_examples():
    # no collisions beyond chance: the bound is 2^-n
    assert math.isclose(generic_distance_bound(3, 0.125), 0.125)
    assert generic_distance_bound(3, 1.0) == 1.0
    with pytest.raises(DomainError):
        generic_distance_bound(3, 0.1)
    with pytest.raises(DomainError):
        generic_distance_bound(3, 1.5)


def test_graph_bound_n1():
    assert graph_collision_prob(1) == pytest.approx(0.75)
    v = closed_form_distance(ProtocolKind("GRAPH", 1))
    assert v.exactness == UPPER_BOUND
    assert v.value == pytest.approx((1 + math.sqrt(5)) / 4, abs=1e-12)


def test_atp_bound_n2():
    assert atp_collision_prob(2) == pytest.approx(15 / 32)
    assert closed_form_distance(ProtocolKind("ATP", 2)).value == pytest.approx(
        (0.25 + math.sqrt(1 / 16 - 1 + 15 / 8)) / 2, abs=1e-12
    )


def test_kap_examples():
    assert kap_mafia(1, 1.0) == pytest.approx(0.75)
    assert closed_form_distance(ProtocolKind("KAP", 2, p_d=1.0)).value == 1.0
    for n in range(1, 65):
        assert kap_mafia(n, 0.0) == pytest.approx(0.75**n, rel=1e-12)


def test_hkp_and_atp3_values():
    assert closed_form_mafia(ProtocolKind("HKP", 4)) == 0.31640625
    assert closed_form_distance(ProtocolKind("HKP", 8)).value == pytest.approx(0.100112915, abs=1e-9)
    d = closed_form_distance(ProtocolKind("ATP3", 3))
    assert d.exactness == EXACT and d.value == pytest.approx(0.3999)
    assert closed_form_mafia(ProtocolKind("ATP", 4)) == pytest.approx(3 / 16)
    assert closed_form_mafia(ProtocolKind("ATP3", 3)) == pytest.approx(2.5 / 8)


def test_graph_mafia_n1():
    assert graph_mafia(1) == pytest.approx(0.75)


@pytest.mark.parametrize("name", ["HKP", "KAP", "ATP", "ATP3", "GRAPH"])
def test_monotone_and_valid(name):
    ns = range(3, 33, 3) if name == "ATP3" else range(1, 33)
    for fraud in ("mafia", "distance"):
        values = [closed_form(ProtocolKind(name, n, p_d=0.5 if name == "KAP" else None), fraud).value
                  for n in ns]
        assert all(0.0 <= v <= 1.0 for v in values)
        assert all(b <= a + 1e-15 for a, b in zip(values, values[1:])), (name, fraud)


def test_graph_mafia_below_hkp_plus_floor():
    for n in range(1, 33):
        assert graph_mafia(n) <= 0.75**n + 0.5**n + 1e-15


def test_graph_mafia_large_n_is_finite():
    v = graph_mafia(128)
    assert np.isfinite(v) and 0 < v < 1e-6


def test_closed_form_rejects_unknown_fraud():
    with pytest.raises(InvalidParameterError):
        closed_form(ProtocolKind("HKP", 2), "terrorist")
