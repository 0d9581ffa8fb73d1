import pytest
from hypothesis import given, settings, strategies as st

from dblab.bitcore import BitString, PrfSpec, RngSpec
from dblab.errors import ConfigurationError, MalformedTranscriptError, ResourceLimitError
from dblab.graphmodel import build_topology, head_node, label_graph
from dblab.protocols import (
    GraphInstance,
    GraphProver,
    HkpInstance,
    ProtocolKind,
    Verdict,
    Verifier,
    correct_responses,
    make_prover,
    memory_cost,
    prover_function,
    random_instance,
    run_honest_session,
    verify,
)

KINDS = [
    ProtocolKind("HKP", 8),
    ProtocolKind("KAP", 8, p_d=0.5),
    ProtocolKind("ATP", 8),
    ProtocolKind("ATP3", 9),
    ProtocolKind("ATP", 8, alpha=2, k=4),
    ProtocolKind("GRAPH", 8),
]


def test_kind_validation():
    with pytest.raises(ConfigurationError):
        ProtocolKind("ATP3", 8)
    with pytest.raises(ConfigurationError):
        ProtocolKind("KAP", 4, p_d=1.5)
    with pytest.raises(ConfigurationError):
        ProtocolKind("KAP", 4)
    with pytest.raises(ConfigurationError):
        ProtocolKind("ATP", 8, alpha=3, k=3)
    with pytest.raises(ConfigurationError):
        ProtocolKind("HKP", 4, p_d=0.5)
    with pytest.raises(ConfigurationError):
        ProtocolKind("XYZ", 4)
    assert ProtocolKind("ATP3", 6).alpha == 2
    assert ProtocolKind("atp", 5).k == 5


@pytest.mark.parametrize("kind", KINDS, ids=str)
def test_honest_session_accepts(kind, prf, rng):
    t = run_honest_session(kind, prf, rng)
    assert t.verdict is Verdict.ACCEPT
    assert len(t.rounds) == kind.n
    assert verify(kind, t.material, t) is Verdict.ACCEPT


def test_graph_session_replays_through_head_node(prf, rng):
    kind = ProtocolKind("GRAPH", 4)
    t = run_honest_session(kind, prf, rng)
    g = t.material.graph
    for i in range(1, 5):
        assert t.responses[i - 1] == head_node(g, t.challenges[:i])[1]


def test_graph_prover_and_verifier_states_coincide(rng):
    kind = ProtocolKind("GRAPH", 6)
    inst = random_instance(kind, rng)
    prover, verifier = GraphProver(kind, inst), Verifier(kind, inst, rng)
    for _ in range(6):
        c = verifier.next_challenge()
        r = prover.respond(c)
        assert verifier.expect(c) == r
        assert prover.node == verifier.node


def test_kap_full_predefined(prf, rng):
    kind = ProtocolKind("KAP", 8, p_d=1.0)
    t = run_honest_session(kind, prf, rng)
    assert t.verdict is Verdict.ACCEPT
    assert t.challenges == list(t.material.d)
    assert not any(r.tag_detected for r in t.rounds)


def test_kap_prover_latch(rng):
    kind = ProtocolKind("KAP", 6, p_d=1.0)
    inst = random_instance(kind, rng)
    prover = make_prover(kind, inst, RngSpec(5))
    prover.respond(inst.d[0])
    assert not prover.detected
    prover.respond(1 - inst.d[1])
    assert prover.detected
    # after the latch the answers are random: over many provers both values show up
    seen = set()
    for seed in range(40):
        p = make_prover(kind, inst, RngSpec(seed))
        p.respond(1 - inst.d[0])
        seen.add(p.respond(inst.d[1]))
    assert seen == {0, 1}


@pytest.mark.parametrize("kind", KINDS, ids=str)
def test_single_bit_flip_rejects(kind, prf, rng):
    t = run_honest_session(kind, prf, rng)
    for i in range(kind.n):
        flipped = t.replace_round(i, response=1 - t.rounds[i].response)
        assert verify(kind, t.material, flipped) is Verdict.REJECT


@pytest.mark.parametrize("kind", KINDS, ids=str)
def test_relayed_round_rejects(kind, prf, rng):
    t = run_honest_session(kind, prf, rng)
    assert verify(kind, t.material, t.replace_round(kind.n // 2, relayed=True)) is Verdict.REJECT


def test_verify_length_mismatch(prf, rng):
    kind = ProtocolKind("HKP", 4)
    t = run_honest_session(kind, prf, rng)
    with pytest.raises(MalformedTranscriptError):
        verify(ProtocolKind("HKP", 5), t.material, t)


def test_atp_wrong_auth_rejects(prf, rng):
    kind = ProtocolKind("ATP", 4)
    t = run_honest_session(kind, prf, rng)
    forged = type(t)(t.kind, t.rounds, t.verdict, t.auth.flip(0), t.material)
    assert verify(kind, t.material, forged) is Verdict.REJECT


@pytest.mark.parametrize("name,n,expected", [
    ("GRAPH", 8, 32), ("ATP", 3, 14), ("ATP3", 6, 28), ("HKP", 5, 10), ("KAP", 5, 20),
])
def test_memory_cost(name, n, expected):
    kind = ProtocolKind(name, n, p_d=0.5 if name == "KAP" else None)
    assert memory_cost(kind) == expected


def test_memory_cost_atp3_bad_n():
    with pytest.raises(ConfigurationError):
        memory_cost(ProtocolKind("ATP3", 7))


def test_hkp_prover_function_formula(rng):
    kind = ProtocolKind("HKP", 5)
    inst = random_instance(kind, rng)
    f = prover_function(kind, inst)
    for x in range(32):
        c = BitString.from_int(x, 5)
        expected = [(inst.r1 if ci else inst.r0)[i] for i, ci in enumerate(c)]
        assert list(f(c)) == expected


def test_hkp_equal_registers_constant_function():
    r = BitString.from_str("10110")
    f = prover_function(ProtocolKind("HKP", 5), HkpInstance(r, r))
    assert len(set(f.table)) == 1
    y, size = f.best_response()
    assert size == 2**5 and len(f.preimage(y)) == 32


def test_graph_prover_function_n2():
    g = label_graph(build_topology(2), BitString.from_str("0101 1100"))
    f = prover_function(ProtocolKind("GRAPH", 2), GraphInstance(g))
    assert len(f.table) == 4
    for x in range(4):
        c = list(BitString.from_int(x, 2))
        trace = [head_node(g, c[:1])[1], head_node(g, c)[1]]
        assert list(f(c)) == trace


def test_prover_function_limit(rng):
    kind = ProtocolKind("HKP", 17)
    with pytest.raises(ResourceLimitError):
        prover_function(kind, random_instance(kind, rng))


def _state_machine_responses(kind, inst, challenges):
    prover = make_prover(kind, inst, RngSpec(0))
    return [prover.respond(c) for c in challenges]


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(["HKP", "KAP", "ATP", "ATP3", "GRAPH"]), st.integers(1, 10), st.integers(0, 2**32))
def test_prover_function_agrees_with_state_machine(name, n, seed):
    if name == "ATP3":
        n = 3 * max(1, n // 3)
    kind = ProtocolKind(name, n, p_d=0.5 if name == "KAP" else None)
    rng = RngSpec(seed)
    inst = random_instance(kind, rng)
    f = prover_function(kind, inst)
    for _ in range(8):
        c = [rng.next_bit() for _ in range(n)]
        if name == "KAP":
            # the verifier only sends D_i on predefined rounds
            c = [ci if inst.t[i] else inst.d[i] for i, ci in enumerate(c)]
        assert list(f(c)) == _state_machine_responses(kind, inst, c)
        assert list(f(c)) == correct_responses(kind, inst, c)


def test_honest_completeness_seeded(prf):
    # a few hundred sessions per protocol here; the acceptance suite runs 10^4
    for kind in KINDS:
        root = RngSpec(99)
        assert all(run_honest_session(kind, prf, root.derive(s)).verdict is Verdict.ACCEPT
                   for s in range(300))


def test_different_prf_keys_give_different_material(rng):
    kind = ProtocolKind("GRAPH", 8)
    a = run_honest_session(kind, PrfSpec(b"key-a"), RngSpec(1))
    b = run_honest_session(kind, PrfSpec(b"key-b"), RngSpec(1))
    assert a.material != b.material
