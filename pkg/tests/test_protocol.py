import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from lvpop import errors
from lvpop.graphs import Graph
from lvpop.protocol import (ProtocolSpec, Rule, as_general, builtin, is_absorbing,
                            is_irreducible, load_protocol, protocol_from_dict, protocol_to_dict,
                            resolve_protocol, validate)
from lvpop.states import AggregateState, GraphState, StarState


def lv(matrix, names=None):
    k = len(matrix)
    return ProtocolSpec(k, names or [str(i) for i in range(k)], "lv", matrix=matrix)


@st.composite
def lv_matrices(draw, kmin=2, kmax=6):
    k = draw(st.integers(kmin, kmax))
    vals = st.sampled_from([0.0, 0.0, 0.25, 0.5, 1.0])
    P = np.array([[0.0 if i == j else draw(vals) for j in range(k)] for i in range(k)])
    return P


def has_isolated(P):
    k = len(P)
    return any(not (P[i].any() or P[:, i].any()) for i in range(k))


def test_rps_valid_with_unit_pmin():
    vp = validate(builtin("rps"))
    assert vp.pmin == 1.0
    assert vp.digraph.arcs == frozenset({(0, 1), (1, 2), (2, 0)})


def test_zero_matrix_isolated():
    with pytest.raises(errors.IsolatedType):
        validate(lv([[0, 0], [0, 0]]))


def test_nonzero_diagonal():
    with pytest.raises(errors.NonZeroDiagonal) as ei:
        validate(lv([[0.5, 1], [1, 0]]))
    assert "NonZeroDiagonal" in ei.value.codes


def test_probability_out_of_range():
    with pytest.raises(errors.ProbabilityOutOfRange):
        validate(lv([[0, 1.5], [1, 0]]))
    with pytest.raises(errors.ProbabilityOutOfRange):
        validate(lv([[0, -0.1], [1, 0]]))


def test_all_violations_collected():
    with pytest.raises(errors.InvalidProtocol) as ei:
        validate(lv([[0.3, 2.0, 0], [1, 0, 0], [0, 0, 0]]))
    assert set(ei.value.codes) == {"NonZeroDiagonal", "ProbabilityOutOfRange", "IsolatedType"}


def test_duplicate_rule():
    rules = [Rule("a", "b", "a", 0.5), Rule("a", "b", "a", 0.5)]
    with pytest.raises(errors.DuplicateRule):
        validate(ProtocolSpec(2, ["a", "b"], "general", rules=rules))


def test_general_rule_mass_above_one():
    rules = [Rule("a", "b", "a", 0.7), Rule("a", "b", "c", 0.7), Rule("c", "a", "c", 1)]
    with pytest.raises(errors.ProbabilityOutOfRange):
        validate(ProtocolSpec(3, ["a", "b", "c"], "general", rules=rules))


def test_validate_idempotent():
    vp = validate(builtin("ws"))
    assert validate(vp) is vp


def test_arrays_read_only():
    vp = validate(builtin("rps"))
    with pytest.raises(ValueError):
        vp.transitions[0, 1, 0] = 0.5


@pytest.mark.parametrize("name", ["rps", "ws"])
def test_irreducible_builtins(name):
    ok, _ = is_irreducible(validate(builtin(name)))
    assert ok


def test_reducible_no_predator():
    ok, reason = is_irreducible(validate(lv([[0, 1], [0, 0]])))
    assert not ok
    assert "column 0" in reason


def test_irreducible_rejects_general():
    with pytest.raises(errors.NotLvKind):
        is_irreducible(validate(builtin("counterexample")))


@given(lv_matrices())
def test_irreducible_matches_direct_conditions(P):
    if has_isolated(P):
        with pytest.raises(errors.IsolatedType):
            validate(lv(P.tolist()))
        return
    ok, _ = is_irreducible(validate(lv(P.tolist())))
    zero_col = any(not P[:, j].any() for j in range(len(P)))
    ncomp, _ = connected_components(csr_matrix(P > 0), directed=True, connection="weak")
    assert ok == (not zero_col and ncomp == 1)


@given(lv_matrices())
def test_monochromatic_states_absorb(P):
    if has_isolated(P):
        return
    vp = validate(lv(P.tolist()))
    for i in range(vp.k):
        c = [0] * vp.k
        c[i] = 7
        assert is_absorbing(AggregateState(c), vp)


def test_builtin_shapes():
    rps = builtin("rps")
    assert np.sum(np.array(rps.matrix) == 1) == 3
    assert np.array(rps.matrix)[0, 1] == np.array(rps.matrix)[1, 2] == np.array(rps.matrix)[2, 0] == 1
    ws = np.array(builtin("ws").matrix)
    assert ws.shape == (4, 4)
    assert not ws[2:].any()
    ce = builtin("counterexample")
    assert ce.kind == "general" and len(ce.rules) == 5
    assert Rule("a", "b", "c", 1.0) in ce.rules
    ld = np.array(builtin("life_death", p12=0.3).matrix)
    assert ld[0, 1] == 0.3 and ld[1, 0] == 1.0


def test_unknown_builtin():
    with pytest.raises(errors.UnknownBuiltin):
        builtin("nope")


def test_is_absorbing_aggregate():
    vp = validate(builtin("rps"))
    assert is_absorbing(AggregateState((5, 0, 0)), vp)
    assert not is_absorbing(AggregateState((1, 1, 0)), vp)


def test_is_absorbing_same_species_rule_needs_two_agents():
    vp = validate(builtin("counterexample"))
    # bb -> ba needs two b agents; a single b among c's cannot change
    assert is_absorbing(AggregateState((0, 1, 8)), vp)
    assert not is_absorbing(AggregateState((0, 2, 7)), vp)


def test_is_absorbing_graph_two_components():
    vp = validate(builtin("rps"))
    # two triangles, one all species 1, one all species 2, no cross edges
    g = Graph(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)], require_connected=False)
    assert is_absorbing(GraphState(g, [0, 0, 0, 1, 1, 1], 3), vp)
    # one cross edge joins a 1 and a 2
    g2 = Graph(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)])
    assert not is_absorbing(GraphState(g2, [0, 0, 0, 1, 1, 1], 3), vp)


def test_disconnected_graph_rejected_by_default():
    with pytest.raises(errors.InvalidGraph):
        Graph(4, [(0, 1), (2, 3)])


def test_is_absorbing_star():
    vp = validate(builtin("rps"))
    assert is_absorbing(StarState(0, (5, 0, 0)), vp)
    assert not is_absorbing(StarState(1, (5, 0, 0)), vp)
    assert not is_absorbing(StarState(0, (0, 0, 5)), vp)


def test_json_roundtrip(tmp_path):
    for name in ["rps", "ws", "life_death", "counterexample"]:
        spec = builtin(name)
        path = tmp_path / f"{name}.json"
        path.write_text(json.dumps(protocol_to_dict(spec)))
        assert load_protocol(path).spec == spec
        assert resolve_protocol(str(path)).spec == spec


def test_json_rejects_bad_files(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"k":2,"names":["a","b"],"kind":"lv","matrix":[[0.3,1],[1,0]]}')
    with pytest.raises(errors.NonZeroDiagonal):
        load_protocol(p)
    p.write_text("{not json")
    with pytest.raises(errors.MalformedProtocol):
        load_protocol(p)
    with pytest.raises(errors.MalformedProtocol):
        protocol_from_dict({"k": 2, "kind": "lv", "matrix": [[0, 1], [1, 0]], "extra": 1})


def test_general_example_file_format():
    d = {"k": 3, "names": ["a", "b", "c"], "kind": "general",
         "rules": [{"initiator": "a", "responder": "b", "result": "c", "prob": 1.0},
                   {"initiator": "c", "responder": "a", "result": "b", "prob": 1.0}]}
    vp = validate(protocol_from_dict(d))
    assert vp.transitions[0, 1, 2] == 1.0


def test_as_general_matches_lv_transitions():
    a = validate(builtin("ws"))
    b = validate(as_general(builtin("ws")))
    np.testing.assert_array_equal(a.transitions, b.transitions)


def test_result_equal_to_responder_is_noop():
    rules = [Rule("a", "b", "b", 0.5), Rule("a", "b", "a", 0.5), Rule("b", "a", "b", 0.2)]
    vp = validate(ProtocolSpec(2, ["a", "b"], "general", rules=rules))
    assert vp.change[0, 1] == 0.5
