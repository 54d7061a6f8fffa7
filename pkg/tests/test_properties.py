import random

import pytest

from ddsacheck.checker import no_deadlock, weak_sound
from ddsacheck.constraints import Sort, Var, eq
from ddsacheck.ddsa import ModelError
from ddsacheck.grammar import ParseError
from ddsacheck.oracle import enumerate_runs, eval_path, random_fixture, random_path_formula
from ddsacheck.properties import (
    PActionNext,
    PConstraint,
    PE,
    PG,
    PNot,
    PTrue,
    PWX,
    PX,
    actions_used,
    encode_action_next,
    indicator_name,
    is_state,
    nnf_path,
    p_exists,
    p_forall,
    p_not,
    parse_property,
    qd,
    subformulas,
)


def test_parse_chi2(model_b):
    p = parse_property("E X (A G (x >= 2))", model_b)
    assert isinstance(p, PE) and isinstance(p.path, PX)
    inner = p.path.arg
    # A is normalized to !E!
    assert inner == p_forall(PG(PConstraint(parse_property("x >= 2", model_b).formula)))
    assert isinstance(inner, PNot) and isinstance(inner.arg, PE)


def test_parse_no_deadlock(model_b):
    assert parse_property("A G (E F (state b3))", model_b) == no_deadlock(model_b)


@pytest.mark.parametrize(
    "text",
    ["E (G x < 1 U y < 2", "E X", "state b9", "E F (z > 1)", "E <a9> true", "x < 1 y", "E (x < 1))"],
)
def test_parse_errors(model_b, text):
    with pytest.raises(ParseError):
        parse_property(text, model_b)


def test_parse_error_position(model_b):
    with pytest.raises(ParseError) as info:
        parse_property("E F (z > 1)", model_b)
    assert info.value.pos == 5


def test_qd(model_b):
    assert qd(parse_property("x >= 2", model_b)) == 0
    assert qd(parse_property("E X (A G (x >= 2))", model_b)) == 2
    assert qd(parse_property("E G (!E X (x > 1))", model_b)) == 2
    assert qd(parse_property("E F (x > 1) & E G (y < 0)", model_b)) == 1


def test_is_state(model_b):
    assert is_state(parse_property("E X (x > 1)", model_b))
    assert not is_state(PX(PTrue()))


def test_encode_action_next(model_b):
    chi = parse_property("E <a1> true", model_b)
    assert actions_used(chi) == ["a1"]
    m2, enc = encode_action_next(model_b, chi)
    flag = Var(indicator_name("a1"), Sort.RAT)
    assert flag.name in m2.variables
    assert isinstance(enc, PE) and isinstance(enc.path, PX)
    assert PConstraint(eq(flag, 1)) in set(subformulas(enc))
    assert not any(isinstance(s, PActionNext) for s in subformulas(enc))
    assert "x_a1' = 1" in str(m2.actions["a1"].guard)
    assert "x_a1' = 0" in str(m2.actions["a2"].guard)
    assert "x_a1" not in model_b.variables


def test_encode_without_action_next_is_identity(model_b):
    chi = parse_property("E F (x < 2)", model_b)
    m2, enc = encode_action_next(model_b, chi)
    assert m2 is model_b and enc is chi


def test_encode_weak_soundness(model_b):
    m2, enc = encode_action_next(model_b, weak_sound(model_b, "a2"))
    occurrences = [s for s in subformulas(enc) if isinstance(s, PX) and "x_a2 = 1" in str(s)]
    assert len(occurrences) == 2
    assert list(m2.variables) == ["x", "y", "x_a2"]


def test_encode_int_indicator(model_ipc):
    m2, _ = encode_action_next(model_ipc, parse_property("E <a3> true", model_ipc))
    assert m2.variables["x_a3"] is Sort.INT


def test_encode_collision(model_b):
    doc = model_b.to_json()
    doc["variables"].append({"name": "x_a1", "sort": "rat", "init": None})
    from ddsacheck.ddsa import load_ddsa

    m = load_ddsa(doc)
    with pytest.raises(ModelError):
        encode_action_next(m, parse_property("E <a1> true", m))


def test_nnf_examples(model_b):
    p = lambda t: parse_property(t, model_b).path
    assert nnf_path(p("E !X (x < 2)")) == PWX(p_not(PConstraint(parse_property("x < 2", model_b).formula)))
    assert nnf_path(p("E !!(x < 2)")) == nnf_path(p("E (x < 2)"))
    assert str(nnf_path(p("E !G (x < 2)"))) == "F (!(x < 2))"


def _nnf_ok(q):
    if isinstance(q, PNot):
        return is_state(q.arg)
    return is_state(q) or all(_nnf_ok(c) for c in q.children())


@pytest.mark.parametrize("seed", range(12))
def test_nnf_agrees_with_oracle(seed):
    rng = random.Random(seed)
    fx = random_fixture(rng, max_states=4)
    m = fx.model
    for _ in range(4):
        psi = random_path_formula(rng, m, qd=1, size=4)
        pos, negd = nnf_path(psi), nnf_path(psi, negate=True)
        assert _nnf_ok(pos) and _nnf_ok(negd)
        for c in fx.configurations():
            for run in enumerate_runs(fx, c):
                v = eval_path(fx, run, 0, psi)
                assert eval_path(fx, run, 0, pos) == v
                assert eval_path(fx, run, 0, negd) == (not v)
