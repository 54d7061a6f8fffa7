import json
import random

import pytest

from ddsacheck.checker import ModelChecker, no_deadlock, template, verdict, weak_sound
from ddsacheck.ddsa import ModelError, load_ddsa
from ddsacheck.ltl import ConfigurationMap, LMap, LTrue, LX, l_finally
from ddsacheck.oracle import random_fixture, random_state_formula
from ddsacheck.properties import PE, PG, PTrue, PX, p_finally, p_forall, p_not, parse_property

from conftest import hist


@pytest.fixture(scope="module")
def ch(model_b):
    with ModelChecker(model_b) as c:
        yield c


def assert_map(session, k, expected):
    assert set(k.states) == set(expected)
    for b, text in expected.items():
        assert session.check_equiv(k[b], hist(text)), (b, str(k[b]), text)


def test_ag(ch, session):
    k = ch.solve(parse_property("A G (x >= 2)", ch.model))
    assert_map(session, k, {"b1": "false", "b2": "x >= 2 && y >= 2", "b3": "x >= 2"})


def test_exag(ch, session):
    k = ch.solve(parse_property("E X (A G (x >= 2))", ch.model))
    assert_map(session, k, {"b1": "x >= 2", "b2": "y >= 2", "b3": "false"})


def test_state(ch):
    k = ch.solve(parse_property("state b3", ch.model))
    assert k is ch.k_state("b3")
    assert str(k["b1"]) == "false" and str(k["b3"]) == "true"


def test_chp_finally(ch, session):
    k = ch.ch_p(parse_property("E F (x < 2)", ch.model).path)
    assert_map(session, k, {"b1": "true", "b2": "x < 2 || y < 2", "b3": "x < 2"})


def test_chp_next_of_k2(ch, session):
    k2 = ch.solve(parse_property("A G (x >= 2)", ch.model))
    # X over the already solved map: the embedded state formula is served from the cache
    k1 = ch.ch_p(PX(parse_property("A G (x >= 2)", ch.model)))
    assert ch.to_ltl(PX(parse_property("A G (x >= 2)", ch.model))) == LX(LMap(k2))
    assert_map(session, k1, {"b1": "x >= 2", "b2": "y >= 2", "b3": "false"})


def test_chp_no_path_to_final(session):
    doc = json.loads(open(__import__("conftest").MODELS / "example2_b.json").read())
    doc["states"].append("dead")
    doc["transitions"].append(["b1", "a1", "dead"])
    m = load_ddsa(doc)
    with ModelChecker(m) as c:
        k = c.ch_p(PTrue())
    assert str(k["dead"]) == "false"
    assert str(k["b3"]) == "true"


def test_to_ltl(ch):
    m = ch.model
    k_lt2 = ch.k_constraint(hist("x < 2"))
    assert ch.to_ltl(parse_property("E F (x < 2)", m).path) == l_finally(LMap(k_lt2))
    assert ch.to_ltl(PTrue()) == LTrue()


def test_verdicts(model_b):
    chi = parse_property("E X (A G (x >= 2))", model_b)
    assert verdict(model_b.with_init({"x": 0, "y": 0}), chi).satisfied is False
    assert verdict(model_b.with_init({"x": 3, "y": 0}), chi).satisfied is True
    assert verdict(model_b.with_init({"x": 0, "y": 0}), PTrue()).satisfied is True
    v = verdict(model_b, chi)
    assert v.map_only and v.satisfied is None


def test_verdict_with_action_next(model_b):
    m = model_b.with_init({"x": 0, "y": 0})
    assert verdict(m, parse_property("E <a1> true", m)).satisfied is True
    assert verdict(m, parse_property("E <a3> true", m)).satisfied is False
    # a3 needs x = y at b2, but a1 leaves x = 0 < y; an a2 step must come first
    assert verdict(m, parse_property("E X (E <a3> true)", m)).satisfied is False
    assert verdict(m, parse_property("E X (E X (E <a3> true))", m)).satisfied is True


def test_no_deadlock_single_final_state():
    m = load_ddsa({
        "variables": [{"name": "x", "sort": "rat", "init": 0}],
        "states": ["s"], "initial": "s", "final": ["s"],
        "actions": [], "transitions": [],
    })
    v = verdict(m, no_deadlock(m))
    assert v.satisfied is True
    assert str(v.solution["s"]) == "true"


def test_templates(model_b):
    assert template(model_b, "no_deadlock") == no_deadlock(model_b)
    assert template(model_b, "weak_sound:a2") == weak_sound(model_b, "a2")
    with pytest.raises(ValueError):
        template(model_b, "nope")
    with pytest.raises(ModelError):
        weak_sound(model_b, "a9")


def test_weak_sound_example(model_b):
    v = verdict(model_b.with_init({"x": 0, "y": 0}), weak_sound(model_b, "a2"))
    assert v.satisfied is True


def test_strict_variant(model_b_strict, session):
    with ModelChecker(model_b_strict) as c:
        k = c.solve(parse_property("A G (x >= 2)", model_b_strict))
        # without a final run (x <= 0 at b1 never meets y again) A holds vacuously
        assert_map(session, k, {"b1": "x <= 0 || x >= 2", "b2": "x != y || x >= 2", "b3": "x >= 2"})
        k = c.solve(parse_property("E X (A G (x >= 2))", model_b_strict))
        assert_map(session, k, {"b1": "x >= 2", "b2": "x = y && x >= 2", "b3": "false"})


def test_cache_on_off_agree(model_b, session):
    chi = parse_property("E X (A G (x >= 2)) | A F (y < 1)", model_b)
    with ModelChecker(model_b) as a, ModelChecker(model_b, cache=False) as b:
        ka, kb = a.solve(chi), b.solve(chi)
        assert a.stats.cache_hits + a.solver_stats().cache_hits > 0
        assert b.stats.cache_hits == 0
    for s in model_b.states:
        assert session.check_equiv(ka[s], kb[s])


def test_jobs_agree(model_b, session):
    chi = parse_property("A G (x >= 2)", model_b)
    with ModelChecker(model_b, jobs=3) as a:
        k = a.solve(chi)
        assert a.stats.products == 3
    assert_map(session, k, {"b1": "false", "b2": "x >= 2 && y >= 2", "b3": "x >= 2"})


def test_dot_dir(model_b, tmp_path):
    with ModelChecker(model_b, dot_dir=tmp_path) as c:
        c.solve(parse_property("E F (x < 2)", model_b))
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["chp001_b1.dot", "chp001_b2.dot", "chp001_b3.dot", "chp001_nfa.dot"]
    assert all(p.read_text().startswith("digraph") for p in tmp_path.iterdir())


def test_stats(model_b):
    with ModelChecker(model_b) as c:
        c.solve(parse_property("E X (A G (x >= 2))", model_b))
        assert c.stats.products == 6
        assert c.stats.product_nodes > 0 and c.stats.wall_time > 0
        assert c.stats.solver.issued_queries > 0


@pytest.mark.parametrize("seed", range(6))
def test_dualities(seed, session):
    rng = random.Random(seed)
    fx = random_fixture(rng)
    m = fx.model
    chi = random_state_formula(rng, m)
    p = random_state_formula(rng, m, qd=1, size=2)
    with ModelChecker(m) as c, ModelChecker(m, cache=False) as fresh:
        k, kn = c.solve(chi), fresh.solve(p_not(chi))
        # A G p against the complement of E F !p
        ka = c.solve(p_forall(PG(p)))
        ke = fresh.solve(PE(p_finally(p_not(p)))).complement()
    for b in m.states:
        assert session.check_equiv(kn[b], k.complement()[b])
        assert session.check_equiv(ka[b], ke[b])
