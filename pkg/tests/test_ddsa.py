import copy
import itertools
import json
from fractions import Fraction

import pytest

from ddsacheck.constraints import FALSE, Sort, Tag, Var, canonicalize, conj, eq, evaluate, gt
from ddsacheck.ddsa import Configuration, ModelError, load_ddsa

from conftest import MODELS, hist

F = Fraction


def base_doc():
    return json.loads((MODELS / "example2_b.json").read_text())


def test_load_example2(model_b):
    assert model_b.states == ("b1", "b2", "b3")
    assert set(model_b.actions) == {"a1", "a2", "a3"}
    assert model_b.initial == "b1" and model_b.finals == {"b3"}
    assert not model_b.has_init


def test_transition_formula(model_b, session):
    w = lambda n: Var(n, Sort.RAT, Tag.WRITE)
    r = lambda n: Var(n, Sort.RAT, Tag.READ)
    assert session.check_equiv(model_b.transition_formula("a1"), conj(gt(w("y"), 0), eq(w("x"), r("x"))))
    assert session.check_equiv(
        model_b.transition_formula("a3"),
        conj(eq(r("x"), r("y")), eq(w("x"), r("x")), eq(w("y"), r("y"))),
    )


def test_true_guard_is_pure_inertia():
    doc = base_doc()
    doc["actions"][2]["guard"] = "true"
    d = load_ddsa(doc)
    w = lambda n: Var(n, Sort.RAT, Tag.WRITE)
    r = lambda n: Var(n, Sort.RAT, Tag.READ)
    assert canonicalize(d.transition_formula("a3")) == canonicalize(conj(eq(w("x"), r("x")), eq(w("y"), r("y"))))


def cfg(b, x, y):
    return Configuration(b, {"x": F(x), "y": F(y)})


def test_step(model_b):
    assert model_b.step(cfg("b1", 0, 0), "a1", cfg("b2", 0, 3))
    assert not model_b.step(cfg("b1", 0, 0), "a1", cfg("b2", 1, 3))
    assert not model_b.step(cfg("b2", 0, 3), "a3", cfg("b3", 0, 3))
    with pytest.raises(ModelError):
        model_b.step(cfg("b1", 0, 0), "a3", cfg("b3", 0, 0))


def test_phi_nu(model_b):
    assert model_b.phi_nu() == canonicalize(hist("x = x0 && y = y0"))


def test_update_a1(model_b, qe, session):
    got = model_b.update(model_b.phi_nu(), "a1", qe)
    assert session.check_equiv(got, hist("x = x0 && y > 0"))


def test_update_false(model_b, qe):
    for a in model_b.actions:
        assert model_b.update(FALSE, a, qe) == FALSE


def test_update_strict_a2_brute_force(model_b_strict, qe, session):
    d = model_b_strict
    got = d.update(d.phi_nu(), "a2", qe)
    assert session.check_equiv(got, hist("y = y0 && x > y"))
    x, y, x0, y0 = d.var("x"), d.var("y"), d.var("x", Tag.INITIAL), d.var("y", Tag.INITIAL)
    grid = range(4)
    pre = [F(k, 2) for k in range(-2, 10)]
    for vals in itertools.product(grid, repeat=4):
        a = dict(zip((x0, y0, x, y), map(F, vals)))
        # a pre-state (xp, yp) equal to the initial values whose a2 step reaches (x, y)
        witness = any(
            xp == a[x0] and yp == a[y0] and a[x] > yp and a[y] == yp
            for xp in pre
            for yp in pre
        )
        assert evaluate(got, a) == witness


def test_history_empty_run(model_b, qe):
    assert model_b.history(["b1"], [canonicalize(hist("true"))], qe) == model_b.phi_nu()


def test_history_examples(model_b, qe, session):
    t = canonicalize(hist("true"))
    k = canonicalize(hist("x >= 2 && y >= 2"))
    h = model_b.history(["b1", "a1", "b2", "a3", "b3"], [t, k, t], qe)
    assert session.check_equiv(h, hist("x = y && x = x0 && x >= 2"))
    h2 = model_b.history(["b1", "a1", "b2"], [t, t], qe)
    assert session.check_equiv(h2, hist("x = x0 && y > 0"))


def test_history_bad_run(model_b, qe):
    t = canonicalize(hist("true"))
    with pytest.raises(ModelError):
        model_b.history(["b1", "a3", "b3"], [t, t], qe)


def test_history_matches_concrete_runs(model_b, qe):
    """A run from (x0, y0) along b1 a1 b2 a2 b2 a3 b3 ending in (x, y) exists iff the history holds."""
    t = canonicalize(hist("true"))
    run = ["b1", "a1", "b2", "a2", "b2", "a3", "b3"]
    h = model_b.history(run, [t, t, t, t], qe)
    d = model_b
    grid = [F(v) for v in range(4)]
    # intermediate values only need to separate the grid points
    mids = [F(k, 2) for k in range(-1, 9)]
    for x0, y0, x, y in itertools.product(grid, repeat=4):
        reach = False
        for y1 in mids:
            c0, c1 = cfg("b1", x0, y0), cfg("b2", x0, y1)
            if not d.step(c0, "a1", c1):
                continue
            for x2 in mids:
                c2 = cfg("b2", x2, y1)
                if d.step(c1, "a2", c2) and d.step(c2, "a3", cfg("b3", x, y)):
                    reach = True
        a = {d.var("x"): x, d.var("y"): y, d.var("x", Tag.INITIAL): x0, d.var("y", Tag.INITIAL): y0}
        assert evaluate(h, a) == reach


def mutate(fn):
    doc = base_doc()
    fn(doc)
    return doc


@pytest.mark.parametrize(
    "change, match",
    [
        (lambda d: d["transitions"].append(["b1", "a1", "b9"]), "b9"),
        (lambda d: d["actions"][0].update(guard="z' > 0"), "z"),
        (lambda d: d.update(initial="nowhere"), "nowhere"),
        (lambda d: d["transitions"].append(["b1", "zz", "b2"]), "zz"),
        (lambda d: d["variables"].append({"name": "x", "sort": "rat"}), "x"),
        (lambda d: d["variables"][0].update(sort="complex"), "complex"),
        (lambda d: d["variables"][0].update(name="x__0"), "__"),
        (lambda d: d["variables"][0].update(name="state"), "state"),
        (lambda d: d["variables"][0].update(init=1), "init"),
        (lambda d: d["actions"][1].update(guard="x' >= "), r"actions\[1\]"),
    ],
)
def test_load_errors(change, match):
    with pytest.raises(ModelError, match=match):
        load_ddsa(mutate(change))


def test_load_missing_file(tmp_path):
    with pytest.raises(ModelError):
        load_ddsa(tmp_path / "nope.json")


def test_load_bad_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ModelError):
        load_ddsa(p)


def test_json_roundtrip(model_b):
    again = load_ddsa(model_b.to_json())
    assert again.states == model_b.states
    assert again.transitions == model_b.transitions
    for a in model_b.actions:
        assert again.actions[a].guard == model_b.actions[a].guard


def test_with_init(model_b):
    m = model_b.with_init({"x": 3, "y": "1/2"})
    assert m.has_init
    assert m.init_assignment() == {m.var("x"): F(3), m.var("y"): F(1, 2)}
    assert not model_b.has_init
