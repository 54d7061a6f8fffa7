import itertools
import random

from hypothesis import given, settings, strategies as st

from ddsacheck.constraints import FALSE, TRUE, Sort, Var, lt
from ddsacheck.ltl import (
    LAST,
    NOT_LAST,
    Q_END,
    ConfigurationMap,
    LAnd,
    LFalse,
    LG,
    LMap,
    LNot,
    LOr,
    LTrue,
    LU,
    LWX,
    LX,
    build_nfa,
    delta,
    eval_ltlk_positions,
    is_nnf,
    l_and,
    l_finally,
    l_map,
    l_or,
    ltl_nnf,
)
from ddsacheck.oracle import random_ltlk

STATES = ("b1", "b2", "b3")
X = Var("x", Sort.RAT)
K = ConfigurationMap.of_state(STATES, "b1")
K2 = ConfigurationMap.of_state(STATES, "b2")
K3 = ConfigurationMap.of_constraint(STATES, lt(X, 2))
BASE = {K, K2}


def truth(k, letter):
    """Map ``k`` holds at a position whose true base maps are ``letter``; complements are derived."""
    if k in letter:
        return True
    c = k.complement()
    return c in BASE and c not in letter


def reference(p, word, i=0):
    """Plain recursive semantics over a word of sets of base maps that hold."""
    n = len(word) - 1
    if isinstance(p, LTrue):
        return True
    if isinstance(p, LFalse):
        return False
    if isinstance(p, LMap):
        return truth(p.k, word[i])
    if isinstance(p, LNot):
        return not reference(p.arg, word, i)
    if isinstance(p, LAnd):
        return all(reference(a, word, i) for a in p.args)
    if isinstance(p, LOr):
        return any(reference(a, word, i) for a in p.args)
    if isinstance(p, LX):
        return i < n and reference(p.arg, word, i + 1)
    if isinstance(p, LWX):
        return i == n or reference(p.arg, word, i + 1)
    if isinstance(p, LG):
        return all(reference(p.arg, word, j) for j in range(i, n + 1))
    if isinstance(p, LU):
        return any(
            reference(p.right, word, k) and all(reference(p.left, word, j) for j in range(i, k))
            for k in range(i, n + 1)
        )
    raise TypeError(p)


def words(maps, max_len):
    letters = [frozenset(c) for r in range(len(maps) + 1) for c in itertools.combinations(maps, r)]
    for n in range(1, max_len + 1):
        yield from itertools.product(letters, repeat=n)


# -- configuration maps -------------------------------------------------------


def test_maps_are_interned():
    assert ConfigurationMap.of_state(STATES, "b1") is K
    assert ConfigurationMap({"b1": TRUE, "b2": FALSE, "b3": FALSE}) is K


def test_map_algebra():
    top, bot = ConfigurationMap.top(STATES), ConfigurationMap.bottom(STATES)
    assert K.complement().complement() is K
    assert (K | K2 | ConfigurationMap.of_state(STATES, "b3")) is top
    assert (K & K2) is bot
    assert top.is_true and bot.is_false
    assert K3.complement()["b2"] != K3["b2"]
    assert l_map(top) == LTrue() and l_map(bot) == LFalse()


# -- δ ---------------------------------------------------------------------


def test_delta_examples():
    assert delta(LTrue()) == {(LTrue(), frozenset())}
    assert delta(LMap(K)) == {(LTrue(), frozenset({K})), (LFalse(), frozenset())}
    q = LMap(K)
    assert delta(LX(q)) == {(q, frozenset({NOT_LAST})), (LFalse(), frozenset({LAST}))}
    assert delta(LWX(q)) == {(q, frozenset({NOT_LAST})), (LTrue(), frozenset({LAST}))}


def test_delta_never_mixes_tags():
    rng = random.Random(3)
    for _ in range(200):
        p = ltl_nnf(random_ltlk(rng, [K, K2, K3], 3))
        for _, letter in delta(p):
            assert not {LAST, NOT_LAST} <= letter


def test_simplification_units():
    a = LMap(K)
    assert l_and(LTrue(), a) == a
    assert l_and(LFalse(), a) == LFalse()
    assert l_or(LTrue(), a) == LTrue()
    assert l_or(LFalse(), a) == a


# -- NFA shapes ---------------------------------------------------------------


def test_nfa_finally():
    n = build_nfa(l_finally(LMap(K)))
    q0 = n.initial
    assert (q0, frozenset(), q0) in n.edges
    assert (q0, frozenset({K}), LTrue()) in n.edges
    assert (q0, frozenset({K}), Q_END) in n.edges
    assert set(n.states) == {q0, LTrue(), Q_END}


def test_nfa_next():
    n = build_nfa(LX(LMap(K)))
    assert (n.initial, frozenset(), LMap(K)) in n.edges
    assert (LMap(K), frozenset({K}), LTrue()) in n.edges
    assert not any(dst == Q_END for _, _, dst in n.edges)


def test_nfa_globally():
    n = build_nfa(LG(LMap(K)))
    q0 = n.initial
    assert (q0, frozenset({K}), q0) in n.edges
    assert (q0, frozenset({K}), Q_END) in n.edges
    assert LTrue() not in n.states
    # brute force against the semantics on words up to length 4
    for w in words([K], 4):
        assert n.accepts(w) == reference(LG(LMap(K)), w)


def test_next_true_needs_a_second_letter():
    n = build_nfa(LX(LTrue()))
    assert not n.accepts([frozenset()])
    assert n.accepts([frozenset()] * 2)
    f = build_nfa(l_finally(LX(LTrue())))
    assert not f.accepts_consistent([{}])
    assert f.accepts_consistent([{}, {}])


def test_nfa_letters_are_maps_only():
    rng = random.Random(5)
    for _ in range(100):
        n = build_nfa(random_ltlk(rng, [K, K2], 3))
        for _, letter, _ in n.edges:
            assert all(isinstance(m, ConfigurationMap) for m in letter)


def test_accepts_examples():
    assert build_nfa(l_finally(LMap(K))).accepts([frozenset(), frozenset({K})])
    assert not build_nfa(LX(LMap(K))).accepts([frozenset()])
    g = build_nfa(LG(LMap(K)))
    assert g.accepts([{K}, {K}])
    assert not g.accepts([{K}, frozenset()])


def test_dot_export():
    dot = build_nfa(l_finally(LMap(K))).to_dot("f")
    assert dot.startswith("digraph f {") and dot.rstrip().endswith("}")
    assert "doublecircle" in dot and "init ->" in dot


# -- semantics ------------------------------------------------------------------


def test_eval_examples():
    assert not eval_ltlk_positions(LX(LMap(K)), [{K: True}])
    assert eval_ltlk_positions(LG(LMap(K)), [{K: True}])
    assert not eval_ltlk_positions(LG(LMap(K)), [{K: False}])
    assert eval_ltlk_positions(LWX(LMap(K)), [{K: False}])


@st.composite
def formulas(draw):
    seed = draw(st.integers(0, 10**9))
    depth = draw(st.integers(1, 3))
    return random_ltlk(random.Random(seed), [K, K2], depth)


@settings(max_examples=150, deadline=None)
@given(formulas())
def test_nfa_accepts_consistent_word_iff_formula_holds(psi):
    nfa = build_nfa(psi)
    for w in words([K, K2], 4):
        holds = [lambda k, letter=letter: truth(k, letter) for letter in w]
        expected = reference(psi, w)
        assert eval_ltlk_positions(psi, holds) == expected
        assert nfa.accepts_consistent(holds) == expected


@settings(max_examples=150, deadline=None)
@given(formulas())
def test_nnf_preserves_semantics(psi):
    pos, negd = ltl_nnf(psi), ltl_nnf(psi, negate=True)
    assert is_nnf(pos) and is_nnf(negd)
    for w in words([K, K2], 3):
        v = reference(psi, w)
        assert reference(pos, w) == v
        assert reference(negd, w) == (not v)
