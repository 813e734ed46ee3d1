import itertools

import pytest
from hypothesis import given, settings, strategies as st

from smforge.hardware import free_reduce, invert_word
from smforge.machines import make_primitive
from smforge.presentation import (BurnsideOracle, UnsupportedExponent, a_relator_codes, burnside_oracle,
                                  burnside_trivial, cyclic_key, cyclic_reduce, emit_presentation,
                                  enumerate_a_relators, parse_presentation_text, rule_domain)

letters = st.sampled_from([1, -1, 2, -2])
words = st.lists(letters, max_size=16)


def heisenberg(w):
    """Product in the Heisenberg group over Z/3, which is B(2,3):
    (x, y, z) * (x', y', z') = (x+x', y+y', z+z'+x y')."""
    x = y = z = 0
    for g in w:
        dx, dy = {1: (1, 0), -1: (-1, 0), 2: (0, 1), -2: (0, -1)}[g]
        z = (z + x * dy) % 3
        x, y = (x + dx) % 3, (y + dy) % 3
    return x, y, z


def klein(w):
    return (sum(1 for g in w if abs(g) == 1) % 2, sum(1 for g in w if abs(g) == 2) % 2)


@settings(deadline=None)
@given(words)
def test_b23_matches_heisenberg(w):
    assert burnside_trivial(3, w) == (heisenberg(w) == (0, 0, 0))


@settings(deadline=None)
@given(words)
def test_b22_matches_klein(w):
    assert burnside_trivial(2, w) == (klein(w) == (0, 0))


@given(words)
def test_b21_everything_trivial(w):
    assert burnside_trivial(1, w)


def test_orders_and_axioms():
    assert burnside_oracle(2).order == 4
    # pinned regression value of the enumeration (|B(2,3)| = 27)
    assert burnside_oracle(3).order == 27
    for n in (1, 2, 3):
        ax = burnside_oracle(n).check_axioms()
        assert ax["ok"], ax


def test_unsupported_exponent():
    with pytest.raises(UnsupportedExponent):
        BurnsideOracle(5)
    with pytest.raises(UnsupportedExponent):
        burnside_trivial(5, [1])


def test_token_letters():
    assert burnside_trivial(3, "a1 a1 a1")
    assert not burnside_trivial(3, "a1 a2")
    assert burnside_trivial(3, ["a1", "a2", "a1^-1", "a2^-1"] * 3)


def brute_a_relators(n, max_len, trivial):
    seen = set()
    for m in range(1, max_len + 1):
        for w in itertools.product([1, -1, 2, -2], repeat=m):
            if tuple(free_reduce(w)) != w or cyclic_reduce(w) != w:
                continue
            if not trivial(w):
                continue
            cls = min(min(v[r:] + v[:r] for r in range(len(v))) for v in (w, tuple(invert_word(w))))
            seen.add(cls)
    return seen


def _canon(w):
    # same class representative as brute_a_relators, for comparison
    return min(min(v[r:] + v[:r] for r in range(len(v))) for v in (tuple(w), tuple(invert_word(w))))


@pytest.mark.parametrize("n,max_len", [(2, 4), (3, 3), (3, 6)])
def test_a_relators_against_brute(n, max_len):
    triv = (lambda w: klein(w) == (0, 0)) if n == 2 else (lambda w: heisenberg(w) == (0, 0, 0))
    want = brute_a_relators(n, max_len, triv)
    got = {_canon(w) for w in a_relator_codes(n, max_len)}
    assert got == want


def test_cubes_of_generators():
    rels = enumerate_a_relators(3, 3)
    assert rels == [(("a1", 1),) * 3, (("a2", 1),) * 3]


@given(st.lists(letters, min_size=1, max_size=8), st.integers(0, 8), st.booleans())
def test_cyclic_key_invariant(w, r, inv):
    w = cyclic_reduce(w)
    if not w:
        return
    v = w[r % len(w):] + w[:r % len(w)]
    if inv:
        v = tuple(invert_word(v))
    assert cyclic_key(v) == cyclic_key(w)


def test_presentation_counts():
    M = make_primitive("LR", k=2)
    hw = M.hardware
    P = emit_presentation(M, "M")
    width = hw.N + 2
    assert len(P.generators) == len(hw.names) - 1 + len(M.positive) * width
    assert P.count("(theta,q)") == len(M.positive) * hw.n_parts
    assert P.count("(theta,a)") == sum(len(rule_domain(r, j)) for r in M.positive
                                       for j in range(1, hw.n_sectors + 1))
    # a locked sector contributes no commutators
    z12 = M.rule("z1,2")
    assert rule_domain(z12, 1) == []


def test_theta_q_relator_reads_rule():
    M = make_primitive("LR", k=1)
    P = emit_presentation(M, "M")
    r = M.rule("z1[a]")
    rel = [x for x in P.relators if x.info == ("z1[a]", 1)][0]
    # theta_1^-1 p1 theta_2 (Y2.a)^-1 p1^-1 Y1.a   for   p1 -> Y1.a^-1 p1 Y2.a
    assert P.text(rel.word) == "T.z1[a].1^-1 P.p1 T.z1[a].2 Y2.a^-1 P.p1^-1 Y1.a"
    assert r.text().startswith("z1[a]:")


def test_classify_and_text_roundtrip(tower):
    P = emit_presentation(tower.m5, "Ga", 3)
    gens, rels = parse_presentation_text(P.to_text())
    assert gens == P.generators
    assert len(rels) == P.count()
    r = P.relators[0]
    assert P.classify(r.word) == r.kind
    rot = r.word[2:] + r.word[:2]
    assert P.classify(rot) == r.kind
    assert P.classify(tuple(invert_word(r.word))) == r.kind
    alph = {v: k for k, v in P.special_alphabet.items()}
    commutator3 = tuple(alph[abs(c)] * (1 if c > 0 else -1) for c in (1, 2, -1, -2) * 3)
    # longer than the bound, still recognized through the oracle
    assert P.classify(commutator3) == "a-relation"


def test_hub_in_g(tower):
    P = emit_presentation(tower.m5, "G")
    assert P.count("hub") == 1
    with pytest.raises(UnsupportedExponent):
        emit_presentation(tower.m5, "Ga", 4, exponent=5)
