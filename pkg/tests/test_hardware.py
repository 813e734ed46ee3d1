import pytest
from hypothesis import assume, given, strategies as st

from smforge.hardware import (AdmissibilityError, Hardware, HardwareError, configuration,
                              free_reduce, invert_word, is_reduced, make_hardware, measures,
                              parse_admissible, word_from_json)
from smforge.machines import make_primitive

from conftest import toy_hardware


def naive_reduce(w):
    # delete the first cancelling pair until none is left
    w = list(w)
    changed = True
    while changed:
        changed = False
        for i in range(len(w) - 1):
            if w[i] == -w[i + 1]:
                del w[i:i + 2]
                changed = True
                break
    return tuple(w)


signed = st.lists(st.sampled_from([1, -1, 2, -2, 3, -3]), max_size=14)


@given(signed)
def test_free_reduce_matches_naive(w):
    r = free_reduce(w)
    assert tuple(r) == naive_reduce(w)
    assert is_reduced(r)


@given(signed)
def test_invert_is_involution(w):
    assert tuple(invert_word(invert_word(w))) == tuple(w)


def test_names_are_qualified():
    hw = toy_hardware()
    assert hw.parts[1] == ("B.s", "B.m", "B.f")
    assert hw.alphabet(1) == ("X.x", "X.y")
    assert hw.start == ("A.s", "B.s", "C.s")
    assert hw.end == ("A.f", "B.f", "C.f")


def test_duplicate_names_rejected():
    with pytest.raises(HardwareError):
        make_hardware([("A", ["s", "s"]), ("B", ["s"])], [("X", ["x"])])


def test_wrong_number_of_alphabets():
    with pytest.raises(HardwareError):
        make_hardware([("A", ["s"]), ("B", ["s"])], [])


def test_sector_map_linear_and_wrap():
    hw = toy_hardware()
    assert hw.sector_alphabet[((0, 1), (1, 1))] == 1
    assert hw.sector_alphabet[((2, -1), (1, -1))] == 2
    # q_2 q_2^-1 and q_1^-1 q_1 are the two one-part sectors next to part 1 of the middle
    assert hw.sector_alphabet[((1, 1), (1, -1))] == 2
    assert hw.sector_alphabet[((1, -1), (1, 1))] == 1
    assert ((2, 1), (0, 1)) not in hw.sector_alphabet
    cyc = toy_hardware(cyclic=True)
    assert cyc.sector_alphabet[((2, 1), (0, 1))] == 3
    assert cyc.sector_alphabet[((0, -1), (2, -1))] == 3


def test_parse_rejects():
    hw = toy_hardware()
    with pytest.raises(AdmissibilityError):
        parse_admissible("A.s X.x X.x^-1 B.s", hw)  # not reduced
    with pytest.raises(AdmissibilityError):
        parse_admissible("A.s C.s", hw)  # illegal base pair
    with pytest.raises(AdmissibilityError):
        parse_admissible("A.s Z.x B.s", hw)  # letter of another sector
    with pytest.raises(AdmissibilityError):
        parse_admissible("X.x A.s", hw)  # starts with a tape letter
    with pytest.raises(AdmissibilityError):
        parse_admissible("A.s nope B.s", hw)


def test_measures_trivial():
    hw = toy_hardware()
    W = parse_admissible("A.s X.x X.y^-1 B.m Z.y C.f", hw)
    m = measures(W)
    assert m["a_len"] == 3
    assert m["q_len"] == 3
    assert m["base"] == "A B C"
    assert m["is_tame"] is None
    assert W.is_configuration()
    V = parse_admissible("A.s X.x B.s Z.y B.m^-1 A.s^-1", hw)
    assert not V.is_configuration()
    assert V.base_text() == "A B B^-1 A^-1"
    assert V.a_len == 2


@st.composite
def admissible(draw, hw):
    """Random admissible word: walk the legal base pairs, fill sectors."""
    legal = {}
    for (a, b), j in hw.sector_alphabet.items():
        legal.setdefault(a, []).append((b, j))
    n = draw(st.integers(1, 5))
    cur = draw(st.sampled_from(sorted(legal)))
    toks = [draw(st.sampled_from(hw.parts[cur[0]])) + ("" if cur[1] > 0 else "^-1")]
    for _ in range(n - 1):
        nxt, j = draw(st.sampled_from(sorted(legal[cur])))
        letters = hw.alphabet(j)
        u = draw(st.lists(st.tuples(st.sampled_from(letters), st.sampled_from([1, -1])), max_size=4)) if letters else []
        ids = free_reduce([hw.ids[a] * s for a, s in u])
        toks.extend(hw.token(x) for x in ids)
        q = draw(st.sampled_from(hw.parts[nxt[0]]))
        toks.append(q if nxt[1] > 0 else q + "^-1")
        cur = nxt
        if cur not in legal:
            break
    ids = [hw.ids[t[:-3]] * -1 if t.endswith("^-1") else hw.ids[t] for t in toks]
    assume(tuple(free_reduce(ids)) == tuple(ids))
    return toks


HW = toy_hardware()
HWC = toy_hardware(cyclic=True)


@given(admissible(HW))
def test_roundtrip_json(toks):
    W = parse_admissible(toks, HW)
    assert word_from_json(W.to_json(), HW) == W
    assert W.a_len + W.q_len == len(W.tokens)
    assert W.inverse().inverse() == W
    assert parse_admissible(str(W), HW) == W


@given(admissible(HWC))
def test_roundtrip_cyclic(toks):
    W = parse_admissible(toks, HWC)
    assert parse_admissible(str(W), HWC) == W
    assert W.inverse().a_len == W.a_len


def test_hardware_json_roundtrip():
    for hw in (HW, HWC, make_primitive("LR", k=2).hardware):
        assert Hardware.from_json(hw.to_json()) == hw


def test_configuration_builder():
    hw = toy_hardware()
    W = configuration(hw, hw.start, [["X.x"], []])
    assert str(W) == "A.s X.x B.s C.s"


@given(admissible(HW), st.data())
def test_factors_between_states_are_admissible(toks, data):
    W = parse_admissible(toks, HW)
    pos = [k for k, x in enumerate(W.tokens) if HW.is_state(x)]
    i = data.draw(st.integers(0, len(pos) - 1))
    j = data.draw(st.integers(i, len(pos) - 1))
    F = parse_admissible(list(W.tokens[pos[i]:pos[j] + 1]), HW)
    assert [p for p, _ in F.base] == [p for p, _ in W.base[i:j + 1]]
