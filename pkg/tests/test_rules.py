import pytest
from hypothesis import given, strategies as st

from smforge.hardware import free_reduce, parse_admissible
from smforge.machines import make_multiplier, make_primitive
from smforge.rules import NotApplicable, RuleError, applicable, apply, make_rule, rule_from_json, why_not_applicable

from conftest import toy_hardware
from test_hardware import admissible, naive_reduce

HW = toy_hardware()

MOVE = make_rule([("A.s", None, "A.s", None), ("B.s", "X.x^-1", "B.s", "Z.x"), ("C.s", None, "C.s", None)],
                 hardware=HW, rule_id="move")
SWITCH = make_rule([("A.s", None, "A.f", None), ("B.s", None, "B.m", None), ("C.s", None, "C.f", None)],
                   {1: "locked"}, hardware=HW, rule_id="switch")
WRITE = make_rule([("A.f", None, "A.f", "X.y"), ("B.m", None, "B.f", "Z.y^-1"), ("C.f", None, "C.f", None)],
                  {2: ["Z.y"]}, hardware=HW, rule_id="write")
RULES = [MOVE, SWITCH, WRITE]
ALL = RULES + [r.inverse() for r in RULES]


def oracle_applicable(W, r):
    hw = W.hardware
    for q in W.states:
        if hw.names[abs(q)] != r.parts[hw.index[abs(q)]].src:
            return False
    for u, j in zip(W.sectors, W.sector_ids):
        d = r.domains[j - 1]
        if d is not None and any(hw.names[abs(x)] not in d for x in u):
            return False
    return True


def oracle_apply(W, r):
    # substitute letter by letter on names, then reduce
    hw = W.hardware
    out = []
    for x in W.tokens:
        if not hw.is_state(x):
            out.append(x)
            continue
        p = r.parts[hw.index[abs(x)]]
        seq = []
        if p.a is not None:
            seq.append(hw.ids[p.a[0]] * p.a[1])
        seq.append(hw.ids[p.dst])
        if p.b is not None:
            seq.append(hw.ids[p.b[0]] * p.b[1])
        if x < 0:
            seq = [-y for y in reversed(seq)]
        out.extend(seq)
    out = list(naive_reduce(out))
    while out and not hw.is_state(out[0]):
        out.pop(0)
    while out and not hw.is_state(out[-1]):
        out.pop()
    return tuple(out)


@given(admissible(HW), st.sampled_from(ALL))
def test_apply_matches_oracle(toks, r):
    W = parse_admissible(toks, HW)
    ok = applicable(W, r)
    assert ok == oracle_applicable(W, r)
    if not ok:
        assert why_not_applicable(W, r)
        with pytest.raises(NotApplicable):
            apply(W, r)
        return
    V = apply(W, r)
    assert V.tokens == oracle_apply(W, r)
    # base part sequence is kept
    assert [p for p, _ in V.base] == [p for p, _ in W.base]
    # round trip
    assert apply(V, r.inverse()) == W
    s = W.q_len
    assert -2 * s <= V.a_len - W.a_len <= 2 * s


def test_domain_and_lock_validation():
    with pytest.raises(RuleError):
        # writes into the sector it locks
        make_rule([("A.s", None, "A.s", "X.x"), ("B.s", None, "B.s", None), ("C.s", None, "C.s", None)],
                  {1: "locked"}, hardware=HW, rule_id="bad")
    with pytest.raises(RuleError):
        # letter of the wrong sector
        make_rule([("A.s", None, "A.s", "Z.x"), ("B.s", None, "B.s", None), ("C.s", None, "C.s", None)],
                  hardware=HW, rule_id="bad")
    with pytest.raises(RuleError):
        # rewrite leaves its part
        make_rule([("A.s", None, "B.s", None), ("B.s", None, "B.s", None), ("C.s", None, "C.s", None)],
                  hardware=HW, rule_id="bad")
    with pytest.raises(RuleError):
        make_rule([("A.s", None, "A.s", None)], hardware=HW, rule_id="bad")


def test_locked_sector_blocks():
    W = parse_admissible("A.s X.x B.s C.s", HW)
    assert not applicable(W, SWITCH)
    assert "locked" in why_not_applicable(W, SWITCH)
    V = parse_admissible("A.s B.s Z.x C.s", HW)
    assert str(apply(V, SWITCH)) == "A.f B.m Z.x C.f"


def test_inverse_involution_and_json():
    for r in ALL:
        assert r.inverse().inverse() is r
        assert rule_from_json(r.to_json(), HW) == r
    assert MOVE.inverse().label == "move^-1"


def test_unreduced_base_application():
    # B B^-1: the one-part sector to the right of B is Z
    W = parse_admissible("B.s Z.x B.s^-1", HW)
    V = apply(W, MOVE)
    # B.s -> X.x^-1 B.s Z.x; the outer X letters are cut
    assert str(V) == "B.s Z.x Z.x Z.x^-1 B.s^-1" or str(V) == "B.s Z.x B.s^-1"
    assert apply(V, MOVE.inverse()) == W


def _project(W):
    # LR projection: drop state letters, read both sectors as one free word
    hw = W.hardware
    out = []
    for x in W.tokens:
        if hw.is_state(x):
            continue
        out.append((hw.names[abs(x)].split(".", 1)[1], 1 if x > 0 else -1))
    return tuple(free_reduce([{"a": 1, "b": 2}[a] * s for a, s in out]))


@given(st.lists(st.tuples(st.sampled_from("ab"), st.sampled_from([1, -1])), max_size=5),
       st.lists(st.tuples(st.sampled_from("ab"), st.sampled_from([1, -1])), max_size=5),
       st.sampled_from(["p1", "p2"]))
def test_lr_projection_preserved(u, v, p):
    M = make_primitive("LR", k=1)
    hw = M.hardware
    u = free_reduce([hw.ids[f"Y1.{a}"] * s for a, s in u])
    v = free_reduce([hw.ids[f"Y2.{a}"] * s for a, s in v])
    W = parse_admissible([hw.ids["Q1.o"], *u, hw.ids[f"P.{p}"], *v, hw.ids["Q2.o"]], hw)
    for r in M.rules:
        if applicable(W, r):
            assert _project(apply(W, r)) == _project(W)


def test_multiplier_rule_shape():
    M = make_multiplier("left")
    W = parse_admissible("Q0.q Q1.q", M.hardware)
    V = apply(W, M.rule("t[a]"))
    assert str(V) == "Q0.q X.a Q1.q"
    assert V.a_len == 1
