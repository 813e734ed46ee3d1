import hashlib
from collections import deque

import pytest
from hypothesis import given, settings, strategies as st

from smforge.computation import run
from smforge.hardware import dumps, parse_admissible
from smforge.machines import (MachineError, Params, accept_history, accept_input, accept_target, build_m3, coordinate_shift,
                              machine_from_json, make_base_machine, make_primitive, project, standard_config)
from smforge.rules import applicable, apply


def shortest(M, W, target, max_len, max_alen):
    """Plain BFS over admissible words with rules.apply; length of the
    shortest computation W -> target and the number of shortest ones."""
    dist = {W: 0}
    ways = {W: 1}
    q = deque([W])
    while q:
        V = q.popleft()
        if dist[V] >= max_len:
            continue
        for r in M.rules:
            if not applicable(V, r):
                continue
            X = apply(V, r)
            if X.a_len > max_alen:
                continue
            if X not in dist:
                dist[X] = dist[V] + 1
                ways[X] = ways[V]
                q.append(X)
            elif dist[X] == dist[V] + 1:
                ways[X] += ways[V]
    return dist.get(target), ways.get(target, 0)


def lr_pair(M, u):
    hw = M.hardware
    k = (len(hw.parts[1])) // 2
    body = [f"Y1.{a}" for a in u]
    W = parse_admissible(["Q1.o", *body, "P.p1", "Q2.o"], hw)
    V = parse_admissible(["Q1.o", *body, f"P.p{2 * k}", "Q2.o"], hw)
    return W, V


@pytest.mark.parametrize("k", [1, 2])
@pytest.mark.parametrize("u", ["", "a", "ab", "ba", "abb"])
def test_lr_k_shortest_length(k, u):
    M = make_primitive("LR", k=k)
    W, V = lr_pair(M, u)
    t, ways = shortest(M, W, V, 2 * len(u) * k + 2 * k + 2, len(u) + 1)
    # t = 2lk + 2k - 1, reached by one computation
    assert t == 2 * len(u) * k + 2 * k - 1
    assert ways == 1


def test_lr_rule_counts():
    # |Y| = 2: 2k runs of |Y| rules and 2k-1 connecting rules
    for k in (1, 2, 3):
        for kind in ("LR", "RL"):
            assert len(make_primitive(kind, k=k).positive) == 4 * k + 2 * k - 1
    ids = {r.id for r in make_primitive("LR", k=2).positive}
    assert {"z1,2", "z2,3", "z3,4"} <= ids


def test_lr1_is_lr():
    a = make_primitive("LR", k=1)
    assert [r.text() for r in a.positive][:2] == [
        "z1[a]: [Q1.o -> Q1.o, P.p1 -> Y1.a^-1 P.p1 Y2.a, Q2.o -> Q2.o]",
        "z1[b]: [Q1.o -> Q1.o, P.p1 -> Y1.b^-1 P.p1 Y2.b, Q2.o -> Q2.o]"]
    z12 = a.rule("z1,2")
    assert z12.locked_sectors() == (1,)


def test_params_validation():
    for bad in ({"n": 2}, {"k": 0}, {"L": 1}, {"delta": 1.5}, {"c7": 0}):
        with pytest.raises(MachineError):
            Params(**bad)


def test_stage_sizes(tower):
    # frozen from the constructors
    got = {s: (tower.stage(s).hardware.n_parts, len(tower.stage(s).positive)) for s in tower.STAGES}
    assert got == {"m1": (4, 9), "m2": (7, 9), "m2bar": (21, 18), "m3": (21, 214), "m4": (42, 214),
                   "m4bar": (43, 214), "m5": (43, 250), "m61": (172, 250), "m62": (172, 250),
                   "m": (172, 504)}


def test_symmetry_everywhere(tower):
    for s in tower.STAGES:
        M = tower.stage(s)
        for r, r2 in zip(M.positive, M.negative):
            assert r2.inverse() is r
            assert r2.domains == r.domains
            assert [p.inverse() for p in r.parts] == list(r2.parts)


def test_history_sectors(tower):
    M1, M2 = tower.m1, tower.m2
    assert len(M2.positive) == len(M1.positive)
    for j, (left, right) in M2.hardware.hist.items():
        assert len(left) + len(right) == 2 * len(M1.positive)


def test_triple_base(tower):
    M2bar = tower.m2bar
    assert len(M2bar.positive) == 2 * len(tower.m2.positive)
    hw = M2bar.hardware
    assert hw.sector_name(M2bar.input_sectors[0]) == "R0P1"
    roles = hw.roles
    for j in range(1, hw.n_sectors + 1):
        if {roles[j - 1], roles[j]} in ({"P", "Q"}, {"Q", "R"}):
            assert all(r.is_locked(j) for r in M2bar.positive)


def test_m3_phase_count(tower):
    M3 = build_m3(tower.m2bar, 1)
    assert len(M3.meta["kinds"]) == 7
    assert sum(r.id.startswith("chi(") for r in M3.positive) == 6


def test_prepend_t(tower):
    M = tower.m4bar
    assert M.hardware.parts[0] == ("t.t",)
    assert M.meta["N"] == tower.m4.hardware.N + 2
    assert M.hardware.N == tower.m4.hardware.N + 1


def test_m5_phases(tower):
    M5 = tower.m5
    phase = lambda p: [r for r in M5.positive if r.tags.get("m5") == p]
    assert len(phase(1)) == 2
    assert len(phase(3)) == len(tower.m1.positive)


def test_cyclic_copies(tower):
    M61 = tower.m61
    assert M61.hardware.cyclic
    assert M61.hardware.N + 1 == tower.params.L * tower.m5.hardware.n_parts
    assert M61.hardware.alphabet(M61.hardware.n_sectors) == ()


def test_constructed_lengths(tower):
    M = tower.m
    lens = {u: len(accept_history(M, u)) for u in ("a1", "a1 a2")}
    assert lens == {"a1": 155, "a1 a2": 227}
    for special in (False, True):
        c = run(accept_input(M, "a1", special), accept_history(M, "a1", special))
        assert c.end == M.accept_config()
        assert c.is_reduced()


def test_constructed_lower_stages(tower):
    for s in ("m1", "m2", "m2bar", "m3", "m4", "m4bar", "m5", "m61", "m62"):
        M = tower.stage(s)
        c = run(accept_input(M, "a2"), accept_history(M, "a2"))
        assert c.end == accept_target(M, "a2"), s
        if s in ("m1", "m5", "m61", "m62"):
            assert c.end == M.accept_config()


def test_transition_admissibility(tower):
    M = tower.m
    I = standard_config(M, "I", "a1 a1 a1")
    assert applicable(I, M.rule("th(s)1"))
    assert not applicable(I, M.rule("th(s)2"))
    empty = standard_config(M, "I", "")
    assert empty == standard_config(M, "J", "")
    assert M.accept_config().a_len == 0
    J = standard_config(M, "J", "a1 a1 a1")
    assert applicable(J, M.rule("th(s)2"))


def test_projection_and_shift(tower):
    M = tower.m
    W = M.accept_config()
    for i in range(1, 5):
        V = project(W, i)
        for j in range(1, 5):
            S = coordinate_shift(V, i, j)
            assert coordinate_shift(S, j, i) == V
            assert S == project(W, j)
    with pytest.raises(MachineError):
        project(W, 5)


def test_base_language_small(tower):
    M1 = tower.m1
    from smforge.computation import bfs
    from smforge.machines import base_input_config, parse_word
    yes = bfs(M1, base_input_config(M1, parse_word("a1 a1 a1")), None, 30, 200000, 8)[0]
    assert yes.accepted
    no = bfs(M1, base_input_config(M1, parse_word("a1 a2")), None, 30, 200000, 6)[0]
    assert not no.accepted
    free = make_base_machine("free_checker")
    e = bfs(free, free.config("start"), None, 10)[0]
    assert e.accepted


def test_machine_json_roundtrip(lr2, tower):
    for M in (lr2, tower.m5):
        M2 = machine_from_json(M.to_json())
        assert [r.to_json() for r in M2.rules] == [r.to_json() for r in M.rules]
        assert M2.hardware == M.hardware


def test_machine_file_hash(tower):
    # pinned regression: the build output for n=3, k=2, L=4, power_checker
    text = dumps(tower.m.to_json()) + "\n"
    assert hashlib.sha256(text.encode()).hexdigest() == \
        "d583c83d449dc950f2c9cc09df738259938b86f6e558e529266dd197de8425cf"


@settings(max_examples=30, deadline=None)
@given(st.lists(st.sampled_from("ab"), max_size=4), st.integers(0, 8), st.data())
def test_lr_a_length_bounded(u, t, data):
    # along any reduced computation of LR_1 the a-length stays below the
    # larger of the two ends
    M = make_primitive("LR", k=1)
    W, _ = lr_pair(M, "".join(u))
    trace = [W]
    last = None
    for _ in range(t):
        opts = [r for r in M.rules if applicable(trace[-1], r)
                and not (last is not None and r.id == last.id and r.sign == -last.sign)]
        if not opts:
            break
        r = data.draw(st.sampled_from(opts))
        trace.append(apply(trace[-1], r))
        last = r
    top = max(trace[0].a_len, trace[-1].a_len)
    assert all(V.a_len <= top for V in trace)
