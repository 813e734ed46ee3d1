import pytest
from hypothesis import given, settings, strategies as st

from smforge.computation import (Computation, RunError, StepHistory, StepHistoryError, accept_search, bfs,
                                 engine, is_controlled, one_machine_index, reduce_history, reduced_histories,
                                 run, split_step_letters, step_history)
from smforge.machines import accept_history, accept_input, base_input_config, make_primitive, parse_word
from smforge.rules import applicable, apply


def random_walk(M, W, steps, data):
    hist, cur = [], W
    for _ in range(steps):
        opts = [r for r in M.rules if applicable(cur, r)
                and not (hist and hist[-1].id == r.id and hist[-1].sign == -r.sign)]
        if not opts:
            break
        r = data.draw(st.sampled_from(opts))
        hist.append(r)
        cur = apply(cur, r)
    return hist


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(["m1", "m3", "m5", "m"]), st.integers(0, 12), st.data())
def test_engine_trace_matches_apply(tower, stage, steps, data):
    M = tower.stage(stage)
    W = accept_input(M, "a1")
    hist = random_walk(M, W, steps, data)
    c = run(W, hist, M)
    # the engine path (configurations) against plain rule application
    cur = W
    for r, V in zip(hist, c.trace[1:]):
        cur = apply(cur, r)
        assert V == cur
    assert run(W, hist, M).trace == c.trace


def test_run_rejects_unreduced():
    M = make_primitive("LR", k=1)
    W = M.config("start", {1: ["Y1.a"]})
    r = M.rule("z1[a]")
    with pytest.raises(RunError) as e:
        run(W, [r, r.inverse()], M)
    assert e.value.step == 2
    c = run(W, [r, r.inverse()], M, reduce=True)
    assert c.t == 0 and c.end == W


def test_run_not_applicable():
    M = make_primitive("LR", k=1)
    W = M.config("start", {1: ["Y1.a"]})
    with pytest.raises(RunError):
        run(W, ["z1,2"], M)


def test_reduce_history():
    M = make_primitive("LR", k=1)
    a, b = M.rule("z1[a]"), M.rule("z1[b]")
    assert reduce_history([a, b, b.inverse(), a.inverse(), b]) == [b]


def test_json_shape():
    M = make_primitive("LR", k=1)
    W = M.config("start", {1: ["Y1.a"]})
    c = run(W, ["z1[a]", "z1,2", "z2[a]"], M)
    d = c.to_json(with_trace=True)
    assert d["history"] == ["z1[a]", "z1,2", "z2[a]"]
    assert d["trace"][-1] == ["Q1.o", "Y1.a", "P.p2", "Q2.o"]


def test_step_history_main(tower):
    M = tower.m
    c = Computation(M, accept_input(M, "a1"), accept_history(M, "a1"))
    assert str(step_history(c)) == "(s)_1(1)_1(12)_1(2)_1(23)_1(3)_1(34)_1(4)_1(45)_1(5)_1(a)_1"
    assert one_machine_index(c) == 1
    c2 = Computation(M, accept_input(M, "a1", True), accept_history(M, "a1", True))
    assert one_machine_index(c2) == 2
    assert str(step_history(c2)).startswith("(s)_2(1)_2")


def test_step_history_m5(tower):
    M5 = tower.m5
    c = Computation(M5, accept_input(M5, "a1"), accept_history(M5, "a1"))
    assert str(step_history(c)) == "(1)(12)(2)(23)(3)(34)(4)(45)(5)"
    inv = list(reversed([r.inverse() for r in c.history]))
    assert str(step_history(inv)) == "(5)(54)(4)(43)(3)(32)(2)(21)(1)"


def test_theta0_mid_word_rejected(tower):
    M5 = tower.m5
    t0 = M5.rule("theta0")
    t45 = M5.rule("theta(45)")
    x = next(r for r in M5.positive if r.tags.get("m5") == 4)
    with pytest.raises(StepHistoryError):
        step_history([x, t0, t45])
    step_history([t0, x])


def test_split_letters():
    assert split_step_letters("(12)(2)(23)") == ["(12)", "(2)", "(23)"]
    assert StepHistory(["(1)", "(12)", "(2)"]).contains("(12)(2)")
    assert split_step_letters("(s)_1^-1(5)_1") == ["(s)_1^-1", "(5)_1"]


def test_bfs_base_machine(tower):
    M1 = tower.m1
    res = accept_search(base_input_config(M1, parse_word("a1 a1 a1")), M1,
                        {"max_depth": 30, "max_alen": 8})
    assert res.accepted and res.computation.t == 6
    # a shortest one: no shorter history reaches the accept configuration
    short = [h for h in reduced_histories(M1, base_input_config(M1, parse_word("a1 a1 a1")), 5, 8)]
    key = M1.accept_config()
    assert not any(run(base_input_config(M1, parse_word("a1 a1 a1")), h, M1).end == key for h in short)
    neg = accept_search(base_input_config(M1, parse_word("a1 a2")), M1, {"max_depth": 20, "max_alen": 6})
    assert not neg.accepted
    assert "bounded negative" in neg.summary()


@pytest.mark.parametrize("seed", [None, 0, 1, 7])
def test_seed_only_breaks_ties(tower, seed):
    M1 = tower.m1
    W = base_input_config(M1, parse_word("a2 a2 a2"))
    res, _, _ = bfs(M1, W, None, 30, 200000, 8, seed=seed)
    assert res.accepted and res.computation.t == 6
    assert res.computation.end == M1.accept_config()


def test_seed_permutes_order(tower):
    M = tower.m5
    e0, e1 = engine(M), engine(M, seed=3)
    assert e1 is engine(M, seed=3)
    assert sorted(r.label for r, _ in e0.by_src[next(iter(e0.by_src))]) == \
        sorted(r.label for r, _ in e1.by_src[next(iter(e0.by_src))])


def test_controlled_lrk_in_m5(tower):
    M5 = tower.m5
    ph = {r.id: r for r in M5.positive if r.tags.get("m5") == 2}
    conn = sorted((r for r in ph.values() if r.tags.get("prim") == "connect"), key=lambda r: r.tags["pass"])
    runs = [r for r in ph.values() if r.tags.get("prim") == "run" and r.tags["pass"] == conn[1].tags["pass"] + 1]
    a, b = conn[1], conn[2]
    assert is_controlled([a, b])
    assert is_controlled([a, runs[0], b])
    assert not is_controlled([b, a])
