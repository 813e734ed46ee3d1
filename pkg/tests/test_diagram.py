import json
from fractions import Fraction
from functools import lru_cache

import pytest
from hypothesis import given, settings, strategies as st

from smforge.computation import Computation, run
from smforge.diagram import (acell_band_fixture, area, cancel_pairs, check_no_annuli, computation_from_trapezium,
                             cyclic_length, diagram_from_json, disk_diagram, hub_rings, maximal_bands,
                             path_length, power_relator_diagram, presentation_for, signature,
                             theta_annulus_fixture, transpose_band_acell, trapezium_factorization,
                             trapezium_from_computation, validate_diagram)
from smforge.machines import accept_history, accept_input, make_primitive

from test_computation import random_walk


def brute(word, delta):
    """Least weight over every way of cutting the word into single letters
    and syllables t, at, ta, aat, ata, taa, at a ..."""
    @lru_cache(None)
    def go(i):
        if i == len(word):
            return Fraction(0)
        best = None
        for j in range(i + 1, len(word) + 1):
            seg = word[i:j]
            if len(seg) == 1:
                c = delta if seg == "a" else Fraction(1)
            elif seg.count("t") == 1 and "q" not in seg and seg.count("a") <= 2:
                c = Fraction(1)
            else:
                continue
            v = c + go(j)
            best = v if best is None or v < best else best
        return best
    return go(0)


mixed = st.text(alphabet="tqa", max_size=10)


@given(mixed, st.sampled_from([Fraction(1, 100), Fraction(1, 7), Fraction(1, 3)]))
def test_path_length_brute(w, delta):
    assert path_length(list(w), delta) == brute(w, delta)


@given(mixed, mixed, st.sampled_from([Fraction(1, 100), Fraction(1, 7)]))
def test_subadditivity(u, v, delta):
    s = path_length(list(u + v), delta)
    a, b = path_length(list(u), delta), path_length(list(v), delta)
    assert a + b >= s >= a + b - 2 * delta


@given(st.text(alphabet="ta", max_size=10), st.sampled_from([Fraction(1, 100), Fraction(1, 7)]))
def test_lower_bound_no_q(w, delta):
    c, d = w.count("t"), w.count("a")
    assert path_length(list(w), delta) >= max(c, c + (d - 2 * c) * delta)


def test_single_letters():
    assert path_length(["a"], Fraction(1, 100)) == Fraction(1, 100)
    assert path_length("q t", Fraction(1, 100)) == 2
    assert path_length("a t a", Fraction(1, 100)) == 1
    assert cyclic_length("a a t".split(), Fraction(1, 100)) == 1


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(["lr", "m5", "m"]), st.integers(1, 10), st.data())
def test_trapezium_roundtrip(tower, which, steps, data):
    if which == "lr":
        M = make_primitive("LR", k=2)
        W = M.config("start", {1: ["Y1.a", "Y1.b"]})
    else:
        M = tower.stage(which)
        W = accept_input(M, "a1")
    hist = random_walk(M, W, steps, data)
    if not hist:
        return
    c = run(W, hist, M)
    d = trapezium_from_computation(c)
    back = computation_from_trapezium(d)
    assert [r.label for r in back.history] == c.labels()
    assert back.start == c.start and back.end == c.end
    bottom, right, top, left = trapezium_factorization(d)
    assert d.word(bottom) == c.start.tokens
    assert d.word(top) == c.end.tokens
    assert validate_diagram(d)["ok"]
    assert check_no_annuli(d)["ok"]
    assert area(d) == sum(1 for k in d.kinds if k != "0")


def test_diagram_json_roundtrip():
    M = make_primitive("LR", k=1)
    W = M.config("start", {1: ["Y1.a"]})
    d = trapezium_from_computation(run(W, ["z1[a]", "z1,2", "z2[a]"], M))
    text = d.dumps()
    e = diagram_from_json(json.loads(text), presentation_for(M)).finalize()
    assert e.dumps() == text
    assert "graph" in d.to_dot()


@pytest.fixture(scope="module")
def disk(tower):
    M = tower.m
    W = accept_input(M, "a1")
    return disk_diagram(W, Computation(M, W, accept_history(M, "a1")))


def test_disk_diagram(tower, disk):
    assert validate_diagram(disk)["ok"]
    assert disk.boundary_label() == accept_input(tower.m, "a1").tokens
    assert disk.count("hub") == 1
    rep = check_no_annuli(disk, ("q", "a", "(theta,q)", "(theta,a)"))
    assert rep["ok"]
    # every theta-band closes round the hub
    bands = maximal_bands(disk, "theta")
    assert len(bands) == 155 and all(b.annular for b in bands)


def test_theta_fixture_detected(tower):
    fx = theta_annulus_fixture(tower.m5)
    assert validate_diagram(fx)["ok"]
    assert len(check_no_annuli(fx)["theta"]) == 1
    around, other = hub_rings(fx)
    assert around == [] and len(other) == 1


def test_power_relator_diagram(tower):
    d = power_relator_diagram("a1 a2", tower=tower)
    assert validate_diagram(d)["ok"]
    names = [d.P.names[abs(x)].rsplit(".", 1)[1] for x in d.boundary_label()]
    assert names == ["a1", "a2"] * 3


@pytest.mark.parametrize("covered", [0, 1, 2, 3])
def test_transposition(tower, covered):
    d, seed, pi = acell_band_fixture(tower.m, covered=covered)
    new, before, after = transpose_band_acell(d, seed, pi)
    assert new.boundary_label() == d.boundary_label()
    assert validate_diagram(new)["ok"]
    assert before == signature(d)
    if covered >= 2:
        assert after < before


def test_signature_orders_by_head_first():
    from smforge.diagram import Signature
    a = Signature(0, 1, 5, 0, Fraction(100))
    b = Signature(0, 2, 0, 0, Fraction(1))
    assert a < b
    c = Signature(0, 1, 5, 0, Fraction(99))
    assert c < a


def test_cancel_pairs_noop_on_trapezium():
    M = make_primitive("LR", k=1)
    W = M.config("start", {1: ["Y1.a"]})
    d = trapezium_from_computation(run(W, ["z1[a]", "z1,2", "z2[a]"], M))
    e = cancel_pairs(d)
    assert area(e) == area(d)
