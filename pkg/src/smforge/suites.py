"""Named verification checks, one per property of the other modules.

Every check is a function returning a :class:`Check`; ``SUITES`` groups
them by module and ``run_suite`` resolves a suite or check name.
"""

import itertools
import time
from fractions import Fraction

from .computation import (Computation, Engine, bfs, engine, one_machine_index, reduced_paths,
                          run, step_history, walk_reduced)
from .hardware import (AdmissibilityError, AdmissibleWord, free_reduce, parse_admissible,
                       word_from_json)
from .machines import (LETTERS, MachineError, Machine, accept_history, accept_input,
                       build_tower, machine_from_json, make_multiplier, make_primitive,
                       power, standard_config)
from .rules import applicable, apply, rule_from_json


class Check:
    def __init__(self, name, ok, measured=None, detail=""):
        self.name = name
        self.ok = bool(ok)
        self.measured = measured or {}
        self.detail = detail
        self.seconds = 0.0

    def to_json(self):
        return {"name": self.name, "ok": self.ok, "measured": _plain(self.measured),
                "detail": self.detail}

    def line(self):
        return f"{'PASS' if self.ok else 'FAIL'} {self.name}" + (f": {self.detail}" if self.detail else "")

    def __repr__(self):
        return f"Check({self.line()})"


def _plain(v):
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, Fraction):
        return str(v)
    return v


# ---------------------------------------------------------------------------
# small helpers

def reduced_words(letters, max_len):
    """Freely reduced words of length <= max_len as tuples of (letter, sign)."""
    gens = [(x, 1) for x in letters] + [(x, -1) for x in letters]
    out = [()]
    frontier = [()]
    for _ in range(max_len):
        frontier = [w + (g,) for w in frontier for g in gens
                    if not (w and w[-1] == (g[0], -g[1]))]
        out += frontier
    return out


def _on(sector, w):
    return [(f"{sector}.{x}", s) for x, s in w]


def _tower():
    return build_tower()


def _corpus_computations(limit_m=2):
    """Small reduced computations over several stages: constructed accepting
    computations plus short walks from their start configurations."""
    T = _tower()
    out = []
    for M in (T.m3, T.m5):
        W = accept_input(M, "a1")
        out.append(Computation(M, W, accept_history(M, "a1")))
    M = T.m
    for u in ("a1", "a2")[:limit_m]:
        W = accept_input(M, u)
        out.append(Computation(M, W, accept_history(M, u)))
    return out


def _corpus_words():
    """(machine, admissible word) pairs: sampled traces over the tower,
    short primitive-machine walks and a few non-standard bases."""
    out = []
    for c in _corpus_computations(1):
        tr = c.trace
        step = max(1, len(tr) // 40)
        out += [(c.machine, W) for W in tr[::step]]
    for kind in ("LR", "RL"):
        M = make_primitive(kind, ("a", "b"), 2)
        e = engine(M)
        W = M.config("start", {1: _on("Y1", [("a", 1), ("b", -1)])})
        for h, tr in walk_reduced(M, W, 4):
            out.append((M, e.word(tr[-1])))
    M = make_multiplier("left")
    out.append((M, parse_admissible("Q0.q X.a X.b^-1 Q0.q^-1", M.hardware)))
    out.append((M, parse_admissible("Q1.q^-1 X.a Q1.q", M.hardware)))
    return out


# ---------------------------------------------------------------------------
# hardware

def check_hardware_roundtrip():
    bad = 0
    n = 0
    for _, W in _corpus_words():
        n += 1
        if parse_admissible(str(W), W.hardware) != W or word_from_json(W.to_json(), W.hardware) != W:
            bad += 1
    return Check("hardware.roundtrip", bad == 0, {"words": n, "failures": bad})


def check_hardware_measures():
    bad = 0
    n = 0
    for _, W in _corpus_words():
        n += 1
        hw = W.hardware
        if W.a_len + W.q_len != len(W.tokens):
            bad += 1
        if W.is_configuration():
            if [hw.index[abs(q)] for q in W.states] != list(range(hw.n_parts)):
                bad += 1
    return Check("hardware.measures", bad == 0, {"words": n, "failures": bad})


def check_hardware_sectors():
    bad = 0
    n = 0
    for _, W in _corpus_words():
        for k in range(len(W.states) - 1):
            n += 1
            try:
                AdmissibleWord(W.hardware, (W.states[k],) + W.sectors[k] + (W.states[k + 1],))
            except AdmissibilityError:
                bad += 1
    return Check("hardware.sectors", bad == 0, {"sectors": n, "failures": bad})


# ---------------------------------------------------------------------------
# rules

def _rule_cases():
    for M, W in _corpus_words():
        for r in M.rules:
            if applicable(W, r):
                yield M, W, r


def check_rules_admissibility():
    bad = 0
    n = 0
    for M, W, r in _rule_cases():
        n += 1
        hw = W.hardware
        try:
            V = apply(W, r)
        except AdmissibilityError:
            bad += 1
            continue
        if [hw.index[abs(x)] for x in V.states] != [hw.index[abs(x)] for x in W.states]:
            bad += 1
    return Check("rules.admissibility", bad == 0, {"applications": n, "failures": bad})


def check_rules_roundtrip():
    bad = 0
    n = 0
    for M, W, r in _rule_cases():
        n += 1
        if apply(apply(W, r), r.inverse()) != W:
            bad += 1
    return Check("rules.roundtrip", bad == 0, {"applications": n, "failures": bad})


def check_rules_length_delta():
    bad = 0
    n = 0
    for M, W, r in _rule_cases():
        n += 1
        s = W.q_len
        d = apply(W, r).a_len - W.a_len
        if abs(d) > 2 * s:
            bad += 1
    return Check("rules.length_delta", bad == 0, {"applications": n, "failures": bad})


def _lr_projection(W):
    out = []
    for x in W.tokens:
        if W.hardware.kind[abs(x)] == "tape":
            name = W.hardware.names[abs(x)].split(".", 1)[1]
            out.append((name, 1 if x > 0 else -1))
    return tuple(free_reduce_pairs(out))


def free_reduce_pairs(w):
    out = []
    for x in w:
        if out and out[-1] == (x[0], -x[1]):
            out.pop()
        else:
            out.append(x)
    return out


def check_rules_projection():
    bad = 0
    n = 0
    for kind in ("LR", "RL"):
        for k in (1, 2):
            M = make_primitive(kind, ("a", "b"), k)
            e = engine(M)
            for u in reduced_words("ab", 2):
                for side in (1, 2):
                    W = M.config("start", {side: _on(f"Y{side}", u)} if u else {})
                    p0 = _lr_projection(W)
                    for h, tr in walk_reduced(M, W, 4):
                        n += 1
                        if _lr_projection(e.word(tr[-1])) != p0:
                            bad += 1
    return Check("rules.projection", bad == 0, {"computations": n, "failures": bad})


# ---------------------------------------------------------------------------
# machines

def _all_machines():
    T = _tower()
    out = [T.m1, T.m2, T.m2bar, T.m3, T.m4, T.m4bar, T.m5, T.m61, T.m62, T.m]
    for kind in ("LR", "RL"):
        for k in (1, 2, 3):
            out.append(make_primitive(kind, ("a", "b"), k))
    for side in ("left", "right", "both"):
        out.append(make_multiplier(side))
    return out


def check_machines_valid():
    bad = []
    for M in _all_machines():
        try:
            M2 = machine_from_json(M.to_json())
            if [r.to_json() for r in M2.positive] != [r.to_json() for r in M.positive]:
                bad.append(M.name)
            for r in M.positive:
                if rule_from_json(r.to_json(), M.hardware) != r:
                    bad.append(f"{M.name}:{r.id}")
                    break
        except (MachineError, ValueError) as ex:
            bad.append(f"{M.name}: {ex}")
    return Check("machines.valid", not bad, {"machines": len(_all_machines()), "failures": bad})


def check_machines_symmetry():
    bad = []
    for M in _all_machines():
        neg = {r.key(): r for r in M.negative}
        for r in M.positive:
            inv = neg.get((r.id, -1))
            if inv is None or inv.inverse() is not r or r.inverse() is not inv:
                bad.append(f"{M.name}:{r.id}")
                break
            if len(M.negative) != len(M.positive):
                bad.append(M.name)
                break
    return Check("machines.symmetry", not bad, {"failures": bad})


def _lr_endpoints(M, u, side=1):
    c = {1: _on("Y1", u)} if u else {}
    return M.config("start", c), M.config("end", c)


def lr_exact(k=1, max_len=5, Y=("a", "b"), slack=2):
    """For every reduced u with ||u|| <= max_len: the reduced computations
    q u p(1) q -> q v p(2k) q with empty right sector and length at most
    2lk+2k-1+slack, a-length capped at l+slack. Returns rows
    (u, number found, lengths, preserves u)."""
    M = make_primitive("LR", Y, k)
    rows = []
    for u in reduced_words(Y, max_len):
        l = len(u)
        W0, T = _lr_endpoints(M, u)
        bound = 2 * l * k + 2 * k - 1
        hits = reduced_paths(M, W0, lambda key: key[0] == T.states and not key[1][1],
                             bound + slack, l + slack)
        ends = [run(W0, h, M).end for h in hits]
        rows.append((u, len(hits), [len(h) for h in hits], all(e == T for e in ends), hits))
    return rows


def _copy_history_ok(u, h):
    """History of LR(Y) from q u p1 q: zeta1 over the mirror image of u, the
    connecting rule, then zeta2 over u read left to right (zeta2(a) removes
    the right-sector copy of a, so it stands for that letter's inverse)."""
    want = [f"z1[{x}]" + ("" if s > 0 else "^-1") for x, s in reversed(u)]
    want.append("z1,2")
    want += [f"z2[{x}]" + ("" if s > 0 else "^-1") for x, s in u]
    return [r.label for r in h] == want


def check_lr_exact(max_len=5):
    rows = lr_exact(1, max_len)
    bad = [r for r in rows if not (r[1] == 1 and r[2] == [2 * len(r[0]) + 1] and r[3]
                                   and _copy_history_ok(r[0], r[4][0]))]
    return Check("machines.lr_exact", not bad,
                 {"words": len(rows), "failures": [str(r[0]) for r in bad[:5]]},
                 f"{len(rows)} inputs, t = 2l+1 in every case" if not bad else "")


def lrk_table(ks=(1, 2, 3), ls=(0, 1, 2, 3), Y=("a", "b")):
    """{(k, l): sorted set of computation lengths found over all u of length
    l} together with the closed form 2lk+2k-1."""
    table = {}
    for k in ks:
        rows = lr_exact(k, max(ls), Y)
        for l in ls:
            lens = set()
            ok = True
            for u, cnt, ln, pres, _ in rows:
                if len(u) != l:
                    continue
                ok &= cnt == 1 and pres
                lens.update(ln)
            table[(k, l)] = (sorted(lens), 2 * l * k + 2 * k - 1, ok)
    return table


def check_lrk():
    table = lrk_table()
    bad = [key for key, (lens, want, ok) in table.items() if lens != [want] or not ok]
    rows = {f"k={k},l={l}": v[0][0] if v[0] else None for (k, l), v in table.items()}
    tab = [[k, l, v[0][0] if len(v[0]) == 1 else v[0], v[1]] for (k, l), v in table.items()]
    return Check("machines.lrk", not bad, {"t": rows, "table": tab, "failures": bad},
                 "t = 2lk+2k-1 for k<=3, l<=3" if not bad else f"mismatch at {bad}")


def check_lr_properties(max_len=3, depth=6):
    """Shape of reduced standard-base computations of LR(Y): once the
    a-length grows it keeps growing, it never exceeds the larger end, it
    never drops below the start, and a nonempty computation from q u p q
    never comes back to the same states with the right sector empty.
    Checked on every computation of length <= depth from q u p(j) q and
    q p(j) u q with ||u|| <= max_len."""
    M = make_primitive("LR", ("a", "b"), 1)
    e = engine(M)
    hw = M.hardware
    fails = {"monotone": 0, "bounded": 0, "no_return": 0, "no_shrink": 0}
    n = 0
    for u in reduced_words("ab", max_len):
        for run_state in ("P.p1", "P.p2"):
            for side in (1, 2):
                states = (hw.ids[hw.parts[0][0]], hw.ids[run_state], hw.ids[hw.parts[2][0]])
                secs = [(), ()]
                secs[side - 1] = tuple(hw.ids[f"Y{side}.{x}"] * s for x, s in u)
                W = AdmissibleWord(hw, [states[0]] + list(secs[0]) + [states[1]]
                                   + list(secs[1]) + [states[2]])
                for h, tr in walk_reduced(M, W, depth):
                    n += 1
                    a = [Engine.a_len(k) for k in tr]
                    t = len(a) - 1
                    for i in range(1, t):
                        if a[i - 1] < a[i] and not a[i] < a[i + 1]:
                            fails["monotone"] += 1
                            break
                    if max(a) > max(a[0], a[-1]):
                        fails["bounded"] += 1
                    if min(a) < a[0]:
                        fails["no_shrink"] += 1
                    end = tr[-1]
                    if t and side == 1 and end[0] == states and not end[1][1]:
                        fails["no_return"] += 1
    return Check("machines.lr_properties", not any(fails.values()),
                 {"computations": n, "failures": fails})


def _mult_word(M, u):
    hw = M.hardware
    return AdmissibleWord(hw, [hw.ids["Q0.q"]] + [hw.ids[f"X.{x}"] * s for x, s in u] + [hw.ids["Q1.q"]])


def _sector(key):
    return key[1][0]


def check_multiply_one(max_len=4):
    """One-sided multiplier: history is the copy of the reduced form of
    u_t u_0^-1 read right to left (left side) or u_0^-1 u_t (right side),
    and (b)-(d) hold."""
    fails = {"a": 0, "b": 0, "c": 0, "d": 0}
    n = 0
    for side in ("left", "right"):
        M = make_multiplier(side, ("a", "b"))
        hw = M.hardware
        to = {hw.ids[f"X.{x}"]: x for x in "ab"}
        for u in reduced_words("ab", max_len):
            W = _mult_word(M, u)
            for h, tr in walk_reduced(M, W, 2 * max_len):
                secs = [_sector(k) for k in tr]
                if len(secs[-1]) > max_len:
                    continue
                n += 1
                u0, ut = secs[0], secs[-1]
                inv = tuple(-x for x in reversed(u0))
                if side == "left":
                    want = list(reversed(free_reduce(list(ut) + list(inv))))
                else:
                    want = free_reduce(list(inv) + list(ut))
                got = [f"t[{to[abs(x)]}]" + ("" if x > 0 else "^-1") for x in want]
                if [r.label for r in h] != got:
                    fails["a"] += 1
                if len(h) > len(u0) + len(ut):
                    fails["b"] += 1
                L = [len(s) for s in secs]
                for j in range(1, len(L) - 1):
                    if L[j - 1] < L[j] and not L[j] < L[j + 1]:
                        fails["c"] += 1
                        break
                if max(L) > max(L[0], L[-1]):
                    fails["d"] += 1
    return Check("machines.multiply_one", not any(fails.values()), {"computations": n, "failures": fails})


def check_multiply_two(max_len=4):
    M = make_multiplier("both", ("a", "b"), ("c", "d"))
    fails = {"a": 0, "b": 0, "c": 0}
    n = 0
    for u in reduced_words("abcd", max_len):
        W = _mult_word(M, u)
        for h, tr in walk_reduced(M, W, max_len + 1):
            L = [len(_sector(k)) for k in tr]
            if L[-1] > max_len:
                continue
            n += 1
            for j in range(0, len(L) - 1):
                if j > 0 and L[j - 1] < L[j] and not L[j] < L[j + 1]:
                    fails["a"] += 1
                    break
            if max(L) > max(L[0], L[-1]):
                fails["b"] += 1
            if 2 * len(h) > L[0] + L[-1]:
                fails["c"] += 1
    return Check("machines.multiply_two", not any(fails.values()), {"computations": n, "failures": fails})


def three_part_factorizations(h):
    """All (H1, H2, k, H3) with h = H1 H2^k H3, k >= 0 (H2 empty when k = 0)."""
    h = tuple(h)
    n = len(h)
    out = []
    for i in range(n + 1):
        for j in range(i, n + 1):
            out.append((h[:i], (), 0, h[i:]) if i == j else None)
            if i == j:
                continue
            mid = h[i:j]
            m = len(mid)
            rest = h[i:]
            k = 0
            while len(rest) >= m and rest[:m] == mid:
                rest = rest[m:]
                k += 1
                out.append((h[:i], mid, k, rest))
    return [f for f in out if f is not None]


def _unreduced_words(max_len):
    M = make_multiplier("left", ("a", "b"))
    hw = M.hardware
    q = hw.ids["Q0.q"]
    for u in reduced_words("ab", max_len):
        if not u:
            continue
        yield M, AdmissibleWord(hw, [q] + [hw.ids[f"X.{x}"] * s for x, s in u] + [-q])


def check_unreduced_base(max_len=4, depth=6):
    n = 0
    bad = 0
    for M, W in _unreduced_words(max_len):
        for h, tr in walk_reduced(M, W, depth):
            L = [V.a_len for V in tr]
            if L[-1] > max_len:
                continue
            n += 1
            labels = [r.label for r in h]
            if not any(len(h2) <= min(L[0], L[-1]) and 2 * len(h1) <= L[0] and 2 * len(h3) <= L[-1]
                       for h1, h2, k, h3 in three_part_factorizations(labels)):
                bad += 1
    return Check("machines.unreduced_base", bad == 0, {"computations": n, "failures": bad})


def check_three_part(max_len=4, depth=6):
    """a-length bound for two-letter-base computations with history H1 H2^k H3,
    for every factorization of the history."""
    n = 0
    bad = 0
    cases = []
    for M, W in _unreduced_words(max_len):
        cases.append((M, W))
    for side in ("left", "both"):
        M = make_multiplier(side, ("a", "b"), ("c", "d") if side == "both" else None)
        for u in reduced_words("ab", 2):
            cases.append((M, _mult_word(M, u)))
    for M, W in cases:
        for h, tr in walk_reduced(M, W, depth):
            L = [Engine.a_len(V) if isinstance(V, tuple) else V.a_len for V in tr]
            n += 1
            labels = [r.label for r in h]
            within = min(2 * len(h1) + 3 * len(h2) + 2 * len(h3)
                         for h1, h2, k, h3 in three_part_factorizations(labels))
            if max(L) > L[0] + L[-1] + within:
                bad += 1
    return Check("machines.three_part", bad == 0, {"computations": n, "failures": bad})


# ---------------------------------------------------------------------------
# computation

def check_trace():
    bad = 0
    n = 0
    for c in _corpus_computations():
        n += 1
        again = run(c.start, c.labels(), c.machine)
        if again.trace != c.trace or Computation(c.machine, c.start, c.history, c.trace).trace != c.trace:
            bad += 1
    return Check("computation.trace", bad == 0, {"computations": n, "failures": bad})


def check_one_machine():
    T = _tower()
    M = T.m
    n = 0
    bad = 0
    for u in ("a1", "a2"):
        for special in (False, True):
            W = accept_input(M, u, special)
            c = Computation(M, W, accept_history(M, u, special))
            for lo in range(0, c.t, max(1, c.t // 12)):
                sub = c.history[lo:lo + 20]
                j = one_machine_index(sub)
                n += 1
                if j is None:
                    continue
                for letter in step_history(sub).letters:
                    if not (letter.endswith(f"_{j}") or letter.endswith(f"_{j}^-1")):
                        bad += 1
    return Check("computation.one_machine", bad == 0, {"windows": n, "failures": bad})


def _phase_machine(M5, ph):
    rules = [r for r in M5.positive if r.tags.get("m5") == ph]
    return Machine(f"{M5.name}[{ph}]", M5.hardware, rules)


def forbidden_search(pattern, seed_len=3, slack=4, depth=None):
    """Search reduced computations of M5 in the standard base with step
    history pattern in {"(21)(1)(12)", "(12)(2)(21)", "(32)(2)(23)"}.

    The middle subcomputation runs in one phase from a configuration where
    the bracketing transition rule is applicable back to one; seeds fill the
    sectors left unlocked by the transition with words of total length
    <= seed_len. Returns (found histories, seeds, depth)."""
    T = _tower()
    M5 = T.m5
    hw = M5.hardware
    # pattern -> (seed rule, seed side, phase, target rule, target side):
    # the middle run starts where the first transition left the word and
    # must end where the last transition applies
    table = {"(21)(1)(12)": ("theta(12)", "src", 1, "theta(12)", "src"),
             "(12)(2)(21)": ("theta(12)", "dst", 2, "theta(12)", "dst"),
             "(32)(2)(23)": ("theta(23)", "src", 2, "theta(23)", "src"),
             "(12)(2)(23)": ("theta(12)", "dst", 2, "theta(23)", "src")}
    rid, which, ph, tid, twhich = table[pattern]
    r = M5.rule(rid)
    states = r.src if which == "src" else r.dst
    tr_ = M5.rule(tid)
    tstates = tr_.src if twhich == "src" else tr_.dst
    free = [j for j in range(1, hw.n_sectors + 1) if not r.is_locked(j) and hw.alphabet(j)]
    letters = {j: sorted(r.dom_ids[j - 1] if r.dom_ids[j - 1] is not None
                         else (hw.ids[x] for x in hw.alphabet(j))) for j in free}
    sub = _phase_machine(M5, ph)
    if depth is None:
        k = M5.meta["k"]
        depth = 2 * (2 * seed_len * k + 2 * k - 1) + 2
    found = []
    seeds = 0
    per = {j: [w for w in reduced_words(letters[j], seed_len)] for j in free}

    def ok_target(key):
        if key[0] != tstates:
            return False
        for j, d in tr_.checks:
            for x in key[1][j - 1]:
                if abs(x) not in d:
                    return False
        return True

    for combo in itertools.product(*(per[j] for j in free)):
        if sum(len(w) for w in combo) > seed_len:
            continue
        secs = [()] * hw.n_sectors
        for j, w in zip(free, combo):
            secs[j - 1] = tuple(x * s for x, s in w)
        toks = [states[0]]
        for i in range(1, len(states)):
            toks += list(secs[i - 1]) + [states[i]]
        W = AdmissibleWord(hw, toks)
        seeds += 1
        hits = reduced_paths(sub, W, ok_target, depth, W.a_len + slack, limit=10)
        for h in hits:
            if h:
                found.append((str(W), [x.label for x in h]))
    return found, seeds, depth


def check_forbidden(seed_len=3):
    found = {}
    meas = {}
    for pat in ("(21)(1)(12)", "(12)(2)(21)", "(32)(2)(23)"):
        f, seeds, depth = forbidden_search(pat, seed_len)
        found[pat] = f
        meas[pat] = {"seeds": seeds, "depth": depth, "found": len(f)}
    # the same search must find the allowed pattern of accepting runs
    ctl, seeds, depth = forbidden_search("(12)(2)(23)", seed_len)
    meas["control (12)(2)(23)"] = {"seeds": seeds, "depth": depth, "found": len(ctl)}
    return Check("computation.forbidden", not any(found.values()) and ctl, meas,
                 "bounded search: seeds of a-length <= %d" % seed_len)


def check_special_turn(max_len=3):
    """The turn (s)_1^-1 (s)_2 restricted to the special input sector: every such two-step computation has empty sector throughout."""
    T = _tower()
    M = T.m
    hw = M.hardware
    j = M.special_input_sector
    left, right = hw.parts[j - 1], hw.parts[j % hw.n_parts]
    alph = [x.split(".", 1)[1] for x in hw.alphabet(j)]
    sname = hw.sector_name(j)
    n = 0
    bad = 0
    for sgn in (1, -1):
        r1 = M.rule("th(s)1", -sgn)
        r2 = M.rule("th(s)2", sgn)
        if sgn < 0:
            r1, r2 = M.rule("th(s)2", -1), M.rule("th(s)1", 1)
        for base_inv in (False, True):
            for u in reduced_words(alph, max_len):
                body = [hw.ids[f"{sname}.{x}"] * s for x, s in u]
                for ql in left:
                    for qr in right:
                        a, b = hw.ids[ql], hw.ids[qr]
                        toks = [a] + body + [b]
                        if base_inv:
                            toks = [-x for x in reversed(toks)]
                        try:
                            W0 = AdmissibleWord(hw, toks)
                        except AdmissibilityError:
                            continue
                        if not applicable(W0, r1):
                            continue
                        W1 = apply(W0, r1)
                        if not applicable(W1, r2):
                            continue
                        W2 = apply(W1, r2)
                        n += 1
                        if W0.a_len or W1.a_len or W2.a_len:
                            bad += 1
    return Check("computation.special_turn", n > 0 and bad == 0, {"computations": n, "failures": bad})


def tower_language(words=("a1", "a2", "a1 a2"), neg_len=3, max_states=3000):
    """Constructed accepting computations of I(u^n), J(u^n) on M, plus
    bounded searches for the non-power inputs of length <= neg_len: on M
    (depth >= 3x the constructed accepting length, binding a-length cap) and
    on the base machine M1 (exhaustive at depth enough to accept powers)."""
    T = _tower()
    M = T.m
    n = T.params.n
    pos = {}
    for u in words:
        for special in (False, True):
            W = accept_input(M, u, special)
            c = run(W, accept_history(M, u, special), M)
            pos[(u, special)] = (c.t, c.end == M.accept_config())
    longest = max(t for t, _ in pos.values())
    neg = {}
    M1 = T.m1
    powers = {tuple(power(list(u), n)) for u in reduced_words(LETTERS, neg_len)}
    for w in reduced_words(LETTERS, neg_len):
        if w in powers:
            continue
        txt = "".join(x if s > 0 else x + "^-1" for x, s in w)
        W1 = _m1_start(M1, w)
        res, _, _ = bfs(M1, W1, None, 30, 200000, 2 * len(w) + 2)
        WM = standard_config(M, "I", list(w))
        WJ = standard_config(M, "J", list(w))
        depth = 3 * longest
        r2, _, _ = bfs(M, WM, None, max_depth=depth, max_states=max_states, max_alen=WM.a_len + 4)
        r3, _, _ = bfs(M, WJ, None, max_depth=depth, max_states=max_states, max_alen=WJ.a_len + 4)
        neg[txt] = (res.status, r2.status, r3.status)
    return pos, neg, longest


def _m1_start(M1, w):
    from .machines import base_input_config
    return base_input_config(M1, list(w))


def check_language():
    pos, neg, longest = tower_language()
    ok_pos = all(e for _, e in pos.values())
    ok_neg = all(s != "accepted" for row in neg.values() for s in row)
    meas = {"accepted": {f"{'J' if s else 'I'}(({u})^3)": t for (u, s), t in pos.items()},
            "negatives": {k: list(v) for k, v in neg.items()}, "bfs_depth": 3 * longest}
    return Check("computation.language", ok_pos and ok_neg, meas)


# ---------------------------------------------------------------------------
# presentation

def check_relators():
    from .diagram import presentation_for, trapezium_from_computation, validate_diagram
    from .presentation import THETA_A, THETA_Q, emit_presentation
    bad = 0
    n = 0
    for M in (make_primitive("LR", ("a", "b"), 2), _tower().m5):
        P = emit_presentation(M, "M")
        hw = M.hardware
        for rel in P.relators:
            n += 1
            if rel.kind == THETA_Q:
                rid, i = rel.info
                p = M.rule(rid).parts[i]
                # theta_i^-1 q theta_{i+1} == a q' b, letters read by name
                w = [P.token(x) for x in rel.word]
                a = [] if p.a is None else [p.a[0] + ("" if p.a[1] > 0 else "^-1")]
                b = [] if p.b is None else [p.b[0] + ("" if p.b[1] > 0 else "^-1")]
                lhs = w[:3]
                if lhs[1] != p.src or not lhs[0].endswith("^-1") or lhs[2].endswith("^-1"):
                    bad += 1
                    continue
                rhs = [_inv_tok(x) for x in reversed(w[3:])]
                if rhs != a + [p.dst] + b:
                    bad += 1
            elif rel.kind == THETA_A:
                w = rel.word
                if not (len(w) == 4 and w[0] == -w[2] and w[1] == -w[3]):
                    bad += 1
    c = Computation(_tower().m5, accept_input(_tower().m5, "a1"), accept_history(_tower().m5, "a1"))
    d = trapezium_from_computation(c)
    v = validate_diagram(d)
    if not v["ok"]:
        bad += 1
    return Check("presentation.relators", bad == 0, {"relators": n, "failures": bad})


def _inv_tok(t):
    return t[:-3] if t.endswith("^-1") else t + "^-1"


def check_oracle_axioms():
    from .presentation import burnside_oracle
    rep = {}
    ok = True
    for n in (2, 3):
        a = burnside_oracle(n).check_axioms()
        rep[n] = a
        ok &= a["ok"]
    return Check("presentation.oracle_axioms", ok, rep)


ORDERS = {1: 1, 2: 4, 3: 27}


def check_oracle_order():
    from .presentation import burnside_oracle
    got = {n: burnside_oracle(n).order for n in (1, 2, 3)}
    return Check("presentation.oracle_order", got == ORDERS, {"orders": got})


# ---------------------------------------------------------------------------
# diagram

def roundtrip_corpus(count=120):
    """Reduced computations across stages for trapezium round trips:
    every reduced computation of length <= 4 from small configurations of
    the primitive machines and M3, windows of the constructed accepting
    computations of M5 and M."""
    T = _tower()
    out = []
    for kind, k in (("LR", 1), ("RL", 2)):
        M = make_primitive(kind, ("a", "b"), k)
        for u in reduced_words("ab", 2):
            W = M.config("start", {1: _on("Y1", u)} if u else {})
            for h, tr in walk_reduced(M, W, 4):
                if h:
                    out.append(Computation(M, W, list(h)))
    for M in (T.m3, T.m5, T.m):
        W = accept_input(M, "a1")
        c = Computation(M, W, accept_history(M, "a1"))
        tr = c.trace
        step = max(1, c.t // 12)
        for lo in range(0, c.t - 1, step):
            out.append(Computation(M, tr[lo], c.history[lo:lo + 10]))
    # spread the selection across machines deterministically
    if len(out) > count:
        prim = [c for c in out if c.machine.meta.get("kind") in ("LR", "RL")]
        rest = [c for c in out if c not in prim]
        keep = count - len(rest)
        step = max(1, len(prim) // max(1, keep))
        out = prim[::step][:keep] + rest
    return out


def check_roundtrip(count=120):
    from .diagram import computation_from_trapezium, trapezium_from_computation
    bad = []
    corpus = roundtrip_corpus(count)
    stages = {}
    for c in corpus:
        d = trapezium_from_computation(c)
        back = computation_from_trapezium(d)
        stages[c.machine.name] = stages.get(c.machine.name, 0) + 1
        if back.start != c.start or back.labels() != c.labels() or back.trace != c.trace:
            bad.append(c.labels()[:3])
    return Check("diagram.roundtrip", not bad and len(corpus) >= 100,
                 {"computations": len(corpus), "stages": stages, "failures": len(bad)})


def check_boundary():
    from .diagram import trapezium_factorization, trapezium_from_computation
    bad = 0
    n = 0
    for c in roundtrip_corpus():
        d = trapezium_from_computation(c)
        bot, right, top, left = trapezium_factorization(d)
        n += 1
        W0, Wt = c.start, c.end
        if d.word(bot) != W0.tokens or d.word(top) != Wt.tokens:
            bad += 1
            continue
        P = d.P
        hist = [(r.id, r.sign) for r in c.history]
        for side in (left, right):
            got = []
            for x in side:
                rid, _ = P.theta_of(abs(d.lab(x)))
                got.append((rid, 1 if d.lab(x) > 0 else -1))
            if got != hist:
                bad += 1
        if c.machine.hardware.cyclic and d.word(left) != d.word(right):
            bad += 1
    return Check("diagram.boundary", bad == 0, {"trapezia": n, "failures": bad})


def annulus_corpus():
    """(name, diagram) pairs produced by the constructors."""
    from .diagram import (acell_band_fixture, disk_diagram, power_relator_diagram,
                          trapezium_from_computation)
    out = []
    for i, c in enumerate(roundtrip_corpus()):
        if i % 4 == 0:
            out.append((f"trapezium[{c.machine.name}:{i}]", trapezium_from_computation(c)))
    T = _tower()
    M = T.m
    for u in ("a1",):
        W = accept_input(M, u)
        out.append((f"disk[I({u}^3)]", disk_diagram(W, Computation(M, W, accept_history(M, u)))))
    out.append(("power[a1]", power_relator_diagram("a1")))
    out.append(("acell_band", acell_band_fixture(M)[0]))
    return out


def check_annuli():
    from .diagram import check_no_annuli, hub_rings, theta_annulus_fixture
    bad = []
    meas = {}
    for name, d in annulus_corpus():
        rep = check_no_annuli(d)
        counts = {k: len(v) for k, v in rep.items() if k != "ok"}
        if rep["theta"]:
            around, other = hub_rings(d)
            counts["theta_around_hub"] = len(around)
            counts["theta"] = len(other)
        meas[name] = counts
        if any(counts[k] for k in ("q", "theta", "a", "(theta,q)", "(theta,a)")):
            bad.append(name)
    fx = theta_annulus_fixture(_tower().m5)
    detected = len(check_no_annuli(fx)["theta"])
    meas["fixture"] = {"theta": detected}
    return Check("diagram.annuli", not bad and detected == 1, meas,
                 "" if not bad else f"annuli in {bad}")


def check_soundness():
    from .diagram import validate_diagram
    bad = []
    n = 0
    for name, d in annulus_corpus():
        n += len(d.cells)
        v = validate_diagram(d)
        if not v["ok"]:
            bad.append((name, v["issues"][:2]))
    return Check("diagram.soundness", not bad, {"cells": n, "failures": bad})


def brute_length(word, delta, kind):
    """Minimal decomposition length by trying every factorization into
    letters and syllables (one theta letter plus at most two a-letters)."""
    n = len(word)
    best = [None] * (n + 1)

    def cost(seg):
        if len(seg) == 1:
            k = kind(seg[0])
            return delta if k == "a" else 1
        ks = [kind(x) for x in seg]
        if ks.count("theta") == 1 and ks.count("q") == 0 and ks.count("a") <= 2:
            return 1
        return None

    def go(i):
        if i == n:
            return 0
        if best[i] is not None:
            return best[i]
        m = None
        for j in range(i + 1, min(n, i + 3) + 1):
            c = cost(word[i:j])
            if c is None:
                continue
            v = c + go(j)
            m = v if m is None or v < m else m
        best[i] = m
        return m

    # independent of the DP above: enumerate all compositions explicitly
    def all_splits(i):
        if i == n:
            yield 0
            return
        for j in range(i + 1, n + 1):
            c = cost(word[i:j])
            if c is None:
                continue
            for rest in all_splits(j):
                yield c + rest

    return min(all_splits(0))


def _mixed_words(max_len):
    for L in range(0, max_len + 1):
        yield from itertools.product(("t", "a", "q"), repeat=L)


def _toy_kind(x):
    return {"t": "theta", "a": "a", "q": "q"}[x]


def check_path_length(max_len=8):
    from .diagram import path_length
    delta = Fraction(1, 100)
    bad = 0
    n = 0
    for w in _mixed_words(max_len):
        n += 1
        if path_length(list(w), delta) != brute_length(w, delta, _toy_kind):
            bad += 1
    return Check("diagram.path_length", bad == 0, {"words": n, "failures": bad})


def check_length_bounds(max_len=8):
    from .diagram import path_length
    bad = {"a": 0, "c": 0}
    n = 0
    for delta in (Fraction(1, 100), Fraction(1, 7)):
        for w in _mixed_words(max_len):
            n += 1
            L = path_length(list(w), delta)
            if "q" not in w:
                c, d = w.count("t"), w.count("a")
                if L < max(c, c + (d - 2 * c) * delta):
                    bad["a"] += 1
            for i in range(len(w) + 1):
                l1 = path_length(list(w[:i]), delta)
                l2 = path_length(list(w[i:]), delta)
                if not (l1 + l2 >= L >= l1 + l2 - 2 * delta):
                    bad["c"] += 1
    return Check("diagram.length_bounds", not any(bad.values()), {"words": n, "failures": bad})


def check_signature():
    from .diagram import acell_band_fixture, signature, transpose_band_acell
    M = _tower().m
    sigs = []
    bad = 0
    for cov in (0, 1, 2, 3):
        d, seed, pi = acell_band_fixture(M, covered=cov)
        new, before, after = transpose_band_acell(d, seed, pi)
        if new.boundary_label() != d.boundary_label():
            bad += 1
        sigs += [before, after]
        if cov >= 2 and not after < before:
            bad += 1
    # total preorder: comparable, transitive, and refining weight when the
    # first four entries agree
    for a, b in itertools.product(sigs, repeat=2):
        if not (a <= b or b <= a):
            bad += 1
        if _head(a) == _head(b) and (a < b) != (a.weight < b.weight):
            bad += 1
    for a, b, c in itertools.product(sigs, repeat=3):
        if a <= b <= c and not a <= c:
            bad += 1
    return Check("diagram.signature", bad == 0, {"signatures": [s.to_json() for s in sigs[:4]],
                                                 "failures": bad})


def _head(s):
    return (s.disks, s.theta_t, s.theta_q, s.a_cells)


def quadratic_fit(ms=(1, 2, 3, 4)):
    """Areas of disk diagrams of I(a1^(3m)) and of power relator diagrams of
    u^3 for ||u|| = m, with least-squares log-log slopes against m."""
    import math
    from .diagram import area, disk_diagram, power_relator_diagram
    M = _tower().m
    words = {1: "a1", 2: "a1 a2", 3: "a1 a2 a1", 4: "a1 a2 a1 a2"}
    disk, pw = {}, {}
    for m in ms:
        um = " ".join(["a1"] * m)
        W = accept_input(M, um)
        disk[m] = area(disk_diagram(W, Computation(M, W, accept_history(M, um))))
        pw[m] = area(power_relator_diagram(words[m]))

    def slope(pts):
        xs = [math.log(x) for x in pts]
        ys = [math.log(pts[x]) for x in pts]
        mx, my = sum(xs) / len(xs), sum(ys) / len(ys)
        return sum((x - mx) * (y - my) for x, y in zip(xs, ys)) / sum((x - mx) ** 2 for x in xs)

    return disk, pw, slope(disk), slope(pw)


def check_quadratic():
    disk, pw, s1, s2 = quadratic_fit()
    return Check("diagram.quadratic", s1 <= 2.3 and s2 <= 2.3,
                 {"disk_area": disk, "power_area": pw, "disk_slope": round(s1, 4),
                  "power_slope": round(s2, 4)},
                 f"slopes {s1:.3f}, {s2:.3f}")


# ---------------------------------------------------------------------------
# registry

SUITES = {
    "hardware": [check_hardware_roundtrip, check_hardware_measures, check_hardware_sectors],
    "rules": [check_rules_admissibility, check_rules_roundtrip, check_rules_length_delta,
              check_rules_projection],
    "machines": [check_machines_valid, check_machines_symmetry, check_lr_properties, check_lr_exact,
                 check_lrk, check_multiply_one, check_multiply_two, check_unreduced_base,
                 check_three_part],
    "computation": [check_trace, check_one_machine, check_forbidden, check_special_turn,
                    check_language],
    "presentation": [check_relators, check_oracle_axioms, check_oracle_order],
    "diagram": [check_roundtrip, check_boundary, check_annuli, check_soundness,
                check_path_length, check_length_bounds, check_signature, check_quadratic],
}
SUITES["primitive"] = [check_lr_properties, check_lr_exact, check_lrk]
SUITES["multipliers"] = [check_multiply_one, check_multiply_two, check_unreduced_base,
                         check_three_part]

MODULES = ("hardware", "rules", "machines", "computation", "presentation", "diagram")


def _dotted(mod, f):
    short = f.__name__[len("check_"):]
    if short.startswith(mod + "_"):
        short = short[len(mod) + 1:]
    return f"{mod}.{short}"


CHECKS = {_dotted(m, f): f for m in MODULES for f in SUITES[m]}


def check_names():
    return list(CHECKS)


def resolve(name):
    """Check functions for a suite name, 'all', or a check name (dotted, or
    its unambiguous last component)."""
    if name == "all":
        return list(CHECKS.values())
    if name in SUITES:
        return list(SUITES[name])
    if name in CHECKS:
        return [CHECKS[name]]
    hits = [f for k, f in CHECKS.items() if k.split(".", 1)[1] == name]
    if len(hits) == 1:
        return hits
    raise KeyError(name)


def run_suite_one(f):
    t = time.perf_counter()
    c = f()
    c.seconds = time.perf_counter() - t
    return c


def run_suite(name):
    return [run_suite_one(f) for f in resolve(name)]
