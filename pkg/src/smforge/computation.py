"""Computations: running histories, step histories, controlled histories and
bounded breadth-first acceptance search."""

import random
from collections import deque

from .hardware import AdmissibleWord, concat_reduce
from .rules import NotApplicable, SRule, applicable, apply, why_not_applicable


class RunError(ValueError):
    def __init__(self, step, reason):
        super().__init__(f"step {step}: {reason}")
        self.step = step
        self.reason = reason


class StepHistoryError(ValueError):
    pass


# ---------------------------------------------------------------------------
# fast path on configurations: (states, sectors) tuples

class Engine:
    """Precompiled rule actions on configurations of one machine."""

    def __init__(self, machine, seed=None):
        self.machine = machine
        hw = machine.hardware
        self.hw = hw
        self.N = hw.N
        self.by_src = {}
        for r in machine.rules:
            touched = tuple((j, r.left_mult[j], r.right_mult[j]) for j in range(self.N)
                            if r.left_mult[j] or r.right_mult[j])
            self.by_src.setdefault(r.src, []).append((r, touched))
        if seed is not None:
            # a fixed permutation of the rules tried at each state
            rng = random.Random(seed)
            for src in sorted(self.by_src):
                rng.shuffle(self.by_src[src])

    @staticmethod
    def key(W):
        return (W.states, W.sectors)

    def word(self, key):
        states, sectors = key
        toks = [states[0]]
        for i in range(1, len(states)):
            toks.extend(sectors[i - 1])
            toks.append(states[i])
        return AdmissibleWord(self.hw, toks)

    def step(self, key, rule, touched=None):
        states, sectors = key
        if states != rule.src:
            return None
        for j, d in rule.checks:
            if j > self.N:
                continue
            for x in sectors[j - 1]:
                if (x if x > 0 else -x) not in d:
                    return None
        if touched is None:
            touched = tuple((j, rule.left_mult[j], rule.right_mult[j]) for j in range(self.N)
                            if rule.left_mult[j] or rule.right_mult[j])
        if touched:
            secs = list(sectors)
            for j, left, right in touched:
                secs[j] = concat_reduce(left, secs[j], right)
            sectors = tuple(secs)
        return (rule.dst, sectors)

    def successors(self, key):
        for r, touched in self.by_src.get(key[0], ()):
            nxt = self.step(key, r, touched)
            if nxt is not None:
                yield r, nxt

    @staticmethod
    def a_len(key):
        return sum(len(u) for u in key[1])


_ENGINES = {}


def engine(machine, seed=None):
    """Cached engine; ``seed`` fixes a permutation of the rule order, which
    only changes tie-breaking among equally short searches."""
    e = _ENGINES.get((id(machine), seed))
    if e is None or e.machine is not machine:
        e = Engine(machine, seed)
        _ENGINES[(id(machine), seed)] = e
    return e


# ---------------------------------------------------------------------------

class Computation:
    """W_0 -> ... -> W_t with its history; the trace is computed on demand."""

    def __init__(self, machine, start, history, trace=None):
        self.machine = machine
        self.start = start
        self.history = list(history)
        self._trace = list(trace) if trace is not None else None

    @property
    def t(self):
        return len(self.history)

    @property
    def trace(self):
        if self._trace is None:
            self._trace = _trace(self.machine, self.start, self.history)
        return self._trace

    @property
    def end(self):
        return self.trace[-1]

    def labels(self):
        return [r.label for r in self.history]

    def is_reduced(self):
        return all(not (a.id == b.id and a.sign == -b.sign) for a, b in zip(self.history, self.history[1:]))

    def to_json(self, with_trace=False):
        d = {"machine": self.machine.name if self.machine else None,
             "start": self.start.to_json()["tokens"],
             "history": self.labels()}
        if with_trace:
            d["trace"] = [W.to_json()["tokens"] for W in self.trace]
        return d

    def __repr__(self):
        return f"Computation(t={self.t})"


def _trace(machine, W0, history):
    out = [W0]
    W = W0
    if W0.is_configuration():
        e = engine(machine) if machine is not None else None
        key = Engine.key(W0)
        for i, r in enumerate(history, start=1):
            nxt = e.step(key, r) if e is not None else None
            if nxt is None:
                raise RunError(i, f"{r.label} not applicable: {why_not_applicable(W, r)}")
            key = nxt
            W = e.word(key)
            out.append(W)
        return out
    for i, r in enumerate(history, start=1):
        try:
            W = apply(W, r)
        except NotApplicable as ex:
            raise RunError(i, f"{r.label} not applicable: {ex}")
        out.append(W)
    return out


def reduce_history(history):
    out = []
    for r in history:
        if out and out[-1].id == r.id and out[-1].sign == -r.sign:
            out.pop()
        else:
            out.append(r)
    return out


def run(W0, history, machine=None, reduce=False):
    """Apply the history to W0 and return the Computation with its full
    trace. Unreduced histories are rejected unless ``reduce`` is set, in
    which case the history is freely reduced first (same endpoints)."""
    rules = machine.history(history) if machine is not None else list(history)
    for i in range(len(rules) - 1):
        a, b = rules[i], rules[i + 1]
        if a.id == b.id and a.sign == -b.sign:
            if not reduce:
                raise RunError(i + 2, f"history is not reduced: {a.label} followed by {b.label}")
    if reduce:
        rules = reduce_history(rules)
    c = Computation(machine, W0, rules)
    if machine is None:
        W = W0
        tr = [W]
        for i, r in enumerate(rules, start=1):
            if not applicable(W, r):
                raise RunError(i, f"{r.label} not applicable: {why_not_applicable(W, r)}")
            W = apply(W, r)
            tr.append(W)
        c._trace = tr
    else:
        c.trace
    return c


# ---------------------------------------------------------------------------
# step histories

class StepHistory:
    def __init__(self, letters):
        self.letters = tuple(letters)

    def __str__(self):
        return "".join(self.letters)

    def __repr__(self):
        return f"StepHistory({self})"

    def __eq__(self, other):
        if isinstance(other, str):
            return str(self) == other
        return isinstance(other, StepHistory) and self.letters == other.letters

    def __hash__(self):
        return hash(self.letters)

    def __len__(self):
        return len(self.letters)

    def contains(self, pattern):
        """True if the letter sequence ``pattern`` (string or list) occurs as
        a contiguous factor."""
        pat = split_step_letters(pattern) if isinstance(pattern, str) else list(pattern)
        L = self.letters
        return any(list(L[i:i + len(pat)]) == pat for i in range(len(L) - len(pat) + 1))


def split_step_letters(s):
    out, cur, depth = [], "", 0
    i = 0
    while i < len(s):
        ch = s[i]
        cur += ch
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth == 0:
                # subscripts and inverse marks belong to the letter
                j = i + 1
                while j < len(s) and s[j] != "(":
                    cur += s[j]
                    j += 1
                out.append(cur)
                cur = ""
                i = j
                continue
        i += 1
    return out


def _phase_letter(v, sign, comma):
    if isinstance(v, int):
        return f"({v})", False
    a, b = v
    if sign < 0:
        a, b = b, a
    return (f"({a},{b})" if comma else f"({a}{b})"), True


def step_letter(rule):
    """(letter, is_transition) for one rule, read from its provenance tags."""
    t = rule.tags
    if "m" in t:
        c = t["m"]
        if t.get("step") in ("(s)", "(a)"):
            return t["step"] + f"_{c}" + ("^-1" if rule.sign < 0 else ""), True
        if "m5" not in t:
            raise StepHistoryError(f"rule {rule.label} carries no phase tag")
        letter, tr = _phase_letter(t["m5"], rule.sign, False)
        return f"{letter}_{c}", tr
    if "m5" in t:
        return _phase_letter(t["m5"], rule.sign, False)
    if "m3" in t:
        return _phase_letter(t["m3"], rule.sign, True)
    if "step" in t:
        s = t["step"]
        if t.get("transition"):
            if rule.sign < 0 and ">" in s:
                a, b = s.split(">")
                s = f"{b}>{a}"
            return f"({s})", True
        return f"({s})", False
    raise StepHistoryError(f"rule {rule.label} carries no phase tag")


def _is_accept_rule(r):
    return bool(r.tags.get("accept"))


def step_history(c):
    """Factor a history into transition letters and maximal single-phase
    runs. The accept rule theta0 counts as a rule of phase 5 and may only be
    the first or last letter (next to an accept/start transition of M)."""
    hist = c.history if isinstance(c, Computation) else list(c)
    letters = []
    last_run = None
    for idx, r in enumerate(hist):
        if _is_accept_rule(r):
            nb = [hist[j] for j in (idx - 1, idx + 1) if 0 <= j < len(hist)]
            edge = idx in (0, len(hist) - 1) or any(x.tags.get("step") == "(a)" for x in nb)
            if not edge:
                raise StepHistoryError("theta0 may only be the first or last letter of a history")
        letter, tr = step_letter(r)
        if tr:
            letters.append(letter)
            last_run = None
        else:
            if last_run != letter:
                letters.append(letter)
            last_run = letter
    return StepHistory(letters)


def one_machine_index(c):
    """The common Theta-index of a computation of M, or None if it mixes."""
    hist = c.history if isinstance(c, Computation) else list(c)
    idx = {r.tags.get("m") for r in hist}
    return idx.pop() if len(idx) == 1 else None


# ---------------------------------------------------------------------------
# controlled histories

def is_controlled(history, machine=None):
    """True for the two bracketed shapes

    (a) chi(4i+2,4i+3) H' chi(4i+3,4i+4), H' in phase 4i+3 (an LR phase of M3),
    (b) z(2i,2i+1) H' z(2i+1,2i+2), H' running pass 2i+1 of LR_k in M5(2),

    as histories of M3/M4/M4bar, of M5 and M6 (inside M5(4) or M5(2)) and of M
    (all rules from one Theta_j)."""
    hist = history.history if isinstance(history, Computation) else list(history)
    if len(hist) < 2:
        return False
    if any(r.tags.get("m") != hist[0].tags.get("m") for r in hist):
        return False
    first, last, mid = hist[0], hist[-1], hist[1:-1]
    if first.sign < 0 or last.sign < 0:
        return False
    in_m5 = "m5" in first.tags
    # form (a)
    f3, l3 = first.tags.get("m3"), last.tags.get("m3")
    if isinstance(f3, list) and isinstance(l3, list) and first.tags.get("transition") \
            and last.tags.get("transition"):
        if in_m5 and not all(r.tags.get("m5") == 4 for r in hist):
            return False
        a, b = f3
        if (a - 2) % 4 == 0 and a >= 2 and b == a + 1 and l3 == [a + 1, a + 2]:
            return all(r.tags.get("m3") == a + 1 for r in mid)
        return False
    # form (b)
    if in_m5 and first.tags.get("m5") == 2 and last.tags.get("m5") == 2:
        if not all(r.tags.get("m5") == 2 for r in hist):
            return False
        if first.tags.get("prim") != "connect" or last.tags.get("prim") != "connect":
            return False
        p, q = first.tags.get("pass"), last.tags.get("pass")
        if p % 2 != 0 or p < 2 or q != p + 1:
            return False
        return all(r.tags.get("prim") == "run" and r.tags.get("pass") == p + 1 for r in mid)
    return False


# ---------------------------------------------------------------------------
# bounded search

class SearchResult:
    """Outcome of a bounded search.

    ``status`` is 'accepted' (``computation`` holds a shortest accepting
    computation), 'exhausted' (every configuration reachable inside the
    a-length cap was explored; ``pruned`` tells whether the cap cut edges) or
    'limit' (depth or state limit hit before exhaustion). Negative results are
    bounded: they say nothing beyond the explored component."""

    def __init__(self, status, computation=None, depth=0, states=0, pruned=False, limits=None):
        self.status = status
        self.computation = computation
        self.depth = depth
        self.states = states
        self.pruned = pruned
        self.limits = dict(limits or {})

    @property
    def accepted(self):
        return self.status == "accepted"

    def summary(self):
        cap = "" if not self.pruned else " (a-length cap binding)"
        if self.accepted:
            return f"accepted in {self.computation.t} steps after {self.states} states"
        if self.status == "exhausted":
            return f"bounded negative: component exhausted at depth {self.depth}, {self.states} states{cap}"
        return f"bounded negative: limits reached at depth {self.depth}, {self.states} states{cap}"

    def to_json(self):
        d = {"status": self.status, "depth": self.depth, "states": self.states,
             "a_length_cap_binding": self.pruned, "limits": self.limits}
        if self.computation is not None:
            d["computation"] = self.computation.to_json()
        return d


def bfs(machine, W, target=None, max_depth=50, max_states=200000, max_alen=None, seed=None):
    """Breadth-first search over configurations from W. Returns
    (SearchResult, parents, depth map). ``target`` is a configuration (the
    accept configuration by default)."""
    if not W.is_configuration():
        raise ValueError("search needs a configuration")
    e = engine(machine, seed)
    start = Engine.key(W)
    goal = Engine.key(target if target is not None else machine.accept_config())
    parent = {start: None}
    depth = {start: 0}
    limits = {"max_depth": max_depth, "max_states": max_states, "max_alen": max_alen}
    if start == goal:
        return SearchResult("accepted", Computation(machine, W, []), 0, 1, False, limits), parent, depth
    q = deque([start])
    pruned = False
    hit_limit = False
    reached = 0
    while q:
        key = q.popleft()
        d = depth[key]
        reached = max(reached, d)
        if d >= max_depth:
            hit_limit = True
            continue
        for r, nxt in e.successors(key):
            if nxt in parent:
                continue
            if max_alen is not None and Engine.a_len(nxt) > max_alen:
                pruned = True
                continue
            parent[nxt] = (key, r)
            depth[nxt] = d + 1
            if nxt == goal:
                hist = []
                k = nxt
                while parent[k] is not None:
                    k, rr = parent[k]
                    hist.append(rr)
                hist.reverse()
                c = Computation(machine, W, hist)
                return SearchResult("accepted", c, d + 1, len(parent), pruned, limits), parent, depth
            if len(parent) >= max_states:
                return SearchResult("limit", None, d + 1, len(parent), pruned, limits), parent, depth
            q.append(nxt)
    status = "limit" if hit_limit else "exhausted"
    return SearchResult(status, None, reached, len(parent), pruned, limits), parent, depth


def accept_search(W, machine, limits=None):
    """Shortest accepting computation of W within ``limits`` (max_depth,
    max_states, max_alen), or a bounded negative."""
    lim = {"max_depth": 50, "max_states": 200000, "max_alen": None, "seed": None}
    lim.update(limits or {})
    res, _, _ = bfs(machine, W, None, lim["max_depth"], lim["max_states"], lim["max_alen"],
                    lim["seed"])
    return res


def reachable(machine, W, max_depth, max_alen=None, max_states=10 ** 7):
    """All configurations reachable from W within the bounds, as a dict
    key -> (parent key, rule) plus the depth map."""
    e = engine(machine)
    start = Engine.key(W)
    parent = {start: None}
    depth = {start: 0}
    q = deque([start])
    while q:
        key = q.popleft()
        d = depth[key]
        if d >= max_depth:
            continue
        for r, nxt in e.successors(key):
            if nxt in parent:
                continue
            if max_alen is not None and Engine.a_len(nxt) > max_alen:
                continue
            parent[nxt] = (key, r)
            depth[nxt] = d + 1
            q.append(nxt)
            if len(parent) >= max_states:
                return parent, depth
    return parent, depth


def path_to(parent, key):
    hist = []
    while parent[key] is not None:
        key, r = parent[key]
        hist.append(r)
    hist.reverse()
    return hist


def reduced_histories(machine, W, max_len, max_alen=None):
    """Every reduced computation from W of length <= max_len, as lists of
    rules (depth-first; the empty history included)."""
    e = engine(machine)
    out = []

    def go(key, hist):
        out.append(list(hist))
        if len(hist) >= max_len:
            return
        for r, nxt in e.successors(key):
            if hist and hist[-1].id == r.id and hist[-1].sign == -r.sign:
                continue
            if max_alen is not None and Engine.a_len(nxt) > max_alen:
                continue
            hist.append(r)
            go(nxt, hist)
            hist.pop()

    go(Engine.key(W), [])
    return out


def trace_lengths(machine, W, hist):
    e = engine(machine)
    key = Engine.key(W)
    out = [Engine.a_len(key)]
    for r in hist:
        key = e.step(key, r)
        out.append(Engine.a_len(key))
    return out


def walk_reduced(machine, W, max_len, max_alen=None):
    """Yield (history, trace) for every reduced computation from W of length
    <= max_len, depth-first, the empty one first. The trace holds engine keys
    when W is a configuration and admissible words otherwise."""
    if W.is_configuration():
        e = engine(machine)
        first = Engine.key(W)
        succ = e.successors
        alen = Engine.a_len
    else:
        first = W

        def succ(V):
            for r in machine.rules:
                if applicable(V, r):
                    yield r, apply(V, r)

        def alen(V):
            return V.a_len
    hist = []
    trace = [first]

    def go():
        yield tuple(hist), tuple(trace)
        if len(hist) >= max_len:
            return
        for r, nxt in succ(trace[-1]):
            if hist and hist[-1].id == r.id and hist[-1].sign == -r.sign:
                continue
            if max_alen is not None and alen(nxt) > max_alen:
                continue
            hist.append(r)
            trace.append(nxt)
            yield from go()
            hist.pop()
            trace.pop()

    yield from go()


def reduced_paths(machine, W, is_target, max_len, max_alen=None, limit=1000):
    """All reduced histories of length <= max_len from the configuration W to
    a configuration satisfying ``is_target(key)``, found by a layered search
    over (configuration, last rule) with memoization. Returns at most
    ``limit`` histories, shortest first."""
    e = engine(machine)
    start = (Engine.key(W), None)
    layers = [{start: []}]  # state -> list of predecessor states
    for _ in range(max_len):
        nxt = {}
        for (key, last) in layers[-1]:
            for r, k2 in e.successors(key):
                if last is not None and last.id == r.id and last.sign == -r.sign:
                    continue
                if max_alen is not None and Engine.a_len(k2) > max_alen:
                    continue
                nxt.setdefault((k2, r), []).append((key, last))
        if not nxt:
            break
        layers.append(nxt)
    out = []

    def back(d, state, suffix):
        if len(out) >= limit:
            return
        if d == 0:
            out.append(list(reversed(suffix)))
            return
        for p in layers[d][state]:
            suffix.append(state[1])
            back(d - 1, p, suffix)
            suffix.pop()

    for d, layer in enumerate(layers):
        for state in layer:
            if is_target(state[0]):
                back(d, state, [])
    return out
