"""Machine combinators: base machines, primitive machines and the tower
M1 -> M2 -> M2bar -> M3 -> M4 -> M4bar -> M5 -> M6 -> M.

Naming is deterministic: a part name is a bare identifier (``R0``, ``P1'``,
``Q3(2)``), a letter is ``<part or sector>.<local>``, and copies made by a
transform decorate the part name or prefix the local name.
"""

from dataclasses import dataclass

from .hardware import (AdmissibleWord, Hardware, concat_reduce, invert_word,
                       make_hardware)
from .rules import LOCKED, make_rule

LETTERS = ("a1", "a2")


class MachineError(ValueError):
    pass


@dataclass(frozen=True)
class Params:
    n: int = 3
    k: int = 2
    L: int = 4
    delta: float = 0.01
    c7: float = 1.0

    def __post_init__(self):
        if self.n < 1 or self.n % 2 == 0:
            raise MachineError("n must be an odd integer >= 1")
        if self.k < 1:
            raise MachineError("k must be >= 1")
        if self.L < 2:
            raise MachineError("L must be >= 2")
        if not 0 < self.delta < 1:
            raise MachineError("delta must lie in (0, 1)")
        if self.c7 <= 0:
            raise MachineError("c7 must be positive")


class Machine:
    """Hardware plus a symmetric rule set.

    ``positive`` holds Theta+; ``rules`` is Theta+ followed by Theta-.
    ``meta`` carries stage-specific annotations used by the configuration
    constructors (phase layout, historical sectors, sub-machines).
    """

    def __init__(self, name, hardware, positive, input_sectors=(), special_input_sector=None,
                 meta=None):
        self.name = name
        self.hardware = hardware
        self.positive = list(positive)
        self.negative = [r.inverse() for r in self.positive]
        self.rules = self.positive + self.negative
        self.input_sectors = tuple(input_sectors)
        self.special_input_sector = special_input_sector
        self.meta = dict(meta or {})
        ids = set()
        for r in self.positive:
            if r.sign != 1:
                raise MachineError(f"{r.label} listed as positive")
            if r.hardware is not hardware:
                raise MachineError(f"{r.label} built over another hardware")
            if r.id in ids:
                raise MachineError(f"duplicate rule id {r.id}")
            ids.add(r.id)
        for j in self.input_sectors:
            if not 1 <= j <= hardware.n_sectors:
                raise MachineError(f"input sector {j} does not exist")
        self._by_key = {r.key(): r for r in self.rules}
        self.by_src = {}
        for r in self.rules:
            self.by_src.setdefault(r.src, []).append(r)

    def rule(self, rid, sign=1):
        if isinstance(rid, str) and rid.endswith("^-1"):
            rid, sign = rid[:-3], -sign
        try:
            return self._by_key[(rid, sign)]
        except KeyError:
            raise MachineError(f"{self.name} has no rule {rid}") from None

    def history(self, items):
        """Rules from (id, sign) pairs or labels such as ``"x1,2^-1"``."""
        out = []
        for it in items:
            if isinstance(it, tuple):
                out.append(self.rule(*it))
            elif isinstance(it, str):
                out.append(self.rule(it))
            else:
                out.append(it)
        return out

    def sector(self, name):
        try:
            return self.hardware.sector_names.index(name) + 1
        except ValueError:
            raise MachineError(f"{self.name} has no sector {name}") from None

    def part(self, name):
        try:
            return self.hardware.part_names.index(name)
        except ValueError:
            raise MachineError(f"{self.name} has no part {name}") from None

    # configurations

    def config(self, states, contents=None):
        """Configuration with the given state names (or 'start'/'end') and
        sector contents ``{sector index or name: word}``."""
        hw = self.hardware
        if states == "start":
            states = hw.start
        elif states == "end":
            states = hw.end
        secs = [()] * hw.N
        for j, w in (contents or {}).items():
            if isinstance(j, str):
                j = self.sector(j)
            secs[j - 1] = hw.encode(w)
        return config_word(hw, hw.encode(states), secs)

    def accept_config(self):
        return self.config("end")

    def sector_roles(self):
        hw = self.hardware
        roles = {}
        for j in range(1, hw.n_sectors + 1):
            r = []
            if j in self.input_sectors:
                r.append("input")
            if j == self.special_input_sector:
                r.append("special")
            if j in hw.hist:
                r.append("historical")
            if j in self.meta.get("working", ()):
                r.append("working")
            if not hw.alphabet(j):
                r.append("empty")
            roles[j] = r
        return roles

    def describe(self):
        hw = self.hardware
        lines = [f"machine {self.name}: {hw.n_parts} parts, {hw.n_sectors} sectors, "
                 f"{len(self.positive)} positive rules" + (", cyclic" if hw.cyclic else "")]
        lines.append("parts: " + " ".join(f"{n}[{len(p)}]" for n, p in zip(hw.part_names, hw.parts)))
        roles = self.sector_roles()
        for j in range(1, hw.n_sectors + 1):
            tag = ",".join(roles[j]) or "-"
            lines.append(f"  sector {j} {hw.sector_name(j)} |Y|={len(hw.alphabet(j))} {tag}")
        counts = {}
        for r in self.positive:
            counts[r.tags.get("step", "-")] = counts.get(r.tags.get("step", "-"), 0) + 1
        for key in sorted(counts, key=str):
            lines.append(f"  rules {key}: {counts[key]}")
        return "\n".join(lines)

    def to_json(self):
        return {
            "name": self.name,
            "hardware": self.hardware.to_json(),
            "rules": [r.to_json() for r in self.positive],
            "input_sectors": list(self.input_sectors),
            "special_input_sector": self.special_input_sector,
            "meta": {k: v for k, v in sorted(self.meta.items()) if _jsonable(v)},
        }

    def __repr__(self):
        return f"Machine({self.name}, parts={self.hardware.n_parts}, rules={len(self.positive)})"


def _jsonable(v):
    return isinstance(v, (int, float, str, bool, type(None))) or (
        isinstance(v, (list, tuple)) and all(_jsonable(x) for x in v)) or (
        isinstance(v, dict) and all(isinstance(k, str) and _jsonable(x) for k, x in v.items()))


def machine_from_json(d):
    from .rules import rule_from_json
    hw = Hardware.from_json(d["hardware"])
    rules = [rule_from_json(r, hw) for r in d["rules"]]
    return Machine(d["name"], hw, rules, d.get("input_sectors", ()),
                   d.get("special_input_sector"), d.get("meta"))


def config_word(hw, states, sectors):
    toks = [states[0]]
    for i in range(1, len(states)):
        toks.extend(sectors[i - 1])
        toks.append(states[i])
    return AdmissibleWord(hw, toks)


# ---------------------------------------------------------------------------
# small builder used by every construction

class _Draft:
    """Mutable description of hardware used while a machine is assembled."""

    def __init__(self):
        self.parts = []     # [name, letters, start, end, role]
        self.sectors = []   # [name, letters]
        self.hist = {}
        self.cyclic = False

    def add_part(self, name, letters, start=None, end=None, role=None):
        letters = list(letters)
        self.parts.append([name, letters, start or letters[0], end or letters[-1], role])

    def add_sector(self, name, letters):
        self.sectors.append([name, list(letters)])

    def build(self):
        roles = [p[4] for p in self.parts]
        hist = {j: ([f"{self.sectors[j - 1][0]}.{x}" for x in l],
                    [f"{self.sectors[j - 1][0]}.{x}" for x in r])
                for j, (l, r) in self.hist.items()}
        return make_hardware([(p[0], p[1]) for p in self.parts],
                             [(s[0], s[1]) for s in self.sectors],
                             [(p[2], p[3]) for p in self.parts], self.cyclic,
                             roles if any(r is not None for r in roles) else None, hist)


def _tok(sector_name, local, sign=1):
    return None if local is None else (f"{sector_name}.{local}", sign)


def _inv(t):
    return None if t is None else (t[0], -t[1])


def _q(part_name, local):
    return f"{part_name}.{local}"


def _local(full):
    return full.split(".", 1)[1]


def _ns(full):
    return full.split(".", 1)[0]


# ---------------------------------------------------------------------------
# base machines

def make_base_machine(kind="power_checker", A=LETTERS, n=3):
    """A recognizing machine whose input sector is sector 1 with alphabet A.

    ``power_checker`` accepts exactly the words u^n: it guesses u into an
    auxiliary sector while removing one copy from the input, then shuttles
    the guess between two auxiliary sectors, removing one more copy of u from
    the input on every pass. ``free_checker`` accepts every word.
    """
    A = tuple(A)
    if len(A) != 2:
        raise MachineError("the input alphabet must have two letters")
    if kind == "power_checker":
        if n < 1:
            raise MachineError("n must be >= 1")
        return _power_checker(A, n)
    if kind == "free_checker":
        return _free_checker(A)
    raise MachineError(f"unknown base machine {kind}")


def _power_checker(A, n):
    X, Y, Z = "Q0Q1", "Q1Q2", "Q2Q3"
    if n == 1:
        phases = ["G", "E"]
    else:
        phases = ["G"] + [f"T{k}" for k in range(1, n)]
    states = phases + ["F"]
    sp = _Draft()
    for i in range(4):
        sp.add_part(f"Q{i}", states, "G", "F")
    for s in (X, Y, Z):
        sp.add_sector(s, A)
    hw = sp.build()
    sec = {X: 1, Y: 2, Z: 3}
    rules = []

    def rule(rid, moves, locked, step, tags=None):
        parts = []
        for i in range(4):
            parts.append(moves.get(i, None))
        doms = {sec[s]: "locked" for s in locked}
        t = {"step": step}
        t.update(tags or {})
        rules.append(make_rule(parts, doms, t, hw, rid))

    def stay(ph, extra):
        return {i: extra.get(i, (_q(f"Q{i}", ph), None, _q(f"Q{i}", ph), None)) for i in range(4)}

    def transition(a, b, locked):
        moves = {i: (_q(f"Q{i}", a), None, _q(f"Q{i}", b), None) for i in range(4)}
        rule(f"{a}>{b}", moves, locked, f"{a}>{b}", {"transition": True})

    # pass kinds: where the guessed word sits before the pass and what the pass does
    def pass_moves(ph, kind, a):
        q = lambda i: _q(f"Q{i}", ph)
        if kind == "guess":
            return stay(ph, {1: (q(1), _tok(X, a, -1), q(1), _tok(Y, a))}), [Z]
        if kind == "erase":
            return stay(ph, {2: (q(2), _tok(Y, a, -1), q(2), None)}), [X, Z]
        if kind == "YZ":
            return stay(ph, {1: (q(1), _tok(X, a, -1), q(1), None),
                             2: (q(2), _tok(Y, a, -1), q(2), _tok(Z, a))}), []
        if kind == "ZY":
            return stay(ph, {0: (q(0), None, q(0), _tok(X, a, -1)),
                             2: (q(2), _tok(Y, a), q(2), _tok(Z, a, -1))}), []
        if kind == "Y":
            return stay(ph, {1: (q(1), _tok(X, a, -1), q(1), None),
                             2: (q(2), _tok(Y, a, -1), q(2), None)}), [Z]
        if kind == "Z":
            return stay(ph, {0: (q(0), None, q(0), _tok(X, a, -1)),
                             2: (q(2), None, q(2), _tok(Z, a, -1))}), [Y]
        raise AssertionError(kind)

    if n == 1:
        kinds = ["guess", "erase"]
    else:
        kinds = ["guess"]
        for k in range(1, n):
            src = "Y" if k % 2 == 1 else "Z"
            kinds.append(src if k == n - 1 else src + ("Z" if src == "Y" else "Y"))
    locks = []
    for ph, kind in zip(phases, kinds):
        lk = None
        for a in A:
            moves, lk = pass_moves(ph, kind, a)
            rule(f"{ph}[{a}]", moves, lk, ph, {"pass": kind})
        locks.append(lk)
    for idx in range(len(phases)):
        a = phases[idx]
        if idx + 1 < len(phases):
            b = phases[idx + 1]
            kind = kinds[idx]
            emptied = {"YZ": [Y], "ZY": [Z], "guess": [], "erase": []}.get(kind, [])
            lk = sorted(set(locks[idx]) | set(locks[idx + 1]) | set(emptied))
            transition(a, b, lk)
        else:
            transition(a, "F", [X, Y, Z])
    return Machine(f"power_checker({n})", hw, rules, [1],
                   meta={"kind": "power_checker", "n": n, "letters": list(A),
                         "phases": phases, "pass_kinds": kinds,
                         "time_bound": "n*(|u|+1)"})


def _free_checker(A):
    sp = _Draft()
    sp.add_part("Q0", ["E", "F"], "E", "F")
    sp.add_part("Q1", ["E", "F"], "E", "F")
    sp.add_sector("Q0Q1", A)
    hw = sp.build()
    rules = []
    for a in A:
        rules.append(make_rule([("Q0.E", None, "Q0.E", None),
                                ("Q1.E", ("Q0Q1." + a, -1), "Q1.E", None)],
                               {}, {"step": "E"}, hw, f"E[{a}]"))
    rules.append(make_rule([("Q0.E", None, "Q0.F", None), ("Q1.E", None, "Q1.F", None)],
                           {1: "locked"}, {"step": "E>F", "transition": True}, hw, "E>F"))
    return Machine("free_checker", hw, rules, [1],
                   meta={"kind": "free_checker", "letters": list(A), "time_bound": "|u|+1"})


def base_accept_history(M1, v):
    """Accepting history of the base machine for the input v^n (power
    checker) or v (free checker); ``v`` is a list of (letter, sign)."""
    v = list(v)
    kind = M1.meta["kind"]
    H = []
    if kind == "free_checker":
        H += [(f"E[{a}]", s) for a, s in reversed(v)]
        H.append(("E>F", 1))
        return M1.history(H)
    phases = M1.meta["phases"]
    kinds = M1.meta["pass_kinds"]
    for idx, (ph, kind) in enumerate(zip(phases, kinds)):
        if kind in ("guess", "erase", "YZ", "Y"):
            seq = reversed(v)
        else:
            seq = v
        H += [(f"{ph}[{a}]", s) for a, s in seq]
        nxt = phases[idx + 1] if idx + 1 < len(phases) else "F"
        H.append((f"{ph}>{nxt}", 1))
    return M1.history(H)


def base_input_config(M1, w):
    """Start configuration of the base machine with w (list of (letter, sign))
    in the input sector."""
    j = M1.input_sectors[0]
    name = M1.hardware.sector_name(j)
    return M1.config("start", {j: tuple(M1.hardware.ids[f"{name}.{a}"] * s for a, s in w)})


# ---------------------------------------------------------------------------
# rule plumbing shared by the transforms

def _draft_of(rule):
    """(parts, domains) of a rule with names instead of ids; signs are folded
    into the part rewrites, so an inverse rule yields the inverted parts."""
    parts = [(p.src, p.a, p.dst, p.b) for p in rule.parts]
    return parts, list(rule.domains)


def _map_tok(t, f):
    return None if t is None else (f(t[0]), t[1])


def _map_dom(d, f):
    return None if d is None else frozenset(f(x) for x in d)


def _mk(hw, rid, parts, domains, tags):
    doms = ["locked" if (d is not None and not d) else d for d in domains]
    return make_rule(parts, doms, tags, hw, rid)


def _invariant_locks(machine):
    """Sectors locked by every positive rule (all sectors if there are none)."""
    S = machine.hardware.n_sectors
    locked = set(range(1, S + 1))
    for r in machine.positive:
        locked &= set(r.locked_sectors())
    return locked


# ---------------------------------------------------------------------------
# primitive machines

def primitive_family(kind, k):
    """Abstract rule list of LR_k (kind 'LR') or RL_k (kind 'RL').

    Entries are (id, src, left, dst, right, locked_side, tags) where left and
    right are (copy, sign) for the letter written into the left sector (copy
    1) and the right sector (copy 2), ``locked_side`` is 1 or 2 for the
    connecting rules, and letter-dependent ids contain ``{a}``.
    """
    z = "z" if kind == "LR" else "x"
    run = "p" if kind == "LR" else "r"
    out = []
    for j in range(1, k + 1):
        o, e = 2 * j - 1, 2 * j
        if kind == "LR":
            out.append((f"{z}{o}[{{a}}]", f"{run}{o}", (1, -1), f"{run}{o}", (2, 1), None,
                        {"prim": "run", "pass": o}))
            out.append((f"{z}{o},{e}", f"{run}{o}", None, f"{run}{e}", None, 1,
                        {"prim": "connect", "pass": o}))
            out.append((f"{z}{e}[{{a}}]", f"{run}{e}", (1, 1), f"{run}{e}", (2, -1), None,
                        {"prim": "run", "pass": e}))
            if j < k:
                out.append((f"{z}{e},{e + 1}", f"{run}{e}", None, f"{run}{e + 1}", None, 2,
                            {"prim": "connect", "pass": e}))
        else:
            out.append((f"{z}{o}[{{a}}]", f"{run}{o}", (1, 1), f"{run}{o}", (2, -1), None,
                        {"prim": "run", "pass": o}))
            out.append((f"{z}{o},{e}", f"{run}{o}", None, f"{run}{e}", None, 2,
                        {"prim": "connect", "pass": o}))
            out.append((f"{z}{e}[{{a}}]", f"{run}{e}", (1, -1), f"{run}{e}", (2, 1), None,
                        {"prim": "run", "pass": e}))
            if j < k:
                out.append((f"{z}{e},{e + 1}", f"{run}{e}", None, f"{run}{e + 1}", None, 1,
                            {"prim": "connect", "pass": e}))
    return out


def _parallel_primitive(name, shape, kind, Y, k, triples, copy1, copy2, free=(), tags=None):
    """Copies of LR_k(Y)/RL_k(Y) working in parallel.

    ``shape`` is a hardware supplying part names and tape alphabets; each
    triple (l, m, r) of consecutive part indices is one copy of the primitive
    base with running part m. ``copy1(t, a)``/``copy2(t, a)`` name the tape
    letters standing for a in the left/right sector of triple t. Every other
    sector is locked except the ones listed in ``free``.
    """
    run = "p" if kind == "LR" else "r"
    running = {t[1] for t in triples}
    sp = _Draft()
    for i, pn in enumerate(shape.part_names):
        locs = [f"{run}{x}" for x in range(1, 2 * k + 1)] if i in running else ["o"]
        sp.add_part(pn, locs, locs[0], locs[-1], shape.roles[i] if shape.roles else None)
    for j in range(1, shape.n_sectors + 1):
        sp.add_sector(shape.sector_name(j), [_local(x) for x in shape.alphabet(j)])
    sp.hist = {j: ([_local(x) for x in l], [_local(x) for x in r]) for j, (l, r) in shape.hist.items()}
    sp.cyclic = shape.cyclic
    hw = sp.build()
    S = hw.n_sectors
    rules = []
    for rid, src, left, dst, right, lock, tg in primitive_family(kind, k):
        letters = Y if "{a}" in rid else [None]
        for a in letters:
            parts = []
            for i, pn in enumerate(hw.part_names):
                if i in running:
                    t = next(t for t in triples if t[1] == i)
                    lt = None if left is None else (copy1(t, a), left[1])
                    rt = None if right is None else (copy2(t, a), right[1])
                    parts.append((f"{pn}.{src}", lt, f"{pn}.{dst}", rt))
                else:
                    parts.append((f"{pn}.o", None, f"{pn}.o", None))
            doms = [LOCKED] * S
            for j in free:
                doms[j - 1] = None
            for t in triples:
                lj, rj = t[1], t[1] + 1
                doms[lj - 1] = frozenset(copy1(t, b) for b in Y)
                doms[rj - 1] = frozenset(copy2(t, b) for b in Y)
                if lock == 1:
                    doms[lj - 1] = LOCKED
                elif lock == 2:
                    doms[rj - 1] = LOCKED
            tag = {"step": name, "prim_kind": kind}
            tag.update(tg)
            tag.update(tags or {})
            rules.append(_mk(hw, rid.replace("{a}", str(a)), parts, doms, tag))
    return Machine(name, hw, rules, [j for j in free], meta={"kind": kind, "k": k})


def make_primitive(kind="LR", Y=("a", "b"), k=1):
    """LR_k(Y) or RL_k(Y) on the standard base Q1 P Q2 (Q1 R Q2)."""
    if kind not in ("LR", "RL"):
        raise MachineError(f"unknown primitive {kind}")
    if k < 1:
        raise MachineError("k must be >= 1")
    Y = tuple(Y)
    if not Y:
        import warnings
        warnings.warn("primitive machine over an empty alphabet is degenerate")
    mid = "P" if kind == "LR" else "R"
    shape = make_hardware([("Q1", ["q"]), (mid, ["x"]), ("Q2", ["q"])],
                          [("Y1", list(Y)), ("Y2", list(Y))])
    M = _parallel_primitive(f"{kind}_{k}", shape, kind, Y, k, [(0, 1, 2)],
                            lambda t, a: f"Y1.{a}", lambda t, a: f"Y2.{a}")
    M.input_sectors = ()
    M.meta.update({"Y": list(Y), "running_part": 1})
    return M


def make_multiplier(side="left", letters=("a", "b"), right_letters=None):
    """A two-part machine Q0 Q1 with one sector X whose rules multiply the
    sector by one letter each.

    ``side`` is "left" (rule t[x]: q0 -> q0 x), "right" (q1 -> x q1) or
    "both": rule t[x] writes x on the left and its partner from
    ``right_letters`` on the right, the two alphabets being disjoint.
    """
    letters = tuple(letters)
    if side == "both":
        right_letters = tuple(right_letters or (x + "'" for x in letters))
        if len(right_letters) != len(letters) or set(right_letters) & set(letters):
            raise MachineError("two-sided multiplier needs a disjoint right alphabet of the same size")
        alph = letters + right_letters
    elif side in ("left", "right"):
        alph = letters
    else:
        raise MachineError(f"unknown side {side}")
    hw = make_hardware([("Q0", ["q"]), ("Q1", ["q"])], [("X", list(alph))])
    rules = []
    for k, x in enumerate(letters):
        left = ("Q0.q", None, "Q0.q", (f"X.{x}", 1))
        right = ("Q1.q", None, "Q1.q", None)
        if side == "right":
            left = ("Q0.q", None, "Q0.q", None)
            right = ("Q1.q", (f"X.{x}", 1), "Q1.q", None)
        elif side == "both":
            right = ("Q1.q", (f"X.{right_letters[k]}", 1), "Q1.q", None)
        rules.append(make_rule([left, right], None, {"letter": x}, hw, f"t[{x}]"))
    return Machine(f"mult_{side}", hw, rules, (1,), meta={"kind": "multiplier", "side": side})


# ---------------------------------------------------------------------------
# M2: historical sectors

def add_history_sectors(M1):
    """Split every part but the first into a left and a right half; the new
    sector between the halves records the history in two copies of Phi+."""
    h1 = M1.hardware
    if h1.cyclic:
        raise MachineError("base machine must have a linear standard base")
    phi = [r.id for r in M1.positive]
    s = h1.N
    pn = [f"{h1.part_names[0]}r"]
    src_part = [0]
    for i in range(1, s + 1):
        pn += [f"{h1.part_names[i]}l", f"{h1.part_names[i]}r"]
        src_part += [i, i]
    sp = _Draft()
    for idx, name in enumerate(pn):
        i = src_part[idx]
        sp.add_part(name, [_local(x) for x in h1.parts[i]], _local(h1.start[i]), _local(h1.end[i]))
    hist_l = [f"l:{x}" for x in phi]
    hist_r = [f"r:{x}" for x in phi]
    for j in range(1, 2 * s + 1):
        name = pn[j - 1] + pn[j]
        if j % 2 == 1:
            sp.add_sector(name, [_local(x) for x in h1.alphabet((j + 1) // 2)])
        else:
            sp.add_sector(name, hist_l + hist_r)
            sp.hist[j] = (hist_l, hist_r)
    hw = sp.build()
    sec = hw.sector_names

    def work(j, x):  # M1 sector j letter -> M2 working letter
        return f"{sec[2 * j - 2]}.{_local(x)}"

    rules = []
    for r in M1.positive:
        parts, doms = _draft_of(r)
        new = []
        src, a, dst, b = parts[0]
        new.append((f"{pn[0]}.{_local(src)}", None, f"{pn[0]}.{_local(dst)}", _map_tok(b, lambda x: work(1, x))))
        for i in range(1, s + 1):
            src, a, dst, b = parts[i]
            hs = sec[2 * i - 1]
            new.append((f"{pn[2 * i - 1]}.{_local(src)}", _map_tok(a, lambda x: work(i, x)),
                        f"{pn[2 * i - 1]}.{_local(dst)}", (f"{hs}.l:{r.id}", -1)))
            new.append((f"{pn[2 * i]}.{_local(src)}", (f"{hs}.r:{r.id}", 1),
                        f"{pn[2 * i]}.{_local(dst)}", _map_tok(b, lambda x: work(i + 1, x))))
        nd = []
        for j in range(1, 2 * s + 1):
            if j % 2 == 1:
                i = (j + 1) // 2
                nd.append(_map_dom(doms[i - 1], lambda x: work(i, x)))
            else:
                nd.append(None)
        rules.append(_mk(hw, r.id, new, nd, dict(r.tags)))
    return Machine("M2", hw, rules, [2 * j - 1 for j in M1.input_sectors],
                   meta={"stage": "M2", "phi": phi, "m1": M1,
                         "working": [j for j in range(1, 2 * s + 1) if j % 2 == 1]})


# ---------------------------------------------------------------------------
# M2bar: triple base

def triple_base(M2):
    """Replace every part Q_i by P_i Q_i R_i. Each rule theta yields theta(1)
    and theta(2); the P_iQ_i and Q_iR_i sectors are locked, P_i writes the
    left letter of theta into R_{i-1}P_i and R_i writes the right letter into
    R_iP_{i+1}."""
    h2 = M2.hardware
    S = h2.N
    sp = _Draft()
    for i in range(S + 1):
        sp.add_part(f"P{i}", ["p1", "p2"], "p1", "p1", "P")
        sp.add_part(f"Q{i}", [_local(x) for x in h2.parts[i]], _local(h2.start[i]), _local(h2.end[i]), "Q")
        sp.add_part(f"R{i}", ["r1", "r2"], "r1", "r1", "R")
    loc = lambda j: [_local(x) for x in h2.alphabet(j)]
    for i in range(S + 1):
        sp.add_sector(f"P{i}Q{i}", loc(i) if i >= 1 else [])
        sp.add_sector(f"Q{i}R{i}", loc(i + 1) if i < S else [])
        if i < S:
            sp.add_sector(f"R{i}P{i + 1}", loc(i + 1))
    triples = []
    for j, (l, r) in h2.hist.items():
        ll, rr = [_local(x) for x in l], [_local(x) for x in r]
        for jj in (3 * j - 1, 3 * j, 3 * j + 1):
            sp.hist[jj] = (ll, rr)
        triples.append({"QR": 3 * j - 1, "RP": 3 * j, "PQ": 3 * j + 1,
                        "Q": 3 * j - 2, "R": 3 * j - 1, "P": 3 * j})
    hw = sp.build()
    sname = hw.sector_names
    rules = []
    for copy in (1, 2):
        for r in M2.positive:
            parts, doms = _draft_of(r)
            new = []
            for i in range(S + 1):
                src, a, dst, b = parts[i]
                new.append((f"P{i}.p{copy}", _map_tok(a, lambda x: f"{sname[3 * i - 1]}.{_local(x)}"),
                            f"P{i}.p{copy}", None))
                new.append((f"Q{i}.{_local(src)}", None, f"Q{i}.{_local(dst)}", None))
                new.append((f"R{i}.r{copy}", None, f"R{i}.r{copy}",
                            _map_tok(b, lambda x: f"{sname[3 * i + 2]}.{_local(x)}")))
            nd = []
            for i in range(S + 1):
                nd.append(LOCKED)
                nd.append(LOCKED)
                if i < S:
                    nd.append(_map_dom(doms[i], lambda x: f"{sname[3 * i + 2]}.{_local(x)}"))
            tags = dict(r.tags)
            tags["copy"] = copy
            tags["m2_rule"] = r.id
            rules.append(_mk(hw, f"{r.id}({copy})", new, nd, tags))
    working = [3 * j for j in M2.meta.get("working", [])]
    return Machine("M2bar", hw, rules, [3 * j for j in M2.input_sectors],
                   meta={"stage": "M2bar", "phi": M2.meta["phi"], "m2": M2,
                         "triples": triples, "working": working})


def inverse_machine(M, name=None):
    """Same hardware with start and end swapped; positive rules are copies of
    the negative rules of M."""
    h = M.hardware
    hw = Hardware(h.part_names, h.parts, h.sector_names, h.tape_alphabets, h.end, h.start,
                  h.cyclic, h.roles, h.hist)
    rules = []
    for r in M.negative:
        parts, doms = _draft_of(r)
        tags = dict(r.tags)
        tags["inverted"] = True
        rules.append(_mk(hw, r.id, parts, doms, tags))
    meta = dict(M.meta)
    return Machine(name or M.name + "^-1", hw, rules, M.input_sectors, M.special_input_sector, meta)


# ---------------------------------------------------------------------------
# concatenation of machines over a common base

def concat_phases(phases, lock_policy=None, name="concat", sep=":", tag_key="phase",
                  transition_id=None, shared_parts=(), bare=(), meta=None):
    """Run the machines of ``phases`` one after another.

    Every phase keeps a disjoint copy of the state letters (local names get
    the prefix ``<phase><sep>``, except for phases listed in ``bare`` and
    for ``shared_parts`` whose single letter is common to all phases).
    Transition rule i switches the end letters of phase i to the start
    letters of phase i+1; it locks every sector locked by all rules of
    phase i or by all rules of phase i+1, and ``lock_policy(i, hardware)``
    may return further domains ``{sector: domain names or 'locked'}``.
    """
    if not phases:
        raise MachineError("nothing to concatenate")
    h0 = phases[0].hardware
    for M in phases[1:]:
        h = M.hardware
        if h.part_names != h0.part_names or h.sector_names != h0.sector_names \
                or h.tape_alphabets != h0.tape_alphabets or h.cyclic != h0.cyclic:
            raise MachineError("incompatible base shapes")
    n = len(phases)
    shared = {h0.part_names.index(p) for p in shared_parts}

    def pre(ph, i, full):
        if i in shared or ph in bare:
            return full
        ns, loc = full.split(".", 1)
        return f"{ns}.{ph}{sep}{loc}"

    sp = _Draft()
    for i, pname in enumerate(h0.part_names):
        letters = []
        for ph, M in enumerate(phases, start=1):
            for x in M.hardware.parts[i]:
                y = _local(pre(ph, i, x))
                if y not in letters:
                    letters.append(y)
        first, last = phases[0].hardware, phases[-1].hardware
        sp.add_part(pname, letters, _local(pre(1, i, first.start[i])),
                    _local(pre(n, i, last.end[i])), h0.roles[i] if h0.roles else None)
    for j in range(1, h0.n_sectors + 1):
        sp.add_sector(h0.sector_name(j), [_local(x) for x in h0.alphabet(j)])
    sp.hist = {j: ([_local(x) for x in l], [_local(x) for x in r]) for j, (l, r) in h0.hist.items()}
    sp.cyclic = h0.cyclic
    hw = sp.build()
    S = hw.n_sectors
    rules = []
    for ph, M in enumerate(phases, start=1):
        for r in M.positive:
            parts, doms = _draft_of(r)
            new = [(pre(ph, i, s), a, pre(ph, i, d), b) for i, (s, a, d, b) in enumerate(parts)]
            tags = dict(r.tags)
            tags[tag_key] = ph
            tags["step"] = f"{name}({ph})"
            rid = r.id if ph in bare else f"{ph}{sep}{r.id}"
            rules.append(_mk(hw, rid, new, doms, tags))
        if ph < n:
            nxt = phases[ph]
            new = [(pre(ph, i, M.hardware.end[i]), None, pre(ph + 1, i, nxt.hardware.start[i]), None)
                   for i in range(hw.n_parts)]
            locked = _invariant_locks(M) | _invariant_locks(nxt)
            doms = [None] * S
            for j, d in (lock_policy(ph, hw) if lock_policy else {}).items():
                doms[j - 1] = LOCKED if d == "locked" else frozenset(d)
            for j in locked:
                doms[j - 1] = LOCKED
            rid = transition_id(ph) if transition_id else f"chi({ph},{ph + 1})"
            tags = {tag_key: [ph, ph + 1], "transition": True, "step": rid}
            rules.append(_mk(hw, rid, new, doms, tags))
    # rules of the phases first, then transitions, in phase order
    order = []
    for ph in range(1, n + 1):
        order += [r for r in rules if r.tags.get(tag_key) == ph]
        order += [r for r in rules if r.tags.get(tag_key) == [ph, ph + 1]]
    inp = phases[0].input_sectors
    return Machine(name, hw, order, inp, phases[0].special_input_sector,
                   meta=dict(meta or {}, phases=n))


def m3_phase_kinds(k):
    kinds = []
    for ph in range(1, 4 * k + 4):
        kinds.append(("RL", "M2bar", "LR", "M2bar^-1")[(ph - 1) % 4])
    return kinds


def build_m3(M2bar, k=2):
    """4k+3 phases: RL, M2bar, LR, M2bar^-1 repeated k times, then RL, M2bar,
    LR once more. The primitive phases run in parallel on the historical
    triples Q_iR_iP_{i+1} (RL) and R_iP_{i+1}Q_{i+1} (LR)."""
    if k < 1:
        raise MachineError("k must be >= 1")
    hw = M2bar.hardware
    phi = M2bar.meta["phi"]
    triples = M2bar.meta["triples"]
    inp = M2bar.input_sectors
    sn = hw.sector_names
    rl_tr = [(t["Q"], t["R"], t["P"]) for t in triples]
    lr_tr = [(t["R"], t["P"], t["P"] + 1) for t in triples]
    rl = _parallel_primitive("RL", hw, "RL", phi, 1, rl_tr,
                             lambda t, a: f"{sn[t[1] - 1]}.r:{a}", lambda t, a: f"{sn[t[1]]}.l:{a}",
                             free=inp)
    lr = _parallel_primitive("LR", hw, "LR", phi, 1, lr_tr,
                             lambda t, a: f"{sn[t[1] - 1]}.r:{a}", lambda t, a: f"{sn[t[1]]}.l:{a}",
                             free=inp)
    inv = inverse_machine(M2bar)
    kinds = m3_phase_kinds(k)
    phases = [{"RL": rl, "M2bar": M2bar, "LR": lr, "M2bar^-1": inv}[x] for x in kinds]
    rp = [t["RP"] for t in triples]

    def policy(ph, h):
        side = "left" if kinds[ph - 1] in ("RL", "M2bar^-1") else "right"
        d = {}
        for j in range(1, h.n_sectors + 1):
            if j in rp:
                l, r = h.hist[j]
                d[j] = l if side == "left" else r
            elif j in inp and side == "left":
                continue
            else:
                d[j] = "locked"
        return d

    M3 = concat_phases(phases, policy, name="M3", sep=":", tag_key="m3",
                       meta={"stage": "M3", "k": k, "phi": phi, "m2bar": M2bar,
                             "triples": triples, "kinds": kinds,
                             "working": M2bar.meta["working"]})
    return M3


# ---------------------------------------------------------------------------
# M4: mirror copy, M4bar: the t part

def mirror_double(M):
    """Standard base B (B')^-1: the parts of B followed by mirror parts in
    reverse order. A mirror part ``X'`` holds letters denoting inverses of the
    copies, so the original rewrite q -> a q' b becomes m(q) -> (b')^-1 m(q')
    (a')^-1 and a mirror sector holds the inverse of the copy of the original
    sector word. The sector between the halves is empty."""
    h = M.hardware
    if h.cyclic:
        raise MachineError("mirror_double needs a linear base")
    m = h.n_parts
    sp = _Draft()
    roles = h.roles or [None] * m
    for i in range(m):
        sp.add_part(h.part_names[i], [_local(x) for x in h.parts[i]], _local(h.start[i]),
                    _local(h.end[i]), roles[i])
    for i in reversed(range(m)):
        sp.add_part(h.part_names[i] + "'", [_local(x) for x in h.parts[i]], _local(h.start[i]),
                    _local(h.end[i]), roles[i])
    pn = [p[0] for p in sp.parts]
    for j in range(1, 2 * m):
        name = pn[j - 1] + pn[j]
        if j < m:
            sp.add_sector(name, [_local(x) for x in h.alphabet(j)])
        elif j == m:
            sp.add_sector(name, [])
        else:
            sp.add_sector(name, [_local(x) for x in h.alphabet(2 * m - j)])
    for j, (l, r) in h.hist.items():
        ll, rr = [_local(x) for x in l], [_local(x) for x in r]
        sp.hist[j] = (ll, rr)
        sp.hist[2 * m - j] = (ll, rr)
    hw = sp.build()
    sn = hw.sector_names
    msec = {j: 2 * m - j for j in range(1, m)}
    mpart = {i: 2 * m - 1 - i for i in range(m)}
    rules = []
    for r in M.positive:
        parts, doms = _draft_of(r)
        new = [None] * (2 * m)
        for i, (s, a, d, b) in enumerate(parts):
            new[i] = (s, a, d, b)
            p = mpart[i]
            ma = None if b is None else (f"{sn[msec[i + 1] - 1]}.{_local(b[0])}", -b[1])
            mb = None if a is None else (f"{sn[msec[i] - 1]}.{_local(a[0])}", -a[1])
            new[p] = (f"{pn[p]}.{_local(s)}", ma, f"{pn[p]}.{_local(d)}", mb)
        nd = [None] * (2 * m - 1)
        for j in range(1, m):
            nd[j - 1] = doms[j - 1]
            nd[msec[j] - 1] = _map_dom(doms[j - 1], lambda x, j=j: f"{sn[msec[j] - 1]}.{_local(x)}")
        nd[m - 1] = LOCKED
        rules.append(_mk(hw, r.id, new, nd, dict(r.tags)))
    meta = {k: v for k, v in M.meta.items() if k not in ("phases",)}
    meta.update({"stage": "M4", "source": M, "half": m,
                 "mirror_sector": {**msec, **{v: k for k, v in msec.items()}},
                 "mirror_part": {**mpart, **{v: k for k, v in mpart.items()}}})
    return Machine(M.name + "x2" if M.name != "M3" else "M4", hw, rules, M.input_sectors,
                   M.special_input_sector, meta)


def prepend_t(M):
    """Standard base {t}B with a one-letter part t; the new tP_0 sector has
    an empty alphabet and is locked by every rule."""
    h = M.hardware
    sp = _Draft()
    sp.add_part("t", ["t"], "t", "t", "t")
    roles = h.roles or [None] * h.n_parts
    for i in range(h.n_parts):
        sp.add_part(h.part_names[i], [_local(x) for x in h.parts[i]], _local(h.start[i]),
                    _local(h.end[i]), roles[i])
    sp.add_sector("t" + h.part_names[0], [])
    for j in range(1, h.n_sectors + 1):
        sp.add_sector(h.sector_name(j), [_local(x) for x in h.alphabet(j)])
    sp.hist = {j + 1: ([_local(x) for x in l], [_local(x) for x in r]) for j, (l, r) in h.hist.items()}
    hw = sp.build()
    rules = []
    for r in M.positive:
        parts, doms = _draft_of(r)
        rules.append(_mk(hw, r.id, [("t.t", None, "t.t", None)] + parts, [LOCKED] + doms, dict(r.tags)))
    meta = dict(M.meta)
    if "mirror_sector" in meta:
        meta["mirror_sector"] = {j + 1: v + 1 for j, v in meta["mirror_sector"].items()}
        meta["mirror_part"] = {i + 1: v + 1 for i, v in meta["mirror_part"].items()}
    meta["N"] = hw.n_parts
    meta["stage"] = "M4bar" if meta.get("stage") == "M4" else meta.get("stage")
    meta["inner"] = M
    name = "M4bar" if M.name == "M4" else "t" + M.name
    return Machine(name, hw, rules, [j + 1 for j in M.input_sectors],
                   None if M.special_input_sector is None else M.special_input_sector + 1, meta)


def _with_mirror(j, mirror):
    return [j, mirror[j]]


# ---------------------------------------------------------------------------
# M5

def _single_letter_shape(h, letter="o"):
    sp = _Draft()
    for i, pn in enumerate(h.part_names):
        sp.add_part(pn, [letter], letter, letter, h.roles[i] if h.roles else None)
    for j in range(1, h.n_sectors + 1):
        sp.add_sector(h.sector_name(j), [_local(x) for x in h.alphabet(j)])
    sp.hist = {j: ([_local(x) for x in l], [_local(x) for x in r]) for j, (l, r) in h.hist.items()}
    return sp.build()


def _half_machine(name, hw, moves_by_rule, free, tags=None):
    """Rules over a one-letter-per-part shape: ``moves_by_rule`` lists
    (id, {part: (a, b)}, {sector: domain})."""
    S = hw.n_sectors
    rules = []
    for rid, moves, doms in moves_by_rule:
        parts = []
        for i, pn in enumerate(hw.part_names):
            a, b = moves.get(i, (None, None))
            q = hw.parts[i][0]
            parts.append((q, a, q, b))
        d = [LOCKED] * S
        for j in free:
            d[j - 1] = None
        for j, x in doms.items():
            d[j - 1] = x
        t = {"step": name}
        t.update(tags or {})
        rules.append(_mk(hw, rid, parts, d, t))
    return Machine(name, hw, rules, [])


def build_m5(M4bar, k=2, A=LETTERS):
    """Five machines run in order: M5(1) moves the input from Q0R0 to R0P1,
    M5(2) is LR_k on R0P1Q1, M5(3) writes a history word (left alphabets)
    into the historical R_iP_{i+1} sectors, M5(4) is M4bar and M5(5) erases
    the history (right alphabets). Everything acts symmetrically on the
    mirror half."""
    M3 = M4bar.meta["source"]
    h3 = M3.hardware
    phi = M3.meta["phi"]
    triples = M3.meta["triples"]
    A = tuple(A)
    sh = _single_letter_shape(h3)
    sn = h3.sector_names
    q0r0, r0p1, p1q1 = (h3.sector_names.index(x) + 1 for x in ("Q0R0", "R0P1", "P1Q1"))
    r0 = h3.part_names.index("R0")
    p1 = h3.part_names.index("P1")
    hist_rp = [t["RP"] for t in triples]

    m1 = _half_machine("M5(1)", sh, [
        (a, {r0: ((f"Q0R0.{a}", -1), (f"R0P1.{a}", 1))}, {}) for a in A], free=[q0r0, r0p1])
    m2 = _parallel_primitive("M5(2)", sh, "LR", A, k, [(r0, p1, p1 + 1)],
                             lambda t, a: f"R0P1.{a}", lambda t, a: f"P1Q1.{a}")
    m3 = _half_machine("M5(3)", sh, [
        (f, {t["P"]: ((f"{sn[t['RP'] - 1]}.l:{f}", 1), None) for t in triples}, {})
        for f in phi], free=[r0p1] + hist_rp)
    m5 = _half_machine("M5(5)", sh, [
        (f, {t["P"]: ((f"{sn[t['RP'] - 1]}.r:{f}", -1), None) for t in triples}, {})
        for f in phi], free=hist_rp)
    fin = Machine("end", _single_letter_shape(h3, "e"), [], [])
    halves = [m1, m2, m3, None, m5, fin]
    phases = []
    for hm in halves:
        phases.append(M4bar if hm is None else prepend_t(mirror_double(hm)))
    mir = M4bar.meta["mirror_sector"]
    rp_all = sorted(x for j in hist_rp for x in _with_mirror(j + 1, mir))

    def policy(ph, hw):
        d = {}
        if ph == 3:
            for j in rp_all:
                d[j] = hw.hist[j][0]
        elif ph == 4:
            for j in rp_all:
                d[j] = hw.hist[j][1]
            for j in range(1, hw.n_sectors + 1):
                if j not in rp_all:
                    d[j] = "locked"
        return d

    ids = {1: "theta(12)", 2: "theta(23)", 3: "theta(34)", 4: "theta(45)", 5: "theta0"}
    M5 = concat_phases(phases, policy, name="M5", sep="/", tag_key="m5",
                       transition_id=lambda ph: ids[ph], shared_parts=("t",), bare=(6,),
                       meta={"stage": "M5", "k": k, "phi": phi, "letters": list(A),
                             "triples": triples, "m4bar": M4bar,
                             "mirror_sector": mir, "mirror_part": M4bar.meta["mirror_part"],
                             "hist_rp": [j + 1 for j in hist_rp], "N": M4bar.meta["N"],
                             "kinds": M3.meta["kinds"],
                             "half": M4bar.meta["half"]})
    M5.input_sectors = (q0r0 + 1,)
    for r in (M5.rule("theta0"), M5.rule("theta0", -1)):
        r.tags["m5"] = 5
        r.tags["accept"] = True
    return M5


# ---------------------------------------------------------------------------
# M6: cyclic copies, M: two copies glued by start/accept rules

def cyclify(M5, L=4, lock_special=False):
    """L indexed copies of the base of M5 arranged cyclically; rules act in
    parallel on every copy. The sectors between copies and the wrap sector
    have empty alphabets. With ``lock_special`` every rule locks the first
    input sector Q0(1)R0(1) and the letters written into it are dropped."""
    if L < 2:
        raise MachineError("L must be >= 2")
    h = M5.hardware
    N0 = h.n_parts
    roles = h.roles or [None] * N0
    sp = _Draft()
    sp.cyclic = True
    for i in range(1, L + 1):
        for p in range(N0):
            sp.add_part(f"{h.part_names[p]}({i})", [_local(x) for x in h.parts[p]],
                        _local(h.start[p]), _local(h.end[p]), roles[p])
    pn = [p[0] for p in sp.parts]
    P = len(pn)
    for j in range(1, P + 1):
        name = pn[j - 1] + pn[j % P]
        jj = j % N0
        sp.add_sector(name, [_local(x) for x in h.alphabet(jj)] if jj else [])
        if jj in h.hist:
            l, r = h.hist[jj]
            sp.hist[j] = ([_local(x) for x in l], [_local(x) for x in r])
    hw = sp.build()
    sn = hw.sector_names

    def sec(i, j):
        return (i - 1) * N0 + j

    special = sec(1, M5.input_sectors[0])
    rules = []
    for r in M5.positive:
        parts, doms = _draft_of(r)
        new, nd = [], [LOCKED] * P
        for i in range(1, L + 1):
            for p, (s, a, d, b) in enumerate(parts):
                rn = lambda t, j: None if t is None else (f"{sn[sec(i, j) - 1]}.{_local(t[0])}", t[1])
                na, nb = rn(a, p), rn(b, p + 1)
                if lock_special and i == 1:
                    if p == special and na is not None:
                        na = None
                    if p + 1 == special and nb is not None:
                        nb = None
                q = f"{h.part_names[p]}({i})"
                new.append((f"{q}.{_local(s)}", na, f"{q}.{_local(d)}", nb))
            for j in range(1, N0):
                nd[sec(i, j) - 1] = _map_dom(doms[j - 1], lambda x, i=i, j=j: f"{sn[sec(i, j) - 1]}.{_local(x)}")
        if lock_special:
            nd[special - 1] = LOCKED
        rules.append(_mk(hw, r.id, new, nd, dict(r.tags)))
    mir = M5.meta.get("mirror_sector", {})
    meta = {k: v for k, v in M5.meta.items() if k not in ("mirror_sector", "mirror_part")}
    meta.update({"stage": "M62" if lock_special else "M61", "L": L, "N0": N0, "m5": M5,
                 "mirror_sector": {sec(i, j): sec(i, v) for i in range(1, L + 1) for j, v in mir.items()},
                 "mirror_part": {(i - 1) * N0 + p: (i - 1) * N0 + v for i in range(1, L + 1)
                                 for p, v in M5.meta.get("mirror_part", {}).items()},
                 "lock_special": bool(lock_special)})
    return Machine("M62" if lock_special else "M61", hw, rules,
                   [sec(i, M5.input_sectors[0]) for i in range(1, L + 1)], special, meta)


def build_main(M61, M62):
    """Each non-t part is the union of a copy of the M61 part, a copy of the
    M62 part and the letters q(s), q(a). Theta_1 is th(s)1, the copy of M61,
    th(a)1; Theta_2 likewise with M62, and th(s)2 also locks the special
    input sector."""
    h1, h2 = M61.hardware, M62.hardware
    if h1.part_names != h2.part_names or h1.sector_names != h2.sector_names \
            or h1.tape_alphabets != h2.tape_alphabets:
        raise MachineError("mismatched shapes")
    roles = h1.roles or [None] * h1.n_parts
    tparts = {i for i, r in enumerate(roles) if r == "t"}
    sp = _Draft()
    sp.cyclic = h1.cyclic
    for i, pname in enumerate(h1.part_names):
        if i in tparts:
            sp.add_part(pname, ["t"], "t", "t", "t")
        else:
            letters = ["qs"] + [f"1/{_local(x)}" for x in h1.parts[i]] \
                + [f"2/{_local(x)}" for x in h2.parts[i]] + ["qa"]
            sp.add_part(pname, letters, "qs", "qa", roles[i])
    for j in range(1, h1.n_sectors + 1):
        sp.add_sector(h1.sector_name(j), [_local(x) for x in h1.alphabet(j)])
    sp.hist = {j: ([_local(x) for x in l], [_local(x) for x in r]) for j, (l, r) in h1.hist.items()}
    hw = sp.build()
    S = hw.n_sectors
    mir = M61.meta["mirror_sector"]
    inputs = sorted(set(M61.input_sectors) | {mir[j] for j in M61.input_sectors})
    special = M62.special_input_sector
    rules = []

    def pre(c, i, full):
        return full if i in tparts else f"{_ns(full)}.{c}/{_local(full)}"

    def tr(rid, c, src, dst, free, step):
        parts = []
        for i, pname in enumerate(hw.part_names):
            if i in tparts:
                parts.append((f"{pname}.t", None, f"{pname}.t", None))
            else:
                parts.append((src(i), None, dst(i), None))
        d = [LOCKED] * S
        for j in free:
            d[j - 1] = None
        rules.append(_mk(hw, rid, parts, d, {"m": c, "step": step, "transition": True}))

    for c, Mc in ((1, M61), (2, M62)):
        hc = Mc.hardware
        free = [j for j in inputs if not (c == 2 and j == special)]
        tr(f"th(s){c}", c, lambda i: f"{hw.part_names[i]}.qs",
           lambda i: pre(c, i, hc.start[i]), free, "(s)")
        for r in Mc.positive:
            parts, doms = _draft_of(r)
            new = [(pre(c, i, s), a, pre(c, i, d), b) for i, (s, a, d, b) in enumerate(parts)]
            tags = dict(r.tags)
            tags["m"] = c
            rules.append(_mk(hw, f"{c}/{r.id}", new, doms, tags))
        tr(f"th(a){c}", c, lambda i: pre(c, i, hc.end[i]),
           lambda i: f"{hw.part_names[i]}.qa", [], "(a)")
    meta = {k: v for k, v in M61.meta.items() if k not in ("m5",)}
    meta.update({"stage": "M", "m61": M61, "m62": M62, "m5": M61.meta["m5"],
                 "inputs_with_mirrors": inputs})
    return Machine("M", hw, rules, M61.input_sectors, special, meta)


# ---------------------------------------------------------------------------
# words, standard configurations, constructed histories

def parse_word(w, A=LETTERS):
    """Input word as a freely reduced list of (letter, sign); accepts text
    like ``"a1 a2^-1"``, a list of tokens, or (letter, sign) pairs."""
    if w is None:
        return []
    if isinstance(w, str):
        w = w.split()
    out = []
    for x in w:
        a, s = x if isinstance(x, tuple) else (x[:-3], -1) if x.endswith("^-1") else (x, 1)
        if a not in A:
            raise MachineError(f"letter {a} outside the input alphabet {list(A)}")
        if out and out[-1] == (a, -s):
            out.pop()
        else:
            out.append((a, s))
    return out


def word_text(w):
    return " ".join(a if s > 0 else a + "^-1" for a, s in w)


def power(u, n):
    out = []
    for x in list(u) * n:
        if out and out[-1] == (x[0], -x[1]):
            out.pop()
        else:
            out.append(x)
    return out


def _winv(w):
    return [(a, -s) for a, s in reversed(w)]


def _on(sector, w, prefix=""):
    return [(f"{sector}.{prefix}{a}", s) for a, s in w]


def _hist_word(H):
    return [(r.id, r.sign) if hasattr(r, "id") else tuple(r) for r in H]


def m1_of(M):
    st = M.meta.get("stage")
    if st is None or st in ("power_checker", "free_checker") or M.meta.get("kind") in ("power_checker", "free_checker"):
        return M
    for key in ("m1", "m2", "m2bar", "source", "m4bar", "m5"):
        if key in M.meta:
            return m1_of(M.meta[key])
    raise MachineError(f"cannot find the base machine of {M.name}")


def _stage(M):
    return M.meta.get("stage") or M.meta.get("kind")


def standard_config(M, kind, *args):
    """The named configurations of the tower stages.

    I2(w,H)/A2(H) on M2, I3/A3 on M3, I4/A4 on M4, I5(w1[,w2])/I5'(w1[,w2])/
    A5 on M5, I6(w) on M61 or M62, J6(w) on M62, I(w)/J(w)/W_ac on M. Words
    are input words, H a history of the base machine."""
    st = _stage(M)
    A = tuple(m1_of(M).meta.get("letters", LETTERS))
    need = {"I2": ("M2", 2), "A2": ("M2", 1), "I3": ("M3", 2), "A3": ("M3", 1),
            "I4": ("M4", 2), "A4": ("M4", 1), "I5": ("M5", (1, 2)), "I5'": ("M5", (1, 2)),
            "A5": ("M5", 0), "I6": (("M61", "M62"), 1), "J6": (("M61", "M62"), 1),
            "I": ("M", 1), "J": ("M", 1), "W_ac": ("M", 0)}
    if kind not in need:
        raise MachineError(f"unknown configuration kind {kind}")
    want, arity = need[kind]
    if st not in (want if isinstance(want, tuple) else (want,)):
        raise MachineError(f"{kind} is defined on {want}, not on {st}")
    ar = arity if isinstance(arity, tuple) else (arity,)
    if len(args) not in ar:
        raise MachineError(f"{kind} takes {arity} arguments")
    hw = M.hardware
    sn = hw.sector_names
    if kind in ("I2", "A2"):
        w, H = (parse_word(args[0], A), _hist_word(args[1])) if kind == "I2" else ([], _hist_word(args[0]))
        c = {}
        if w:
            c[M.input_sectors[0]] = _on(sn[M.input_sectors[0] - 1], w)
        for j in hw.hist:
            c[j] = _on(sn[j - 1], H, "l:" if kind == "I2" else "r:")
        return M.config("start" if kind == "I2" else "end", c)
    if kind in ("I3", "A3", "I4", "A4"):
        w, H = (parse_word(args[0], A), _hist_word(args[1])) if kind[0] == "I" else ([], _hist_word(args[0]))
        side = "l:" if kind[0] == "I" else "r:"
        c = {}
        j0 = M.input_sectors[0]
        rps = [t["RP"] for t in M.meta["triples"]]
        c[j0] = _on(sn[j0 - 1], w)
        for j in rps:
            c[j] = _on(sn[j - 1], H, side)
        if kind in ("I4", "A4"):
            mir = M.meta["mirror_sector"]
            for j in list(c):
                c[mir[j]] = _winv(c[j])
                c[mir[j]] = [(f"{sn[mir[j] - 1]}.{_local(x)}", s) for x, s in c[mir[j]]]
        return M.config("start" if kind[0] == "I" else "end", {j: v for j, v in c.items() if v})
    if kind in ("I5", "I5'", "A5"):
        if kind == "A5":
            return M.config("end")
        w1 = parse_word(args[0], A)
        w2 = parse_word(args[1], A) if len(args) > 1 else w1
        mir = M.meta["mirror_sector"]
        j = M.input_sectors[0] if kind == "I5" else M.sector("R0P1")
        c = {j: _on(sn[j - 1], w1), mir[j]: _on(sn[mir[j] - 1], _winv(w2))}
        states = "start" if kind == "I5" else M.rule("theta(12)").dst
        return M.config(states, c)
    if kind in ("I6", "J6", "I", "J"):
        w = parse_word(args[0], A)
        mir = M.meta["mirror_sector"]
        c = {}
        for j in M.input_sectors:
            if not (kind in ("J6", "J") and j == M.special_input_sector):
                c[j] = _on(sn[j - 1], w)
            c[mir[j]] = _on(sn[mir[j] - 1], _winv(w))
        return M.config("start", c)
    return M.config("end")


def accept_history(M, u, special=False):
    """Rules of the constructed accepting computation of the standard input
    configuration built from u^n (the 'J' variant through Theta_2 when
    ``special``). Pair with :func:`accept_input`."""
    M1 = m1_of(M)
    n = M1.meta.get("n", 1)
    u = parse_word(u, tuple(M1.meta["letters"]))
    H1 = base_accept_history(M1, u)
    if M1.meta["kind"] == "free_checker":
        n = 1
    w = power(u, n)
    h = _hist_word(H1)
    st = _stage(M)
    if M is M1:
        return H1
    if st == "M2":
        return M.history(h)
    if st == "M2bar":
        return M.history([(f"{x}(1)", s) for x, s in h])
    if st in ("M3", "M4", "M4bar"):
        return M.history(_m3_history(M.meta["kinds"], h))
    if st == "M5":
        return M.history(_m5_history(M.meta["k"], M.meta["kinds"], w, h))
    if st in ("M61", "M62"):
        return M.history(_m5_history(M.meta["k"], M.meta["kinds"], w, h))
    if st == "M":
        c = 2 if special else 1
        inner = _m5_history(M.meta["k"], M.meta["kinds"], w, h)
        return M.history([(f"th(s){c}", 1)] + [(f"{c}/{x}", s) for x, s in inner] + [(f"th(a){c}", 1)])
    raise MachineError(f"no constructed computation for stage {st}")


def accept_input(M, u, special=False):
    """Standard input configuration whose constructed computation is
    :func:`accept_history`."""
    M1 = m1_of(M)
    n = M1.meta.get("n", 1) if M1.meta["kind"] == "power_checker" else 1
    u = parse_word(u, tuple(M1.meta["letters"]))
    w = power(u, n)
    H1 = base_accept_history(M1, u)
    st = _stage(M)
    if M is M1:
        return base_input_config(M1, w)
    if st == "M2":
        return standard_config(M, "I2", w, H1)
    if st == "M2bar":
        hw = M.hardware
        c = {M.input_sectors[0]: _on(hw.sector_name(M.input_sectors[0]), w)}
        for t in M.meta["triples"]:
            c[t["RP"]] = _on(hw.sector_name(t["RP"]), _hist_word(H1), "l:")
        return M.config("start", {j: v for j, v in c.items() if v})
    if st == "M3":
        return standard_config(M, "I3", w, H1)
    if st == "M4":
        return standard_config(M, "I4", w, H1)
    if st == "M4bar":
        return _with_t(M, standard_config(M.meta["inner"], "I4", w, H1), "start")
    if st == "M5":
        return standard_config(M, "I5", w)
    if st in ("M61", "M62"):
        return standard_config(M, "J6" if st == "M62" else "I6", w)
    if st == "M":
        return standard_config(M, "J" if special else "I", w)
    raise MachineError(f"no standard input configuration for stage {st}")


def accept_target(M, u):
    """Final configuration of the constructed computation (the accept
    configuration, or A2/A3/A4/M2bar end configurations)."""
    M1 = m1_of(M)
    st = _stage(M)
    if st in ("M2", "M2bar", "M3", "M4", "M4bar"):
        u = parse_word(u, tuple(M1.meta["letters"]))
        H1 = base_accept_history(M1, u)
        if st == "M2":
            return standard_config(M, "A2", H1)
        if st == "M3":
            return standard_config(M, "A3", H1)
        if st == "M4":
            return standard_config(M, "A4", H1)
        if st == "M4bar":
            return _with_t(M, standard_config(M.meta["inner"], "A4", H1), "end")
        hw = M.hardware
        c = {t["RP"]: _on(hw.sector_name(t["RP"]), _hist_word(H1), "r:") for t in M.meta["triples"]}
        return M.config("end", {j: v for j, v in c.items() if v})
    return M.config("end")


def _with_t(M, W, states):
    names = W.hardware.names
    return M.config(states, {j + 1: [(names[abs(x)], 1 if x > 0 else -1) for x in u_]
                             for j, u_ in enumerate(W.sectors, start=1) if u_})


def _m3_history(kinds, h):
    out = []
    for ph, kind in enumerate(kinds, start=1):
        if kind == "RL":
            out += [(f"{ph}:x1[{x}]", s) for x, s in h] + [(f"{ph}:x1,2", 1)]
            out += [(f"{ph}:x2[{x}]", s) for x, s in reversed(h)]
        elif kind == "LR":
            out += [(f"{ph}:z1[{x}]", s) for x, s in reversed(h)] + [(f"{ph}:z1,2", 1)]
            out += [(f"{ph}:z2[{x}]", s) for x, s in h]
        elif kind == "M2bar":
            out += [(f"{ph}:{x}(1)", s) for x, s in h]
        else:
            out += [(f"{ph}:{x}(1)", s) for x, s in reversed(h)]
        if ph < len(kinds):
            out.append((f"chi({ph},{ph + 1})", 1))
    return out


def _m5_history(k, kinds, w, h):
    out = [(f"1/{a}", s) for a, s in reversed(w)] + [("theta(12)", 1)]
    for j in range(1, k + 1):
        o, e = 2 * j - 1, 2 * j
        out += [(f"2/z{o}[{a}]", s) for a, s in reversed(w)] + [(f"2/z{o},{e}", 1)]
        out += [(f"2/z{e}[{a}]", s) for a, s in w]
        if j < k:
            out.append((f"2/z{e},{e + 1}", 1))
    out.append(("theta(23)", 1))
    out += [(f"3/{x}", s) for x, s in h] + [("theta(34)", 1)]
    out += [(f"4/{x}", s) for x, s in _m3_history(kinds, h)] + [("theta(45)", 1)]
    out += [(f"5/{x}", s) for x, s in reversed(h)] + [("theta0", 1)]
    return out


# ---------------------------------------------------------------------------
# projections of configurations of M (and M6) onto one copy

def project(W, i, mirror=False, machine=None):
    """W(i): the subword with base {t(i)}B4(i); with ``mirror`` the subword
    W(i,m) whose base is the copy of the mirror half."""
    hw = W.hardware
    if not W.is_configuration():
        raise MachineError("projection needs a configuration")
    names = hw.part_names
    L = sum(1 for p in names if p.startswith("t("))
    if not 1 <= i <= L:
        raise MachineError(f"copy index {i} out of range 1..{L}")
    N0 = hw.n_parts // L
    a, b = (i - 1) * N0, i * N0 - 1
    if mirror:
        half = (N0 - 1) // 2
        a = a + 1 + half
    toks = [W.states[a]]
    for p in range(a + 1, b + 1):
        toks.extend(W.sectors[p - 1])
        toks.append(W.states[p])
    return AdmissibleWord(hw, toks)


def coordinate_shift(V, i, j):
    """Rename every index (i) to (j) in the part/sector names of V's letters."""
    hw = V.hardware
    L = sum(1 for p in hw.part_names if p.startswith("t("))
    for x in (i, j):
        if not 1 <= x <= L:
            raise MachineError(f"copy index {x} out of range 1..{L}")
    out = []
    for x in V.tokens:
        name = hw.names[abs(x)]
        ns, loc = name.split(".", 1)
        new = f"{ns.replace(f'({i})', f'({j})')}.{loc}"
        if new not in hw.ids:
            raise MachineError(f"{name} has no counterpart in copy {j}")
        out.append(hw.ids[new] * (1 if x > 0 else -1))
    return AdmissibleWord(hw, out)


# ---------------------------------------------------------------------------
# the whole tower

class Tower:
    """All stages built from one base machine and parameter set."""

    STAGES = ("m1", "m2", "m2bar", "m3", "m4", "m4bar", "m5", "m61", "m62", "m")

    def __init__(self, params=None, base="power_checker", A=LETTERS, upto="m"):
        self.params = params or Params()
        p = self.params
        self.m1 = make_base_machine(base, A, p.n)
        self.m2 = add_history_sectors(self.m1)
        self.m2bar = triple_base(self.m2)
        self.m3 = build_m3(self.m2bar, p.k)
        self.m4 = mirror_double(self.m3)
        self.m4bar = prepend_t(self.m4)
        if upto in ("m3", "m4", "m4bar"):
            return
        self.m5 = build_m5(self.m4bar, p.k, A)
        if upto == "m5":
            return
        self.m61 = cyclify(self.m5, p.L, False)
        self.m62 = cyclify(self.m5, p.L, True)
        self.m = build_main(self.m61, self.m62)

    @property
    def N(self):
        return self.m4bar.meta["N"]

    def stage(self, name):
        name = name.lower().replace("bar", "bar")
        if name not in self.STAGES or not hasattr(self, name):
            raise MachineError(f"unknown stage {name}")
        return getattr(self, name)


_TOWERS = {}


def build_tower(params=None, base="power_checker", A=LETTERS):
    params = params or Params()
    key = (params.n, params.k, params.L, base, tuple(A))
    if key not in _TOWERS:
        _TOWERS[key] = Tower(params, base, A)
    return _TOWERS[key]
