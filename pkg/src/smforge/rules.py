"""S-rules in normalized form: every part rewrites q_i -> a_i q_i' b_{i+1}
with at most one letter on each side."""

from dataclasses import dataclass

from .hardware import AdmissibilityError, AdmissibleWord, free_reduce, split_token


class RuleError(ValueError):
    pass


class NotApplicable(ValueError):
    pass


FULL = None
LOCKED = frozenset()


@dataclass(frozen=True)
class PartRewrite:
    src: str
    a: tuple  # (name, sign) or None
    dst: str
    b: tuple

    def inverse(self):
        inv = lambda t: None if t is None else (t[0], -t[1])
        return PartRewrite(self.dst, inv(self.a), self.src, inv(self.b))

    def text(self):
        tok = lambda t: "" if t is None else (t[0] if t[1] > 0 else t[0] + "^-1") + " "
        s = f"{self.src} -> {tok(self.a)}{self.dst}"
        if self.b is not None:
            s += " " + tok(self.b).strip()
        return s


def _as_token(t):
    if t is None or t == "":
        return None
    if isinstance(t, tuple):
        return t
    return split_token(t)


class SRule:
    """A rule over a fixed hardware.

    ``domains[j-1]`` is the domain in sector j: FULL (None), LOCKED (empty
    frozenset) or a frozenset of tape letter names.
    """

    __slots__ = ("id", "sign", "parts", "domains", "tags", "hardware",
                 "src", "dst", "a_ids", "b_ids", "dom_ids", "left_mult", "right_mult",
                 "checks", "_inv")

    def __init__(self, rule_id, sign, parts, domains, tags, hardware):
        self.id = rule_id
        self.sign = sign
        self.parts = tuple(parts)
        self.domains = tuple(domains)
        self.tags = dict(tags or {})
        self.hardware = hardware
        self._inv = None
        self._compile()

    def _compile(self):
        hw = self.hardware
        enc = lambda t: 0 if t is None else hw.ids[t[0]] * t[1]
        self.src = tuple(hw.ids[p.src] for p in self.parts)
        self.dst = tuple(hw.ids[p.dst] for p in self.parts)
        self.a_ids = tuple(enc(p.a) for p in self.parts)
        self.b_ids = tuple(enc(p.b) for p in self.parts)
        self.dom_ids = tuple(None if d is None else frozenset(hw.ids[n] for n in d)
                             for d in self.domains)
        n = hw.n_parts
        S = hw.n_sectors
        left, right = [], []
        for j in range(1, S + 1):
            lp = j - 1
            rp = j if j <= hw.N else 0
            b = self.b_ids[lp]
            a = self.a_ids[rp % n]
            left.append((b,) if b else ())
            right.append((a,) if a else ())
        self.left_mult = tuple(left)
        self.right_mult = tuple(right)
        self.checks = tuple((j, d) for j, d in enumerate(self.dom_ids, start=1) if d is not None)

    # identity

    @property
    def label(self):
        return self.id if self.sign > 0 else self.id + "^-1"

    def key(self):
        return (self.id, self.sign)

    def __eq__(self, other):
        return (isinstance(other, SRule) and self.id == other.id and self.sign == other.sign
                and self.parts == other.parts and self.domains == other.domains)

    def __hash__(self):
        return hash((self.id, self.sign))

    def __repr__(self):
        return f"SRule({self.label})"

    def inverse(self):
        if self._inv is None:
            inv = SRule(self.id, -self.sign, [p.inverse() for p in self.parts],
                        self.domains, self.tags, self.hardware)
            inv._inv = self
            self._inv = inv
        return self._inv

    def is_locked(self, j):
        d = self.domains[j - 1]
        return d is not None and len(d) == 0

    def locked_sectors(self):
        return tuple(j for j in range(1, len(self.domains) + 1) if self.is_locked(j))

    def text(self):
        hw = self.hardware
        bits = []
        for i, p in enumerate(self.parts):
            arrow = " ->l " if i + 1 <= hw.n_sectors and self.is_locked(i + 1) else " -> "
            bits.append(p.text().replace(" -> ", arrow))
        return f"{self.label}: [" + ", ".join(bits) + "]"

    def to_json(self):
        def tok(t):
            return None if t is None else (t[0] if t[1] > 0 else t[0] + "^-1")
        doms = []
        for d in self.domains:
            if d is None:
                doms.append("full")
            elif not d:
                doms.append("locked")
            else:
                doms.append(sorted(d))
        return {
            "id": self.id,
            "sign": self.sign,
            "parts": [[p.src, tok(p.a), p.dst, tok(p.b)] for p in self.parts],
            "domains": doms,
            "tags": {k: self.tags[k] for k in sorted(self.tags)},
        }


def invert(theta):
    return theta.inverse()


def _norm_domain(d, alph):
    if d is None or d == "full":
        return None
    if d == "locked":
        return LOCKED
    d = frozenset(d)
    if d == frozenset(alph):
        return None
    return d


def make_rule(parts, domains=None, tags=None, hardware=None, rule_id=None, sign=1):
    """Validate and build a normalized rule.

    ``parts`` lists one ``(src, a, dst, b)`` per part (a and b are letter
    tokens like ``"Y1.x^-1"`` or None); ``domains`` maps a sector index
    (1-based) to "full", "locked" or an iterable of tape letter names, or is
    a list with one entry per sector.
    """
    hw = hardware
    if hw is None:
        raise RuleError("make_rule needs a hardware")
    if rule_id is None:
        rule_id = (tags or {}).get("id")
    if rule_id is None:
        raise RuleError("rule needs an id")
    S = hw.n_sectors
    if isinstance(domains, (list, tuple)):
        dom = list(domains)
        if len(dom) != S:
            raise RuleError(f"{rule_id}: expected {S} domains")
    else:
        dom = [None] * S
        for j, d in (domains or {}).items():
            if not 1 <= j <= S:
                raise RuleError(f"{rule_id}: no sector {j}")
            dom[j - 1] = d
    dom = [_norm_domain(d, hw.alphabet(j)) for j, d in enumerate(dom, start=1)]
    for j, d in enumerate(dom, start=1):
        if d is not None and not d <= set(hw.alphabet(j)):
            raise RuleError(f"{rule_id}: domain of sector {j} outside its alphabet")
    if len(parts) != hw.n_parts:
        raise RuleError(f"{rule_id}: rule must have one part per part of the hardware")
    prs = []
    for i, p in enumerate(parts):
        src, a, dst, b = p
        a, b = _as_token(a), _as_token(b)
        if hw.part_of.get(src) != i or hw.part_of.get(dst) != i:
            raise RuleError(f"{rule_id}: part {i} rewrite {src}->{dst} leaves part {hw.part_names[i]}")
        lj = i if i > 0 else (hw.N + 1 if hw.cyclic else None)
        rj = i + 1 if i < hw.N else (hw.N + 1 if hw.cyclic else None)
        for t, j, side in ((a, lj, "left"), (b, rj, "right")):
            if t is None:
                continue
            if j is None or hw.sector_of.get(t[0]) != j:
                raise RuleError(f"{rule_id}: {side} letter {t[0]} of part {i} outside the adjacent sector alphabet")
            if dom[j - 1] is not None and not dom[j - 1]:
                raise RuleError(f"{rule_id}: part {i} writes {t[0]} into locked sector {hw.sector_name(j)}")
            if t[1] not in (1, -1):
                raise RuleError(f"{rule_id}: bad sign")
        prs.append(PartRewrite(src, a, dst, b))
    rule = SRule(rule_id, 1, prs, dom, tags, hw)
    return rule if sign > 0 else rule.inverse()


def rule_from_json(d, hardware):
    doms = []
    for x in d["domains"]:
        doms.append(x if isinstance(x, str) else list(x))
    parts = [tuple(p) for p in d["parts"]]
    sign = d.get("sign", 1)
    if sign < 0:
        # stored parts are those of the inverse; rebuild the positive rule
        flip = lambda t: None if t is None else (t[:-3] if t.endswith("^-1") else t + "^-1")
        parts = [(dst, flip(a), src, flip(b)) for src, a, dst, b in parts]
    return make_rule(parts, doms, d.get("tags"), hardware, d["id"], sign)


def applicable(W, theta):
    """True iff every state letter of W is a source letter of theta (or its
    inverse) and every sector word lies in theta's domain for that sector."""
    src = theta.src
    hw = W.hardware
    for q in W.states:
        if abs(q) != src[hw.index[abs(q)]]:
            return False
    dom = theta.dom_ids
    for u, j in zip(W.sectors, W.sector_ids):
        d = dom[j - 1]
        if d is None:
            continue
        for x in u:
            if abs(x) not in d:
                return False
    return True


def why_not_applicable(W, theta):
    hw = W.hardware
    for k, q in enumerate(W.states):
        i = hw.index[abs(q)]
        if abs(q) != theta.src[i]:
            return f"state letter {hw.token(q)} at position {k} is not the source letter {hw.names[theta.src[i]]}"
    for u, j in zip(W.sectors, W.sector_ids):
        d = theta.dom_ids[j - 1]
        if d is None:
            continue
        for x in u:
            if abs(x) not in d:
                what = "locked" if not d else "restricted"
                return f"sector {hw.sector_name(j)} is {what} and contains {hw.token(x)}"
    return None


def apply(W, theta):
    """W . theta: replace each q^{+-1} by (a q' b)^{+-1}, freely reduce, and
    cut tape letters that end up before the first or after the last state
    letter (the word has to stay admissible)."""
    if not applicable(W, theta):
        raise NotApplicable(why_not_applicable(W, theta))
    hw = W.hardware
    out = []
    a_ids, b_ids, dst = theta.a_ids, theta.b_ids, theta.dst
    for x in W.tokens:
        if hw.kind[abs(x)] == "state":
            i = hw.index[abs(x)]
            a, b = a_ids[i], b_ids[i]
            if x > 0:
                seq = (a, dst[i], b)
            else:
                seq = (-b, -dst[i], -a)
            for y in seq:
                if y:
                    if out and out[-1] == -y:
                        out.pop()
                    else:
                        out.append(y)
        else:
            if out and out[-1] == -x:
                out.pop()
            else:
                out.append(x)
    out = free_reduce(out)
    # letters written outside the outermost state letters are dropped
    lo, hi = 0, len(out)
    while lo < hi and hw.kind[abs(out[lo])] != "state":
        lo += 1
    while hi > lo and hw.kind[abs(out[hi - 1])] != "state":
        hi -= 1
    try:
        return AdmissibleWord(hw, out[lo:hi])
    except AdmissibilityError as e:
        raise AdmissibilityError(f"result of {theta.label} is reduced but not admissible: {e}")
