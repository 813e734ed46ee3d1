"""Group presentations associated to a machine and the Burnside oracle.

Generators are the state letters and tape letters of the hardware (same ids
as in the hardware, so configuration words are presentation words as they
stand) followed by one theta letter per positive rule and sector position.
The theta letter with index i sits between parts i-1 and i; its wire name
is ``T.<rule id>.<i>``.
"""

import json
from collections import deque

from .hardware import free_reduce, invert_word, split_token

THETA_Q = "(theta,q)"
THETA_A = "(theta,a)"
HUB = "hub"
A_REL = "a-relation"
DISK = "disk"
KINDS = (THETA_Q, THETA_A, HUB, A_REL, DISK)
VARIANTS = ("M", "G", "Ga")


class PresentationError(ValueError):
    pass


class UnsupportedExponent(PresentationError):
    pass


# ---------------------------------------------------------------------------
# words up to cyclic permutation and inversion

def cyclic_reduce(w):
    w = free_reduce(w)
    i, j = 0, len(w)
    while j - i >= 2 and w[i] == -w[j - 1]:
        i += 1
        j -= 1
    return tuple(w[i:j])


def cyclic_key(w):
    """Canonical representative of the cyclic word w and its inverse."""
    w = tuple(w)
    if not w:
        return ()
    best = bk = None
    for v in (w, invert_word(w)):
        for r in range(len(v)):
            c = v[r:] + v[:r]
            k = _wire_order(c)
            if best is None or k < bk:
                best, bk = c, k
    return best


def _wire_order(w):
    # positive letters before their inverses, then by generator
    return tuple(x + x if x > 0 else -x - x + 1 for x in w)


# ---------------------------------------------------------------------------
# Burnside oracle

class BurnsideOracle:
    """Exact word problem in B(2,n) for n in {1, 2, 3}.

    The group is obtained by coset enumeration from the relators w^n with w
    ranging over reduced words of increasing length; the enumeration is
    accepted only once the resulting finite group has exponent n, which
    makes it equal to B(2,n). Elements are cosets of the trivial subgroup,
    i.e. vertices of the right Cayley graph; 0 is the identity.
    """

    SUPPORTED = (1, 2, 3)

    def __init__(self, n, max_cosets=100000):
        if n not in self.SUPPORTED:
            raise UnsupportedExponent(f"no exact oracle for exponent {n}")
        self.n = n
        self.mode = "exact"
        if n == 1:
            self.act = [[0, 0, 0, 0]]
            self.relator_length = 0
        else:
            self.act, self.relator_length = _enumerate_burnside(n, max_cosets)
        self.order = len(self.act)
        self._reps = None
        self._table = None

    # letters are +-1 (first generator) and +-2 (second)
    @staticmethod
    def _col(x):
        return {1: 0, -1: 1, 2: 2, -2: 3}[x]

    def element(self, w):
        c = 0
        act = self.act
        for x in w:
            c = act[c][self._col(x)]
        return c

    def __call__(self, w):
        return self.element(w) == 0

    def is_trivial(self, w):
        return self.element(w) == 0

    def representatives(self):
        """Shortest word for every element (breadth-first, fixed letter order)."""
        if self._reps is None:
            reps = {0: ()}
            todo = deque([0])
            while todo:
                c = todo.popleft()
                for x in (1, -1, 2, -2):
                    d = self.act[c][self._col(x)]
                    if d not in reps:
                        reps[d] = reps[c] + (x,)
                        todo.append(d)
            self._reps = [reps[c] for c in range(self.order)]
        return self._reps

    def table(self):
        """Multiplication table: table[g][h] = g*h."""
        if self._table is None:
            reps = self.representatives()
            self._table = [[self._mult(g, reps[h]) for h in range(self.order)]
                           for g in range(self.order)]
        return self._table

    def _mult(self, g, w):
        for x in w:
            g = self.act[g][self._col(x)]
        return g

    def check_axioms(self):
        """Closure, identity, inverses and the exponent law on the table."""
        t = self.table()
        m = self.order
        out = {"order": m, "closed": True, "identity": True, "inverses": True, "exponent": True}
        for g in range(m):
            row = t[g]
            if sorted(row) != list(range(m)):
                out["closed"] = False
            if row[0] != g or t[0][g] != g:
                out["identity"] = False
            if 0 not in row:
                out["inverses"] = False
            p = 0
            for _ in range(self.n):
                p = t[p][g]
            if p != 0:
                out["exponent"] = False
        out["ok"] = all(out[k] for k in ("closed", "identity", "inverses", "exponent"))
        return out


def _reduced_words(max_len, letters=(1, -1, 2, -2)):
    level = [()]
    for _ in range(max_len):
        nxt = []
        for w in level:
            for x in letters:
                if not w or w[-1] != -x:
                    nxt.append(w + (x,))
        yield from nxt
        level = nxt


def _enumerate_burnside(n, max_cosets):
    from sympy.combinatorics.fp_groups import FpGroup
    from sympy.combinatorics.free_groups import free_group

    F, a, b = free_group("a b")
    gen = {1: a, -1: a ** -1, 2: b, -2: b ** -1}
    for ell in range(2, 6):
        seen = set()
        rels = []
        for w in _reduced_words(ell):
            w = cyclic_reduce(w)
            k = cyclic_key(w)
            if not w or k in seen:
                continue
            seen.add(k)
            g = F.identity
            for x in w:
                g = g * gen[x]
            rels.append(g ** n)
        G = FpGroup(F, rels)
        try:
            C = G.coset_enumeration([], max_cosets=max_cosets)
        except ValueError:
            continue
        C.compress()
        C.standardize()
        # columns of the coset table follow C.A = [a, a^-1, b, b^-1]
        order = [C.A.index(a), C.A.index(a ** -1), C.A.index(b), C.A.index(b ** -1)]
        act = [[row[i] for i in order] for row in C.table]
        if _exponent_ok(n, act):
            return act, ell
    raise PresentationError(f"coset enumeration for exponent {n} did not close")


def _exponent_ok(n, act):
    col = BurnsideOracle._col
    reps = {0: ()}
    todo = deque([0])
    while todo:
        c = todo.popleft()
        for x in (1, -1, 2, -2):
            d = act[c][col(x)]
            if d not in reps:
                reps[d] = reps[c] + (x,)
                todo.append(d)
    if len(reps) != len(act):
        return False
    for w in reps.values():
        g = 0
        for x in w * n:
            g = act[g][col(x)]
        if g != 0:
            return False
    return True


_ORACLES = {}


def burnside_oracle(n):
    if n not in _ORACLES:
        _ORACLES[n] = BurnsideOracle(n)
    return _ORACLES[n]


def _letter_code(x, alphabet):
    """Map a letter (signed int 1/2, or token 'a1', 'a2^-1', (name, sign))
    to +-1/+-2."""
    if isinstance(x, int):
        if abs(x) not in (1, 2):
            raise PresentationError(f"letter {x} is not over a 2-letter alphabet")
        return x
    name, sign = split_token(x) if isinstance(x, str) else x
    if "." in name:
        name = name.rsplit(".", 1)[1]
    if name not in alphabet:
        raise PresentationError(f"letter {name} not in {alphabet}")
    return (alphabet.index(name) + 1) * sign


def burnside_trivial(n, w, alphabet=("a1", "a2")):
    """True iff the word w over two letters and their inverses is trivial in
    B(2,n). Accepts signed ints 1/2 or tokens like 'a1', 'a2^-1' (a text
    string is split on whitespace)."""
    if n not in BurnsideOracle.SUPPORTED:
        raise UnsupportedExponent(f"no exact oracle for exponent {n}")
    if isinstance(w, str):
        w = w.split()
    return burnside_oracle(n)(tuple(_letter_code(x, alphabet) for x in w))


def a_relator_codes(n, max_len):
    """Canonical trivial words over +-1/+-2, see :func:`enumerate_a_relators`."""
    if n not in BurnsideOracle.SUPPORTED:
        raise UnsupportedExponent(f"no exact oracle for exponent {n}")
    orc = burnside_oracle(n)
    seen = set()
    out = []
    for w in _reduced_words(max_len):
        if cyclic_reduce(w) != w:
            continue
        k = cyclic_key(w)
        if k in seen:
            continue
        seen.add(k)
        if orc(k):
            out.append(k)
    out.sort(key=lambda k: (len(k), _wire_order(k)))
    return out


def enumerate_a_relators(n, max_len, alphabet=("a1", "a2")):
    """Nonempty trivial words of length <= max_len, one per class under
    cyclic permutation and inversion (words are taken cyclically reduced;
    a word x y x^-1 is a conjugate of y and falls into y's class).

    Words are returned as tuples of (letter, sign), sorted by length and
    then by canonical form."""
    return [tuple((alphabet[abs(x) - 1], 1 if x > 0 else -1) for x in k)
            for k in a_relator_codes(n, max_len)]


# ---------------------------------------------------------------------------
# presentations

class Relator:
    __slots__ = ("kind", "word", "info")

    def __init__(self, kind, word, info=None):
        self.kind = kind
        self.word = tuple(word)
        self.info = info

    def __repr__(self):
        return f"Relator({self.kind}, len={len(self.word)})"


def theta_index(hw, j):
    """Index of the theta letter that runs along sector j."""
    return 0 if hw.cyclic and j == hw.N + 1 else j


class GroupPresentation:
    """Generators X = Q u Y u R and tagged relators.

    Words are tuples of signed generator ids; ids 1..len(hardware letters)
    coincide with the hardware ids.
    """

    def __init__(self, machine, variant="M", a_relator_bound=None, exponent=None):
        if variant not in VARIANTS:
            raise PresentationError(f"unknown variant {variant}")
        self.machine = machine
        self.variant = variant
        self.a_relator_bound = a_relator_bound
        self.exponent = exponent
        hw = machine.hardware
        self.hardware = hw
        self.names = list(hw.names)
        self.n_letters = len(hw.names) - 1
        self.theta_width = hw.N + 1 if hw.cyclic else hw.N + 2
        self.rule_ids = [r.id for r in machine.positive]
        self.rule_index = {rid: k for k, rid in enumerate(self.rule_ids)}
        for rid in self.rule_ids:
            for i in range(self.theta_width):
                self.names.append(f"T.{rid}.{i}")
        self.ids = {nm: k for k, nm in enumerate(self.names) if k}
        self.relators = []
        self._index = None
        self.special_alphabet = None
        self.oracle = None

    # generators

    @property
    def generators(self):
        return self.names[1:]

    def theta(self, rule_id, i):
        if self.hardware.cyclic:
            i %= self.theta_width
        return self.n_letters + 1 + self.rule_index[rule_id] * self.theta_width + i

    def theta_of(self, g):
        """(rule id, index) of a theta generator id (sign ignored), else None."""
        g = abs(g)
        if g <= self.n_letters:
            return None
        k, i = divmod(g - self.n_letters - 1, self.theta_width)
        return self.rule_ids[k], i

    def kind_of(self, g):
        g = abs(g)
        if g <= self.n_letters:
            return "q" if self.hardware.kind[g] == "state" else "a"
        return "theta"

    def token(self, x):
        return self.names[x] if x > 0 else self.names[-x] + "^-1"

    def text(self, w):
        return " ".join(self.token(x) for x in w)

    def encode(self, tokens):
        if isinstance(tokens, str):
            tokens = tokens.split()
        out = []
        for t in tokens:
            if isinstance(t, int):
                out.append(t)
                continue
            name, sign = split_token(t) if isinstance(t, str) else t
            if name not in self.ids:
                raise PresentationError(f"unknown generator {name}")
            out.append(self.ids[name] * sign)
        return tuple(out)

    # relators

    def add(self, kind, word, info=None):
        if kind not in KINDS:
            raise PresentationError(f"unknown relator kind {kind}")
        self.relators.append(Relator(kind, word, info))
        self._index = None

    def add_disk(self, W, certificate):
        """Disk relator W = 1 for a configuration already shown to be accepted
        by the computation ``certificate`` (start W, end the accept word)."""
        if self.variant == "M":
            raise PresentationError("disk relators need the hub (variant G or Ga)")
        if certificate.start.tokens != W.tokens:
            raise PresentationError("certificate does not start at W")
        if certificate.end.tokens != self.machine.accept_config().tokens:
            raise PresentationError("certificate does not end at the accept configuration")
        self.add(DISK, W.tokens, {"history": certificate.labels()})

    def count(self, kind=None):
        if kind is None:
            return len(self.relators)
        return sum(1 for r in self.relators if r.kind == kind)

    def _build_index(self):
        idx = {}
        for r in self.relators:
            if r.kind == DISK:
                continue
            idx.setdefault(cyclic_key(r.word), r.kind)
        self._index = idx

    def classify(self, w):
        """Kind of the relator that w is a cyclic permutation of (or the
        inverse of); a-relations are decided by the oracle when the variant
        is Ga, not by the truncated list. None when w is no relator."""
        if self._index is None:
            self._build_index()
        k = self._index.get(cyclic_key(tuple(w)))
        if k is not None:
            return k
        if self.variant == "Ga" and self.is_a_word(w) and w and self.oracle(self._a_codes(w)):
            return A_REL
        return None

    def is_a_word(self, w):
        alph = self.special_alphabet
        return alph is not None and all(abs(x) in alph for x in w)

    def _a_codes(self, w):
        return tuple(self.special_alphabet[abs(x)] * (1 if x > 0 else -1) for x in w)

    # output

    def to_text(self):
        lines = [f"# presentation {self.machine.name} variant={self.variant}"]
        if self.variant == "Ga":
            lines.append(f"# a-relators truncated at length {self.a_relator_bound} (exponent {self.exponent})")
        lines += [f"gen {g}" for g in self.generators]
        for r in self.relators:
            lines.append(f"rel {r.kind} {self.text(r.word)}")
        return "\n".join(lines) + "\n"

    def to_json(self):
        d = {"machine": self.machine.name, "variant": self.variant,
             "generators": self.generators,
             "relators": [{"kind": r.kind, "word": [self.token(x) for x in r.word]}
                          for r in self.relators]}
        if self.variant == "Ga":
            d["a_relator_bound"] = self.a_relator_bound
            d["exponent"] = self.exponent
        for r, rj in zip(self.relators, d["relators"]):
            if r.kind == DISK:
                rj["certificate"] = r.info["history"]
        return d

    def dumps(self):
        return json.dumps(self.to_json(), indent=1, sort_keys=True)


def theta_q_relator(P, rule, i):
    """theta_i^-1 q_i theta_{i+1} u_{i+1}^-1 q_i'^-1 v_i^-1 for part i of a
    positive rule q_i -> v_i q_i' u_{i+1}."""
    t0 = P.theta(rule.id, i)
    t1 = P.theta(rule.id, i + 1)
    w = [-t0, rule.src[i], t1]
    if rule.b_ids[i]:
        w.append(-rule.b_ids[i])
    w.append(-rule.dst[i])
    if rule.a_ids[i]:
        w.append(-rule.a_ids[i])
    return tuple(w)


def theta_a_relator(P, rule, j, a):
    t = P.theta(rule.id, theta_index(P.hardware, j))
    return (-t, a, t, -a)


def rule_domain(rule, j):
    hw = rule.hardware
    d = rule.dom_ids[j - 1]
    if d is None:
        return [hw.ids[x] for x in hw.alphabet(j)]
    return [hw.ids[x] for x in hw.alphabet(j) if hw.ids[x] in d]


def special_alphabet(machine):
    """Tape letter ids of the special input sector mapped to 1/2 by the
    order of the input alphabet."""
    hw = machine.hardware
    j = machine.special_input_sector
    if j is None:
        j = machine.input_sectors[0] if machine.input_sectors else None
    if j is None:
        raise PresentationError(f"{machine.name} has no input sector")
    letters = hw.alphabet(j)
    if len(letters) != 2:
        raise PresentationError("a-relations need a 2-letter input alphabet")
    return j, {hw.ids[x]: k + 1 for k, x in enumerate(letters)}


def emit_presentation(machine, variant="M", a_relator_bound=4, exponent=None):
    """M: (theta,q) and (theta,a) relators; G adds the hub; Ga adds the
    a-relators up to ``a_relator_bound`` (as found by the oracle) over the
    special input sector's alphabet."""
    if variant not in VARIANTS:
        raise PresentationError(f"unknown variant {variant}")
    if exponent is None:
        from .machines import MachineError, m1_of
        try:
            exponent = m1_of(machine).meta.get("n")
        except MachineError:
            exponent = None
    if variant == "Ga" and exponent not in BurnsideOracle.SUPPORTED:
        raise UnsupportedExponent(f"variant Ga needs an exact oracle; exponent {exponent} is unsupported")
    P = GroupPresentation(machine, variant, a_relator_bound if variant == "Ga" else None, exponent)
    hw = machine.hardware
    for r in machine.positive:
        for i in range(hw.n_parts):
            P.add(THETA_Q, theta_q_relator(P, r, i), (r.id, i))
    for r in machine.positive:
        for j in range(1, hw.n_sectors + 1):
            for a in rule_domain(r, j):
                P.add(THETA_A, theta_a_relator(P, r, j, a), (r.id, j))
    if variant in ("G", "Ga"):
        P.add(HUB, machine.accept_config().tokens)
    if variant == "Ga":
        j, alph = special_alphabet(machine)
        P.special_alphabet = alph
        P.oracle = burnside_oracle(exponent)
        back = {v: k for k, v in alph.items()}
        for k in a_relator_codes(exponent, a_relator_bound):
            P.add(A_REL, tuple(back[abs(c)] * (1 if c > 0 else -1) for c in k))
    return P


def parse_presentation_text(text):
    """Read the text format back into (generators, [(kind, tokens)])."""
    gens, rels = [], []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        head, _, rest = line.partition(" ")
        if head == "gen":
            gens.append(rest)
        elif head == "rel":
            kind, _, word = rest.partition(" ")
            if kind not in KINDS:
                raise PresentationError(f"unknown relator kind {kind}")
            rels.append((kind, word.split()))
        else:
            raise PresentationError(f"bad line: {line}")
    return gens, rels
