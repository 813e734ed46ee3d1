"""Machine hardware and admissible words.

Letters are interned per hardware as positive integers; a word is a tuple of
signed ints (negative = inverse letter). Full letter names are namespaced as
``<part or sector name>.<local name>``.
"""

import json
from dataclasses import dataclass

STATE = "state"
TAPE = "tape"
THETA = "theta"


class HardwareError(ValueError):
    pass


class AdmissibilityError(ValueError):
    pass


@dataclass(frozen=True)
class Letter:
    kind: str
    part_or_sector: int
    name: str
    sign: int = 1

    def inverse(self):
        return Letter(self.kind, self.part_or_sector, self.name, -self.sign)

    def __str__(self):
        return self.name if self.sign > 0 else self.name + "^-1"


def free_reduce(word):
    out = []
    for x in word:
        if out and out[-1] == -x:
            out.pop()
        else:
            out.append(x)
    return tuple(out)


def is_reduced(word):
    return all(word[i] != -word[i + 1] for i in range(len(word) - 1))


def invert_word(word):
    return tuple(-x for x in reversed(word))


def concat_reduce(*words):
    """Concatenate already reduced words, cancelling only at the seams."""
    out = list(words[0]) if words else []
    for w in words[1:]:
        i = 0
        while i < len(w) and out and out[-1] == -w[i]:
            out.pop()
            i += 1
        out.extend(w[i:])
    return tuple(out)


def split_token(tok):
    if tok.endswith("^-1"):
        return tok[:-3], -1
    return tok, 1


class Hardware:
    """Parts Q_0..Q_N, tape alphabets Y_1..Y_N (plus Y_{N+1} for the wrap
    sector of a cyclic machine), start and end letters.

    Sector j sits between part j-1 and part j; the wrap sector of a cyclic
    machine is sector N+1 and sits between Q_N and Q_0.
    """

    def __init__(self, part_names, parts, sector_names, tape_alphabets,
                 start, end, cyclic=False, roles=None, hist=None):
        self.part_names = tuple(part_names)
        self.parts = tuple(tuple(p) for p in parts)
        self.sector_names = tuple(sector_names)
        self.tape_alphabets = tuple(tuple(y) for y in tape_alphabets)
        self.start = tuple(start)
        self.end = tuple(end)
        self.cyclic = bool(cyclic)
        self.roles = tuple(roles) if roles is not None else None
        # historical sectors: sector index -> (left letters, right letters)
        self.hist = {int(j): (tuple(l), tuple(r)) for j, (l, r) in (hist or {}).items()}
        N = len(self.parts) - 1
        self.N = N
        want = N + 1 if cyclic else N
        if len(self.tape_alphabets) != want or len(self.sector_names) != want:
            raise HardwareError(f"expected {want} tape alphabets, got {len(self.tape_alphabets)}")
        self.names = [None]
        self.kind = [None]
        self.index = [None]
        self.ids = {}
        for i, p in enumerate(self.parts):
            if not p:
                raise HardwareError(f"part {self.part_names[i]} is empty")
            for name in p:
                self._intern(name, STATE, i)
        for j, y in enumerate(self.tape_alphabets, start=1):
            for name in y:
                self._intern(name, TAPE, j)
        for i in range(len(self.parts)):
            if self.start[i] not in self.parts[i] or self.end[i] not in self.parts[i]:
                raise HardwareError(f"start/end letter not in part {self.part_names[i]}")
        self.part_of = {n: i for i, p in enumerate(self.parts) for n in p}
        self.sector_of = {n: j for j, y in enumerate(self.tape_alphabets, 1) for n in y}
        self.alphabet_ids = [frozenset()] + [frozenset(self.ids[n] for n in y) for y in self.tape_alphabets]
        self.sector_alphabet = self._pair_map()
        self.hist_ids = {j: (frozenset(self.ids[n] for n in l), frozenset(self.ids[n] for n in r))
                         for j, (l, r) in self.hist.items()}

    def _intern(self, name, kind, idx):
        if not name or any(c.isspace() for c in name) or name.endswith("^-1"):
            raise HardwareError(f"bad letter name {name!r}")
        if name in self.ids:
            raise HardwareError(f"duplicate letter name {name}")
        self.ids[name] = len(self.names)
        self.names.append(name)
        self.kind.append(kind)
        self.index.append(idx)

    def _pair_map(self):
        N = self.N
        m = {}

        def put(key, j):
            if j is not None and 1 <= j <= len(self.tape_alphabets):
                m[key] = j

        for j in range(1, N + 1):
            put(((j - 1, 1), (j, 1)), j)
            put(((j, -1), (j - 1, -1)), j)
        for j in range(N + 1):
            put(((j, 1), (j, -1)), j + 1 if j < N else (N + 1 if self.cyclic else None))
            put(((j, -1), (j, 1)), j if j > 0 else (N + 1 if self.cyclic else None))
        if self.cyclic:
            put(((N, 1), (0, 1)), N + 1)
            put(((0, -1), (N, -1)), N + 1)
        return m

    # sizes and lookups

    @property
    def n_parts(self):
        return len(self.parts)

    @property
    def n_sectors(self):
        return len(self.tape_alphabets)

    def sector_name(self, j):
        return self.sector_names[j - 1]

    def alphabet(self, j):
        return self.tape_alphabets[j - 1]

    def letter(self, x):
        i = abs(x)
        return Letter(self.kind[i], self.index[i], self.names[i], 1 if x > 0 else -1)

    def token(self, x):
        return self.names[x] if x > 0 else self.names[-x] + "^-1"

    def encode(self, tokens):
        out = []
        for tok in tokens:
            if isinstance(tok, int):
                out.append(tok)
                continue
            if isinstance(tok, tuple):
                name, sign = tok
            else:
                name, sign = split_token(tok)
            if name not in self.ids:
                raise AdmissibilityError(f"unknown letter {name}")
            out.append(self.ids[name] * sign)
        return tuple(out)

    def encode_text(self, text):
        return self.encode(text.split())

    def text(self, word):
        return " ".join(self.token(x) for x in word)

    def is_state(self, x):
        return self.kind[abs(x)] == STATE

    def standard_base(self):
        return tuple((i, 1) for i in range(self.n_parts))

    def to_json(self):
        d = {
            "parts": [{"name": n, "letters": list(p), "start": s, "end": e}
                      for n, p, s, e in zip(self.part_names, self.parts, self.start, self.end)],
            "sectors": [{"name": n, "letters": list(y)}
                        for n, y in zip(self.sector_names, self.tape_alphabets)],
            "cyclic": self.cyclic,
        }
        if self.roles is not None:
            d["roles"] = list(self.roles)
        if self.hist:
            d["hist"] = {str(j): [list(l), list(r)] for j, (l, r) in sorted(self.hist.items())}
        return d

    @classmethod
    def from_json(cls, d):
        parts = d["parts"]
        return cls([p["name"] for p in parts], [p["letters"] for p in parts],
                   [s["name"] for s in d["sectors"]], [s["letters"] for s in d["sectors"]],
                   [p["start"] for p in parts], [p["end"] for p in parts],
                   d.get("cyclic", False), d.get("roles"), d.get("hist"))

    def __eq__(self, other):
        return isinstance(other, Hardware) and self.to_json() == other.to_json()

    def __hash__(self):
        return hash((self.part_names, self.parts, self.tape_alphabets, self.cyclic))

    def __repr__(self):
        return f"Hardware({'-'.join(self.part_names)}, cyclic={self.cyclic})"


def _qualify(ns, name):
    return name if "." in name else f"{ns}.{name}"


def make_hardware(parts, tape_alphabets, start_end=None, cyclic=False, roles=None, hist=None):
    """Build hardware from ``[(part_name, letters), ...]`` and
    ``[(sector_name, letters), ...]``.

    Local letter names are qualified with their part or sector name unless
    they already contain a dot. ``start_end`` is a list of (start, end) pairs;
    by default the first and last letter of each part are used.
    """
    pnames, plists = [], []
    for name, letters in parts:
        if "." in name:
            raise HardwareError(f"part name {name} contains a dot")
        pnames.append(name)
        plists.append([_qualify(name, x) for x in letters])
    snames, slists = [], []
    for name, letters in tape_alphabets:
        snames.append(name)
        slists.append([_qualify(name, x) for x in letters])
    if start_end is None:
        start = [p[0] for p in plists]
        end = [p[-1] for p in plists]
    else:
        start = [_qualify(pnames[i], s) for i, (s, _) in enumerate(start_end)]
        end = [_qualify(pnames[i], e) for i, (_, e) in enumerate(start_end)]
    return Hardware(pnames, plists, snames, slists, start, end, cyclic, roles, hist)


class AdmissibleWord:
    """A validated admissible word: q_0^e u_1 q_1^e ... u_k q_k^e."""

    __slots__ = ("hardware", "tokens", "base", "states", "sectors", "sector_ids", "_hash")

    def __init__(self, hardware, tokens, _checked=False):
        self.hardware = hardware
        self.tokens = tuple(tokens)
        states, sectors, sector_ids = _split(hardware, self.tokens)
        self.states = states
        self.sectors = sectors
        self.sector_ids = sector_ids
        self.base = tuple((hardware.index[abs(q)], 1 if q > 0 else -1) for q in states)
        self._hash = None

    @property
    def a_len(self):
        return len(self.tokens) - len(self.states)

    @property
    def q_len(self):
        return len(self.states)

    def is_configuration(self):
        return self.base == self.hardware.standard_base()

    def __eq__(self, other):
        if not isinstance(other, AdmissibleWord) or self.tokens != other.tokens:
            return False
        return self.hardware is other.hardware or self.hardware == other.hardware

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self.tokens)
        return self._hash

    def __str__(self):
        return self.hardware.text(self.tokens)

    def __repr__(self):
        return f"AdmissibleWord({self})"

    def inverse(self):
        return AdmissibleWord(self.hardware, invert_word(self.tokens))

    def base_text(self):
        hw = self.hardware
        return " ".join(hw.part_names[i] + ("" if s > 0 else "^-1") for i, s in self.base)

    def to_json(self):
        return {"tokens": [self.hardware.token(x) for x in self.tokens]}


def _split(hw, tokens):
    """Validate and split into state letters and sector words."""
    if not tokens:
        raise AdmissibilityError("empty word")
    if not is_reduced(tokens):
        raise AdmissibilityError("word is not freely reduced")
    if not hw.is_state(tokens[0]) or not hw.is_state(tokens[-1]):
        raise AdmissibilityError("admissible word must start and end with state letters")
    states = []
    sectors = []
    sector_ids = []
    cur = []
    for x in tokens:
        if hw.is_state(x):
            if states:
                sectors.append(tuple(cur))
            states.append(x)
            cur = []
        else:
            cur.append(x)
    for k in range(len(states) - 1):
        a, b = states[k], states[k + 1]
        key = ((hw.index[abs(a)], 1 if a > 0 else -1), (hw.index[abs(b)], 1 if b > 0 else -1))
        j = hw.sector_alphabet.get(key)
        if j is None:
            raise AdmissibilityError(f"illegal base pair {hw.token(a)} {hw.token(b)}")
        alph = hw.alphabet_ids[j]
        for x in sectors[k]:
            if abs(x) not in alph:
                raise AdmissibilityError(
                    f"tape letter {hw.token(x)} not in alphabet of sector {hw.sector_name(j)}")
        sector_ids.append(j)
    return tuple(states), tuple(sectors), tuple(sector_ids)


def parse_admissible(token_stream, hardware):
    """Parse tokens (text, list of token strings, or signed ids) into an
    AdmissibleWord; raises AdmissibilityError when the word is not admissible."""
    if isinstance(token_stream, str):
        token_stream = token_stream.split()
    return AdmissibleWord(hardware, hardware.encode(token_stream))


def word_from_json(d, hardware):
    return parse_admissible(d["tokens"], hardware)


def configuration(hardware, states, sectors):
    """Assemble a configuration from per-part state names/ids and per-sector
    words (lists of tokens or signed ids)."""
    toks = []
    for i, q in enumerate(states):
        if i > 0:
            toks.extend(hardware.encode(sectors[i - 1]))
        toks.append(hardware.encode([q])[0])
    return AdmissibleWord(hardware, toks)


def is_tame(W):
    """A configuration is tame when every P_iQ_i and Q_iR_i sector is empty
    and no historical sector mixes left-alphabet and right-alphabet letters.

    Needs part role marks ('P', 'Q', 'R', ...) on the hardware; historical
    sectors are read from ``hardware.hist``."""
    hw = W.hardware
    if hw.roles is None:
        raise NotImplementedError("tameness needs P/Q/R role annotations on the hardware")
    if not W.is_configuration():
        return False
    for j, u in enumerate(W.sectors, start=1):
        pair = {hw.roles[j - 1], hw.roles[j]}
        if pair in ({"P", "Q"}, {"R", "Q"}) and u:
            return False
        if j in hw.hist:
            left, right = hw.hist_ids[j]
            if any(abs(x) in left for x in u) and any(abs(x) in right for x in u):
                return False
    return True


def measures(W):
    out = {"a_len": W.a_len, "q_len": W.q_len, "base": W.base_text()}
    try:
        out["is_tame"] = is_tame(W)
    except NotImplementedError:
        out["is_tame"] = None
    return out


def dumps(obj):
    return json.dumps(obj, indent=1, sort_keys=True)
