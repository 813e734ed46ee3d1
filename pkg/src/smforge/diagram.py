"""Van Kampen diagrams over the presentations of a machine.

A diagram is a combinatorial cell complex: directed edges labelled by signed
generator ids, cells given by their boundary cycles read counterclockwise
(lists of signed edge ids, -e meaning e traversed backwards) and a contour,
also read counterclockwise. A boundary edge occurs with the same sign in its
cell and in the contour; an interior edge occurs once with each sign.

Diagrams are only ever built by gluing (bands on computations, hubs on
annuli, pairs of disks along common contours).
"""

import json
from dataclasses import dataclass
from fractions import Fraction

from .computation import Computation
from .hardware import AdmissibleWord, free_reduce, invert_word
from .presentation import (PresentationError, A_REL, DISK, HUB, THETA_A, THETA_Q,
                           burnside_oracle, emit_presentation, special_alphabet, theta_index)
from .rules import NotApplicable, apply

A_CELL = "a-cell"
ZERO = "0-cell"
CELL_KINDS = (THETA_Q, THETA_A, A_CELL, DISK, HUB, ZERO)


class DiagramError(ValueError):
    pass


# ---------------------------------------------------------------------------
# presentations used for labels

_PRESENTATIONS = {}


def presentation_for(machine):
    """Presentation whose generators label diagrams over ``machine`` (the Ga
    variant when an exact Burnside oracle exists for the exponent, else G)."""
    key = id(machine)
    hit = _PRESENTATIONS.get(key)
    if hit is not None and hit.machine is machine:
        return hit
    try:
        P = emit_presentation(machine, "Ga", 4)
    except PresentationError:
        P = emit_presentation(machine, "G")
    _PRESENTATIONS[key] = P
    return P


# ---------------------------------------------------------------------------

class Diagram:
    """Mutable while being glued; call :meth:`finalize` before reading."""

    def __init__(self, presentation):
        self.P = presentation
        self.label = [0]
        self.tail = [0]
        self.head = [0]
        self.cells = []
        self.kinds = []
        self.info = []
        self.contour = ()
        self.holes = []
        self.meta = {}
        self.n_vertices = 0
        self._epar = [0]
        self._vpar = []
        self._occ = None

    # construction

    def new_vertex(self):
        self._vpar.append(self.n_vertices)
        self.n_vertices += 1
        return self.n_vertices - 1

    def new_edge(self, label, tail, head):
        self.label.append(label)
        self.tail.append(tail)
        self.head.append(head)
        e = len(self.label) - 1
        self._epar.append(e)
        return e

    def new_path(self, labels, start=None, end=None):
        v = self.new_vertex() if start is None else start
        out = []
        for k, x in enumerate(labels):
            w = end if (end is not None and k == len(labels) - 1) else self.new_vertex()
            out.append(self.new_edge(x, v, w))
            v = w
        return out

    def add_cell(self, kind, boundary, info=None):
        if kind not in CELL_KINDS:
            raise DiagramError(f"unknown cell kind {kind}")
        self.cells.append(tuple(boundary))
        self.kinds.append(kind)
        self.info.append(info)
        self._occ = None
        return len(self.cells) - 1

    def fs(self, x):
        """Signed representative of the edge occurrence x."""
        sign = 1 if x > 0 else -1
        e = abs(x)
        par = self._epar
        path = []
        while abs(par[e]) != e:
            path.append(e)
            if par[e] < 0:
                sign = -sign
            e = abs(par[e])
        root = e
        # path compression: each node points to root with its own sign
        acc = 1
        for p in reversed(path):
            if par[p] < 0:
                acc = -acc
            par[p] = root * acc
        return root * sign

    def vfind(self, v):
        vp = self._vpar
        r = v
        while vp[r] != r:
            r = vp[r]
        while vp[v] != r:
            vp[v], v = r, vp[v]
        return r

    def _vunion(self, a, b):
        a, b = self.vfind(a), self.vfind(b)
        if a != b:
            self._vpar[max(a, b)] = min(a, b)

    def lab(self, x):
        return self.label[x] if x > 0 else -self.label[-x]

    def src(self, x):
        return self.tail[x] if x > 0 else self.head[-x]

    def dst(self, x):
        return self.head[x] if x > 0 else self.tail[-x]

    def identify(self, x, y):
        """Glue edge occurrence x onto occurrence y (same label, same
        direction)."""
        rx, ry = self.fs(x), self.fs(y)
        if self.lab(rx) != self.lab(ry):
            raise DiagramError(f"cannot glue {self.P.token(self.lab(rx))} onto {self.P.token(self.lab(ry))}")
        self._vunion(self.src(rx), self.src(ry))
        self._vunion(self.dst(rx), self.dst(ry))
        if abs(rx) == abs(ry):
            if rx != ry:
                raise DiagramError("gluing an edge onto its own inverse")
            return
        self._epar[abs(rx)] = ry if rx > 0 else -ry

    def finalize(self):
        """Resolve gluings and renumber edges and vertices."""
        used = {}
        order = []

        def m(x):
            r = self.fs(x)
            e = abs(r)
            if e not in used:
                used[e] = len(order) + 1
                order.append(e)
            return used[e] if r > 0 else -used[e]

        cells = [tuple(m(x) for x in b) for b in self.cells]
        contour = tuple(m(x) for x in self.contour)
        holes = [tuple(m(x) for x in h) for h in self.holes]
        vmap = {}

        def vm(v):
            r = self.vfind(v)
            if r not in vmap:
                vmap[r] = len(vmap)
            return vmap[r]

        label, tail, head = [0], [0], [0]
        for e in order:
            label.append(self.label[e])
            tail.append(vm(self.tail[e]))
            head.append(vm(self.head[e]))
        self.label, self.tail, self.head = label, tail, head
        self.cells, self.contour, self.holes = cells, contour, holes
        self.n_vertices = len(vmap)
        self._epar = list(range(len(label)))
        self._vpar = list(range(self.n_vertices))
        fix = self.meta.get("_remap")
        if fix:
            for key in fix:
                self.meta[key] = [m(x) for x in self.meta[key]]
            self.meta.pop("_remap")
        self._occ = None
        return self

    def absorb(self, other, mirror=False):
        """Copy the cells of ``other`` into self (reversed if ``mirror``);
        returns a function mapping ``other``'s edge occurrences to self's."""
        if other.P is not self.P:
            raise DiagramError("diagrams over different presentations")
        voff = self.n_vertices
        for _ in range(other.n_vertices):
            self.new_vertex()
        eoff = len(self.label) - 1
        for e in range(1, len(other.label)):
            self.new_edge(other.label[e], other.tail[e] + voff, other.head[e] + voff)

        def m(x):
            return x + eoff if x > 0 else x - eoff

        for b, k, inf in zip(other.cells, other.kinds, other.info):
            b = tuple(m(x) for x in b)
            if mirror:
                b = invert_word(b)
            self.add_cell(k, b, inf)
        return m

    # reading

    @property
    def n_edges(self):
        return len(self.label) - 1

    def word(self, path):
        return tuple(self.lab(x) for x in path)

    def boundary_label(self):
        return self.word(self.contour)

    def cell_label(self, c):
        return self.word(self.cells[c])

    def occurrences(self):
        """occ[x] = (where, position) for every signed occurrence x; where is
        a cell index, 'c' for the contour or ('h', k) for hole k."""
        if self._occ is None:
            occ = {}
            for c, b in enumerate(self.cells):
                for p, x in enumerate(b):
                    occ.setdefault(x, []).append((c, p))
            for p, x in enumerate(self.contour):
                occ.setdefault(x, []).append(("c", p))
            for h, b in enumerate(self.holes):
                for p, x in enumerate(b):
                    occ.setdefault(x, []).append((("h", h), p))
            self._occ = occ
        return self._occ

    def count(self, kind):
        return sum(1 for k in self.kinds if k == kind)

    def copy(self):
        d = Diagram(self.P)
        d.label, d.tail, d.head = list(self.label), list(self.tail), list(self.head)
        d.cells, d.kinds, d.info = list(self.cells), list(self.kinds), list(self.info)
        d.contour, d.holes = tuple(self.contour), list(self.holes)
        d.meta = dict(self.meta)
        d.n_vertices = self.n_vertices
        d._epar = list(range(len(d.label)))
        d._vpar = list(range(d.n_vertices))
        return d

    def edge_class(self, x):
        return self.P.kind_of(self.label[abs(x)])

    def summary(self):
        return {"cells": len(self.cells), "edges": self.n_edges, "vertices": self.n_vertices,
                "contour": len(self.contour), "kinds": {k: self.count(k) for k in CELL_KINDS if self.count(k)}}

    def __repr__(self):
        return f"Diagram(cells={len(self.cells)}, contour={len(self.contour)})"

    # export

    def to_json(self):
        P = self.P
        d = {
            "machine": P.machine.name,
            "edges": [[P.token(self.label[e]), self.tail[e], self.head[e]] for e in range(1, len(self.label))],
            "cells": [{"kind": k, "boundary": list(b)} for k, b in zip(self.kinds, self.cells)],
            "contour": list(self.contour),
        }
        for c, inf in zip(d["cells"], self.info):
            if inf and "certificate" in inf:
                c["certificate"] = inf["certificate"]
        if self.holes:
            d["holes"] = [list(h) for h in self.holes]
        meta = {k: v for k, v in self.meta.items() if not k.startswith("_") and _plain(v)}
        if meta:
            d["meta"] = meta
        return d

    def dumps(self):
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))

    def to_dot(self, bands=True):
        """Cells as nodes (shaped by kind), shared edges as dual edges; with
        ``bands`` every maximal theta-band gets its own color."""
        shape = {THETA_Q: "box", THETA_A: "ellipse", A_CELL: "diamond", DISK: "doubleoctagon",
                 HUB: "doubleoctagon", ZERO: "point"}
        palette = ["red", "blue", "darkgreen", "orange", "purple", "brown", "cyan4", "magenta"]
        color = {}
        if bands:
            for k, b in enumerate(maximal_bands(self, "theta")):
                for c in b.cells:
                    color[c] = palette[k % len(palette)]
        lines = ["graph diagram {", "  node [fontsize=8];"]
        for c, kind in enumerate(self.kinds):
            col = color.get(c, "black")
            lines.append(f'  c{c} [shape={shape[kind]}, color={col}, label="{kind}"];')
        lines.append('  outer [shape=plaintext, label="contour"];')
        occ = self.occurrences()
        for e in range(1, len(self.label)):
            ends = [w for w, _ in occ.get(e, [])] + [w for w, _ in occ.get(-e, [])]
            if len(ends) == 2:
                a, b = (f"c{w}" if isinstance(w, int) else "outer" for w in ends)
                name = self.P.token(self.label[e])
                lines.append(f'  {a} -- {b} [label="{name}", fontsize=6];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def _plain(v):
    try:
        json.dumps(v)
        return True
    except TypeError:
        return False


def diagram_from_json(d, presentation):
    P = presentation
    D = Diagram(P)
    vmax = 0
    for _, t, h in d["edges"]:
        vmax = max(vmax, t, h)
    for _ in range(vmax + 1 if d["edges"] else 0):
        D.new_vertex()
    for name, t, h in d["edges"]:
        D.new_edge(P.encode([name])[0], t, h)
    for c in d["cells"]:
        info = {"certificate": c["certificate"]} if "certificate" in c else None
        D.add_cell(c["kind"], c["boundary"], info)
    D.contour = tuple(d["contour"])
    D.holes = [tuple(h) for h in d.get("holes", [])]
    D.meta = dict(d.get("meta", {}))
    return D


# ---------------------------------------------------------------------------
# theta-bands on one rule application

def _right_sector(hw, x):
    i = hw.index[abs(x)]
    if hw.kind[abs(x)] == "tape":
        return i
    return i + 1 if x > 0 else i


def _left_sector(hw, x):
    i = hw.index[abs(x)]
    if hw.kind[abs(x)] == "tape":
        return i
    return i if x > 0 else i + 1


def _glue_band(d, rule, X, xe, info=None):
    """Lay a theta-band of the positive rule ``rule`` on the path ``xe``
    labelled X. Returns (cell ids, folded top occurrences, left and right
    theta edges)."""
    P = d.P
    hw = rule.hardware
    n = len(X)
    bv = [d.src(x) for x in xe] + [d.dst(xe[-1])]
    th = []
    for p in range(n + 1):
        j = _left_sector(hw, X[0]) if p == 0 else _right_sector(hw, X[p - 1])
        th.append(d.new_edge(P.theta(rule.id, theta_index(hw, j)), bv[p], d.new_vertex()))
    a_ids, b_ids, dst = rule.a_ids, rule.b_ids, rule.dst
    cells = []
    top = []
    for k, x in enumerate(X):
        if hw.kind[abs(x)] == "state":
            i = hw.index[abs(x)]
            seq = [y for y in (a_ids[i], dst[i], b_ids[i]) if y]
            if x < 0:
                seq = [-y for y in reversed(seq)]
            kind = THETA_Q
        else:
            seq = [x]
            kind = THETA_A
        piece = d.new_path(seq, d.head[th[k]], d.head[th[k + 1]])
        cells.append(d.add_cell(kind, [xe[k], th[k + 1]] + [-e for e in reversed(piece)] + [-th[k]], info))
        top.extend(piece)
    stack = []
    for e in top:
        if stack and d.label[abs(stack[-1])] * (1 if stack[-1] > 0 else -1) == -d.label[e]:
            d.identify(e, -stack.pop())
        else:
            stack.append(e)
    return cells, stack, th[0], th[n]


def trapezium_from_computation(c):
    """The trapezium of a reduced computation: bottom W_0, top W_t, sides
    the theta-edge copies of the history. Contour factorization bottom,
    right side (upwards), top (backwards), left side (downwards)."""
    if c.t < 1:
        raise DiagramError("a trapezium needs a nonempty history")
    if not c.is_reduced():
        raise DiagramError("history is not reduced")
    M = c.machine
    P = presentation_for(M)
    d = Diagram(P)
    trace = c.trace
    cur = d.new_path(trace[0].tokens)
    bottom = list(cur)
    left, right = [], []
    for t, r in enumerate(c.history, start=1):
        info = {"step": t}
        if r.sign > 0:
            cells, top, l, rr = _glue_band(d, r, trace[t - 1].tokens, cur, info)
            _check_top(d, top, trace[t].tokens, r)
            cur = top
            left.append(l)
            right.append(rr)
        else:
            xe = d.new_path(trace[t].tokens)
            cells, top, l, rr = _glue_band(d, r.inverse(), trace[t].tokens, xe, info)
            _check_top(d, top, trace[t - 1].tokens, r)
            for a, b in zip(top, cur):
                d.identify(a, b)
            for k in cells:
                d.cells[k] = invert_word(d.cells[k])
            cur = xe
            left.append(-l)
            right.append(-rr)
    top_path = list(cur)
    d.contour = tuple(bottom + right + [-e for e in reversed(top_path)] + [-e for e in reversed(left)])
    d.meta = {"kind": "trapezium", "factorization": [len(bottom), len(right), len(top_path), len(left)],
              "height": c.t}
    d.machine = M
    return d.finalize()


def _check_top(d, top, want, r):
    got = tuple(d.lab(x) for x in top)
    if got != tuple(want):
        raise DiagramError(f"band of {r.label} does not reproduce the next word")


def trapezium_factorization(d):
    """(bottom, right, top, left) edge occurrences: bottom and top read left
    to right, sides read upwards."""
    f = d.meta.get("factorization")
    if d.meta.get("kind") != "trapezium" or f is None:
        raise DiagramError("not a trapezium")
    nb, nr, nt, nl = f
    C = d.contour
    if len(C) != nb + nr + nt + nl or min(f) < 1:
        raise DiagramError("contour does not match the trapezium factorization")
    bottom = list(C[:nb])
    right = list(C[nb:nb + nr])
    top = [-x for x in reversed(C[nb + nr:nb + nr + nt])]
    left = [-x for x in reversed(C[nb + nr + nt:])]
    if nr != nl:
        raise DiagramError("sides of different heights")
    for x in right + left:
        if d.edge_class(x) != "theta":
            raise DiagramError("trapezium side contains a non-theta edge")
    for path in (bottom, top):
        if d.edge_class(path[0]) != "q" or d.edge_class(path[-1]) != "q":
            raise DiagramError("trapezium bottom and top must start and end with q-edges")
        if any(d.edge_class(x) == "theta" for x in path):
            raise DiagramError("theta-edge on the bottom or top")
    return bottom, right, top, left


def band_from_right(d, f, stop):
    """Walk a theta-band leftwards from the upward occurrence f of its
    rightmost theta-edge until an occurrence in ``stop`` (a set) is reached.
    Returns (cells right to left, bottom word, top word, final occurrence)."""
    occ = d.occurrences()
    cells, bot_parts, top_parts = [], [], []
    x = f
    seen = set()
    while True:
        here = [w for w in occ.get(x, []) if isinstance(w[0], int)]
        if not here:
            raise DiagramError("theta-band leaves the diagram")
        c, p = here[0]
        if c in seen:
            raise DiagramError("theta-band closes up")
        seen.add(c)
        b = d.cells[c]
        rot = b[p:] + b[:p]
        others = [k for k in range(1, len(rot)) if d.edge_class(rot[k]) == "theta"]
        if len(others) != 1:
            raise DiagramError("cell without exactly two theta-edges inside a theta-band")
        g = rot[others[0]]
        top_parts.append(rot[1:others[0]])
        bot_parts.append(rot[others[0] + 1:])
        cells.append(c)
        if g in stop:
            return cells, bot_parts, top_parts, g
        x = -g


def computation_from_trapezium(d):
    """Read the computation back: one rule per theta-band, each band a
    single application (its bottom label times the rule is its top)."""
    bottom, right, top, left = trapezium_factorization(d)
    P = d.P
    M = P.machine
    hw = M.hardware
    left_down = {-x: k for k, x in enumerate(left)}
    history = []
    words = []
    for k, f in enumerate(right):
        cells, bots, tops, g = band_from_right(d, f, left_down)
        if left_down[g] != k:
            raise DiagramError(f"theta-band {k + 1} ends on the wrong left edge")
        lab = d.lab(f)
        th = P.theta_of(lab)
        if th is None:
            raise DiagramError("side edge is not a theta-edge")
        lg = d.lab(-g)
        if (lg > 0) != (lab > 0) or P.theta_of(lg)[0] != th[0]:
            raise DiagramError("a theta-band of two different letters")
        rule = M.rule(th[0], 1 if lab > 0 else -1)
        bw = free_reduce(tuple(d.lab(x) for part in reversed(bots) for x in part))
        tw = free_reduce(tuple(d.lab(-x) for part in reversed(tops) for x in reversed(part)))
        history.append(rule)
        words.append((bw, tw))
    for a, b in zip(history, history[1:]):
        if a.id == b.id and a.sign == -b.sign:
            raise DiagramError("side history is not reduced")
    if words[0][0] != d.word(bottom):
        raise DiagramError("first band does not sit on the bottom")
    if words[-1][1] != d.word(top):
        raise DiagramError("last band does not reach the top")
    trace = []
    for k, (rule, (bw, tw)) in enumerate(zip(history, words)):
        if k and words[k - 1][1] != bw:
            raise DiagramError(f"bands {k} and {k + 1} do not share a side")
        try:
            U = AdmissibleWord(hw, bw)
            V = AdmissibleWord(hw, tw)
        except ValueError as ex:
            raise DiagramError(f"band {k + 1}: {ex}")
        try:
            if apply(U, rule).tokens != V.tokens:
                raise DiagramError(f"band {k + 1}: bottom times {rule.label} is not the top")
        except NotApplicable as ex:
            raise DiagramError(f"band {k + 1}: {ex}")
        if not trace:
            trace.append(U)
        trace.append(V)
    return Computation(M, trace[0], history, trace)


# ---------------------------------------------------------------------------
# bands and annuli

@dataclass
class Band:
    kind: str
    cells: list
    edges: list
    annular: bool

    def __len__(self):
        return len(self.cells)


_BAND_CELLS = {"theta": (THETA_Q, THETA_A), "q": (THETA_Q,), "a": (THETA_A,)}


def _other(d, c, p, kind):
    """Position of the other ``kind``-edge of cell c (entered at p), or None
    when c cannot carry a band of that kind."""
    if d.kinds[c] not in _BAND_CELLS[kind]:
        return None
    b = d.cells[c]
    ks = [k for k, x in enumerate(b) if d.edge_class(x) == kind]
    if len(ks) != 2 or p not in ks:
        return None
    return ks[0] if ks[1] == p else ks[1]


def trace_band(d, seed, kind):
    """The maximal band of ``kind`` (q, a or theta) through the edge
    ``seed``; ``annular`` is set when it closes on itself."""
    if kind not in _BAND_CELLS:
        raise DiagramError(f"unknown band kind {kind}")
    e = abs(seed)
    if not 1 <= e <= d.n_edges:
        raise DiagramError(f"no edge {seed}")
    if d.edge_class(e) != kind:
        raise DiagramError(f"edge {e} is not a {kind}-edge")
    occ = d.occurrences()

    def walk(x):
        cells, edges = [], []
        seen = set()
        while True:
            nxt = None
            for w, p in occ.get(x, []):
                if isinstance(w, int) and w not in seen:
                    q = _other(d, w, p, kind)
                    if q is not None:
                        nxt = (w, q)
                        break
            if nxt is None:
                return cells, edges, False
            w, q = nxt
            cells.append(w)
            seen.add(w)
            y = d.cells[w][q]
            if abs(y) == e:
                return cells, edges, True
            edges.append(abs(y))
            x = -y

    c1, e1, closed = walk(e)
    if closed:
        return Band(kind, c1, [e] + e1, True)
    c2, e2, _ = walk(-e)
    cells = list(reversed(c2)) + c1
    edges = list(reversed(e2)) + [e] + e1
    return Band(kind, cells, edges, False)


def maximal_bands(d, kind):
    seen = set()
    out = []
    for e in range(1, d.n_edges + 1):
        if e in seen or d.edge_class(e) != kind:
            continue
        b = trace_band(d, e, kind)
        seen.update(b.edges)
        out.append(b)
    return out


ANNULUS_KINDS = ("q", "theta", "a", "(theta,q)", "(theta,a)")


def check_no_annuli(d, kinds=ANNULUS_KINDS):
    """Report annuli of the requested kinds: q-, theta- and a-annuli are
    bands closing on themselves; a (theta,q)- or (theta,a)-annulus shows up
    as a theta-band meeting one q- or a-band in two or more cells."""
    report = {k: [] for k in kinds}
    bands = {}
    mixed = any(k.startswith("(") for k in kinds)
    for k in ("q", "theta", "a"):
        if k in kinds or f"(theta,{k})" in kinds or (k == "theta" and mixed):
            bands[k] = maximal_bands(d, k)
    for k in ("q", "theta", "a"):
        if k in kinds:
            report[k] = [b.cells[:3] for b in bands[k] if b.annular]
    for k in ("q", "a"):
        key = f"(theta,{k})"
        if key not in kinds:
            continue
        tb = {}
        for n, b in enumerate(bands["theta"]):
            for c in b.cells:
                tb[c] = n
        for b in bands[k]:
            hits = {}
            for c in b.cells:
                if c in tb:
                    hits.setdefault(tb[c], []).append(c)
            for n, cs in hits.items():
                if len(cs) >= 2:
                    report[key].append(cs[:2])
    report["ok"] = all(not report[k] for k in kinds)
    return report


def encloses(d, cells, target):
    """True when the cell set ``cells`` separates cell ``target`` from the
    contour (every path of adjacent cells from target to the contour meets
    ``cells``)."""
    block = set(cells)
    occ = d.occurrences()
    seen = {target}
    todo = [target]
    while todo:
        c = todo.pop()
        for x in d.cells[c]:
            for w, _ in occ.get(-x, []) + occ.get(x, []):
                if w == "c":
                    return False
                if isinstance(w, int) and w not in seen and w not in block:
                    seen.add(w)
                    todo.append(w)
    return True


def hub_rings(d):
    """Theta-annuli of a disk diagram split into those surrounding a hub
    (the glued sides of the trapezium in the hub construction) and the rest."""
    hubs = [c for c, k in enumerate(d.kinds) if k == HUB]
    around, other = [], []
    for b in maximal_bands(d, "theta"):
        if not b.annular:
            continue
        if any(encloses(d, b.cells, h) for h in hubs):
            around.append(b)
        else:
            other.append(b)
    return around, other


def theta_annulus_fixture(machine, rule_id=None, letters=None):
    """A theta-band of (theta,a)-cells over a word in one sector whose two
    end theta-edges are glued together: a theta-annulus (a diagram on an
    annulus, with the inner boundary stored as a hole)."""
    P = presentation_for(machine)
    hw = machine.hardware
    pick = None
    for r in machine.positive:
        if rule_id is not None and r.id != rule_id:
            continue
        for j in range(1, hw.N + 1):
            d_ = r.dom_ids[j - 1]
            alph = [hw.ids[x] for x in hw.alphabet(j)] if d_ is None else sorted(d_)
            if alph:
                pick = (r, j, alph)
                break
        if pick:
            break
    if pick is None:
        raise DiagramError("no rule with a nonempty domain")
    r, j, alph = pick
    word = [hw.ids[x] for x in letters] if letters else alph[:2]
    d = Diagram(P)
    bot = d.new_path(word)
    X = tuple(word)
    t = P.theta(r.id, theta_index(hw, j))
    v = [d.src(x) for x in bot] + [d.dst(bot[-1])]
    th = [d.new_edge(t, v[p], d.new_vertex()) for p in range(len(X) + 1)]
    tops = []
    for k, x in enumerate(X):
        (e,) = d.new_path([x], d.head[th[k]], d.head[th[k + 1]])
        d.add_cell(THETA_A, [bot[k], th[k + 1], -e, -th[k]], {"step": 1})
        tops.append(e)
    d.identify(th[-1], th[0])
    d.contour = tuple(bot)
    d.holes = [tuple(-e for e in reversed(tops))]
    d.meta = {"kind": "fixture"}
    return d.finalize()


# ---------------------------------------------------------------------------
# lengths, weights, signatures

def _classes(word, P=None):
    out = []
    for x in word:
        if isinstance(x, str):
            name = x[:-3] if x.endswith("^-1") else x
            if name in ("q", "a", "t", "theta", "θ"):
                out.append({"q": "q", "a": "a"}.get(name, "t"))
                continue
            if P is None:
                raise DiagramError(f"cannot classify {x} without a presentation")
            x = P.encode([x])[0]
        k = P.kind_of(x)
        out.append({"q": "q", "a": "a", "theta": "t"}[k])
    return out


def path_length(word, delta=Fraction(1, 100), P=None):
    """Modified length: q- and theta-letters weigh 1, a-letters delta, and a
    (theta,a)-syllable (one theta-letter, at most two a-letters, no q) weighs
    1; the length is the least total weight over all decompositions.

    ``word`` is a whitespace-separated string or list of classes q/a/theta
    (or θ, t), or of generator tokens/ids when ``P`` is given."""
    if isinstance(word, str):
        word = word.split()
    delta = Fraction(delta)
    cl = _classes(word, P)
    n = len(cl)
    one = Fraction(1)
    unit = {"q": one, "t": one, "a": delta}
    f = [Fraction(0)] * (n + 1)
    for i in range(1, n + 1):
        best = f[i - 1] + unit[cl[i - 1]]
        for j in range(i - 1, max(-1, i - 4), -1):
            seg = cl[j:i]
            if seg.count("t") == 1 and "q" not in seg and seg.count("a") <= 2:
                best = min(best, f[j] + one)
        f[i] = best
    return f[n]


def cyclic_length(word, delta=Fraction(1, 100), P=None):
    """Modified length of a cyclic word: least length over cut points."""
    w = list(word)
    if not w:
        return Fraction(0)
    return min(path_length(w[k:] + w[:k], delta, P) for k in range(len(w)))


def comb_length(word):
    return len(word)


def cell_weight(d, c, c7=1, delta=Fraction(1, 100)):
    k = d.kinds[c]
    c7 = Fraction(c7)
    if k in (THETA_Q, THETA_A):
        return Fraction(1)
    if k in (DISK, HUB):
        w = d.cell_label(c)
        if any(d.P.kind_of(x) == "theta" for x in w):
            ln = cyclic_length(w, delta, d.P)
        else:
            cl = _classes(w, d.P)
            ln = cl.count("q") + Fraction(delta) * cl.count("a")
        return c7 * ln * ln
    if k == A_CELL:
        n = len(d.cells[c])
        return c7 * n * n
    return Fraction(0)


def diagram_weight(d, c7=1, delta=Fraction(1, 100)):
    return sum((cell_weight(d, c, c7, delta) for c in range(len(d.cells))), Fraction(0))


def area(d):
    return sum(1 for k in d.kinds if k != ZERO)


@dataclass(frozen=True, order=True)
class Signature:
    disks: int
    theta_t: int
    theta_q: int
    a_cells: int
    weight: Fraction

    def to_json(self):
        return {"disks": self.disks, "theta_t": self.theta_t, "theta_q": self.theta_q,
                "a_cells": self.a_cells, "weight": str(self.weight)}


def is_t_letter(hw, x):
    name = hw.part_names[hw.index[abs(x)]]
    return name == "t" or name.startswith("t(")


def signature(d, c7=1, delta=Fraction(1, 100)):
    hw = d.P.hardware
    tq = 0
    for c, k in enumerate(d.kinds):
        if k == THETA_Q:
            q = next(x for x in d.cells[c] if d.edge_class(x) == "q")
            if is_t_letter(hw, d.label[abs(q)]):
                tq += 1
    return Signature(d.count(DISK) + d.count(HUB), tq, d.count(THETA_Q), d.count(A_CELL),
                     diagram_weight(d, c7, delta))


# ---------------------------------------------------------------------------
# disks

def _single_hub(P, W):
    d = Diagram(P)
    path = d.new_path(W.tokens)
    d._vunion(d.dst(path[-1]), d.src(path[0]))
    d.add_cell(HUB, path, {"certificate": []})
    d.contour = tuple(path)
    return d


def disk_diagram(W, certificate):
    """Diagram over the canonical presentation of G with contour W: the
    trapezium of the accepting computation with its two (identically
    labelled) sides glued into an annulus and a hub in the hole."""
    M = certificate.machine
    hw = M.hardware
    if not hw.cyclic:
        raise DiagramError("disk diagrams need a cyclic machine")
    if certificate.start.tokens != W.tokens:
        raise DiagramError("certificate does not start at W")
    acc = M.accept_config()
    if certificate.end.tokens != acc.tokens:
        raise DiagramError("certificate does not end at the accept configuration")
    P = presentation_for(M)
    if certificate.t == 0:
        d = _single_hub(P, acc)
    else:
        T = trapezium_from_computation(certificate)
        bottom, right, top, left = trapezium_factorization(T)
        d = T.copy()
        for a, b in zip(left, right):
            d.identify(a, b)
        d.add_cell(HUB, top, {"certificate": []})
        d.contour = tuple(bottom)
    d.meta = {"kind": "disk", "certificate": certificate.labels(), "height": certificate.t}
    return d.finalize()


def disk_cell_diagram(W, certificate):
    """One disk cell labelled W carrying its accepting computation."""
    M = certificate.machine
    if certificate.start.tokens != W.tokens or certificate.end.tokens != M.accept_config().tokens:
        raise DiagramError("invalid disk certificate")
    P = presentation_for(M)
    d = Diagram(P)
    path = d.new_path(W.tokens)
    d._vunion(d.dst(path[-1]), d.src(path[0]))
    d.add_cell(DISK, path, {"certificate": certificate.labels()})
    d.contour = tuple(path)
    d.meta = {"kind": "disk-cell"}
    return d.finalize()


def power_relator_diagram(u, n=None, tower=None):
    """Diagram over G(M) with contour u^n: the disk diagrams of I(u^n) and
    J(u^n) glued along everything but the special input sector."""
    from .machines import accept_history, accept_input, build_tower, m1_of, parse_word, power
    if tower is None:
        tower = build_tower()
    M = tower.m
    A = tuple(m1_of(M).meta["letters"])
    w = parse_word(u, A)
    if not w:
        raise DiagramError("u must be nonempty")
    if n is not None and n != tower.params.n:
        raise DiagramError(f"the tower is built for exponent {tower.params.n}")
    WI = accept_input(M, u)
    WJ = accept_input(M, u, special=True)
    cI = Computation(M, WI, accept_history(M, u))
    cJ = Computation(M, WJ, accept_history(M, u, special=True))
    D1 = disk_diagram(WI, cI)
    D2 = disk_diagram(WJ, cJ)
    j = M.special_input_sector
    pre = len(WI.states[:j]) + sum(len(x) for x in WI.sectors[:j - 1])
    span = len(WI.sectors[j - 1])
    d = D1.copy()
    m = d.absorb(D2, mirror=True)
    C1 = list(D1.contour)
    rest = C1[:pre] + C1[pre + span:]
    if [D1.lab(x) for x in rest] != [D2.lab(x) for x in D2.contour]:
        raise DiagramError("I(w) and J(w) differ outside the special sector")
    for a, b in zip(D2.contour, rest):
        d.identify(m(a), b)
    d.contour = tuple(C1[pre:pre + span])
    d.meta = {"kind": "power-relator", "u": [list(x) for x in w], "n": tower.params.n}
    d.finalize()
    expect = power(w, tower.params.n)
    if [d.P.names[abs(x)].rsplit(".", 1)[1] for x in d.boundary_label()] != [a for a, _ in expect]:
        raise DiagramError("power relator diagram has the wrong contour")
    return d


# ---------------------------------------------------------------------------
# a-cells and transposition

def acell_band_fixture(machine, word=("a1", "a1", "a1"), covered=2, rule_id=None):
    """An a-cell with contour ``word`` in the special input sector and a
    theta-band of (theta,a)-cells lying on ``covered`` consecutive edges of it.

    Returns (diagram, seed theta-edge of the band, a-cell index)."""
    P = presentation_for(machine)
    hw = machine.hardware
    j, alph = special_alphabet(machine)
    names = {v: hw.names[k] for k, v in alph.items()}
    loc = {hw.names[k].rsplit(".", 1)[1]: k for k in alph}
    ids = []
    for t in word:
        name, sign = (t[:-3], -1) if t.endswith("^-1") else (t, 1)
        ids.append(loc[name] * sign)
    if not burnside_oracle(P.exponent)(tuple(alph[abs(x)] * (1 if x > 0 else -1) for x in ids)):
        raise DiagramError("a-cell label is not trivial in the Burnside group")
    rule = None
    for r in machine.positive:
        if rule_id is not None and r.id != rule_id:
            continue
        dom = r.dom_ids[j - 1]
        if dom is None or all(k in dom for k in alph):
            rule = r
            break
    if rule is None:
        raise DiagramError("no rule whose domain contains the special alphabet")
    if not 0 <= covered <= len(ids):
        raise DiagramError("bad coverage")
    d = Diagram(P)
    # the a-cell boundary, read counterclockwise, starts with the covered
    # part (right to left along the band's bottom)
    path = d.new_path(ids)
    d._vunion(d.dst(path[-1]), d.src(path[0]))
    pi = d.add_cell(A_CELL, path)
    s1 = path[:covered]
    bot = [-x for x in reversed(s1)]
    t = P.theta(rule.id, theta_index(hw, j))
    if covered:
        v = [d.src(x) for x in bot] + [d.dst(bot[-1])]
        th = [d.new_edge(t, v[p], d.new_vertex()) for p in range(len(bot) + 1)]
        tops = []
        for k, x in enumerate(bot):
            (e,) = d.new_path([d.lab(x)], d.head[th[k]], d.head[th[k + 1]])
            d.add_cell(THETA_A, [x, th[k + 1], -e, -th[k]], {"step": 1})
            tops.append(e)
        d.contour = tuple(path[covered:]) + (th[-1],) + tuple(-e for e in reversed(tops)) + (-th[0],)
        seed = th[0]
    else:
        d.contour = tuple(path)
        seed = None
    d.meta = {"kind": "fixture", "_remap": ["seed"], "seed": [seed]} if seed else {"kind": "fixture"}
    d.finalize()
    seed = d.meta.pop("seed", [None])[0]
    return d, seed, pi


def transpose_band_acell(d, seed, pi):
    """Transposition of the theta-band through the theta-edge ``seed`` with
    the a-cell ``pi``: the cells of the band lying on a subpath s1 of the
    a-cell are removed together with the a-cell, a new band segment is laid
    along the complementary subpath s2 and a new copy of the a-cell closes
    the gap. Adjacent mirror cells in the new band are cancelled.

    Returns (new diagram, signature before, signature after)."""
    if d.kinds[pi] != A_CELL:
        raise DiagramError("pi is not an a-cell")
    before = signature(d)
    if seed is None:
        return d, before, before
    band = trace_band(d, seed, "theta")
    if band.annular:
        raise DiagramError("cannot transpose an annular band")
    occ = d.occurrences()
    pb = d.cells[pi]
    on_pi = {}
    for p, x in enumerate(pb):
        on_pi[-x] = p
    # T': maximal run of band cells whose bottom edge lies on pi
    run = []
    for c in band.cells:
        if d.kinds[c] != THETA_A:
            if run:
                break
            continue
        b = d.cells[c]
        hit = [k for k, x in enumerate(b) if x in on_pi]
        if hit:
            run.append((c, hit[0]))
        elif run:
            break
    if not run:
        return d, before, before
    # bring each cell to the frame [x (on pi), right theta, -top, -left theta]
    frames = []
    for c, k in run:
        b = d.cells[c]
        rot = b[k:] + b[:k]
        if len(rot) != 4:
            raise DiagramError("band cell is not a (theta,a)-cell")
        x, R, mt, mL = rot
        frames.append((c, x, R, -mt, -mL))
    # order along s1 so that the right edge of one cell is the left of the next
    byleft = {fr[4]: fr for fr in frames}
    first = [fr for fr in frames if fr[4] not in {g[2] for g in frames}]
    if len(first) != 1:
        raise DiagramError("band cells on the a-cell are not consecutive")
    chain = [first[0]]
    while chain[-1][2] in byleft:
        chain.append(byleft[chain[-1][2]])
    if len(chain) != len(frames):
        raise DiagramError("band cells on the a-cell are not consecutive")
    s1_pos = [on_pi[fr[1]] for fr in chain]
    # pi reads -x_m ... -x_1 along s1 counterclockwise
    start = s1_pos[-1]
    rot = pb[start:] + pb[:start]
    m = len(chain)
    if [rot[k] for k in range(m)] != [-fr[1] for fr in reversed(chain)]:
        raise DiagramError("s1 is not a subpath of the a-cell boundary")
    s2 = list(rot[m:])
    theta_lab = d.lab(chain[0][4])
    rule = d.P.theta_of(theta_lab)
    hw = d.P.hardware
    r = d.P.machine.rule(rule[0], 1)
    for x in s2:
        dom = r.dom_ids[hw.index[abs(d.lab(x))] - 1]
        if dom is not None and abs(d.lab(x)) not in dom:
            raise DiagramError("theta's domain does not contain the a-cell's letters")
    new = d.copy()
    drop = {pi} | {fr[0] for fr in chain}
    keep = [c for c in range(len(d.cells)) if c not in drop]
    new.cells = [d.cells[c] for c in keep]
    new.kinds = [d.kinds[c] for c in keep]
    new.info = [d.info[c] for c in keep]
    L0 = chain[0][4]
    Rm = chain[-1][2]
    tops = [fr[3] for fr in chain]
    if not s2:
        # the band went all the way round: its end edges meet and fold
        new.identify(Rm, L0)
        new.add_cell(A_CELL, [-t for t in reversed(tops)])
    else:
        G = [L0]
        copies = []
        for k, x in enumerate(s2):
            if k == len(s2) - 1:
                g = Rm
            else:
                g = new.new_edge(theta_lab, new.dst(x), new.new_vertex())
            (cp,) = new.new_path([new.lab(x)], new.dst(G[-1]), new.dst(g))
            new.add_cell(THETA_A, [x, g, -cp, -G[-1]], {"step": None})
            copies.append(cp)
            G.append(g)
        new.add_cell(A_CELL, copies + [-t for t in reversed(tops)])
    new.finalize()
    new = cancel_pairs(new)
    after = signature(new)
    return new, before, after


def cancel_pairs(d):
    """Remove pairs of mirror cells sharing an edge (greedily, in cell
    order), gluing their remaining boundaries together."""
    changed = True
    cur = d
    while changed:
        changed = False
        occ = cur.occurrences()
        for c, b in enumerate(cur.cells):
            if cur.kinds[c] not in (THETA_Q, THETA_A):
                continue
            for p, x in enumerate(b):
                for w, q in occ.get(-x, []):
                    if not isinstance(w, int) or w == c or cur.kinds[w] != cur.kinds[c]:
                        continue
                    b2 = cur.cells[w]
                    if len(b2) != len(b):
                        continue
                    r1 = b[p:] + b[:p]
                    r2 = b2[q:] + b2[:q]
                    if cur.word(r1[1:]) != tuple(-y for y in reversed(cur.word(r2[1:]))):
                        continue
                    cur = _cancel(cur, c, w, r1, r2)
                    changed = True
                    break
                if changed:
                    break
            if changed:
                break
    return cur


def _cancel(d, c, w, r1, r2):
    new = d.copy()
    keep = [k for k in range(len(d.cells)) if k not in (c, w)]
    new.cells = [d.cells[k] for k in keep]
    new.kinds = [d.kinds[k] for k in keep]
    new.info = [d.info[k] for k in keep]
    rest1 = r1[1:]
    rest2 = list(reversed(r2[1:]))
    for a, b in zip(rest1, rest2):
        # the other side of a is glued to the other side of b
        new.identify(a, -b)
    return new.finalize()


# ---------------------------------------------------------------------------
# validation

def validate_diagram(d, check_certificates=True):
    """Local consistency report: edge pairing, closure of every boundary
    cycle, relator membership of every cell label and disk certificates."""
    P = d.P
    issues = []
    counts = {}
    for x in list(d.contour) + [y for h in d.holes for y in h]:
        counts.setdefault(abs(x), []).append(("b", x))
    for b in d.cells:
        for x in b:
            counts.setdefault(abs(x), []).append(("c", x))
    for e in range(1, d.n_edges + 1):
        occ = counts.get(e, [])
        nc = [x for k, x in occ if k == "c"]
        nb = [x for k, x in occ if k == "b"]
        if len(occ) != 2:
            issues.append(f"edge {e} occurs {len(occ)} times")
        elif len(nc) == 2 and nc[0] != -nc[1]:
            issues.append(f"interior edge {e} is used twice in the same direction")
        elif len(nc) == 1 and nc[0] != nb[0]:
            issues.append(f"boundary edge {e} runs against its cell")
        elif len(nb) == 2 and nb[0] != -nb[1]:
            issues.append(f"boundary edge {e} is used twice in the same direction")
    cycles = [("contour", d.contour)] + [(f"hole {k}", h) for k, h in enumerate(d.holes)]
    cycles += [(f"cell {c}", b) for c, b in enumerate(d.cells)]
    for name, b in cycles:
        for k in range(len(b)):
            if d.dst(b[k]) != d.src(b[(k + 1) % len(b)]):
                issues.append(f"{name} is not closed at position {k}")
                break
    acc = P.machine.accept_config().tokens if P.machine.hardware.cyclic else None
    for c, kind in enumerate(d.kinds):
        w = d.cell_label(c)
        if kind in (THETA_Q, THETA_A):
            if P.classify(w) != kind:
                issues.append(f"cell {c} ({kind}) label {P.text(w)} is no relator")
        elif kind == A_CELL:
            if P.classify(w) != A_REL:
                issues.append(f"a-cell {c} label is not trivial in the Burnside group")
        elif kind == HUB:
            if acc is None or _cyc(w) != _cyc(acc):
                issues.append(f"hub {c} label is not the accept word")
        elif kind == DISK and check_certificates:
            msg = _check_disk(d, c)
            if msg:
                issues.append(f"disk {c}: {msg}")
    if check_certificates and d.meta.get("kind") == "disk" and "certificate" in d.meta:
        msg = _check_certificate(P.machine, d.boundary_label(), d.meta["certificate"])
        if msg:
            issues.append(f"disk diagram certificate: {msg}")
    return {"ok": not issues, "issues": issues, "summary": d.summary()}


def _cyc(w):
    from .presentation import cyclic_key
    return cyclic_key(w)


def _check_disk(d, c):
    inf = d.info[c] or {}
    if "certificate" not in inf:
        return "no certificate"
    return _check_certificate(d.P.machine, d.cell_label(c), inf["certificate"])


def _check_certificate(M, w, labels):
    from .computation import RunError, run
    try:
        W = AdmissibleWord(M.hardware, w)
    except ValueError as ex:
        return f"label is not admissible: {ex}"
    if not W.is_configuration():
        return "label is not a configuration"
    try:
        c = run(W, labels, M)
    except (RunError, ValueError) as ex:
        return f"certificate does not run: {ex}"
    if c.end.tokens != M.accept_config().tokens:
        return "certificate does not reach the accept configuration"
    return None
