"""A small weighted finite-state machine core.

Weights are natural-log scores (higher is better): ``times`` is addition and
the semiring one is 0.0.  The log semiring sums with logsumexp, the tropical
semiring takes the max.  Label 0 is epsilon.

The text format is AT&T style: ``src dst ilabel olabel cost`` arc lines and
``state cost`` final lines (tab-separated), with cost = -weight printed to 17
significant digits.  Lines beginning with ``#`` carry ``#key value`` headers.
"""

from __future__ import annotations

import math
from collections import deque
from typing import NamedTuple, Optional

import numpy as np

EPSILON = 0
NEG_INF = float("-inf")


class FstError(ValueError):
    pass


class Semiring:
    def __init__(self, name, plus):
        self.name = name
        self._plus = plus
        self.zero = NEG_INF
        self.one = 0.0

    def plus(self, a, b):
        return self._plus(a, b)

    @staticmethod
    def times(a, b):
        return a + b

    def sum(self, values):
        total = self.zero
        for v in values:
            total = self._plus(total, v)
        return total

    def __repr__(self):
        return f"Semiring({self.name})"


def logaddexp(a, b):
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    m = a if a > b else b
    return m + math.log1p(math.exp(-abs(a - b)))


LOG = Semiring("log", logaddexp)
TROPICAL = Semiring("tropical", max)
SEMIRINGS = {"log": LOG, "tropical": TROPICAL}


class Arc(NamedTuple):
    ilabel: int
    olabel: int
    weight: float
    nextstate: int


class SymbolTable:
    """Bidirectional id <-> symbol map; id 0 is epsilon."""

    def __init__(self, symbols=(), epsilon="<eps>"):
        self._sym = [epsilon]
        self._id = {epsilon: 0}
        for s in symbols:
            self.add(s)

    def add(self, symbol: str) -> int:
        if symbol in self._id:
            return self._id[symbol]
        self._id[symbol] = len(self._sym)
        self._sym.append(symbol)
        return self._id[symbol]

    def find(self, key):
        """Symbol for an integer id, id for a string symbol."""
        if isinstance(key, (int, np.integer)):
            return self._sym[key]
        return self._id[key]

    def __contains__(self, symbol):
        return symbol in self._id

    def __len__(self):
        return len(self._sym)

    def __eq__(self, other):
        return isinstance(other, SymbolTable) and self._sym == other._sym

    def symbols(self):
        return tuple(self._sym)

    def to_text(self) -> str:
        return "".join(f"{i}\t{s}\n" for i, s in enumerate(self._sym))

    @classmethod
    def from_text(cls, text: str) -> "SymbolTable":
        pairs = []
        for line in text.splitlines():
            if not line.strip():
                continue
            i, _, s = line.partition("\t")
            pairs.append((int(i), s))
        pairs.sort()
        if not pairs or [i for i, _ in pairs] != list(range(len(pairs))):
            raise FstError("symbol table ids must be dense from 0")
        table = cls(epsilon=pairs[0][1])
        for _, s in pairs[1:]:
            table.add(s)
        return table


class Fst:
    """Mutable while being built; treated as immutable once handed out."""

    def __init__(self, semiring: Semiring = LOG, isymbols=None, osymbols=None):
        self.semiring = semiring
        self.isymbols = isymbols
        self.osymbols = osymbols if osymbols is not None else isymbols
        self.start: Optional[int] = None
        self._arcs: list = []
        self._final: dict = {}

    def add_state(self) -> int:
        self._arcs.append([])
        return len(self._arcs) - 1

    def add_states(self, n):
        for _ in range(n):
            self.add_state()

    def set_start(self, state: int):
        self._check(state)
        self.start = state

    def set_final(self, state: int, weight: Optional[float] = None):
        self._check(state)
        if weight is None:
            weight = self.semiring.one
        if weight == NEG_INF:
            self._final.pop(state, None)
        else:
            self._final[state] = float(weight)

    def add_arc(self, state, ilabel, olabel, weight, nextstate):
        self._check(state)
        self._check(nextstate)
        self._arcs[state].append(Arc(int(ilabel), int(olabel), float(weight), int(nextstate)))

    def _check(self, state):
        if not 0 <= state < len(self._arcs):
            raise FstError(f"invalid state {state}")

    @property
    def num_states(self) -> int:
        return len(self._arcs)

    def states(self):
        return range(len(self._arcs))

    def arcs(self, state) -> list:
        return self._arcs[state]

    def final(self, state) -> float:
        return self._final.get(state, NEG_INF)

    def is_final(self, state) -> bool:
        return state in self._final

    @property
    def finals(self) -> dict:
        return dict(self._final)

    def num_arcs(self) -> int:
        return sum(len(a) for a in self._arcs)

    def self_loop_flags(self):
        return [[a.nextstate == s for a in self._arcs[s]] for s in self.states()]

    def is_acceptor(self) -> bool:
        return all(a.ilabel == a.olabel for arcs in self._arcs for a in arcs)

    def has_epsilons(self) -> bool:
        return any(a.ilabel == EPSILON or a.olabel == EPSILON
                   for arcs in self._arcs for a in arcs)

    def copy(self) -> "Fst":
        out = Fst(self.semiring, self.isymbols, self.osymbols)
        out._arcs = [list(a) for a in self._arcs]
        out._final = dict(self._final)
        out.start = self.start
        return out

    def __repr__(self):
        return (f"Fst({self.semiring.name}, {self.num_states} states, "
                f"{self.num_arcs()} arcs)")


def _same_semiring(a, b):
    if a.semiring is not b.semiring:
        raise FstError(f"semiring mismatch: {a.semiring.name} vs {b.semiring.name}")


def _copy_into(out, src, offset):
    for s in src.states():
        for arc in src.arcs(s):
            out.add_arc(s + offset, arc.ilabel, arc.olabel, arc.weight,
                        arc.nextstate + offset)


def structurally_equal(a: Fst, b: Fst) -> bool:
    return (a.semiring is b.semiring and a.start == b.start
            and a.num_states == b.num_states
            and all(a.arcs(s) == b.arcs(s) for s in a.states())
            and a.finals == b.finals)


def linear_fst(labels, semiring=LOG, symbols=None, weight=0.0) -> Fst:
    """Acceptor for a single label sequence; ``weight`` goes on the final state."""
    f = Fst(semiring, symbols)
    f.add_states(len(labels) + 1)
    f.set_start(0)
    for i, lab in enumerate(labels):
        f.add_arc(i, lab, lab, 0.0, i + 1)
    f.set_final(len(labels), weight)
    return f


def empty_fst(semiring=LOG, symbols=None) -> Fst:
    f = Fst(semiring, symbols)
    f.set_start(f.add_state())
    return f


def union(a: Fst, b: Fst) -> Fst:
    _same_semiring(a, b)
    out = Fst(a.semiring, a.isymbols, a.osymbols)
    start = out.add_state()
    out.set_start(start)
    for src in (a, b):
        offset = out.num_states
        out.add_states(src.num_states)
        _copy_into(out, src, offset)
        for s, w in src.finals.items():
            out.set_final(s + offset, w)
        if src.start is not None:
            out.add_arc(start, EPSILON, EPSILON, out.semiring.one, src.start + offset)
    return out


def concat(a: Fst, b: Fst) -> Fst:
    _same_semiring(a, b)
    out = Fst(a.semiring, a.isymbols, a.osymbols)
    if a.start is None or b.start is None:
        return out
    out.add_states(a.num_states + b.num_states)
    out.set_start(a.start)
    _copy_into(out, a, 0)
    offset = a.num_states
    _copy_into(out, b, offset)
    for s, w in a.finals.items():
        out.add_arc(s, EPSILON, EPSILON, w, b.start + offset)
    for s, w in b.finals.items():
        out.set_final(s + offset, w)
    return out


def connect(fst: Fst) -> Fst:
    """Remove states that are not on some start-to-final path."""
    out = Fst(fst.semiring, fst.isymbols, fst.osymbols)
    if fst.start is None:
        return out
    n = fst.num_states
    acc = [False] * n
    acc[fst.start] = True
    stack = [fst.start]
    rev = [[] for _ in range(n)]
    while stack:
        s = stack.pop()
        for arc in fst.arcs(s):
            if not acc[arc.nextstate]:
                acc[arc.nextstate] = True
                stack.append(arc.nextstate)
    for s in range(n):
        for arc in fst.arcs(s):
            rev[arc.nextstate].append(s)
    coacc = [False] * n
    stack = [s for s in fst.finals]
    for s in stack:
        coacc[s] = True
    while stack:
        s = stack.pop()
        for p in rev[s]:
            if not coacc[p]:
                coacc[p] = True
                stack.append(p)
    keep = [s for s in range(n) if acc[s] and coacc[s]]
    if not keep or not coacc[fst.start]:
        return out
    remap = {s: i for i, s in enumerate(keep)}
    out.add_states(len(keep))
    out.set_start(remap[fst.start])
    for s in keep:
        for arc in fst.arcs(s):
            if arc.nextstate in remap:
                out.add_arc(remap[s], arc.ilabel, arc.olabel, arc.weight,
                            remap[arc.nextstate])
        if fst.is_final(s):
            out.set_final(remap[s], fst.final(s))
    return out


def topological_order(fst: Fst, ignore_self_loops: bool = False, arc_filter=None):
    """States in topological order, or None if the graph has a cycle."""
    n = fst.num_states
    indeg = [0] * n
    for s in fst.states():
        for arc in fst.arcs(s):
            if arc_filter is not None and not arc_filter(arc):
                continue
            if ignore_self_loops and arc.nextstate == s:
                continue
            indeg[arc.nextstate] += 1
    queue = deque(s for s in range(n) if indeg[s] == 0)
    order = []
    while queue:
        s = queue.popleft()
        order.append(s)
        for arc in fst.arcs(s):
            if arc_filter is not None and not arc_filter(arc):
                continue
            if ignore_self_loops and arc.nextstate == s:
                continue
            indeg[arc.nextstate] -= 1
            if indeg[arc.nextstate] == 0:
                queue.append(arc.nextstate)
    return order if len(order) == n else None


def is_acyclic(fst: Fst, ignore_self_loops: bool = False) -> bool:
    return topological_order(fst, ignore_self_loops) is not None


def _is_eps(arc):
    return arc.ilabel == EPSILON and arc.olabel == EPSILON


def _epsilon_closure(fst: Fst):
    """Per-state dict of epsilon-reachable states and their ⊕-distance."""
    sr = fst.semiring
    n = fst.num_states
    order = topological_order(fst, arc_filter=_is_eps)
    if order is not None:
        closure = [None] * n
        for s in reversed(order):
            d = {s: sr.one}
            for arc in fst.arcs(s):
                if not _is_eps(arc):
                    continue
                for q, w in closure[arc.nextstate].items():
                    d[q] = sr.plus(d.get(q, sr.zero), arc.weight + w)
            closure[s] = d
        return closure

    if sr is LOG:
        mat = np.zeros((n, n))
        for s in fst.states():
            for arc in fst.arcs(s):
                if _is_eps(arc):
                    mat[s, arc.nextstate] += math.exp(arc.weight)
        radius = max(abs(np.linalg.eigvals(mat))) if n else 0.0
        if radius >= 1.0:
            raise FstError("epsilon cycle with weight >= 1 (divergent closure)")
        dist = np.linalg.inv(np.eye(n) - mat)
        with np.errstate(divide="ignore"):
            logd = np.log(np.where(dist > 0, dist, 0.0))
        return [{q: float(logd[s, q]) for q in range(n) if dist[s, q] > 0}
                for s in range(n)]

    # tropical: max-plus Floyd-Warshall over the epsilon subgraph
    dist = np.full((n, n), NEG_INF)
    for s in fst.states():
        for arc in fst.arcs(s):
            if _is_eps(arc):
                dist[s, arc.nextstate] = max(dist[s, arc.nextstate], arc.weight)
    for k in range(n):
        dist = np.maximum(dist, dist[:, k:k + 1] + dist[k:k + 1, :])
    if np.any(np.diag(dist) > 0):
        raise FstError("epsilon cycle with positive weight (divergent closure)")
    np.fill_diagonal(dist, np.maximum(np.diag(dist), 0.0))
    return [{q: float(dist[s, q]) for q in range(n) if dist[s, q] > NEG_INF}
            for s in range(n)]


def remove_epsilon(fst: Fst) -> Fst:
    """Equivalent machine without epsilon:epsilon arcs (trimmed)."""
    if not any(_is_eps(a) for s in fst.states() for a in fst.arcs(s)):
        return fst.copy()
    sr = fst.semiring
    closure = _epsilon_closure(fst)
    out = Fst(sr, fst.isymbols, fst.osymbols)
    out.add_states(fst.num_states)
    if fst.start is not None:
        out.set_start(fst.start)
    for p in fst.states():
        final = sr.zero
        for q in sorted(closure[p]):
            d = closure[p][q]
            for arc in fst.arcs(q):
                if not _is_eps(arc):
                    out.add_arc(p, arc.ilabel, arc.olabel, d + arc.weight, arc.nextstate)
            if fst.is_final(q):
                final = sr.plus(final, d + fst.final(q))
        if final != sr.zero:
            out.set_final(p, final)
    return connect(out)


def compose(a: Fst, b: Fst) -> Fst:
    """Product construction; ``b`` must have no input epsilons.

    Output-epsilon arcs of ``a`` advance ``a`` alone.
    """
    _same_semiring(a, b)
    if a.osymbols is not None and b.isymbols is not None and a.osymbols != b.isymbols:
        raise FstError("alphabet mismatch: output symbols of a != input symbols of b")
    by_label = []
    for q in b.states():
        table = {}
        for arc in b.arcs(q):
            if arc.ilabel == EPSILON:
                raise FstError("compose: right operand has input epsilons")
            table.setdefault(arc.ilabel, []).append(arc)
        by_label.append(table)
    out = Fst(a.semiring, a.isymbols, b.osymbols)
    if a.start is None or b.start is None:
        return out
    ids = {}
    queue = deque()

    def state(pair):
        if pair not in ids:
            ids[pair] = out.add_state()
            queue.append(pair)
        return ids[pair]

    out.set_start(state((a.start, b.start)))
    while queue:
        p, q = pair = queue.popleft()
        src = ids[pair]
        for arc in a.arcs(p):
            if arc.olabel == EPSILON:
                out.add_arc(src, arc.ilabel, EPSILON, arc.weight, state((arc.nextstate, q)))
                continue
            for barc in by_label[q].get(arc.olabel, ()):
                out.add_arc(src, arc.ilabel, barc.olabel, arc.weight + barc.weight,
                            state((arc.nextstate, barc.nextstate)))
        if a.is_final(p) and b.is_final(q):
            out.set_final(src, a.final(p) + b.final(q))
    return connect(out)


def enumerate_paths(fst: Fst, max_paths: int = 100_000, skip_self_loops: bool = False,
                    side: str = "input"):
    """All accepted label sequences with ⊕-aggregated weights, sorted by labels.

    Epsilon labels are dropped from the sequences.  With ``skip_self_loops``
    self-loop arcs are ignored, so graphs that are acyclic apart from their
    self-loops can be enumerated.
    """
    if fst.start is None:
        return []
    if topological_order(fst, ignore_self_loops=skip_self_loops) is None:
        raise FstError("enumerate_paths: input is cyclic")
    sr = fst.semiring
    use_in = side == "input"
    totals = {}
    count = 0
    stack = [(fst.start, (), sr.one)]
    while stack:
        s, labels, w = stack.pop()
        if fst.is_final(s):
            count += 1
            if count > max_paths:
                raise FstError(f"more than {max_paths} paths")
            totals[labels] = sr.plus(totals.get(labels, sr.zero), w + fst.final(s))
        for arc in reversed(fst.arcs(s)):
            if skip_self_loops and arc.nextstate == s:
                continue
            lab = arc.ilabel if use_in else arc.olabel
            stack.append((arc.nextstate, labels + ((lab,) if lab != EPSILON else ()),
                          w + arc.weight))
    return sorted(totals.items())


def shortest_distance(fst: Fst, semiring: Optional[Semiring] = None) -> float:
    """⊕ over all accepting paths of an acyclic machine."""
    sr = semiring or fst.semiring
    if fst.start is None:
        return sr.zero
    order = topological_order(fst)
    if order is None:
        raise FstError("shortest_distance: input is cyclic")
    alpha = [sr.zero] * fst.num_states
    alpha[fst.start] = sr.one
    total = sr.zero
    for s in order:
        if alpha[s] == sr.zero:
            continue
        for arc in fst.arcs(s):
            alpha[arc.nextstate] = sr.plus(alpha[arc.nextstate], alpha[s] + arc.weight)
        if fst.is_final(s):
            total = sr.plus(total, alpha[s] + fst.final(s))
    return total


class ArcArrays(NamedTuple):
    """Flat numpy view of a machine's arcs, grouped by source state."""

    src: np.ndarray
    dst: np.ndarray
    ilabel: np.ndarray
    olabel: np.ndarray
    weight: np.ndarray
    final: np.ndarray
    start: int


def arc_arrays(fst: Fst) -> ArcArrays:
    src, dst, il, ol, w = [], [], [], [], []
    for s in fst.states():
        for arc in fst.arcs(s):
            src.append(s)
            dst.append(arc.nextstate)
            il.append(arc.ilabel)
            ol.append(arc.olabel)
            w.append(arc.weight)
    final = np.full(fst.num_states, NEG_INF)
    for s, fw in fst.finals.items():
        final[s] = fw
    return ArcArrays(np.asarray(src, dtype=np.int64), np.asarray(dst, dtype=np.int64),
                     np.asarray(il, dtype=np.int64), np.asarray(ol, dtype=np.int64),
                     np.asarray(w, dtype=float), final,
                     -1 if fst.start is None else fst.start)


def viterbi_arcs(fst: Fst, frame_scores) -> tuple:
    """Best time-synchronous path: one arc per frame, arc ilabel k reading
    column k-1 of ``frame_scores``.

    Returns ``(score, arc_indices)`` where indices refer to :func:`arc_arrays`
    order.  Ties go to the lexicographically smallest state sequence.
    """
    x = np.asarray(frame_scores, dtype=float)
    T = x.shape[0]
    arr = arc_arrays(fst)
    n = fst.num_states
    if arr.start < 0 or n == 0:
        raise FstError("no accepting path")
    if len(arr.ilabel) and (arr.ilabel.min() < 1 or arr.ilabel.max() > x.shape[1]):
        raise FstError("arc label outside the score matrix")
    # arcs sorted by (src, dst, index) so the first maximum per source wins ties
    order = np.lexsort((np.arange(len(arr.src)), arr.dst, arr.src))
    src, dst = arr.src[order], arr.dst[order]
    w, col = arr.weight[order], arr.ilabel[order] - 1
    beta = np.full((T + 1, n), NEG_INF)
    beta[T] = arr.final
    choice = np.full((T, n), -1, dtype=np.int64)
    if len(src):
        starts = np.flatnonzero(np.r_[True, src[1:] != src[:-1]])
        owners = src[starts]
        positions = np.arange(len(src))
        segment = np.repeat(np.arange(len(starts)), np.diff(np.r_[starts, len(src)]))
        for t in range(T - 1, -1, -1):
            v = w + x[t, col] + beta[t + 1, dst]
            best = np.maximum.reduceat(v, starts)
            hit = np.where(v == best[segment], positions, len(src))
            first = np.minimum.reduceat(hit, starts)
            ok = best > NEG_INF
            beta[t, owners[ok]] = best[ok]
            choice[t, owners[ok]] = order[first[ok]]
    score = beta[0, arr.start]
    if score == NEG_INF:
        raise FstError("no accepting path of the required length")
    path = []
    s = arr.start
    for t in range(T):
        k = choice[t, s]
        path.append(int(k))
        s = int(arr.dst[k])
    return float(score), path


def shortest_path(fst: Fst, frame_scores=None):
    """Max-weight accepting path as ``(ilabel sequence, weight)``.

    Without ``frame_scores`` the machine must be acyclic; with a T x C score
    matrix the path is time-synchronous (see :func:`viterbi_arcs`).  Ties are
    broken towards the lexicographically smallest state sequence.
    """
    if frame_scores is not None:
        score, path = viterbi_arcs(fst, frame_scores)
        arr = arc_arrays(fst)
        return tuple(int(arr.ilabel[k]) for k in path), score
    if fst.start is None:
        raise FstError("no accepting path")
    order = topological_order(fst)
    if order is None:
        raise FstError("shortest_path: input is cyclic")
    best = [NEG_INF] * fst.num_states
    step = [None] * fst.num_states
    for s in reversed(order):
        b, c = fst.final(s), None
        for arc in sorted(fst.arcs(s), key=lambda a: a.nextstate):
            v = arc.weight + best[arc.nextstate]
            if v > b:
                b, c = v, arc
        best[s], step[s] = b, c
    if best[fst.start] == NEG_INF:
        raise FstError("no accepting path")
    labels = []
    s = fst.start
    while step[s] is not None:
        arc = step[s]
        if arc.ilabel != EPSILON:
            labels.append(arc.ilabel)
        s = arc.nextstate
    return tuple(labels), best[fst.start]


def _fmt(weight: float) -> str:
    cost = -weight
    if cost == 0:
        cost = 0.0
    return format(cost, ".17g")


def fst_to_text(fst: Fst, header: Optional[dict] = None) -> str:
    """Serialize; the start state's lines come first."""
    lines = [f"#semiring {fst.semiring.name}"]
    for key, value in (header or {}).items():
        lines.append(f"#{key} {value}")
    if fst.start is not None:
        order = [fst.start] + [s for s in fst.states() if s != fst.start]
        for s in order:
            for arc in fst.arcs(s):
                lines.append(f"{s}\t{arc.nextstate}\t{arc.ilabel}\t{arc.olabel}\t"
                             f"{_fmt(arc.weight)}")
            if fst.is_final(s):
                lines.append(f"{s}\t{_fmt(fst.final(s))}")
        if len(lines) == 1 + len(header or {}):
            # start state with no arcs and no final weight
            lines.append(f"#start {fst.start}")
    return "\n".join(lines) + "\n"


def parse_fst(text: str, isymbols=None, osymbols=None):
    """Parse :func:`fst_to_text` output; returns ``(fst, header)``."""
    header = {}
    rows = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].partition(" ")
            header[key] = value.strip()
            continue
        cols = line.split("\t")
        if len(cols) not in (2, 5):
            raise FstError(f"line {lineno}: expected 2 or 5 fields")
        rows.append((lineno, cols))
    semiring = SEMIRINGS.get(header.pop("semiring", "log"))
    if semiring is None:
        raise FstError("unknown semiring")
    fst = Fst(semiring, isymbols, osymbols)
    max_state = -1
    for _, cols in rows:
        max_state = max(max_state, int(cols[0]), int(cols[1]) if len(cols) == 5 else -1)
    if "start" in header:
        max_state = max(max_state, int(header["start"]))
    fst.add_states(max_state + 1)
    if rows:
        fst.set_start(int(rows[0][1][0]))
    elif "start" in header:
        fst.set_start(int(header["start"]))
    header.pop("start", None)
    for lineno, cols in rows:
        try:
            if len(cols) == 5:
                s, d, i, o = (int(c) for c in cols[:4])
                fst.add_arc(s, i, o, -float(cols[4]), d)
            else:
                fst.set_final(int(cols[0]), -float(cols[1]))
        except ValueError as err:
            raise FstError(f"line {lineno}: {err}") from None
    return fst, header
