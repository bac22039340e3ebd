"""Numerator and denominator graph compilation over HMM pdf classes.

Every phone is a 1-state HMM: the arc entering a state emits the phone's pdf
for one frame and the state's self-loop repeats the same pdf, so a phone
lasting d frames uses one entering arc and d-1 self-loops.  Pdfs are either
monophone (one per phone) or left-biphone (one per left context, phone pair
with the utterance boundary as an extra left context).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import wfst

MONOPHONE = "monophone"
LEFT_BIPHONE = "left_biphone"
CONTEXT_MODES = (MONOPHONE, LEFT_BIPHONE)
BOUNDARY = None
NUMERATOR = "numerator"
DENOMINATOR = "denominator"


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class ContextConfig:
    mode: str
    phones: tuple  # ordered phone symbols; the index of a symbol is its phone id

    def __post_init__(self):
        if self.mode not in CONTEXT_MODES:
            raise GraphError(f"unknown context mode {self.mode!r}")
        if len(set(self.phones)) != len(self.phones):
            raise GraphError("duplicate phone in context config")
        object.__setattr__(self, "phones", tuple(self.phones))

    @classmethod
    def for_inventory(cls, inventory, mode=LEFT_BIPHONE) -> "ContextConfig":
        return cls(mode, tuple(inventory.symbols))

    @property
    def num_phonemes(self) -> int:
        return len(self.phones)

    @property
    def num_pdfs(self) -> int:
        P = self.num_phonemes
        return P if self.mode == MONOPHONE else P * (P + 1)

    def phone_index(self, symbol) -> int:
        try:
            return self.phones.index(symbol)
        except ValueError:
            raise GraphError(f"phone {symbol!r} not in context config") from None


def pdf_id(left: Optional[int], phone: int, cfg: ContextConfig) -> int:
    """1-based pdf id.  ``left`` is a phone index or ``BOUNDARY`` (None).

    Left-biphone ids are ``left_index * P + phone + 1`` with left_index 0 for
    the boundary and ``left + 1`` otherwise.
    """
    P = cfg.num_phonemes
    if not 0 <= phone < P:
        raise GraphError(f"phone index {phone} out of range")
    if cfg.mode == MONOPHONE:
        return phone + 1
    if left is BOUNDARY:
        left_index = 0
    elif 0 <= left < P:
        left_index = left + 1
    else:
        raise GraphError(f"left context {left} out of range")
    return left_index * P + phone + 1


def pdf_context(pdf: int, cfg: ContextConfig):
    """Inverse of :func:`pdf_id`: ``(left, phone)``; left is None for
    monophones and the boundary."""
    if not 1 <= pdf <= cfg.num_pdfs:
        raise GraphError(f"pdf {pdf} out of range")
    P = cfg.num_phonemes
    if cfg.mode == MONOPHONE:
        return None, pdf - 1
    left_index, phone = divmod(pdf - 1, P)
    return (None if left_index == 0 else left_index - 1), phone


def pdf_phones(cfg: ContextConfig) -> np.ndarray:
    """Right-phone index of every pdf column (column = pdf - 1)."""
    P = cfg.num_phonemes
    return np.arange(cfg.num_pdfs) % P


@dataclass
class CompiledGraph:
    """Epsilon-free graph whose arc ilabels are pdf ids and olabels are
    phone index + 1."""

    fst: wfst.Fst
    kind: str
    cfg: ContextConfig
    _arrays: Optional[tuple] = field(default=None, repr=False, compare=False)

    @property
    def num_pdfs(self) -> int:
        return self.cfg.num_pdfs

    @property
    def self_loops(self):
        return self.fst.self_loop_flags()

    def header(self) -> dict:
        return {"kind": self.kind, "context": self.cfg.mode,
                "pdfs": self.cfg.num_pdfs, "phones": " ".join(self.cfg.phones)}

    def to_text(self) -> str:
        return wfst.fst_to_text(self.fst, self.header())

    def check(self):
        """Validate the structural invariants; raises GraphError."""
        fst = self.fst
        for s in fst.states():
            for arc in fst.arcs(s):
                if arc.ilabel == wfst.EPSILON or arc.olabel == wfst.EPSILON:
                    raise GraphError(f"epsilon arc at state {s}")
                if not 1 <= arc.ilabel <= self.num_pdfs:
                    raise GraphError(f"invalid pdf {arc.ilabel} at state {s}")
        if self.kind == NUMERATOR:
            if not wfst.is_acyclic(fst, ignore_self_loops=True):
                raise GraphError("numerator is cyclic beyond self-loops")
            incoming = {}
            loops = {}
            for s in fst.states():
                for arc in fst.arcs(s):
                    if arc.nextstate == s:
                        loops.setdefault(s, set()).add(arc.ilabel)
                    else:
                        incoming.setdefault(arc.nextstate, set()).add(arc.ilabel)
            for s, pdfs in incoming.items():
                if len(pdfs) != 1 or loops.get(s) != pdfs:
                    raise GraphError(f"state {s} breaks 1-state HMM topology")
        connected = wfst.connect(fst)
        if connected.num_states != fst.num_states:
            raise GraphError("graph has unreachable or dead states")
        return self


def parse_graph(text: str) -> CompiledGraph:
    fst, header = wfst.parse_fst(text)
    try:
        kind = header["kind"]
        mode = header["context"]
        phones = tuple(header["phones"].split())
    except KeyError as err:
        raise GraphError(f"missing graph header {err.args[0]!r}") from None
    cfg = ContextConfig(mode, phones)
    if "pdfs" in header and int(header["pdfs"]) != cfg.num_pdfs:
        raise GraphError("header pdf count does not match context")
    if kind not in (NUMERATOR, DENOMINATOR):
        raise GraphError(f"unknown graph kind {kind!r}")
    return CompiledGraph(fst, kind, cfg)


def compile_numerator(utterance, cfg: ContextConfig) -> CompiledGraph:
    """Relabel an utterance acceptor with pdfs and add 1-state HMM self-loops.

    States are split by the pdf of their incoming arc, which also tracks the
    left context.  ``utterance`` is an UtteranceFsa or a phone acceptor.
    """
    u = getattr(utterance, "fst", utterance)
    if u.has_epsilons():
        raise GraphError("utterance FSA has epsilon arcs")
    if not wfst.is_acyclic(u):
        raise GraphError("utterance FSA is cyclic")
    if u.start is None:
        raise GraphError("utterance FSA is empty")
    symbols = u.isymbols
    index = {}

    def phone_of(label):
        if label not in index:
            sym = symbols.find(label) if symbols is not None else label
            index[label] = cfg.phone_index(sym)
        return index[label]

    out = wfst.Fst(wfst.LOG)
    ids = {}
    queue = []

    def state(key):
        if key not in ids:
            ids[key] = out.add_state()
            queue.append(key)
        return ids[key]

    out.set_start(state((u.start, 0)))
    head = 0
    while head < len(queue):
        key = queue[head]
        head += 1
        s, in_pdf = key
        src = ids[key]
        prev = BOUNDARY
        if in_pdf:
            _, prev = pdf_context(in_pdf, cfg)
            out.add_arc(src, in_pdf, prev + 1, 0.0, src)
        for arc in u.arcs(s):
            phone = phone_of(arc.ilabel)
            pdf = pdf_id(prev, phone, cfg)
            out.add_arc(src, pdf, phone + 1, arc.weight, state((arc.nextstate, pdf)))
        if u.is_final(s):
            out.set_final(src, u.final(s))
    fst = wfst.connect(out)
    if fst.start is None:
        raise GraphError("utterance FSA accepts nothing")
    return CompiledGraph(fst, NUMERATOR, cfg)


@dataclass(frozen=True)
class PhoneBigramLm:
    """Add-k smoothed phone bigram.

    Row 0 of ``counts``/``logprobs`` is the sequence-start history and row
    i + 1 the history after phone i; column j < P is phone j and column P is
    the end-of-sequence event.
    """

    phones: tuple
    counts: np.ndarray
    logprobs: np.ndarray
    add_k: float

    def logprob(self, history: Optional[int], nxt: Optional[int]) -> float:
        """log p(next | history); None means start (history) or end (next)."""
        row = 0 if history is None else history + 1
        col = self.logprobs.shape[1] - 1 if nxt is None else nxt
        return float(self.logprobs[row, col])

    def sequence_logprob(self, seq: Sequence[int]) -> float:
        total, prev = 0.0, None
        for p in seq:
            total += self.logprob(prev, p)
            prev = p
        return total + self.logprob(prev, None)


def estimate_phone_bigram(pronunciations, phones, add_k: float = 1.0) -> PhoneBigramLm:
    """Estimate p(next | previous) from phone sequences (symbols or indices)."""
    phones = tuple(phones)
    if add_k <= 0:
        raise GraphError("add_k must be positive")
    seqs = [tuple(p) for p in pronunciations]
    if not seqs:
        raise GraphError("empty corpus")
    P = len(phones)
    lookup = {s: i for i, s in enumerate(phones)}
    counts = np.zeros((P + 1, P + 1))
    for seq in seqs:
        prev = 0
        for sym in seq:
            i = sym if isinstance(sym, (int, np.integer)) else lookup.get(sym)
            if i is None:
                raise GraphError(f"phone {sym!r} not in phone set")
            counts[prev, i] += 1
            prev = i + 1
        counts[prev, P] += 1
    probs = (counts + add_k) / (counts.sum(axis=1, keepdims=True) + add_k * (P + 1))
    return PhoneBigramLm(phones, counts, np.log(probs), float(add_k))


def uniform_bigram(phones) -> PhoneBigramLm:
    """Unweighted phone loop (all log-probabilities 0)."""
    P = len(phones)
    zeros = np.zeros((P + 1, P + 1))
    return PhoneBigramLm(tuple(phones), zeros, zeros.copy(), math.inf)


def compile_denominator(lm: PhoneBigramLm, cfg: ContextConfig) -> CompiledGraph:
    """Phone-loop graph over all phone sequences weighted by ``lm``.

    State 0 is the start (boundary context); every other state stands for
    the most recent pdf and carries that pdf's self-loop.  In left-biphone
    mode that is one state per (left, phone) pair; in monophone mode one per
    phone.
    """
    if tuple(lm.phones) != cfg.phones:
        raise GraphError("LM and context config use different phone sets")
    P = cfg.num_phonemes
    lp = lm.logprobs
    fst = wfst.Fst(wfst.LOG)
    fst.set_start(fst.add_state())
    if cfg.mode == MONOPHONE:
        fst.add_states(P)
        state_of = {(h, q): q + 1 for h in range(P + 1) for q in range(P)}
        entries = [(q + 1, None, q) for q in range(P)]
    else:
        fst.add_states(P * (P + 1))
        state_of = {(h, q): 1 + h * P + q for h in range(P + 1) for q in range(P)}
        entries = [(1 + h * P + q, None if h == 0 else h - 1, q)
                   for h in range(P + 1) for q in range(P)]
    for r in range(P):
        fst.add_arc(0, pdf_id(BOUNDARY, r, cfg), r + 1, lp[0, r], state_of[(0, r)])
    fst.set_final(0, lp[0, P])
    for s, left, q in entries:
        pdf = pdf_id(left, q, cfg)
        fst.add_arc(s, pdf, q + 1, 0.0, s)
        for r in range(P):
            fst.add_arc(s, pdf_id(q, r, cfg), r + 1, lp[q + 1, r], state_of[(q + 1, r)])
        fst.set_final(s, lp[q + 1, P])
    return CompiledGraph(fst, DENOMINATOR, cfg)


def biphone_context_fst(cfg: ContextConfig, symbols: wfst.SymbolTable) -> wfst.Fst:
    """Transducer from phone symbol ids to pdf ids, tracking left context."""
    P = cfg.num_phonemes
    fst = wfst.Fst(wfst.LOG, symbols, None)
    fst.add_states(P + 1)
    fst.set_start(0)
    for h in range(P + 1):
        left = None if h == 0 else h - 1
        for p, sym in enumerate(cfg.phones):
            fst.add_arc(h, symbols.find(sym), pdf_id(left, p, cfg), 0.0, p + 1)
        fst.set_final(h)
    return fst
