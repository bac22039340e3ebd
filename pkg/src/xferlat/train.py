"""Desk-scale multi-candidate LF-MMI training on synthetic Gaussian features."""

from __future__ import annotations

import logging
import struct
import zlib
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import wfst
from .graph import MONOPHONE, ContextConfig, compile_numerator, pdf_context
from .lexicon import build_utterance_fsa
from .lfmmi import lfmmi, objective

log = logging.getLogger(__name__)

MODEL_MAGIC = b"XFLT1"


def derive_rng(seed: int, label: str) -> np.random.Generator:
    """Independent stream for a named subcomponent of one run seed."""
    return np.random.default_rng([int(seed), zlib.crc32(label.encode("utf-8"))])


@dataclass(frozen=True)
class SyntheticConfig:
    feature_dim: int = 16
    noise_sigma: float = 0.5
    min_frames: int = 3
    max_frames: int = 8
    seed: int = 42
    silence_prob: float = 0.5  # chance of silence at each optional slot
    max_words: int = 3

    def __post_init__(self):
        if self.min_frames < 1 or self.max_frames < self.min_frames:
            raise ValueError("need 1 <= min_frames <= max_frames")


def phone_means(phones: Sequence[str], cfg: SyntheticConfig) -> np.ndarray:
    """Seeded unit-norm mean direction per phone."""
    rng = derive_rng(cfg.seed, "means")
    means = rng.normal(size=(len(phones), cfg.feature_dim))
    means /= np.linalg.norm(means, axis=1, keepdims=True)
    return means


@dataclass
class SyntheticUtterance:
    transcript: tuple
    spoken_variant: tuple  # phones actually realized, silence excluded
    realized: tuple  # phones including inserted silences
    features: np.ndarray
    alignment: tuple  # phone symbol per frame

    @property
    def num_frames(self) -> int:
        return self.features.shape[0]


def sample_realization(canonical, rules, variant_prob, rng):
    """Per-position independent choice: an alternative with ``variant_prob``
    (uniform among alternatives), otherwise the canonical phone."""
    out = []
    for sym in canonical:
        if sym in rules and rng.random() < variant_prob:
            alts = rules[sym].alternatives
            out.extend(alts[rng.integers(len(alts))])
        else:
            out.append(sym)
    return tuple(out) if out else tuple(canonical)


def generate_corpus(lexicon, rules, cfg: SyntheticConfig, n: int, variant_prob: float,
                    phones: Sequence[str], words: Optional[Sequence[str]] = None,
                    label: str = "corpus"):
    if not 0.0 <= variant_prob <= 1.0:
        raise ValueError("variant_prob must be in [0, 1]")
    rng = derive_rng(cfg.seed, label)
    phones = tuple(phones)
    means = phone_means(phones, cfg)
    index = {p: i for i, p in enumerate(phones)}
    vocab = list(words) if words is not None else lexicon.words()
    silence = lexicon.inventory.silence_symbol
    corpus = []
    for _ in range(n):
        k = int(rng.integers(1, cfg.max_words + 1))
        transcript = tuple(vocab[i] for i in rng.integers(len(vocab), size=k))
        spoken, realized = [], []
        for pos, word in enumerate(transcript):
            if rng.random() < cfg.silence_prob:
                realized.append(silence)
            prons = lexicon[word]
            canonical = prons[int(rng.integers(len(prons)))]
            variant = sample_realization(canonical, rules, variant_prob, rng)
            spoken.extend(variant)
            realized.extend(variant)
        if rng.random() < cfg.silence_prob:
            realized.append(silence)
        durations = rng.integers(cfg.min_frames, cfg.max_frames + 1, size=len(realized))
        alignment = tuple(p for p, d in zip(realized, durations) for _ in range(d))
        ids = np.array([index[p] for p in alignment])
        feats = means[ids] + cfg.noise_sigma * rng.normal(size=(len(ids), cfg.feature_dim))
        corpus.append(SyntheticUtterance(transcript, tuple(spoken), tuple(realized),
                                         feats, alignment))
    return corpus


class ToyModel:
    """Affine (or one tanh hidden layer) map to log-softmax pdf scores."""

    def __init__(self, input_dim: int, num_classes: int, hidden: int = 0,
                 seed: int = 0, init_scale: float = 0.1):
        rng = derive_rng(seed, "model")
        self.input_dim, self.num_classes, self.hidden = input_dim, num_classes, hidden
        if hidden:
            self.params = {
                "W1": init_scale * rng.normal(size=(input_dim, hidden)),
                "b1": np.zeros(hidden),
                "W2": init_scale * rng.normal(size=(hidden, num_classes)),
                "b2": np.zeros(num_classes),
            }
        else:
            self.params = {
                "W": init_scale * rng.normal(size=(input_dim, num_classes)),
                "b": np.zeros(num_classes),
            }

    def copy(self) -> "ToyModel":
        other = ToyModel.__new__(ToyModel)
        other.input_dim, other.num_classes, other.hidden = (
            self.input_dim, self.num_classes, self.hidden)
        other.params = {k: v.copy() for k, v in self.params.items()}
        return other

    def _logits(self, x):
        p = self.params
        if self.hidden:
            h = np.tanh(x @ p["W1"] + p["b1"])
            return h @ p["W2"] + p["b2"], h
        return x @ p["W"] + p["b"], None

    def log_probs(self, x) -> np.ndarray:
        z, _ = self._logits(np.asarray(x, dtype=float))
        z = z - z.max(axis=1, keepdims=True)
        return z - np.log(np.exp(z).sum(axis=1, keepdims=True))

    def backward(self, x, grad_out) -> dict:
        """Parameter gradients of a scalar whose gradient w.r.t. the
        log-softmax outputs is ``grad_out``."""
        x = np.asarray(x, dtype=float)
        z, h = self._logits(x)
        z = z - z.max(axis=1, keepdims=True)
        soft = np.exp(z)
        soft /= soft.sum(axis=1, keepdims=True)
        gz = grad_out - soft * grad_out.sum(axis=1, keepdims=True)
        if not self.hidden:
            return {"W": x.T @ gz, "b": gz.sum(axis=0)}
        p = self.params
        gh = (gz @ p["W2"].T) * (1.0 - h * h)
        return {"W1": x.T @ gh, "b1": gh.sum(axis=0), "W2": h.T @ gz, "b2": gz.sum(axis=0)}

    def to_bytes(self) -> bytes:
        """``XFLT1`` magic, three little-endian uint32 sizes (D, H, C) and the
        float64 parameters in fixed order."""
        head = MODEL_MAGIC + struct.pack("<III", self.input_dim, self.hidden, self.num_classes)
        body = b"".join(np.ascontiguousarray(self.params[k], dtype="<f8").tobytes()
                        for k in sorted(self.params))
        return head + body

    @classmethod
    def from_bytes(cls, data: bytes) -> "ToyModel":
        if data[:5] != MODEL_MAGIC:
            raise ValueError("not an XFLT1 model file")
        D, H, C = struct.unpack("<III", data[5:17])
        model = cls(D, C, H)
        offset = 17
        for k in sorted(model.params):
            shape = model.params[k].shape
            size = int(np.prod(shape)) * 8
            model.params[k] = np.frombuffer(data[offset:offset + size], dtype="<f8").reshape(shape).copy()
            offset += size
        if offset != len(data):
            raise ValueError("trailing bytes in model file")
        return model


    def save(self, path):
        with open(path, "wb") as f:
            f.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "ToyModel":
        with open(path, "rb") as f:
            return cls.from_bytes(f.read())


@dataclass
class TrainResult:
    model: ToyModel
    loss_trace: list  # mean -F before training, then after each epoch
    skipped: int = 0
    skipped_indices: list = field(default_factory=list)


def mean_objective(model, corpus, numerators, den) -> float:
    vals = [objective(n, den, model.log_probs(u.features)) for u, n in zip(corpus, numerators)]
    return float(np.mean(vals)) if vals else float("nan")


def train(model: ToyModel, corpus, numerators, den, lr: float = 0.05, epochs: int = 10,
          batch: int = 16) -> TrainResult:
    """Gradient ascent on the mean LF-MMI objective.

    Batches follow corpus order.  Utterances whose numerator has no path of
    the right length are skipped and counted.
    """
    if len(corpus) != len(numerators):
        raise ValueError("one numerator graph per utterance is required")
    model = model.copy()
    keep, skipped = [], []
    for i, (u, num) in enumerate(zip(corpus, numerators)):
        f = objective(num, den, model.log_probs(u.features))
        if not np.isfinite(f):
            skipped.append(i)
            continue
        keep.append((i, f))
    if skipped:
        log.warning("skipping %d infeasible utterances", len(skipped))
    order = [i for i, _ in keep]
    trace = [-float(np.mean([f for _, f in keep]))] if keep else [float("nan")]
    for _ in range(epochs):
        for b in range(0, len(order), batch):
            idx = order[b:b + batch]
            grads = {k: np.zeros_like(v) for k, v in model.params.items()}
            for i in idx:
                u = corpus[i]
                res = lfmmi(numerators[i], den, model.log_probs(u.features))
                for k, g in model.backward(u.features, res.gradient).items():
                    grads[k] += g
            for k in grads:
                model.params[k] += lr * grads[k] / len(idx)
        trace.append(-mean_objective(model, [corpus[i] for i in order],
                                     [numerators[i] for i in order], den))
    return TrainResult(model, trace, len(skipped), skipped)


def decode_scores(scores, graph) -> tuple:
    """Best phone sequence of ``graph`` under a T x C score matrix.

    Self-loops are collapsed and every pdf is mapped to its (right) phone.
    """
    fst = graph.fst
    _, path = wfst.viterbi_arcs(fst, scores)
    arr = wfst.arc_arrays(fst)
    phones = []
    for k in path:
        if arr.src[k] == arr.dst[k]:
            continue
        _, phone = pdf_context(int(arr.ilabel[k]), graph.cfg)
        phones.append(graph.cfg.phones[phone])
    return tuple(phones)


def decode_viterbi(model, utterance, graph) -> tuple:
    return decode_scores(model.log_probs(utterance.features), graph)


def strip_silence(seq, silence):
    return tuple(p for p in seq if p != silence)


def variant_recovery_rate(model, corpus, graphs, silence: str) -> float:
    hits = 0
    for u, g in zip(corpus, graphs):
        hits += strip_silence(decode_viterbi(model, u, g), silence) == u.spoken_variant
    return hits / len(corpus)


def chance_level(counts) -> tuple:
    """Mean of 1/|variants| and the binomial sigma of a chance-level rate."""
    p = 1.0 / np.asarray(counts, dtype=float)
    return float(p.mean()), float(np.sqrt(np.sum(p * (1 - p))) / len(p))


@dataclass
class ToyExperiment:
    """Inputs and outputs of the multi-candidate vs canonical-only comparison."""

    cfg: ContextConfig
    multi: TrainResult
    canonical: TrainResult
    multi_rate: float
    canonical_rate: float
    chance: float
    chance_sigma: float
    den_text: str
    thank_num_text: str = ""
    report: list = field(default_factory=list)


def toy_phone_set(lexicon, rules, words=None):
    """Phones reachable from ``words`` under ``rules``, in inventory order, plus silence."""
    words = words if words is not None else lexicon.words()
    used = set()
    for w in words:
        for pron in lexicon[w]:
            for sym in pron:
                for alt in rules.options(sym):
                    used.update(alt)
    inv = lexicon.inventory
    return tuple(s for s in inv.symbols if s in used) + (inv.silence_symbol,)


def run_toy_experiment(lexicon, rules, seed: int = 42, variant_prob: float = 0.7,
                       n_train: int = 500, n_test: int = 200, epochs: int = 5,
                       lr: float = 0.05, batch: int = 16, hidden: int = 0,
                       synth: Optional[SyntheticConfig] = None, den_mode: str = "bigram",
                       add_k: float = 1.0) -> ToyExperiment:
    """Train a multi-candidate and a canonical-only model on the same corpus
    and compare their variant recovery on held-out data."""
    from .graph import compile_denominator, estimate_phone_bigram, uniform_bigram
    from .rules import RuleSet

    synth = synth or SyntheticConfig(seed=seed)
    phones = toy_phone_set(lexicon, rules)
    cfg = ContextConfig(MONOPHONE, phones)
    silence = lexicon.inventory.silence_symbol
    train_set = generate_corpus(lexicon, rules, synth, n_train, variant_prob, phones,
                                label="train")
    test_set = generate_corpus(lexicon, rules, synth, n_test, variant_prob, phones,
                               label="test")
    no_rules = RuleSet({}, lexicon.inventory)

    def numerators(corpus, rs):
        return [compile_numerator(build_utterance_fsa(u.transcript, lexicon, rs), cfg)
                for u in corpus]

    multi_num = numerators(train_set, rules)
    canon_num = numerators(train_set, no_rules)
    if den_mode == "uniform":
        lm = uniform_bigram(phones)
    else:
        lm = estimate_phone_bigram(_transcript_prons(train_set, lexicon), phones, add_k)
    den = compile_denominator(lm, cfg)
    init = ToyModel(synth.feature_dim, cfg.num_pdfs, hidden, seed=seed)
    multi = train(init, train_set, multi_num, den, lr, epochs, batch)
    canon = train(init, train_set, canon_num, den, lr, epochs, batch)
    test_fsas = [build_utterance_fsa(u.transcript, lexicon, rules) for u in test_set]
    test_graphs = [compile_numerator(f, cfg) for f in test_fsas]
    multi_rate = variant_recovery_rate(multi.model, test_set, test_graphs, silence)
    canon_rate = variant_recovery_rate(canon.model, test_set, test_graphs, silence)
    counts = [int(np.prod(f.variant_counts)) for f in test_fsas]
    chance, sigma = chance_level(counts)
    report = [("multi_candidate", multi_rate), ("canonical_only", canon_rate),
              ("chance", chance), ("chance_sigma", sigma)]
    return ToyExperiment(cfg, multi, canon, multi_rate, canon_rate, chance, sigma,
                         den.to_text(), report=report)


def _transcript_prons(corpus, lexicon):
    """Canonical phone sequence of every transcript (first pronunciation per word)."""
    return [tuple(p for w in u.transcript for p in lexicon[w][0]) for u in corpus]
