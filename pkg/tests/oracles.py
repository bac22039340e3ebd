"""Brute-force references used to check the fast implementations."""

import itertools
import math

import numpy as np

from xferlat import wfst


def random_graph(rng, max_states=6, max_arcs=8, num_labels=4, weighted=True):
    """Small random machine with labels in 1..num_labels (no epsilons)."""
    n = int(rng.integers(1, max_states + 1))
    f = wfst.Fst(wfst.LOG)
    f.add_states(n)
    f.set_start(0)
    for _ in range(int(rng.integers(1, max_arcs + 1))):
        w = float(rng.normal()) if weighted else 0.0
        f.add_arc(int(rng.integers(n)), int(rng.integers(1, num_labels + 1)), 1, w,
                  int(rng.integers(n)))
    for s in range(n):
        if rng.random() < 0.5 or s == n - 1:
            f.set_final(s, float(rng.normal()) if weighted else 0.0)
    return f


def timed_paths(fst, T):
    """Every accepting arc sequence of exactly T arcs as (arcs, log-weight)."""
    out = []

    def walk(s, t, arcs, w):
        if t == T:
            if fst.is_final(s):
                out.append((tuple(arcs), w + fst.final(s)))
            return
        for a in fst.arcs(s):
            walk(a.nextstate, t + 1, arcs + [a], w + a.weight)

    if fst.start is not None:
        walk(fst.start, 0, [], 0.0)
    return out


def path_score(arcs, w, scores):
    return w + sum(scores[t, a.ilabel - 1] for t, a in enumerate(arcs))


def brute_forward(fst, scores):
    vals = [path_score(a, w, scores) for a, w in timed_paths(fst, scores.shape[0])]
    if not vals:
        return -math.inf
    m = max(vals)
    return m + math.log(sum(math.exp(v - m) for v in vals))


def brute_occupancy(fst, scores):
    T, C = scores.shape
    paths = timed_paths(fst, T)
    vals = np.array([path_score(a, w, scores) for a, w in paths])
    post = np.exp(vals - vals.max())
    post /= post.sum()
    gamma = np.zeros((T, C))
    for (arcs, _), p in zip(paths, post):
        for t, a in enumerate(arcs):
            gamma[t, a.ilabel - 1] += p
    return gamma


def brute_viterbi(fst, scores):
    """Best arc sequence; ties to the lexicographically smallest state path."""
    best = None
    for arcs, w in timed_paths(fst, scores.shape[0]):
        v = path_score(arcs, w, scores)
        states = tuple(a.nextstate for a in arcs)
        key = (-v, states)
        if best is None or key < best[0]:
            best = (key, arcs, v)
    return best


def collapse(labels_per_frame):
    return tuple(k for k, _ in itertools.groupby(labels_per_frame))


def random_instance(rng, T=None, C=4, max_states=6, max_arcs=8):
    """Feasible (num, den, scores) triple: den is num plus extra random arcs."""
    from xferlat import lfmmi

    while True:
        T = T or int(rng.integers(1, 7))
        num = random_graph(rng, max_states, max_arcs, C)
        den = num.copy()
        for _ in range(int(rng.integers(1, 5))):
            n = den.num_states
            den.add_arc(int(rng.integers(n)), int(rng.integers(1, C + 1)), 1,
                        float(rng.normal()), int(rng.integers(n)))
        scores = rng.normal(size=(T, C))
        if lfmmi.forward_score(num, scores) > -math.inf:
            return num, den, scores
        T = None
