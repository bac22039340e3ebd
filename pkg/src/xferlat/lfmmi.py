"""Lattice-free MMI objective and its exact gradient.

Graphs are time-synchronous: every frame consumes exactly one arc (self-loops
included), and an arc with pdf ``k`` reads column ``k - 1`` of the T x C
score matrix.  All sums are computed in the log domain.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import wfst

NEG_INF = -np.inf


class InfeasibleError(ValueError):
    """No accepting path of the required number of frames."""


class _Plan(NamedTuple):
    n: int
    start: int
    final: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    col: np.ndarray
    weight: np.ndarray
    # arcs permuted by destination, with segment starts and owners
    by_dst: np.ndarray
    dst_starts: np.ndarray
    dst_owner: np.ndarray
    dst_seg: np.ndarray
    # arcs in source order (arc_arrays already groups by source)
    src_starts: np.ndarray
    src_owner: np.ndarray
    src_seg: np.ndarray


def _segments(keys):
    if len(keys) == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, empty
    starts = np.flatnonzero(np.r_[True, keys[1:] != keys[:-1]])
    seg = np.repeat(np.arange(len(starts)), np.diff(np.r_[starts, len(keys)]))
    return starts, keys[starts], seg


def _plan(graph) -> _Plan:
    cached = getattr(graph, "_arrays", None)
    if cached is not None:
        return cached
    fst = getattr(graph, "fst", graph)
    arr = wfst.arc_arrays(fst)
    if arr.start < 0:
        raise InfeasibleError("graph has no start state")
    if len(arr.ilabel) and arr.ilabel.min() < 1:
        raise ValueError("graph has epsilon arcs")
    by_dst = np.argsort(arr.dst, kind="stable")
    d_starts, d_owner, d_seg = _segments(arr.dst[by_dst])
    s_starts, s_owner, s_seg = _segments(arr.src)
    plan = _Plan(fst.num_states, arr.start, arr.final, arr.src, arr.dst,
                 arr.ilabel - 1, arr.weight, by_dst, d_starts, d_owner, d_seg,
                 s_starts, s_owner, s_seg)
    if hasattr(graph, "_arrays"):
        graph._arrays = plan
    return plan


def _segment_logsumexp(v, starts, seg):
    m = np.maximum.reduceat(v, starts)
    shift = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        return shift + np.log(np.add.reduceat(np.exp(v - shift[seg]), starts))


def _logsumexp(v):
    m = np.max(v) if len(v) else NEG_INF
    if not np.isfinite(m):
        return float(m) if len(v) else NEG_INF
    return float(m + np.log(np.sum(np.exp(v - m))))


def _scores(plan, scores):
    x = np.asarray(scores, dtype=float)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError("scores must be a T x C matrix with T >= 1")
    if len(plan.col) and plan.col.max() >= x.shape[1]:
        raise ValueError(f"pdf {plan.col.max() + 1} outside {x.shape[1]} score columns")
    return x


def _forward(plan, x):
    T = x.shape[0]
    alpha = np.full((T + 1, plan.n), NEG_INF)
    alpha[0, plan.start] = 0.0
    if len(plan.src) == 0:
        return alpha
    p = plan.by_dst
    src, col, w = plan.src[p], plan.col[p], plan.weight[p]
    for t in range(T):
        v = alpha[t, src] + w + x[t, col]
        alpha[t + 1, plan.dst_owner] = _segment_logsumexp(v, plan.dst_starts, plan.dst_seg)
    return alpha


def _backward(plan, x):
    T = x.shape[0]
    beta = np.full((T + 1, plan.n), NEG_INF)
    beta[T] = plan.final
    if len(plan.src) == 0:
        return beta
    for t in range(T - 1, -1, -1):
        v = plan.weight + x[t, plan.col] + beta[t + 1, plan.dst]
        beta[t, plan.src_owner] = _segment_logsumexp(v, plan.src_starts, plan.src_seg)
    return beta


def forward_score(graph, scores) -> float:
    """log of the summed score of all length-T accepting paths (-inf if none)."""
    plan = _plan(graph)
    x = _scores(plan, scores)
    alpha = _forward(plan, x)
    return _logsumexp(alpha[-1] + plan.final)


def backward_score(graph, scores) -> float:
    plan = _plan(graph)
    x = _scores(plan, scores)
    return float(_backward(plan, x)[0, plan.start])


def forward_backward(graph, scores):
    """Total log-score and T x C pdf occupancies.

    ``occupancies[t, k]`` is the posterior probability that frame t is
    emitted by an arc with pdf k + 1.
    """
    plan = _plan(graph)
    x = _scores(plan, scores)
    T, C = x.shape
    alpha = _forward(plan, x)
    total = _logsumexp(alpha[-1] + plan.final)
    if total == NEG_INF:
        raise InfeasibleError(f"no accepting path of length {T}")
    beta = _backward(plan, x)
    gamma = np.zeros((T, C))
    for t in range(T):
        post = np.exp(alpha[t, plan.src] + plan.weight + x[t, plan.col]
                      + beta[t + 1, plan.dst] - total)
        gamma[t] = np.bincount(plan.col, weights=post, minlength=C)
    return total, gamma


@dataclass
class MmiResult:
    objective: float
    num_logprob: float
    den_logprob: float
    gradient: np.ndarray  # dF/dscores = numerator minus denominator occupancy
    num_occupancy: np.ndarray
    den_occupancy: np.ndarray


def lfmmi(num, den, scores) -> MmiResult:
    """F = log p(X | numerator) - log p(X | denominator) with its gradient."""
    try:
        num_lp, num_occ = forward_backward(num, scores)
    except InfeasibleError as err:
        raise InfeasibleError(f"numerator infeasible: {err}") from None
    try:
        den_lp, den_occ = forward_backward(den, scores)
    except InfeasibleError as err:
        raise InfeasibleError(f"denominator infeasible: {err}") from None
    return MmiResult(num_lp - den_lp, num_lp, den_lp, num_occ - den_occ,
                     num_occ, den_occ)


def objective(num, den, scores) -> float:
    return forward_score(num, scores) - forward_score(den, scores)


def finite_diff_check(num, den, scores, h: float = 1e-4, atol_below: float = 1e-6) -> float:
    """Max error of the analytic gradient against central differences.

    Entries whose analytic gradient is below ``atol_below`` in magnitude are
    compared absolutely, the rest relatively.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    x = np.array(scores, dtype=float)
    grad = lfmmi(num, den, x).gradient
    worst = 0.0
    for idx in np.ndindex(x.shape):
        orig = x[idx]
        x[idx] = orig + h
        fp = objective(num, den, x)
        x[idx] = orig - h
        fm = objective(num, den, x)
        x[idx] = orig
        numeric = (fp - fm) / (2 * h)
        err = abs(numeric - grad[idx])
        if abs(grad[idx]) >= atol_below and grad[idx] != 0:
            err /= abs(grad[idx])
        worst = max(worst, err)
    return worst
