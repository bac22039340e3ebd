"""LF-MMI objective on a tiny monophone problem, checked by finite differences."""

import numpy as np

from xferlat import wfst
from xferlat.graph import (MONOPHONE, ContextConfig, compile_denominator, compile_numerator,
                           estimate_phone_bigram)
from xferlat.lfmmi import finite_diff_check, lfmmi

cfg = ContextConfig(MONOPHONE, ("a", "b", "c"))
syms = wfst.SymbolTable(cfg.phones)

# numerator: "a b" or "a c"; denominator: bigram phone loop
num_fsa = wfst.remove_epsilon(wfst.union(wfst.linear_fst([1, 2], symbols=syms),
                                         wfst.linear_fst([1, 3], symbols=syms)))
num = compile_numerator(num_fsa, cfg)
den = compile_denominator(estimate_phone_bigram([("a", "b"), ("c", "a")], cfg.phones), cfg)

rng = np.random.default_rng(0)
scores = rng.normal(size=(6, 3))
res = lfmmi(num, den, scores)
print(f"F = {res.objective:.6f}  (num {res.num_logprob:.4f}, den {res.den_logprob:.4f})")
print("numerator occupancy:\n", res.num_occupancy.round(3))
print("gradient row sums:", np.abs(res.gradient.sum(axis=1)).max())

# central differences: error should fall roughly 100x per decade of h
for h in (1e-2, 1e-3, 1e-4):
    print(f"h={h:g}  max rel err {finite_diff_check(num, den, scores, h=h):.2e}")

# the identity case
print("F(num, num) =", lfmmi(num, num, scores).objective)
