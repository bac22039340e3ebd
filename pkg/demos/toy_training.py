"""Multi-candidate vs canonical-only training on synthetic Gaussian features.

Takes about half a minute.
"""

from xferlat.inventory import default_unified
from xferlat.lexicon import default_lexicon
from xferlat.rules import default_rules
from xferlat.train import run_toy_experiment

unified = default_unified()
lexicon = default_lexicon(unified, "toy_lexicon.txt")
rules = default_rules(unified, "toy.rules")

exp = run_toy_experiment(lexicon, rules, seed=42, variant_prob=0.7)
print("phones:", " ".join(exp.cfg.phones))
print("epoch  -F(multi)  -F(canonical)")
for i, (a, b) in enumerate(zip(exp.multi.loss_trace, exp.canonical.loss_trace)):
    print(f"{i:5d}  {a:9.3f}  {b:13.3f}")
print()
for name, value in exp.report:
    print(f"{name:16s} {value:.3f}")
print(f"chance + 3 sigma  {exp.chance + 3 * exp.chance_sigma:.3f}")
