"""Walk through the variant pipeline for one word.

Run: python demos/thank_variants.py
"""

from xferlat import wfst
from xferlat.graph import LEFT_BIPHONE, ContextConfig, compile_numerator, pdf_context
from xferlat.inventory import default_unified
from xferlat.lexicon import build_utterance_fsa, build_word_fst, default_lexicon, path_symbols
from xferlat.rules import default_rules

unified = default_unified()
print(unified)
for ko, en in unified.ties:
    print(f"  {ko:4s} -> {en}")

lexicon = default_lexicon(unified)
rules = default_rules(unified)
print("\nTHANK canonical:", " ".join(lexicon["THANK"][0]))
for sym in lexicon["THANK"][0]:
    opts = [" ".join(o) for o in rules.options(sym)]
    print(f"  {sym}: {' | '.join(opts)}")

# the word acceptor: one parallel arc per option and position
word = build_word_fst("THANK", lexicon, rules)
print(f"\nword FST: {word.num_states} states, {word.num_arcs()} arcs")
for seq in path_symbols(word, wfst.enumerate_paths(word)):
    print("  ", " ".join(seq))

# numerator graph over left-biphone pdfs, with 1-state HMM self-loops
cfg = ContextConfig.for_inventory(unified, LEFT_BIPHONE)
utt = build_utterance_fsa(["THANK"], lexicon, rules, optional_silence=False)
num = compile_numerator(utt, cfg).check()
print(f"\nnumerator: {num.fst.num_states} states, {num.fst.num_arcs()} arcs, "
      f"{cfg.num_pdfs} pdfs")
for pdfs, _ in wfst.enumerate_paths(num.fst, skip_self_loops=True):
    ctx = []
    for p in pdfs:
        left, q = pdf_context(p, cfg)
        ctx.append(f"{'B' if left is None else cfg.phones[left]}+{cfg.phones[q]}")
    print(f"   {pdfs}  {' '.join(ctx)}")

# with optional silence the path count multiplies by the silence slots
utt = build_utterance_fsa(["THANK", "IT"], lexicon, rules)
print("\nTHANK IT with optional silence:", len(wfst.enumerate_paths(utt.fst)), "paths")
