"""Bootstrapping the reputation of a brand-new composite service.

Every composition in the corpus has the same diamond shape: an entry service
calls two workers that both feed one aggregator. Deeper services influence the
composite's reputation more. A forest-fed chain of small networks follows the
invocation edges; the baselines either ignore the edges (TFRB) or take the
weakest component (min).

    python3 demos/bootstrap_composite.py
"""


import numpy as np

from repboot.core import CompositionSample
from repboot.data import GeneratorConfig, generate
from repboot.evaluation import compare_methods
from repboot.fdnn import ChainConfig, chain_structure, fit_chain, predict

corpus = generate(GeneratorConfig(seed=2, n_compositions=200, services=(4, 4), rho=0.6))
topo = corpus.samples[0].topology
print("edges of the first composition:")
for a, b in topo.edges:
    print(f"  {a} -> {b}")

blocks, _, sink = chain_structure(topo)
print(f"\nchain: {len(blocks)} blocks, sink block {sink}")

train, fresh = corpus.samples[:180], corpus.samples[180:]
chain, result = fit_chain(train, corpus.schema, corpus.lvl_count, ChainConfig(seed=2))
print(f"final training loss {result.loss_trace[-1]:.3f}")

print("\nnew composites (true level unknown to the model):")
for s in fresh[:5]:
    level, bp = predict(chain, CompositionSample(s.topology))
    print(f"  predicted level {level}  bp {bp:.4f}   (generator said {s.observed_level})")

print("\n5-fold comparison:")
report = compare_methods(corpus, ("fdnn", "tfrb", "min"), k=5, seed=2)
print(report.format_table())
p = report.predictions["fdnn"]
hit = np.array(p["levels"]) == np.array(p["labels"])
bp = np.array(p["confidence"])
print(f"\nmean bp when right {bp[hit].mean():.3f}, when wrong {bp[~hit].mean():.3f}")
