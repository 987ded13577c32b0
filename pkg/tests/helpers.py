"""Small corpora shared by several test modules."""

from dataclasses import replace

from repboot.core import CompositionSample
from repboot.data import GeneratorConfig, generate
from repboot.fdnn import canonical_order


def small_corpus(n=40, seed=0, **kw):
    kw.setdefault("services", (3, 3))
    kw.setdefault("patterns", {"Sequential": 1.0})
    return generate(GeneratorConfig(seed=seed, n_compositions=n, **kw))


def relabel_by_root(corpus):
    """Composite label := observed level of the first canonical service."""
    out = []
    for s in corpus.samples:
        root = s.topology.service(canonical_order(s.topology)[0])
        out.append(CompositionSample(s.topology, root.observed_level))
    return replace(corpus, samples=out)
