"""Forest-fed neural blocks chained along a composition topology.

Each non-source service of the composition owns one block. A block's inputs
are, for every invoker of its service, either the invoker's forest matrix (when
the invoker is itself a source) or the output distribution of the invoker's
block, followed by the service's own forest matrix. When the topology has
several sinks, one extra block merges their outputs. The sink block's softmax
is the composite prediction.
"""

from __future__ import annotations

import graphlib
import hashlib
import json
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .core import (CompositionSample, CompositionTopology, DomainError, IndicatorSchema,
                   ServiceRecord, validate_topology)
from .forest import (DecisionForest, FeatureEncoder, ForestParams, build_forest,
                     oob_error, vote_confidence)
from .neural import (AdamState, Network, NetworkSpec, TrainConfig, adam_step,
                     cross_entropy, default_hidden_widths, one_hot, softmax,
                     softmax_backward)

MODEL_FORMAT_VERSION = 1


class ChainShapeError(ValueError):
    """A sample's topology does not match the chain it is fed to."""


# --------------------------------------------------------------------------
# topology helpers


def dependency_depths(topology: CompositionTopology) -> dict[str, int]:
    """1 + length of the longest directed path from each service to a sink."""
    validate_topology(topology)
    succ = topology.successors()
    order = list(graphlib.TopologicalSorter(topology.predecessors()).static_order())
    depth: dict[str, int] = {}
    for s in reversed(order):
        depth[s] = 1 + max((depth[c] for c in succ[s]), default=0)
    return depth


def _dense_rank(keys: dict) -> dict:
    ordered = sorted(set(keys.values()))
    where = {k: i for i, k in enumerate(ordered)}
    return {s: where[k] for s, k in keys.items()}


def canonical_order(topology: CompositionTopology) -> list[str]:
    """Service ids ordered by depth (descending), then degree, refined by neighbours.

    Structurally equivalent positions are finally ordered by service id.
    """
    depth = dependency_depths(topology)
    succ, pred = topology.successors(), topology.predecessors()
    rank = _dense_rank({s: (-depth[s], -len(succ[s]), -len(pred[s])) for s in depth})
    for _ in range(len(depth)):
        refined = _dense_rank({
            s: (rank[s], tuple(sorted(rank[c] for c in succ[s])),
                tuple(sorted(rank[p] for p in pred[s])))
            for s in depth})
        if len(set(refined.values())) == len(set(rank.values())):
            break
        rank = refined
    return sorted(depth, key=lambda s: (rank[s], s))


def canonical_edges(topology: CompositionTopology) -> list[tuple[int, int]]:
    pos = {s: i for i, s in enumerate(canonical_order(topology))}
    return sorted((pos[a], pos[b]) for a, b in topology.edges)


def topology_hash(topology: CompositionTopology) -> str:
    payload = json.dumps({"n": len(topology.services), "edges": canonical_edges(topology)})
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def aligned_records(sample: CompositionSample | CompositionTopology) -> list[ServiceRecord]:
    topo = sample.topology if isinstance(sample, CompositionSample) else sample
    return [topo.service(s) for s in canonical_order(topo)]


# --------------------------------------------------------------------------
# chain structure


@dataclass(frozen=True)
class Slot:
    kind: str  # "service" (a position's forest matrix) or "block" (an upstream output)
    ref: int


@dataclass
class Block:
    inputs: list[Slot]
    service: int | None  # owning position; None for a merge block
    network: Network | None = None


def chain_structure(topology: CompositionTopology) -> tuple[list[Block], list[int], int]:
    """Blocks, their topological order and the sink index for a topology.

    Edges are visited once each in descending order of invoker depth. An edge
    into a service that has no block yet creates that service's block; later
    edges into it attach further inputs to the same block.
    """
    order = canonical_order(topology)
    pos = {s: i for i, s in enumerate(order)}
    depth = dependency_depths(topology)
    edges = sorted(topology.edges,
                   key=lambda e: (-depth[e[0]], -depth[e[1]], pos[e[0]], pos[e[1]]))
    blocks: list[Block] = []
    owned: dict[int, int] = {}
    for a, b in edges:
        i, j = pos[a], pos[b]
        upstream = Slot("block", owned[i]) if i in owned else Slot("service", i)
        if j not in owned:
            blocks.append(Block([upstream, Slot("service", j)], service=j))
            owned[j] = len(blocks) - 1
        else:
            inputs = blocks[owned[j]].inputs
            if upstream not in inputs:
                inputs.insert(len(inputs) - 1, upstream)
    if not blocks:
        blocks.append(Block([Slot("service", 0)], service=0))

    consumed = {s.ref for blk in blocks for s in blk.inputs if s.kind == "block"}
    terminal = [i for i in range(len(blocks)) if i not in consumed]
    if len(terminal) > 1:
        blocks.append(Block([Slot("block", t) for t in terminal], service=None))
        sink = len(blocks) - 1
    else:
        sink = terminal[0]
    deps = {i: {s.ref for s in blk.inputs if s.kind == "block"} for i, blk in enumerate(blocks)}
    topo = list(graphlib.TopologicalSorter(deps).static_order())
    return blocks, topo, sink


# --------------------------------------------------------------------------
# forest matrices


@dataclass(frozen=True)
class ForestMatrixSpec:
    selected: tuple[int, ...]
    encoding: str = "scalar"  # or "onehot"

    def width(self, lvl_count: int) -> int:
        return len(self.selected) * (lvl_count if self.encoding == "onehot" else 1)


def select_trees(forest: DecisionForest, oob_rates: np.ndarray, k: int) -> tuple[int, ...]:
    """The ``k`` trees with the lowest out-of-bag error; ties by tree index."""
    if not 1 <= k <= len(forest.trees):
        raise ValueError(f"k must lie in [1, {len(forest.trees)}]")
    rates = np.where(np.isnan(oob_rates), np.inf, oob_rates)
    order = np.lexsort((np.arange(len(rates)), rates))
    return tuple(int(i) for i in order[:k])


def forest_matrix(spec: ForestMatrixSpec, forest: DecisionForest, X) -> np.ndarray:
    """Per selected tree, the predicted level of each row mapped into [0, 1]."""
    X = forest._rows(X)
    preds = np.stack([forest.trees[t].predict(X) for t in spec.selected], axis=1)
    L = forest.lvl_count
    if spec.encoding == "onehot":
        out = np.zeros((len(X), len(spec.selected), L))
        np.put_along_axis(out, (preds - 1)[..., None], 1.0, axis=2)
        return out.reshape(len(X), -1)
    return (preds - 1) / (L - 1)


class RawEncoder:
    """Dense per-service features for networks fed without a forest."""

    def __init__(self, schema: IndicatorSchema):
        self.schema = schema

    @property
    def width(self) -> int:
        return sum(2 + len(self.schema.types[ind]) for ind in self.schema.indicators)

    def encode(self, records: Sequence[ServiceRecord]) -> np.ndarray:
        out = np.zeros((len(records), self.width))
        for r, rec in enumerate(records):
            off = 0
            for ind in self.schema.indicators:
                vocab = self.schema.types[ind]
                val = rec.indicators.get(ind)
                if val is not None:
                    out[r, off] = val.rating
                    out[r, off + 1] = 1.0
                    tag = val.type_tag if val.type_tag in vocab else "U"
                    out[r, off + 2 + vocab.index(tag)] = 1.0
                off += 2 + len(vocab)
        return out


# --------------------------------------------------------------------------
# chained network


class ChainedFDNN:
    """A DAG of neural blocks whose leaves read per-position service features.

    ``input_mode`` is ``"forest"`` for forest matrices or ``"raw"`` to feed the
    encoded indicators directly (the network-only comparator).
    """

    def __init__(self, edges: Sequence[tuple[int, int]], n_services: int, blocks: list[Block],
                 order: list[int], sink: int, lvl_count: int, schema: IndicatorSchema,
                 forests: list[DecisionForest] | None = None,
                 specs: list[ForestMatrixSpec] | None = None, input_mode: str = "forest",
                 topology_key: str | None = None):
        self.edges = [tuple(e) for e in edges]
        self.n_services = n_services
        self.blocks = blocks
        self.order = order
        self.sink = sink
        self.lvl_count = lvl_count
        self.schema = schema
        self.forests = forests
        self.specs = specs
        self.input_mode = input_mode
        self.topology_key = topology_key
        self.metadata: dict = {}
        if input_mode == "forest" and (forests is None or specs is None):
            raise ValueError("forest input mode needs a forest and a spec per service")
        if input_mode not in ("forest", "raw"):
            raise ValueError(f"unknown input mode {input_mode!r}")
        self._raw = RawEncoder(schema)

    # -- wiring --------------------------------------------------------

    def service_width(self, position: int) -> int:
        if self.input_mode == "raw":
            return self._raw.width
        return self.specs[position].width(self.lvl_count)

    def slot_width(self, slot: Slot) -> int:
        return self.service_width(slot.ref) if slot.kind == "service" else self.lvl_count

    def block_input_width(self, b: int) -> int:
        return sum(self.slot_width(s) for s in self.blocks[b].inputs)

    def init_networks(self, rng: np.random.Generator, hidden_widths=None, n_hidden: int = 2):
        for b in range(len(self.blocks)):
            width = self.block_input_width(b)
            hidden = hidden_widths or default_hidden_widths(width, self.lvl_count, n_hidden)
            spec = NetworkSpec(width, tuple(hidden), self.lvl_count)
            self.blocks[b].network = Network.initialize(spec, rng)

    @property
    def networks(self) -> list[Network]:
        return [blk.network for blk in self.blocks]

    @property
    def params(self) -> list[np.ndarray]:
        out = []
        for net in self.networks:
            out += net.params
        return out

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.params)

    # -- inputs ----------------------------------------------------------

    def check_sample(self, sample) -> None:
        topo = sample.topology if isinstance(sample, CompositionSample) else sample
        if len(topo.services) != self.n_services or canonical_edges(topo) != self.edges:
            raise ChainShapeError("sample topology does not match the chain")

    def service_inputs(self, samples: Sequence[CompositionSample]) -> list[np.ndarray]:
        """Per position, the stacked forest matrices (or raw features) of all samples."""
        for s in samples:
            self.check_sample(s)
        aligned = [aligned_records(s) for s in samples]
        out = []
        for p in range(self.n_services):
            recs = [a[p] for a in aligned]
            if self.input_mode == "raw":
                out.append(self._raw.encode(recs))
            else:
                forest = self.forests[p]
                out.append(forest_matrix(self.specs[p], forest, forest.encoder.encode(recs)))
        return out

    # -- forward / backward -------------------------------------------------

    def _block_input(self, b, inputs, outputs):
        parts = [inputs[s.ref] if s.kind == "service" else outputs[s.ref]
                 for s in self.blocks[b].inputs]
        return np.hstack(parts)

    def forward(self, inputs: list[np.ndarray], return_cache: bool = False):
        outputs: dict[int, np.ndarray] = {}
        caches = {}
        for b in self.order:
            X = self._block_input(b, inputs, outputs)
            probs, cache = self.blocks[b].network.forward(X, return_cache=True)
            outputs[b] = probs
            caches[b] = cache
        if return_cache:
            return outputs[self.sink], caches
        return outputs[self.sink]

    def sink_logits(self, inputs: list[np.ndarray]) -> np.ndarray:
        _, caches = self.forward(inputs, return_cache=True)
        return caches[self.sink][1]

    def backward(self, caches, grad_sink_logits) -> list[np.ndarray]:
        grad_probs: dict[int, np.ndarray] = {}
        per_block = {}
        for b in reversed(self.order):
            net = self.blocks[b].network
            if b == self.sink:
                g_logits = grad_sink_logits
            elif b in grad_probs:
                g_logits = softmax_backward(caches[b][2], grad_probs[b])
            else:
                g_logits = np.zeros_like(caches[b][1])
            grads, g_in = net.backward(caches[b], g_logits)
            per_block[b] = grads
            off = 0
            for s in self.blocks[b].inputs:
                w = self.slot_width(s)
                if s.kind == "block":
                    part = g_in[:, off:off + w]
                    grad_probs[s.ref] = grad_probs.get(s.ref, 0) + part
                off += w
        out = []
        for b in range(len(self.blocks)):
            out += per_block[b]
        return out

    def loss_and_gradients(self, inputs, Y):
        probs, caches = self.forward(inputs, return_cache=True)
        grads = self.backward(caches, (probs - Y) / len(Y))
        return cross_entropy(probs, Y), grads

    def loss(self, inputs, Y) -> float:
        return cross_entropy(self.forward(inputs), Y)

    # -- prediction -----------------------------------------------------------

    def predict_inputs(self, inputs) -> tuple[np.ndarray, np.ndarray]:
        logits = self.sink_logits(inputs)
        return np.argmax(logits, axis=1) + 1, bootstrap_probability(logits)

    def predict_samples(self, samples) -> tuple[np.ndarray, np.ndarray]:
        return self.predict_inputs(self.service_inputs(samples))

    # -- serialization ----------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "kind": "chained_fdnn",
            "topology_hash": self.topology_key,
            "n_services": self.n_services,
            "edges": [list(e) for e in self.edges],
            "lvl_count": self.lvl_count,
            "input_mode": self.input_mode,
            "blocks": [{"service": blk.service,
                        "inputs": [{"kind": s.kind, "ref": s.ref} for s in blk.inputs],
                        "network": blk.network.to_dict()} for blk in self.blocks],
            "order": list(self.order),
            "sink": self.sink,
            "forests": None if self.forests is None else [
                dict(f.to_dict(), selected=list(sp.selected), encoding=sp.encoding)
                for f, sp in zip(self.forests, self.specs)],
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, data: dict, schema: IndicatorSchema) -> "ChainedFDNN":
        if data.get("format_version") != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported chain format {data.get('format_version')!r}")
        blocks = [Block([Slot(s["kind"], s["ref"]) for s in b["inputs"]], b["service"],
                        Network.from_dict(b["network"])) for b in data["blocks"]]
        forests = specs = None
        if data.get("forests") is not None:
            enc = FeatureEncoder(schema)
            forests = [DecisionForest.from_dict(f, enc) for f in data["forests"]]
            specs = [ForestMatrixSpec(tuple(f["selected"]), f["encoding"])
                     for f in data["forests"]]
        chain = cls([tuple(e) for e in data["edges"]], data["n_services"], blocks,
                    data["order"], data["sink"], data["lvl_count"], schema, forests, specs,
                    data["input_mode"], data.get("topology_hash"))
        chain.metadata = data.get("metadata", {})
        return chain


def bootstrap_probability(activations) -> np.ndarray | float:
    """Softmax probability of the most activated output neuron."""
    a = np.asarray(activations, dtype=float)
    p = softmax(a).max(axis=-1)
    return float(p) if a.ndim == 1 else p


def build_chain(topology: CompositionTopology, forests: Sequence[DecisionForest] | None,
                schema: IndicatorSchema, lvl_count: int, k: int = 32,
                oob_rates: Sequence[np.ndarray] | None = None, hidden_widths=None,
                n_hidden: int = 2, seed: int = 0, input_mode: str = "forest",
                encoding: str = "scalar") -> ChainedFDNN:
    """Untrained chain for ``topology``; ``forests`` are indexed by canonical position."""
    blocks, order, sink = chain_structure(topology)
    n = len(topology.services)
    specs = None
    if input_mode == "forest":
        if forests is None or len(forests) != n or any(f is None for f in forests):
            raise ValueError("every service of the topology needs a trained forest")
        specs = []
        for p, f in enumerate(forests):
            rates = (oob_rates[p] if oob_rates is not None
                     else np.array([np.nan] * len(f.trees)))
            specs.append(ForestMatrixSpec(select_trees(f, rates, min(k, len(f.trees))),
                                          encoding))
        forests = list(forests)
    chain = ChainedFDNN(canonical_edges(topology), n, blocks, order, sink, lvl_count, schema,
                        forests, specs, input_mode, topology_hash(topology))
    chain.init_networks(np.random.default_rng(seed), hidden_widths, n_hidden)
    return chain


@dataclass
class ChainTrainResult:
    loss_trace: list[float] = field(default_factory=list)


def train_chain(chain: ChainedFDNN, samples: Sequence[CompositionSample],
                config: TrainConfig = TrainConfig(), mode: str = "end_to_end",
                inputs: list[np.ndarray] | None = None) -> ChainTrainResult:
    """Fit the block networks with Adam on the sink's cross-entropy.

    Forests stay frozen. ``mode="stagewise"`` instead fits blocks one at a time
    in topological order against the composite label, upstream blocks frozen.
    """
    if any(s.observed_level is None for s in samples):
        raise ValueError("training samples need an observed composite level")
    if inputs is None:
        inputs = chain.service_inputs(samples)
    Y = one_hot([s.observed_level for s in samples], chain.lvl_count)
    rng = np.random.default_rng(config.seed)
    result = ChainTrainResult()
    n = len(Y)
    if mode == "end_to_end":
        state = AdamState.zeros_like(chain.params)
        for _ in range(config.epochs):
            perm = rng.permutation(n)
            for start in range(0, n, config.batch_size):
                idx = perm[start:start + config.batch_size]
                _, grads = chain.loss_and_gradients([x[idx] for x in inputs], Y[idx])
                adam_step(chain.params, grads, config, state)
            result.loss_trace.append(chain.loss(inputs, Y))
    elif mode == "stagewise":
        for b in chain.order:
            net = chain.blocks[b].network
            state = AdamState.zeros_like(net.params)
            for _ in range(config.epochs):
                outputs = {}
                for u in chain.order:
                    if u == b:
                        break
                    outputs[u] = chain.blocks[u].network.forward(
                        chain._block_input(u, inputs, outputs))
                X = chain._block_input(b, inputs, outputs)
                perm = rng.permutation(n)
                for start in range(0, n, config.batch_size):
                    idx = perm[start:start + config.batch_size]
                    probs, cache = net.forward(X[idx], return_cache=True)
                    grads, _ = net.backward(cache, (probs - Y[idx]) / len(idx))
                    adam_step(net.params, grads, config, state)
                result.loss_trace.append(cross_entropy(net.forward(X), Y))
    else:
        raise ValueError(f"unknown training mode {mode!r}")
    return result


def predict(chain: ChainedFDNN, sample: CompositionSample | CompositionTopology):
    """Composite level and its bootstrapping probability for one composition."""
    if isinstance(sample, CompositionTopology):
        sample = CompositionSample(sample)
    levels, bp = chain.predict_samples([sample])
    return int(levels[0]), float(bp[0])


def accuracy(predicted, labels) -> float:
    """Share of correctly predicted samples."""
    predicted, labels = np.asarray(predicted), np.asarray(labels)
    if len(labels) == 0:
        raise DomainError("accuracy of an empty test set is undefined")
    return float(np.count_nonzero(predicted == labels) / len(labels))


def chain_accuracy(chain: ChainedFDNN, samples: Sequence[CompositionSample]) -> float:
    if not samples:
        raise DomainError("accuracy of an empty test set is undefined")
    levels, _ = chain.predict_samples(samples)
    return accuracy(levels, [s.observed_level for s in samples])


# --------------------------------------------------------------------------
# end-to-end fitting


@dataclass(frozen=True)
class ChainConfig:
    forest: ForestParams = ForestParams()
    k: int = 32
    n_hidden: int = 1
    hidden_widths: tuple[int, ...] | None = None
    train: TrainConfig = TrainConfig(learning_rate=0.01, batch_size=16, epochs=150)
    mode: str = "end_to_end"
    encoding: str = "scalar"
    component_labels: bool = True
    seed: int = 0


def _component_labels(samples, position_records, use_components):
    if use_components and all(r.observed_level is not None for r in position_records):
        return [r.observed_level for r in position_records]
    return [s.observed_level for s in samples]


def fit_position_forests(samples: Sequence[CompositionSample], schema: IndicatorSchema,
                         lvl_count: int, params: ForestParams, seed: int = 0,
                         component_labels: bool = True):
    """One forest per canonical position, plus each forest's per-tree OOB error."""
    aligned = [aligned_records(s) for s in samples]
    enc = FeatureEncoder(schema)
    forests, rates = [], []
    for p in range(len(aligned[0])):
        recs = [a[p] for a in aligned]
        labels = _component_labels(samples, recs, component_labels)
        fm = enc.matrix(recs, lvl_count, labels)
        forest = build_forest(fm, params=params, seed=seed + 7919 * p, encoder=enc)
        forests.append(forest)
        rates.append(oob_error(forest, fm).per_tree)
    return forests, rates


def fit_chain(samples: Sequence[CompositionSample], schema: IndicatorSchema, lvl_count: int,
              config: ChainConfig = ChainConfig(), input_mode: str = "forest"):
    """Train position forests, build the chain on the first sample's topology, fit it."""
    if not samples:
        raise ValueError("no training samples")
    topo = samples[0].topology
    forests = rates = None
    if input_mode == "forest":
        forests, rates = fit_position_forests(samples, schema, lvl_count, config.forest,
                                              config.seed, config.component_labels)
    chain = build_chain(topo, forests, schema, lvl_count, config.k, rates,
                        config.hidden_widths, config.n_hidden, config.seed, input_mode,
                        config.encoding)
    result = train_chain(chain, samples, replace(config.train, seed=config.seed), config.mode)
    chain.metadata = {"seed": config.seed, "epochs": config.train.epochs,
                      "final_loss": result.loss_trace[-1] if result.loss_trace else None,
                      "n_train": len(samples)}
    return chain, result


class ForestChain:
    """Forest-only comparator wired like :func:`chain_structure`.

    Each block is a forest over its services' indicator columns plus one column
    per upstream block holding that block's predicted level in [0, 1]. During
    training the upstream column carries out-of-bag votes.
    """

    def __init__(self, topology: CompositionTopology, schema: IndicatorSchema, lvl_count: int,
                 params: ForestParams = ForestParams(), seed: int = 0):
        self.blocks, self.order, self.sink = chain_structure(topology)
        self.edges = canonical_edges(topology)
        self.n_services = len(topology.services)
        self.schema = schema
        self.lvl_count = lvl_count
        self.params = params
        self.seed = seed
        self.encoder = FeatureEncoder(schema)
        self.forests: dict[int, DecisionForest] = {}

    def _service_columns(self, samples):
        aligned = [aligned_records(s) for s in samples]
        return [self.encoder.encode([a[p] for a in aligned]) for p in range(self.n_services)]

    def _block_matrix(self, b, cols, upstream):
        parts, cat = [], []
        for s in self.blocks[b].inputs:
            if s.kind == "service":
                parts.append(cols[s.ref])
                cat.append(self.encoder.categorical)
            else:
                parts.append(((upstream[s.ref] - 1) / (self.lvl_count - 1))[:, None])
                cat.append(np.array([False]))
        return np.hstack(parts), np.concatenate(cat)

    def fit(self, samples):
        from .forest import FeatureMatrix
        cols = self._service_columns(samples)
        y = np.array([s.observed_level for s in samples])
        upstream = {}
        for b in self.order:
            X, cat = self._block_matrix(b, cols, upstream)
            groups = [np.array([c]) for c in range(X.shape[1])]
            fm = FeatureMatrix(X, y, cat, groups, [str(c) for c in range(X.shape[1])],
                               self.lvl_count)
            forest = build_forest(fm, [tuple(range(len(groups)))], self.params,
                                  self.seed + 104729 * b)
            self.forests[b] = forest
            upstream[b] = _oob_vote(forest, X)
        return self

    def to_dict(self) -> dict:
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "kind": "forest_chain",
            "n_services": self.n_services,
            "edges": [list(e) for e in self.edges],
            "lvl_count": self.lvl_count,
            "blocks": [{"service": blk.service,
                        "inputs": [{"kind": s.kind, "ref": s.ref} for s in blk.inputs]}
                       for blk in self.blocks],
            "order": list(self.order),
            "sink": self.sink,
            "forests": [self.forests[b].to_dict() for b in range(len(self.blocks))],
        }

    @classmethod
    def from_dict(cls, data: dict, schema: IndicatorSchema) -> "ForestChain":
        if data.get("format_version") != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported chain format {data.get('format_version')!r}")
        self = cls.__new__(cls)
        self.blocks = [Block([Slot(s["kind"], s["ref"]) for s in b["inputs"]], b["service"])
                       for b in data["blocks"]]
        self.order, self.sink = data["order"], data["sink"]
        self.edges = [tuple(e) for e in data["edges"]]
        self.n_services = data["n_services"]
        self.schema, self.lvl_count = schema, data["lvl_count"]
        self.params, self.seed = ForestParams(), 0
        self.encoder = FeatureEncoder(schema)
        self.forests = {b: DecisionForest.from_dict(f) for b, f in enumerate(data["forests"])}
        return self

    def predict_samples(self, samples):
        for s in samples:
            if canonical_edges(s.topology) != self.edges:
                raise ChainShapeError("sample topology does not match the chain")
        cols = self._service_columns(samples)
        upstream, conf = {}, None
        for b in self.order:
            X, _ = self._block_matrix(b, cols, upstream)
            upstream[b], conf = vote_confidence(self.forests[b], X)
        return upstream[self.sink], conf


def _oob_vote(forest: DecisionForest, X) -> np.ndarray:
    n = len(X)
    votes = np.zeros((n, forest.lvl_count), dtype=int)
    for t in forest.trees:
        if t.oob is not None and len(t.oob):
            votes[t.oob, t.predict(X[t.oob]) - 1] += 1
    missing = votes.sum(axis=1) == 0
    if missing.any():
        votes[missing] = forest.votes(X[missing])
    return np.argmax(votes, axis=1) + 1
