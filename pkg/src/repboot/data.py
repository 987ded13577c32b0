"""Synthetic composition corpora, the JSON corpus format and K-fold splitting."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import jsonschema
import numpy as np

from .core import (CompositionSample, CompositionTopology, IndicatorId, IndicatorSchema,
                   IndicatorValue, Layer, Pattern, ServiceRecord, TopologyError, UNKNOWN_TYPE,
                   quantize_level, validate_topology)
from .credibility import RaterGraph
from .fdnn import dependency_depths

CORPUS_FORMAT_VERSION = 1


class ConfigError(ValueError):
    pass


class CorpusError(ValueError):
    """Invalid corpus document; ``line`` points into the source text when known."""

    def __init__(self, message: str, line: int | None = None, path: str = ""):
        self.line = line
        self.path = path
        where = f"line {line}: " if line is not None else ""
        loc = f"{path}: " if path else ""
        super().__init__(f"{where}{loc}{message}")


# --------------------------------------------------------------------------
# default indicator universe

DEFAULT_INDICATORS: tuple[tuple[Layer, str, tuple[str, ...]], ...] = (
    (Layer.PROVIDER, "contributor_stars", ("individual", "organization")),
    (Layer.COMMUNITY, "owner_stars", ("user", "org")),
    (Layer.COMMUNITY, "owner_repo_stars", ("personal", "team")),
    (Layer.SIMILAR_SERVICE, "similar_repo_stars", ("same_topic", "same_language")),
    (Layer.SIMILAR_SERVICE, "similar_owner_stars", ("same_topic", "same_language")),
    (Layer.INSIGHT, "watchers", ("active", "passive")),
    (Layer.INSIGHT, "dependents", ("library", "application")),
    (Layer.INSIGHT, "dependencies", ("runtime", "dev")),
    (Layer.INSIGHT, "commits", ("core", "external")),
    (Layer.INSIGHT, "forks", ("mirror", "derived")),
)

# planted weights, strictly decreasing so a recovered ranking is well defined
DEFAULT_WEIGHTS = (0.20, 0.17, 0.14, 0.12, 0.10, 0.08, 0.065, 0.055, 0.04, 0.03)

DEFAULT_LAYER_BETA = {
    Layer.PROVIDER.value: (2.0, 2.0),
    Layer.COMMUNITY.value: (2.0, 3.0),
    Layer.SIMILAR_SERVICE.value: (3.0, 2.0),
    Layer.INSIGHT.value: (1.5, 1.5),
}


def default_schema() -> IndicatorSchema:
    inds = tuple(IndicatorId(layer, name) for layer, name, _ in DEFAULT_INDICATORS)
    return IndicatorSchema(inds, {i: t for i, (_, _, t) in zip(inds, DEFAULT_INDICATORS)})


# --------------------------------------------------------------------------
# generator


@dataclass(frozen=True)
class GeneratorConfig:
    """Knobs of the planted composition market.

    ``coherence`` in [0, 1] ties a service's indicators to a shared per-service
    tier; at 0 every indicator is drawn independently around its layer mean.
    ``depth_exponent`` sharpens the depth-weighted mean towards deep invokers.
    """

    seed: int = 0
    n_compositions: int = 200
    patterns: Mapping[str, float] = field(default_factory=lambda: {"Hybrid": 1.0})
    services: tuple[int, int] = (5, 5)
    lvl_count: int = 5
    weights: tuple[float, ...] = DEFAULT_WEIGHTS
    rho: float = 0.6
    sigma: float = 0.05
    depth_exponent: float = 6.0
    coherence: float = 0.95
    concentration: float = 8.0
    tier_beta: tuple[float, float] = (0.5, 0.5)
    layer_beta: Mapping[str, tuple[float, float]] = field(
        default_factory=lambda: dict(DEFAULT_LAYER_BETA))
    absent_rate: float = 0.1
    n_raters: int = 0

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.size == 0:
            raise ConfigError("weight vector is empty")
        if (w < 0).any() or not np.isclose(w.sum(), 1.0, atol=1e-9):
            raise ConfigError("indicator weights must be nonnegative and sum to 1")
        if not 0.0 <= self.rho <= 1.0:
            raise ConfigError("rho must lie in [0, 1]")
        if self.sigma < 0:
            raise ConfigError("sigma must be >= 0")
        if not 0.0 <= self.coherence <= 1.0:
            raise ConfigError("coherence must lie in [0, 1]")
        if not 0.0 <= self.absent_rate < 1.0:
            raise ConfigError("absent_rate must lie in [0, 1)")
        lo, hi = self.services
        if not 1 <= lo <= hi:
            raise ConfigError("services range must satisfy 1 <= min <= max")
        if self.lvl_count < 2:
            raise ConfigError("lvl_count must be >= 2")
        if self.n_compositions < 0:
            raise ConfigError("n_compositions must be >= 0")
        if not self.patterns or any(v < 0 for v in self.patterns.values()) \
                or sum(self.patterns.values()) <= 0:
            raise ConfigError("pattern mix needs a positive total weight")
        for p in self.patterns:
            Pattern(p)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["patterns"] = dict(self.patterns)
        d["layer_beta"] = {k: list(v) for k, v in self.layer_beta.items()}
        d["services"] = list(self.services)
        d["weights"] = list(self.weights)
        d["tier_beta"] = list(self.tier_beta)
        return d

    @classmethod
    def from_dict(cls, data: Mapping) -> "GeneratorConfig":
        known = cls.__dataclass_fields__
        unknown = set(data) - set(known)
        if unknown:
            raise ConfigError(f"unknown generator fields: {sorted(unknown)}")
        kw = dict(data)
        for key in ("services", "weights", "tier_beta"):
            if key in kw:
                kw[key] = tuple(kw[key])
        if "layer_beta" in kw:
            kw["layer_beta"] = {k: tuple(v) for k, v in kw["layer_beta"].items()}
        return cls(**kw)


@dataclass
class Corpus:
    schema: IndicatorSchema
    lvl_count: int
    samples: list[CompositionSample]
    rater_graph: RaterGraph | None = None
    generator: dict | None = None

    def __len__(self):
        return len(self.samples)

    def subset(self, indices) -> "Corpus":
        return Corpus(self.schema, self.lvl_count, [self.samples[i] for i in indices],
                      self.rater_graph, self.generator)


def stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


def template_edges(pattern: Pattern | str, m: int) -> list[tuple[int, int]]:
    """Edges between generation slots ``0..m-1`` for a topology pattern."""
    pattern = Pattern(pattern)
    if pattern is Pattern.SEQUENTIAL:
        return [(i, i + 1) for i in range(m - 1)]
    if pattern is Pattern.PARALLEL:
        return [(0, i) for i in range(1, m)]
    # hybrid: layers of width 1, 2, 1, 2, ... fully wired between neighbours
    layers, nxt, width = [], 0, 1
    while nxt < m:
        layers.append(list(range(nxt, min(m, nxt + width))))
        nxt += width
        width = 3 - width
    return [(a, b) for up, down in zip(layers, layers[1:]) for a in up for b in down]


def latent_quality(record: ServiceRecord, schema: IndicatorSchema, weights) -> float:
    """Planted-weight mean of the indicator ratings the service actually has."""
    num = den = 0.0
    for ind, w in zip(schema.indicators, weights):
        val = record.indicators.get(ind)
        if val is not None:
            num += w * val.rating
            den += w
    return num / den if den > 0 else 0.0


def composite_score(qualities: Mapping[str, float], topology: CompositionTopology, rho: float,
                    depth_exponent: float) -> float:
    """Noise-free composite score: a blend of the plain and the depth-weighted mean."""
    depth = dependency_depths(topology)
    ids = topology.service_ids
    q = np.array([qualities[s] for s in ids])
    d = np.array([depth[s] for s in ids], dtype=float) ** depth_exponent
    return float((1.0 - rho) * q.mean() + rho * np.dot(d, q) / d.sum())


def _draw_service(rng, sid, schema, config, weights) -> tuple[ServiceRecord, float]:
    tier = rng.beta(*config.tier_beta)
    kappa = config.concentration
    values = {}
    for ind in schema.indicators:
        present = rng.random() >= config.absent_rate
        a, b = config.layer_beta[ind.layer.value]
        mean = config.coherence * tier + (1 - config.coherence) * a / (a + b)
        mean = min(max(mean, 1e-3), 1 - 1e-3)
        rating = float(rng.beta(kappa * mean, kappa * (1 - mean)))
        vocab = [t for t in schema.types[ind] if t != UNKNOWN_TYPE]
        tag = vocab[rng.integers(len(vocab))] if vocab and rng.random() > 0.1 else UNKNOWN_TYPE
        if present:
            values[ind] = IndicatorValue(tag, round(rating, 6))
    if not values:
        ind = schema.indicators[int(np.argmax(weights))]
        values[ind] = IndicatorValue(UNKNOWN_TYPE, round(float(rng.random()), 6))
    rec = ServiceRecord(sid, values)
    return rec, latent_quality(rec, schema, weights)


def generate(config: GeneratorConfig, schema: IndicatorSchema | None = None) -> Corpus:
    """Draw a corpus whose labels follow the planted weights, rho and sigma.

    Composition ``i`` uses the random streams ``(seed, i, 0)`` for structure and
    indicators, ``(seed, i, 1)`` for composite noise and ``(seed, i, 2)`` for
    component-level noise.
    """
    schema = schema or default_schema()
    if len(config.weights) != len(schema.indicators):
        raise ConfigError(f"{len(config.weights)} weights for {len(schema.indicators)} indicators")
    weights = np.asarray(config.weights, dtype=float)
    names = sorted(config.patterns)
    probs = np.array([config.patterns[p] for p in names], dtype=float)
    probs /= probs.sum()
    lo, hi = config.services
    L = config.lvl_count

    samples = []
    for i in range(config.n_compositions):
        rng = stream(config.seed, i, 0)
        pattern = Pattern(names[rng.choice(len(names), p=probs)])
        m = int(rng.integers(lo, hi + 1))
        ids: list[str] = []
        while len(ids) < m:
            sid = f"svc-{int(rng.integers(16 ** 6)):06x}"
            if sid not in ids:
                ids.append(sid)
        drawn = [_draw_service(rng, sid, schema, config, weights) for sid in ids]
        cnoise = stream(config.seed, i, 2).normal(0.0, 1.0, size=m)
        records = []
        for (rec, q), eps in zip(drawn, cnoise):
            level = quantize_level(float(np.clip(q + config.sigma * eps, 0, 1)), L)
            records.append(ServiceRecord(rec.service_id, rec.indicators, level))
        edges = tuple((ids[a], ids[b]) for a, b in template_edges(pattern, m))
        topo = CompositionTopology(tuple(records), edges, pattern)
        score = composite_score({sid: q for sid, (_, q) in zip(ids, drawn)}, topo, config.rho,
                                config.depth_exponent)
        score += config.sigma * stream(config.seed, i, 1).normal()
        samples.append(CompositionSample(topo, quantize_level(float(np.clip(score, 0, 1)), L)))

    graph = _rater_graph(config) if config.n_raters > 0 else None
    return Corpus(schema, L, samples, graph, config.to_dict())


def _rater_graph(config: GeneratorConfig) -> RaterGraph:
    rng = stream(config.seed, config.n_compositions, 3)
    raters = tuple(f"rater-{i:04d}" for i in range(config.n_raters))
    edges = []
    for i, r in enumerate(raters):
        for j in rng.choice(config.n_raters, size=min(3, config.n_raters), replace=False):
            if j != i:
                edges.append((r, raters[j], round(float(rng.uniform(0.1, 1.0)), 4)))
    return RaterGraph(raters, tuple(edges))


# --------------------------------------------------------------------------
# JSON form


def schema_to_dict(schema: IndicatorSchema) -> dict:
    return {"indicators": [{"layer": i.layer.value, "name": i.name, "types": list(schema.types[i])}
                           for i in schema.indicators]}


def schema_from_dict(data: Mapping) -> IndicatorSchema:
    inds = [IndicatorId(Layer(d["layer"]), d["name"]) for d in data["indicators"]]
    types = {i: tuple(d.get("types", ())) for i, d in zip(inds, data["indicators"])}
    return IndicatorSchema(tuple(inds), types)


def record_to_dict(rec: ServiceRecord) -> dict:
    out = {"service_id": rec.service_id,
           "indicators": {ind.key: {"type_tag": v.type_tag, "rating": v.rating}
                          for ind, v in sorted(rec.indicators.items())}}
    if rec.observed_level is not None:
        out["observed_level"] = rec.observed_level
    return out


def topology_to_dict(topo: CompositionTopology) -> dict:
    return {"services": [record_to_dict(r) for r in topo.services],
            "edges": [list(e) for e in topo.edges], "pattern": topo.pattern.value}


def sample_to_dict(sample: CompositionSample) -> dict:
    out = {"topology": topology_to_dict(sample.topology)}
    if sample.observed_level is not None:
        out["observed_level"] = sample.observed_level
    return out


def corpus_to_dict(corpus: Corpus) -> dict:
    return {
        "format_version": CORPUS_FORMAT_VERSION,
        "lvl_count": corpus.lvl_count,
        "schema": schema_to_dict(corpus.schema),
        "generator": corpus.generator,
        "rater_graph": corpus.rater_graph.to_dict() if corpus.rater_graph else None,
        "samples": [sample_to_dict(s) for s in corpus.samples],
    }


def dumps(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=False) + "\n"


def write_corpus(corpus: Corpus, path: str | Path) -> None:
    Path(path).write_text(dumps(corpus_to_dict(corpus)))


def corpus_schema() -> dict:
    return json.loads(resources.files("repboot").joinpath("schemas/corpus.schema.json").read_text())


# -- line locator -----------------------------------------------------------

_WS = " \t\n\r"


def _skip(text, i):
    while i < len(text) and text[i] in _WS:
        i += 1
    return i


def locate_lines(text: str) -> dict[tuple, int]:
    """Map each JSON path (tuple of keys / indices) to the line its value starts on."""
    decoder = json.JSONDecoder()
    lines: dict[tuple, int] = {}

    def line_of(i):
        return text.count("\n", 0, i) + 1

    def walk(i, path):
        i = _skip(text, i)
        lines[path] = line_of(i)
        ch = text[i]
        if ch == "{":
            i = _skip(text, i + 1)
            if text[i] == "}":
                return i + 1
            while True:
                key, i = json.decoder.scanstring(text, _skip(text, i) + 1)
                i = _skip(text, i) + 1  # colon
                i = _skip(text, walk(i, path + (key,)))
                if text[i] == "}":
                    return i + 1
                i += 1
        if ch == "[":
            i = _skip(text, i + 1)
            if text[i] == "]":
                return i + 1
            n = 0
            while True:
                i = _skip(text, walk(i, path + (n,)))
                n += 1
                if text[i] == "]":
                    return i + 1
                i += 1
        return decoder.raw_decode(text, i)[1]

    walk(0, ())
    return lines


def _line_for(lines, path) -> int | None:
    path = tuple(path)
    while path not in lines and path:
        path = path[:-1]
    return lines.get(path)


def _fmt_path(path) -> str:
    return "/".join(str(p) for p in path) or "/"


def ingest(path: str | Path) -> Corpus:
    """Parse and validate a corpus file; every rejection names a source line."""
    text = Path(path).read_text()
    return parse_corpus(text)


def parse_corpus(text: str) -> Corpus:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorpusError(f"parse error: {exc.msg}", exc.lineno) from None
    lines = locate_lines(text)
    validator = jsonschema.Draft202012Validator(corpus_schema())
    errors = sorted(validator.iter_errors(data), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        err = errors[0]
        raise CorpusError(f"schema violation: {err.message}", _line_for(lines, err.absolute_path),
                          _fmt_path(err.absolute_path))

    def fail(msg, where):
        raise CorpusError(msg, _line_for(lines, where), _fmt_path(where))

    schema = schema_from_dict(data["schema"])
    lvl = data["lvl_count"]
    by_key = {i.key: i for i in schema.indicators}
    samples = []
    for si, s in enumerate(data["samples"]):
        tpath = ("samples", si, "topology")
        records = []
        for ri, r in enumerate(s["topology"]["services"]):
            rpath = tpath + ("services", ri)
            values = {}
            for key, v in r["indicators"].items():
                if key not in by_key:
                    fail(f"unknown indicator {key!r}", rpath + ("indicators", key))
                values[by_key[key]] = IndicatorValue(v["type_tag"], v["rating"])
            level = r.get("observed_level")
            if level is not None and level > lvl:
                fail(f"observed_level {level} exceeds lvl_count {lvl}", rpath + ("observed_level",))
            records.append(ServiceRecord(r["service_id"], values, level))
        topo = CompositionTopology(tuple(records), tuple(tuple(e) for e in s["topology"]["edges"]),
                                   Pattern(s["topology"].get("pattern", "Hybrid")))
        try:
            validate_topology(topo)
        except TopologyError as exc:
            fail(f"{type(exc).__name__}: {exc}", tpath + ("edges",))
        level = s.get("observed_level")
        if level is not None and level > lvl:
            fail(f"observed_level {level} exceeds lvl_count {lvl}", ("samples", si, "observed_level"))
        samples.append(CompositionSample(topo, level))
    graph = RaterGraph.from_dict(data["rater_graph"]) if data.get("rater_graph") else None
    return Corpus(schema, lvl, samples, graph, data.get("generator"))


# --------------------------------------------------------------------------
# folds


def kfold_split(corpus: Corpus | Sequence | int, k: int, seed: int = 0
                ) -> list[tuple[np.ndarray, np.ndarray]]:
    """Shuffled K-fold partition as ``(train_indices, test_indices)`` pairs."""
    n = corpus if isinstance(corpus, int) else len(corpus)
    if k < 2 or k > n:
        raise ValueError(f"k={k} must satisfy 2 <= k <= {n}")
    perm = np.random.default_rng(seed).permutation(n)
    folds = np.array_split(perm, k)
    out = []
    for f in range(k):
        test = np.sort(folds[f])
        train = np.sort(np.concatenate([folds[g] for g in range(k) if g != f]))
        out.append((train, test))
    return out


def bucket_by_shape(samples: Sequence[CompositionSample]) -> dict[str, list[int]]:
    """Sample indices grouped by canonical topology hash."""
    from .fdnn import topology_hash
    out: dict[str, list[int]] = {}
    for i, s in enumerate(samples):
        out.setdefault(topology_hash(s.topology), []).append(i)
    return out
