"""Domain types shared across the package and reputation level quantization."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

UNKNOWN_TYPE = "U"


class Layer(str, enum.Enum):
    PROVIDER = "Provider"
    COMMUNITY = "Community"
    SIMILAR_SERVICE = "SimilarService"
    INSIGHT = "Insight"


class Pattern(str, enum.Enum):
    SEQUENTIAL = "Sequential"
    PARALLEL = "Parallel"
    HYBRID = "Hybrid"


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


class TopologyError(ValueError):
    pass


class CycleDetected(TopologyError):
    def __init__(self, cycle: Sequence[str]):
        self.cycle = list(cycle)
        super().__init__("cycle detected: " + " -> ".join(self.cycle + self.cycle[:1]))


class DanglingEdge(TopologyError):
    def __init__(self, edge: tuple[str, str], missing: str):
        self.edge = edge
        self.missing = missing
        super().__init__(f"edge {edge[0]}->{edge[1]} references unknown service {missing!r}")


class Disconnected(TopologyError):
    def __init__(self, components: list[list[str]]):
        self.components = components
        super().__init__(f"topology has {len(components)} weakly connected components")


@dataclass(frozen=True, order=True)
class IndicatorId:
    layer: Layer
    name: str

    def __post_init__(self):
        object.__setattr__(self, "layer", Layer(self.layer))
        if not self.name:
            raise ValueError("indicator name must be nonempty")

    @property
    def key(self) -> str:
        return f"{self.layer.value}/{self.name}"


@dataclass(frozen=True)
class IndicatorValue:
    type_tag: str
    rating: float

    def __post_init__(self):
        if not self.type_tag:
            raise ValueError("type_tag must be nonempty")
        rating = float(self.rating)
        if not 0.0 <= rating <= 1.0:
            raise DomainError(f"rating {rating} outside [0, 1]")
        object.__setattr__(self, "rating", rating)


@dataclass(frozen=True)
class IndicatorSchema:
    """The indicator universe with an optional type vocabulary per indicator."""

    indicators: tuple[IndicatorId, ...]
    types: Mapping[IndicatorId, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        indicators = tuple(self.indicators)
        if len(set(indicators)) != len(indicators):
            raise ValueError("duplicate (layer, name) pair in schema")
        types = {}
        for ind in indicators:
            vocab = list(self.types.get(ind, ()))
            if UNKNOWN_TYPE not in vocab:
                vocab.append(UNKNOWN_TYPE)
            types[ind] = tuple(vocab)
        object.__setattr__(self, "indicators", indicators)
        object.__setattr__(self, "types", MappingProxyType(types))

    def __len__(self):
        return len(self.indicators)

    def index(self, indicator: IndicatorId) -> int:
        return self.indicators.index(indicator)

    def layers(self) -> list[Layer]:
        return [ind.layer for ind in self.indicators]

    def by_key(self, key: str) -> IndicatorId:
        for ind in self.indicators:
            if ind.key == key:
                return ind
        raise KeyError(key)


@dataclass(frozen=True)
class ReputationLevel:
    lvl_count: int
    index: int

    def __post_init__(self):
        if self.lvl_count < 2:
            raise DomainError("lvl_count must be >= 2")
        if not 1 <= self.index <= self.lvl_count:
            raise DomainError(f"level {self.index} outside [1, {self.lvl_count}]")

    @property
    def interval(self) -> tuple[float, float]:
        return ((self.index - 1) / self.lvl_count, self.index / self.lvl_count)


@dataclass(frozen=True)
class ServiceRecord:
    service_id: str
    indicators: Mapping[IndicatorId, IndicatorValue] = field(default_factory=dict)
    observed_level: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "indicators", MappingProxyType(dict(self.indicators)))
        if self.observed_level is not None:
            object.__setattr__(self, "observed_level", int(self.observed_level))
            if self.observed_level < 1:
                raise DomainError("observed_level must be >= 1")

    def check(self, schema: IndicatorSchema, lvl_count: int | None = None) -> None:
        universe = set(schema.indicators)
        for ind in self.indicators:
            if ind not in universe:
                raise KeyError(f"service {self.service_id}: unknown indicator {ind.key!r}")
        if lvl_count is not None and self.observed_level is not None:
            if self.observed_level > lvl_count:
                raise DomainError(
                    f"service {self.service_id}: level {self.observed_level} > {lvl_count}")


@dataclass(frozen=True)
class CompositionTopology:
    services: tuple[ServiceRecord, ...]
    edges: tuple[tuple[str, str], ...] = ()
    pattern: Pattern = Pattern.HYBRID

    def __post_init__(self):
        object.__setattr__(self, "services", tuple(self.services))
        object.__setattr__(self, "edges", tuple((str(a), str(b)) for a, b in self.edges))
        object.__setattr__(self, "pattern", Pattern(self.pattern))

    @property
    def service_ids(self) -> list[str]:
        return [s.service_id for s in self.services]

    def service(self, service_id: str) -> ServiceRecord:
        for s in self.services:
            if s.service_id == service_id:
                return s
        raise KeyError(service_id)

    def successors(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {sid: [] for sid in self.service_ids}
        for a, b in self.edges:
            out[a].append(b)
        return out

    def predecessors(self) -> dict[str, list[str]]:
        inc: dict[str, list[str]] = {sid: [] for sid in self.service_ids}
        for a, b in self.edges:
            inc[b].append(a)
        return inc


@dataclass(frozen=True)
class CompositionSample:
    topology: CompositionTopology
    observed_level: int | None = None


def quantize_level(nr: float, lvl_count: int) -> int:
    """Map a normalized rating onto one of ``lvl_count`` qualitative levels.

    Level ``i`` covers ``[(i-1)/lvl_count, i/lvl_count)``; the top level is
    closed at 1.

    >>> quantize_level(0.5, 3)
    2
    >>> quantize_level(1.0, 5)
    5
    """
    if lvl_count < 2:
        raise DomainError("lvl_count must be >= 2")
    nr = float(nr)
    if not (0.0 <= nr <= 1.0) or math.isnan(nr):
        raise DomainError(f"rating {nr} outside [0, 1]")
    return min(int(math.floor(nr * lvl_count)) + 1, lvl_count)


def _find_cycle(ids: Iterable[str], succ: Mapping[str, list[str]]) -> list[str] | None:
    white, grey, black = 0, 1, 2
    color = {sid: white for sid in ids}
    parent: dict[str, str] = {}
    for root in color:
        if color[root] != white:
            continue
        color[root] = grey
        stack = [(root, iter(succ[root]))]
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                color[node] = black
                stack.pop()
            elif color[nxt] == white:
                color[nxt] = grey
                parent[nxt] = node
                stack.append((nxt, iter(succ[nxt])))
            elif color[nxt] == grey:
                cycle = [node]
                while cycle[-1] != nxt:
                    cycle.append(parent[cycle[-1]])
                return cycle[::-1]
    return None


def validate_topology(topology: CompositionTopology) -> None:
    """Raise a :class:`TopologyError` unless the topology is a connected DAG."""
    ids = topology.service_ids
    if not ids:
        raise TopologyError("topology has no services")
    if len(set(ids)) != len(ids):
        raise TopologyError("duplicate service ids in topology")
    known = set(ids)
    for edge in topology.edges:
        for end in edge:
            if end not in known:
                raise DanglingEdge(edge, end)

    cycle = _find_cycle(ids, topology.successors())
    if cycle is not None:
        raise CycleDetected(cycle)

    # weak connectivity via union-find
    root = {sid: sid for sid in ids}

    def find(x):
        while root[x] != x:
            root[x] = root[root[x]]
            x = root[x]
        return x

    for a, b in topology.edges:
        root[find(a)] = find(b)
    groups: dict[str, list[str]] = {}
    for sid in ids:
        groups.setdefault(find(sid), []).append(sid)
    if len(groups) > 1:
        raise Disconnected(list(groups.values()))
