import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from repboot.core import (CompositionTopology, CycleDetected, DanglingEdge, Disconnected,
                          DomainError, IndicatorId, IndicatorSchema, IndicatorValue, Layer,
                          ReputationLevel, ServiceRecord, TopologyError, quantize_level,
                          validate_topology)
from conftest import make_topology, random_dag_edges


@pytest.mark.parametrize("nr,lvl,expected", [(0.5, 3, 2), (1.0, 5, 5), (0.2, 5, 2), (0.0, 2, 1),
                                             (0.999, 10, 10), (0.4, 5, 3)])
def test_quantize_examples(nr, lvl, expected):
    assert quantize_level(nr, lvl) == expected


@pytest.mark.parametrize("nr,lvl", [(-0.01, 5), (1.01, 5), (0.5, 1), (float("nan"), 3)])
def test_quantize_domain_errors(nr, lvl):
    with pytest.raises(DomainError):
        quantize_level(nr, lvl)


@given(st.floats(0, 1), st.floats(0, 1), st.integers(2, 50))
def test_quantize_monotone_and_interval(a, b, lvl):
    lo, hi = min(a, b), max(a, b)
    assert quantize_level(lo, lvl) <= quantize_level(hi, lvl)
    i = quantize_level(a, lvl)
    assert (i - 1) / lvl <= a
    assert a < i / lvl or (i == lvl and a <= 1.0)


@given(st.integers(2, 40))
def test_quantize_midpoints(lvl):
    for i in range(1, lvl + 1):
        assert quantize_level((i - 0.5) / lvl, lvl) == i


def test_reputation_level_interval():
    assert ReputationLevel(4, 2).interval == (0.25, 0.5)
    with pytest.raises(DomainError):
        ReputationLevel(4, 5)


def test_indicator_value_checks():
    with pytest.raises(DomainError):
        IndicatorValue("U", 1.5)
    with pytest.raises(ValueError):
        IndicatorValue("", 0.5)


def test_schema_adds_unknown_type_and_rejects_duplicates():
    a = IndicatorId(Layer.PROVIDER, "x")
    schema = IndicatorSchema((a,), {a: ("org",)})
    assert schema.types[a] == ("org", "U")
    with pytest.raises(ValueError):
        IndicatorSchema((a, IndicatorId("Provider", "x")))


def test_record_check_unknown_indicator_and_level():
    a, b = IndicatorId(Layer.PROVIDER, "x"), IndicatorId(Layer.INSIGHT, "y")
    schema = IndicatorSchema((a,))
    with pytest.raises(KeyError, match="Insight/y"):
        ServiceRecord("s", {b: IndicatorValue("U", 0.1)}).check(schema)
    with pytest.raises(DomainError):
        ServiceRecord("s", {}, observed_level=6).check(schema, 5)


def test_validate_chain_and_two_cycle():
    assert validate_topology(make_topology(3, [(1, 2), (2, 3)])) is None
    with pytest.raises(CycleDetected) as exc:
        validate_topology(make_topology(2, [(1, 2), (2, 1)]))
    assert sorted(exc.value.cycle) == ["s1", "s2"]


def test_validate_dangling_and_disconnected():
    with pytest.raises(DanglingEdge) as exc:
        validate_topology(make_topology(2, [(1, 3)]))
    assert exc.value.missing == "s3"
    with pytest.raises(Disconnected) as exc:
        validate_topology(make_topology(4, [(1, 2), (3, 4)]))
    assert sorted(map(sorted, exc.value.components)) == [["s1", "s2"], ["s3", "s4"]]
    with pytest.raises(TopologyError):
        validate_topology(CompositionTopology(()))


def test_validate_mrms_like_topology():
    # a ten-service ride-sharing style mashup: dispatch fans out, results merge at the app
    edges = [(1, 2), (1, 3), (1, 4), (2, 5), (3, 5), (4, 6), (5, 7), (6, 7), (7, 8), (8, 9),
             (8, 10)]
    assert validate_topology(make_topology(10, edges)) is None


def _reaches(edges, src, dst):
    succ = {}
    for a, b in edges:
        succ.setdefault(a, []).append(b)
    stack, seen = [src], set()
    while stack:
        x = stack.pop()
        if x == dst:
            return True
        if x not in seen:
            seen.add(x)
            stack += succ.get(x, [])
    return False


@pytest.mark.parametrize("seed", range(30))
def test_random_dag_accepted_back_edge_rejected(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 15))
    edges = random_dag_edges(rng, n)
    validate_topology(make_topology(n, edges))
    a, b = edges[int(rng.integers(len(edges)))]
    with pytest.raises(CycleDetected) as exc:
        validate_topology(make_topology(n, edges + [(b, a)]))
    cyc = [int(s[1:]) for s in exc.value.cycle]
    for x, y in zip(cyc, cyc[1:] + cyc[:1]):
        assert (x, y) in set(edges + [(b, a)])
