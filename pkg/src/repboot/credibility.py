"""Rater credibility from the endorsement graph and credibility-weighted rating aggregation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


class ConvergenceError(RuntimeError):
    def __init__(self, residual: float, iterations: int):
        self.residual = residual
        self.iterations = iterations
        super().__init__(f"PageRank did not converge after {iterations} iterations "
                         f"(residual {residual:.3e})")


class UndefinedAggregate(ValueError):
    pass


@dataclass(frozen=True)
class RaterGraph:
    raters: tuple[str, ...]
    endorsements: tuple[tuple[str, str, float], ...] = ()

    def __post_init__(self):
        raters = tuple(str(r) for r in self.raters)
        if len(set(raters)) != len(raters):
            raise ValueError("duplicate rater ids")
        known = set(raters)
        edges = []
        for src, dst, w in self.endorsements:
            src, dst, w = str(src), str(dst), float(w)
            if src not in known or dst not in known:
                raise ValueError(f"endorsement {src}->{dst} references an unknown rater")
            if src == dst:
                raise ValueError(f"self-endorsement by {src}")
            if not w >= 0:
                raise ValueError(f"negative endorsement weight on {src}->{dst}")
            edges.append((src, dst, w))
        object.__setattr__(self, "raters", raters)
        object.__setattr__(self, "endorsements", tuple(edges))

    @classmethod
    def from_dict(cls, data: dict) -> "RaterGraph":
        return cls(
            raters=tuple(data["raters"]),
            endorsements=tuple((e["from"], e["to"], e.get("weight", 1.0))
                               for e in data.get("endorsements", [])),
        )

    def to_dict(self) -> dict:
        return {
            "raters": list(self.raters),
            "endorsements": [{"from": a, "to": b, "weight": w} for a, b, w in self.endorsements],
        }


@dataclass(frozen=True)
class PageRankParams:
    damping: float = 0.85
    tolerance: float = 1e-8
    max_iters: int = 200

    def __post_init__(self):
        if not 0.0 < self.damping < 1.0:
            raise ValueError("damping must lie in (0, 1)")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")


@dataclass(frozen=True)
class RatingEvent:
    rater: str
    rating: float
    credibility: float

    def __post_init__(self):
        for name in ("rating", "credibility"):
            v = float(getattr(self, name))
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} {v} outside [0, 1]")
            object.__setattr__(self, name, v)


def pagerank_scores(graph: RaterGraph, params: PageRankParams = PageRankParams()) -> np.ndarray:
    """Raw PageRank vector (sums to one), ordered like ``graph.raters``."""
    n = len(graph.raters)
    if n == 0:
        raise ValueError("rater graph is empty")
    pos = {r: i for i, r in enumerate(graph.raters)}
    W = np.zeros((n, n))
    for src, dst, w in graph.endorsements:
        W[pos[src], pos[dst]] += w
    out = W.sum(axis=1)
    dangling = out == 0
    P = np.divide(W, out[:, None], out=np.zeros_like(W), where=~dangling[:, None])

    d = params.damping
    x = np.full(n, 1.0 / n)
    residual = np.inf
    for it in range(1, params.max_iters + 1):
        nxt = d * (P.T @ x + x[dangling].sum() / n) + (1.0 - d) / n
        residual = np.abs(nxt - x).sum()
        x = nxt
        if residual < params.tolerance:
            return x
    raise ConvergenceError(residual, params.max_iters)


def pagerank_credibility(graph: RaterGraph,
                         params: PageRankParams = PageRankParams()) -> dict[str, float]:
    """Credibility in [0, 1] per rater: PageRank divided by its maximum."""
    x = pagerank_scores(graph, params)
    x = x / x.max()
    return {r: float(v) for r, v in zip(graph.raters, x)}


def aggregate_rating(events: Iterable[RatingEvent | Sequence[float]],
                     conventional: bool = False) -> float:
    """Credibility-weighted normalized rating.

    The default divides ``sum(r * c)`` by ``sum(r)``, so the result measures how
    much of the rating mass comes from credible raters. ``conventional=True``
    divides by ``sum(c)`` instead, giving the credibility-weighted mean rating.
    """
    rc = []
    for ev in events:
        if not isinstance(ev, RatingEvent):
            r, c = ev[-2], ev[-1]
            ev = RatingEvent("", r, c)
        rc.append((ev.rating, ev.credibility))
    if not rc:
        raise UndefinedAggregate("no rating events")
    r, c = np.array(rc).T
    denom = c.sum() if conventional else r.sum()
    if denom == 0:
        raise UndefinedAggregate("denominator of the aggregate is zero")
    return float(np.dot(r, c) / denom)
