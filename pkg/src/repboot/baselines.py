"""Comparators that ignore invocation edges."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import CompositionSample, IndicatorSchema, ServiceRecord
from .forest import (DecisionForest, FeatureEncoder, FeatureMatrix, ForestParams, build_forest,
                     concat_matrices, vote_confidence)

MODEL_FORMAT_VERSION = 1


class ArityError(ValueError):
    """Samples with different component counts were mixed."""


def component_order(sample: CompositionSample) -> list[ServiceRecord]:
    """Components sorted by service id; edges play no part."""
    return sorted(sample.topology.services, key=lambda r: r.service_id)


@dataclass
class TFRBModel:
    """One forest over the side-by-side feature blocks of all components."""

    forest: DecisionForest
    arity: int
    schema: IndicatorSchema

    def rows(self, samples: Sequence[CompositionSample]) -> np.ndarray:
        _check_arity(samples, self.arity)
        enc = FeatureEncoder(self.schema)
        return np.hstack([enc.encode([component_order(s)[p] for s in samples])
                          for p in range(self.arity)])

    def predict_samples(self, samples) -> tuple[np.ndarray, np.ndarray]:
        return vote_confidence(self.forest, self.rows(samples))

    def to_dict(self) -> dict:
        return {"format_version": MODEL_FORMAT_VERSION, "kind": "tfrb", "arity": self.arity,
                "forest": self.forest.to_dict()}

    @classmethod
    def from_dict(cls, data: dict, schema: IndicatorSchema) -> "TFRBModel":
        if data.get("format_version") != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model format {data.get('format_version')!r}")
        return cls(DecisionForest.from_dict(data["forest"]), data["arity"], schema)


def _check_arity(samples, arity=None) -> int:
    sizes = {len(s.topology.services) for s in samples}
    if arity is not None:
        sizes.add(arity)
    if len(sizes) != 1:
        raise ArityError(f"mixed component counts {sorted(sizes)}")
    return sizes.pop()


def tfrb_matrix(samples: Sequence[CompositionSample], schema: IndicatorSchema,
                lvl_count: int) -> FeatureMatrix:
    m = _check_arity(samples)
    enc = FeatureEncoder(schema)
    labels = [s.observed_level for s in samples]
    blocks = [enc.matrix([component_order(s)[p] for s in samples], lvl_count, labels)
              for p in range(m)]
    return concat_matrices(blocks, [f"c{p}" for p in range(m)], labels)


def tfrb_train(samples: Sequence[CompositionSample], schema: IndicatorSchema, lvl_count: int,
               params: ForestParams = ForestParams(), seed: int = 0) -> TFRBModel:
    if not samples:
        raise ValueError("no training samples")
    fm = tfrb_matrix(samples, schema, lvl_count)
    return TFRBModel(build_forest(fm, params=params, seed=seed), fm.X.shape[1] // (2 * len(schema)),
                     schema)


def tfrb_predict(model: TFRBModel, sample: CompositionSample) -> int:
    levels, _ = model.predict_samples([sample])
    return int(levels[0])


def min_baseline(sample: CompositionSample, predictor) -> int:
    """Lowest bootstrapped level among the components.

    ``predictor`` maps a list of service records to their levels.
    """
    return int(np.min(predictor(list(sample.topology.services))))


@dataclass
class MinBaseline:
    """Atomic forest applied to every component; the composite gets the minimum."""

    forest: DecisionForest

    @classmethod
    def fit(cls, samples: Sequence[CompositionSample], schema: IndicatorSchema, lvl_count: int,
            params: ForestParams = ForestParams(), seed: int = 0) -> "MinBaseline":
        enc = FeatureEncoder(schema)
        recs, labels = [], []
        for s in samples:
            for r in s.topology.services:
                recs.append(r)
                labels.append(r.observed_level if r.observed_level is not None
                              else s.observed_level)
        return cls(build_forest(enc.matrix(recs, lvl_count, labels), params=params, seed=seed,
                                encoder=enc))

    def component_levels(self, records: Sequence[ServiceRecord]) -> np.ndarray:
        return vote_confidence(self.forest, list(records))[0]

    def predict_samples(self, samples) -> tuple[np.ndarray, np.ndarray]:
        levels, conf = [], []
        for s in samples:
            lv, cf = vote_confidence(self.forest, list(s.topology.services))
            j = int(np.argmin(lv))
            levels.append(int(lv[j]))
            conf.append(float(cf[j]))
        return np.array(levels), np.array(conf)

    def to_dict(self) -> dict:
        return {"format_version": MODEL_FORMAT_VERSION, "kind": "min",
                "forest": self.forest.to_dict()}

    @classmethod
    def from_dict(cls, data: dict, schema: IndicatorSchema) -> "MinBaseline":
        return cls(DecisionForest.from_dict(data["forest"], FeatureEncoder(schema)))
