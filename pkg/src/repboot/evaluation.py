"""Metrics, cross-validated method comparison, axis sweeps and confidence histograms."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from .baselines import MinBaseline, tfrb_train
from .core import CompositionSample, DomainError, IndicatorSchema
from .data import Corpus, GeneratorConfig, generate, kfold_split
from .fdnn import ChainConfig, ChainShapeError, ForestChain, fit_chain, topology_hash
from .forest import ForestParams

METHODS = ("fdnn", "forest", "dnn", "tfrb", "min")
METRICS = ("accuracy", "precision", "recall")


def confusion_matrix(predictions, labels, lvl_count: int) -> np.ndarray:
    """Rows are true levels, columns predicted levels."""
    cm = np.zeros((lvl_count, lvl_count), dtype=int)
    np.add.at(cm, (np.asarray(labels) - 1, np.asarray(predictions) - 1), 1)
    return cm


def prf_metrics(predictions, labels, lvl_count: int) -> tuple[float, float, float]:
    """Accuracy with macro precision and recall over the levels present in ``labels``.

    A present level that is never predicted has precision 0.
    """
    predictions, labels = np.asarray(predictions), np.asarray(labels)
    if len(labels) == 0 or len(predictions) != len(labels):
        raise DomainError("need equal-length, nonempty predictions and labels")
    cm = confusion_matrix(predictions, labels, lvl_count)
    present = cm.sum(axis=1) > 0
    tp = np.diag(cm)[present]
    pred_tot = cm.sum(axis=0)[present]
    prec = np.divide(tp, pred_tot, out=np.zeros(len(tp)), where=pred_tot > 0)
    rec = tp / cm.sum(axis=1)[present]
    return float(np.trace(cm) / cm.sum()), float(prec.mean()), float(rec.mean())


# --------------------------------------------------------------------------
# method registry


@dataclass(frozen=True)
class MethodConfig:
    forest: ForestParams = ForestParams()
    chain: ChainConfig = ChainConfig()


class Bucketed:
    """One model per topology shape; predictions route each sample to its shape's model."""

    def __init__(self, key: Callable[[CompositionSample], object], fit):
        self.key = key
        self.fit = fit
        self.models: dict = {}

    def train(self, samples):
        groups: dict = {}
        for s in samples:
            groups.setdefault(self.key(s), []).append(s)
        for k in sorted(groups, key=str):
            self.models[k] = self.fit(groups[k])
        return self

    def predict_samples(self, samples):
        levels = np.zeros(len(samples), dtype=int)
        conf = np.zeros(len(samples))
        groups: dict = {}
        for i, s in enumerate(samples):
            groups.setdefault(self.key(s), []).append(i)
        for k, idx in groups.items():
            if k not in self.models:
                raise ChainShapeError(f"no model trained for topology shape {k}")
            lv, cf = self.models[k].predict_samples([samples[i] for i in idx])
            levels[idx] = lv
            conf[idx] = cf
        return levels, conf


def _shape(s):
    return topology_hash(s.topology)


def _arity(s):
    return len(s.topology.services)


def fit_method(method: str, samples: Sequence[CompositionSample], schema: IndicatorSchema,
               lvl_count: int, config: MethodConfig = MethodConfig(), seed: int = 0):
    """Train one comparator; the result exposes ``predict_samples -> (levels, confidence)``."""
    chain_cfg = replace(config.chain, forest=config.forest, seed=seed)
    if method == "fdnn":
        return Bucketed(_shape, lambda g: fit_chain(g, schema, lvl_count, chain_cfg)[0]).train(samples)
    if method == "dnn":
        return Bucketed(_shape, lambda g: fit_chain(g, schema, lvl_count, chain_cfg,
                                                    input_mode="raw")[0]).train(samples)
    if method == "forest":
        return Bucketed(_shape, lambda g: ForestChain(g[0].topology, schema, lvl_count,
                                                      config.forest, seed).fit(g)).train(samples)
    if method == "tfrb":
        return Bucketed(_arity, lambda g: tfrb_train(g, schema, lvl_count, config.forest,
                                                     seed)).train(samples)
    if method == "min":
        return MinBaseline.fit(samples, schema, lvl_count, config.forest, seed)
    raise ValueError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")


# --------------------------------------------------------------------------
# comparison


@dataclass
class MethodResult:
    folds: list[dict] = field(default_factory=list)

    def summary(self) -> dict:
        out = {}
        for m in METRICS:
            vals = np.array([f[m] for f in self.folds])
            out[m] = {"mean": float(vals.mean()), "var": float(vals.var())}
        return out


@dataclass
class ComparisonReport:
    k: int
    seed: int
    results: dict[str, MethodResult]
    predictions: dict[str, dict] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "seed": self.seed,
            "averaging": "macro over levels present in the test labels",
            "methods": {name: {"summary": r.summary(), "folds": r.folds}
                        for name, r in self.results.items()},
        }

    def mean(self, method: str, metric: str = "accuracy") -> float:
        return self.results[method].summary()[metric]["mean"]

    def format_table(self) -> str:
        head = f"{'method':<8}" + "".join(f"{m + ' mean':>16}{m + ' var':>14}" for m in METRICS)
        lines = ["precision/recall: macro over levels present in the test labels", head,
                 "-" * len(head)]
        for name, r in self.results.items():
            s = r.summary()
            lines.append(f"{name:<8}" + "".join(f"{s[m]['mean']:>16.4f}{s[m]['var']:>14.6f}"
                                                 for m in METRICS))
        return "\n".join(lines)


def compare_methods(corpus: Corpus, methods: Sequence[str] = METHODS, k: int = 5, seed: int = 0,
                    config: MethodConfig = MethodConfig()) -> ComparisonReport:
    """K-fold cross-validation of each method on the same folds."""
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}")
    folds = kfold_split(corpus, k, seed)
    results = {m: MethodResult() for m in methods}
    preds: dict[str, dict] = {m: {"levels": [], "confidence": [], "labels": []} for m in methods}
    for f, (train, test) in enumerate(folds):
        tr = [corpus.samples[i] for i in train]
        te = [corpus.samples[i] for i in test]
        labels = np.array([s.observed_level for s in te])
        for m in methods:
            model = fit_method(m, tr, corpus.schema, corpus.lvl_count, config, seed + f)
            levels, conf = model.predict_samples(te)
            acc, prec, rec = prf_metrics(levels, labels, corpus.lvl_count)
            results[m].folds.append({"fold": f, "n_test": len(te), "accuracy": acc,
                                     "precision": prec, "recall": rec})
            preds[m]["levels"] += levels.tolist()
            preds[m]["confidence"] += conf.tolist()
            preds[m]["labels"] += labels.tolist()
    return ComparisonReport(k, seed, results, preds)


# --------------------------------------------------------------------------
# sweeps


def sweep(base: GeneratorConfig, axis: str, values: Sequence[int],
          methods: Sequence[str] = ("fdnn", "tfrb", "min"), k: int = 5, seed: int = 0,
          config: MethodConfig = MethodConfig()) -> list[dict]:
    """Accuracy per method as one generator setting varies; one corpus per value."""
    rows = []
    for v in values:
        if axis == "topology_size":
            cfg = replace(base, services=(int(v), int(v)))
        elif axis == "lvl_count":
            cfg = replace(base, lvl_count=int(v))
        else:
            raise ValueError("axis must be 'topology_size' or 'lvl_count'")
        report = compare_methods(generate(cfg), methods, k, seed, config)
        for m in methods:
            s = report.results[m].summary()
            rows.append({"axis": axis, "value": int(v), "method": m,
                         "accuracy_mean": s["accuracy"]["mean"],
                         "accuracy_var": s["accuracy"]["var"]})
    return rows


def sweep_csv(rows: Sequence[Mapping]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, ["axis", "value", "method", "accuracy_mean", "accuracy_var"],
                            lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: (f"{v:.6f}" if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


# --------------------------------------------------------------------------
# confidence


N_BINS = 10


def confidence_bin(bp) -> np.ndarray:
    """Index of the width-0.1 bin ``(i/10, (i+1)/10]`` holding each confidence."""
    bp = np.asarray(bp, dtype=float)
    return np.clip(np.ceil(bp * N_BINS).astype(int) - 1, 0, N_BINS - 1)


@dataclass
class ConfidenceHistogram:
    counts: np.ndarray
    mean: float | None

    @property
    def fractions(self) -> np.ndarray:
        total = self.counts.sum()
        return self.counts / total if total else np.zeros(N_BINS)

    def to_dict(self) -> dict:
        return {"counts": self.counts.tolist(), "fractions": self.fractions.tolist(),
                "mean": self.mean}


def confidence_histogram(levels, bp, labels) -> dict[str, ConfidenceHistogram]:
    """Confidence distributions of correct (positive) and wrong (negative) predictions."""
    levels, bp, labels = np.asarray(levels), np.asarray(bp, dtype=float), np.asarray(labels)
    if len(labels) == 0:
        raise DomainError("empty test set")
    out = {}
    for name, mask in (("positive", levels == labels), ("negative", levels != labels)):
        counts = np.bincount(confidence_bin(bp[mask]), minlength=N_BINS)
        out[name] = ConfidenceHistogram(counts, float(bp[mask].mean()) if mask.any() else None)
    return out


def chain_confidence_histogram(model, samples: Sequence[CompositionSample]):
    if not samples:
        raise DomainError("empty test set")
    levels, bp = model.predict_samples(samples)
    return confidence_histogram(levels, bp, [s.observed_level for s in samples])
