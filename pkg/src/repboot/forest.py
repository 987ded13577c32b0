"""Unpruned CART trees, the dual-bagged decision forest and its importance measures.

Every indicator contributes two columns to a feature matrix: a categorical
column holding the code of its type tag and a numeric column holding its
normalized rating. Absent indicators are stored as NaN in both columns; a
split never selects on an absent value, and absent rows follow the child that
received most of the node's present rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .core import IndicatorSchema, Layer, ServiceRecord, UNKNOWN_TYPE

GAIN_TOL = 1e-12
MODEL_FORMAT_VERSION = 1


# --------------------------------------------------------------------------
# feature matrices


@dataclass
class FeatureMatrix:
    X: np.ndarray
    y: np.ndarray | None
    categorical: np.ndarray
    groups: list[np.ndarray]
    group_names: list[str]
    lvl_count: int
    group_layers: list[Layer | None] = field(default_factory=list)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        if self.X.ndim != 2 or self.X.shape[0] < 1:
            raise ValueError("feature matrix needs at least one row")
        self.categorical = np.asarray(self.categorical, dtype=bool)
        if self.y is not None:
            self.y = np.asarray(self.y, dtype=int)
            if self.y.shape != (self.X.shape[0],):
                raise ValueError("label vector does not match row count")
            if self.y.min() < 1 or self.y.max() > self.lvl_count:
                raise ValueError(f"labels must lie in [1, {self.lvl_count}]")
        present = self.X[:, ~self.categorical]
        present = present[~np.isnan(present)]
        if present.size and (present.min() < 0 or present.max() > 1):
            raise ValueError("ratings must lie in [0, 1]")
        self.groups = [np.asarray(g, dtype=int) for g in self.groups]
        if not self.group_layers:
            self.group_layers = [None] * len(self.groups)

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    def take(self, rows) -> "FeatureMatrix":
        return FeatureMatrix(self.X[rows], None if self.y is None else self.y[rows],
                             self.categorical, self.groups, self.group_names,
                             self.lvl_count, self.group_layers)


class FeatureEncoder:
    """Turns service records into ``[type code, rating]`` column pairs."""

    def __init__(self, schema: IndicatorSchema):
        self.schema = schema
        self._codes = {ind: {t: i for i, t in enumerate(schema.types[ind])}
                       for ind in schema.indicators}

    @property
    def width(self) -> int:
        return 2 * len(self.schema)

    @property
    def categorical(self) -> np.ndarray:
        return np.tile([True, False], len(self.schema))

    def encode(self, records: Sequence[ServiceRecord]) -> np.ndarray:
        X = np.full((len(records), self.width), np.nan)
        for r, rec in enumerate(records):
            for ind, val in rec.indicators.items():
                j = self.schema.index(ind)
                codes = self._codes[ind]
                X[r, 2 * j] = codes.get(val.type_tag, codes[UNKNOWN_TYPE])
                X[r, 2 * j + 1] = val.rating
        return X

    def matrix(self, records: Sequence[ServiceRecord], lvl_count: int,
               labels: Sequence[int] | None = None) -> FeatureMatrix:
        if labels is None and all(r.observed_level is not None for r in records):
            labels = [r.observed_level for r in records]
        return FeatureMatrix(
            self.encode(records), None if labels is None else np.asarray(labels),
            self.categorical, [np.array([2 * j, 2 * j + 1]) for j in range(len(self.schema))],
            [ind.key for ind in self.schema.indicators], lvl_count,
            [ind.layer for ind in self.schema.indicators])


def concat_matrices(blocks: Sequence[FeatureMatrix], prefixes: Sequence[str],
                    y=None) -> FeatureMatrix:
    """Horizontally concatenate per-component matrices, keeping group structure."""
    X = np.hstack([b.X for b in blocks])
    cat = np.concatenate([b.categorical for b in blocks])
    groups, names, layers = [], [], []
    offset = 0
    for b, pre in zip(blocks, prefixes):
        groups += [g + offset for g in b.groups]
        names += [f"{pre}:{n}" for n in b.group_names]
        layers += list(b.group_layers)
        offset += b.X.shape[1]
    return FeatureMatrix(X, y, cat, groups, names, blocks[0].lvl_count, layers)


# --------------------------------------------------------------------------
# impurity


def entropy(counts: np.ndarray) -> np.ndarray:
    counts = np.asarray(counts, dtype=float)
    n = counts.sum(axis=-1, keepdims=True)
    p = np.divide(counts, n, out=np.zeros_like(counts), where=n > 0)
    logp = np.log2(p, out=np.zeros_like(p), where=p > 0)
    return -(p * logp).sum(axis=-1)


def gini(counts: np.ndarray) -> np.ndarray:
    counts = np.asarray(counts, dtype=float)
    n = counts.sum(axis=-1, keepdims=True)
    p = np.divide(counts, n, out=np.zeros_like(counts), where=n > 0)
    return 1.0 - (p * p).sum(axis=-1)


CRITERIA = {"entropy": entropy, "gini": gini}


# --------------------------------------------------------------------------
# trees


@dataclass
class DecisionTree:
    feature: np.ndarray
    threshold: np.ndarray
    is_categorical: np.ndarray
    left: np.ndarray
    right: np.ndarray
    absent_left: np.ndarray
    counts: np.ndarray
    impurity: np.ndarray
    n_samples: np.ndarray
    bag: np.ndarray | None = None
    columns: np.ndarray | None = None
    subset: tuple[int, ...] | None = None
    oob: np.ndarray | None = None

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def is_leaf(self) -> np.ndarray:
        return self.feature < 0

    @property
    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=int)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def apply(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        node = np.zeros(X.shape[0], dtype=int)
        rows = np.arange(X.shape[0])
        active = self.feature[node] >= 0
        while active.any():
            r, nd = rows[active], node[active]
            f = self.feature[nd]
            x = X[r, f]
            go_left = np.where(self.is_categorical[nd], x == self.threshold[nd],
                               x <= self.threshold[nd])
            go_left = np.where(np.isnan(x), self.absent_left[nd], go_left)
            node[r] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] >= 0
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.counts[self.apply(X)], axis=1) + 1

    def to_dict(self) -> dict:
        def node(i):
            d = {"n_samples": int(self.n_samples[i]), "impurity": float(self.impurity[i]),
                 "counts": [int(c) for c in self.counts[i]]}
            if self.feature[i] >= 0:
                d.update(feature=int(self.feature[i]),
                         categorical=bool(self.is_categorical[i]),
                         threshold=float(self.threshold[i]),
                         absent_left=bool(self.absent_left[i]),
                         left=node(self.left[i]), right=node(self.right[i]))
            return d

        out = {"root": node(0)}
        if self.bag is not None:
            out["bag"] = self.bag.tolist()
        if self.oob is not None:
            out["oob"] = self.oob.tolist()
        if self.columns is not None:
            out["columns"] = self.columns.tolist()
        if self.subset is not None:
            out["subset"] = list(self.subset)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "DecisionTree":
        b = _TreeBuilder(len(data["root"]["counts"]))
        stack = [(data["root"], b.add_node(np.array(data["root"]["counts"]),
                                           data["root"]["impurity"],
                                           data["root"]["n_samples"]))]
        while stack:
            d, i = stack.pop()
            if "feature" not in d:
                continue
            kids = []
            for side in ("left", "right"):
                c = d[side]
                kids.append((c, b.add_node(np.array(c["counts"]), c["impurity"],
                                           c["n_samples"])))
            b.set_split(i, d["feature"], d["threshold"], d["categorical"],
                        d["absent_left"], kids[0][1], kids[1][1])
            stack.extend(kids)
        tree = b.build()
        tree.bag = np.array(data["bag"], dtype=int) if "bag" in data else None
        tree.oob = np.array(data["oob"], dtype=int) if "oob" in data else None
        tree.columns = np.array(data["columns"], dtype=int) if "columns" in data else None
        tree.subset = tuple(data["subset"]) if "subset" in data else None
        return tree


class _TreeBuilder:
    def __init__(self, n_classes):
        self.n_classes = n_classes
        self.feature, self.threshold, self.cat = [], [], []
        self.left, self.right, self.absl = [], [], []
        self.counts, self.imp, self.ns = [], [], []

    def add_node(self, counts, impurity, n):
        self.feature.append(-1)
        self.threshold.append(np.nan)
        self.cat.append(False)
        self.left.append(-1)
        self.right.append(-1)
        self.absl.append(True)
        self.counts.append(counts)
        self.imp.append(float(impurity))
        self.ns.append(int(n))
        return len(self.feature) - 1

    def set_split(self, i, feature, threshold, categorical, absent_left, left, right):
        self.feature[i] = int(feature)
        self.threshold[i] = float(threshold)
        self.cat[i] = bool(categorical)
        self.absl[i] = bool(absent_left)
        self.left[i], self.right[i] = left, right

    def build(self) -> DecisionTree:
        return DecisionTree(
            np.array(self.feature, dtype=int), np.array(self.threshold, dtype=float),
            np.array(self.cat, dtype=bool), np.array(self.left, dtype=int),
            np.array(self.right, dtype=int), np.array(self.absl, dtype=bool),
            np.array(self.counts, dtype=int).reshape(-1, self.n_classes),
            np.array(self.imp), np.array(self.ns, dtype=int))


def _best_split(X, y, counts, categorical, columns, n_classes, crit):
    """Best (column, threshold, absent_left, children impurities) or None."""
    n = len(y)
    parent = crit(counts)
    found = []  # per column: (gains, thresholds, absent_left, left, right)
    for c in columns:
        x = X[:, c]
        present = ~np.isnan(x)
        if present.sum() < 2:
            continue
        xp, yp = x[present], y[present]
        pres_counts = np.bincount(yp, minlength=n_classes)
        absent = counts - pres_counts
        if categorical[c]:
            cats, inv = np.unique(xp, return_inverse=True)
            if len(cats) < 2:
                continue
            left = np.zeros((len(cats), n_classes))
            np.add.at(left, (inv, yp), 1)
            thr = cats
        else:
            order = np.argsort(xp, kind="stable")
            xs, ys = xp[order], yp[order]
            pos = np.flatnonzero(xs[:-1] < xs[1:])
            if len(pos) == 0:
                continue
            onehot = np.zeros((len(ys), n_classes))
            onehot[np.arange(len(ys)), ys] = 1
            left = np.cumsum(onehot, axis=0)[pos]
            thr = (xs[pos] + xs[pos + 1]) / 2
            thr = np.where(thr >= xs[pos + 1], xs[pos], thr)
        right = pres_counts - left
        absl = left.sum(axis=1) >= right.sum(axis=1)
        left = left + np.outer(absl, absent)
        right = right + np.outer(~absl, absent)
        nl, nr = left.sum(axis=1), right.sum(axis=1)
        il, ir = crit(left), crit(right)
        gain = parent - (nl * il + nr * ir) / n
        found.append((c, gain, thr, absl, left, right, il, ir))
    if not found:
        return None
    top = max(f[1].max() for f in found)
    for c, gain, thr, absl, left, right, il, ir in found:
        hits = np.flatnonzero(gain >= top - GAIN_TOL)
        if len(hits):
            k = hits[0]
            return (c, thr[k], bool(categorical[c]), bool(absl[k]),
                    left[k].astype(int), right[k].astype(int), il[k], ir[k])
    return None


def grow_tree(X, y, lvl_count: int, categorical=None, columns=None,
              min_node_size: int = 2, max_depth: int | None = None,
              criterion: str = "entropy") -> DecisionTree:
    """Grow an unpruned classification tree on levels ``y`` in ``[1, lvl_count]``.

    Growth stops at a pure node, a node with fewer than ``min_node_size`` rows,
    ``max_depth``, or when no split separates the node's rows. Ties between
    equally good splits go to the lowest column index, then the lowest
    threshold (or category code).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int) - 1
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("grow_tree needs a nonempty 2-D bag")
    if categorical is None:
        categorical = np.zeros(X.shape[1], dtype=bool)
    categorical = np.asarray(categorical, dtype=bool)
    columns = np.arange(X.shape[1]) if columns is None else np.sort(np.asarray(columns, int))
    crit = CRITERIA[criterion]

    b = _TreeBuilder(lvl_count)
    counts = np.bincount(y, minlength=lvl_count)
    root = b.add_node(counts, crit(counts), len(y))
    stack = [(root, np.arange(len(y)), 0)]
    while stack:
        node, rows, depth = stack.pop()
        counts = b.counts[node]
        if (np.count_nonzero(counts) <= 1 or len(rows) < min_node_size
                or (max_depth is not None and depth >= max_depth)):
            continue
        split = _best_split(X[rows], y[rows], counts, categorical, columns, lvl_count, crit)
        if split is None:
            continue
        c, thr, is_cat, absl, lc, rc, il, ir = split
        x = X[rows, c]
        go_left = (x == thr) if is_cat else (x <= thr)
        go_left = np.where(np.isnan(x), absl, go_left)
        li = b.add_node(lc, il, lc.sum())
        ri = b.add_node(rc, ir, rc.sum())
        b.set_split(node, c, thr, is_cat, absl, li, ri)
        stack.append((ri, rows[~go_left], depth + 1))
        stack.append((li, rows[go_left], depth + 1))
    return b.build()


# --------------------------------------------------------------------------
# forests


@dataclass(frozen=True)
class ForestParams:
    n_outer: int = 10
    m_vertical: int = 2
    bag_fraction: float = 1.0
    min_node_size: int = 2
    max_depth: int | None = None
    criterion: str = "entropy"

    def __post_init__(self):
        if self.n_outer < 1 or self.m_vertical < 0:
            raise ValueError("n_outer must be >= 1 and m_vertical >= 0")
        if not 0 < self.bag_fraction <= 1:
            raise ValueError("bag_fraction must lie in (0, 1]")
        if self.criterion not in CRITERIA:
            raise ValueError(f"unknown criterion {self.criterion!r}")


@dataclass
class DecisionForest:
    trees: list[DecisionTree]
    lvl_count: int
    n_rows: int
    categorical: np.ndarray
    groups: list[np.ndarray]
    group_names: list[str]
    group_layers: list[Layer | None] = field(default_factory=list)
    encoder: FeatureEncoder | None = None

    def __len__(self):
        return len(self.trees)

    def votes(self, X) -> np.ndarray:
        X = self._rows(X)
        v = np.zeros((X.shape[0], self.lvl_count), dtype=int)
        for t in self.trees:
            v[np.arange(X.shape[0]), t.predict(X) - 1] += 1
        return v

    def tree_predictions(self, X) -> np.ndarray:
        X = self._rows(X)
        return np.stack([t.predict(X) for t in self.trees], axis=1)

    def _rows(self, X):
        if isinstance(X, ServiceRecord):
            X = [X]
        if isinstance(X, (list, tuple)) and X and isinstance(X[0], ServiceRecord):
            if self.encoder is None:
                raise ValueError("forest has no encoder for service records")
            return self.encoder.encode(X)
        return np.atleast_2d(np.asarray(X, dtype=float))

    def to_dict(self) -> dict:
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "kind": "decision_forest",
            "lvl_count": self.lvl_count,
            "n_rows": self.n_rows,
            "categorical": self.categorical.tolist(),
            "groups": [g.tolist() for g in self.groups],
            "group_names": list(self.group_names),
            "group_layers": [None if l is None else l.value for l in self.group_layers],
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, data: dict, encoder: FeatureEncoder | None = None) -> "DecisionForest":
        if data.get("format_version") != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported forest format {data.get('format_version')!r}")
        return cls([DecisionTree.from_dict(t) for t in data["trees"]], data["lvl_count"],
                   data["n_rows"], np.array(data["categorical"], dtype=bool),
                   [np.array(g, dtype=int) for g in data["groups"]], data["group_names"],
                   [None if l is None else Layer(l) for l in data["group_layers"]], encoder)


def default_subsets(matrix: FeatureMatrix) -> list[tuple[int, ...]]:
    """Indicator subsets for vertical bagging: each layer, plus even and odd indicators."""
    subsets = []
    layers = [l for l in dict.fromkeys(matrix.group_layers) if l is not None]
    for layer in layers:
        subsets.append(tuple(i for i, l in enumerate(matrix.group_layers) if l == layer))
    n = len(matrix.groups)
    if n > 1:
        subsets.append(tuple(range(0, n, 2)))
        subsets.append(tuple(range(1, n, 2)))
    if not subsets:
        subsets.append(tuple(range(n)))
    return list(dict.fromkeys(subsets))


def tree_rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream,)))


def build_forest(matrix: FeatureMatrix, subsets: Sequence[Sequence[int]] | None = None,
                 params: ForestParams = ForestParams(), seed: int = 0,
                 encoder: FeatureEncoder | None = None) -> DecisionForest:
    """Dual-bagged forest: ``n_outer`` full-width trees, each followed by
    ``m_vertical`` trees restricted to a randomly chosen indicator subset.

    Tree ``t`` draws from its own random stream, so the forest does not depend
    on the order in which trees are grown.
    """
    if matrix.y is None:
        raise ValueError("forest training needs labels")
    if subsets is None:
        subsets = default_subsets(matrix)
    subsets = [tuple(sorted(s)) for s in subsets]
    if not subsets or any(len(s) == 0 for s in subsets):
        raise ValueError("vertical bagging needs a nonempty family of nonempty subsets")

    P = matrix.n_rows
    q = max(1, int(round(params.bag_fraction * P)))
    all_cols = np.arange(matrix.X.shape[1])
    trees = []
    for i in range(params.n_outer):
        for j in range(params.m_vertical + 1):
            t = i * (params.m_vertical + 1) + j
            rng = tree_rng(seed, t)
            subset = None
            cols = all_cols
            if j > 0:
                subset = subsets[rng.integers(len(subsets))]
                cols = np.concatenate([matrix.groups[g] for g in subset])
            bag = rng.integers(0, P, q)
            tree = grow_tree(matrix.X[bag], matrix.y[bag], matrix.lvl_count,
                             matrix.categorical, cols, params.min_node_size,
                             params.max_depth, params.criterion)
            tree.bag = bag
            tree.columns = np.sort(cols)
            tree.subset = subset
            tree.oob = np.setdiff1d(np.arange(P), bag)
            trees.append(tree)
    return DecisionForest(trees, matrix.lvl_count, P, matrix.categorical, matrix.groups,
                          matrix.group_names, matrix.group_layers, encoder)


def predict_forest(forest: DecisionForest, X) -> np.ndarray | int:
    """Plurality vote over trees; ties go to the lower level."""
    single = isinstance(X, ServiceRecord) or (np.ndim(X) == 1 and not isinstance(X, list))
    pred = np.argmax(forest.votes(X), axis=1) + 1
    return int(pred[0]) if single else pred


def vote_confidence(forest: DecisionForest, X) -> tuple[np.ndarray, np.ndarray]:
    """Winning level and the fraction of trees that voted for it."""
    v = forest.votes(X)
    return np.argmax(v, axis=1) + 1, v.max(axis=1) / len(forest.trees)


@dataclass
class OOBReport:
    aggregate: float
    per_tree: np.ndarray  # nan where the tree has no out-of-bag rows
    excluded: list[int]


def oob_error(forest: DecisionForest, matrix: FeatureMatrix) -> OOBReport:
    wrong = total = 0
    per_tree = np.full(len(forest.trees), np.nan)
    excluded = []
    for t, tree in enumerate(forest.trees):
        if tree.oob is None or len(tree.oob) == 0:
            excluded.append(t)
            continue
        miss = np.count_nonzero(tree.predict(matrix.X[tree.oob]) != matrix.y[tree.oob])
        per_tree[t] = miss / len(tree.oob)
        wrong += miss
        total += len(tree.oob)
    return OOBReport(wrong / total if total else float("nan"), per_tree, excluded)


# --------------------------------------------------------------------------
# importance


def mda_importance(forest: DecisionForest, matrix: FeatureMatrix, n_repeats: int = 3,
                   seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Mean decrease in out-of-bag accuracy per feature group, and its std across trees.

    A group's columns are permuted jointly across a tree's out-of-bag rows.
    """
    n_groups = len(forest.groups)
    drops = []
    for t, tree in enumerate(forest.trees):
        if tree.oob is None or len(tree.oob) == 0:
            continue
        rng = tree_rng(seed, t)
        Xo, yo = matrix.X[tree.oob], matrix.y[tree.oob]
        base = np.mean(tree.predict(Xo) == yo)
        used = set(tree.feature[tree.feature >= 0].tolist())
        row = np.zeros(n_groups)
        for g, cols in enumerate(forest.groups):
            if not used.intersection(cols.tolist()):
                continue
            acc = 0.0
            for _ in range(n_repeats):
                perm = rng.permutation(len(tree.oob))
                Xp = Xo.copy()
                Xp[:, cols] = Xo[perm][:, cols]
                acc += np.mean(tree.predict(Xp) == yo)
            row[g] = base - acc / n_repeats
        drops.append(row)
    if not drops:
        raise ValueError("no tree has out-of-bag rows")
    drops = np.array(drops)
    return drops.mean(axis=0), drops.std(axis=0)


def node_importance(impurity, n_samples, left_impurity, left_n, right_impurity, right_n):
    return impurity * n_samples - left_impurity * left_n - right_impurity * right_n


def mdcd_columns(forest: DecisionForest) -> np.ndarray:
    """Impurity decrease per column, summed within each tree, averaged over trees."""
    n_cols = len(forest.categorical)
    total = np.zeros(n_cols)
    for tree in forest.trees:
        internal = np.flatnonzero(tree.feature >= 0)
        l, r = tree.left[internal], tree.right[internal]
        imp = node_importance(tree.impurity[internal], tree.n_samples[internal],
                              tree.impurity[l], tree.n_samples[l],
                              tree.impurity[r], tree.n_samples[r])
        np.add.at(total, tree.feature[internal], imp)
    return total / len(forest.trees)


def mdcd_importance(forest: DecisionForest) -> np.ndarray:
    """Per-group impurity-decrease importance normalized to sum to one."""
    cols = mdcd_columns(forest)
    per_group = np.array([cols[g].sum() for g in forest.groups])
    per_group = np.clip(per_group, 0.0, None)
    s = per_group.sum()
    return per_group / s if s > 0 else per_group


@dataclass
class ImportanceReport:
    names: list[str]
    layers: list[Layer | None]
    mda: np.ndarray
    mda_std: np.ndarray
    mdcd: np.ndarray

    @property
    def mda_share(self) -> np.ndarray:
        """MDA clipped at zero and normalized to sum to one."""
        m = np.clip(self.mda, 0.0, None)
        return m / m.sum() if m.sum() > 0 else m

    def to_dict(self) -> dict:
        return {
            "features": [
                {"name": n, "layer": None if l is None else l.value, "mda": float(a),
                 "mda_std": float(s), "mda_share": float(sh), "mdcd": float(c)}
                for n, l, a, s, sh, c in zip(self.names, self.layers, self.mda,
                                             self.mda_std, self.mda_share, self.mdcd)
            ],
        }


def importance_report(forest: DecisionForest, matrix: FeatureMatrix, n_repeats: int = 3,
                      seed: int = 0) -> ImportanceReport:
    mda, std = mda_importance(forest, matrix, n_repeats, seed)
    return ImportanceReport(list(forest.group_names), list(forest.group_layers), mda, std,
                            mdcd_importance(forest))


@dataclass
class LayerImportance:
    layer: Layer | str
    mda: float
    mdcd: float
    members: list[tuple[str, float, float]]

    @property
    def average(self) -> float:
        return (self.mda + self.mdcd) / 2


def layer_importance(report: ImportanceReport,
                     layer_of: Mapping[str, Layer] | None = None) -> list[LayerImportance]:
    """Sum member scores per layer; layers sorted by the mean of MDA and MDCD.

    MDA enters through its normalized share so the two measures are on the
    same scale.
    """
    share = report.mda_share
    out: dict = {}
    for i, name in enumerate(report.names):
        layer = layer_of[name] if layer_of is not None else report.layers[i]
        entry = out.setdefault(layer, LayerImportance(layer, 0.0, 0.0, []))
        entry.mda += float(share[i])
        entry.mdcd += float(report.mdcd[i])
        entry.members.append((name, float(share[i]), float(report.mdcd[i])))
    return sorted(out.values(), key=lambda e: -e.average)


def format_importance_table(layers: Sequence[LayerImportance]) -> str:
    rows = [("Features", "MDA", "MDCD", "Avg.")]
    for e in layers:
        label = e.layer.value if isinstance(e.layer, Layer) else str(e.layer)
        rows.append((f"{label} layer", f"{e.mda:.3f}", f"{e.mdcd:.3f}", f"{e.average:.3f}"))
        for name, a, c in e.members:
            rows.append((f"  {name.split('/', 1)[-1]}", f"{a:.3f}", f"{c:.3f}",
                         f"{(a + c) / 2:.3f}"))
    width = max(len(r[0]) for r in rows)
    return "\n".join(f"{r[0]:<{width}}  {r[1]:>6}  {r[2]:>6}  {r[3]:>6}" for r in rows)
