"""End-to-end acceptance checks.

Each test prints one ``criterion N: PASS|FAIL`` line (visible with ``pytest -v``
because printing bypasses capture) before asserting. Run just this file with

    python3 -m pytest tests/test_acceptance.py -v
"""

import hashlib
import json
import math
import time

import numpy as np
import pytest
from scipy.stats import spearmanr

from repboot.cli import run
from repboot.core import quantize_level
from repboot.credibility import PageRankParams, RaterGraph, aggregate_rating, pagerank_scores
from repboot.data import GeneratorConfig, generate
from repboot.evaluation import confidence_histogram, compare_methods
from repboot.fdnn import accuracy, bootstrap_probability
from repboot.forest import (FeatureEncoder, ForestParams, build_forest, grow_tree, mda_importance,
                            mdcd_importance, node_importance)
from repboot.neural import Network, NetworkSpec, gradients, loss, one_hot
from oracles import brute_tree, finite_difference_check, same_structure
from test_credibility import oracle_pagerank, random_graph
from test_fdnn import _gradient_chain
from test_forest import small_dataset, tree_to_nested


@pytest.fixture
def report(pytestconfig):
    """Print a verdict line past pytest's output capture."""
    capture = pytestconfig.pluginmanager.getplugin("capturemanager")

    def emit(n, ok, detail, elapsed):
        with capture.global_and_fixture_disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'}  {detail}  ({elapsed:.1f} s)")
    return emit


def _check(report, n, ok, detail, t0, budget):
    elapsed = time.perf_counter() - t0
    ok = bool(ok) and elapsed < budget
    report(n, ok, detail, elapsed)
    assert ok, f"criterion {n}: {detail} in {elapsed:.1f} s (budget {budget} s)"


# ---------------------------------------------------------------------------


def test_formula_oracles(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst, cases = 0.0, 0
    for _ in range(150):
        n = int(rng.integers(1, 12))
        r, c = rng.random(n) + 1e-3, rng.random(n)
        direct = sum(ri * ci for ri, ci in zip(r, c)) / sum(r)
        worst = max(worst, abs(aggregate_rating(list(zip(r, c))) - direct))

        lvl = int(rng.integers(2, 11))
        x = float(rng.random())
        want = next(i for i in range(1, lvl + 1) if x < i / lvl or i == lvl)
        worst = max(worst, abs(quantize_level(x, lvl) - want))

        imp, ns = rng.random(3), rng.integers(1, 50, 3)
        direct = imp[0] * ns[0] - imp[1] * ns[1] - imp[2] * ns[2]
        worst = max(worst, abs(node_importance(imp[0], ns[0], imp[1], ns[1], imp[2], ns[2]) - direct))

        a = rng.random(lvl)
        direct = max(math.exp(v) for v in a) / sum(math.exp(v) for v in a)
        worst = max(worst, abs(bootstrap_probability(a) - direct))

        m = int(rng.integers(1, 40))
        pred, lab = rng.integers(1, lvl + 1, m), rng.integers(1, lvl + 1, m)
        direct = sum(1 for p, q in zip(pred, lab) if p == q) / m
        worst = max(worst, abs(accuracy(pred, lab) - direct))
        cases += 5
    # boundaries are where floor-based quantization goes wrong
    for lvl in range(2, 11):
        for i in range(lvl + 1):
            want = min(i + 1, lvl)
            worst = max(worst, abs(quantize_level(i / lvl, lvl) - want))
            cases += 1
    _check(report, 1, cases >= 100 and worst <= 1e-10,
           f"{cases} cases, max abs error {worst:.1e}", t0, 1.0)


def test_pagerank_oracle(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(77)
    worst = 0.0
    for _ in range(20):
        raters, edges = random_graph(rng, int(rng.integers(2, 51)))
        graph = RaterGraph(raters, edges)
        ours = pagerank_scores(graph, PageRankParams(tolerance=1e-14, max_iters=5000))
        ours = ours / ours.max()
        ref = oracle_pagerank(raters, edges, tol=1e-14)
        worst = max(worst, max(abs(ours[i] - ref[r]) for i, r in enumerate(raters)))
    ring = [f"r{i}" for i in range(6)]
    ring_edges = [(ring[i], ring[(i + 1) % 6], 1.0) for i in range(6)]
    sym = pagerank_scores(RaterGraph(ring, ring_edges))
    exact = bool(np.all(sym == sym[0]))
    _check(report, 2, worst <= 1e-10 and exact,
           f"20 graphs, max abs error {worst:.1e}, symmetric ring equal: {exact}", t0, 5.0)


def test_cart_oracle(report):
    t0 = time.perf_counter()
    mismatches = 0
    for seed in range(50):
        rng = np.random.default_rng(1000 + seed)
        X, y, cat = small_dataset(rng)
        tree = grow_tree(X, y, 3, cat)
        ref = brute_tree(X.tolist(), y.tolist(), 3, list(cat))
        mismatches += not same_structure(tree_to_nested(tree), ref)
    _check(report, 3, mismatches == 0, f"50 datasets, {mismatches} mismatching trees", t0, 30.0)


def test_gradient_checks(report):
    t0 = time.perf_counter()
    worst, largest = 0.0, 0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        net = Network.initialize(NetworkSpec(6, (8, 5), 4), rng)
        for B in net.biases:
            B += rng.normal(0, 0.5, B.shape)
        X = rng.normal(size=(7, 6))
        Y = one_hot(rng.integers(1, 5, 7), 4)
        g = gradients(net, X, Y)
        worst = max(worst, finite_difference_check(lambda: loss(net, X, Y), net.params, g))
        largest = max(largest, net.spec.n_params)

        chain, inputs, Yc = _gradient_chain(seed)
        _, grads = chain.loss_and_gradients(inputs, Yc)
        worst = max(worst, finite_difference_check(lambda: chain.loss(inputs, Yc), chain.params,
                                                   grads))
        largest = max(largest, chain.n_params)
    _check(report, 4, worst <= 1e-4 and largest <= 800,
           f"20 seeds x (network, chain), max relative error {worst:.1e}, "
           f"largest net {largest} params", t0, 120.0)


# Importance corpus: one service per composition, independent indicators with
# linearly spaced planted weights, spread-out ratings, no missing values.
IMPORTANCE_WEIGHTS = tuple(np.arange(10, 0, -1) / 55)
IMPORTANCE_FOREST = ForestParams(n_outer=40, m_vertical=0)


def importance_corpus(seed):
    spread = {k: (0.5, 0.5) for k in ("Provider", "Community", "SimilarService", "Insight")}
    return generate(GeneratorConfig(seed=seed, n_compositions=1000, services=(1, 1),
                                    lvl_count=10, sigma=0.05, coherence=0.0,
                                    weights=IMPORTANCE_WEIGHTS, layer_beta=spread,
                                    absent_rate=0.0))


def test_importance_recovery(report):
    t0 = time.perf_counter()
    rows = []
    for seed in range(10):
        corpus = importance_corpus(seed)
        enc = FeatureEncoder(corpus.schema)
        fm = enc.matrix([s.topology.services[0] for s in corpus.samples], corpus.lvl_count)
        forest = build_forest(fm, params=IMPORTANCE_FOREST, seed=seed)
        mda, _ = mda_importance(forest, fm, 3, seed)
        rows.append((spearmanr(mda, IMPORTANCE_WEIGHTS)[0],
                     spearmanr(mdcd_importance(forest), IMPORTANCE_WEIGHTS)[0]))
    rho = np.array(rows)
    _check(report, 5, rho.min() >= 0.8,
           f"min Spearman over 10 seeds: MDA {rho[:, 0].min():.3f}, MDCD {rho[:, 1].min():.3f}",
           t0, 300.0)


# ---------------------------------------------------------------------------
# ordering, ablation and confidence share one corpus recipe

ORDERING_SEED = 1


def ordering_corpus(rho):
    return generate(GeneratorConfig(seed=ORDERING_SEED, n_compositions=200, services=(5, 5),
                                    lvl_count=5, rho=rho))


@pytest.fixture(scope="module")
def ordering_run():
    t0 = time.perf_counter()
    rep = compare_methods(ordering_corpus(0.6), ("fdnn", "tfrb", "min"), k=5, seed=ORDERING_SEED)
    return rep, time.perf_counter() - t0


def test_ordering(report, ordering_run):
    rep, elapsed = ordering_run
    t0 = time.perf_counter() - elapsed
    f, t, m = (rep.mean(x) for x in ("fdnn", "tfrb", "min"))
    _check(report, 6, f > t > m and f - t >= 0.1,
           f"accuracy fDNN {f:.3f} > TFRB {t:.3f} > min {m:.3f}, gap {f - t:.3f}", t0, 900.0)


def test_ablation_without_topology_signal(report):
    t0 = time.perf_counter()
    rep = compare_methods(ordering_corpus(0.0), ("fdnn", "tfrb"), k=5, seed=ORDERING_SEED)
    gap = rep.mean("fdnn") - rep.mean("tfrb")
    _check(report, 7, gap < 0.05,
           f"fDNN {rep.mean('fdnn'):.3f} - TFRB {rep.mean('tfrb'):.3f} = {gap:.3f}", t0, 900.0)


def test_confidence_separation(report, ordering_run):
    t0 = time.perf_counter()
    rep, _ = ordering_run
    p = rep.predictions["fdnn"]
    hist = confidence_histogram(p["levels"], p["confidence"], p["labels"])
    pos, neg = hist["positive"].mean, hist["negative"].mean
    ok = pos is not None and neg is not None and pos - neg >= 0.05
    _check(report, 8, ok, f"mean bp correct {pos:.3f} vs wrong {neg:.3f}", t0, 60.0)


# ---------------------------------------------------------------------------


FAST = {"forest": {"n_outer": 2, "m_vertical": 1},
        "chain": {"k": 3, "n_hidden": 1, "train": {"epochs": 10, "learning_rate": 0.02}}}


def _digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _full_pipeline(root, tag, capsys):
    d = root / tag
    d.mkdir()
    cfg = str(root / "cfg.json")
    corpus = str(d / "c.json")
    steps = [["generate", "--n", "20", "--services", "3", "--out", corpus],
             ["credibility", str(root / "g.json")]]
    for method in ("fdnn", "forest", "dnn", "tfrb", "min"):
        steps.append(["train", corpus, "--config", cfg, "--method", method,
                      "--out", str(d / f"{method}.json")])
        steps.append(["predict", str(d / f"{method}.json"), corpus])
    steps += [["importance", corpus, "--config", cfg],
              ["evaluate", corpus, "--config", cfg, "--k-folds", "2", "--histogram"],
              ["sweep", "--axis", "topology_size", "--values", "2,3", "--methods", "tfrb,min",
               "--config", cfg, "--k-folds", "2", "--n", "10", "--out", str(d / "sweep.csv")]]
    codes = [run(s + ["--seed", "11", "--json"]) for s in steps]
    out = capsys.readouterr().out.replace(str(d), "<dir>")
    files = {p.name: _digest(p) for p in sorted(d.iterdir())}
    return codes, out, files


def test_cli_determinism(report, tmp_path, capsys):
    t0 = time.perf_counter()
    (tmp_path / "cfg.json").write_text(json.dumps(FAST))
    (tmp_path / "g.json").write_text(json.dumps({"raters": ["a", "b", "c"], "endorsements": [
        {"from": "a", "to": "b", "weight": 1}, {"from": "b", "to": "c", "weight": 2},
        {"from": "c", "to": "a", "weight": 1}, {"from": "a", "to": "c", "weight": 1}]}))
    codes_a, out_a, files_a = _full_pipeline(tmp_path, "one", capsys)
    codes_b, out_b, files_b = _full_pipeline(tmp_path, "two", capsys)
    ok = (all(c == 0 for c in codes_a + codes_b) and out_a == out_b and files_a == files_b
          and len(files_a) == 7)
    _check(report, 9, ok, f"{len(codes_a)} commands x 2 runs, {len(files_a)} files, "
           f"stdout identical: {out_a == out_b}", t0, 300.0)
