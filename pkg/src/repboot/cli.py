"""Command-line front end: ``python3 -m repboot <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import secrets
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .core import CompositionSample, TopologyError
from .credibility import ConvergenceError, PageRankParams, RaterGraph, pagerank_credibility
from .data import (Corpus, CorpusError, GeneratorConfig, dumps, generate, ingest,
                   parse_corpus, schema_to_dict, write_corpus)
from .evaluation import (METHODS, MethodConfig, compare_methods, confidence_histogram,
                         fit_method, prf_metrics, sweep, sweep_csv)
from .fdnn import ChainConfig, ChainShapeError
from .forest import (FeatureEncoder, ForestParams, build_forest, format_importance_table,
                     importance_report, layer_importance)
from .neural import TrainConfig
from .store import load_model, model_to_dict, save_model


class UsageError(Exception):
    pass


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    p.add_argument("--seed", type=int, help="master random seed (drawn and reported if absent)")
    p.add_argument("--lvl", type=int, help="number of reputation levels")
    p.add_argument("--k-folds", type=int, dest="k_folds", help="cross-validation folds")
    p.add_argument("--config", help="JSON file with generator and training settings")
    p.add_argument("--json", action="store_true", help="emit JSON on stdout")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="repboot", parents=[common],
                                     description="Reputation bootstrapping for service compositions.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    gen = argparse.ArgumentParser(add_help=False)
    gen.add_argument("--n", type=int, help="number of compositions")
    gen.add_argument("--rho", type=float, help="strength of invoker influence")
    gen.add_argument("--sigma", type=float, help="label noise")
    gen.add_argument("--services", type=int, help="services per composition")
    gen.add_argument("--pattern", choices=["Sequential", "Parallel", "Hybrid"])

    g = sub.add_parser("generate", parents=[common, gen], help="write a synthetic corpus")
    g.add_argument("--out", required=True, help="corpus file to write")

    c = sub.add_parser("credibility", parents=[common], help="PageRank credibility of raters")
    c.add_argument("graph", help="rater graph JSON, or a corpus that carries one")
    c.add_argument("--damping", type=float, default=0.85)

    t = sub.add_parser("train", parents=[common], help="train a model on a corpus")
    t.add_argument("corpus")
    t.add_argument("--method", choices=METHODS, default="fdnn")
    t.add_argument("--out", required=True, help="model file to write")
    t.add_argument("--validation", type=float, default=0.2,
                   help="share of the corpus held out to measure accuracy (0 disables)")

    p = sub.add_parser("predict", parents=[common], help="bootstrap composite reputation")
    p.add_argument("model")
    p.add_argument("samples", help="a corpus file or a single sample JSON document")

    i = sub.add_parser("importance", parents=[common], help="layer importance report")
    i.add_argument("corpus")
    i.add_argument("--repeats", type=int, default=3, help="permutations per tree")

    e = sub.add_parser("evaluate", parents=[common], help="cross-validated method comparison")
    e.add_argument("corpus")
    e.add_argument("--methods", default=",".join(METHODS),
                   help=f"comma-separated subset of {','.join(METHODS)}")
    e.add_argument("--histogram", action="store_true",
                   help="also report confidence histograms of each method")

    s = sub.add_parser("sweep", parents=[common, gen], help="accuracy versus one generator setting")
    s.add_argument("--axis", choices=["topology_size", "lvl_count"], required=True)
    s.add_argument("--values", required=True, help="comma-separated integers")
    s.add_argument("--methods", default="fdnn,tfrb,min")
    s.add_argument("--out", help="CSV file (stdout when omitted)")
    return parser


# --------------------------------------------------------------------------
# settings


def _seed(args) -> int:
    seed = getattr(args, "seed", None)
    if seed is None:
        seed = secrets.randbits(32)
        print(f"seed: {seed}", file=sys.stderr)
    return seed


def _load_config(args) -> dict:
    path = getattr(args, "config", None)
    if not path:
        return {}
    data = json.loads(Path(path).read_text())
    if not isinstance(data, dict):
        raise ValueError("config file must hold a JSON object")
    return data


def _method_config(cfg: dict) -> MethodConfig:
    forest = ForestParams(**cfg.get("forest", {}))
    chain = dict(cfg.get("chain", {}))
    train = TrainConfig(**chain.pop("train", {}))
    if "hidden_widths" in chain and chain["hidden_widths"] is not None:
        chain["hidden_widths"] = tuple(chain["hidden_widths"])
    return MethodConfig(forest, ChainConfig(forest=forest, train=train, **chain))


def _generator_config(args, cfg: dict, seed: int) -> GeneratorConfig:
    gen = GeneratorConfig.from_dict(cfg.get("generator", {}))
    gen = replace(gen, seed=seed)
    if getattr(args, "lvl", None) is not None:
        gen = replace(gen, lvl_count=args.lvl)
    for flag, fld in (("n", "n_compositions"), ("rho", "rho"), ("sigma", "sigma")):
        if getattr(args, flag, None) is not None:
            gen = replace(gen, **{fld: getattr(args, flag)})
    if getattr(args, "services", None) is not None:
        gen = replace(gen, services=(args.services, args.services))
    if getattr(args, "pattern", None) is not None:
        gen = replace(gen, patterns={args.pattern: 1.0})
    return gen


def _check_lvl(args, corpus: Corpus) -> None:
    lvl = getattr(args, "lvl", None)
    if lvl is not None and lvl != corpus.lvl_count:
        raise ValueError(f"--lvl {lvl} disagrees with the corpus lvl_count {corpus.lvl_count}")


def _emit(args, payload, text: str) -> None:
    if getattr(args, "json", False):
        sys.stdout.write(dumps(payload))
    else:
        print(text)


# --------------------------------------------------------------------------
# subcommands


def cmd_generate(args) -> int:
    seed = _seed(args)
    gen = _generator_config(args, _load_config(args), seed)
    corpus = generate(gen)
    write_corpus(corpus, args.out)
    levels = np.bincount([s.observed_level for s in corpus.samples], minlength=gen.lvl_count + 1)
    _emit(args, {"out": args.out, "n_samples": len(corpus), "seed": seed,
                 "label_counts": levels[1:].tolist()},
          f"wrote {len(corpus)} compositions to {args.out} (seed {seed}); "
          f"label counts {levels[1:].tolist()}")
    return 0


def cmd_credibility(args) -> int:
    data = json.loads(Path(args.graph).read_text())
    if "samples" in data:
        data = data.get("rater_graph")
        if not data:
            raise ValueError("corpus carries no rater graph")
    scores = pagerank_credibility(RaterGraph.from_dict(data), PageRankParams(damping=args.damping))
    width = max(len(r) for r in scores)
    _emit(args, {"credibility": scores},
          "\n".join(f"{r:<{width}}  {v:.6f}" for r, v in scores.items()))
    return 0


def cmd_train(args) -> int:
    seed = _seed(args)
    corpus = ingest(args.corpus)
    _check_lvl(args, corpus)
    mcfg = _method_config(_load_config(args))
    if not 0.0 <= args.validation < 1.0:
        raise ValueError("--validation must lie in [0, 1)")
    samples, ac = corpus.samples, None
    if args.validation > 0 and len(samples) >= 2:
        perm = np.random.default_rng(seed).permutation(len(samples))
        n_val = max(1, int(round(args.validation * len(samples))))
        val = [samples[i] for i in np.sort(perm[:n_val])]
        samples = [samples[i] for i in np.sort(perm[n_val:])]
    model = fit_method(args.method, samples, corpus.schema, corpus.lvl_count, mcfg, seed)
    if args.validation > 0 and len(corpus.samples) >= 2:
        levels, _ = model.predict_samples(val)
        ac = prf_metrics(levels, [s.observed_level for s in val], corpus.lvl_count)[0]
    save_model(args.out, model_to_dict(args.method, model, corpus.schema, corpus.lvl_count, ac,
                                       seed))
    _emit(args, {"out": args.out, "method": args.method, "n_train": len(samples),
                 "validation_accuracy": ac, "seed": seed},
          f"trained {args.method} on {len(samples)} compositions -> {args.out}"
          + ("" if ac is None else f"; validation accuracy {ac:.4f}"))
    return 0


def _read_samples(path, schema, lvl_count: int) -> list[CompositionSample]:
    """Samples from a corpus file, or from one bare sample document checked against ``schema``."""
    text = Path(path).read_text()
    data = json.loads(text)
    if isinstance(data, dict) and "samples" in data:
        return parse_corpus(text).samples
    doc = {"format_version": 1, "lvl_count": lvl_count, "schema": schema_to_dict(schema),
           "samples": [data]}
    return parse_corpus(json.dumps(doc)).samples


def cmd_predict(args) -> int:
    model, schema, doc = load_model(args.model)
    samples = _read_samples(args.samples, schema, doc["lvl_count"])
    if not samples:
        raise ValueError("no samples to predict")
    levels, bp = model.predict_samples(samples)
    ac = doc.get("validation_accuracy")
    rows = [{"index": i, "level": int(lv), "ac": ac, "bp": round(float(b), 4)}
            for i, (lv, b) in enumerate(zip(levels, bp))]
    ac_txt = "n/a" if ac is None else f"{ac:.4f}"
    _emit(args, {"predictions": rows},
          "\n".join(f"sample {r['index']}: level {r['level']}  (ac, bp) = ({ac_txt}, {r['bp']:.4f})"
                    for r in rows))
    return 0


def cmd_importance(args) -> int:
    seed = _seed(args)
    corpus = ingest(args.corpus)
    _check_lvl(args, corpus)
    mcfg = _method_config(_load_config(args))
    enc = FeatureEncoder(corpus.schema)
    recs, labels = [], []
    for s in corpus.samples:
        for r in s.topology.services:
            recs.append(r)
            labels.append(r.observed_level if r.observed_level is not None else s.observed_level)
    if not recs:
        raise ValueError("corpus has no service records")
    fm = enc.matrix(recs, corpus.lvl_count, labels)
    forest = build_forest(fm, params=mcfg.forest, seed=seed, encoder=enc)
    report = importance_report(forest, fm, args.repeats, seed)
    layers = layer_importance(report)
    _emit(args, {"indicators": report.to_dict(),
                 "layers": [{"layer": l.layer.value, "mda": l.mda, "mdcd": l.mdcd,
                             "average": l.average} for l in layers]},
          format_importance_table(layers))
    return 0


def _methods(text: str) -> list[str]:
    out = [m.strip() for m in text.split(",") if m.strip()]
    bad = [m for m in out if m not in METHODS]
    if bad or not out:
        raise UsageError(f"unknown method(s) {bad}; choose from {', '.join(METHODS)}")
    return out


def cmd_evaluate(args) -> int:
    seed = _seed(args)
    methods = _methods(args.methods)
    corpus = ingest(args.corpus)
    _check_lvl(args, corpus)
    k = getattr(args, "k_folds", None) or 5
    report = compare_methods(corpus, methods, k, seed, _method_config(_load_config(args)))
    payload = report.to_dict()
    text = report.format_table()
    if args.histogram:
        payload["confidence"] = {}
        for m in methods:
            p = report.predictions[m]
            h = confidence_histogram(p["levels"], p["confidence"], p["labels"])
            payload["confidence"][m] = {k2: v.to_dict() for k2, v in h.items()}
            text += (f"\n{m}: mean confidence positive "
                     f"{_fmt(h['positive'].mean)} negative {_fmt(h['negative'].mean)}")
    _emit(args, payload, text)
    return 0


def _fmt(x):
    return "n/a" if x is None else f"{x:.4f}"


def cmd_sweep(args) -> int:
    seed = _seed(args)
    cfg = _load_config(args)
    gen = _generator_config(args, cfg, seed)
    try:
        values = [int(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        raise UsageError("--values must be comma-separated integers") from None
    k = getattr(args, "k_folds", None) or 5
    rows = sweep(gen, args.axis, values, _methods(args.methods), k, seed, _method_config(cfg))
    csv_text = sweep_csv(rows)
    if args.out:
        Path(args.out).write_text(csv_text)
    _emit(args, {"rows": rows}, csv_text.rstrip("\n"))
    return 0


COMMANDS = {"generate": cmd_generate, "credibility": cmd_credibility, "train": cmd_train,
            "predict": cmd_predict, "importance": cmd_importance, "evaluate": cmd_evaluate,
            "sweep": cmd_sweep}

DOMAIN_ERRORS = (ValueError, KeyError, TypeError, OSError, TopologyError, CorpusError,
                 ConvergenceError, ChainShapeError, json.JSONDecodeError)


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"repboot: error: {exc}", file=sys.stderr)
        return 2
    except DOMAIN_ERRORS as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"error: {msg}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())
