"""Model files: one JSON document per trained method, keyed by topology shape."""

from __future__ import annotations

import json
from pathlib import Path

from .baselines import MinBaseline, TFRBModel
from .core import IndicatorSchema
from .data import schema_from_dict, schema_to_dict
from .evaluation import Bucketed, _arity, _shape
from .fdnn import ChainedFDNN, ForestChain

STORE_FORMAT_VERSION = 1

_LOADERS = {"fdnn": ChainedFDNN, "dnn": ChainedFDNN, "forest": ForestChain, "tfrb": TFRBModel}


def model_to_dict(method: str, model, schema: IndicatorSchema, lvl_count: int,
                  validation_accuracy: float | None = None, seed: int | None = None) -> dict:
    out = {"format_version": STORE_FORMAT_VERSION, "method": method, "lvl_count": lvl_count,
           "seed": seed, "validation_accuracy": validation_accuracy,
           "schema": schema_to_dict(schema)}
    if isinstance(model, Bucketed):
        out["models"] = [{"key": k, "model": m.to_dict()} for k, m in model.models.items()]
    else:
        out["model"] = model.to_dict()
    return out


def model_from_dict(data: dict):
    if data.get("format_version") != STORE_FORMAT_VERSION:
        raise ValueError(f"unsupported model file version {data.get('format_version')!r}")
    schema = schema_from_dict(data["schema"])
    method = data["method"]
    if method == "min":
        return MinBaseline.from_dict(data["model"], schema), schema
    loader = _LOADERS.get(method)
    if loader is None:
        raise ValueError(f"unknown method {method!r} in model file")
    bucket = Bucketed(_arity if method == "tfrb" else _shape, None)
    bucket.models = {m["key"]: loader.from_dict(m["model"], schema) for m in data["models"]}
    return bucket, schema


def save_model(path: str | Path, doc: dict) -> None:
    Path(path).write_text(json.dumps(doc, separators=(",", ":")) + "\n")


def load_model(path: str | Path):
    doc = json.loads(Path(path).read_text())
    model, schema = model_from_dict(doc)
    return model, schema, doc
