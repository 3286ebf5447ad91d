"""Versioned JSON persistence for both model families."""

from __future__ import annotations

import json
from pathlib import Path

from .ebm import EbmModel, ebm_from_dict, ebm_to_dict
from .errors import DataError
from .gbdt import GbdtModel, gbdt_from_dict, gbdt_to_dict


def model_to_dict(model) -> dict:
    if isinstance(model, GbdtModel):
        return gbdt_to_dict(model)
    if isinstance(model, EbmModel):
        return ebm_to_dict(model)
    raise TypeError(f"unsupported model type {type(model).__name__}")


def model_from_dict(doc: dict):
    kind = doc.get("type")
    if kind == "gbdt":
        return gbdt_from_dict(doc)
    if kind == "ebm":
        return ebm_from_dict(doc)
    raise DataError(f"unknown model type {kind!r}")


def save_model(model, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(model_to_dict(model), indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    return path


def load_model(path: str | Path):
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such model file: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not valid JSON ({exc})") from exc
    return model_from_dict(doc)
