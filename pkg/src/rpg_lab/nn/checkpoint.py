"""Versioned checkpoint records: architecture, named parameter slices, optimizer
moments, and RNG state, such that loading and continuing is bit-reproducible in
single-threaded mode."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .params import ParamVector

CHECKPOINT_VERSION = "rpg-ckpt-v1"


def _spec_to_json(spec) -> list:
    return [[name, off, list(shape)] for name, off, shape in spec]


def _spec_from_json(spec) -> tuple:
    return tuple((name, off, tuple(shape)) for name, off, shape in spec)


def save_checkpoint(
    path,
    arch: dict,
    params: dict[str, ParamVector],
    optimizer: dict[str, dict] | None = None,
    rng_state: dict | None = None,
    extra: dict | None = None,
) -> None:
    """Write one .npz checkpoint; `params` maps component name -> ParamVector."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = {
        "version": CHECKPOINT_VERSION,
        "arch": arch,
        "param_specs": {name: _spec_to_json(p.spec) for name, p in params.items()},
        "optimizer_steps": {name: opt["t"] for name, opt in (optimizer or {}).items()},
        "rng_state": rng_state,
        "extra": extra or {},
    }
    arrays = {f"param/{name}": p.flat for name, p in params.items()}
    for name, opt in (optimizer or {}).items():
        arrays[f"adam_m/{name}"] = opt["m"]
        arrays[f"adam_v/{name}"] = opt["v"]
    tmp = path.with_suffix(path.suffix + ".tmp.npz")
    np.savez(tmp, meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8), **arrays)
    tmp.replace(path)


def load_checkpoint(path) -> dict:
    """Returns {"arch", "params": {name: ParamVector}, "optimizer", "rng_state", "extra"}."""
    with np.load(Path(path)) as zf:
        meta = json.loads(bytes(zf["meta"].tobytes()).decode())
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version in {path}")
        params = {}
        for name, spec in meta["param_specs"].items():
            p = object.__new__(ParamVector)
            p.spec = _spec_from_json(spec)
            p.flat = zf[f"param/{name}"].copy()
            params[name] = p
        optimizer = {}
        for name, t in meta.get("optimizer_steps", {}).items():
            optimizer[name] = {
                "t": t,
                "m": zf[f"adam_m/{name}"].copy(),
                "v": zf[f"adam_v/{name}"].copy(),
            }
    return {
        "arch": meta["arch"],
        "params": params,
        "optimizer": optimizer,
        "rng_state": meta.get("rng_state"),
        "extra": meta.get("extra", {}),
    }
