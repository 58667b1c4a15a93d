"""Checkpoint I/O: parameter arrays keyed by path plus a JSON sidecar.

Parameters go into a ``.npz`` archive keyed by stable path strings
(e.g. ``enc.3.attn.wq``); the sidecar ``<stem>.json`` records the model
configuration and seed so a run can be reproduced or re-evaluated.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import IoError, ShapeMismatchError, UnknownKeyError
from .tensor import Tensor


def _sidecar_path(path: Path) -> Path:
    return path.with_suffix(".json")


def save_checkpoint(path, params: dict[str, Tensor], config: dict, seed: int) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(path, **{name: p.data for name, p in params.items()})
    sidecar = {"format": 1, "seed": seed, "config": config}
    _sidecar_path(path).write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    path = Path(path)
    if not path.exists():
        raise IoError(f"checkpoint not found: {path}")
    sidecar_file = _sidecar_path(path)
    if not sidecar_file.exists():
        raise IoError(f"checkpoint sidecar not found: {sidecar_file}")
    with np.load(path) as archive:
        arrays = {name: archive[name] for name in archive.files}
    sidecar = json.loads(sidecar_file.read_text())
    return arrays, sidecar


def restore_params(params: dict[str, Tensor], arrays: dict[str, np.ndarray]) -> None:
    """Copy saved arrays into live parameters, rejecting key or shape drift."""
    missing = sorted(set(params) - set(arrays))
    extra = sorted(set(arrays) - set(params))
    if missing or extra:
        raise UnknownKeyError(f"checkpoint keys do not match model (missing={missing}, extra={extra})")
    for name, p in params.items():
        saved = arrays[name]
        if saved.shape != p.data.shape:
            raise ShapeMismatchError(
                f"checkpoint entry {name!r} has shape {saved.shape}, model expects {p.data.shape}"
            )
        p.data[...] = saved
