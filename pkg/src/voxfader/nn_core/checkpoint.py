"""Checkpoint persistence: a JSON manifest plus a little-endian float64 sidecar.

Layout of a checkpoint directory::

    manifest.json   {"format": ..., "arrays": [{"name", "shape", "offset"}], "scalars": {...}}
    tensors.bin     concatenated '<f8' data in manifest order

``offset`` counts float64 elements, not bytes.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from ..errors import ValidationError
from .optim import OptimizerState
from .params import ParameterSet

FORMAT = "voxfader-checkpoint/1"
MANIFEST = "manifest.json"
SIDECAR = "tensors.bin"


def save_arrays(directory, arrays: Mapping[str, np.ndarray], scalars: Mapping[str, Any] | None = None) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    offset = 0
    chunks = []
    for name, arr in arrays.items():
        arr = np.asarray(arr, dtype="<f8")
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        offset += arr.size
        chunks.append(np.ascontiguousarray(arr).tobytes())
    manifest = {"format": FORMAT, "arrays": entries, "scalars": dict(scalars or {})}
    (directory / SIDECAR).write_bytes(b"".join(chunks))
    (directory / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return directory


def load_arrays(directory) -> tuple[dict[str, np.ndarray], dict[str, Any]]:
    directory = Path(directory)
    manifest = json.loads((directory / MANIFEST).read_text())
    if manifest.get("format") != FORMAT:
        raise ValidationError(f"{directory}: unrecognized checkpoint format {manifest.get('format')!r}")
    flat = np.frombuffer((directory / SIDECAR).read_bytes(), dtype="<f8")
    arrays = {}
    for e in manifest["arrays"]:
        size = int(np.prod(e["shape"], dtype=np.int64))
        start = e["offset"]
        if start + size > flat.size:
            raise ValidationError(f"{directory}: sidecar too short for {e['name']!r}")
        arrays[e["name"]] = flat[start:start + size].reshape(e["shape"]).astype(np.float64)
    return arrays, manifest["scalars"]


def pack(prefix: str, params: ParameterSet) -> dict[str, np.ndarray]:
    return {f"{prefix}/{k}": params[k] for k in params}


def unpack(prefix: str, arrays: Mapping[str, np.ndarray]) -> ParameterSet:
    head = prefix + "/"
    return ParameterSet({k[len(head):]: v for k, v in arrays.items() if k.startswith(head)})


def pack_optimizer(prefix: str, state: OptimizerState) -> tuple[dict[str, np.ndarray], dict]:
    arrays = {f"{prefix}/{k}": v for k, v in state.accumulators.items()}
    return arrays, state.scalars()


def unpack_optimizer(prefix: str, arrays: Mapping[str, np.ndarray], scalars: Mapping) -> OptimizerState:
    head = prefix + "/"
    acc = {k[len(head):]: np.array(v) for k, v in arrays.items() if k.startswith(head)}
    return OptimizerState(**scalars, accumulators=acc)


def save_checkpoint(directory, params: Mapping[str, ParameterSet], optimizers: Mapping[str, OptimizerState] | None = None,
                    meta: Mapping[str, Any] | None = None) -> Path:
    """Persist several parameter sets and optimizer states in one checkpoint."""
    arrays: dict[str, np.ndarray] = {}
    for key, p in params.items():
        arrays.update(pack(f"params/{key}", p))
    opt_scalars = {}
    for key, st in (optimizers or {}).items():
        a, s = pack_optimizer(f"optim/{key}", st)
        arrays.update(a)
        opt_scalars[key] = s
    scalars = {"optimizers": opt_scalars, "meta": dict(meta or {})}
    return save_arrays(directory, arrays, scalars)


def load_checkpoint(directory) -> tuple[dict[str, ParameterSet], dict[str, OptimizerState], dict]:
    arrays, scalars = load_arrays(directory)
    keys = sorted({k.split("/")[1] for k in arrays if k.startswith("params/")})
    params = {k: unpack(f"params/{k}", arrays) for k in keys}
    optimizers = {k: unpack_optimizer(f"optim/{k}", arrays, s) for k, s in scalars.get("optimizers", {}).items()}
    return params, optimizers, scalars.get("meta", {})
