"""On-disk formats: dataset documents, checkpoints and metrics tables.

Datasets are JSON documents ``{"meta": {...}, "samples": [{"t": [...], "y": [[...]]}]}``
with every float written to 17 significant digits. A checkpoint is a JSON
manifest plus a sidecar of little-endian float64 parameters (weights row-major
then bias, layer by layer) whose SHA-256 is stored in the manifest.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .datagen import Dataset, Trajectory
from .errors import ChecksumError, SchemaError
from .neural import Activation, LayerSpec, MLPParams

CHECKPOINT_FORMAT = "spectral-nie-checkpoint/1"
_PARAM_DTYPE = np.dtype("<f8")


def _fmt(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"cannot serialise non-finite value {x!r}")
    return format(x, ".17g")


def _vector(v: Iterable[float]) -> str:
    return "[" + ", ".join(_fmt(x) for x in v) + "]"


def dumps_dataset(ds: Dataset) -> str:
    meta = json.dumps(ds.meta, sort_keys=True, allow_nan=False, default=_json_default)
    parts = []
    for s in ds.samples:
        rows = ", ".join(_vector(r) for r in s.values)
        parts.append(f'{{"t": {_vector(s.times)}, "y": [{rows}]}}')
    body = ",\n  ".join(parts)
    return f'{{"meta": {meta},\n "samples": [\n  {body}\n ]}}\n'


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"{type(obj).__name__} is not serialisable")


def _require(obj: Mapping, key: str, where: str, kind=None):
    if not isinstance(obj, Mapping) or key not in obj:
        raise SchemaError(f"missing field {where}{key!r}")
    value = obj[key]
    if kind is not None and not isinstance(value, kind):
        raise SchemaError(f"field {where}{key!r} has the wrong type")
    return value


def loads_dataset(text: str) -> Dataset:
    """Parse a dataset document. Raises SchemaError naming the offending field."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"dataset is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise SchemaError("dataset document must be an object")
    meta = _require(doc, "meta", "", dict)
    for key in ("dim", "t_min", "t_max"):
        _require(meta, key, "meta.", (int, float))
    raw = _require(doc, "samples", "", list)
    samples = []
    for i, item in enumerate(raw):
        where = f"samples[{i}]."
        t = _require(item, "t", where, list)
        y = _require(item, "y", where, list)
        try:
            times = np.array(t, dtype=np.float64)
            values = np.array(y, dtype=np.float64)
        except (TypeError, ValueError):
            raise SchemaError(f"field {where}t/y holds non-numeric or ragged data") from None
        if values.ndim != 2 or values.shape[1] != meta["dim"]:
            raise SchemaError(f"field {where}'y' must be rows of {meta['dim']} values")
        try:
            samples.append(Trajectory(times, values))
        except ValueError as exc:
            raise SchemaError(f"field {where}: {exc}") from None
    try:
        return Dataset(samples, meta)
    except ValueError as exc:
        raise SchemaError(f"field 'samples': {exc}") from None


def save_dataset(ds: Dataset, path) -> None:
    _atomic_write_text(Path(path), dumps_dataset(ds))


def load_dataset(path) -> Dataset:
    return loads_dataset(Path(path).read_text(encoding="utf-8"))


# --------------------------------------------------------------------------
# checkpoints
# --------------------------------------------------------------------------

def _sidecar(path: Path) -> Path:
    return path.with_suffix(".bin")


def save_checkpoint(path, params: MLPParams, **info: Any) -> Path:
    """Write ``path`` (manifest) and ``path.with_suffix('.bin')`` (parameters)."""
    path = Path(path)
    blob = params.flat().astype(_PARAM_DTYPE).tobytes()
    manifest = {
        "format": CHECKPOINT_FORMAT,
        "layers": [
            {"in": s.in_dim, "out": s.out_dim, "activation": s.activation.value}
            for s in params.specs
        ],
        "n": params.n_modes - 1,
        "dim": params.dim,
        "total_params": params.total_params,
        "params_file": _sidecar(path).name,
        "sha256": hashlib.sha256(blob).hexdigest(),
        **info,
    }
    _atomic_write_bytes(_sidecar(path), blob)
    _atomic_write_text(path, json.dumps(manifest, indent=1, sort_keys=True,
                                        default=_json_default) + "\n")
    return path


def load_checkpoint(path) -> tuple[MLPParams, dict]:
    """Read a checkpoint; raises ChecksumError if the parameter file was altered."""
    path = Path(path)
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"checkpoint manifest is not valid JSON: {exc}") from None
    if _require(manifest, "format", "") != CHECKPOINT_FORMAT:
        raise SchemaError(f"field 'format' is not {CHECKPOINT_FORMAT!r}")
    layers = _require(manifest, "layers", "", list)
    try:
        specs = [
            LayerSpec(int(l["in"]), int(l["out"]), Activation(l["activation"])) for l in layers
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"field 'layers' is malformed: {exc}") from None
    n = int(_require(manifest, "n", ""))
    dim = int(_require(manifest, "dim", ""))
    blob_path = path.parent / _require(manifest, "params_file", "", str)
    blob = blob_path.read_bytes()
    if hashlib.sha256(blob).hexdigest() != _require(manifest, "sha256", "", str):
        raise ChecksumError(f"checksum mismatch for {blob_path}")
    expected = sum(s.in_dim * s.out_dim + s.out_dim for s in specs)
    if len(blob) != 8 * expected:
        raise ChecksumError(f"{blob_path} holds {len(blob) // 8} values, expected {expected}")
    from .neural import init_params

    skeleton = init_params(specs, 0, n + 1, dim, zero=True)
    params = skeleton.with_flat(np.frombuffer(blob, dtype=_PARAM_DTYPE).astype(np.float64))
    return params, manifest


# --------------------------------------------------------------------------
# tables
# --------------------------------------------------------------------------

def format_cell(value) -> str:
    if isinstance(value, (float, np.floating)):
        return "nan" if math.isnan(value) else repr(float(value))
    return str(value)


def write_csv(path, header: Sequence[str], rows: Iterable[Mapping | Sequence]) -> None:
    lines = [",".join(header)]
    for row in rows:
        cells = [row.get(h, "") for h in header] if isinstance(row, Mapping) else row
        lines.append(",".join(format_cell(c) for c in cells))
    _atomic_write_text(Path(path), "\n".join(lines) + "\n")


def read_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


# --------------------------------------------------------------------------

def _atomic_write_text(path: Path, text: str) -> None:
    _atomic_write_bytes(path, text.encode("utf-8"))


def _atomic_write_bytes(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)
