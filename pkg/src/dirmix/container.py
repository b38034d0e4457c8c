"""Binary feature container and its JSON manifest sidecar.

Layout (all little-endian):

    magic       8 bytes  b"SMPXFT01"
    version     u16      1
    content     u8       1 = simplex probabilities, 2 = raw embeddings
    dtype       u8       1 = f32, 2 = f64
    has_labels  u8
    reserved    3 bytes
    n_samples   u64
    dim         u64
    payload     n_samples * dim values, row-major, declared dtype
    labels      n_samples u32 values when has_labels = 1

The sidecar lives at ``<path>.json`` and records dataset name, class names,
the extraction temperature, encoder id, prompt template, and a creation
timestamp. This file pair is the whole contract between the toolkit and
any feature extractor; loading never repairs invalid data.
"""

from __future__ import annotations

import datetime as _dt
import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .core import ContentKind, FeatureSet

__all__ = [
    "ContainerFormatError",
    "Manifest",
    "MAGIC",
    "manifest_path",
    "write_container",
    "read_container",
    "inspect_container",
]

MAGIC = b"SMPXFT01"
VERSION = 1
_HEADER = struct.Struct("<8sHBBB3xQQ")
ROW_SUM_ATOL = 1e-5

_CONTENT_CODES = {ContentKind.SIMPLEX_PROBABILITIES: 1, ContentKind.RAW_EMBEDDINGS: 2}
_CONTENT_KINDS = {v: k for k, v in _CONTENT_CODES.items()}
_DTYPE_CODES = {"f32": 1, "f64": 2}
_DTYPES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}


class ContainerFormatError(ValueError):
    """Malformed or inconsistent container / manifest."""


@dataclass
class Manifest:
    dataset: str
    class_names: Optional[list[str]] = None
    temperature: Optional[float] = None
    encoder: str = "unknown"
    prompt_template: Optional[str] = None
    created_at: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "class_names": self.class_names,
            "temperature": self.temperature,
            "encoder": self.encoder,
            "prompt_template": self.prompt_template,
            "created_at": self.created_at,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Manifest":
        try:
            return cls(
                dataset=data["dataset"],
                class_names=data.get("class_names"),
                temperature=data.get("temperature"),
                encoder=data.get("encoder", "unknown"),
                prompt_template=data.get("prompt_template"),
                created_at=data.get("created_at"),
            )
        except KeyError as exc:
            raise ContainerFormatError(f"manifest is missing field {exc}") from exc


def manifest_path(path) -> Path:
    return Path(str(path) + ".json")


def _validate_probability_rows(rows: np.ndarray) -> None:
    if np.any(rows < -ROW_SUM_ATOL):
        raise ContainerFormatError("probability payload has negative entries")
    sums = rows.sum(axis=1, dtype=np.float64)
    bad = np.abs(sums - 1.0) > ROW_SUM_ATOL
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise ContainerFormatError(
            f"probability row {i} sums to {sums[i]:.8f}, expected 1 within {ROW_SUM_ATOL}"
        )


def write_container(features: FeatureSet, manifest: Manifest, path, dtype: str = "f64") -> None:
    """Write the container and its manifest sidecar; lossless round-trip at
    the declared dtype."""
    if dtype not in _DTYPE_CODES:
        raise ContainerFormatError("dtype must be 'f32' or 'f64'")
    if features.content_kind is ContentKind.SIMPLEX_PROBABILITIES:
        _validate_probability_rows(features.rows)
        names = manifest.class_names
        if names is not None and len(names) != features.dim:
            raise ContainerFormatError(
                f"manifest lists {len(names)} class names for dimension {features.dim}"
            )
    if features.labels is not None and features.labels.max() >= 2**32:
        raise ContainerFormatError("labels exceed the u32 range")

    payload = np.ascontiguousarray(features.rows, dtype=_DTYPES[_DTYPE_CODES[dtype]])
    header = _HEADER.pack(
        MAGIC,
        VERSION,
        _CONTENT_CODES[features.content_kind],
        _DTYPE_CODES[dtype],
        1 if features.labels is not None else 0,
        features.n_samples,
        features.dim,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload.tobytes())
        if features.labels is not None:
            fh.write(np.ascontiguousarray(features.labels, dtype="<u4").tobytes())

    record = manifest.to_dict()
    if record.get("created_at") is None:
        record["created_at"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
    with open(manifest_path(path), "w") as fh:
        json.dump(record, fh, indent=2)


def _read_header(blob: bytes, path) -> tuple:
    if len(blob) < _HEADER.size:
        raise ContainerFormatError(f"{path}: file shorter than the {_HEADER.size}-byte header")
    magic, version, content, dtype_code, has_labels = _HEADER.unpack_from(blob)[:5]
    if magic != MAGIC:
        raise ContainerFormatError(f"{path}: not a feature container (bad magic {magic!r})")
    if version != VERSION:
        raise ContainerFormatError(f"{path}: unsupported version {version}")
    if content not in _CONTENT_KINDS:
        raise ContainerFormatError(f"{path}: unknown content kind code {content}")
    if dtype_code not in _DTYPES:
        raise ContainerFormatError(f"{path}: unknown dtype code {dtype_code}")
    if has_labels not in (0, 1):
        raise ContainerFormatError(f"{path}: has_labels must be 0 or 1, got {has_labels}")
    return _HEADER.unpack_from(blob)


def read_container(path) -> tuple[FeatureSet, Manifest]:
    """Load and validate a container plus its manifest; f32 payloads are
    widened to f64."""
    blob = Path(path).read_bytes()
    magic, version, content, dtype_code, has_labels, n, dim = _read_header(blob, path)
    value_dtype = _DTYPES[dtype_code]
    expected = _HEADER.size + n * dim * value_dtype.itemsize + (4 * n if has_labels else 0)
    if len(blob) != expected:
        raise ContainerFormatError(
            f"{path}: expected {expected} bytes for {n} x {dim} {value_dtype.name} "
            f"payload, file has {len(blob)}"
        )
    offset = _HEADER.size
    rows = np.frombuffer(blob, dtype=value_dtype, count=n * dim, offset=offset)
    rows = rows.reshape(n, dim).astype(np.float64)
    offset += n * dim * value_dtype.itemsize
    labels = None
    if has_labels:
        labels = np.frombuffer(blob, dtype="<u4", count=n, offset=offset).astype(np.int64)

    mpath = manifest_path(path)
    if not mpath.exists():
        raise ContainerFormatError(f"{path}: manifest sidecar {mpath} not found")
    manifest = Manifest.from_dict(json.loads(mpath.read_text()))

    kind = _CONTENT_KINDS[content]
    if kind is ContentKind.SIMPLEX_PROBABILITIES:
        _validate_probability_rows(rows)
        if manifest.class_names is not None and len(manifest.class_names) != dim:
            raise ContainerFormatError(
                f"{path}: manifest lists {len(manifest.class_names)} class names "
                f"for dimension {dim}"
            )
    features = FeatureSet(
        rows=rows,
        content_kind=kind,
        labels=labels,
        class_names=tuple(manifest.class_names) if manifest.class_names else None,
    )
    return features, manifest


def inspect_container(path) -> dict:
    """Header, manifest, and payload summary for one container."""
    features, manifest = read_container(path)
    info = {
        "path": str(path),
        "content_kind": features.content_kind.value,
        "n_samples": features.n_samples,
        "dim": features.dim,
        "has_labels": features.labels is not None,
        "manifest": manifest.to_dict(),
    }
    if features.content_kind is ContentKind.SIMPLEX_PROBABILITIES:
        sums = features.rows.sum(axis=1)
        info["row_sum_min"] = float(sums.min())
        info["row_sum_max"] = float(sums.max())
    if features.labels is not None:
        counts = np.bincount(features.labels, minlength=features.n_classes)
        info["label_histogram"] = counts.tolist()
    return info
