"""Canonical 221-entry feature layout and its JSON / CSV serializations.

Feature numbers are 1-based (``f1`` .. ``f221``); Python positions are
``number - 1``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import AssemblyError, SchemaError

SCHEMA_VERSION = "stvqa-features/1"

_MOMENT_PARAMS = ("ggd_shape", "ggd_scale", "skew", "kurt")
_AGGD_PARAMS = ("nu", "eta", "sigl2", "sigr2")
_PRODUCTS = ("h", "v", "d1", "d2")
_SCALES = ("s1", "s2")


def _moment_block(prefix):
    return [f"{prefix}_{p}_{s}" for s in _SCALES for p in _MOMENT_PARAMS]


def _aggd_names(prefix, scale):
    return [f"{prefix}_{d}_{p}_{scale}" for d in _PRODUCTS for p in _AGGD_PARAMS]


def _gradient_block(prefix):
    return [n for s in _SCALES for n in _aggd_names(prefix, s)]


def _chip_block(prefix):
    names = []
    for s in _SCALES:
        names += [f"{prefix}_ggd_shape_{s}", f"{prefix}_ggd_scale_{s}"]
        names += _aggd_names(prefix, s)
    return names


def _niqe_block():
    names = []
    for s in _SCALES:
        names += [f"niqe_mscn_ggd_shape_{s}", f"niqe_mscn_ggd_scale_{s}"]
        names += _aggd_names("niqe", s)
    return names + ["niqe_score"]


SPATIAL_BLOCKS = (
    ("chroma", _moment_block("chroma")),
    ("chroma_sigma", _moment_block("chroma_sigma")),
    ("gradient", _gradient_block("grad")),
    ("luma_sigma", _moment_block("luma_sigma")),
)

BLOCKS = (
    *SPATIAL_BLOCKS,
    *((f"std_{name}", [f"std_{n}" for n in names]) for name, names in SPATIAL_BLOCKS),
    ("niqe", _niqe_block()),
    ("stchip", _chip_block("stchip")),
    ("stgradchip", _chip_block("stgradchip")),
)

BLOCK_NAMES = tuple(name for name, _ in BLOCKS)
BLOCK_SIZES = {name: len(names) for name, names in BLOCKS}
FEATURE_NAMES = tuple(n for _, names in BLOCKS for n in names)
N_FEATURES = len(FEATURE_NAMES)
_INDEX = {n: i for i, n in enumerate(FEATURE_NAMES)}

assert N_FEATURES == 221


def block_range(name):
    """1-based inclusive (first, last) feature numbers of a block."""
    start = 1
    for block, names in BLOCKS:
        if block == name:
            return (start, start + len(names) - 1)
        start += len(names)
    raise KeyError(name)


def feature_number(name):
    """1-based feature number, e.g. ``stchip_ggd_shape_s1`` -> 150."""
    return _INDEX[name] + 1


@dataclass
class FeatureVector:
    values: np.ndarray
    video_id: str = ""
    schema_version: str = SCHEMA_VERSION
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (N_FEATURES,):
            raise SchemaError(f"feature vector must have {N_FEATURES} entries, got {self.values.size}")

    def __getitem__(self, name):
        return float(self.values[_INDEX[name]])

    def as_dict(self):
        return dict(zip(FEATURE_NAMES, self.values.tolist()))

    def to_json_obj(self):
        return {
            "video_id": self.video_id,
            "schema_version": self.schema_version,
            "features": self.values.tolist(),
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_json_obj(cls, obj):
        try:
            values = obj["features"]
        except (KeyError, TypeError):
            raise SchemaError("feature JSON lacks a 'features' array") from None
        return cls(
            np.asarray(values, dtype=np.float64),
            obj.get("video_id", ""),
            obj.get("schema_version", ""),
            list(obj.get("warnings", [])),
        )


def assemble(blocks: Mapping[str, Sequence[float]], video_id="", warnings=()) -> FeatureVector:
    """Concatenate named blocks in canonical order, whatever order they arrive in."""
    parts = []
    for name in BLOCK_NAMES:
        if name not in blocks:
            raise AssemblyError(f"missing feature block {name!r}")
        arr = np.asarray(blocks[name], dtype=np.float64).ravel()
        if arr.size != BLOCK_SIZES[name]:
            raise AssemblyError(f"block {name!r} has {arr.size} values, expected {BLOCK_SIZES[name]}")
        parts.append(arr)
    extra = set(blocks) - set(BLOCK_NAMES)
    if extra:
        raise AssemblyError(f"unknown feature blocks: {sorted(extra)}")
    vec = np.concatenate(parts)
    if not np.all(np.isfinite(vec)):
        bad = [FEATURE_NAMES[i] for i in np.flatnonzero(~np.isfinite(vec))]
        raise AssemblyError(f"non-finite features: {bad[:5]}")
    return FeatureVector(vec, video_id, SCHEMA_VERSION, list(warnings))


def write_json(path, vectors):
    vectors = list(vectors) if not isinstance(vectors, FeatureVector) else [vectors]
    obj = vectors[0].to_json_obj() if len(vectors) == 1 else [v.to_json_obj() for v in vectors]
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1)


def write_csv(path, vectors):
    vectors = [vectors] if isinstance(vectors, FeatureVector) else list(vectors)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["video_id", *FEATURE_NAMES])
        for v in vectors:
            # repr round-trips float64 exactly
            w.writerow([v.video_id, *(repr(float(x)) for x in v.values)])


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaError(f"{path}: empty feature CSV")
    header = rows[0]
    if tuple(header[1:]) != FEATURE_NAMES:
        raise SchemaError(f"{path}: header does not match the {N_FEATURES}-feature schema")
    out = []
    for row in rows[1:]:
        if not row:
            continue
        out.append(FeatureVector(np.array([float(x) for x in row[1:]]), row[0]))
    return out


def read_json(path):
    with open(path) as fh:
        obj = json.load(fh)
    items = obj if isinstance(obj, list) else [obj]
    return [FeatureVector.from_json_obj(o) for o in items]


def read_features(paths):
    """Load feature vectors from any mix of .csv and .json files."""
    out = []
    for p in [paths] if isinstance(paths, (str, bytes)) or hasattr(paths, "__fspath__") else paths:
        p = str(p)
        out += read_csv(p) if p.lower().endswith(".csv") else read_json(p)
    return out
