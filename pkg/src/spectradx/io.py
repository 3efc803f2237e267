"""File formats: feature CSV, SPDX binary arrays, PGM masks, model JSON.

All writers are byte-deterministic for identical inputs (floats are
serialized with ``repr``, which round-trips float64 exactly), so artifact
files can be compared with a plain byte diff across reruns.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .classifier import ClassifierModel
from .errors import FormatError
from .spectral import FeatureMatrix, SpectralReport
from .velocity import VectorFieldModel

SPDX_MAGIC = b"SPDX"


# --- feature matrices ---------------------------------------------------

def write_feature_csv(path, fm: FeatureMatrix):
    lines = [",".join(f"f{j}" for j in range(fm.n_features))]
    for row in fm.data:
        lines.append(",".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_feature_csv(path) -> FeatureMatrix:
    text = Path(path).read_text()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if len(lines) < 2:
        raise FormatError(f"{path}: need a header and at least one data row")
    header = lines[0].split(",")
    if header != [f"f{j}" for j in range(len(header))]:
        raise FormatError(f"{path}: malformed header {lines[0]!r}")
    try:
        rows = [[float(v) for v in ln.split(",")] for ln in lines[1:]]
    except ValueError as exc:
        raise FormatError(f"{path}: non-numeric cell ({exc})") from exc
    widths = {len(r) for r in rows}
    if widths != {len(header)}:
        raise FormatError(f"{path}: ragged rows (widths {sorted(widths)})")
    return FeatureMatrix(np.array(rows))


def write_feature_binary(path, fm: FeatureMatrix):
    """Raw little-endian layout: magic 'SPDX', u32 N, u32 p, N*p float64 row-major."""
    with open(path, "wb") as fh:
        fh.write(SPDX_MAGIC)
        fh.write(struct.pack("<II", fm.n_samples, fm.n_features))
        fh.write(fm.data.astype("<f8").tobytes(order="C"))


def read_feature_binary(path) -> FeatureMatrix:
    blob = Path(path).read_bytes()
    if len(blob) < 12 or blob[:4] != SPDX_MAGIC:
        raise FormatError(f"{path}: missing SPDX magic")
    n, p = struct.unpack("<II", blob[4:12])
    expected = 12 + 8 * n * p
    if len(blob) != expected:
        raise FormatError(f"{path}: expected {expected} bytes for {n}x{p}, got {len(blob)}")
    data = np.frombuffer(blob[12:], dtype="<f8").reshape(n, p)
    return FeatureMatrix(data.copy())


def load_feature_file(path) -> FeatureMatrix:
    """Dispatch on the SPDX magic, falling back to CSV."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic == SPDX_MAGIC:
        return read_feature_binary(path)
    return read_feature_csv(path)


# --- flat vectors (model parameters) -------------------------------------

def write_vector(path, vec: np.ndarray):
    vec = np.asarray(vec, dtype=np.float64).ravel()
    with open(path, "wb") as fh:
        fh.write(SPDX_MAGIC)
        fh.write(struct.pack("<II", 1, vec.size))
        fh.write(vec.astype("<f8").tobytes())


def read_vector(path) -> np.ndarray:
    fm = read_feature_binary(path)
    if fm.n_samples != 1:
        raise FormatError(f"{path}: expected a 1-row vector file")
    return fm.data[0]


# --- PGM masks/images -----------------------------------------------------

def write_pgm(path, grid: np.ndarray):
    """Binary PGM (P5, maxval 255); values in [0,1] map to round(v*255)."""
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 2:
        raise FormatError("PGM grids must be 2-D")
    h, w = grid.shape
    raster = np.clip(np.rint(grid * 255.0), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(raster.tobytes())


def read_pgm(path) -> np.ndarray:
    blob = Path(path).read_bytes()
    if not blob.startswith(b"P5"):
        raise FormatError(f"{path}: not a binary PGM (P5) file")
    fields, pos = [], 2
    while len(fields) < 3:
        while pos < len(blob) and blob[pos:pos + 1].isspace():
            pos += 1
        start = pos
        while pos < len(blob) and not blob[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"{path}: truncated PGM header")
        fields.append(blob[start:pos])
    pos += 1  # single whitespace after maxval
    try:
        w, h, maxval = (int(f) for f in fields)
    except ValueError as exc:
        raise FormatError(f"{path}: bad PGM header") from exc
    if maxval != 255:
        raise FormatError(f"{path}: expected maxval 255, got {maxval}")
    raster = blob[pos:pos + h * w]
    if len(raster) != h * w:
        raise FormatError(f"{path}: expected {h * w} raster bytes, got {len(raster)}")
    return np.frombuffer(raster, dtype=np.uint8).reshape(h, w) / 255.0


# --- reports and models ----------------------------------------------------

def report_to_dict(report: SpectralReport) -> dict:
    return {
        "eigenvalues": [float(v) for v in report.eigenvalues],
        "lambda_plus": report.mp.lambda_plus,
        "lambda_minus": report.mp.lambda_minus,
        "aspect_ratio": report.mp.aspect_ratio,
        "outliers": [[i, v] for i, v in report.outliers],
        "sas": report.sas,
    }


def dump_json(path, obj):
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def save_flow_model(model: VectorFieldModel, params_path, descriptor_path):
    write_vector(params_path, model.params)
    dump_json(descriptor_path, {
        "stencil_radius": model.stencil_radius,
        "hidden_width": model.hidden_width,
        "cond_dim": model.cond_dim,
        "format_version": 1,
    })


def load_flow_model(params_path, descriptor_path) -> VectorFieldModel:
    try:
        desc = json.loads(Path(descriptor_path).read_text())
        return VectorFieldModel(
            read_vector(params_path),
            stencil_radius=int(desc["stencil_radius"]),
            hidden_width=int(desc["hidden_width"]),
            cond_dim=int(desc["cond_dim"]),
        )
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise FormatError(f"bad flow model files: {exc}") from exc


def save_classifier(path, model: ClassifierModel):
    dump_json(path, {
        "w": model.weight,
        "b": model.bias,
        "alpha": model.alpha,
        "gamma": model.gamma,
        "threshold": model.threshold,
    })


def load_classifier(path) -> ClassifierModel:
    try:
        obj = json.loads(Path(path).read_text())
        return ClassifierModel(
            weight=float(obj["w"]),
            bias=float(obj["b"]),
            alpha=float(obj["alpha"]),
            gamma=float(obj["gamma"]),
            threshold=float(obj["threshold"]),
        )
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise FormatError(f"bad classifier file {path}: {exc}") from exc


def write_curve_csv(path, curve):
    lines = [f"{repr(float(x))},{repr(float(y))}" for x, y in curve.points]
    Path(path).write_text("\n".join(lines) + "\n")
