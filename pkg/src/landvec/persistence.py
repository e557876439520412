"""Byte-level readers and writers for models, datasets and archives.

All binary layouts are little-endian.  Weights and landscape values are
stored as 32-bit floats; computation happens in 64 bit.

Model (``D2V1``)::

    b"D2V1"
    u32 kind (0 = ae, 1 = vae), u32 n, u32 ls, u32 layer_count
    layer_count x (u32 in_dim, u32 out_dim, u32 activation)
    per layer: W (out x in, row-major f32), b (out f32)
    u32 metadata_length, metadata (UTF-8 JSON)

Dataset (``D2VD`` version 1)::

    b"D2VD", u32 version, u32 n, u32 d, u64 count, count x n f32

Writes go to a temporary file in the target directory followed by an
atomic rename.
"""

from __future__ import annotations

import json
import math
import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CorruptionError, DataError, FormatError, UnsupportedVersionError
from .neuralnet import ACTIVATIONS, DenseLayer
from .randfunc import read_suite, write_suite  # noqa: F401  (re-exported)
from .vae import KINDS, ModelWeights

MODEL_MAGIC = b"D2V1"
DATASET_MAGIC = b"D2VD"
DATASET_VERSION = 1
ARCHIVE_HEADER = "D2V-ARCHIVE 1"

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK = (1 << 64) - 1


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * FNV_PRIME) & _MASK
    return h


@dataclass(frozen=True)
class FileFingerprint:
    value: int
    format: str
    version: int = 1

    def __str__(self) -> str:
        return f"{self.value:016x}"


def _atomic_write(path, payload: bytes) -> None:
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=directory)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- models ------------------------------------------------------------------

def _model_body(model: ModelWeights) -> bytes:
    layers = model.layers
    parts = [
        MODEL_MAGIC,
        struct.pack("<4I", KINDS.index(model.kind), model.n, model.ls, len(layers)),
    ]
    for layer in layers:
        parts.append(struct.pack("<3I", layer.in_dim, layer.out_dim, ACTIVATIONS.index(layer.activation)))
    for layer in layers:
        parts.append(np.ascontiguousarray(layer.W, dtype="<f4").tobytes())
        parts.append(np.ascontiguousarray(layer.b, dtype="<f4").tobytes())
    return b"".join(parts)


def model_fingerprint(model: ModelWeights) -> str:
    """Hash of dimensions and 32-bit weights; independent of metadata."""
    return str(FileFingerprint(fnv1a64(_model_body(model)), "D2V1"))


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def model_to_bytes(model: ModelWeights) -> bytes:
    meta = dict(model.metadata)
    meta.setdefault("beta", model.beta)
    text = json.dumps(_json_safe(meta), sort_keys=True, separators=(",", ":")).encode("utf-8")
    return _model_body(model) + struct.pack("<I", len(text)) + text


def write_model(model: ModelWeights, path) -> None:
    _atomic_write(path, model_to_bytes(model))


class _Reader:
    def __init__(self, data: bytes, what: str):
        self.data = data
        self.pos = 0
        self.what = what

    def take(self, size: int) -> bytes:
        if self.pos + size > len(self.data):
            raise CorruptionError(f"{self.what}: truncated at byte {len(self.data)}")
        out = self.data[self.pos:self.pos + size]
        self.pos += size
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def _check_magic(magic: bytes, expected: bytes, what: str) -> None:
    if magic == expected:
        return
    if len(magic) == 4 and magic[:3] == expected[:3] and magic[3:].isdigit():
        raise UnsupportedVersionError(f"{what}: version {magic[3:].decode()} not supported")
    raise FormatError(f"{what}: unknown magic {magic!r}")


def model_from_bytes(data: bytes, what: str = "model") -> ModelWeights:
    r = _Reader(data, what)
    _check_magic(r.take(4), MODEL_MAGIC, what)
    kind_id, n, ls, count = r.unpack("<4I")
    if kind_id >= len(KINDS):
        raise FormatError(f"{what}: unknown model kind {kind_id}")
    kind = KINDS[kind_id]
    expected_count = 7 if kind == "vae" else 6
    if count != expected_count:
        raise FormatError(f"{what}: {kind} needs {expected_count} layers, header says {count}")
    dims = [r.unpack("<3I") for _ in range(count)]
    layers = []
    for in_dim, out_dim, act in dims:
        if act >= len(ACTIVATIONS):
            raise FormatError(f"{what}: unknown activation code {act}")
        W = np.frombuffer(r.take(4 * in_dim * out_dim), dtype="<f4").reshape(out_dim, in_dim)
        b = np.frombuffer(r.take(4 * out_dim), dtype="<f4")
        layers.append(DenseLayer(W.astype(np.float64), b.astype(np.float64), ACTIVATIONS[act]))
    (meta_len,) = r.unpack("<I")
    try:
        meta = json.loads(r.take(meta_len).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptionError(f"{what}: unreadable metadata ({exc})") from None
    if r.pos != len(data):
        raise CorruptionError(f"{what}: {len(data) - r.pos} trailing bytes")
    if kind == "vae":
        encoder, mu_head, logvar_head, decoder = layers[:2], layers[2], layers[3], layers[4:]
    else:
        encoder, mu_head, logvar_head, decoder = layers[:2], layers[2], None, layers[3:]
    expected = [(n, n // 2), (n // 2, n // 4), (n // 4, ls)]
    expected += [(n // 4, ls)] if kind == "vae" else []
    expected += [(ls, n // 4), (n // 4, n // 2), (n // 2, n)]
    if [(a, b) for a, b, _ in dims] != expected:
        raise FormatError(f"{what}: layer dimensions do not match the n={n}, ls={ls} pyramid")
    return ModelWeights(
        kind, n, ls, encoder, mu_head, logvar_head, decoder,
        beta=float(meta.get("beta") or 0.0), metadata=meta,
    )


def read_model(path) -> ModelWeights:
    return model_from_bytes(Path(path).read_bytes(), str(path))


# -- datasets ----------------------------------------------------------------

@dataclass
class Dataset:
    values: np.ndarray  # count x n, float64 (exactly representable in float32)
    d: int

    @property
    def n(self) -> int:
        return self.values.shape[1]

    def __len__(self) -> int:
        return self.values.shape[0]


def dataset_to_bytes(values, d: int) -> bytes:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise DataError("dataset must be a 2-d array (records x n)")
    count, n = arr.shape
    header = DATASET_MAGIC + struct.pack("<3IQ", DATASET_VERSION, n, d, count)
    return header + np.ascontiguousarray(arr, dtype="<f4").tobytes()


def write_dataset(path, values, d: int) -> None:
    _atomic_write(path, dataset_to_bytes(values, d))


def dataset_from_bytes(data: bytes, what: str = "dataset") -> Dataset:
    r = _Reader(data, what)
    magic = r.take(4)
    if magic != DATASET_MAGIC:
        raise FormatError(f"{what}: unknown magic {magic!r}")
    version, n, d, count = r.unpack("<3IQ")
    if version != DATASET_VERSION:
        raise UnsupportedVersionError(f"{what}: version {version} not supported")
    size = 4 * n * count
    remaining = len(data) - r.pos
    if remaining != size:
        raise CorruptionError(
            f"{what}: header promises {count} records of {n} values, "
            f"found {remaining} bytes instead of {size}"
        )
    vals = np.frombuffer(r.take(size), dtype="<f4").reshape(count, n).astype(np.float64)
    return Dataset(vals, d)


def read_dataset(path) -> Dataset:
    return dataset_from_bytes(Path(path).read_bytes(), str(path))


def dataset_fingerprint(values, d: int) -> str:
    return str(FileFingerprint(fnv1a64(dataset_to_bytes(values, d)), "D2VD"))


# -- archives ----------------------------------------------------------------

def write_archive(archive, path) -> None:
    lines = [
        ARCHIVE_HEADER,
        archive.fingerprint,
        f"{archive.m} {archive.d} {archive.lower:.17g} {archive.upper:.17g}",
    ]
    for text, z in zip(archive.expressions, archive.latents):
        lines.append(text + "\t" + " ".join(f"{v:.9g}" for v in z))
    _atomic_write(path, ("\n".join(lines) + "\n").encode("utf-8"))


def read_archive(path):
    from .retrieval import FunctionArchive

    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines or lines[0].strip() != ARCHIVE_HEADER:
        raise FormatError(f"{path}: missing '{ARCHIVE_HEADER}' header")
    if len(lines) < 3:
        raise CorruptionError(f"{path}: truncated archive header")
    fingerprint = lines[1].strip()
    try:
        m_s, d_s, lo_s, hi_s = lines[2].split()
        m, d, lower, upper = int(m_s), int(d_s), float(lo_s), float(hi_s)
    except ValueError:
        raise FormatError(f"{path}: malformed design descriptor {lines[2]!r}") from None
    exprs, latents = [], []
    for lineno, line in enumerate(lines[3:], start=4):
        if not line.strip():
            continue
        if "\t" not in line:
            raise CorruptionError(f"{path}:{lineno}: missing tab separator")
        expr, zs = line.split("\t", 1)
        try:
            latents.append([float(v) for v in zs.split()])
        except ValueError:
            raise CorruptionError(f"{path}:{lineno}: malformed latent values") from None
        exprs.append(expr)
    widths = {len(z) for z in latents}
    if len(widths) > 1:
        raise CorruptionError(f"{path}: latent vectors of differing lengths {sorted(widths)}")
    width = widths.pop() if widths else 0
    # latents are float32 values written with 9 significant digits
    arr = np.array(latents, dtype=np.float32).astype(np.float64).reshape(len(latents), width)
    return FunctionArchive(fingerprint, exprs, arr, m, d, lower, upper)
