"""Model storage: a text architecture descriptor plus a binary weights blob.

A saved model is a directory holding ``model.txt`` and ``weights.gmw``.

Descriptor (UTF-8, one directive per line)::

    groupaffect-model 1
    input 64 64 3
    classes 3
    layer conv out_channels=32 kernel=3 stride=1 padding=1
    layer relu
    ...

Weights blob, all little-endian: magic ``GMW1``, ``uint32`` tensor count, then
per tensor ``uint32`` name length, UTF-8 name (``"<layer>.W"`` / ``"<layer>.b"``),
``uint32`` rank, ``rank`` x ``uint32`` extents, and ``prod(extents)`` float32
values in row-major order.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import ModelFormatError, ModelShapeError, ModelVersionError, ShapeError
from .model import LayerSpec, ModelSpec, param_shapes

FORMAT_NAME = "groupaffect-model"
FORMAT_VERSION = 1
MAGIC = b"GMW1"
DESCRIPTOR = "model.txt"
WEIGHTS = "weights.gmw"

_INT_FIELDS = ("out_channels", "kernel", "stride", "padding", "out_neurons")


def describe(spec: ModelSpec) -> str:
    lines = [f"{FORMAT_NAME} {FORMAT_VERSION}",
             "input " + " ".join(str(d) for d in spec.input_shape),
             f"classes {spec.num_classes}"]
    lines += ["layer " + layer.describe() for layer in spec.layers]
    return "\n".join(lines) + "\n"


def parse_descriptor(text: str) -> ModelSpec:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise ModelFormatError("empty model descriptor")
    head = lines[0].split()
    if len(head) != 2 or head[0] != FORMAT_NAME:
        raise ModelFormatError(f"not a model descriptor: first line {lines[0]!r}")
    try:
        version = int(head[1])
    except ValueError:
        raise ModelFormatError(f"bad version field {head[1]!r}") from None
    if version != FORMAT_VERSION:
        raise ModelVersionError(f"descriptor version {version}, this build reads {FORMAT_VERSION}")

    input_shape, num_classes, layers = None, None, []
    for ln in lines[1:]:
        key, *rest = ln.split()
        try:
            if key == "input":
                input_shape = tuple(int(v) for v in rest)
            elif key == "classes":
                num_classes = int(rest[0])
            elif key == "layer":
                layers.append(_parse_layer(rest))
            else:
                raise ModelFormatError(f"unknown directive {key!r}")
        except (ValueError, IndexError) as exc:
            raise ModelFormatError(f"cannot parse line {ln!r}: {exc}") from None
    if input_shape is None or num_classes is None or not layers:
        raise ModelFormatError("descriptor lacks input, classes or layers")
    try:
        return ModelSpec(tuple(layers), input_shape=input_shape, num_classes=num_classes)
    except ShapeError as exc:
        raise ModelShapeError(f"inconsistent architecture: {exc}") from None
    except ValueError as exc:
        raise ModelFormatError(f"invalid architecture: {exc}") from None


def _parse_layer(tokens):
    kind, *kvs = tokens
    kwargs = {}
    for kv in kvs:
        k, _, v = kv.partition("=")
        if k in _INT_FIELDS:
            kwargs[k] = int(v)
        elif k == "rate":
            kwargs[k] = float(v)
        else:
            raise ValueError(f"unknown layer field {k!r}")
    if kind == "maxpool":
        kwargs.setdefault("padding", 0)
    return LayerSpec(kind, **kwargs)


def write_weights(params) -> bytes:
    tensors = []
    for i in sorted(params):
        for name in ("W", "b"):
            tensors.append((f"{i}.{name}", params[i][name]))
    out = [MAGIC, struct.pack("<I", len(tensors))]
    for name, arr in tensors:
        raw = name.encode("utf-8")
        arr = np.ascontiguousarray(arr, dtype="<f4")
        out.append(struct.pack("<I", len(raw)) + raw)
        out.append(struct.pack("<I", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape))
        out.append(arr.tobytes())
    return b"".join(out)


def read_weights(blob: bytes):
    if blob[:4] != MAGIC:
        raise ModelFormatError("weights blob does not start with GMW1")
    pos = 4

    def take(n):
        nonlocal pos
        if pos + n > len(blob):
            raise ModelShapeError(f"weights blob truncated at byte {pos} (needed {n} more bytes)")
        chunk = blob[pos:pos + n]
        pos += n
        return chunk

    (count,) = struct.unpack("<I", take(4))
    tensors = {}
    for _ in range(count):
        (nlen,) = struct.unpack("<I", take(4))
        try:
            name = take(nlen).decode("utf-8")
        except UnicodeDecodeError:
            raise ModelFormatError("tensor name is not UTF-8") from None
        (rank,) = struct.unpack("<I", take(4))
        shape = struct.unpack(f"<{rank}I", take(4 * rank))
        size = int(np.prod(shape)) if rank else 1
        data = np.frombuffer(take(4 * size), dtype="<f4").reshape(shape).astype(np.float32)
        tensors[name] = data
    if pos != len(blob):
        raise ModelShapeError(f"{len(blob) - pos} trailing bytes after the last tensor")
    return tensors


def save_model(spec: ModelSpec, params, path):
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    (path / DESCRIPTOR).write_text(describe(spec), encoding="utf-8")
    (path / WEIGHTS).write_bytes(write_weights(params))


def load_model(path):
    """Return ``(spec, params)`` from a model directory, validating every tensor shape."""
    path = Path(path)
    try:
        text = (path / DESCRIPTOR).read_text(encoding="utf-8")
        blob = (path / WEIGHTS).read_bytes()
    except OSError as exc:
        raise ModelFormatError(f"cannot read model at {path}: {exc}") from None
    except UnicodeDecodeError:
        raise ModelFormatError(f"{path / DESCRIPTOR} is not UTF-8") from None
    spec = parse_descriptor(text)
    tensors = read_weights(blob)
    expected = param_shapes(spec)
    names = {f"{i}.{n}" for i, shp in expected.items() for n in shp}
    if set(tensors) != names:
        raise ModelShapeError(f"weights hold {sorted(tensors)}, descriptor implies {sorted(names)}")
    params = {}
    for i, shp in expected.items():
        params[i] = {}
        for n, s in shp.items():
            arr = tensors[f"{i}.{n}"]
            if arr.shape != tuple(s):
                raise ModelShapeError(f"tensor {i}.{n} has shape {arr.shape}, descriptor implies {tuple(s)}")
            params[i][n] = arr
    return spec, params
