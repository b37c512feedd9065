"""File format codecs: binary PGM masks, OPM1 dense maps, CSV/JSON reports.

OPM1 layout: 4-byte magic ``OPM1``, 1-byte kind flag (0 = probabilities,
1 = logits / raw reals), three little-endian uint32 (K, H, W), then
K*H*W little-endian float64 values in k-major, row-major order.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError
from .maps import SegmentationMask

OPM1_MAGIC = b"OPM1"
KIND_PROBS = 0
KIND_LOGITS = 1


def write_opm1(path, values: np.ndarray, kind: int) -> None:
    arr = np.ascontiguousarray(values, dtype=np.float64)
    if arr.ndim != 3:
        raise FormatError(f"OPM1 payload must be 3-D, got shape {arr.shape}")
    if kind not in (KIND_PROBS, KIND_LOGITS):
        raise FormatError(f"unknown OPM1 kind flag {kind}")
    k, h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(OPM1_MAGIC)
        fh.write(bytes([kind]))
        fh.write(struct.pack("<III", k, h, w))
        fh.write(arr.astype("<f8").tobytes())


def read_opm1(path) -> tuple[np.ndarray, int]:
    """Returns (values, kind)."""
    data = Path(path).read_bytes()
    if len(data) < 4 or data[:4] != OPM1_MAGIC:
        raise FormatError(f"{path}: bad magic at offset 0, expected {OPM1_MAGIC!r}")
    if len(data) < 17:
        raise FormatError(f"{path}: truncated header, {len(data)} bytes < 17")
    kind = data[4]
    if kind not in (KIND_PROBS, KIND_LOGITS):
        raise FormatError(f"{path}: unknown kind flag {kind} at offset 4")
    k, h, w = struct.unpack_from("<III", data, 5)
    if k < 1 or h < 1 or w < 1 or k * h * w > 2**31:
        raise FormatError(f"{path}: bad dimensions K={k} H={h} W={w} at offset 5")
    expected = 17 + 8 * k * h * w
    if len(data) != expected:
        raise FormatError(
            f"{path}: payload length mismatch at offset 17, "
            f"expected {expected} bytes total, got {len(data)}"
        )
    values = np.frombuffer(data, dtype="<f8", offset=17).reshape(k, h, w)
    return values.astype(np.float64), kind


def write_pgm(path, mask: SegmentationMask) -> None:
    if mask.num_classes > 256 or int(mask.labels.max()) > 255:
        raise FormatError("PGM export supports at most 256 classes")
    header = f"P5\n{mask.width} {mask.height}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(mask.labels.astype(np.uint8).tobytes())


def read_pgm(path, num_classes: int | None = None) -> SegmentationMask:
    data = Path(path).read_bytes()
    if data[:2] != b"P5":
        raise FormatError(f"{path}: bad magic at offset 0, expected P5")
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"{path}: truncated header at offset {pos}")
        fields.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    try:
        width, height, maxval = (int(f) for f in fields)
    except ValueError:
        raise FormatError(f"{path}: non-numeric header field") from None
    if maxval != 255:
        raise FormatError(f"{path}: maxval must be 255, got {maxval}")
    expected = width * height
    payload = data[pos:]
    if len(payload) != expected:
        raise FormatError(
            f"{path}: payload length mismatch at offset {pos}, "
            f"expected {expected} bytes, got {len(payload)}"
        )
    labels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width).astype(np.int64)
    if num_classes is None:
        num_classes = int(labels.max()) + 1
    return SegmentationMask(labels, num_classes)


def format_float(x: float) -> str:
    """Six significant digits, '.' decimal separator."""
    return format(float(x), ".6g")


def write_csv(path, header: list[str], rows: list[list]) -> None:
    """LF line endings, header row, 6 significant digits for floats."""
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for cell in row:
            if isinstance(cell, float):
                cells.append(format_float(cell))
            else:
                cells.append(str(cell))
        lines.append(",".join(cells))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
