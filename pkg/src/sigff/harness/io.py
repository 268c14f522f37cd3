"""Binary field dumps, CSV outputs and run manifests.

Field dump layout (all little-endian)::

    b"SIGF"  | version u16 | N u32 | flags u32 | [count u32] | heights | [phi]

Flag bit 0 marks an underlying DGFF block after the heights; bit 1 marks a
batch, in which case a replica count follows the flags.  Heights and the
DGFF are row-major float64.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import platform
import struct
from pathlib import Path

import numpy as np

from .. import __version__
from ..errors import LengthError, MagicError, VersionError
from ..fields.dgff import FieldSample
from ..lattice import GridSpec

__all__ = [
    "MAGIC",
    "FORMAT_VERSION",
    "dump_field",
    "load_field",
    "format_value",
    "write_csv",
    "write_manifest",
    "file_digest",
    "REPORT_COLUMNS",
]

MAGIC = b"SIGF"
FORMAT_VERSION = 1
HAS_UNDERLYING = 1
BATCHED = 2
_HEAD = struct.Struct("<4sHII")
_COUNT = struct.Struct("<I")

REPORT_COLUMNS = ("check", "statistic", "se", "ci_lo", "ci_hi", "bound", "verdict")


def dump_field(sample: FieldSample) -> bytes:
    N = sample.spec.N
    flags = (HAS_UNDERLYING if sample.underlying is not None else 0) | (BATCHED if sample.batched else 0)
    parts = [_HEAD.pack(MAGIC, FORMAT_VERSION, N, flags)]
    if sample.batched:
        parts.append(_COUNT.pack(sample.replicas))
    parts.append(np.ascontiguousarray(sample.heights, dtype="<f8").tobytes())
    if sample.underlying is not None:
        parts.append(np.ascontiguousarray(sample.underlying, dtype="<f8").tobytes())
    return b"".join(parts)


def load_field(data: bytes) -> FieldSample:
    """Inverse of :func:`dump_field`; each kind of damage raises its own error."""
    if data[:4] != MAGIC[: len(data[:4])]:
        raise MagicError(f"bad magic {bytes(data[:4])!r}, expected {MAGIC!r}")
    if len(data) < _HEAD.size:
        raise LengthError(_HEAD.size, len(data))
    _, version, N, flags = _HEAD.unpack_from(data)
    if version != FORMAT_VERSION:
        raise VersionError(f"format version {version}, this reader handles {FORMAT_VERSION}")
    offset = _HEAD.size
    count = 1
    if flags & BATCHED:
        if len(data) < offset + _COUNT.size:
            raise LengthError(offset + _COUNT.size, len(data))
        (count,) = _COUNT.unpack_from(data, offset)
        offset += _COUNT.size
    block = count * N * N * 8
    expected = offset + block * (2 if flags & HAS_UNDERLYING else 1)
    if len(data) != expected:
        raise LengthError(expected, len(data))
    shape = (count, N, N) if flags & BATCHED else (N, N)
    heights = np.frombuffer(data, dtype="<f8", count=count * N * N, offset=offset).reshape(shape).copy()
    phi = None
    if flags & HAS_UNDERLYING:
        phi = np.frombuffer(data, dtype="<f8", count=count * N * N, offset=offset + block).reshape(shape).copy()
    return FieldSample(GridSpec(N), heights, phi, "loaded")


def format_value(v) -> str:
    """Shortest round-trip text for numbers; missing values are empty."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "-inf" if v < 0 else "inf"
        return repr(v)
    return str(v)


def write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_value(v) for v in row])
    Path(path).write_text(buf.getvalue())


def file_digest(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(path: Path, config, outputs: dict, failed, extra: dict | None = None) -> dict:
    """Record the config, its hash, the seed, library versions and output digests."""
    import scipy

    doc = {
        "config": config.canonical(),
        "config_hash": config.digest(),
        "seed": config.seed,
        "versions": {
            "sigff": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "outputs": {name: file_digest(p) for name, p in sorted(outputs.items())},
        "failed_replicas": sorted(int(i) for i in failed),
    }
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return doc
