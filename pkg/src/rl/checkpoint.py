"""Binary policy checkpoints: WBC1 header, named float32 tensors, CRC32 trailer"""
import logging
import os
import struct
import zlib
from collections import OrderedDict
from pathlib import Path

import numpy as np
import torch

from src.config import NetworkSpec
from src.errors import ChecksumError, ParamsCorrupt
from src.rl.policy import PARAMS_VERSION, PolicyParams

logger = logging.getLogger(__name__)

MAGIC = b"WBC1"
_HEADER = struct.Struct("<4sII")
_CRC = struct.Struct("<I")


def encode(p: PolicyParams) -> bytes:
    parts = [_HEADER.pack(MAGIC, p.version, len(p.tensors))]
    for name, t in p.tensors.items():
        raw = name.encode("utf-8")
        arr = t.detach().cpu().numpy().astype("<f4")
        parts.append(struct.pack("<H", len(raw)) + raw + struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.tobytes())
    payload = b"".join(parts)
    return payload + _CRC.pack(zlib.crc32(payload))


def decode(blob: bytes) -> tuple[int, "OrderedDict[str, np.ndarray]"]:
    if len(blob) < _HEADER.size + _CRC.size:
        raise ChecksumError(f"checkpoint too short ({len(blob)} bytes)")
    payload, (crc,) = blob[:-_CRC.size], _CRC.unpack(blob[-_CRC.size:])
    if zlib.crc32(payload) != crc:
        raise ChecksumError("checkpoint CRC mismatch")
    magic, version, count = _HEADER.unpack_from(payload, 0)
    if magic != MAGIC:
        raise ParamsCorrupt(f"bad magic {magic!r}")
    if version != PARAMS_VERSION:
        raise ParamsCorrupt(f"unsupported checkpoint version {version} (expected {PARAMS_VERSION})")
    off = _HEADER.size
    arrays: OrderedDict[str, np.ndarray] = OrderedDict()
    try:
        for _ in range(count):
            (n,) = struct.unpack_from("<H", payload, off)
            name = payload[off + 2:off + 2 + n].decode("utf-8")
            off += 2 + n
            (rank,) = struct.unpack_from("<B", payload, off)
            dims = struct.unpack_from(f"<{rank}I", payload, off + 1)
            off += 1 + 4 * rank
            size = int(np.prod(dims, dtype=np.int64))
            arrays[name] = np.frombuffer(payload, dtype="<f4", count=size, offset=off).reshape(dims).copy()
            off += 4 * size
    except (struct.error, ValueError, UnicodeDecodeError) as e:
        raise ParamsCorrupt(f"malformed tensor record: {e}") from e
    if off != len(payload):
        raise ParamsCorrupt(f"{len(payload) - off} trailing bytes after {count} tensors")
    return version, arrays


def save(p: PolicyParams, path: str | Path) -> Path:
    """Atomic write via temp file + rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(encode(p))
    os.replace(tmp, path)
    logger.debug(f"saved checkpoint {path} ({p.numel()} parameters)")
    return path


def load(path: str | Path, spec: NetworkSpec, n_beams: int) -> PolicyParams:
    """Raises ChecksumError on corruption, ParamsCorrupt on version or shape mismatch."""
    try:
        blob = Path(path).read_bytes()
    except FileNotFoundError as e:
        raise ParamsCorrupt(f"checkpoint not found: {path}") from e
    version, arrays = decode(blob)
    p = PolicyParams(OrderedDict((k, torch.from_numpy(v.astype(np.float32))) for k, v in arrays.items()),
                     spec, n_beams, version)
    p.check()
    if not p.all_finite():
        raise ParamsCorrupt(f"non-finite parameters in {path}")
    return p
