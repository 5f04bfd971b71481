"""Shared container format for binary artifacts (banks, checkpoints).

Layout: 4-byte magic, u32 little-endian header length, UTF-8 JSON header,
raw payload bytes. Headers are serialized canonically (sorted keys, no
whitespace) so save(load(x)) is byte-identical.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

from .errors import CheckpointError


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def write_container(path, magic: bytes, header: dict, payload: bytes) -> None:
    if len(magic) != 4:
        raise ValueError("magic must be 4 bytes")
    header_bytes = canonical_json(header).encode()
    with open(path, "wb") as f:
        f.write(magic)
        f.write(struct.pack("<I", len(header_bytes)))
        f.write(header_bytes)
        f.write(payload)


def read_container(path, magic: bytes):
    """Returns (header dict, payload bytes); raises CheckpointError on corruption."""
    data = Path(path).read_bytes()
    if len(data) < 8:
        raise CheckpointError(f"{path}: truncated (no header)")
    if data[:4] != magic:
        raise CheckpointError(f"{path}: bad magic {data[:4]!r}, expected {magic!r}")
    (header_len,) = struct.unpack("<I", data[4:8])
    if len(data) < 8 + header_len:
        raise CheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(data[8:8 + header_len].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"{path}: corrupt header: {e}") from e
    return header, data[8 + header_len:]
