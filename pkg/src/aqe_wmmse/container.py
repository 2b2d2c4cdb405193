# Copyright 2025 The aqe-wmmse Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Binary container shared by datasets and checkpoints.

Layout (little-endian)::

    magic      8 bytes  b"AQEWMMSE"
    version    u32
    kind       u32      1 = dataset, 2 = checkpoint
    meta_len   u32
    meta       meta_len bytes of UTF-8 JSON
    payload    meta["payload_bytes"] bytes
"""

import json
import logging
import os
import pathlib
import struct
from enum import IntEnum
from typing import Any

from .errors import FormatError

logger = logging.getLogger(__name__)

MAGIC = b"AQEWMMSE"
VERSION = 1
_HEADER = struct.Struct("<8sII")
_META_LEN = struct.Struct("<I")


class ContainerKind(IntEnum):
    DATASET = 1
    CHECKPOINT = 2


def partial_path(path: pathlib.Path) -> pathlib.Path:
    return path.with_name(path.name + ".partial")


def write_container(
    path: str | os.PathLike[str],
    kind: ContainerKind,
    meta: dict[str, Any],
    payload: bytes,
) -> pathlib.Path:
    """Write a container atomically through a ``.partial`` sibling file."""
    target = pathlib.Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    meta = {**meta, "payload_bytes": len(payload)}
    meta_bytes = json.dumps(meta, sort_keys=True).encode("utf-8")

    tmp = partial_path(target)
    with open(tmp, "wb") as f:
        f.write(_HEADER.pack(MAGIC, VERSION, int(kind)))
        f.write(_META_LEN.pack(len(meta_bytes)))
        f.write(meta_bytes)
        f.write(payload)
    os.replace(tmp, target)
    logger.debug(f"Wrote {kind.name.lower()} container {target} ({len(payload)} bytes)")
    return target


def read_container(
    path: str | os.PathLike[str], kind: ContainerKind
) -> tuple[dict[str, Any], bytes]:
    """Read and validate a container, returning ``(meta, payload)``."""
    source = pathlib.Path(path)
    data = source.read_bytes()

    if len(data) < _HEADER.size + _META_LEN.size:
        raise FormatError(f"{source}: truncated header")
    magic, version, found_kind = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise FormatError(f"{source}: bad magic bytes {magic!r}")
    if version != VERSION:
        raise FormatError(f"{source}: unsupported version {version}")
    if found_kind != int(kind):
        raise FormatError(
            f"{source}: expected a {kind.name.lower()} container, found kind {found_kind}"
        )

    (meta_len,) = _META_LEN.unpack_from(data, _HEADER.size)
    start = _HEADER.size + _META_LEN.size
    if len(data) < start + meta_len:
        raise FormatError(f"{source}: truncated metadata")
    try:
        meta = json.loads(data[start : start + meta_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise FormatError(f"{source}: corrupt metadata: {err}") from err

    payload = data[start + meta_len :]
    expected = meta.get("payload_bytes")
    if expected is None or len(payload) != expected:
        raise FormatError(
            f"{source}: payload has {len(payload)} bytes, header declares {expected}"
        )
    return meta, payload
