"""
Little-endian binary tensor container and multi-tensor archives

Container layout::

    b'NDG1' | dtype code (u8: 1=float32, 2=float64) | rank (u8) | rank x extent (u32) | raw data

An archive is a concatenation of containers plus ``<path>.manifest.json``
naming every tensor with its shape and byte offset.
"""

import json
import logging
import os
import struct
from typing import Any, Dict, Optional, Tuple

import numpy as np

from ..utils.errors import StorageError

logger = logging.getLogger(__name__)

MAGIC = b'NDG1'
ARCHIVE_VERSION = 1
DTYPE_CODES = {1: np.dtype('<f4'), 2: np.dtype('<f8')}
CODE_FOR_DTYPE = {np.dtype('float32'): 1, np.dtype('float64'): 2}


def encode_tensor(array: np.ndarray, dtype: str = 'float64') -> bytes:
    """Serialize one array into the container format"""
    dt = np.dtype(dtype)
    if dt not in CODE_FOR_DTYPE:
        raise StorageError(f"unsupported storage dtype {dtype}", dtype=dtype)
    array = np.asarray(array)
    if array.ndim > 255:
        raise StorageError("rank exceeds container limit", rank=array.ndim)
    header = MAGIC + struct.pack('<BB', CODE_FOR_DTYPE[dt], array.ndim)
    header += struct.pack(f'<{array.ndim}I', *array.shape)
    return header + np.ascontiguousarray(array, dtype=dt.newbyteorder('<')).tobytes()


def decode_tensor(buffer: bytes, offset: int = 0) -> Tuple[np.ndarray, int]:
    """Parse one container starting at ``offset``; returns the array and the end offset"""
    if buffer[offset:offset + 4] != MAGIC:
        raise StorageError("bad magic string", offset=offset)
    if len(buffer) < offset + 6:
        raise StorageError("truncated header", offset=offset)
    code, rank = struct.unpack_from('<BB', buffer, offset + 4)
    if code not in DTYPE_CODES:
        raise StorageError(f"unknown dtype code {code}", offset=offset)
    pos = offset + 6
    if len(buffer) < pos + 4 * rank:
        raise StorageError("truncated extents", offset=offset)
    shape = struct.unpack_from(f'<{rank}I', buffer, pos)
    pos += 4 * rank
    dt = DTYPE_CODES[code]
    nbytes = int(np.prod(shape, dtype=np.int64)) * dt.itemsize
    if len(buffer) < pos + nbytes:
        raise StorageError("truncated tensor data", offset=offset,
                           expected=nbytes, available=len(buffer) - pos)
    data = np.frombuffer(buffer, dtype=dt, count=nbytes // dt.itemsize, offset=pos)
    return data.reshape(shape).astype(np.float64), pos + nbytes


def save_tensor(path: str, array: np.ndarray, dtype: str = 'float64') -> str:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'wb') as fh:
        fh.write(encode_tensor(array, dtype))
    return path


def load_tensor(path: str) -> np.ndarray:
    try:
        with open(path, 'rb') as fh:
            buffer = fh.read()
    except OSError as e:
        raise StorageError(f"cannot read tensor file: {e}", path=path) from e
    array, end = decode_tensor(buffer)
    if end != len(buffer):
        raise StorageError("trailing bytes after tensor", path=path)
    return array


def manifest_path(path: str) -> str:
    return f"{path}.manifest.json"


def save_archive(path: str, tensors: Dict[str, np.ndarray], meta: Optional[Dict[str, Any]] = None,
                 dtype: str = 'float64') -> str:
    """Write named tensors to ``path`` and their layer manifest next to it"""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)

    entries = []
    offset = 0
    with open(path, 'wb') as fh:
        for name, array in tensors.items():
            blob = encode_tensor(array, dtype)
            fh.write(blob)
            entries.append({
                'name': name,
                'shape': list(np.shape(array)),
                'offset': offset,
                'length': len(blob),
            })
            offset += len(blob)

    manifest = {
        'version': ARCHIVE_VERSION,
        'dtype': dtype,
        'size': offset,
        'tensors': entries,
        'meta': meta or {},
    }
    with open(manifest_path(path), 'w', encoding='utf-8') as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)

    logger.debug(f"Saved archive {path} ({len(entries)} tensors, {offset} bytes)")
    return path


def load_archive(path: str) -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
    """Read an archive written by ``save_archive``; returns tensors and meta"""
    try:
        with open(manifest_path(path), 'r', encoding='utf-8') as fh:
            manifest = json.load(fh)
        with open(path, 'rb') as fh:
            buffer = fh.read()
    except OSError as e:
        raise StorageError(f"cannot read archive: {e}", path=path) from e
    except json.JSONDecodeError as e:
        raise StorageError(f"malformed archive manifest: {e}", path=path) from e

    if manifest.get('version') != ARCHIVE_VERSION:
        raise StorageError("archive version mismatch", path=path,
                           expected=ARCHIVE_VERSION, found=manifest.get('version'))
    if len(buffer) != manifest.get('size'):
        raise StorageError("archive size does not match manifest", path=path,
                           expected=manifest.get('size'), found=len(buffer))

    tensors = {}
    for entry in manifest.get('tensors', []):
        array, end = decode_tensor(buffer, entry['offset'])
        if end - entry['offset'] != entry['length'] or list(array.shape) != entry['shape']:
            raise StorageError("manifest and tensor data disagree", path=path, tensor=entry['name'],
                               manifest_shape=entry['shape'], stored_shape=list(array.shape))
        tensors[entry['name']] = array
    return tensors, manifest.get('meta', {})
