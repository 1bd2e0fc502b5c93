"""
Binary file formats for datasets and model checkpoints.

Both formats are little-endian: a 4-byte magic, a u32 format version, a
format-specific header, a float64 payload and a trailing CRC-64/WE of the
payload bytes.

Dataset (SHKD):   magic | version u32 | sample_rate f64 | pair_count u32 |
                  signal_length u32 | pairs (low then high) | crc64
Checkpoint (SHKM): magic | version u32 | header_len u32 | UTF-8 JSON header |
                   parameters in checkpoint order | crc64
"""
import json
import logging
import struct
from pathlib import Path

import crcmod.predefined
import numpy as np

from calibnet import Architecture, CalibModel
from exceptions import ChecksumMismatch, FormatError, StorageError
from models import ShockSignal, SignalPair

logger = logging.getLogger(__name__)

DATASET_MAGIC = b'SHKD'
CHECKPOINT_MAGIC = b'SHKM'
FORMAT_VERSION = 1

_DATASET_HEADER = struct.Struct('<4sIdII')
_CHECKPOINT_HEADER = struct.Struct('<4sII')
_CRC = struct.Struct('<Q')
_F64 = np.dtype('<f8')

crc64 = crcmod.predefined.mkPredefinedCrcFun('crc-64-we')


def _write_bytes(path, data):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
    except OSError as e:
        raise StorageError(f'cannot write {path}: {e}') from e
    return path


def _read_bytes(path):
    path = Path(path)
    try:
        return path.read_bytes()
    except OSError as e:
        raise StorageError(f'cannot read {path}: {e}') from e


def _verified_payload(blob, start, path):
    """Return the payload between start and the trailing checksum, verifying it."""
    if len(blob) < start + _CRC.size:
        raise FormatError(f'{path}: file truncated')
    payload = blob[start:-_CRC.size]
    (stored,) = _CRC.unpack(blob[-_CRC.size:])
    if crc64(payload) != stored:
        raise ChecksumMismatch(f'{path}: payload checksum does not match')
    return payload


def _check_magic(magic, version, expected, path):
    if magic != expected:
        raise FormatError(f'{path}: bad magic {magic!r}, expected {expected!r}')
    if version != FORMAT_VERSION:
        raise FormatError(f'{path}: unsupported format version {version}')


# ============================================================================
# DATASETS
# ============================================================================

def dataset_bytes(pairs):
    """Serialize pairs (equal lengths and sample rates) to SHKD bytes."""
    pairs = list(pairs)
    if not pairs:
        raise FormatError('cannot write an empty dataset')
    length = len(pairs[0].low)
    rate = pairs[0].low.sample_rate
    if any(len(p.low) != length or p.low.sample_rate != rate for p in pairs):
        raise FormatError('all pairs in a dataset file must share length and sample rate')

    payload = np.stack([np.stack([p.low.samples, p.high.samples]) for p in pairs]).astype(_F64).tobytes()
    header = _DATASET_HEADER.pack(DATASET_MAGIC, FORMAT_VERSION, rate, len(pairs), length)
    return header + payload + _CRC.pack(crc64(payload))


def write_dataset(path, pairs):
    """
    Write a dataset file.

    Args:
        path: Destination path
        pairs: Sequence of SignalPair

    Returns:
        Path written
    """
    path = _write_bytes(path, dataset_bytes(pairs))
    logger.info('Wrote %s', path)
    return path


def read_dataset(path):
    """
    Read a dataset file; drop ids are assigned 0..n-1 in file order.

    Raises:
        ChecksumMismatch: payload corrupted
        FormatError: wrong magic, version or size
    """
    blob = _read_bytes(path)
    if len(blob) < _DATASET_HEADER.size:
        raise FormatError(f'{path}: file truncated')
    magic, version, rate, count, length = _DATASET_HEADER.unpack_from(blob)
    _check_magic(magic, version, DATASET_MAGIC, path)

    expected = count * 2 * length * _F64.itemsize
    if len(blob) != _DATASET_HEADER.size + expected + _CRC.size:
        raise FormatError(f'{path}: payload size does not match {count} pairs of {length} samples')
    payload = _verified_payload(blob, _DATASET_HEADER.size, path)

    data = np.frombuffer(payload, dtype=_F64).reshape(count, 2, length)
    return [SignalPair(ShockSignal(d[0], rate), ShockSignal(d[1], rate), drop_id=i) for i, d in enumerate(data)]


# ============================================================================
# CHECKPOINTS
# ============================================================================

def checkpoint_bytes(model):
    """Serialize a model (architecture header + parameters) to SHKM bytes."""
    header = json.dumps(model.arch.to_dict(), sort_keys=True).encode('utf-8')
    vectors = [params.flatten() for params in model.param_groups().values()]
    payload = np.concatenate(vectors).astype(_F64).tobytes()
    return (_CHECKPOINT_HEADER.pack(CHECKPOINT_MAGIC, FORMAT_VERSION, len(header))
            + header + payload + _CRC.pack(crc64(payload)))


def save_checkpoint(path, model):
    """Write a checkpoint file."""
    path = _write_bytes(path, checkpoint_bytes(model))
    logger.info('Saved checkpoint %s (%d parameters)', path, model.size)
    return path


def load_checkpoint(path):
    """
    Load a checkpoint file.

    Returns:
        CalibModel bit-identical to the one saved
    """
    blob = _read_bytes(path)
    if len(blob) < _CHECKPOINT_HEADER.size:
        raise FormatError(f'{path}: file truncated')
    magic, version, header_len = _CHECKPOINT_HEADER.unpack_from(blob)
    _check_magic(magic, version, CHECKPOINT_MAGIC, path)

    start = _CHECKPOINT_HEADER.size + header_len
    try:
        arch = Architecture.from_dict(json.loads(blob[_CHECKPOINT_HEADER.size:start].decode('utf-8')))
    except (ValueError, TypeError) as e:
        raise FormatError(f'{path}: unreadable architecture header: {e}') from e

    model = CalibModel.build(arch)
    groups = list(model.param_groups().values())
    expected = sum(params.size for params in groups) * _F64.itemsize
    if len(blob) != start + expected + _CRC.size:
        raise FormatError(f'{path}: parameter payload does not match the architecture')
    payload = _verified_payload(blob, start, path)

    flat = np.frombuffer(payload, dtype=_F64).astype(np.float64)
    offset = 0
    for params in groups:
        params.assign(flat[offset:offset + params.size])
        offset += params.size
    return model
