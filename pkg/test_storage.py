"""Tests for the dataset and checkpoint file formats."""
import json
import struct
from dataclasses import replace

import numpy as np
import pytest

from calibnet import AblationFlags, Architecture, CalibModel
from exceptions import ChecksumMismatch, FormatError, StorageError
from storage import (checkpoint_bytes, crc64, dataset_bytes, load_checkpoint, read_dataset, save_checkpoint,
                     write_dataset)

TINY = Architecture.reduced(64, 8, 4)


def test_crc64_check_value():
    assert crc64(b'123456789') == 0x62EC59E3F1A4F00A


# ===== DATASETS =====

def test_dataset_round_trip(tmp_path, make_pairs):
    pairs = make_pairs(5, 64)
    path = write_dataset(tmp_path / 'toy.shkd', pairs)
    loaded = read_dataset(path)
    assert [p.drop_id for p in loaded] == [0, 1, 2, 3, 4]
    assert [p.low for p in loaded] == [p.low for p in pairs]
    assert [p.high for p in loaded] == [p.high for p in pairs]
    assert dataset_bytes(loaded) == path.read_bytes()


def test_dataset_layout(make_pairs):
    blob = dataset_bytes(make_pairs(3, 64))
    assert blob[:4] == b'SHKD'
    magic, version, rate, count, length = struct.unpack_from('<4sIdII', blob)
    assert (version, rate, count, length) == (1, 200_000.0, 3, 64)
    assert len(blob) == 24 + 3 * 2 * 64 * 8 + 8


def test_corrupted_dataset_is_rejected(tmp_path, make_pairs):
    path = write_dataset(tmp_path / 'toy.shkd', make_pairs(2, 64))
    blob = bytearray(path.read_bytes())
    blob[100] ^= 0x01
    path.write_bytes(bytes(blob))
    with pytest.raises(ChecksumMismatch):
        read_dataset(path)


def test_bad_magic_and_truncation(tmp_path, make_pairs):
    blob = dataset_bytes(make_pairs(2, 64))
    bad_magic = tmp_path / 'magic.shkd'
    bad_magic.write_bytes(b'XXXX' + blob[4:])
    with pytest.raises(FormatError):
        read_dataset(bad_magic)
    truncated = tmp_path / 'short.shkd'
    truncated.write_bytes(blob[:-16])
    with pytest.raises(FormatError):
        read_dataset(truncated)


def test_missing_file_is_a_storage_error(tmp_path):
    with pytest.raises(StorageError) as excinfo:
        read_dataset(tmp_path / 'nowhere.shkd')
    assert excinfo.value.exit_code == 3


def test_empty_dataset_cannot_be_written():
    with pytest.raises(FormatError):
        dataset_bytes([])


# ===== CHECKPOINTS =====

def test_checkpoint_round_trip(tmp_path):
    model = CalibModel.build(TINY, seed=4)
    path = save_checkpoint(tmp_path / 'tiny.shkm', model)
    loaded = load_checkpoint(path)
    assert loaded.arch == model.arch
    for name, params in model.param_groups().items():
        np.testing.assert_array_equal(loaded.param_groups()[name].flatten(), params.flatten())
    assert checkpoint_bytes(loaded) == path.read_bytes()


def test_checkpoint_header_records_ablations():
    arch = replace(TINY, flags=AblationFlags.from_ablations(['no-z']))
    blob = checkpoint_bytes(CalibModel.build(arch))
    assert blob[:4] == b'SHKM'
    _, _, header_len = struct.unpack_from('<4sII', blob)
    header = json.loads(blob[12:12 + header_len].decode('utf-8'))
    assert header['flags']['ppn_uses_z'] is False
    assert header['peak_scale'] == 10_000.0
    assert header['layers']['encoder'][0] == [64, 16, 'relu']


def test_autoencoder_checkpoint_round_trip(tmp_path):
    model = CalibModel.build(replace(TINY, with_ppn=False), seed=2)
    loaded = load_checkpoint(save_checkpoint(tmp_path / 'ae.shkm', model))
    assert not loaded.arch.with_ppn
    assert loaded.phi.size == 0


def test_corrupted_checkpoint_is_rejected(tmp_path):
    path = save_checkpoint(tmp_path / 'tiny.shkm', CalibModel.build(TINY, seed=4))
    blob = bytearray(path.read_bytes())
    blob[-20] ^= 0xFF
    path.write_bytes(bytes(blob))
    with pytest.raises(ChecksumMismatch):
        load_checkpoint(path)


def test_checkpoint_size_must_match_architecture(tmp_path):
    path = tmp_path / 'tiny.shkm'
    path.write_bytes(checkpoint_bytes(CalibModel.build(TINY))[:-24] + b'\0' * 8)
    with pytest.raises(FormatError):
        load_checkpoint(path)
