# Copyright 2026 The pyh2iad Authors. All rights reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
# http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""
Checkpoint container: a magic header, the length of a JSON manifest, the manifest and
the raw little-endian float32 payload of every parameter in manifest order.

The manifest lists name, shape, dtype, byte offset and byte length of each parameter,
the full training configuration, its shape fingerprint, the loss histories and the
SHA-256 of the payload. Nothing time dependent is stored, so equal models give equal
files.
"""


from __future__ import absolute_import, division, print_function

import hashlib
import json
import logging
import struct

import numpy as np
import torch

from h2iad.config import config_fingerprint
from h2iad.exceptions import CheckpointError
from h2iad.train import TrainConfig, TrainedModel, build_detector

logger = logging.getLogger(__name__)

MAGIC = b'H2IADCK1'
FORMAT_VERSION = 1
_LENGTH = struct.Struct('<Q')
MANIFEST_KEYS = ('format', 'config', 'fingerprint', 'loss_history', 'val_history',
                 'final_nll', 'tensors', 'payload_bytes', 'payload_sha256')
ENTRY_KEYS = ('name', 'shape', 'dtype', 'offset', 'nbytes')


def _parameters(detector):
    return list(detector.named_parameters())


def _is_count(value):
    return isinstance(value, int) and not isinstance(value, bool) and value >= 0


def _check_manifest(manifest):
    """Raises `CheckpointError` unless `manifest` has every key and entry field."""
    if not isinstance(manifest, dict):
        raise CheckpointError('Checkpoint manifest is not a JSON object.')
    missing = [key for key in MANIFEST_KEYS if key not in manifest]
    if missing:
        raise CheckpointError('Checkpoint manifest lacks {}.'.format(', '.join(missing)))
    if not isinstance(manifest['config'], dict):
        raise CheckpointError('Checkpoint config is not a JSON object.')
    if not (isinstance(manifest['loss_history'], list) and
            isinstance(manifest['val_history'], list)):
        raise CheckpointError('Checkpoint loss histories must be lists.')
    if not isinstance(manifest['tensors'], list):
        raise CheckpointError('Checkpoint tensor list is malformed.')
    for idx, entry in enumerate(manifest['tensors']):
        if not isinstance(entry, dict) or any(key not in entry for key in ENTRY_KEYS):
            raise CheckpointError('Tensor entry {} lacks one of: {}.'.format(
                idx, ', '.join(ENTRY_KEYS)))
        shape = entry['shape']
        if not (isinstance(shape, list) and all(_is_count(n) for n in shape) and
                _is_count(entry['offset']) and _is_count(entry['nbytes'])):
            raise CheckpointError('Tensor entry {} has a malformed shape or '
                                  'offset.'.format(idx))


def save_checkpoint(model, path):
    """
    Writes `model` to `path`.

    Args
    ----
      model: TrainedModel.
      path: str.

    Returns
    -------
      dict: the manifest written.
    """
    entries = []
    chunks = []
    offset = 0
    for name, param in _parameters(model.detector):
        data = np.ascontiguousarray(
            param.detach().cpu().numpy().astype('<f4')).tobytes()
        entries.append({
            'name': name,
            'shape': list(param.shape),
            'dtype': 'float32',
            'offset': offset,
            'nbytes': len(data),
        })
        chunks.append(data)
        offset += len(data)
    payload = b''.join(chunks)
    config = model.config.to_dict()
    manifest = {
        'format': FORMAT_VERSION,
        'config': config,
        'fingerprint': config_fingerprint(config),
        'loss_history': model.loss_history,
        'val_history': model.val_history,
        'final_nll': model.final_nll,
        'tensors': entries,
        'payload_bytes': len(payload),
        'payload_sha256': hashlib.sha256(payload).hexdigest(),
    }
    header = json.dumps(manifest, sort_keys=True).encode('utf-8')
    with open(path, 'wb') as f:
        f.write(MAGIC)
        f.write(_LENGTH.pack(len(header)))
        f.write(header)
        f.write(payload)
    logger.debug('Wrote %d tensors (%d bytes) to %s.', len(entries), len(payload), path)
    return manifest


def read_manifest(path):
    """Returns (manifest, payload bytes) after checking the container layout."""
    try:
        with open(path, 'rb') as f:
            blob = f.read()
    except (IOError, OSError) as e:
        raise CheckpointError('Cannot read checkpoint {}: {}'.format(path, e))
    if blob[:len(MAGIC)] != MAGIC:
        raise CheckpointError('{} is not a checkpoint file.'.format(path))
    start = len(MAGIC) + _LENGTH.size
    if len(blob) < start:
        raise CheckpointError('Checkpoint header is truncated.')
    (length,) = _LENGTH.unpack(blob[len(MAGIC):start])
    try:
        manifest = json.loads(blob[start:start + length].decode('utf-8'))
    except ValueError as e:
        raise CheckpointError('Checkpoint manifest does not parse: {}'.format(e))
    _check_manifest(manifest)
    payload = blob[start + length:]
    if manifest.get('format') != FORMAT_VERSION:
        raise CheckpointError('Unsupported checkpoint format {}.'.format(
            manifest.get('format')))
    expected = 0
    for entry in manifest['tensors']:
        if entry['dtype'] != 'float32':
            raise CheckpointError('Tensor {} has unsupported dtype {}.'.format(
                entry['name'], entry['dtype']))
        nbytes = 4 * int(np.prod(entry['shape'], dtype=np.int64))
        if entry['nbytes'] != nbytes or entry['offset'] != expected:
            raise CheckpointError('Tensor {} does not match its declared shape.'.format(
                entry['name']))
        expected += nbytes
    if len(payload) != expected or manifest['payload_bytes'] != expected:
        raise CheckpointError('Payload has {} bytes but the manifest declares {}.'.format(
            len(payload), expected))
    if hashlib.sha256(payload).hexdigest() != manifest['payload_sha256']:
        raise CheckpointError('Checkpoint payload is corrupted (checksum mismatch).')
    return manifest, payload


def load_checkpoint(path, expected_fingerprint=None):
    """
    Reads a checkpoint and rebuilds the trained model.

    Args
    ----
      path: str.
      expected_fingerprint: str, optional.
          Shape fingerprint the caller requires, e.g. from a config file.

    Returns
    -------
      TrainedModel.

    Raises
    ------
      CheckpointError: if the file is corrupted or does not match the rebuilt model.
    """
    manifest, payload = read_manifest(path)
    try:
        fingerprint = config_fingerprint(manifest['config'])
        config = TrainConfig(**manifest['config'])
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointError('Checkpoint config is invalid: {}'.format(e))
    if fingerprint != manifest['fingerprint']:
        raise CheckpointError('Checkpoint config does not match its fingerprint.')
    if expected_fingerprint is not None and expected_fingerprint != fingerprint:
        raise CheckpointError('Checkpoint was trained with a different configuration '
                              '(fingerprint {} != {}).'.format(
                                  fingerprint[:12], expected_fingerprint[:12]))
    detector = build_detector(config)
    params = dict(_parameters(detector))
    names = [entry['name'] for entry in manifest['tensors']]
    if sorted(names) != sorted(params):
        raise CheckpointError('Checkpoint tensors do not match the model parameters.')
    with torch.no_grad():
        for entry in manifest['tensors']:
            param = params[entry['name']]
            if list(param.shape) != entry['shape']:
                raise CheckpointError('Tensor {} has shape {}, the model expects '
                                      '{}.'.format(entry['name'], entry['shape'],
                                                   list(param.shape)))
            start = entry['offset']
            values = np.frombuffer(payload[start:start + entry['nbytes']], dtype='<f4')
            param.copy_(torch.from_numpy(values.reshape(entry['shape']).copy()))
    detector.eval()
    return TrainedModel(detector, config, manifest['loss_history'],
                        manifest['val_history'], manifest['final_nll'])
