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
Run configuration: JSON files with a strict schema, command-line overrides and the
fingerprints that tie checkpoints and reports to the configuration that produced them.
"""


from __future__ import absolute_import, division, print_function

import copy
import hashlib
import io
import json
import os

from h2iad.tasm import TASMConfig
from h2iad.train import TrainConfig

THREADS_ENV = 'H2IAD_THREADS'

DEFAULTS = {
    'seed': 0,
    'tasm': {
        'N': 8,
        'E': 64,
        'T': 16,
        'D': None,
        'pe_mode': 'synchronized',
        'use_drem': True,
        'share_params': True,
        'heads': 4,
    },
    'train': {
        'epochs': 50,
        'initial_lr': 1e-3,
        'final_lr': 1e-5,
        'batch_size': 32,
        'flow_layers': 10,
        'holdout_fraction': 0.,
        'grad_clip': None,
        'normalize': True,
    },
    'data': {
        'test_fraction': 0.2,
    },
    'paths': {
        'data': None,
        'out': None,
    },
}

# Accepted types per key; `None` in a tuple allows null.
SCHEMA = {
    'seed': (int,),
    'tasm': {
        'N': (int,), 'E': (int,), 'T': (int,), 'D': (int, None), 'pe_mode': (str,),
        'use_drem': (bool,), 'share_params': (bool,), 'heads': (int,),
    },
    'train': {
        'epochs': (int,), 'initial_lr': (float,), 'final_lr': (float,),
        'batch_size': (int,), 'flow_layers': (int,), 'holdout_fraction': (float,),
        'grad_clip': (float, None), 'normalize': (bool,),
    },
    'data': {'test_fraction': (float,)},
    'paths': {'data': (str, None), 'out': (str, None)},
}

# Command-line spellings of the positional embedding modes.
PE_ALIASES = {
    'sync': 'synchronized',
    'unsync': 'unsynchronized',
    'sinusoidal': 'sinusoidal',
}


def _check_value(path, value, allowed):
    if value is None:
        if None in allowed:
            return None
        raise ValueError('{} cannot be null.'.format(path))
    if isinstance(value, bool):
        if bool in allowed:
            return value
        raise ValueError('{} must not be a boolean.'.format(path))
    if int in allowed and isinstance(value, int):
        return value
    if float in allowed and isinstance(value, (int, float)):
        return float(value)
    if str in allowed and isinstance(value, str):
        return value
    names = ['null' if t is None else t.__name__ for t in allowed]
    raise ValueError('{} must be of type {}.'.format(path, ' or '.join(names)))


def _merge(base, values, schema, prefix=''):
    if not isinstance(values, dict):
        raise ValueError('{} must be a JSON object.'.format(prefix or 'config'))
    unknown = sorted(set(values) - set(schema))
    if unknown:
        raise ValueError('Unknown config key(s): {}.'.format(
            ', '.join(prefix + k for k in unknown)))
    for key, value in values.items():
        if isinstance(schema[key], dict):
            _merge(base[key], value, schema[key], prefix + key + '.')
        else:
            base[key] = _check_value(prefix + key, value, schema[key])
    return base


class RunConfig(object):
    """
    Fully resolved run configuration. Values come from `DEFAULTS`, then from `values`
    (typically a config file) and then from each mapping in `overrides`.

    Args
    ----
      values: dict, optional.
      overrides: list of dict, optional.

    Raises
    ------
      ValueError: if a key is unknown or a value has the wrong type or range.
    """
    def __init__(self, values=None, overrides=None):
        resolved = copy.deepcopy(DEFAULTS)
        for source in [values or {}] + list(overrides or []):
            _merge(resolved, source, SCHEMA)
        self._values = resolved
        # Range checks of the dataclasses, with a placeholder joint count.
        self.train_config('', joint_count=resolved['tasm']['D'] or 1)
        if not 0 <= resolved['data']['test_fraction'] < 1:
            raise ValueError('data.test_fraction must be within [0, 1).')

    @classmethod
    def from_file(cls, path, overrides=None):
        return cls(load_config(path), overrides)

    def __getitem__(self, key):
        return self._values[key]

    @property
    def seed(self):
        return self._values['seed']

    def to_dict(self):
        return copy.deepcopy(self._values)

    def to_json(self, joint_count=None):
        """JSON of every value; `joint_count` resolves a null `tasm.D`."""
        values = self.to_dict()
        if joint_count is not None:
            values['tasm'] = self.tasm_config(joint_count).to_dict()
        return json.dumps(values, sort_keys=True, indent=2)

    def tasm_config(self, joint_count=None):
        values = dict(self._values['tasm'])
        if values['D'] is None:
            if joint_count is None:
                raise ValueError('tasm.D is not set and no dataset provides it.')
            values['D'] = joint_count
        return TASMConfig(**values)

    def train_config(self, normal_category, joint_count=None, progress=False):
        """Builds the `TrainConfig` of one normal category."""
        return TrainConfig(
            seed=self.seed,
            normal_category=normal_category,
            tasm=self.tasm_config(joint_count),
            progress=progress,
            **self._values['train']
        )


def load_config(path):
    """
    Reads a JSON config file.

    Raises
    ------
      ValueError: if the file cannot be read or is not a JSON object.
    """
    try:
        with io.open(path, 'r', encoding='utf-8') as f:
            values = json.load(f)
    except (IOError, OSError) as e:
        raise ValueError('Cannot read config {}: {}'.format(path, e))
    except ValueError as e:
        raise ValueError('Config {} is not valid JSON: {}'.format(path, e))
    if not isinstance(values, dict):
        raise ValueError('Config {} must hold a JSON object.'.format(path))
    return values


def _digest(values):
    canonical = json.dumps(values, sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def config_fingerprint(train_config):
    """
    SHA-256 of the shape-relevant part of a training config (encoder settings and flow
    depth). Two models with equal fingerprints have interchangeable parameter layouts.

    Args
    ----
      train_config: TrainConfig or the dict produced by `TrainConfig.to_dict`.
    """
    if isinstance(train_config, TrainConfig):
        train_config = train_config.to_dict()
    return _digest({'tasm': dict(train_config['tasm']),
                    'flow_layers': train_config['flow_layers']})


def full_fingerprint(values):
    """SHA-256 of a whole configuration mapping."""
    return _digest(values)


def thread_count(environ=None):
    """
    Worker and intra-op thread bound from `H2IAD_THREADS`; `None` when unset.

    Raises
    ------
      ValueError: if the variable is set but is not a positive integer.
    """
    environ = os.environ if environ is None else environ
    value = environ.get(THREADS_ENV)
    if value is None or value == '':
        return None
    try:
        count = int(value)
    except ValueError:
        count = 0
    if count < 1:
        raise ValueError('{} must be a positive integer, got "{}".'.format(
            THREADS_ENV, value))
    return count
